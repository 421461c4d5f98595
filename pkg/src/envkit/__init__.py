"""Causal structure, envelopes and Klein-Gordon quantization on discretized
1+1 warped spacetimes ``dt^2 - f(t) dx^2``."""

__version__ = "0.1.0"

from .causal import (FUTURE, PAST, Direction, Region, causal_complement, causal_completion,
                     domain_of_dependence, is_achronal, is_cauchy_surface, reach)
from .curves import CurvePolyline, c1_distance, diamond, find_timelike_path, is_timelike, lifted_diamond, tube_region
from .envelope import EnvelopeTrace, cauchy_step, diamond_step, envelope, is_envelope_fixed_point
from .errors import *  # noqa: F401,F403
from .geometry import (Cell, GridConfig, SpacetimeGrid, Topology, build_grid, conformal_rescale,
                       minkowski, scalar_curvature, volume_weight)
from .kg import (ADVANCED, RETARDED, CauchyData, FieldConfig, GreenData, GridFunction, apply_P, eta,
                 evolve, green, green_data, sigma_cauchy, sigma_hat)
from .quasifree import (QuasifreeState, SymplecticSpace, check_domination, density_residual,
                        ground_state_mu, omega_value, one_particle, weyl_gram)
