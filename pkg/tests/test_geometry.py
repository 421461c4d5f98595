import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles as O
from envkit.errors import BoundaryRow, ConfigError, IndexOutOfRange, NonPositiveWarp, ViolatedCFL
from envkit.geometry import (GridConfig, Topology, build_grid, conformal_rescale, curvature_from_warp,
                             curvature_rows, minkowski, scalar_curvature, volume_weight, volume_weights)


def test_minkowski_strip_accepted():
    g = build_grid({"topology": "Interval", "n_t": 64, "n_x": 64, "dx": 1 / 64, "dt": 1 / 128})
    assert g.topology is Topology.INTERVAL
    assert g.shape == (64, 64)
    assert np.all(g.warp == 1.0)


def test_cfl_bound_on_exponential_circle():
    dx = 0.05
    g = build_grid({"topology": "circle", "n_t": 21, "n_x": 20, "dx": dx, "dt": 0.9 * dx,
                    "warp": {"kind": "exponential", "rate": 1.0}})
    assert g.cfl_ratio() == pytest.approx(0.9)
    with pytest.raises(ViolatedCFL):
        build_grid({"topology": "circle", "n_t": 21, "n_x": 20, "dx": dx, "dt": 0.95 * dx,
                    "warp": {"kind": "exponential", "rate": 1.0}})
    # a shrinking warp tightens the bound on late rows
    with pytest.raises(ViolatedCFL):
        build_grid({"n_t": 21, "n_x": 20, "dx": dx, "dt": 0.85 * dx, "warp": {"kind": "exponential", "rate": -1.0}})


def test_rejects_degenerate_warp_and_bad_config():
    with pytest.raises(NonPositiveWarp):
        build_grid({"n_t": 3, "n_x": 4, "dx": 1.0, "dt": 0.1, "warp": {"kind": "custom", "samples": [1, 0, 1]}})
    with pytest.raises(NonPositiveWarp):
        build_grid({"n_t": 3, "n_x": 4, "dx": 1.0, "dt": 0.1, "t0": -1.0,
                    "warp": {"kind": "power_law", "exponent": 2}})
    with pytest.raises(ConfigError):
        build_grid({"n_t": 1, "n_x": 4})
    with pytest.raises(ConfigError):
        GridConfig.from_mapping({"n_t": 4, "bogus": 1})


def test_volume_weights():
    g = minkowski(4, 4, dx=0.1, dt=0.05)
    assert np.allclose(volume_weights(g), 0.005)
    g4 = build_grid({"n_t": 4, "n_x": 4, "dx": 0.1, "dt": 0.1, "warp": {"kind": "constant", "value": 4.0}})
    assert volume_weight(g4, (2, 3)) == pytest.approx(0.02)
    ge = build_grid({"n_t": 5, "n_x": 4, "dx": 0.1, "dt": 0.05, "t0": 1.9,
                     "warp": {"kind": "exponential", "rate": 1.0}})
    i = 2
    assert ge.times[i] == pytest.approx(2.0)
    assert volume_weight(ge, (i, 0)) == pytest.approx(math.e * 0.05 * 0.1)
    with pytest.raises(IndexOutOfRange):
        volume_weight(g, (4, 0))


def test_curvature_formula_matches_symbolic_oracle():
    t = sp.Symbol("t", real=True)
    for expr in (sp.Integer(1), sp.exp(2 * t), sp.exp(t), t ** 3, 2 + sp.sin(t)):
        R = O.ricci_scalar_symbolic(expr, t)
        for tv in (0.7, 1.3):
            f = float(expr.subs(t, tv))
            df = float(sp.diff(expr, t).subs(t, tv))
            d2f = float(sp.diff(expr, t, 2).subs(t, tv))
            assert curvature_from_warp(f, df, d2f) == pytest.approx(float(R.subs(t, tv)), rel=1e-12, abs=1e-12)


def test_scalar_curvature_closed_form_and_finite_differences():
    flat = minkowski(8, 4)
    assert all(scalar_curvature(flat, i) == 0.0 for i in range(8))
    tagged = build_grid({"n_t": 41, "n_x": 8, "dx": 0.1, "dt": 0.01, "warp": {"kind": "exponential", "rate": 2.0}})
    t = sp.Symbol("t", real=True)
    want = float(O.ricci_scalar_symbolic(sp.exp(2 * t), t))
    assert scalar_curvature(tagged, 5) == pytest.approx(want, rel=1e-12)
    custom = build_grid({"n_t": 41, "n_x": 8, "dx": 0.1, "dt": 0.01,
                         "warp": {"kind": "custom", "samples": list(np.exp(2 * tagged.times))}})
    for i in range(1, 40):
        assert scalar_curvature(custom, i) == pytest.approx(want, rel=1e-4)
    with pytest.raises(BoundaryRow):
        scalar_curvature(custom, 0)
    rows = curvature_rows(custom)
    assert rows[0] == rows[1] and rows[-1] == rows[-2]
    power = build_grid({"n_t": 10, "n_x": 8, "dx": 0.5, "dt": 0.01, "t0": 1.0,
                        "warp": {"kind": "power_law", "exponent": 3}})
    want_p = O.ricci_scalar_symbolic(t ** 3, t)
    assert scalar_curvature(power, 4) == pytest.approx(float(want_p.subs(t, power.times[4])), rel=1e-12)


def test_cone_steps_match_warp():
    g = build_grid({"n_t": 6, "n_x": 4, "dx": 1.0, "dt": 0.2, "warp": {"kind": "exponential", "rate": 1.0}})
    f = np.exp(g.times)
    assert np.allclose(g.cone_steps, 0.2 / np.sqrt(0.5 * (f[1:] + f[:-1])))
    assert g.light_travel(4, 1) == pytest.approx(g.cone_steps[1:4].sum())


def test_conformal_rescale_identity_and_constant():
    g = minkowski(10, 8, dx=0.5)
    assert conformal_rescale(g, 1.0) is g
    g4 = conformal_rescale(g, 4.0)
    assert g4.uniform and g4.dt == pytest.approx(2 * g.dt)
    assert np.allclose(g4.warp, 4.0)
    assert np.allclose(g4.cone_steps, g.cone_steps)
    with pytest.raises(NonPositiveWarp):
        conformal_rescale(g, -1.0)
    with pytest.raises(ConfigError):
        conformal_rescale(g, np.ones(3))


@settings(max_examples=40, deadline=None)
@given(st.floats(-1.5, 1.5), st.floats(0.2, 5.0), st.integers(3, 20))
def test_conformal_rescale_preserves_light_travel(rate, scale, n_t):
    g = build_grid({"n_t": n_t, "n_x": 5, "dx": 0.3, "warp": {"kind": "exponential", "rate": rate}})
    omega = scale * np.exp(0.7 * g.times)
    g2 = conformal_rescale(g, omega)
    assert np.allclose(g2.cone_steps, g.cone_steps, rtol=1e-12)
    assert np.allclose(g2.warp, omega * g.warp)
    assert g2.cfl_ratio() <= 0.9


def test_grid_id_tracks_content():
    a = minkowski(5, 5)
    assert a.grid_id == minkowski(5, 5).grid_id
    assert a.grid_id != minkowski(5, 6).grid_id
    assert a.grid_id != minkowski(5, 5, topology="circle").grid_id


def test_circle_distance_wraps():
    g = minkowski(3, 10, dx=0.1, topology="circle")
    assert g.spatial_distance(0.0, 0.9) == pytest.approx(0.1)
    assert g.spatial_distance(0.2, 0.7) == pytest.approx(0.5)
