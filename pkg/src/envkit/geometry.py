"""Discretized warped-product spacetimes ``I x S`` with metric ``dt^2 - f(t) dx^2``.

Rows are time slices ``t_i``; columns are spatial cells centred at ``x_j = j*dx``.
The spatial section is either an interval (simply connected, reflecting ends)
or a circle of circumference ``L = n_x*dx``.
"""

from __future__ import annotations

import enum
import hashlib
import math
from dataclasses import dataclass, field
from typing import Any, Mapping, NamedTuple, Sequence

import numpy as np

from .errors import BoundaryRow, ConfigError, IndexOutOfRange, NonPositiveWarp, ViolatedCFL

CFL_MARGIN = 0.9
# relative slack so that dt == 0.9*dx*sqrt(f_min) is accepted despite rounding
_CFL_RTOL = 1e-12


class Topology(str, enum.Enum):
    INTERVAL = "interval"
    CIRCLE = "circle"

    @classmethod
    def _missing_(cls, value):
        if isinstance(value, str):
            return cls.__members__.get(value.upper())
        return None


class Cell(NamedTuple):
    i: int
    j: int


@dataclass(frozen=True)
class WarpKind:
    """Generator tag for the warp function ``f``.

    ``constant``: f = value; ``exponential``: f = exp(rate*t);
    ``power_law``: f = t**exponent (t > 0); ``custom``: raw samples.
    """

    kind: str
    param: float | None = None
    claims_analytic: bool = True

    _KINDS = ("constant", "exponential", "power_law", "custom")

    def __post_init__(self) -> None:
        if self.kind not in self._KINDS:
            raise ConfigError(f"unknown warp kind {self.kind!r}")

    @property
    def analytic(self) -> bool:
        # tagged families are analytic in t by construction; custom arrays only claim it
        return self.kind != "custom" or self.claims_analytic

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "constant":
            return np.full_like(t, 1.0 if self.param is None else float(self.param))
        if self.kind == "exponential":
            return np.exp(float(self.param) * t)
        if self.kind == "power_law":
            if np.any(t <= 0):
                raise NonPositiveWarp("power-law warp needs t > 0 on every row")
            return t ** float(self.param)
        raise ConfigError("custom warps have no generator; pass samples")

    def scalar_curvature(self, t: float) -> float:
        """Closed-form R(t) for the tagged families."""
        if self.kind == "constant":
            return 0.0
        if self.kind == "exponential":
            return -0.5 * float(self.param) ** 2
        if self.kind == "power_law":
            p = float(self.param)
            return p * (2.0 - p) / (2.0 * t * t)
        raise ConfigError("custom warps have no closed-form curvature")

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"kind": self.kind}
        if self.param is not None:
            d["param"] = self.param
        if self.kind == "custom":
            d["claims_analytic"] = self.claims_analytic
        return d


def curvature_from_warp(f: float, df: float, d2f: float) -> float:
    """Scalar curvature of ``dt^2 - f(t) dx^2`` from ``f, f', f''``.

    Sign convention: Ric_{bd} = R^a_{bad} and R = g^{bd} Ric_{bd} with the
    (+,-) signature, which gives R = -2 a''/a for a = sqrt(f).
    """
    return -(d2f / f - df * df / (2.0 * f * f))


@dataclass(frozen=True, eq=False)
class SpacetimeGrid:
    topology: Topology
    n_t: int
    n_x: int
    t0: float
    dt: float
    dx: float
    warp: np.ndarray
    warp_kind: WarpKind
    # explicit row times; None means the uniform rows t0 + i*dt
    row_times: np.ndarray | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.n_t < 2 or self.n_x < 2:
            raise ConfigError("need n_t >= 2 and n_x >= 2")
        if self.dt <= 0 or self.dx <= 0:
            raise ConfigError("dt and dx must be positive")
        w = np.array(self.warp, dtype=float)
        if w.shape != (self.n_t,):
            raise ConfigError(f"warp must have {self.n_t} samples, got {w.shape}")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise NonPositiveWarp("warp samples must be finite and strictly positive")
        w.setflags(write=False)
        object.__setattr__(self, "warp", w)
        object.__setattr__(self, "topology", Topology(self.topology))
        if self.row_times is not None:
            rt = np.array(self.row_times, dtype=float)
            if rt.shape != (self.n_t,) or np.any(np.diff(rt) <= 0):
                raise ConfigError("row_times must be strictly increasing with n_t entries")
            rt.setflags(write=False)
            object.__setattr__(self, "row_times", rt)
        ratio = self.cfl_ratio()
        if ratio > CFL_MARGIN * (1 + _CFL_RTOL):
            raise ViolatedCFL(
                f"dt/(dx*sqrt(f)) reaches {ratio:.6g} > {CFL_MARGIN}; shrink dt or refine less in x"
            )

    # -- derived geometry -------------------------------------------------
    @property
    def uniform(self) -> bool:
        return self.row_times is None

    @property
    def times(self) -> np.ndarray:
        if self.row_times is not None:
            return self.row_times
        return self.t0 + self.dt * np.arange(self.n_t)

    @property
    def xs(self) -> np.ndarray:
        return self.dx * np.arange(self.n_x)

    @property
    def length(self) -> float:
        return self.n_x * self.dx

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_t, self.n_x)

    @property
    def row_steps(self) -> np.ndarray:
        """Time increments between consecutive rows (length n_t - 1)."""
        return np.diff(self.times)

    @property
    def warp_mid(self) -> np.ndarray:
        """Warp at the row midpoints, linearly interpolated."""
        return 0.5 * (self.warp[1:] + self.warp[:-1])

    @property
    def cone_steps(self) -> np.ndarray:
        """Spatial distance light travels between row i and row i+1."""
        if "cone_steps" not in self._cache:
            s = self.row_steps / np.sqrt(self.warp_mid)
            s.setflags(write=False)
            self._cache["cone_steps"] = s
        return self._cache["cone_steps"]

    @property
    def cone_offsets(self) -> np.ndarray:
        """Cumulative light travel from row 0: ``S[i] = sum(cone_steps[:i])``."""
        if "cone_offsets" not in self._cache:
            s = np.concatenate([[0.0], np.cumsum(self.cone_steps)])
            s.setflags(write=False)
            self._cache["cone_offsets"] = s
        return self._cache["cone_offsets"]

    def light_travel(self, i0: int, i1: int) -> float:
        """Light travel distance between rows ``i0`` and ``i1`` (order-free)."""
        s = self.cone_offsets
        return abs(float(s[i1] - s[i0]))

    def cfl_ratio(self) -> float:
        fmin = np.minimum(self.warp[1:], self.warp[:-1])
        return float(np.max(self.row_steps / (self.dx * np.sqrt(fmin))))

    @property
    def grid_id(self) -> str:
        if "grid_id" not in self._cache:
            h = hashlib.sha1()
            h.update(f"{self.topology.value}|{self.n_t}|{self.n_x}|{self.dx!r}".encode())
            h.update(np.ascontiguousarray(self.times, dtype="<f8").tobytes())
            h.update(np.ascontiguousarray(self.warp, dtype="<f8").tobytes())
            self._cache["grid_id"] = h.hexdigest()[:16]
        return self._cache["grid_id"]

    def check_cell(self, c: Sequence[int]) -> Cell:
        i, j = int(c[0]), int(c[1])
        if not (0 <= i < self.n_t and 0 <= j < self.n_x):
            raise IndexOutOfRange(f"cell {(i, j)} outside {self.shape} grid")
        return Cell(i, j)

    def spatial_distance(self, x1, x2):
        """Distance along S; on the circle the shorter arc."""
        d = np.abs(np.asarray(x1, dtype=float) - np.asarray(x2, dtype=float))
        if self.topology is Topology.CIRCLE:
            L = self.length
            d = np.mod(d, L)
            d = np.minimum(d, L - d)
        return d

    def warp_at(self, t):
        """Warp at arbitrary times by linear interpolation of the row samples."""
        return np.interp(t, self.times, self.warp)

    def to_config(self) -> dict[str, Any]:
        d: dict[str, Any] = {
            "topology": self.topology.value,
            "n_t": self.n_t,
            "n_x": self.n_x,
            "t0": self.t0,
            "dt": self.dt,
            "dx": self.dx,
            "warp": self.warp_kind.to_dict(),
        }
        if self.warp_kind.kind == "custom":
            d["warp"]["samples"] = [float(v) for v in self.warp]
        if self.row_times is not None:
            d["row_times"] = [float(v) for v in self.row_times]
        return d


@dataclass(frozen=True)
class GridConfig:
    topology: str = "interval"
    n_t: int = 64
    n_x: int = 64
    t0: float = 0.0
    dt: float | None = None
    dx: float = 1.0 / 64
    warp: Mapping[str, Any] = field(default_factory=lambda: {"kind": "constant"})

    @classmethod
    def from_mapping(cls, d: Mapping[str, Any]) -> "GridConfig":
        known = {"topology", "n_t", "n_x", "t0", "dt", "dx", "warp"}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown grid keys: {sorted(extra)}")
        return cls(**dict(d))


def _parse_warp(spec: Mapping[str, Any]) -> tuple[WarpKind, np.ndarray | None]:
    kind = spec.get("kind", "constant")
    params = dict(spec.get("params", {}))
    for key in ("value", "rate", "exponent", "param"):
        if key in spec:
            params.setdefault(key, spec[key])
    if kind == "custom":
        if "samples" not in spec:
            raise ConfigError("custom warp needs 'samples'")
        wk = WarpKind("custom", claims_analytic=bool(spec.get("claims_analytic", False)))
        return wk, np.asarray(spec["samples"], dtype=float)
    param = params.get("param")
    if kind == "constant":
        param = params.get("value", param)
    elif kind == "exponential":
        param = params.get("rate", param if param is not None else 1.0)
    elif kind == "power_law":
        param = params.get("exponent", param)
        if param is None:
            raise ConfigError("power_law warp needs an exponent")
    return WarpKind(kind, None if param is None else float(param)), None


def build_grid(config: GridConfig | Mapping[str, Any]) -> SpacetimeGrid:
    """Sample the warp on the time rows and validate the result.

    ``dt`` defaults to half the largest CFL-admissible step.
    """
    if not isinstance(config, GridConfig):
        config = GridConfig.from_mapping(config)
    n_t, n_x = int(config.n_t), int(config.n_x)
    if n_t < 2 or n_x < 2:
        raise ConfigError("need n_t >= 2 and n_x >= 2")
    wk, samples = _parse_warp(config.warp)
    dx = float(config.dx)
    t0 = float(config.t0)
    if config.dt is None:
        if samples is None:
            # f is sampled after dt is known; use the generator's minimum on a unit window guess
            probe = wk(t0 + np.linspace(0.0, n_t * dx, 4 * n_t))
            dt = 0.5 * dx * math.sqrt(float(probe.min()))
        else:
            dt = 0.5 * dx * math.sqrt(float(samples.min()))
    else:
        dt = float(config.dt)
    times = t0 + dt * np.arange(n_t)
    warp = samples if samples is not None else wk(times)
    if warp.shape != (n_t,):
        raise ConfigError(f"custom warp needs {n_t} samples")
    if np.any(~np.isfinite(warp)) or np.any(warp <= 0):
        raise NonPositiveWarp("warp must be strictly positive on every row")
    return SpacetimeGrid(Topology(config.topology), n_t, n_x, t0, dt, dx, warp, wk)


def minkowski(n_t: int, n_x: int, *, dx: float = 1.0, dt: float | None = None,
              topology: str = "interval", t0: float = 0.0) -> SpacetimeGrid:
    """Flat grid; ``dt`` defaults to ``dx/2``."""
    return build_grid(GridConfig(topology, n_t, n_x, t0, dx / 2 if dt is None else dt, dx))


def volume_weight(grid: SpacetimeGrid, c: Sequence[int]) -> float:
    i, j = grid.check_cell(c)
    return float(volume_weights(grid)[i, j])


def volume_weights(grid: SpacetimeGrid) -> np.ndarray:
    """``sqrt(f(t_i)) * dt_i * dx`` for every cell, shape ``(n_t, n_x)``."""
    if "weights" not in grid._cache:
        if grid.uniform:
            dts = np.full(grid.n_t, grid.dt)
        else:
            t = grid.times
            dts = np.empty(grid.n_t)
            dts[1:-1] = 0.5 * (t[2:] - t[:-2])
            dts[0] = t[1] - t[0]
            dts[-1] = t[-1] - t[-2]
        w = np.sqrt(grid.warp) * dts * grid.dx
        out = np.repeat(w[:, None], grid.n_x, axis=1)
        out.setflags(write=False)
        grid._cache["weights"] = out
    return grid._cache["weights"]


def scalar_curvature(grid: SpacetimeGrid, i: int) -> float:
    """Scalar curvature on row ``i``.

    Tagged families use their closed form; custom warps use second-order
    central differences of the samples, which need ``1 <= i <= n_t - 2``.
    """
    if not 0 <= i < grid.n_t:
        raise IndexOutOfRange(f"row {i} outside grid")
    if grid.warp_kind.kind != "custom":
        return grid.warp_kind.scalar_curvature(float(grid.times[i]))
    if not 1 <= i <= grid.n_t - 2:
        raise BoundaryRow(f"row {i} has no central stencil")
    t = grid.times
    f = grid.warp
    h1, h2 = t[i] - t[i - 1], t[i + 1] - t[i]
    df = (h1 * h1 * f[i + 1] + (h2 * h2 - h1 * h1) * f[i] - h2 * h2 * f[i - 1]) / (h1 * h2 * (h1 + h2))
    d2f = 2.0 * (h1 * f[i + 1] - (h1 + h2) * f[i] + h2 * f[i - 1]) / (h1 * h2 * (h1 + h2))
    return curvature_from_warp(float(f[i]), float(df), float(d2f))


def curvature_rows(grid: SpacetimeGrid) -> np.ndarray:
    """R on every row; custom boundary rows copy their neighbour."""
    out = np.empty(grid.n_t)
    for i in range(grid.n_t):
        try:
            out[i] = scalar_curvature(grid, i)
        except BoundaryRow:
            out[i] = np.nan
    if np.isnan(out[0]):
        out[0] = out[1]
    if np.isnan(out[-1]):
        out[-1] = out[-2]
    return out


def conformal_rescale(grid: SpacetimeGrid, omega) -> SpacetimeGrid:
    """Rescale the metric by ``omega(t)`` and return it in warped normal form.

    ``omega*(dt^2 - f dx^2)`` becomes ``dT^2 - (omega f) dx^2`` with
    ``dT = sqrt(omega) dt``.  Rows are kept one-to-one; each new row spacing is
    chosen so that the light travel per row is unchanged, which is exactly the
    statement that null cones only see the conformal class.
    """
    omega = np.asarray(omega, dtype=float)
    if omega.shape == ():
        omega = np.full(grid.n_t, float(omega))
    if omega.shape != (grid.n_t,):
        raise ConfigError(f"omega needs {grid.n_t} samples")
    if np.any(~np.isfinite(omega)) or np.any(omega <= 0):
        raise NonPositiveWarp("conformal factor must be strictly positive")
    if np.all(omega == 1.0):
        return grid
    new_warp = omega * grid.warp
    mid_old = np.sqrt(grid.warp_mid)
    mid_new = np.sqrt(0.5 * (new_warp[1:] + new_warp[:-1]))
    steps = grid.row_steps * (mid_new / mid_old)
    t0 = float(grid.times[0])
    times = t0 + np.concatenate([[0.0], np.cumsum(steps)])
    kind = WarpKind("custom", claims_analytic=grid.warp_kind.analytic)
    if np.allclose(steps, steps[0], rtol=1e-13, atol=0.0):
        return SpacetimeGrid(grid.topology, grid.n_t, grid.n_x, t0, float(steps[0]),
                             grid.dx, new_warp, kind)
    return SpacetimeGrid(grid.topology, grid.n_t, grid.n_x, t0, float(steps.mean()),
                         grid.dx, new_warp, kind, row_times=times)
