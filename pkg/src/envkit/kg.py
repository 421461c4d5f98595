"""Klein-Gordon operator ``P = box_g + m^2 + kappa R (+ a.d + V)`` on a grid.

The time part is discretized in self-adjoint form

    (1/(sqrt f_i h_i)) [ a_{i+1/2} (psi_{i+1}-psi_i)/dt_+ - a_{i-1/2} (psi_i-psi_{i-1})/dt_- ]

with ``a_{i+1/2} = sqrt((f_i + f_{i+1})/2)`` and ``h_i`` the centred step.
Multiplied by the cell weights ``sqrt(f_i) h_i dx`` the operator is a
symmetric matrix (without first-order terms), so the retarded and advanced
inverses are exact adjoints of each other and ``sigma_hat`` is antisymmetric
to rounding.  Space: Dirichlet walls on the interval, periodic on the circle.
"""

from __future__ import annotations

import enum
import hashlib
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .causal import FUTURE, PAST, Direction
from .errors import ConfigError, GridMismatch, SliceMismatch, SupportTooCloseToBoundary
from .geometry import SpacetimeGrid, Topology, curvature_rows, volume_weights

log = logging.getLogger(__name__)

SCHEME_VERSION = "leapfrog-sa-1"


class GreenKind(str, enum.Enum):
    RETARDED = "Retarded"
    ADVANCED = "Advanced"


RETARDED = GreenKind.RETARDED
ADVANCED = GreenKind.ADVANCED


@dataclass(frozen=True, eq=False)
class FieldConfig:
    m: float = 0.0
    kappa: float = 0.0
    a_t: np.ndarray | float | None = None
    a_x: np.ndarray | float | None = None
    V: np.ndarray | float | None = None
    analytic_in_t: bool = True

    def __post_init__(self) -> None:
        if self.m < 0:
            raise ConfigError("mass must be >= 0")
        for name in ("a_t", "a_x", "V"):
            v = getattr(self, name)
            if v is not None and not np.all(np.isfinite(np.asarray(v, dtype=float))):
                raise ConfigError(f"{name} must be finite")

    @property
    def has_first_order(self) -> bool:
        return self.a_t is not None or self.a_x is not None

    @classmethod
    def from_mapping(cls, d: Mapping[str, Any]) -> "FieldConfig":
        extra = set(d) - {"m", "kappa", "a_t", "a_x", "V", "analytic_in_t"}
        if extra:
            raise ConfigError(f"unknown field keys: {sorted(extra)}")
        kw = {k: (np.asarray(v, dtype=float) if k in ("a_t", "a_x", "V") and isinstance(v, list) else v)
              for k, v in d.items()}
        return cls(**kw)

    def to_dict(self) -> dict:
        def enc(v):
            if v is None:
                return None
            a = np.asarray(v, dtype=float)
            if a.ndim == 0:
                return float(a)
            return {"shape": list(a.shape),
                    "sha1": hashlib.sha1(np.ascontiguousarray(a, dtype="<f8").tobytes()).hexdigest()}
        return {"m": float(self.m), "kappa": float(self.kappa), "a_t": enc(self.a_t),
                "a_x": enc(self.a_x), "V": enc(self.V), "analytic_in_t": self.analytic_in_t}


@dataclass(frozen=True, eq=False)
class GridFunction:
    values: np.ndarray
    grid_id: str
    # rows where the values are meaningful (apply_P leaves the ends at zero)
    valid_rows: tuple[int, int] | None = None

    def __post_init__(self) -> None:
        v = np.array(self.values, dtype=float)
        if not np.all(np.isfinite(v)):
            raise ValueError("grid function has non-finite entries")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def zeros(cls, grid: SpacetimeGrid) -> "GridFunction":
        return cls(np.zeros(grid.shape), grid.grid_id)

    def __add__(self, other: "GridFunction") -> "GridFunction":
        _same(self.grid_id, other.grid_id)
        return GridFunction(self.values + other.values, self.grid_id)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        _same(self.grid_id, other.grid_id)
        return GridFunction(self.values - other.values, self.grid_id)

    def __mul__(self, s: float) -> "GridFunction":
        return GridFunction(self.values * s, self.grid_id)

    __rmul__ = __mul__

    def support_rows(self) -> tuple[int, int] | None:
        rows = np.nonzero(np.any(self.values != 0, axis=1))[0]
        return None if rows.size == 0 else (int(rows[0]), int(rows[-1]))


def _same(a: str, b: str) -> None:
    if a != b:
        raise GridMismatch("grid functions live on different grids")


def _vals(grid: SpacetimeGrid, psi) -> np.ndarray:
    if isinstance(psi, GridFunction):
        _same(psi.grid_id, grid.grid_id)
        return psi.values
    a = np.asarray(psi, dtype=float)
    if a.shape != grid.shape:
        raise GridMismatch(f"expected shape {grid.shape}, got {a.shape}")
    return a


@dataclass(frozen=True, eq=False)
class CauchyData:
    phi: np.ndarray
    pi: np.ndarray
    i0: int

    def __post_init__(self) -> None:
        for name in ("phi", "pi"):
            a = np.array(getattr(self, name), dtype=float)
            if a.ndim != 1 or not np.all(np.isfinite(a)):
                raise ValueError(f"{name} must be a finite vector")
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        if self.phi.shape != self.pi.shape:
            raise ValueError("phi and pi differ in length")

    @property
    def vector(self) -> np.ndarray:
        """``(phi, pi)`` stacked."""
        return np.concatenate([self.phi, self.pi])

    @classmethod
    def from_vector(cls, v: np.ndarray, i0: int) -> "CauchyData":
        v = np.asarray(v, dtype=float)
        n = v.size // 2
        return cls(v[:n], v[n:], i0)

    def __add__(self, other: "CauchyData") -> "CauchyData":
        if other.i0 != self.i0:
            raise SliceMismatch("Cauchy data on different slices")
        return CauchyData(self.phi + other.phi, self.pi + other.pi, self.i0)

    def __mul__(self, s: float) -> "CauchyData":
        return CauchyData(self.phi * s, self.pi * s, self.i0)

    __rmul__ = __mul__


# ---------------------------------------------------------------------------
# stencil pieces


@dataclass
class _Stencil:
    """Per-row coefficients shared by apply_P and the marchers."""

    grid: SpacetimeGrid
    cfg: FieldConfig
    sqf: np.ndarray = field(init=False)
    alpha: np.ndarray = field(init=False)  # a_{i+1/2}/dt_i, length n_t-1
    h: np.ndarray = field(init=False)
    pot: np.ndarray = field(init=False)  # (n_t, n_x)
    a_t: np.ndarray | None = field(init=False)
    a_x: np.ndarray | None = field(init=False)

    def __post_init__(self) -> None:
        g, cfg = self.grid, self.cfg
        f = g.warp
        self.sqf = np.sqrt(f)
        steps = g.row_steps
        self.alpha = np.sqrt(g.warp_mid) / steps
        h = np.empty(g.n_t)
        h[1:-1] = 0.5 * (steps[1:] + steps[:-1])
        h[0], h[-1] = steps[0], steps[-1]
        self.h = h
        R = curvature_rows(g) if cfg.kappa != 0 else np.zeros(g.n_t)
        pot = np.broadcast_to((cfg.m ** 2 + cfg.kappa * R)[:, None], g.shape).copy()
        if cfg.V is not None:
            pot = pot + np.broadcast_to(np.asarray(cfg.V, dtype=float), g.shape)
        self.pot = pot
        self.a_t = None if cfg.a_t is None else np.broadcast_to(np.asarray(cfg.a_t, float), g.shape)
        self.a_x = None if cfg.a_x is None else np.broadcast_to(np.asarray(cfg.a_x, float), g.shape)

    def spatial(self, i: int, u: np.ndarray) -> np.ndarray:
        """``-(1/f) D_xx u + a_x D_x u + pot u`` on row ``i``; ``u`` may carry
        trailing batch axes."""
        g = self.grid
        dx2 = g.dx * g.dx
        if g.topology is Topology.CIRCLE:
            up = np.roll(u, -1, axis=0)
            dn = np.roll(u, 1, axis=0)
        else:
            up = np.zeros_like(u)
            dn = np.zeros_like(u)
            up[:-1] = u[1:]
            dn[1:] = u[:-1]
        extra = (slice(None),) + (None,) * (u.ndim - 1)
        out = -(up - 2.0 * u + dn) / (dx2 * g.warp[i]) + self.pot[i][extra] * u
        if self.a_x is not None:
            out = out + self.a_x[i][extra] * (up - dn) / (2.0 * g.dx)
        return out

    def ct(self, i: int, ndim: int):
        """Coefficient of ``(psi_{i+1} - psi_{i-1})`` from the a_t term."""
        if self.a_t is None:
            return 0.0
        extra = (slice(None),) + (None,) * (ndim - 1)
        return self.a_t[i][extra] / (self.h[i] * 2.0)

    def step(self, i: int, prev: np.ndarray, cur: np.ndarray, src, forward: bool) -> np.ndarray:
        """Solve row ``i`` of ``P psi = src`` for ``psi_{i+1}`` (forward) or
        ``psi_{i-1}`` (backward)."""
        ap, am = self.alpha[i], self.alpha[i - 1]
        c = 1.0 / (self.sqf[i] * self.h[i])
        ct = self.ct(i, cur.ndim)
        rhs = src - self.spatial(i, cur)
        if forward:
            # c*(ap*(x - cur) - am*(cur - prev)) + ct*(x - prev) = rhs
            return (rhs + c * (ap * cur + am * (cur - prev)) + ct * prev) / (c * ap + ct)
        # c*(ap*(prev - cur) - am*(cur - x)) + ct*(prev - x) = rhs
        return (rhs - c * (ap * (prev - cur) - am * cur) - ct * prev) / (c * am - ct)


def _stencil(grid: SpacetimeGrid, cfg: FieldConfig) -> _Stencil:
    key = ("stencil", id(cfg))
    st = grid._cache.get(key)
    if st is None or st.cfg is not cfg:
        st = _Stencil(grid, cfg)
        grid._cache[key] = st
    return st


def apply_P(grid: SpacetimeGrid, cfg: FieldConfig, psi) -> GridFunction:
    """Discrete ``P psi`` on rows ``1 .. n_t-2``; the two end rows are zero
    and excluded from ``valid_rows``."""
    u = _vals(grid, psi)
    st = _stencil(grid, cfg)
    out = np.zeros(grid.shape)
    for i in range(1, grid.n_t - 1):
        c = 1.0 / (st.sqf[i] * st.h[i])
        tpart = c * (st.alpha[i] * (u[i + 1] - u[i]) - st.alpha[i - 1] * (u[i] - u[i - 1]))
        out[i] = tpart + st.ct(i, 1) * (u[i + 1] - u[i - 1]) + st.spatial(i, u[i])
    return GridFunction(out, grid.grid_id, valid_rows=(1, grid.n_t - 2))


# ---------------------------------------------------------------------------
# Cauchy problem


def _neighbours_from_data(st: _Stencil, i0: int, phi: np.ndarray, pi: np.ndarray, src: np.ndarray):
    """Rows ``i0-1`` and ``i0+1`` from ``(phi, pi)`` and the equation on row ``i0``.

    ``pi = (alpha_+ (u_+ - phi) + alpha_- (phi - u_-)) / 2`` and
    ``c (alpha_+ (u_+ - phi) - alpha_- (phi - u_-)) + ct (u_+ - u_-) = src - L phi``.
    """
    ap, am = st.alpha[i0], st.alpha[i0 - 1]
    c = 1.0 / (st.sqf[i0] * st.h[i0])
    ct = st.ct(i0, phi.ndim)
    q = src - st.spatial(i0, phi)
    # unknowns A = ap*(u_+ - phi), B = am*(phi - u_-):  A + B = 2 pi;
    # c (A - B) + ct (A/ap + B/am) = q
    # -> A (c + ct/ap) + B (ct/am - c) = q
    k1 = c + ct / ap
    k2 = ct / am - c
    A = (q - 2.0 * pi * k2) / (k1 - k2)
    B = 2.0 * pi - A
    return phi - B / am, phi + A / ap


def _check_slice(grid: SpacetimeGrid, i0: int) -> None:
    if not 1 <= i0 <= grid.n_t - 2:
        raise SupportTooCloseToBoundary(f"slice {i0} must be at least one row inside the grid")


def evolve(grid: SpacetimeGrid, cfg: FieldConfig, data: CauchyData, source=None,
           dir: Direction = FUTURE) -> GridFunction:
    """March from the Cauchy data on slice ``data.i0`` in direction ``dir``.

    Rows on the far side of the slice (beyond ``i0 -/+ 1``) are left at zero.
    """
    grid.cfl_ratio()
    _check_slice(grid, data.i0)
    if data.phi.size != grid.n_x:
        raise SliceMismatch(f"Cauchy data has {data.phi.size} points, grid has {grid.n_x}")
    st = _stencil(grid, cfg)
    s = np.zeros(grid.shape) if source is None else _vals(grid, source)
    i0 = data.i0
    out = np.zeros(grid.shape)
    lo, hi = _neighbours_from_data(st, i0, data.phi, data.pi, s[i0])
    out[i0 - 1], out[i0], out[i0 + 1] = lo, data.phi, hi
    if Direction(dir) is FUTURE:
        for i in range(i0 + 1, grid.n_t - 1):
            out[i + 1] = st.step(i, out[i - 1], out[i], s[i], True)
    else:
        for i in range(i0 - 1, 0, -1):
            out[i - 1] = st.step(i, out[i + 1], out[i], s[i], False)
    return GridFunction(out, grid.grid_id)


def solve(grid: SpacetimeGrid, cfg: FieldConfig, data: CauchyData) -> GridFunction:
    """The homogeneous solution with the given Cauchy data, on all rows."""
    fut = evolve(grid, cfg, data, None, FUTURE).values
    past = evolve(grid, cfg, data, None, PAST).values
    out = fut.copy()
    out[: data.i0] = past[: data.i0]
    return GridFunction(out, grid.grid_id)


def solution_basis(grid: SpacetimeGrid, cfg: FieldConfig, i0: int, vectors: np.ndarray,
                   threads: int = 1) -> np.ndarray:
    """Homogeneous solutions for the columns of ``vectors`` (``2 n_x`` rows of
    stacked ``(phi, pi)``); returns shape ``(n_t, n_x, k)``.  Columns are
    marched independently, so splitting them over threads does not change a
    single bit of the result."""
    _check_slice(grid, i0)
    st = _stencil(grid, cfg)
    V = np.asarray(vectors, dtype=float)
    out = np.zeros(grid.shape + (V.shape[1],))

    def work(cols: np.ndarray) -> None:
        n = grid.n_x
        phi, pi = V[:n, cols], V[n:, cols]
        u = np.zeros(grid.shape + (cols.size,))
        lo, hi = _neighbours_from_data(st, i0, phi, pi, 0.0)
        u[i0 - 1], u[i0], u[i0 + 1] = lo, phi, hi
        for i in range(i0 + 1, grid.n_t - 1):
            u[i + 1] = st.step(i, u[i - 1], u[i], 0.0, True)
        for i in range(i0 - 1, 0, -1):
            u[i - 1] = st.step(i, u[i + 1], u[i], 0.0, False)
        out[..., cols] = u

    chunks = [c for c in np.array_split(np.arange(V.shape[1]), max(1, threads)) if c.size]
    if len(chunks) > 1:
        with ThreadPoolExecutor(len(chunks)) as ex:
            list(ex.map(work, chunks))
    else:
        for c in chunks:
            work(c)
    return out


def cauchy_data(grid: SpacetimeGrid, psi, i0: int) -> CauchyData:
    """``(psi, sqrt(f) d_t psi)`` on slice ``i0``, with the momentum averaged
    over the two adjacent half steps."""
    _check_slice(grid, i0)
    u = _vals(grid, psi)
    alpha = np.sqrt(grid.warp_mid) / grid.row_steps
    pi = 0.5 * (alpha[i0] * (u[i0 + 1] - u[i0]) + alpha[i0 - 1] * (u[i0] - u[i0 - 1]))
    return CauchyData(u[i0].copy(), pi, i0)


# ---------------------------------------------------------------------------
# Green operators


def _march_columns(st: _Stencil, cells: np.ndarray, forward: bool) -> np.ndarray:
    """Responses to sources ``1/w`` at the flat cell indices ``cells``;
    returns ``(n_t * n_x, len(cells))``."""
    g = st.grid
    n_t, n_x = g.shape
    w = volume_weights(g)
    k = cells.size
    out = np.zeros((n_t * n_x, k))
    rows = cells // n_x
    cols = cells % n_x
    order = range(1, n_t - 1) if forward else range(n_t - 2, 0, -1)
    prev = np.zeros((n_x, k))
    cur = np.zeros((n_x, k))
    src = np.zeros((n_x, k))
    for i in order:
        hit = np.nonzero(rows == i)[0]
        if hit.size:
            src[cols[hit], hit] = 1.0 / w[i, cols[hit]]
        nxt = st.step(i, prev, cur, src, forward)
        if hit.size:
            src[cols[hit], hit] = 0.0
        j = i + 1 if forward else i - 1
        out[j * n_x:(j + 1) * n_x] = nxt
        prev, cur = cur, nxt
    return out


def _cache_dir() -> Path:
    return Path(os.environ.get("ENVKIT_CACHE_DIR", Path.home() / ".cache" / "envkit"))


def _cache_key(grid: SpacetimeGrid, cfg: FieldConfig, kind: GreenKind) -> str:
    blob = json.dumps({"grid": grid.grid_id, "cfg": cfg.to_dict(), "kind": kind.value,
                       "scheme": SCHEME_VERSION}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:24]


def _load(grid, cfg, kind) -> np.ndarray | None:
    base = _cache_dir() / f"green-{_cache_key(grid, cfg, kind)}"
    meta_p, data_p = base.with_suffix(".json"), base.with_suffix(".f8")
    if not (meta_p.exists() and data_p.exists()):
        return None
    try:
        meta = json.loads(meta_p.read_text())
        if meta.get("scheme") != SCHEME_VERSION or meta.get("grid_id") != grid.grid_id:
            return None
        arr = np.fromfile(data_p, dtype="<f8")
        return arr.reshape(meta["shape"])
    except (OSError, ValueError, KeyError):
        log.warning("ignoring unreadable green cache entry %s", base)
        return None


def _store(grid, cfg, kind, mat: np.ndarray) -> None:
    d = _cache_dir()
    try:
        d.mkdir(parents=True, exist_ok=True)
        base = d / f"green-{_cache_key(grid, cfg, kind)}"
        tmp = base.with_suffix(".f8.tmp")
        np.ascontiguousarray(mat, dtype="<f8").tofile(tmp)
        os.replace(tmp, base.with_suffix(".f8"))
        meta = {"shape": list(mat.shape), "grid_id": grid.grid_id, "grid": grid.to_config(),
                "cfg": cfg.to_dict(), "kind": kind.value, "scheme": SCHEME_VERSION}
        base.with_suffix(".json").write_text(json.dumps(meta, indent=1, sort_keys=True))
    except OSError as exc:
        log.warning("could not write green cache: %s", exc)


def green(grid: SpacetimeGrid, cfg: FieldConfig, kind: GreenKind = RETARDED, *,
          threads: int | None = None, cache: bool = True) -> np.ndarray:
    """Dense matrix whose column ``c`` is the response to the discrete delta
    ``1/w_c`` at cell ``c``; ``Delta f = G @ (w * f)``.  Columns of the two
    end rows are zero (those rows carry no equation)."""
    grid.cfl_ratio()
    kind = GreenKind(kind)
    if cache:
        hit = _load(grid, cfg, kind)
        if hit is not None:
            return hit
    st = _stencil(grid, cfg)
    n = grid.n_t * grid.n_x
    cells = np.arange(grid.n_x, n - grid.n_x)
    forward = kind is RETARDED
    mat = np.zeros((n, n))
    nthreads = max(1, threads or 1)
    chunks = np.array_split(cells, nthreads) if nthreads > 1 else [cells]
    if nthreads > 1:
        with ThreadPoolExecutor(nthreads) as ex:
            parts = list(ex.map(lambda c: _march_columns(st, c, forward), chunks))
    else:
        parts = [_march_columns(st, cells, forward)]
    for c, p in zip(chunks, parts):
        mat[:, c] = p
    if cache:
        _store(grid, cfg, kind, mat)
    return mat


@dataclass(eq=False)
class GreenData:
    grid: SpacetimeGrid
    cfg: FieldConfig
    delta_ret: np.ndarray
    delta_adv: np.ndarray
    weights: np.ndarray

    @property
    def delta(self) -> np.ndarray:
        return self.delta_ret - self.delta_adv

    def _wf(self, f) -> np.ndarray:
        return self.weights * _vals(self.grid, f).ravel()

    def ret(self, f) -> GridFunction:
        return GridFunction((self.delta_ret @ self._wf(f)).reshape(self.grid.shape), self.grid.grid_id)

    def adv(self, f) -> GridFunction:
        return GridFunction((self.delta_adv @ self._wf(f)).reshape(self.grid.shape), self.grid.grid_id)

    def commutator(self, f) -> GridFunction:
        wf = self._wf(f)
        v = self.delta_ret @ wf - self.delta_adv @ wf
        return GridFunction(v.reshape(self.grid.shape), self.grid.grid_id)


def green_data(grid: SpacetimeGrid, cfg: FieldConfig, *, threads: int | None = None,
               cache: bool = True) -> GreenData:
    return GreenData(grid, cfg,
                     green(grid, cfg, RETARDED, threads=threads, cache=cache),
                     green(grid, cfg, ADVANCED, threads=threads, cache=cache),
                     volume_weights(grid).ravel().copy())


def _check_support(grid: SpacetimeGrid, f: np.ndarray) -> None:
    rows = np.nonzero(np.any(f != 0, axis=1))[0]
    if rows.size and (rows[0] < 2 or rows[-1] > grid.n_t - 3):
        raise SupportTooCloseToBoundary(
            f"test function touches rows {rows[0]}..{rows[-1]}; keep it within 2..{grid.n_t - 3}")


def sigma_hat(gd: GreenData, f1, f2) -> float:
    """``sum_c f1(c) (Delta f2)(c) w(c)``."""
    a = _vals(gd.grid, f1)
    b = _vals(gd.grid, f2)
    _check_support(gd.grid, a)
    _check_support(gd.grid, b)
    return float(np.dot(gd.weights * a.ravel(), gd.commutator(b).values.ravel()))


def eta(grid: SpacetimeGrid, cfg: FieldConfig, gd: GreenData | None, f, i0: int) -> CauchyData:
    """Class of ``f`` modulo ``ker Delta``, as the Cauchy data of ``Delta f``
    on slice ``i0``.  Without Green matrices ``Delta f`` is marched directly."""
    a = _vals(grid, f)
    _check_support(grid, a)
    _check_slice(grid, i0)
    if gd is not None:
        psi = gd.commutator(a).values
    else:
        psi = commutator_march(grid, cfg, a)
    return cauchy_data(grid, psi, i0)


def commutator_march(grid: SpacetimeGrid, cfg: FieldConfig, f) -> np.ndarray:
    """``Delta_ret f - Delta_adv f`` by two marches, no matrices."""
    a = _vals(grid, f)
    st = _stencil(grid, cfg)
    n_t = grid.n_t
    ret = np.zeros(grid.shape)
    for i in range(1, n_t - 1):
        ret[i + 1] = st.step(i, ret[i - 1], ret[i], a[i], True)
    adv = np.zeros(grid.shape)
    for i in range(n_t - 2, 0, -1):
        adv[i - 1] = st.step(i, adv[i + 1], adv[i], a[i], False)
    return ret - adv


def sigma_cauchy(grid: SpacetimeGrid, d1: CauchyData, d2: CauchyData) -> float:
    """``sum_j (pi1 phi2 - phi1 pi2) dx``."""
    if d1.i0 != d2.i0:
        raise SliceMismatch(f"slices {d1.i0} and {d2.i0} differ")
    return float(np.dot(d1.pi, d2.phi) - np.dot(d1.phi, d2.pi)) * grid.dx
