"""Timelike curve segments, the C^1 curve distance, and diamonds I(p,q), I_0(p,q,gamma).

Curves are time-monotone polylines ``[(t, x), ...]`` where ``x`` is the lift to
the universal cover of the spatial section; on the circle the lift carries the
winding, which labels the homotopy class of a segment between fixed endpoints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .causal import EPS, FUTURE, PAST, Region, _as_region, reach
from .errors import EndpointMismatch, GridMismatch, NotTimelike
from .geometry import Cell, SpacetimeGrid, Topology

# uniform timelikeness: slopes must stay this fraction of 1/sqrt(f_max) below light speed
TIMELIKE_MARGIN = 0.01


@dataclass(frozen=True, eq=False)
class CurvePolyline:
    samples: np.ndarray  # (k, 2): t, x_unwrapped
    grid_id: str

    def __post_init__(self) -> None:
        s = np.array(self.samples, dtype=float)
        if s.ndim != 2 or s.shape[1] != 2 or s.shape[0] < 2:
            raise ValueError("a polyline needs at least two (t, x) samples")
        if np.any(np.diff(s[:, 0]) <= 0):
            raise ValueError("polyline samples must be strictly increasing in t")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @property
    def t(self) -> np.ndarray:
        return self.samples[:, 0]

    @property
    def x(self) -> np.ndarray:
        return self.samples[:, 1]

    @property
    def start(self) -> tuple[float, float]:
        return float(self.t[0]), float(self.x[0])

    @property
    def end(self) -> tuple[float, float]:
        return float(self.t[-1]), float(self.x[-1])

    def position(self, t) -> np.ndarray:
        return np.interp(t, self.t, self.x)

    def winding(self, grid: SpacetimeGrid) -> int:
        """Number of turns of the lift around the circle (0 on the interval)."""
        if grid.topology is not Topology.CIRCLE:
            return 0
        L = grid.length
        return int(math.floor((self.x[-1] - self.x[0]) / L + 0.5))

    def to_json(self) -> list[list[float]]:
        return [[float(a), float(b)] for a, b in self.samples]


def polyline(grid: SpacetimeGrid, points: Sequence[Sequence[float]]) -> CurvePolyline:
    c = CurvePolyline(np.asarray(points, dtype=float), grid.grid_id)
    t = grid.times
    if c.t[0] < t[0] - 1e-12 or c.t[-1] > t[-1] + 1e-12:
        raise ValueError("polyline leaves the time slab of the grid")
    return c


def cell_curve(grid: SpacetimeGrid, q: Sequence[int], p: Sequence[int], turns: int = 0,
               n_samples: int | None = None) -> CurvePolyline:
    """Straight lifted segment from cell ``q`` to cell ``p`` plus ``turns`` windings."""
    q, p = grid.check_cell(q), grid.check_cell(p)
    t = grid.times
    xq = grid.xs[q.j]
    xp = grid.xs[p.j] + turns * (grid.length if grid.topology is Topology.CIRCLE else 0.0)
    n = n_samples or max(2, p.i - q.i + 1)
    ts = np.linspace(t[q.i], t[p.i], n)
    xs = np.linspace(xq, xp, n)
    return polyline(grid, np.column_stack([ts, xs]))


def _check(grid: SpacetimeGrid, g: CurvePolyline) -> None:
    if g.grid_id != grid.grid_id:
        raise GridMismatch("curve does not belong to this grid")


def timelike_margin(grid: SpacetimeGrid) -> float:
    """Slack below light speed (coordinate velocity units)."""
    return TIMELIKE_MARGIN / math.sqrt(float(grid.warp.max()))


def is_timelike(grid: SpacetimeGrid, g: CurvePolyline) -> bool:
    """Every segment is uniformly timelike and the curve stays in the slab."""
    _check(grid, g)
    t, x = g.t, g.x
    times = grid.times
    if t[0] < times[0] - 1e-12 or t[-1] > times[-1] + 1e-12:
        return False
    tm = 0.5 * (t[1:] + t[:-1])
    speed = 1.0 / np.sqrt(grid.warp_at(tm))
    slope = np.abs(np.diff(x)) / np.diff(t)
    return bool(np.all(slope < speed - timelike_margin(grid)))


def _arclength_param(g: CurvePolyline) -> tuple[np.ndarray, float]:
    seg = np.hypot(np.diff(g.t), np.diff(g.x))
    total = float(seg.sum())
    u = np.concatenate([[0.0], np.cumsum(seg)]) / total
    u[-1] = 1.0
    return u, total


def c1_distance(g1: CurvePolyline, g2: CurvePolyline, grid: SpacetimeGrid | None = None) -> float:
    """``sup_u |g1(u) - g2(u)| + |g1'(u) - g2'(u)|`` with both curves
    parameterized proportionally to Euclidean arc length on ``[0, 1]``.

    Positions are compared in the lift after aligning the start points by a
    deck transformation; the circle's deck group needs ``grid``.
    """
    if g1.grid_id != g2.grid_id:
        raise GridMismatch("curves live on different grids")
    s1 = g1.samples
    s2 = np.array(g2.samples)
    L = grid.length if grid is not None and grid.topology is Topology.CIRCLE else None
    if L is not None:
        s2[:, 1] += L * round((s1[0, 1] - s2[0, 1]) / L)
    tol = 1e-9 * max(1.0, float(np.abs(s1).max()))
    same_start = abs(s1[0, 0] - s2[0, 0]) <= tol and abs(s1[0, 1] - s2[0, 1]) <= tol
    end_dx = s1[-1, 1] - s2[-1, 1]
    if L is not None:
        end_dx = end_dx - L * round(end_dx / L)
    same_end = abs(s1[-1, 0] - s2[-1, 0]) <= tol and abs(end_dx) <= tol
    if not (same_start and same_end):
        raise EndpointMismatch("curves must share both endpoints")
    g2a = CurvePolyline(s2, g2.grid_id)
    u1, len1 = _arclength_param(g1)
    u2, len2 = _arclength_param(g2a)
    u = np.union1d(u1, u2)

    def pos(s, uk, uu):
        return np.column_stack([np.interp(uu, uk, s[:, 0]), np.interp(uu, uk, s[:, 1])])

    def vel(s, uk, uu):
        k = np.clip(np.searchsorted(uk, uu, side="right") - 1, 0, len(uk) - 2)
        d = np.diff(s, axis=0) / np.diff(uk)[:, None]
        return d[k]

    dpos = np.linalg.norm(pos(s1, u1, u) - pos(s2, u2, u), axis=1)
    mid = 0.5 * (u[1:] + u[:-1])
    dvel = np.linalg.norm(vel(s1, u1, mid) - vel(s2, u2, mid), axis=1)
    # position mismatch is piecewise linear in u, velocity mismatch piecewise constant
    return float(np.max(np.maximum(dpos[1:], dpos[:-1]) + dvel))


def diamond(grid: SpacetimeGrid, p: Sequence[int], q: Sequence[int]) -> Region:
    """``I^+(q) & I^-(p)``; empty unless ``p`` lies in the chronological future of ``q``."""
    p, q = grid.check_cell(p), grid.check_cell(q)
    fut = reach(grid, Region.from_cells(grid, [q]), FUTURE, strict=True)
    past = reach(grid, Region.from_cells(grid, [p]), PAST, strict=True)
    return fut & past


# -- covering-space machinery ----------------------------------------------

def _lift_range(grid: SpacetimeGrid, x0: float) -> range:
    if grid.topology is not Topology.CIRCLE:
        return range(0, 1)
    L = grid.length
    reachable = float(grid.cone_offsets[-1]) + L
    return range(int(math.floor((x0 - reachable) / L)) - 1, int(math.ceil((x0 + reachable) / L)) + 2)


def _strip(grid: SpacetimeGrid, x0: float) -> tuple[np.ndarray, np.ndarray]:
    """Lifted cell centres around ``x0``: positions and their column index."""
    ks = _lift_range(grid, x0)
    xs = grid.xs
    pos = np.concatenate([xs + k * grid.length for k in ks])
    col = np.tile(np.arange(grid.n_x), len(ks))
    return pos, col


def cover_diamond(grid: SpacetimeGrid, q_row: int, q_x: float,
                  p_points: Sequence[tuple[int, float]]) -> np.ndarray:
    """Projected union of cover diamonds ``I^+(q~) & I^-(p~)`` for lifted points.

    ``q_x`` and the ``p_points`` x-values are positions in the universal cover.
    Returns a boolean ``(n_t, n_x)`` mask.
    """
    out = np.zeros(grid.shape, dtype=bool)
    if not p_points:
        return out
    pos, col = _strip(grid, q_x)
    S = grid.cone_offsets
    eps = EPS * grid.dx
    by_row: dict[int, list[float]] = {}
    for r, x in p_points:
        by_row.setdefault(int(r), []).append(float(x))
    top = max(by_row)
    # open past-cone margin of the p points, swept downward
    cur = np.full(pos.size, -np.inf)
    steps = grid.cone_steps
    for i in range(top, q_row, -1):
        if i < top:
            cur = cur + steps[i]
        past_margin = cur
        if i in by_row:
            px = np.asarray(by_row[i])
            cur = np.maximum(cur, -np.abs(pos[:, None] - px[None, :]).min(axis=1))
        fut_margin = (S[i] - S[q_row]) - np.abs(pos - q_x)
        hit = (past_margin > eps) & (fut_margin > eps)
        if hit.any():
            out[i, col[hit]] = True
    return out


def lifted_diamond(grid: SpacetimeGrid, g: CurvePolyline) -> Region:
    """``I_0(p, q, g)``: the diamond of g's homotopy class, computed in the
    universal cover between the lifted endpoints and projected back."""
    _check(grid, g)
    if not is_timelike(grid, g):
        raise NotTimelike("lifted_diamond needs a timelike curve")
    (tq, xq), (tp, xp) = g.start, g.end
    times = grid.times
    iq = int(np.argmin(np.abs(times - tq)))
    ip = int(np.argmin(np.abs(times - tp)))
    xq = round(xq / grid.dx) * grid.dx
    xp = round(xp / grid.dx) * grid.dx
    return Region(grid.grid_id, cover_diamond(grid, iq, xq, [(ip, xp)]))


# -- timelike reachability inside a region ----------------------------------

def _row_runs(grid: SpacetimeGrid, row: np.ndarray, ks: range) -> list[tuple[float, float]]:
    """Open intervals covered by the region's cells on one row, lifted over ``ks``."""
    cols = np.nonzero(row)[0]
    if cols.size == 0:
        return []
    half = 0.5 * grid.dx
    xs = grid.xs
    runs = []
    start = prev = int(cols[0])
    for c in cols[1:]:
        c = int(c)
        if c != prev + 1:
            runs.append((xs[start] - half, xs[prev] + half))
            start = c
        prev = c
    runs.append((xs[start] - half, xs[prev] + half))
    if grid.topology is not Topology.CIRCLE:
        return runs
    L = grid.length
    lifted = sorted((a + k * L, b + k * L) for k in ks for a, b in runs)
    merged: list[tuple[float, float]] = []
    tol = EPS * grid.dx
    for a, b in lifted:
        if merged and a <= merged[-1][1] + tol:
            merged[-1] = (merged[-1][0], max(b, merged[-1][1]))
        else:
            merged.append((a, b))
    return merged


def _intersect(a_ivs, b_ivs, eps):
    out = []
    i = j = 0
    while i < len(a_ivs) and j < len(b_ivs):
        lo = max(a_ivs[i][0], b_ivs[j][0])
        hi = min(a_ivs[i][1], b_ivs[j][1])
        if hi - lo > eps:
            out.append((lo, hi))
        if a_ivs[i][1] < b_ivs[j][1]:
            i += 1
        else:
            j += 1
    return out


def _grow(ivs, s):
    out: list[tuple[float, float]] = []
    for a, b in ivs:
        a, b = a - s, b + s
        if out and a <= out[-1][1]:
            out[-1] = (out[-1][0], max(b, out[-1][1]))
        else:
            out.append((a, b))
    return out


def timelike_reach(grid: SpacetimeGrid, e_mask: np.ndarray, q: Cell,
                   x_q: float | None = None) -> dict[int, list[tuple[float, float]]]:
    """Lifted positions reachable from the centre of ``q`` by future-directed,
    uniformly timelike polylines whose row samples stay inside ``e_mask``.

    Returns ``{row: [open intervals]}`` for rows above ``q`` with a nonempty set.
    """
    x_q = float(grid.xs[q.j]) if x_q is None else x_q
    ks = _lift_range(grid, x_q)
    eps = EPS * grid.dx
    budget = grid.cone_steps - timelike_margin(grid) * grid.row_steps
    sets: dict[int, list[tuple[float, float]]] = {}
    cur = [(x_q, x_q)]
    for i in range(q.i + 1, grid.n_t):
        cur = _intersect(_grow(cur, budget[i - 1]), _row_runs(grid, e_mask[i], ks), eps)
        if not cur:
            break
        sets[i] = cur
    return sets


def reachable_centres(grid: SpacetimeGrid, sets: dict[int, list[tuple[float, float]]]) -> list[tuple[int, float]]:
    """Lifted cell centres lying inside the reachable sets."""
    out = []
    eps = EPS * grid.dx
    dx = grid.dx
    for i, ivs in sets.items():
        for a, b in ivs:
            k0 = math.floor((a + eps) / dx) + 1
            k1 = math.ceil((b - eps) / dx) - 1
            for k in range(k0, k1 + 1):
                x = k * dx
                if a + eps < x < b - eps:
                    out.append((i, x))
    return out


def _lift_to_col(grid: SpacetimeGrid, x: float) -> int:
    return int(round(x / grid.dx)) % grid.n_x


def find_timelike_path(grid: SpacetimeGrid, e: Region, p: Sequence[int], q: Sequence[int],
                       winding: int | None = None) -> tuple[CurvePolyline, int] | None:
    """A uniformly timelike polyline from ``q`` up to ``p`` whose row samples lie in ``e``.

    Returns ``(curve, winding)`` or ``None``.  Without ``winding`` the class
    with the smallest ``|winding|`` is chosen.
    """
    e = _as_region(grid, e)
    p, q = grid.check_cell(p), grid.check_cell(q)
    if p not in e or q not in e or p.i <= q.i:
        return None
    x_q = float(grid.xs[q.j])
    sets = timelike_reach(grid, e.mask, q, x_q)
    if p.i not in sets:
        return None
    eps = EPS * grid.dx
    L = grid.length if grid.topology is Topology.CIRCLE else None
    candidates = []
    for k in _lift_range(grid, x_q):
        if L is None and k != 0:
            continue
        xp = grid.xs[p.j] + (k * L if L is not None else 0.0)
        if any(a + eps < xp < b - eps for a, b in sets[p.i]):
            w = 0 if L is None else int(math.floor((xp - x_q) / L + 0.5))
            candidates.append((abs(w), w, xp))
    if winding is not None:
        candidates = [c for c in candidates if c[1] == winding]
    if not candidates:
        return None
    _, w, xp = min(candidates)
    budget = grid.cone_steps - timelike_margin(grid) * grid.row_steps
    ys = {p.i: xp}
    y = xp
    for r in range(p.i - 1, q.i, -1):
        s = budget[r]
        best = None
        for a, b in sets[r]:
            lo, hi = max(a, y - s), min(b, y + s)
            if hi - lo <= eps:
                continue
            pad = min(0.25 * (hi - lo), 0.01 * grid.dx)
            cand = min(max(y, lo + pad), hi - pad)
            if best is None or abs(cand - y) < abs(best - y):
                best = cand
        if best is None:  # pragma: no cover - sets are consistent by construction
            return None
        y = best
        ys[r] = y
    ys[q.i] = x_q
    rows = sorted(ys)
    pts = np.column_stack([grid.times[rows], [ys[r] for r in rows]])
    return CurvePolyline(pts, grid.grid_id), w


def tube_region(grid: SpacetimeGrid, g: CurvePolyline, radius: float) -> Region:
    """Cells within spatial distance ``radius`` of the curve on each row it spans.

    The cell nearest the curve is always included, so ``radius=0`` gives the
    rasterized curve.
    """
    _check(grid, g)
    if not is_timelike(grid, g):
        raise NotTimelike("tube_region needs a timelike curve")
    if radius < 0:
        raise ValueError("radius must be non-negative")
    t = grid.times
    tol = 1e-12 * max(1.0, abs(t[-1]))
    rows = np.nonzero((t >= g.t[0] - tol) & (t <= g.t[-1] + tol))[0]
    m = np.zeros(grid.shape, dtype=bool)
    eps = EPS * grid.dx
    for i in rows:
        xc = float(g.position(t[i]))
        d = grid.spatial_distance(grid.xs, xc)
        m[i] = d <= radius + eps
        m[i, int(np.argmin(d))] = True
    return Region(grid.grid_id, m)
