"""Discrete causal structure on a :class:`SpacetimeGrid`.

Cones are never rasterized step by step.  For every cell the quantity
``S(i0, i) - dist(x, x0)`` is tracked exactly (max over seeds), where ``S`` is
the accumulated light travel between rows, and the result is rasterized only
at the end.  This keeps the discrete cones from drifting away from the
continuum ones.

Domains of dependence are computed by sweeping the set of positions from which
a causal curve can escape through the temporal boundary of the slab without
meeting the target; cells are closed intervals of width ``dx``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import EmptySeed, GridMismatch, SNotContained
from .geometry import Cell, SpacetimeGrid, Topology

# snapping tolerance, in units of dx, for comparisons against cone frontiers
EPS = 1e-9


class Direction(str, enum.Enum):
    FUTURE = "future"
    PAST = "past"

    @property
    def opposite(self) -> "Direction":
        return Direction.PAST if self is Direction.FUTURE else Direction.FUTURE


FUTURE = Direction.FUTURE
PAST = Direction.PAST


@dataclass(frozen=True, eq=False)
class Region:
    """A set of grid cells, stored as a read-only boolean ``(n_t, n_x)`` mask."""

    grid_id: str
    mask: np.ndarray

    def __post_init__(self) -> None:
        m = np.array(self.mask, dtype=bool)
        if m.ndim != 2:
            raise ValueError("region mask must be 2-d")
        m.setflags(write=False)
        object.__setattr__(self, "mask", m)

    # constructors
    @classmethod
    def empty(cls, grid: SpacetimeGrid) -> "Region":
        return cls(grid.grid_id, np.zeros(grid.shape, dtype=bool))

    @classmethod
    def full(cls, grid: SpacetimeGrid) -> "Region":
        return cls(grid.grid_id, np.ones(grid.shape, dtype=bool))

    @classmethod
    def from_mask(cls, grid: SpacetimeGrid, mask) -> "Region":
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != grid.shape:
            raise GridMismatch(f"mask shape {mask.shape} != grid {grid.shape}")
        return cls(grid.grid_id, mask)

    @classmethod
    def from_cells(cls, grid: SpacetimeGrid, cells: Iterable[Sequence[int]]) -> "Region":
        m = np.zeros(grid.shape, dtype=bool)
        for c in cells:
            i, j = grid.check_cell(c)
            m[i, j] = True
        return cls(grid.grid_id, m)

    @classmethod
    def row(cls, grid: SpacetimeGrid, i: int, cols: slice | Sequence[int] = slice(None)) -> "Region":
        m = np.zeros(grid.shape, dtype=bool)
        m[i, cols] = True
        return cls(grid.grid_id, m)

    @classmethod
    def box(cls, grid: SpacetimeGrid, rows: slice, cols: slice) -> "Region":
        m = np.zeros(grid.shape, dtype=bool)
        m[rows, cols] = True
        return cls(grid.grid_id, m)

    # set algebra
    def _check(self, other: "Region") -> None:
        if self.grid_id != other.grid_id or self.mask.shape != other.mask.shape:
            raise GridMismatch("regions live on different grids")

    def __or__(self, other: "Region") -> "Region":
        self._check(other)
        return Region(self.grid_id, self.mask | other.mask)

    def __and__(self, other: "Region") -> "Region":
        self._check(other)
        return Region(self.grid_id, self.mask & other.mask)

    def __sub__(self, other: "Region") -> "Region":
        self._check(other)
        return Region(self.grid_id, self.mask & ~other.mask)

    def __invert__(self) -> "Region":
        return Region(self.grid_id, ~self.mask)

    def __le__(self, other: "Region") -> bool:
        self._check(other)
        return not np.any(self.mask & ~other.mask)

    def __ge__(self, other: "Region") -> bool:
        return other <= self

    def __lt__(self, other: "Region") -> bool:
        return self <= other and self != other

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Region):
            return NotImplemented
        return self.grid_id == other.grid_id and np.array_equal(self.mask, other.mask)

    def __hash__(self) -> int:
        return hash((self.grid_id, self.mask.tobytes()))

    def __len__(self) -> int:
        return int(self.mask.sum())

    def __bool__(self) -> bool:
        return bool(self.mask.any())

    def __contains__(self, c: Sequence[int]) -> bool:
        return bool(self.mask[int(c[0]), int(c[1])])

    def __iter__(self) -> Iterator[Cell]:
        for i, j in zip(*np.nonzero(self.mask)):
            yield Cell(int(i), int(j))

    def __repr__(self) -> str:
        return f"Region(grid={self.grid_id}, cells={len(self)})"

    def cells(self) -> list[Cell]:
        return list(self)

    def rows(self) -> np.ndarray:
        return np.nonzero(self.mask.any(axis=1))[0]


def _as_region(grid: SpacetimeGrid, r: Region) -> Region:
    if r.grid_id != grid.grid_id or r.mask.shape != grid.shape:
        raise GridMismatch("region does not belong to this grid")
    return r


def _require_nonempty(r: Region) -> None:
    if not r:
        raise EmptySeed("seed region is empty")


def _distance_matrix(grid: SpacetimeGrid) -> np.ndarray:
    if "dist" not in grid._cache:
        xs = grid.xs
        d = grid.spatial_distance(xs[:, None], xs[None, :])
        d.setflags(write=False)
        grid._cache["dist"] = d
    return grid._cache["dist"]


def cone_field(grid: SpacetimeGrid, mask: np.ndarray, direction: Direction) -> tuple[np.ndarray, np.ndarray]:
    """Exact cone margins of a seed mask.

    Returns ``(closed, open_)`` arrays of shape ``(n_t, n_x)``.  ``closed[i, j]``
    is the max over seed cells ``(i0, j0)`` with ``i0`` at or before row ``i``
    (in ``direction``) of ``S(i0, i) - dist(x_j, x_j0)``; ``open_`` is the same
    but only over seeds on strictly earlier rows.  ``-inf`` where no seed
    contributes.
    """
    n_t = grid.n_t
    dist = _distance_matrix(grid)
    steps = grid.cone_steps
    closed = np.full(grid.shape, -np.inf)
    open_ = np.full(grid.shape, -np.inf)
    order = range(n_t) if direction is Direction.FUTURE else range(n_t - 1, -1, -1)
    prev = None
    prev_i = None
    for i in order:
        if prev is not None:
            step = steps[min(i, prev_i)]
            cur = prev + step
        else:
            cur = np.full(grid.n_x, -np.inf)
        open_[i] = cur
        seeds = np.nonzero(mask[i])[0]
        if seeds.size:
            cur = np.maximum(cur, -dist[:, seeds].min(axis=1))
        closed[i] = cur
        prev, prev_i = cur, i
    return closed, open_


def reach(grid: SpacetimeGrid, seed: Region, direction: Direction = FUTURE, strict: bool = False) -> Region:
    """Discrete ``J^{+/-}`` (``strict=False``) or ``I^{+/-}`` (``strict=True``).

    Non-strict: cell centres within light travel plus half a cell of some seed
    centre, seeds included.  Strict: centres strictly inside the open cone of a
    seed centre on an earlier row.
    """
    seed = _as_region(grid, seed)
    _require_nonempty(seed)
    direction = Direction(direction)
    closed, open_ = cone_field(grid, seed.mask, direction)
    eps = EPS * grid.dx
    if strict:
        m = open_ > eps
    else:
        m = closed >= -0.5 * grid.dx - eps
    return Region(grid.grid_id, m)


def chrono_future(grid: SpacetimeGrid, seed: Region) -> Region:
    return reach(grid, seed, FUTURE, strict=True)


def causal_future(grid: SpacetimeGrid, seed: Region) -> Region:
    return reach(grid, seed, FUTURE, strict=False)


# -- interval sets for escape sweeps ---------------------------------------

class _Line:
    """Open-interval set arithmetic on the spatial section."""

    def __init__(self, grid: SpacetimeGrid):
        self.dx = grid.dx
        self.lo = -0.5 * grid.dx
        self.hi = self.lo + grid.length
        self.circle = grid.topology is Topology.CIRCLE
        self.L = grid.length
        self.eps = EPS * grid.dx
        self.left = grid.xs - 0.5 * grid.dx
        self.right = grid.xs + 0.5 * grid.dx

    def full(self) -> list[tuple[float, float]]:
        return [(self.lo, self.hi)]

    def _merge(self, ivs: list[tuple[float, float]]) -> list[tuple[float, float]]:
        ivs = sorted(iv for iv in ivs if iv[1] - iv[0] > self.eps)
        out: list[tuple[float, float]] = []
        for a, b in ivs:
            if out and a <= out[-1][1]:
                if b > out[-1][1]:
                    out[-1] = (out[-1][0], b)
            else:
                out.append((a, b))
        return out

    def expand(self, ivs, s: float):
        grown = [(a - s, b + s) for a, b in ivs]
        if not self.circle:
            return self._merge([(max(a, self.lo), min(b, self.hi)) for a, b in grown])
        pieces = []
        for a, b in grown:
            if b - a >= self.L:
                return self.full()
            a2 = self.lo + (a - self.lo) % self.L
            b2 = a2 + (b - a)
            if b2 > self.hi:
                pieces += [(a2, self.hi), (self.lo, b2 - self.L)]
            else:
                pieces.append((a2, b2))
        merged = self._merge(pieces)
        total = sum(b - a for a, b in merged)
        if total >= self.L - self.eps:
            return self.full()
        return merged

    def subtract_cells(self, ivs, cols: np.ndarray):
        """Remove the closed cells ``cols`` from an open-interval set."""
        if not ivs or cols.size == 0:
            return ivs
        # closed runs of consecutive columns
        runs = []
        start = prev = int(cols[0])
        for c in cols[1:]:
            c = int(c)
            if c != prev + 1:
                runs.append((start, prev))
                start = c
            prev = c
        runs.append((start, prev))
        out = list(ivs)
        for c0, c1 in runs:
            lo, hi = self.left[c0], self.right[c1]
            nxt = []
            for a, b in out:
                if hi <= a or lo >= b:
                    nxt.append((a, b))
                    continue
                if lo - a > self.eps:
                    nxt.append((a, lo))
                if b - hi > self.eps:
                    nxt.append((hi, b))
            out = nxt
        return out

    def touched_cells(self, ivs) -> np.ndarray:
        """Boolean per column: does the closed cell overlap the open set?"""
        hit = np.zeros(self.left.size, dtype=bool)
        for a, b in ivs:
            ov = np.minimum(b, self.right) - np.maximum(a, self.left)
            hit |= ov > self.eps
        return hit


def dependence(grid: SpacetimeGrid, target: np.ndarray, direction: Direction) -> np.ndarray:
    """Mask of cells every one of whose inextendible causal curves (towards
    the past for ``FUTURE``) meets ``target`` before leaving the slab.

    Curves may start anywhere in the closed cell; the temporal edge of the
    grid counts as escape.  ``target`` may be any mask, achronal or not.
    """
    line = _Line(grid)
    steps = grid.cone_steps
    out = np.zeros(grid.shape, dtype=bool)
    order = range(grid.n_t) if direction is Direction.FUTURE else range(grid.n_t - 1, -1, -1)
    escape = None
    prev_i = None
    for i in order:
        if escape is None:
            escape = line.full()
        elif escape:
            escape = line.expand(escape, steps[min(i, prev_i)])
        cols = np.nonzero(target[i])[0]
        escape = line.subtract_cells(escape, cols)
        out[i] = target[i] | ~line.touched_cells(escape)
        prev_i = i
    return out


def domain_of_dependence(grid: SpacetimeGrid, s: Region, direction: Direction = FUTURE) -> Region:
    """``D^+(s)`` for ``FUTURE`` and ``D^-(s)`` for ``PAST``."""
    s = _as_region(grid, s)
    _require_nonempty(s)
    return Region(grid.grid_id, dependence(grid, s.mask, Direction(direction)))


def full_dd(grid: SpacetimeGrid, s: Region) -> Region:
    """``D(s) = D^+(s) | D^-(s)``."""
    return domain_of_dependence(grid, s, FUTURE) | domain_of_dependence(grid, s, PAST)


def _complement_mask(grid: SpacetimeGrid, mask: np.ndarray) -> np.ndarray:
    if not mask.any():
        return np.ones(grid.shape, dtype=bool)
    eps = EPS * grid.dx
    tol = -0.5 * grid.dx - eps
    fut, _ = cone_field(grid, mask, FUTURE)
    past, _ = cone_field(grid, mask, PAST)
    return ~((fut >= tol) | (past >= tol))


def causal_complement(grid: SpacetimeGrid, o: Region) -> Region:
    """Cells not causally related to any cell of ``o``."""
    o = _as_region(grid, o)
    _require_nonempty(o)
    return Region(grid.grid_id, _complement_mask(grid, o.mask))


def causal_completion(grid: SpacetimeGrid, o: Region) -> Region:
    """``o`` double-perp; always contains ``o``."""
    o = _as_region(grid, o)
    _require_nonempty(o)
    return Region(grid.grid_id, _complement_mask(grid, _complement_mask(grid, o.mask)))


def is_achronal(grid: SpacetimeGrid, s: Region) -> bool:
    s = _as_region(grid, s)
    _require_nonempty(s)
    return not bool((reach(grid, s, FUTURE, strict=True).mask & s.mask).any())


def is_cauchy_surface(grid: SpacetimeGrid, s: Region, u: Region) -> bool:
    """``s`` is achronal and its domain of dependence covers ``u``."""
    s = _as_region(grid, s)
    u = _as_region(grid, u)
    if not s <= u:
        raise SNotContained("s must be a subset of u")
    _require_nonempty(s)
    return is_achronal(grid, s) and u <= full_dd(grid, s)


def boundary_ring(grid: SpacetimeGrid, mask: np.ndarray) -> np.ndarray:
    """Cells of ``mask`` with an 8-neighbour outside it (the grid edge does
    not count as outside; the circle wraps)."""
    mask = np.asarray(mask, dtype=bool)
    inner = mask.copy()
    circ = grid.topology is Topology.CIRCLE
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == dj == 0:
                continue
            sh = np.ones_like(mask)
            src = mask
            if di:
                sh = np.ones_like(mask)
                if di > 0:
                    sh[:-1] = src[1:]
                else:
                    sh[1:] = src[:-1]
                src = sh
            if dj:
                if circ:
                    src = np.roll(src, -dj, axis=1)
                else:
                    s2 = np.ones_like(mask)
                    if dj > 0:
                        s2[:, :-1] = src[:, 1:]
                    else:
                        s2[:, 1:] = src[:, :-1]
                    src = s2
            inner &= src
    return mask & ~inner


def equal_up_to_ring(grid: SpacetimeGrid, a: Region, b: Region) -> bool:
    """Every cell of the symmetric difference lies on, or next to, the
    boundary ring of the larger set."""
    a, b = _as_region(grid, a), _as_region(grid, b)
    diff = a.mask ^ b.mask
    if not diff.any():
        return True
    ring = boundary_ring(grid, a.mask | b.mask)
    return not bool((diff & ~ring).any())
