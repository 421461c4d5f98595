"""The envelope E(O): least superset of O closed under Cauchy development and
homotopy-class diamonds of timelike curves running inside it."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .causal import FUTURE, PAST, Region, _as_region, _complement_mask, _require_nonempty, dependence
from .curves import cover_diamond, reachable_centres, timelike_reach, _lift_to_col
from .geometry import Cell, SpacetimeGrid

log = logging.getLogger(__name__)

CAUCHY = "CauchyStep"
DIAMOND = "DiamondStep"


@dataclass
class EnvelopeTrace:
    origin: Region
    iterations: list[tuple[str, Region]] = field(default_factory=list)
    final: Region | None = None
    within_completion: bool | None = None

    def added_counts(self) -> list[tuple[str, int]]:
        return [(tag, len(r)) for tag, r in self.iterations]

    def to_json(self) -> dict:
        return {
            "origin_cells": len(self.origin),
            "final_cells": len(self.final) if self.final is not None else None,
            "within_completion": self.within_completion,
            "iterations": [{"rule": tag, "added": n} for tag, n in self.added_counts()],
        }


def cauchy_step(grid: SpacetimeGrid, e: Region) -> Region:
    """``e`` together with every cell all of whose past (or all of whose
    future) inextendible causal curves run into ``e``."""
    e = _as_region(grid, e)
    _require_nonempty(e)
    m = dependence(grid, e.mask, FUTURE) | dependence(grid, e.mask, PAST)
    return Region(grid.grid_id, m)


def _diamond_additions(grid: SpacetimeGrid, mask: np.ndarray) -> np.ndarray:
    added = np.zeros(grid.shape, dtype=bool)
    dominated = np.zeros(grid.shape, dtype=bool)
    for i in range(grid.n_t - 1):
        for j in np.nonzero(mask[i] & ~dominated[i])[0]:
            q = Cell(i, int(j))
            x_q = float(grid.xs[q.j])
            centres = reachable_centres(grid, timelike_reach(grid, mask, q, x_q))
            if not centres:
                continue
            # sources reached from q have smaller reach sets and smaller futures
            for r, x in centres:
                dominated[r, _lift_to_col(grid, x)] = True
            added |= cover_diamond(grid, i, x_q, centres)
    return added


def diamond_step(grid: SpacetimeGrid, e: Region) -> Region:
    """``e`` together with ``I_0(p, q, gamma)`` for every timelike polyline
    ``gamma`` from ``q`` to ``p`` whose row samples lie in ``e``.

    Only sources not reachable from another source are expanded: if ``q`` is
    reached from ``q'`` inside ``e`` then every diamond based at ``q`` is
    contained in one based at ``q'``.
    """
    e = _as_region(grid, e)
    _require_nonempty(e)
    return Region(grid.grid_id, e.mask | _diamond_additions(grid, e.mask))


_STEPS = {CAUCHY: cauchy_step, DIAMOND: diamond_step}


def envelope(grid: SpacetimeGrid, o: Region, order: Sequence[str] = (CAUCHY, DIAMOND),
             check_completion: bool = True) -> EnvelopeTrace:
    """Iterate the two closure rules from ``o`` until neither adds a cell."""
    o = _as_region(grid, o)
    _require_nonempty(o)
    trace = EnvelopeTrace(origin=o)
    cur = o
    stable = 0
    max_rounds = grid.n_t * grid.n_x
    k = 0
    while stable < len(order) and k < max_rounds * len(order):
        tag = order[k % len(order)]
        nxt = _STEPS[tag](grid, cur)
        added = nxt - cur
        trace.iterations.append((tag, added))
        stable = stable + 1 if not added else 0
        cur = nxt
        k += 1
    trace.final = cur
    if check_completion:
        completion = _complement_mask(grid, _complement_mask(grid, o.mask))
        trace.within_completion = not bool((cur.mask & ~completion).any())
        if not trace.within_completion:
            log.warning("envelope leaves the causal completion (%d cells)",
                        int((cur.mask & ~completion).sum()))
    return trace


def is_envelope_fixed_point(grid: SpacetimeGrid, e: Region) -> bool:
    e = _as_region(grid, e)
    _require_nonempty(e)
    return cauchy_step(grid, e) == e and diamond_step(grid, e) == e
