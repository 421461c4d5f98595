import json

import numpy as np
import pytest

from envkit import causal as C
from envkit.causal import Region
from envkit.curves import diamond, find_timelike_path
from envkit.envelope import CAUCHY, DIAMOND, cauchy_step, diamond_step, envelope, is_envelope_fixed_point
from envkit.errors import EmptySeed
from envkit.geometry import build_grid, conformal_rescale, minkowski


def cover_diamond(g, q, p, xp):
    """Cells with a lift strictly inside the cones of ``q`` (at its centre) and of ``p`` at lift ``xp``."""
    S = g.cone_offsets
    L = g.length
    xq = g.xs[q[1]]
    eps = 1e-9 * g.dx
    out = np.zeros(g.shape, dtype=bool)
    ks = range(-3, 4) if g.topology.value == "circle" else (0,)
    for i in range(q[0] + 1, p[0]):
        for j in range(g.n_x):
            for k in ks:
                x = g.xs[j] + k * L
                if abs(x - xq) < S[i] - S[q[0]] - eps and abs(x - xp) < S[p[0]] - S[i] - eps:
                    out[i, j] = True
    return out


def diamond_step_oracle(g, e):
    """All pairs ``q < p`` in ``e`` and every winding class joined by a timelike path inside ``e``."""
    out = e.mask.copy()
    cells = list(e)
    circle = g.topology.value == "circle"
    windings = range(-2, 3) if circle else (0,)
    for q in cells:
        for p in cells:
            if p.i <= q.i + 1:
                continue
            for w in windings:
                if find_timelike_path(g, e, p, q, winding=w) is not None:
                    out |= cover_diamond(g, q, p, g.xs[p.j] + w * g.length)
    return out


def test_cauchy_step_examples():
    g = minkowski(20, 24, dx=1.0)
    assert cauchy_step(g, Region.row(g, 7)) == Region.full(g)
    seg = Region.row(g, 7, slice(6, 15))
    assert cauchy_step(g, seg) == C.full_dd(g, seg)
    d = diamond(g, (18, 12), (2, 12))
    assert cauchy_step(g, d) == d
    with pytest.raises(EmptySeed):
        cauchy_step(g, Region.empty(g))


def test_diamond_step_examples():
    g = minkowski(24, 24, dx=1.0)
    tube = Region.box(g, slice(None), slice(11, 14))
    grown = diamond_step(g, tube)
    assert tube < grown
    extremal = diamond(g, (23, 12), (0, 12))
    assert extremal - tube <= grown
    assert diamond_step(g, Region.row(g, 5)) == Region.row(g, 5)
    pair = Region.from_cells(g, [(3, 10), (12, 10)])
    assert diamond_step(g, pair) == pair


@pytest.mark.parametrize("topology", ["interval", "circle"])
def test_diamond_step_matches_all_pairs(topology):
    rng = np.random.default_rng(3 if topology == "interval" else 4)
    g = build_grid({"topology": topology, "n_t": 14, "n_x": 10, "dx": 0.1,
                    "warp": {"kind": "exponential", "rate": 1.0}})
    for _ in range(4):
        m = rng.random(g.shape) < 0.45
        m[0, 0] = True
        e = Region(g.grid_id, m)
        assert np.array_equal(diamond_step(g, e).mask, diamond_step_oracle(g, e))
    tube = Region.box(g, slice(None), slice(3, 6))
    assert np.array_equal(diamond_step(g, tube).mask, diamond_step_oracle(g, tube))


def test_envelope_trace_invariants():
    g = minkowski(32, 32, dx=1.0)
    rng = np.random.default_rng(9)
    o = Region(g.grid_id, rng.random(g.shape) < 0.03)
    tr = envelope(g, o)
    union = o.mask.copy()
    for tag, added in tr.iterations:
        assert tag in (CAUCHY, DIAMOND)
        assert not (added.mask & union).any()
        union |= added.mask
    assert np.array_equal(union, tr.final.mask)
    assert is_envelope_fixed_point(g, tr.final)
    assert tr.within_completion
    assert not tr.iterations[-1][1] and not tr.iterations[-2][1]
    js = json.loads(json.dumps(tr.to_json()))
    assert js["final_cells"] == len(tr.final)
    assert sum(it["added"] for it in js["iterations"]) == len(tr.final) - len(o)


def test_envelope_order_independent():
    rng = np.random.default_rng(10)
    for topology in ("interval", "circle"):
        g = build_grid({"topology": topology, "n_t": 32, "n_x": 24, "dx": 1 / 24,
                        "warp": {"kind": "exponential", "rate": 1.0}})
        for _ in range(4):
            o = Region(g.grid_id, rng.random(g.shape) < 0.04)
            a = envelope(g, o, order=(CAUCHY, DIAMOND)).final
            b = envelope(g, o, order=(DIAMOND, CAUCHY)).final
            assert a == b


def test_tube_envelope_is_completion_up_to_ring():
    g = minkowski(32, 32, dx=1.0)
    tube = Region.box(g, slice(None), slice(15, 18))
    tr = envelope(g, tube)
    comp = C.causal_completion(g, tube)
    assert tr.final <= comp
    assert C.equal_up_to_ring(g, tr.final, comp)


def test_diamond_is_envelope_fixed_point():
    g = minkowski(30, 30, dx=1.0)
    d = diamond(g, (26, 14), (3, 14))
    assert envelope(g, d).final == d
    assert is_envelope_fixed_point(g, d)
    assert is_envelope_fixed_point(g, Region.full(g))
    tube = Region.box(g, slice(None), slice(14, 16))
    assert not is_envelope_fixed_point(g, tube)


def test_ultrastatic_small():
    g = minkowski(121, 20, dx=0.05, dt=0.025, topology="circle")
    tube = Region.box(g, slice(None), [19, 0, 1])
    fin = envelope(g, tube).final.mask
    wrap = g.length
    band = (g.times >= wrap) & (g.times[-1] - g.times >= wrap)
    assert band.any() and fin[band].all()


def test_envelope_conformal_invariance_on_circle():
    g = build_grid({"topology": "circle", "n_t": 40, "n_x": 16, "dx": 1 / 16,
                    "warp": {"kind": "exponential", "rate": 1.0}})
    g2 = conformal_rescale(g, np.exp(-g.times) * 3.0)
    rng = np.random.default_rng(12)
    m = rng.random(g.shape) < 0.05
    assert np.array_equal(envelope(g, Region(g.grid_id, m)).final.mask,
                          envelope(g2, Region(g2.grid_id, m)).final.mask)
