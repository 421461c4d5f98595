import numpy as np
import pytest

from envkit.causal import Region
from envkit.curves import (c1_distance, cell_curve, diamond, find_timelike_path, is_timelike, lifted_diamond,
                           polyline, tube_region)
from envkit.errors import EndpointMismatch, NotTimelike
from envkit.geometry import build_grid, conformal_rescale, minkowski


def cover_diamond_oracle(g, q, p, turns):
    """Cells whose centre has a lift strictly inside both cones of the lifted endpoints."""
    L = g.length
    S = g.cone_offsets
    xq = g.xs[q[1]]
    xp = g.xs[p[1]] + turns * L
    eps = 1e-9 * g.dx
    out = np.zeros(g.shape, dtype=bool)
    for i in range(q[0] + 1, p[0]):
        for j in range(g.n_x):
            for k in range(-4, 5):
                x = g.xs[j] + k * L
                if abs(x - xq) < S[i] - S[q[0]] - eps and abs(x - xp) < S[p[0]] - S[i] - eps:
                    out[i, j] = True
    return out


def test_is_timelike_examples():
    g = minkowski(20, 20, dx=0.1, dt=0.05)
    assert is_timelike(g, polyline(g, [(0, 1.0), (0.9, 1.0)]))
    assert not is_timelike(g, polyline(g, [(0, 0.5), (0.5, 1.0)]))
    assert is_timelike(g, polyline(g, [(0, 0.5), (0.5, 0.75)]))


def test_c1_distance():
    g = minkowski(20, 20, dx=0.1, dt=0.05)
    a = polyline(g, [(0, 1.0), (0.45, 1.0), (0.9, 1.0)])
    assert c1_distance(a, a) == 0.0
    prev = None
    for delta in (0.1, 0.01, 0.001):
        b = polyline(g, [(0, 1.0), (0.45, 1.0 + delta), (0.9, 1.0)])
        d = c1_distance(a, b)
        assert d >= delta
        assert prev is None or d < prev
        prev = d
    assert prev < 0.01
    assert c1_distance(a, b) == pytest.approx(c1_distance(b, a))
    with pytest.raises(EndpointMismatch):
        c1_distance(a, polyline(g, [(0, 1.0), (0.9, 1.1)]))
    circ = minkowski(50, 10, dx=0.1, dt=0.05, topology="circle")
    w0, w1 = cell_curve(circ, (0, 0), (48, 0)), cell_curve(circ, (0, 0), (48, 0), turns=1)
    assert w1.winding(circ) == 1 and w0.winding(circ) == 0
    assert c1_distance(w0, w1, circ) >= circ.length


def test_diamond_closed_form():
    g = minkowski(81, 41, dx=0.025, dt=0.0125)
    q, p = (16, 20), (64, 20)
    want = np.zeros(g.shape, dtype=bool)
    for i in range(g.n_t):
        for j in range(g.n_x):
            t, x = g.times[i], g.xs[j]
            want[i, j] = abs(x - 0.5) < min(t - 0.2, 0.8 - t) - 1e-12
    assert np.array_equal(diamond(g, p, q).mask, want)
    assert not diamond(g, q, p)
    assert not diamond(g, p, p)


def test_lifted_diamond_equals_diamond_on_interval():
    g = build_grid({"n_t": 30, "n_x": 25, "dx": 0.04, "warp": {"kind": "exponential", "rate": 1.0}})
    for q, p in (((2, 5), (27, 9)), ((4, 12), (20, 12)), ((0, 0), (29, 3))):
        c = cell_curve(g, q, p)
        assert is_timelike(g, c)
        assert lifted_diamond(g, c) == diamond(g, p, q)


def test_cylinder_winding_deficit():
    g = build_grid({"topology": "circle", "n_t": 97, "n_x": 40, "dx": 0.025, "dt": 0.0125})
    # with p straight above q the winding-0 cover diamond is 1.2 wide at mid height and
    # already covers every row I(p,q) does, so there is no deficit
    same = (96, 0)
    assert lifted_diamond(g, cell_curve(g, (0, 0), same)) == diamond(g, same, (0, 0))
    q, p = (0, 0), (96, 16)
    full = diamond(g, p, q)
    c0 = cell_curve(g, q, p)
    I0 = lifted_diamond(g, c0)
    assert np.array_equal(I0.mask, cover_diamond_oracle(g, q, p, 0))
    assert I0 < full
    # rows around the middle are fully covered by I(p,q) because the cones wrap
    mid = g.n_t // 2
    assert full.mask[mid].all() and not I0.mask[mid].all()
    assert not is_timelike(g, cell_curve(g, q, p, turns=1))
    c1 = cell_curve(g, q, p, turns=-1)
    assert is_timelike(g, c1)
    I1 = lifted_diamond(g, c1)
    assert np.array_equal(I1.mask, cover_diamond_oracle(g, q, p, -1))
    assert I1 != I0 and I0 | I1 == full


def test_lifted_diamond_sampling_invariance():
    g = build_grid({"topology": "circle", "n_t": 60, "n_x": 30, "dx": 0.05, "warp": {"kind": "exponential",
                                                                                    "rate": 0.5}})
    q, p = (3, 4), (55, 8)
    a = cell_curve(g, q, p)
    b = cell_curve(g, q, p, n_samples=211)
    assert c1_distance(a, b, g) < g.dx
    assert lifted_diamond(g, a) == lifted_diamond(g, b)
    g2 = conformal_rescale(g, np.exp(g.times))
    assert np.array_equal(lifted_diamond(g2, cell_curve(g2, q, p)).mask, lifted_diamond(g, a).mask)


def test_lifted_diamond_rejects_null_curves():
    g = minkowski(20, 20, dx=0.1, dt=0.05)
    with pytest.raises(NotTimelike):
        lifted_diamond(g, polyline(g, [(0, 0.5), (0.5, 1.0)]))


def test_tube_region():
    g = minkowski(20, 20, dx=0.1, dt=0.05)
    v = polyline(g, [(0, 1.0), (0.95, 1.0)])
    tube = tube_region(g, v, 2 * g.dx)
    assert np.array_equal(tube.mask.sum(axis=1), np.full(20, 5))
    assert np.array_equal(tube_region(g, v, 0).mask.sum(axis=1), np.ones(20))
    tilt = polyline(g, [(0, 0.3), (0.95, 1.2)])
    st = tube_region(g, tilt, g.dx)
    assert st.mask.any(axis=1).all()
    centres = [np.nonzero(row)[0].mean() for row in st.mask]
    assert np.all(np.diff(centres) >= 0)


def test_find_timelike_path():
    g = minkowski(30, 30, dx=0.1, dt=0.05)
    full = Region.full(g)
    path, w = find_timelike_path(g, full, (25, 10), (2, 10))
    assert w == 0 and is_timelike(g, path)
    assert np.allclose(path.x, g.xs[10])
    tube = Region.box(g, slice(None), slice(9, 12))
    path, w = find_timelike_path(g, tube, (25, 11), (2, 9))
    assert is_timelike(g, path)
    cols = np.rint(path.x / g.dx).astype(int)
    assert np.all((cols >= 9) & (cols <= 11))
    two = tube | Region.box(g, slice(None), slice(20, 23))
    assert find_timelike_path(g, two, (25, 21), (2, 10)) is None


def test_diamond_cells_are_hit_by_timelike_paths():
    g = minkowski(16, 14, dx=0.1, dt=0.05)
    full = Region.full(g)
    q, p = (1, 6), (14, 7)
    d = diamond(g, p, q)
    for c in d:
        assert find_timelike_path(g, full, c, q) is not None
        assert find_timelike_path(g, full, p, c) is not None
    outside = ~d - Region.from_cells(g, [p, q])
    for c in outside:
        hit = find_timelike_path(g, full, c, q) is not None and find_timelike_path(g, full, p, c) is not None
        assert not hit, c
