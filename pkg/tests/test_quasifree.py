import warnings

import numpy as np
import pytest

from envkit import kg
from envkit import quasifree as Q
from envkit.errors import DegenerateSpan, DominationViolated, EmptyFamily, ShapeMismatch, TachyonicMode
from envkit.geometry import build_grid, minkowski


@pytest.fixture(scope="module")
def ground():
    g = minkowski(10, 16, dx=1 / 16, dt=0.5 / 16, topology="circle")
    ss = Q.SymplecticSpace.canonical(g, 4)
    return g, ss, Q.ground_state_mu(g, kg.FieldConfig(m=1.0), 4)


def test_canonical_space_matches_sigma_cauchy(ground):
    g, ss, _ = ground
    rng = np.random.default_rng(0)
    d1 = kg.CauchyData(rng.normal(size=16), rng.normal(size=16), 4)
    d2 = kg.CauchyData(rng.normal(size=16), rng.normal(size=16), 4)
    assert ss.sigma(d1, d2) == pytest.approx(kg.sigma_cauchy(g, d1, d2), rel=1e-12)
    assert ss.is_nondegenerate() and ss.dim == 32
    with pytest.raises(ShapeMismatch):
        ss.sigma(d1, kg.CauchyData(d2.phi, d2.pi, 5))
    with pytest.raises(ValueError):
        Q.SymplecticSpace(np.eye(4), 1)
    with pytest.raises(ShapeMismatch):
        Q.SymplecticSpace(np.zeros((3, 3)), 1)


def test_ground_state_is_pure_with_lattice_frequencies(ground):
    g, ss, qs = ground
    assert Q.check_domination(ss, qs) == pytest.approx(1.0, abs=1e-10)
    assert qs.admissible
    op = Q.one_particle(ss, qs)
    assert op.pure
    assert np.abs(op.J @ op.J + np.eye(ss.dim)).max() < 1e-10
    assert np.allclose(op.A, op.J, atol=1e-8)
    # sigma = 2 mu(A., .)
    assert np.allclose(2 * op.A.T @ qs.mu_matrix, ss.sigma_matrix, atol=1e-12)
    # frequencies: lattice dispersion sqrt((2 sin(k dx/2)/dx)^2 + m^2)
    K = Q.spatial_operator(g, kg.FieldConfig(m=1.0), 4)
    n = g.n_x
    ks = 2 * np.pi * np.fft.fftfreq(n, d=g.dx)
    want = np.sort((2 * np.sin(ks * g.dx / 2) / g.dx) ** 2 + 1.0)
    assert np.allclose(np.linalg.eigvalsh(K), want, rtol=1e-12)
    mu_phi = qs.mu_matrix[:n, :n] * 2 / g.dx
    assert np.allclose(np.linalg.eigvalsh(mu_phi), np.sqrt(want), rtol=1e-10)


def test_scaled_states(ground):
    _, ss, qs = ground
    mixed = qs.scaled(2.0, ss)
    assert Q.check_domination(ss, mixed) == pytest.approx(0.5, rel=1e-10)
    assert not Q.one_particle(ss, mixed).pure
    with pytest.raises(DominationViolated):
        qs.scaled(0.5, ss)
    bad = qs.scaled(0.5, ss, strict=False)
    assert bad.domination_norm == pytest.approx(2.0, rel=1e-10) and not bad.admissible
    with pytest.raises(DominationViolated):
        Q.one_particle(ss, bad)


def test_degenerate_toy_sigma_zero():
    ss = Q.SymplecticSpace(np.zeros((4, 4)), 1)
    qs = Q.make_state(ss, np.eye(4))
    assert Q.check_domination(ss, qs) == 0.0
    F = np.random.default_rng(1).normal(size=(4, 3))
    G = Q.one_particle(ss, qs).two_point(F)
    assert np.allclose(G, F.T @ F)


def test_tachyonic_and_shape_errors(ground):
    g, ss, qs = ground
    with pytest.raises(TachyonicMode):
        Q.ground_state_mu(g, kg.FieldConfig(m=0.0), 4)
    with pytest.raises(TachyonicMode):
        Q.ground_state_mu(g, kg.FieldConfig(m=0.1, V=-5.0), 4)
    # the Dirichlet interval has no zero mode
    strip = minkowski(10, 16, dx=1 / 16, dt=0.5 / 16)
    assert Q.ground_state_mu(strip, kg.FieldConfig(m=0.0), 4).admissible
    with pytest.raises(ShapeMismatch):
        Q.make_state(ss, np.eye(4))
    with pytest.raises(ShapeMismatch):
        Q.check_domination(Q.SymplecticSpace(np.zeros((4, 4)), 1), qs)
    with pytest.raises(ShapeMismatch):
        Q.omega_value(qs, np.zeros(3))
    with pytest.raises(EmptyFamily):
        Q.weyl_gram(ss, qs, [])


def test_omega_value(ground):
    _, ss, qs = ground
    assert Q.omega_value(qs, np.zeros(ss.dim)) == 1.0
    v = Q.random_family(qs, 1, np.random.default_rng(2))[0]
    v = v * np.sqrt(2.0 / qs.mu(v))
    assert Q.omega_value(qs, v) == pytest.approx(np.exp(-1.0), rel=1e-12)
    assert Q.omega_value(qs, 2 * v) < Q.omega_value(qs, v)


def test_two_point_and_weyl_gram(ground):
    _, ss, qs = ground
    rng = np.random.default_rng(3)
    fam = Q.random_family(qs, 10, rng)
    G, lo, ok = Q.two_point_psd(ss, qs, fam)
    assert ok and lo >= -1e-10
    assert np.allclose(np.diag(G).imag, 0.0)
    F = np.stack(fam, axis=1)
    assert np.allclose(G.imag, 0.5 * F.T @ ss.sigma_matrix @ F, atol=1e-14)
    zero = Q.weyl_gram(ss, qs, [np.zeros(ss.dim)])
    assert np.allclose(zero.matrix, [[1.0]]) and zero.psd
    wg = Q.weyl_gram(ss, qs, Q.random_family(qs, 8, rng))
    assert wg.psd
    assert np.allclose(np.diag(wg.matrix), 1.0)
    assert np.allclose(wg.matrix, wg.matrix.conj().T)


def test_random_family_is_mu_isotropic(ground):
    _, _, qs = ground
    fam = Q.random_family(qs, 4000, np.random.default_rng(4), scale=3.0)
    assert np.mean([qs.mu(v) for v in fam]) == pytest.approx(9.0, rel=0.05)


def test_density_residual_basics(ground):
    _, ss, qs = ground
    rng = np.random.default_rng(5)
    big = Q.random_family(qs, 6, rng)
    assert Q.density_residual(ss, qs, big, big) < 1e-10
    # scale invariance and antitonicity in the small span
    assert Q.density_residual(ss, qs, [3 * v for v in big], big) < 1e-10
    r1 = Q.density_residual(ss, qs, big[:2], big)
    r2 = Q.density_residual(ss, qs, big[:4], big)
    assert 0 < r2 <= r1 <= 1
    # mu-orthogonal spans are at distance one
    _, m_isqrt = Q._sqrt_pair(qs.mu_matrix)
    e = np.eye(ss.dim)
    assert Q.density_residual(ss, qs, [m_isqrt @ e[0]], [m_isqrt @ e[1]]) == pytest.approx(1.0)
    with pytest.raises(EmptyFamily):
        Q.density_residual(ss, qs, [], big)


def test_density_residual_warns_on_degenerate_span(ground):
    _, ss, qs = ground
    v = Q.random_family(qs, 1, np.random.default_rng(6))[0]
    with pytest.warns(DegenerateSpan):
        assert Q.density_residual(ss, qs, [v], [v, 2 * v]) < 1e-10
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        Q.density_residual(ss, qs, [v], [v])


def test_ground_state_on_warped_slice_with_curvature():
    g = build_grid({"n_t": 12, "n_x": 16, "dx": 1 / 16, "warp": {"kind": "exponential", "rate": 1.0}})
    cfg = kg.FieldConfig(m=1.0, kappa=1 / 6)
    qs = Q.ground_state_mu(g, cfg, 6)
    ss = Q.SymplecticSpace.canonical(g, 6)
    assert Q.check_domination(ss, qs) == pytest.approx(1.0, abs=1e-10)
    assert Q.one_particle(ss, qs).pure
