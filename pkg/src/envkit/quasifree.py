"""Quasifree states on the Cauchy-data symplectic space.

Vectors are stacked ``(phi, pi)`` on one slice; ``sigma(v, w) = v^T S w``
with ``S = dx [[0, -I], [I, 0]]`` (this reproduces ``kg.sigma_cauchy``).
A state is a symmetric positive-definite ``mu`` dominating ``sigma``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
import scipy.linalg as sla

from .errors import DegenerateSpan, DominationViolated, EmptyFamily, ShapeMismatch, TachyonicMode
from .geometry import SpacetimeGrid, Topology, curvature_rows
from .kg import CauchyData, FieldConfig, _check_slice

DOMINATION_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class SymplecticSpace:
    sigma_matrix: np.ndarray
    i0: int
    dx: float = 1.0

    def __post_init__(self) -> None:
        s = np.asarray(self.sigma_matrix, dtype=float)
        if s.ndim != 2 or s.shape[0] != s.shape[1] or s.shape[0] % 2:
            raise ShapeMismatch("sigma must be a square matrix of even size")
        if np.abs(s + s.T).max() > 1e-12 * max(np.abs(s).max(), 1.0):
            raise ValueError("sigma must be antisymmetric")
        object.__setattr__(self, "sigma_matrix", s)

    @property
    def dim(self) -> int:
        return self.sigma_matrix.shape[0]

    @classmethod
    def canonical(cls, grid: SpacetimeGrid, i0: int) -> "SymplecticSpace":
        n = grid.n_x
        z, e = np.zeros((n, n)), np.eye(n)
        return cls(grid.dx * np.block([[z, -e], [e, z]]), i0, grid.dx)

    def is_nondegenerate(self) -> bool:
        sv = np.linalg.svd(self.sigma_matrix, compute_uv=False)
        return bool(sv[-1] > 1e-12 * sv[0])

    def sigma(self, v, w) -> float:
        return float(_vec(self, v) @ self.sigma_matrix @ _vec(self, w))


def _vec(ss: SymplecticSpace, v) -> np.ndarray:
    if isinstance(v, CauchyData):
        if v.i0 != ss.i0:
            raise ShapeMismatch(f"vector lives on slice {v.i0}, space on {ss.i0}")
        v = v.vector
    v = np.asarray(v, dtype=float)
    if v.shape != (ss.dim,):
        raise ShapeMismatch(f"expected a vector of length {ss.dim}, got {v.shape}")
    return v


def _family(ss: SymplecticSpace, family) -> np.ndarray:
    """Stack a family of vectors as columns."""
    vs = [_vec(ss, v) for v in family]
    if not vs:
        raise EmptyFamily("empty vector family")
    return np.stack(vs, axis=1)


def _sqrt_pair(mu: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    w, U = np.linalg.eigh(mu)
    if w[0] <= 0:
        raise ValueError("mu must be positive definite")
    r = np.sqrt(w)
    return (U * r) @ U.T, (U / r) @ U.T


def _whitened_A(ss: SymplecticSpace, mu: np.ndarray) -> np.ndarray:
    """``M^{1/2} A M^{-1/2}`` where ``sigma = 2 mu(A., .)``."""
    _, m_isqrt = _sqrt_pair(mu)
    return -0.5 * m_isqrt @ ss.sigma_matrix @ m_isqrt


@dataclass(frozen=True, eq=False)
class QuasifreeState:
    mu_matrix: np.ndarray
    domination_norm: float

    @property
    def dim(self) -> int:
        return self.mu_matrix.shape[0]

    def mu(self, v, w=None) -> float:
        v = np.asarray(v.vector if isinstance(v, CauchyData) else v, dtype=float)
        w = v if w is None else np.asarray(w.vector if isinstance(w, CauchyData) else w, dtype=float)
        return float(v @ self.mu_matrix @ w)

    @property
    def admissible(self) -> bool:
        return self.domination_norm <= 1 + DOMINATION_TOL

    def scaled(self, lam: float, ss: SymplecticSpace, strict: bool = True) -> "QuasifreeState":
        return make_state(ss, lam * self.mu_matrix, strict=strict)


def make_state(ss: SymplecticSpace, mu: np.ndarray, strict: bool = True) -> QuasifreeState:
    """Wrap ``mu``; with ``strict`` a ``mu`` that fails to dominate ``sigma`` is
    rejected.  ``strict=False`` exists for negative controls."""
    mu = np.asarray(mu, dtype=float)
    if mu.shape != (ss.dim, ss.dim):
        raise ShapeMismatch(f"mu has shape {mu.shape}, space has dim {ss.dim}")
    if np.abs(mu - mu.T).max() > 1e-12 * np.abs(mu).max():
        raise ValueError("mu must be symmetric")
    mu = 0.5 * (mu + mu.T)
    norm = float(np.linalg.norm(_whitened_A(ss, mu), 2))
    if strict and norm > 1 + DOMINATION_TOL:
        raise DominationViolated(f"|sigma|^2 <= 4 mu mu fails: norm {norm:.6g}")
    return QuasifreeState(mu, norm)


def spatial_operator(grid: SpacetimeGrid, cfg: FieldConfig, i0: int) -> np.ndarray:
    """``-(1/f) D_xx + m^2 + kappa R (+ V)`` on slice ``i0`` as a dense matrix.
    First-order terms do not enter the frozen-time operator."""
    n = grid.n_x
    D = (np.diag(np.full(n - 1, 1.0), 1) + np.diag(np.full(n - 1, 1.0), -1) - 2 * np.eye(n))
    if grid.topology is Topology.CIRCLE:
        D[0, -1] += 1.0
        D[-1, 0] += 1.0
    K = -D / (grid.dx ** 2 * grid.warp[i0])
    pot = cfg.m ** 2 + (cfg.kappa * curvature_rows(grid)[i0] if cfg.kappa else 0.0)
    K = K + pot * np.eye(n)
    if cfg.V is not None:
        K = K + np.diag(np.broadcast_to(np.asarray(cfg.V, dtype=float), grid.shape)[i0])
    return K


def ground_state_mu(grid: SpacetimeGrid, cfg: FieldConfig, i0: int) -> QuasifreeState:
    """Frozen-time ground state ``mu = dx/2 diag(omega, omega^{-1})`` in the
    eigenbasis of the spatial operator."""
    _check_slice(grid, i0)
    w, U = np.linalg.eigh(spatial_operator(grid, cfg, i0))
    if w[0] <= 1e-10 * max(abs(w[-1]), 1.0):
        raise TachyonicMode(f"spatial operator has eigenvalue {w[0]:.3g} <= 0")
    om = np.sqrt(w)
    n = grid.n_x
    mu = np.zeros((2 * n, 2 * n))
    mu[:n, :n] = (U * om) @ U.T
    mu[n:, n:] = (U / om) @ U.T
    mu *= 0.5 * grid.dx
    return make_state(SymplecticSpace.canonical(grid, i0), mu)


def check_domination(ss: SymplecticSpace, qs: QuasifreeState) -> float:
    """Operator norm of ``A`` in the ``mu`` inner product; ``<= 1`` iff
    ``sigma(v,w)^2 <= 4 mu(v,v) mu(w,w)``."""
    if qs.dim != ss.dim:
        raise ShapeMismatch(f"state dim {qs.dim} != space dim {ss.dim}")
    return float(np.linalg.norm(_whitened_A(ss, qs.mu_matrix), 2))


@dataclass(frozen=True, eq=False)
class OneParticleStructure:
    A: np.ndarray
    J: np.ndarray
    absA: np.ndarray
    pure: bool
    mu_matrix: np.ndarray
    sigma_matrix: np.ndarray

    def two_point(self, family: np.ndarray) -> np.ndarray:
        """Gram matrix of ``mu(v,w) + i/2 sigma(v,w)`` over the columns."""
        F = np.asarray(family, dtype=float)
        return F.T @ self.mu_matrix @ F + 0.5j * (F.T @ self.sigma_matrix @ F)


def one_particle(ss: SymplecticSpace, qs: QuasifreeState, purity_tol: float = 1e-8) -> OneParticleStructure:
    norm = check_domination(ss, qs)
    if norm > 1 + DOMINATION_TOL:
        raise DominationViolated(f"domination norm {norm:.6g} > 1")
    m_sqrt, m_isqrt = _sqrt_pair(qs.mu_matrix)
    Ahat = -0.5 * m_isqrt @ ss.sigma_matrix @ m_isqrt
    u, p = sla.polar(Ahat)
    A = m_isqrt @ Ahat @ m_sqrt
    J = m_isqrt @ u @ m_sqrt
    absA = m_isqrt @ p @ m_sqrt
    pure = bool(np.abs(p - np.eye(ss.dim)).max() <= purity_tol)
    return OneParticleStructure(A, J, absA, pure, qs.mu_matrix, ss.sigma_matrix)


def two_point_psd(ss: SymplecticSpace, qs: QuasifreeState, family) -> tuple[np.ndarray, float, bool]:
    F = _family(ss, family)
    G = F.T @ qs.mu_matrix @ F + 0.5j * (F.T @ ss.sigma_matrix @ F)
    lo = float(np.linalg.eigvalsh(G)[0])
    return G, lo, lo >= -1e-10 * np.linalg.norm(qs.mu_matrix, 2)


def omega_value(qs: QuasifreeState, v) -> float:
    """``omega(W(v)) = exp(-mu(v,v)/2)``."""
    v = np.asarray(v.vector if isinstance(v, CauchyData) else v, dtype=float)
    if v.shape != (qs.dim,):
        raise ShapeMismatch(f"expected a vector of length {qs.dim}, got {v.shape}")
    return float(np.exp(-0.5 * (v @ qs.mu_matrix @ v)))


class WeylGram(NamedTuple):
    matrix: np.ndarray
    min_eigenvalue: float
    psd: bool


def weyl_gram(ss: SymplecticSpace, qs: QuasifreeState, family) -> WeylGram:
    """``M_jk = omega(W(v_j - v_k)) exp(-i sigma(v_j, v_k)/2)``, the Gram matrix
    of the vectors ``W(v_j) Omega``."""
    if qs.dim != ss.dim:
        raise ShapeMismatch(f"state dim {qs.dim} != space dim {ss.dim}")
    F = _family(ss, family)
    G = F.T @ qs.mu_matrix @ F
    d = np.diag(G)
    musq = d[:, None] + d[None, :] - 2.0 * G
    S = F.T @ ss.sigma_matrix @ F
    M = np.exp(-0.5 * musq) * np.exp(-0.5j * S)
    M = 0.5 * (M + M.conj().T)
    lo = float(np.linalg.eigvalsh(M)[0])
    return WeylGram(M, lo, lo >= -1e-10 * float(np.real(np.trace(M))))


def _unit_columns(X: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(X, axis=0)
    keep = n > 0
    return X[:, keep] / n[keep]


def _orthonormal(X: np.ndarray, tol: float, what: str) -> np.ndarray:
    """Left singular vectors of ``X`` with singular value above ``tol``."""
    U, s, _ = np.linalg.svd(X, full_matrices=False)
    keep = s > tol
    r = int(keep.sum())
    if r < X.shape[1]:
        warnings.warn(DegenerateSpan(f"{what}: {X.shape[1]} generators span numerical rank {r}"),
                      stacklevel=3)
    return U[:, keep]


def density_residual(ss: SymplecticSpace, qs: QuasifreeState, span_small: Sequence,
                     span_big: Sequence, rtol: float = 1e-8, small_rtol: float | None = None) -> float:
    """Largest ``mu``-distance from a unit vector of ``span(span_big)`` to
    ``span(span_small)``; 0 means the small span is dense in the big one.

    Generators are normalised to unit ``mu``-norm.  The big span keeps the
    directions with singular value above ``rtol * s_max(big)``; the small span
    is cut at the looser ``small_rtol * s_max(big)`` (default ``rtol * 1e-4``)
    so that a direction sitting just above the big cut-off is not lost from the
    small span by rounding alone.
    """
    S = _family(ss, span_small)
    B = _family(ss, span_big)
    m_sqrt, _ = _sqrt_pair(qs.mu_matrix)
    Bw = _unit_columns(m_sqrt @ B)
    Sw = _unit_columns(m_sqrt @ S)
    if Bw.shape[1] == 0:
        return 0.0
    if Sw.shape[1] == 0:
        return 1.0
    top = float(np.linalg.norm(Bw, 2))
    small_rtol = rtol * 1e-4 if small_rtol is None else small_rtol
    Qb = _orthonormal(Bw, rtol * top, "big span")
    Qs = _orthonormal(Sw, small_rtol * top, "small span")
    R = Qb - Qs @ (Qs.T @ Qb)
    return float(min(np.linalg.norm(R, 2), 1.0))


def random_family(qs: QuasifreeState, k: int, rng: np.random.Generator, scale: float = 1.0) -> list[np.ndarray]:
    """``k`` Gaussian vectors, isotropic in the ``mu`` metric with
    ``E mu(v,v) = scale^2``."""
    _, m_isqrt = _sqrt_pair(qs.mu_matrix)
    Z = rng.standard_normal((qs.dim, k)) * (scale / np.sqrt(qs.dim))
    return list((m_isqrt @ Z).T)
