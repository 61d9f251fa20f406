"""Symplectic, Hamiltonian and antisymplectic matrix algebra.

Matrices act on R^{2d} = (q, p) with the standard structure
``J = [[0, I], [-I, 0]]``.  The degenerate set used throughout is the set of
symplectic matrices having an eigenvalue at a root of unity or a repeated
eigenvalue; :func:`classify_upsilon` decides membership numerically.
"""
from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.linalg

from .config import DEFAULT
from .errors import DimensionError, InconsistencyError, InputError, NumericalError


def J(d: int) -> np.ndarray:
    """The standard symplectic matrix of size 2d."""
    I = np.eye(d)
    Z = np.zeros((d, d))
    return np.block([[Z, I], [-I, Z]])


def R0(d: int) -> np.ndarray:
    """(q, p) -> (q, -p)."""
    return np.diag(np.r_[np.ones(d), -np.ones(d)])


def R1(d: int) -> np.ndarray:
    """(q, p) -> (p, q)."""
    I = np.eye(d)
    Z = np.zeros((d, d))
    return np.block([[Z, I], [I, Z]])


def half_dim(M) -> int:
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {M.shape}")
    if M.shape[0] % 2:
        raise DimensionError(f"expected an even-sized matrix, got {M.shape[0]}")
    return M.shape[0] // 2


def symplectic_residual(M) -> float:
    M = np.asarray(M, dtype=float)
    Jd = J(half_dim(M))
    return float(np.max(np.abs(M.T @ Jd @ M - Jd)))


def is_symplectic(M, tol: float = DEFAULT.symplectic_tol) -> bool:
    return symplectic_residual(M) <= tol


def antisymplectic_residual(R) -> float:
    R = np.asarray(R, dtype=float)
    Jd = J(half_dim(R))
    return float(np.max(np.abs(R.T @ Jd @ R + Jd)))


def involution_residual(R) -> float:
    R = np.asarray(R, dtype=float)
    return float(np.max(np.abs(R @ R - np.eye(R.shape[0]))))


def is_antisymplectic_involution(R, tol: float = DEFAULT.symplectic_tol) -> bool:
    R = np.asarray(R, dtype=float)
    d = half_dim(R)
    if involution_residual(R) > tol or antisymplectic_residual(R) > tol:
        return False
    n = 2 * d
    # eigenspace dimensions via the spectral projectors (I +- R)/2
    scale = max(1.0, float(np.linalg.norm(R, 2)))
    rank_plus = np.linalg.matrix_rank((np.eye(n) + R) / 2, tol=1e3 * tol * scale)
    rank_minus = np.linalg.matrix_rank((np.eye(n) - R) / 2, tol=1e3 * tol * scale)
    return rank_plus == d and rank_minus == d


def hamiltonian_block_matrix(A, B, C) -> np.ndarray:
    """Assemble ``[[C^T, B], [-A, -C]]`` (A, B symmetric)."""
    A, B, C = (np.atleast_2d(np.asarray(X, dtype=float)) for X in (A, B, C))
    return np.block([[C.T, B], [-A, -C]])


def hamiltonian_blocks(L) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Inverse of :func:`hamiltonian_block_matrix`: return (A, B, C)."""
    L = np.asarray(L, dtype=float)
    d = half_dim(L)
    return -L[d:, :d], L[:d, d:], -L[d:, d:]


def is_hamiltonian(L, tol: float = DEFAULT.symplectic_tol) -> bool:
    L = np.asarray(L, dtype=float)
    Jd = J(half_dim(L))
    return float(np.max(np.abs(L.T @ Jd + Jd @ L))) <= tol


def random_hamiltonian(d: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    """Hamiltonian block matrix with entries drawn uniformly from [-scale, scale]."""
    A = rng.uniform(-scale, scale, (d, d))
    B = rng.uniform(-scale, scale, (d, d))
    C = rng.uniform(-scale, scale, (d, d))
    return hamiltonian_block_matrix((A + A.T) / 2, (B + B.T) / 2, C)


def random_symplectic(d: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    return scipy.linalg.expm(random_hamiltonian(d, rng, scale))


def symplectic_inverse(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    Jd = J(half_dim(M))
    return -Jd @ M.T @ Jd


def conjugate_involution(M, R, cond_max: float = 1e12) -> np.ndarray:
    """Return ``M^{-1} R M``, the action of Sp(2d) on antisymplectic involutions."""
    M = np.asarray(M, dtype=float)
    R = np.asarray(R, dtype=float)
    if half_dim(M) != half_dim(R):
        raise DimensionError("M and R have different sizes")
    cond = np.linalg.cond(M)
    if not np.isfinite(cond) or cond > cond_max:
        raise NumericalError(f"conjugating matrix is singular (cond={cond:.3e})")
    return np.linalg.solve(M, R @ M)


def _linearized_a2d_operator(R: np.ndarray) -> np.ndarray:
    n = R.shape[0]
    Jd = J(n // 2)
    cols = []
    for k in range(n * n):
        X = np.zeros(n * n)
        X[k] = 1.0
        X = X.reshape(n, n)
        first = R @ X + X @ R
        second = R.T @ Jd @ X + X.T @ Jd @ R
        cols.append(np.r_[first.ravel(), second.ravel()])
    return np.array(cols).T


def tangent_basis_A2d(R, tol: float = 1e-9) -> list[np.ndarray]:
    """Orthonormal basis of the tangent space of the antisymplectic involutions at R.

    Solves the linearized equations ``RX + XR = 0``, ``R^T J X + X^T J R = 0``
    by an SVD null space.  The space always has dimension d(d+1).
    """
    R = np.asarray(R, dtype=float)
    d = half_dim(R)
    op = _linearized_a2d_operator(R)
    _, s, vt = np.linalg.svd(op)
    cutoff = tol * max(1.0, s[0])
    rank = int(np.sum(s > cutoff))
    null = vt[rank:]
    if null.shape[0] != d * (d + 1):
        raise InconsistencyError(
            f"null space has dimension {null.shape[0]}, expected {d * (d + 1)}; "
            "R is not an antisymplectic involution"
        )
    n = 2 * d
    return [v.reshape(n, n) for v in null]


def _column_basis(P: np.ndarray, d: int) -> np.ndarray:
    u, s, _ = np.linalg.svd(P)
    return u[:, :d]


def r1_frame(R, tol: float = 1e-8) -> np.ndarray:
    """A symplectic M with ``M^{-1} R M = R1``.

    The eigenspaces E_1(R), E_-1(R) are a transverse Lagrangian pair.  Bases
    of them are normalized into a symplectic basis adapted to R0 and then
    rotated onto R1.  When R is already R1 the result is the identity.
    """
    R = np.asarray(R, dtype=float)
    d = half_dim(R)
    if not is_antisymplectic_involution(R, tol):
        raise InputError("R is not an antisymplectic involution")
    n = 2 * d
    I = np.eye(d)
    K = np.block([[I, I], [-I, I]]) / np.sqrt(2.0)  # K^{-1} R0 K = R1
    Kinv = symplectic_inverse(K)
    P_plus = (np.eye(n) + R) / 2
    P_minus = (np.eye(n) - R) / 2
    U = P_plus @ Kinv[:, :d]
    V = P_minus @ Kinv[:, d:]
    if np.linalg.matrix_rank(U, tol=1e-6) < d:
        U = _column_basis(P_plus, d)
    if np.linalg.matrix_rank(V, tol=1e-6) < d:
        V = _column_basis(P_minus, d)
    Jd = J(d)
    pairing = U.T @ Jd @ V
    if np.linalg.cond(pairing) > 1e12:
        raise InputError("eigenspaces of R are not transverse")
    V = V @ np.linalg.inv(pairing)
    N = np.hstack([U, V])  # N^{-1} R N = R0
    M = N @ K
    if symplectic_residual(M) > 1e-8 * max(1.0, np.linalg.norm(M) ** 2):
        raise InconsistencyError("failed to build a symplectic frame for R")
    return M


def make_r_reversible(R, x: Sequence[float]) -> np.ndarray:
    """R-reversible symplectic matrix with simple spectrum {x_i, 1/x_i}.

    Builds ``M X M^{-1}`` with X = diag(x, 1/x) and M from :func:`r1_frame`.
    """
    R = np.asarray(R, dtype=float)
    d = half_dim(R)
    x = np.asarray(x, dtype=float)
    if x.shape != (d,):
        raise DimensionError(f"expected {d} eigenvalue parameters, got {x.shape}")
    if not (np.all(x > 1.0) and np.all(np.diff(x) > 0)):
        raise InputError("x must satisfy 1 < x_1 < ... < x_d")
    M = r1_frame(R)
    X = np.diag(np.r_[x, 1.0 / x])
    return M @ X @ symplectic_inverse(M)


def reversibility_residual(R, L) -> float:
    """``||(R L)^2 - I||_inf``; zero iff L is R-reversible."""
    RL = np.asarray(R, dtype=float) @ np.asarray(L, dtype=float)
    return float(np.max(np.abs(RL @ RL - np.eye(RL.shape[0]))))


def reversible_action(R, P, L) -> np.ndarray:
    """Transitive action ``(P, L) -> R P^{-1} R L P`` of Sp(2d) on R A(2d)."""
    R = np.asarray(R, dtype=float)
    P = np.asarray(P, dtype=float)
    return R @ symplectic_inverse(P) @ R @ np.asarray(L, dtype=float) @ P


class UpsilonReason(enum.Enum):
    ROOT_OF_UNITY = "RootOfUnity"
    DOUBLE_EIGENVALUE = "DoubleEigenvalue"
    CUSTOM = "Custom"
    NONE = "None"


@dataclass(frozen=True)
class UpsilonVerdict:
    in_upsilon: bool
    reason: UpsilonReason
    order: int | None
    min_root_distance: float
    min_eigenvalue_gap: float
    discriminant: float
    eigenvalues: np.ndarray = field(repr=False, compare=False)

    def csv_row(self) -> list:
        return [
            int(self.in_upsilon),
            self.reason.value,
            "" if self.order is None else self.order,
            f"{self.min_root_distance:.12e}",
            f"{self.min_eigenvalue_gap:.12e}",
            f"{self.discriminant:.12e}",
        ]

    CSV_HEADER = ("in_upsilon", "reason", "order", "min_root_distance",
                  "min_eigenvalue_gap", "discriminant")


def root_distances(eigenvalues, k_max: int) -> np.ndarray:
    """``d[k-1] = min_i |lambda_i^k - 1|`` for k = 1..k_max."""
    lam = np.asarray(eigenvalues, dtype=complex)
    ks = np.arange(1, k_max + 1)
    return np.min(np.abs(lam[None, :] ** ks[:, None] - 1.0), axis=1)


def min_pairwise_gap(eigenvalues) -> float:
    lam = np.asarray(eigenvalues, dtype=complex)
    if lam.size < 2:
        return np.inf
    diff = np.abs(lam[:, None] - lam[None, :])
    diff[np.diag_indices(lam.size)] = np.inf
    return float(diff.min())


def discriminant(eigenvalues) -> float:
    """Discriminant of the monic characteristic polynomial."""
    lam = np.asarray(eigenvalues, dtype=complex)
    prod = 1.0 + 0j
    for a, b in itertools.combinations(lam, 2):
        prod *= (a - b) ** 2
    return float(prod.real)


def classify_upsilon(
    M,
    root_tol: float = DEFAULT.root_tol,
    gap_tol: float = DEFAULT.gap_tol,
    k_max: int = DEFAULT.k_max,
    extra: Callable[[np.ndarray], bool] | None = None,
) -> UpsilonVerdict:
    """Decide whether M has an eigenvalue at a k-th root of unity (k <= k_max)
    or a repeated eigenvalue.

    Root-of-unity detection takes precedence.  ``extra`` is an optional
    conjugacy-invariant predicate on the eigenvalues; a hit is reported as
    ``UpsilonReason.CUSTOM``.
    """
    if k_max < 1:
        raise InputError("k_max must be >= 1")
    M = np.asarray(M, dtype=float)
    lam = np.linalg.eigvals(M)
    dist = root_distances(lam, k_max)
    gap = min_pairwise_gap(lam)
    disc = discriminant(lam)
    hits = np.nonzero(dist <= root_tol)[0]
    if hits.size:
        reason, order = UpsilonReason.ROOT_OF_UNITY, int(hits[0]) + 1
    elif gap <= gap_tol:
        reason, order = UpsilonReason.DOUBLE_EIGENVALUE, None
    elif extra is not None and extra(lam):
        reason, order = UpsilonReason.CUSTOM, None
    else:
        reason, order = UpsilonReason.NONE, None
    return UpsilonVerdict(
        in_upsilon=reason is not UpsilonReason.NONE,
        reason=reason,
        order=order,
        min_root_distance=float(dist.min()),
        min_eigenvalue_gap=gap,
        discriminant=disc,
        eigenvalues=lam,
    )


def upsilon_fraction(matrices: Iterable, **kwargs) -> float:
    verdicts = [classify_upsilon(M, **kwargs).in_upsilon for M in matrices]
    if not verdicts:
        raise InputError("no matrices to classify")
    return float(np.mean(verdicts))


def sample_r_reversible(
    R, n_samples: int, rng_seed: int, x_gap: tuple[float, float] = (0.2, 1.0)
) -> list[np.ndarray]:
    """Random R-reversible matrices.

    Each draw is ``make_r_reversible(R, x)`` with random well-separated x,
    moved by the transitive action of a random symplectic matrix so that the
    samples also cover the elliptic part of R A(2d).
    """
    if n_samples < 1:
        raise InputError("n_samples must be >= 1")
    R = np.asarray(R, dtype=float)
    d = half_dim(R)
    rng = np.random.default_rng(rng_seed)
    out = []
    for _ in range(n_samples):
        x = 1.0 + np.cumsum(rng.uniform(*x_gap, size=d))
        L = make_r_reversible(R, x)
        P = random_symplectic(d, rng)
        out.append(reversible_action(R, P, L))
    return out


def sample_upsilon_fraction_in_RA(
    R,
    n_samples: int,
    rng_seed: int,
    root_tol: float = DEFAULT.root_tol,
    gap_tol: float = DEFAULT.gap_tol,
    k_max: int = DEFAULT.k_max,
) -> float:
    """Fraction of random R-reversible matrices that fall in the degenerate set."""
    samples = sample_r_reversible(R, n_samples, rng_seed)
    return upsilon_fraction(samples, root_tol=root_tol, gap_tol=gap_tol, k_max=k_max)


def match_eigenvalues(a, b) -> float:
    """Max distance under the optimal one-to-one matching of two multisets."""
    from scipy.optimize import linear_sum_assignment

    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != b.shape:
        raise DimensionError("eigenvalue multisets have different sizes")
    cost = np.abs(a[:, None] - b[None, :])
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].max()) if a.size else 0.0
