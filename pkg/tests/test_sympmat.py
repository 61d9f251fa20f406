import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.linalg import expm

from roundtrip.errors import DimensionError, InconsistencyError, InputError
from roundtrip.sympmat import (J, R0, R1, UpsilonReason, antisymplectic_residual, classify_upsilon,
                               conjugate_involution, hamiltonian_block_matrix, hamiltonian_blocks,
                               is_antisymplectic_involution, is_hamiltonian, is_symplectic,
                               make_r_reversible, match_eigenvalues, r1_frame, random_hamiltonian,
                               random_symplectic, reversibility_residual, reversible_action,
                               sample_r_reversible, sample_upsilon_fraction_in_RA,
                               symplectic_inverse, symplectic_residual, tangent_basis_A2d,
                               upsilon_fraction)

dims = st.integers(min_value=1, max_value=3)
seeds = st.integers(min_value=0, max_value=2**32 - 1)


def rot(theta):
    return np.array([[np.cos(theta), np.sin(theta)], [-np.sin(theta), np.cos(theta)]])


@pytest.mark.parametrize("d", [1, 2, 3])
def test_standard_structures(d):
    assert is_symplectic(J(d))
    assert np.allclose(J(d) @ J(d), -np.eye(2 * d))
    assert is_antisymplectic_involution(R0(d))
    assert is_antisymplectic_involution(R1(d))
    assert not is_antisymplectic_involution(np.eye(2 * d))


def test_block_roundtrip(rng):
    L = random_hamiltonian(2, rng)
    assert is_hamiltonian(L)
    A, B, C = hamiltonian_blocks(L)
    assert np.allclose(hamiltonian_block_matrix(A, B, C), L)


@given(dims, seeds)
def test_exponential_of_hamiltonian_is_symplectic(d, seed):
    M = random_symplectic(d, np.random.default_rng(seed))
    assert symplectic_residual(M) < 1e-9 * max(1.0, np.linalg.norm(M) ** 2)
    assert np.allclose(symplectic_inverse(M) @ M, np.eye(2 * d), atol=1e-8 * np.linalg.cond(M))


@given(dims, seeds)
def test_conjugated_involution_stays_antisymplectic(d, seed):
    P = random_symplectic(d, np.random.default_rng(seed), scale=0.5)
    R = conjugate_involution(P, R0(d))
    assert antisymplectic_residual(R) < 1e-8 * np.linalg.cond(P) ** 2
    assert np.allclose(R @ R, np.eye(2 * d), atol=1e-8 * np.linalg.cond(P))


@given(dims, seeds)
def test_tangent_dimension(d, seed):
    P = random_symplectic(d, np.random.default_rng(seed), scale=0.3)
    R = conjugate_involution(P, R0(d))
    basis = tangent_basis_A2d(R)
    assert len(basis) == d * (d + 1)
    # each direction satisfies the linearized equations
    Jd = J(d)
    for X in basis:
        assert np.max(np.abs(R @ X + X @ R)) < 1e-8
        assert np.max(np.abs(R.T @ Jd @ X + X.T @ Jd @ R)) < 1e-8


def test_tangent_rejects_non_involution():
    with pytest.raises(InconsistencyError):
        tangent_basis_A2d(np.eye(4))


def test_r1_frame_is_identity_at_r1():
    assert np.allclose(r1_frame(R1(2)), np.eye(4))


@given(dims, seeds)
def test_r1_frame_conjugates(d, seed):
    P = random_symplectic(d, np.random.default_rng(seed), scale=0.3)
    R = conjugate_involution(P, R0(d))
    M = r1_frame(R)
    assert np.allclose(np.linalg.solve(M, R @ M), R1(d), atol=1e-7)


@given(dims, seeds)
def test_make_r_reversible(d, seed):
    rng = np.random.default_rng(seed)
    R = conjugate_involution(random_symplectic(d, rng, scale=0.3), R0(d))
    x = 1.0 + np.cumsum(rng.uniform(0.2, 1.0, d))
    L = make_r_reversible(R, x)
    assert reversibility_residual(R, L) < 1e-8
    assert symplectic_residual(L) < 1e-8 * np.linalg.norm(L) ** 2
    assert match_eigenvalues(np.linalg.eigvals(L), np.r_[x, 1 / x]) < 1e-7


def test_make_r_reversible_input_checks():
    with pytest.raises(DimensionError):
        make_r_reversible(R0(2), [2.0])
    with pytest.raises(InputError):
        make_r_reversible(R0(2), [2.0, 1.5])


def test_reversible_action_preserves_class(rng):
    R = R0(2)
    L = make_r_reversible(R, [1.5, 2.5])
    P = random_symplectic(2, rng, scale=0.3)
    L2 = reversible_action(R, P, L)
    assert reversibility_residual(R, L2) < 1e-8


@pytest.mark.parametrize("k", [1, 2, 3, 5, 12])
def test_roots_of_unity(k):
    v = classify_upsilon(rot(2 * np.pi / k))
    assert v.in_upsilon and v.reason is UpsilonReason.ROOT_OF_UNITY and v.order == k


def test_root_beyond_kmax_and_generic():
    assert not classify_upsilon(rot(2 * np.pi / 13), k_max=12).in_upsilon
    assert classify_upsilon(rot(2 * np.pi / 13), k_max=13).order == 13
    v = classify_upsilon(np.diag([2.0, 0.5]))
    assert not v.in_upsilon and v.reason is UpsilonReason.NONE


def test_double_eigenvalue():
    M = np.diag([2.0, 2.0, 0.5, 0.5])
    v = classify_upsilon(M)
    assert v.reason is UpsilonReason.DOUBLE_EIGENVALUE and v.min_eigenvalue_gap < 1e-12


def test_custom_predicate_and_csv():
    v = classify_upsilon(np.diag([3.0, 1 / 3]), extra=lambda lam: np.max(np.abs(lam)) > 2)
    assert v.reason is UpsilonReason.CUSTOM
    assert len(v.csv_row()) == len(v.CSV_HEADER)


def test_conjugacy_invariance(rng):
    M = expm(random_hamiltonian(2, rng))
    P = random_symplectic(2, rng, scale=0.3)
    a = classify_upsilon(M)
    b = classify_upsilon(np.linalg.solve(P, M @ P))
    assert a.reason is b.reason


def test_upsilon_fraction_small(rng):
    mats = [random_symplectic(1, rng) for _ in range(300)]
    assert upsilon_fraction(mats) <= 0.01
    assert sample_upsilon_fraction_in_RA(R1(2), 200, 7) <= 0.01
    assert len(sample_r_reversible(R0(1), 5, 1)) == 5


def test_match_eigenvalues_permutation():
    a = np.array([1 + 1j, 2, -3j])
    assert match_eigenvalues(a, a[::-1]) == 0.0
