import numpy as np
import pytest
from hypothesis import given, strategies as st

from roundtrip.errors import BlowUpError, ConvexityError, EvaluationError
from roundtrip.hamsys import (CallablePotential, CompactBump, CoshKinetic, DoubleWellPotential,
                              GaussianBump, Magnetic, Mechanical, NormalSlopeBump, QuadraticPotential,
                              ZeroPotential, check_parameter_continuity, directional_derivative_in_u,
                              field_jacobian, flow, flow_map, richardson_central, total_energy,
                              variational_flow, vector_field)
from roundtrip.orbits import find_periodic_orbit
from roundtrip.sympmat import J

Z1, Z2 = ZeroPotential(1), ZeroPotential(2)


def harmonic1():
    return Mechanical(QuadraticPotential(np.eye(1)))


def fd_grad(f, x, h=1e-6):
    return np.array([(f(x + h * e) - f(x - h * e)) / (2 * h) for e in np.eye(x.size)])


def test_vector_field_examples():
    free = Mechanical(Z2)
    x = np.array([1.0, 2.0, 3.0, 4.0])
    assert np.allclose(vector_field(free, Z2, x), [3, 4, 0, 0])
    V = DoubleWellPotential(1.3, 0.2)
    H = Mechanical(V)
    x = np.array([0.7, -0.4, 0.0, 0.0])
    assert np.allclose(vector_field(H, Z2, x), np.r_[0, 0, -V.grad(x[:2])])


def test_field_on_critical_graph_has_no_q_component():
    H = Magnetic(0.7, QuadraticPotential(np.eye(2)))
    q = np.array([0.3, -0.5])
    A = 0.7 * np.array([-q[1], q[0]])
    f = vector_field(H, Z2, np.r_[q, A])
    assert np.allclose(f[:2], 0, atol=1e-14) and np.linalg.norm(f[2:]) > 0.1


@pytest.mark.parametrize("pot", [DoubleWellPotential(1.3, 0.4), GaussianBump([0.1, 0.2], 0.5, 0.3),
                                 CompactBump([0.0, 0.1], 0.8, 1.2),
                                 NormalSlopeBump([0, 0], [1, 0], [0, 1], 0.2, 0.3, 0.7)])
def test_potential_derivatives(pot):
    q = np.array([0.15, 0.05])
    assert np.allclose(pot.grad(q), fd_grad(pot.value, q), atol=1e-7)
    Hh = np.array([fd_grad(lambda y: pot.grad(y)[i], q) for i in range(2)])
    assert np.allclose(pot.hess(q), Hh, atol=1e-6)


def test_potential_algebra():
    a, b = GaussianBump([0, 0], 1.0, 1.0), DoubleWellPotential()
    q = np.array([0.3, 0.4])
    assert np.isclose((a + 2.0 * b).value(q), a.value(q) + 2 * b.value(q))
    assert a.plus(b, 0.0) is a
    assert np.isclose((-a).value(q), -a.value(q))


def test_normal_slope_bump_vanishes_on_line():
    v = NormalSlopeBump([0, 0], [1, 0], [0, 1], 0.2, 0.3, 0.7)
    for s in np.linspace(-1, 1, 9):
        assert v.value(np.array([s, 0.0])) == 0.0
        assert np.isclose(v.grad(np.array([s, 0.0]))[1], v.slope(s))


@pytest.mark.parametrize("H", [Magnetic(0.5, QuadraticPotential(np.eye(2))),
                               CoshKinetic([0.3, -0.2], QuadraticPotential(np.eye(2)))])
def test_hamiltonian_derivatives(H):
    x = np.array([0.2, -0.3, 0.4, 0.1])
    f = lambda y: H.value(y[:2], y[2:])  # noqa: E731
    Hq, Hp = H.grad(x[:2], x[2:])
    assert np.allclose(np.r_[Hq, Hp], fd_grad(f, x), atol=1e-7)
    Hqq, Hpq, Hpp = H.hess(x[:2], x[2:])
    full = np.array([fd_grad(lambda y, i=i: np.r_[H.grad(y[:2], y[2:])[0], H.grad(y[:2], y[2:])[1]][i], x)
                     for i in range(4)])
    assert np.allclose(full[:2, :2], Hqq, atol=1e-6)
    assert np.allclose(full[2:, :2], Hpq, atol=1e-6)
    assert np.allclose(full[2:, 2:], Hpp, atol=1e-6)


def test_convexity_and_finiteness_guards():
    with pytest.raises(ConvexityError):
        Mechanical(Z1, inv_mass=[[-1.0]])
    bad = Mechanical(CallablePotential(1, lambda q: np.nan, lambda q: np.zeros(1), lambda q: np.zeros((1, 1))))
    with pytest.raises(EvaluationError):
        bad.value(np.zeros(1), np.zeros(1))


def test_harmonic_return():
    seg = flow(harmonic1(), Z1, [1.0, 0.0], 2 * np.pi)
    assert np.allclose(seg(2 * np.pi), [1.0, 0.0], atol=1e-8)
    assert np.allclose(seg(0.0), [1.0, 0.0])
    assert np.allclose(flow_map(harmonic1(), Z1, [0.3, 0.2], 0.0), [0.3, 0.2])


def test_double_well_energy_conservation():
    H = Mechanical(DoubleWellPotential(1.0, 0.0))
    x0 = np.array([0.0, 0.0, 0.9, 0.4])
    H = Mechanical(DoubleWellPotential(1.0, 0.0), energy=H.value(x0[:2], x0[2:]))
    seg = flow(H, Z2, x0, 50.0)
    assert seg.max_drift <= 1e-9


def test_variational_closed_form():
    _, Phi = variational_flow(harmonic1(), Z1, [1.0, 0.0], 0.0)
    assert np.allclose(Phi, np.eye(2))
    _, Phi = variational_flow(harmonic1(), Z1, [1.0, 0.0], np.pi / 2)
    assert np.allclose(Phi, [[0, 1], [-1, 0]], atol=1e-8)


@given(st.floats(-0.8, 0.8), st.floats(-0.8, 0.8), st.floats(0.1, 3.0))
def test_variational_symplectic(a, b, t):
    H = CoshKinetic([0.3, 0.0], QuadraticPotential(np.eye(2)), energy=3.0)
    _, Phi = variational_flow(H, Z2, [a, b, 0.2, -0.1], t)
    assert np.max(np.abs(Phi.T @ J(2) @ Phi - J(2))) <= 1e-7


def test_variational_matches_field_jacobian_for_short_time():
    H = Magnetic(0.5, QuadraticPotential(np.eye(2)))
    x = np.array([0.3, 0.1, 0.2, -0.4])
    _, Phi = variational_flow(H, Z2, x, 1e-4)
    assert np.allclose((Phi - np.eye(4)) / 1e-4, field_jacobian(H, Z2, x), atol=1e-3)


def test_blow_up_reported():
    # V = -q^4 sends the particle to infinity in finite time
    V = CallablePotential(1, lambda q: -q[0] ** 4, lambda q: np.array([-4 * q[0] ** 3]),
                          lambda q: np.array([[-12 * q[0] ** 2]]))
    with pytest.raises(BlowUpError) as info:
        flow(Mechanical(V, energy=1.0), Z1, [1.0, 1.0], 10.0)
    assert info.value.last_time > 0


def test_richardson_on_polynomial():
    r = richardson_central(lambda e: np.array([np.exp(e), np.sin(2 * e)]), [0.1, 0.05, 0.025])
    assert np.allclose(r.value, [1.0, 2.0], atol=1e-8) and r.converged


def test_directional_derivative_trivial_cases():
    H = Mechanical(DoubleWellPotential())
    x0 = np.array([1.2, 0.0, 0.0, 0.1])
    assert np.allclose(directional_derivative_in_u(H, Z2, Z2, x0, 1.0).value, 0)
    assert np.allclose(directional_derivative_in_u(H, Z2, GaussianBump([1, 0], 0.5, 1), x0, 0.0).value, 0)


def test_directional_derivative_matches_variational_forcing():
    # for a linear v = c.q the perturbed motion is a shifted oscillator
    H = Mechanical(QuadraticPotential(np.diag([1.0, 4.0])))
    c = np.array([0.3, -0.2])
    v = CallablePotential(2, lambda q: c @ q, lambda q: c, lambda q: np.zeros((2, 2)))
    x0 = np.array([0.5, 0.1, 0.0, 0.2])
    t = 1.3
    w = np.array([1.0, 2.0])
    # closed form per coordinate for xdd = -w^2 x - c
    oracle_q = -c / w**2 * (1 - np.cos(w * t))
    oracle_p = -c / w * np.sin(w * t)
    d = directional_derivative_in_u(H, Z2, v, x0, t)
    assert np.allclose(d.value, np.r_[oracle_q, oracle_p], atol=1e-6)


def test_parameter_continuity(double_well_orbit):
    H, u, orbit = double_well_orbit
    x0, T = orbit.base_point.x, orbit.period

    def solve(pot):
        o = find_periodic_orbit(H, pot, x0, T)
        return np.r_[o.base_point.x, o.period]

    v = GaussianBump([0.9, 0.1], 0.3, 1.0)
    rep = check_parameter_continuity(solve, u, v, [1e-3, 1e-4])
    assert rep.ok and np.isfinite(rep.fitted_C)
    same = check_parameter_continuity(solve, u, v, [0.0])
    assert same.displacements[0] == 0.0
    far = check_parameter_continuity(solve, u, CompactBump([5.0, 5.0], 0.5, 1.0), [1e-2, 1e-3])
    assert np.all(far.displacements <= 1e-9)
