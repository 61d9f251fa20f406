import numpy as np
import pytest
from hypothesis import given, strategies as st

from roundtrip.errors import SymmetryUnsolvableError
from roundtrip.hamsys import CoshKinetic, DoubleWellPotential, Magnetic, Mechanical, QuadraticPotential, ZeroPotential
from roundtrip.symmetry import (apply_symmetry, dgamma_section, fiber_minimum, legendre_g, legendre_h,
                                model_involution, symmetry_jacobian, symmetry_jacobian_on_gamma,
                                symmetry_scale)

Z2 = ZeroPotential(2)
BETA = 0.5
MAG = Magnetic(BETA, QuadraticPotential(np.eye(2)), energy=0.5)
COSH = CoshKinetic([0.6, -0.3], QuadraticPotential(np.eye(2)), energy=3.0)


def A(q):
    return BETA * np.array([-q[1], q[0]])


coord = st.floats(-1.0, 1.0)


def test_fiber_minimum_examples():
    q = np.array([0.3, -0.2])
    assert np.allclose(fiber_minimum(Mechanical(DoubleWellPotential()), Z2, q).p_star, 0)
    assert np.allclose(fiber_minimum(MAG, Z2, q).p_star, A(q))
    H1 = CoshKinetic([0.4], QuadraticPotential(np.eye(1)))
    assert np.allclose(fiber_minimum(H1, ZeroPotential(1), [0.2]).p_star, np.arcsinh(-0.4))


def test_dgamma_examples():
    q = np.array([0.3, -0.2])
    assert np.allclose(dgamma_section(Mechanical(DoubleWellPotential()), Z2, q), 0)
    dA = BETA * np.array([[0, -1], [1, 0]])
    assert np.allclose(dgamma_section(MAG, Z2, q), dA)
    h = 1e-6
    fd = np.column_stack([(fiber_minimum(COSH, Z2, q + h * e).p_star - fiber_minimum(COSH, Z2, q - h * e).p_star)
                          / (2 * h) for e in np.eye(2)])
    assert np.allclose(dgamma_section(COSH, Z2, q), fd, atol=1e-7)


def test_legendre_inverse():
    q, p = np.array([0.1, 0.2]), np.array([0.5, -0.7])
    assert np.allclose(legendre_g(COSH, q, legendre_h(COSH, q, p)), p)


def test_mechanical_symmetry_is_momentum_flip():
    H = Mechanical(DoubleWellPotential())
    r = apply_symmetry(H, Z2, [0.2, 0.1, 0.4, -0.3])
    assert np.allclose(r.image.p, [-0.4, 0.3]) and np.isclose(r.scale, 1.0)


@given(coord, coord, coord, coord)
def test_magnetic_closed_form(a, b, c, d):
    q, p = np.array([a, b]), np.array([c, d])
    if np.linalg.norm(p - A(q)) < 1e-3:
        return
    r = apply_symmetry(MAG, Z2, np.r_[q, p])
    assert np.allclose(r.image.p, 2 * A(q) - p, atol=1e-9)
    assert np.isclose(r.scale, 1.0, atol=1e-9)


def test_on_gamma_is_fixed():
    q = np.array([0.3, 0.4])
    x = np.r_[q, fiber_minimum(COSH, Z2, q).p_star]
    r = apply_symmetry(COSH, Z2, x)
    assert r.on_gamma and r.scale == 1.0 and np.allclose(r.image.x, x)


@given(coord, coord, st.floats(-1.5, 1.5), st.floats(-1.5, 1.5))
def test_cosh_symmetry_identities(a, b, c, d):
    x = np.array([a, b, c, d])
    q, p = x[:2], x[2:]
    if np.linalg.norm(COSH.grad(q, p)[1]) < 1e-3:
        return
    r = apply_symmetry(COSH, Z2, x)
    gp, gs = COSH.grad(q, p)[1], COSH.grad(q, r.image.p)[1]
    assert r.scale > 0
    assert np.allclose(gs, -r.scale * gp, atol=1e-9)
    assert abs(COSH.value(q, r.image.p) - COSH.value(q, p)) <= 1e-9
    back = apply_symmetry(COSH, Z2, r.image.x)
    assert np.allclose(back.image.x, x, atol=1e-7)
    assert abs(r.scale * back.scale - 1) <= 1e-7


def test_jacobian_on_gamma_matches_fd():
    q = np.array([0.2, -0.4])
    for H in (MAG, COSH):
        x = np.r_[q, fiber_minimum(H, Z2, q).p_star]
        closed = symmetry_jacobian_on_gamma(H, Z2, q)
        fd = symmetry_jacobian(H, Z2, x, h=1e-3)
        assert np.allclose(closed, fd, atol=1e-4)
    assert np.allclose(symmetry_jacobian_on_gamma(Mechanical(DoubleWellPotential()), Z2, q),
                       np.diag([1, 1, -1, -1]))


def test_jacobian_chain_rule_off_gamma():
    x = np.array([0.2, 0.1, 0.9, -0.5])
    D1 = symmetry_jacobian(COSH, Z2, x)
    D2 = symmetry_jacobian(COSH, Z2, apply_symmetry(COSH, Z2, x).image.x)
    assert np.allclose(D2 @ D1, np.eye(4), atol=1e-4)


def test_scale_continuity_to_gamma():
    q = np.array([0.1, 0.1])
    ps = fiber_minimum(COSH, Z2, q).p_star
    scales = [symmetry_scale(COSH, Z2, np.r_[q, ps + e * np.array([1.0, 0.5])]) for e in (1e-2, 1e-3, 1e-4)]
    assert abs(scales[-1] - 1) < abs(scales[0] - 1) and abs(scales[-1] - 1) < 1e-3


def test_model_involution():
    xt, s = model_involution(lambda y, x: float(x @ x), None, [0.3, -0.2])
    assert np.allclose(xt, [-0.3, 0.2]) and np.isclose(s, 1.0)
    # cubic oracle: s solves 0.01 s^2 - 0.001 s^3 = 0.011 on the branch near 1
    roots = np.roots([-0.001, 0.01, 0.0, -0.011])
    oracle = min((r.real for r in roots if abs(r.imag) < 1e-12 and r.real > 0), key=lambda r: abs(r - 1))
    _, s = model_involution(lambda y, x: float(x[0] ** 2 + x[0] ** 3), None, [0.1])
    assert np.isclose(s, oracle, atol=1e-12)
    assert model_involution(lambda y, x: float(x @ x), None, [0.0])[1] == 1.0


def test_model_involution_rate():
    f = lambda y, x: float(x[0] ** 2 + x[0] ** 3)  # noqa: E731
    xs = np.array([0.08, 0.04, 0.02, 0.01])
    dev = np.array([model_involution(f, None, [x])[1] - 1 for x in xs])
    slope = np.polyfit(np.log(xs), np.log(np.abs(dev)), 1)[0]
    assert 0.9 < slope < 1.1
    assert np.max(np.abs(dev) / xs) < 2.0


def test_model_involution_without_minimum():
    with pytest.raises(SymmetryUnsolvableError):
        model_involution(lambda y, x: float(-x @ x), None, [0.1])


def test_scale_difference_quotients_stay_bounded():
    # sampled local Lipschitz check, including pairs that straddle the critical graph
    rng = np.random.default_rng(5)
    q = np.array([0.1, -0.2])
    ps = fiber_minimum(COSH, Z2, q).p_star
    worst = 0.0
    for _ in range(200):
        x = np.r_[q, ps + rng.uniform(-0.5, 0.5, 2)]
        y = x + np.r_[0, 0, rng.normal(size=2)] * 1e-3
        worst = max(worst, abs(symmetry_scale(COSH, Z2, x) - symmetry_scale(COSH, Z2, y))
                    / np.linalg.norm(x - y))
    assert np.isfinite(worst) and worst < 5.0
