"""Reduced linearized dynamics along a periodic orbit.

The reduced space at a non-fixed point x is ``ker dH(x) / span V_H(x)``.  It is
represented by a symplectic basis ``W`` (2n x 2d) of a complement of the flow
direction inside ``ker dH``; a linear map D between such spaces reduces to

    red(D) = J_2d^{-1} W_to^T J D W_from,

because ``W_to^T J V_H = 0`` kills the flow component.  Two bases are used:

* ``quotient_basis``: Euclidean complement of span{grad H, J grad H}, which is
  J-invariant, so valid everywhere including turning points;
* ``section_lift_basis``: coordinates ``x_* = (q_*, p_*)`` on a section
  ``{q0 = r, H = 0}`` of an orthonormal frame ``(e0, E)``.

Sections use the graph function kappa, ``{H + u = 0} = {p0 = -kappa(q0, x_*)}``.
Its Hessian gives the Hamiltonian blocks ``L = J S`` with
``S = [[A, C], [C^T, B]]``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .config import DEFAULT, Tolerances
from .errors import (ConvergenceError, GeometryError, NotTwoWayError, ReparametrizationError,
                     SectionInvalidError)
from .hamsys import (Hamiltonian, Jn, PhasePoint, Potential, as_state, flow, richardson_central,
                     split, total_grad, total_hess, variational_flow, vector_field)
from .orbits import PeriodicOrbit, TimeSymmetry, classify_orbit, OrbitKind
from .sympmat import J as J_std
from .symmetry import apply_symmetry, symmetry_jacobian, symmetry_jacobian_on_gamma


# ---------------------------------------------------------------------------
# bases and reduction


def quotient_basis(H: Hamiltonian, u: Potential, x) -> np.ndarray:
    """Orthonormal J-invariant basis of span{grad H, J grad H}^perp, ordered (e_1..e_d, f_1..f_d)."""
    x = as_state(x)
    m = x.size
    n = m // 2
    d = n - 1
    Jm = Jn(n)
    g = total_grad(H, u, x)
    ng = np.linalg.norm(g)
    if ng < 1e-14:
        raise GeometryError("energy gradient vanishes; reduced space undefined")
    g = g / ng
    basis = [g, Jm @ g]
    es, fs = [], []
    for k in range(m):
        if len(es) == d:
            break
        v = np.zeros(m)
        v[k] = 1.0
        for _ in range(2):
            for b in basis:
                v = v - (b @ v) * b
        nv = np.linalg.norm(v)
        if nv < 1e-6:
            continue
        e = v / nv
        f = -Jm @ e
        basis += [e, f]
        es.append(e)
        fs.append(f)
    if len(es) != d:
        raise GeometryError("could not complete the reduced basis")
    return np.column_stack(es + fs)


def reduce_linear(D: np.ndarray, W_from: np.ndarray, W_to: np.ndarray) -> np.ndarray:
    """Matrix of D between reduced spaces, given standard symplectic bases."""
    m = W_to.shape[1]
    n = W_to.shape[0] // 2
    Jd = J_std(m // 2)
    return -Jd @ W_to.T @ Jn(n) @ D @ W_from


# ---------------------------------------------------------------------------
# section frames


@dataclass(frozen=True)
class SectionFrame:
    """Orthonormal frame at an anchor point with ``e0`` along the projected velocity."""

    anchor: PhasePoint
    e0: np.ndarray
    E: np.ndarray

    @property
    def O(self) -> np.ndarray:
        return np.column_stack([self.e0, self.E])

    @property
    def n(self) -> int:
        return self.e0.size

    def r(self, q) -> float:
        return float(self.e0 @ (np.asarray(q) - self.anchor.q))

    def coords(self, x) -> tuple[float, np.ndarray, float, np.ndarray]:
        """``(q0, q_*, p0, p_*)`` of a phase point."""
        q, p = split(as_state(x))
        dq = q - self.anchor.q
        return float(self.e0 @ dq), self.E.T @ dq, float(self.e0 @ p), self.E.T @ p

    def xstar(self, x) -> np.ndarray:
        _, qs, _, ps = self.coords(x)
        return np.r_[qs, ps]

    def point(self, q0: float, qs, p0: float, ps) -> np.ndarray:
        q = self.anchor.q + q0 * self.e0 + self.E @ np.asarray(qs, dtype=float)
        p = p0 * self.e0 + self.E @ np.asarray(ps, dtype=float)
        return np.r_[q, p]

    def kappa(self, H: Hamiltonian, u: Potential, r: float, y, p0_seed: float | None = None,
              tol: Tolerances = DEFAULT) -> float:
        """Solve ``(H + u)(r, q_*, -kappa, p_*) = 0`` for kappa by Newton in p0."""
        d = self.n - 1
        y = np.asarray(y, dtype=float)
        qs, ps = y[:d], y[d:]
        p0 = self.anchor.p @ self.e0 if p0_seed is None else float(p0_seed)
        for _ in range(tol.newton_maxiter):
            x = self.point(r, qs, p0, ps)
            q, p = split(x)
            val = H.value(q, p) + u.value(q)
            h = float(self.e0 @ H.grad(q, p)[1])
            if abs(h) < tol.velocity_floor:
                raise SectionInvalidError(f"graph condition fails: dH/dp0 = {h:.2e}")
            step = val / h
            p0 -= step
            if abs(step) <= 1e-15 * max(1.0, abs(p0)) or abs(val) <= 1e-15:
                break
        x = self.point(r, qs, p0, ps)
        res = abs(H.value(*split(x)) + u.value(split(x)[0]))
        if res > 1e-10:
            raise ConvergenceError(f"kappa solve residual {res:.2e}")
        return -p0


def build_section(H: Hamiltonian, u: Potential, anchor, tol: Tolerances = DEFAULT) -> SectionFrame:
    x = as_state(anchor)
    q, p = split(x)
    qdot = H.grad(q, p)[1]
    speed = float(np.linalg.norm(qdot))
    if speed < tol.velocity_floor:
        raise SectionInvalidError(f"anchor is on the critical graph (|qdot| = {speed:.2e})")
    e0 = qdot / speed
    n = q.size
    # complete e0 to an orthonormal basis; fix signs for reproducibility
    Q, _ = np.linalg.qr(np.column_stack([e0, np.eye(n)]))
    if Q[:, 0] @ e0 < 0:
        Q[:, 0] *= -1
    E = Q[:, 1:n]
    for k in range(E.shape[1]):
        j = np.argmax(np.abs(E[:, k]))
        if E[j, k] < 0:
            E[:, k] *= -1
    return SectionFrame(PhasePoint(q, p), e0, E)


@dataclass(frozen=True)
class SectionBlocks:
    h: float  # dH/dp0 = 1 / tau'
    S: np.ndarray
    L: np.ndarray
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    Hpp_star: np.ndarray
    kappa_y: np.ndarray


def section_blocks(H: Hamiltonian, u: Potential, frame: SectionFrame, x) -> SectionBlocks:
    """Hamiltonian blocks of the reduced equation at x, in t-time."""
    x = as_state(x)
    n = frame.n
    d = n - 1
    T = np.zeros((2 * n, 2 * n))
    T[:n, :n] = frame.O
    T[n:, n:] = frame.O
    g_full = T.T @ total_grad(H, u, x)
    Hf = T.T @ total_hess(H, u, x) @ T
    yi = np.r_[np.arange(1, n), np.arange(n + 1, 2 * n)]
    h = float(g_full[n])
    if abs(h) < 1e-12:
        raise SectionInvalidError("graph condition fails on the section")
    ky = g_full[yi] / h
    K = Hf[np.ix_(yi, yi)]
    c = Hf[yi, n]
    S = K - np.outer(c, ky) - np.outer(ky, c) + Hf[n, n] * np.outer(ky, ky)
    S = 0.5 * (S + S.T)
    L = J_std(d) @ S
    return SectionBlocks(h, S, L, S[:d, :d], S[d:, d:], S[:d, d:],
                         Hf[np.ix_(np.arange(n + 1, 2 * n), np.arange(n + 1, 2 * n))], ky)


def section_lift_basis(H: Hamiltonian, u: Potential, frame: SectionFrame, x) -> np.ndarray:
    """Full-space vectors for ``x_*`` coordinates on the section through x."""
    x = as_state(x)
    n = frame.n
    d = n - 1
    T = np.zeros((2 * n, 2 * n))
    T[:n, :n] = frame.O
    T[n:, n:] = frame.O
    g = T.T @ total_grad(H, u, x)
    yi = np.r_[np.arange(1, n), np.arange(n + 1, 2 * n)]
    h = g[n]
    cols = np.zeros((2 * n, 2 * d))
    for k in range(2 * d):
        v = np.zeros(2 * n)
        v[yi[k]] = 1.0
        v[n] = -g[yi[k]] / h
        cols[:, k] = T @ v
    return cols


# ---------------------------------------------------------------------------
# linearization along an orbit


class OrbitLinearization:
    """Flow derivative along a periodic orbit, available at any pair of times."""

    def __init__(self, orbit: PeriodicOrbit, tol: Tolerances = DEFAULT):
        self.orbit = orbit
        self.H, self.u, self.T = orbit.H, orbit.u, orbit.period
        self.tol = tol
        self.seg, self.M = variational_flow(self.H, self.u, orbit.base_point.x, self.T, tol)

    def state(self, t: float) -> np.ndarray:
        return self.seg(float(np.mod(t, self.T)))

    def _Phi(self, t: float) -> np.ndarray:
        k = int(np.floor(t / self.T))
        tau = t - k * self.T
        P = self.seg.jacobian(tau)
        if k >= 0:
            return P @ np.linalg.matrix_power(self.M, k)
        return P @ np.linalg.matrix_power(np.linalg.inv(self.M), -k)

    def D(self, s: float, t: float) -> np.ndarray:
        """Derivative of the time-(t - s) map at theta(s)."""
        return self._Phi(t) @ np.linalg.inv(self._Phi(s))

    def W(self, t: float) -> np.ndarray:
        return quotient_basis(self.H, self.u, self.state(t))

    def reduced_flow(self, s: float, t: float) -> np.ndarray:
        return reduce_linear(self.D(s, t), self.W(s), self.W(t))


def reduced_return_map(H: Hamiltonian, u: Potential, orbit: PeriodicOrbit, anchor_t: float = 0.0,
                       lin: OrbitLinearization | None = None,
                       tol: Tolerances = DEFAULT) -> np.ndarray:
    """Restricted linearized return map at ``theta(anchor_t)`` in a quotient basis.

    The full monodromy is projected onto the reduced space; since the
    projection is exact on ker dH, no splitting at turning points is needed.
    """
    lin = lin or OrbitLinearization(orbit, tol)
    return lin.reduced_flow(anchor_t, anchor_t + orbit.period)


# ---------------------------------------------------------------------------
# transition maps between sections


@dataclass(frozen=True)
class TransitionMap:
    from_r: float
    to_r: float
    matrix: np.ndarray
    r_samples: np.ndarray
    t_samples: np.ndarray
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    Hpp_star: np.ndarray
    frame: SectionFrame = field(repr=False)
    t_from: float = 0.0
    t_to: float = 0.0


def _time_of_r(state, frame: SectionFrame, t_anchor: float, r: float, H, span: float,
               n_check: int = 64) -> float:
    """Time near t_anchor where the orbit crosses ``{q0 = r}`` on the monotone branch."""
    if r == 0.0:
        return t_anchor
    rr = lambda t: frame.r(split(state(t))[0]) - r  # noqa: E731
    direction = 1.0 if r > 0 else -1.0
    step = span / n_check
    t_prev = t_anchor
    for k in range(1, n_check + 1):
        t = t_anchor + direction * k * step
        qd = frame.e0 @ H.grad(*split(state(t)))[1]
        if qd <= 0:
            raise ReparametrizationError(f"q0 is not monotone before reaching r={r} (t={t:.6g})")
        if np.sign(rr(t)) != np.sign(rr(t_prev)) or rr(t) == 0:
            return brentq(rr, min(t_prev, t), max(t_prev, t), xtol=1e-15, rtol=1e-15, maxiter=200)
        t_prev = t
    raise ReparametrizationError(f"section r={r} not reached within the scan window")


def transition_map(H: Hamiltonian, u: Potential, orbit: PeriodicOrbit, from_r: float, to_r: float,
                   t_anchor: float = 0.0, frame: SectionFrame | None = None, n_samples: int = 41,
                   tol: Tolerances = DEFAULT, span: float | None = None) -> TransitionMap:
    """Integrate the reduced linear equation between two sections of one frame."""
    state = orbit.state
    frame = frame or build_section(H, u, state(t_anchor), tol)
    span = span if span is not None else orbit.period / 2
    t0 = _time_of_r(state, frame, t_anchor, from_r, H, span)
    t1 = _time_of_r(state, frame, t_anchor, to_r, H, span)
    d = frame.n - 1
    if t0 == t1:
        M = np.eye(2 * d)
        ts = np.array([t0])
    else:
        def rhs(t, y):
            L = section_blocks(H, u, frame, state(t)).L
            return (L @ y.reshape(2 * d, 2 * d)).ravel()

        sol = solve_ivp(rhs, (t0, t1), np.eye(2 * d).ravel(), method="DOP853",
                        rtol=tol.rtol, atol=tol.atol)
        if sol.status != 0:
            raise ConvergenceError(f"transition integration failed: {sol.message}")
        M = sol.y[:, -1].reshape(2 * d, 2 * d)
        ts = np.linspace(t0, t1, n_samples)
    blocks = [section_blocks(H, u, frame, state(t)) for t in ts]
    rs = np.array([frame.r(split(state(t))[0]) for t in ts])
    return TransitionMap(from_r, to_r, M, rs, ts,
                         np.array([b.A for b in blocks]), np.array([b.B for b in blocks]),
                         np.array([b.C for b in blocks]), np.array([b.Hpp_star for b in blocks]),
                         frame, t0, t1)


def transition_map_from_variational(lin: OrbitLinearization, frame: SectionFrame, t0: float,
                                    t1: float) -> np.ndarray:
    """Same map obtained by reducing the full flow derivative with section-lift bases."""
    H, u = lin.H, lin.u
    W0 = section_lift_basis(H, u, frame, lin.state(t0))
    W1 = section_lift_basis(H, u, frame, lin.state(t1))
    return reduce_linear(lin.D(t0, t1), W0, W1)


# ---------------------------------------------------------------------------
# reduced symmetry


def symmetry_derivative(H: Hamiltonian, u: Potential, x, tol: Tolerances = DEFAULT) -> np.ndarray:
    """d(symmetry) at x: closed form on the critical graph, finite differences elsewhere."""
    x = as_state(x)
    q, p = split(x)
    if np.linalg.norm(H.grad(q, p)[1]) <= tol.gamma_tol:
        return symmetry_jacobian_on_gamma(H, u, q, tol)
    return symmetry_jacobian(H, u, x, tol=tol)


def reduced_symmetry_quotient(lin: OrbitLinearization, t: float) -> np.ndarray:
    """Reduction of d(symmetry) at theta(t) in quotient bases (to the image point)."""
    H, u = lin.H, lin.u
    x = lin.state(t)
    img = apply_symmetry(H, u, x, lin.tol).image.x
    return reduce_linear(symmetry_derivative(H, u, x, lin.tol), quotient_basis(H, u, x),
                         quotient_basis(H, u, img))


@dataclass(frozen=True)
class ReducedSymmetry:
    matrix: np.ndarray  # block formula
    matrix_fd: np.ndarray  # reduction of the finite-difference symmetry Jacobian
    discrepancy: float
    scale: float
    tau_ratio: float  # tau' / tau~'


def _ensure_on_orbit(orbit: PeriodicOrbit, y: np.ndarray, tol_dist: float = 1e-6) -> float:
    """Time at which the orbit passes through y, or NotTwoWayError."""
    T = orbit.period
    ts = np.linspace(0, T, 2001)
    X = orbit.segment(ts).T
    k = int(np.argmin(np.linalg.norm(X - y, axis=1)))
    t = ts[k]
    for _ in range(30):  # minimize |theta(t) - y|^2 by Newton
        x = orbit.state(t)
        f = vector_field(orbit.H, orbit.u, x)
        step = (x - y) @ f / (f @ f)
        t -= step
        if abs(step) < 1e-14 * T:
            break
    dist = float(np.linalg.norm(orbit.state(t) - y))
    if dist > tol_dist:
        raise NotTwoWayError(f"symmetric point is {dist:.2e} away from the orbit")
    return float(np.mod(t, T))


def reduced_symmetry(H: Hamiltonian, u: Potential, orbit: PeriodicOrbit, t: float,
                     frame: SectionFrame | None = None, tol: Tolerances = DEFAULT) -> ReducedSymmetry:
    """Reduced symmetry at theta(t) in section coordinates of ``frame``.

    Built from the blocks of both branches and cross-checked against the
    reduction of the finite-difference Jacobian of the symmetry.
    """
    x = orbit.state(t)
    frame = frame or build_section(H, u, x, tol)
    res = apply_symmetry(H, u, x, tol)
    xt = res.image.x
    _ensure_on_orbit(orbit, xt)
    b = section_blocks(H, u, frame, x)
    bt = section_blocks(H, u, frame, xt)
    tau, taut = 1.0 / b.h, 1.0 / bt.h
    d = frame.n - 1
    lower_left = np.linalg.solve(taut * bt.B, tau * b.C.T - taut * bt.C.T)
    lower_right = (tau / taut) * np.linalg.solve(bt.B, b.B)
    R = np.block([[np.eye(d), np.zeros((d, d))], [lower_left, lower_right]])
    D = symmetry_jacobian(H, u, x, tol=tol)
    R_fd = reduce_linear(D, section_lift_basis(H, u, frame, x), section_lift_basis(H, u, frame, xt))
    return ReducedSymmetry(R, R_fd, float(np.max(np.abs(R - R_fd))), res.scale, tau / taut)


# ---------------------------------------------------------------------------
# reversibility


@dataclass(frozen=True)
class PointVerdict:
    t: float
    scale: float
    residuals: tuple[float, float, float]
    tolerances: tuple[float, float, float]

    @property
    def verdicts(self) -> tuple[bool, bool, bool]:
        return tuple(r <= tl for r, tl in zip(self.residuals, self.tolerances))

    @property
    def reversible(self) -> bool:
        return all(self.verdicts)


def _sigma_of(orbit, tol, sigma):
    if sigma is not None:
        return sigma
    from .orbits import time_symmetry_sigma

    cls = classify_orbit(orbit, tol)
    if cls.kind is not OrbitKind.ROUND_TRIP:
        raise NotTwoWayError(f"orbit is {cls.kind.value}; two-way structure unavailable")
    return time_symmetry_sigma(orbit, tol, cls.degenerate_times)


def check_reversible_point(H: Hamiltonian, u: Potential, orbit: PeriodicOrbit, t: float,
                           sigma: TimeSymmetry | None = None, lin: OrbitLinearization | None = None,
                           h: float | None = None, tol: Tolerances = DEFAULT,
                           thresholds: tuple[float, float, float] = (1e-5, 1e-5, 1e-5)) -> PointVerdict:
    """The three pointwise conditions, as residuals.

    1. ``|d/dt scale(theta(t))|``;
    2. ``|R^T J R + scale J|`` for the reduced symmetry R;
    3. operator 2-norm of the t-derivative of
       ``R_{S theta} o Phi~_{sigma(t)}^{sigma(t0)} o R_{theta(t)} o Phi_{t0}^t`` at t0.
    """
    sigma = _sigma_of(orbit, tol, sigma)
    lin = lin or OrbitLinearization(orbit, tol)
    T = orbit.period
    h = h if h is not None else 1e-4 * T
    x = orbit.state(t)
    if np.linalg.norm(H.grad(*split(x))[1]) <= tol.gamma_tol:
        raise NotTwoWayError("point lies on the critical graph")
    sc = lambda s: apply_symmetry(H, u, orbit.state(s), tol).scale  # noqa: E731
    r1 = abs(sc(t + h) - sc(t - h)) / (2 * h)
    scale = sc(t)
    R = reduced_symmetry_quotient(lin, t)
    d = R.shape[0] // 2
    Jd = J_std(d)
    r2 = float(np.max(np.abs(R.T @ Jd @ R + scale * Jd)))
    st = float(sigma(t))
    Rimg = reduced_symmetry_quotient(lin, st)

    def F(s):
        ss = float(sigma(s))
        # sigma(s) is taken on the branch continuous with sigma(t)
        ss = st + ((ss - st + T / 2) % T - T / 2)
        return Rimg @ lin.reduced_flow(ss, st) @ reduced_symmetry_quotient(lin, s) @ lin.reduced_flow(t, s)

    dF = richardson_central(lambda e: F(t + e), [h, h / 2]).value
    r3 = float(np.linalg.norm(dF, 2))
    return PointVerdict(float(t), scale, (r1, r2, r3), thresholds)


def cocycle(lin: OrbitLinearization, sigma: TimeSymmetry, s: float, t: float, base: float) -> np.ndarray:
    """``L_s^t = Phi_s^b R_{sigma(s)} Phi_{sigma(t)}^{sigma(s)} R_t Phi_b^t`` at base time b."""
    T = lin.T

    def branch(v, ref):
        return ref + ((v - ref + T / 2) % T - T / 2)

    sb = float(sigma(base))
    ss = branch(float(sigma(s)), sb)
    stt = branch(float(sigma(t)), sb)
    return (lin.reduced_flow(s, base) @ reduced_symmetry_quotient(lin, ss)
            @ lin.reduced_flow(stt, ss) @ reduced_symmetry_quotient(lin, t)
            @ lin.reduced_flow(base, t))


@dataclass(frozen=True)
class OrbitVerdict:
    nu0: float
    nu1: float
    period: float
    identity_residual: float
    antisymplectic_residuals: tuple[float, float]
    half_period_offset: float
    reversible_structure_residual: float  # |(R0 M)^2 - I|
    tolerance: float
    return_map: np.ndarray = field(repr=False)
    R0: np.ndarray = field(repr=False)
    R1: np.ndarray = field(repr=False)

    @property
    def reversible(self) -> bool:
        return (self.identity_residual <= self.tolerance
                and max(self.antisymplectic_residuals) <= self.tolerance)


def turning_point_symmetry(lin: OrbitLinearization, t: float) -> np.ndarray:
    """Reduced symmetry at a turning point from the closed-form Jacobian."""
    x = lin.state(t)
    q, _ = split(x)
    D = symmetry_jacobian_on_gamma(lin.H, lin.u, q, lin.tol)
    W = quotient_basis(lin.H, lin.u, x)
    return reduce_linear(D, W, W)


def check_reversible_orbit(H: Hamiltonian, u: Potential, orbit: PeriodicOrbit,
                           degenerate_times: Sequence[float] | None = None,
                           lin: OrbitLinearization | None = None, tol: Tolerances = DEFAULT,
                           threshold: float = 1e-5) -> OrbitVerdict:
    """Reversibility identity and turning-point antisymplecticity for a round trip."""
    if degenerate_times is None:
        cls = classify_orbit(orbit, tol)
        if cls.kind is not OrbitKind.ROUND_TRIP:
            raise NotTwoWayError(f"orbit is {cls.kind.value}, not a round trip")
        degenerate_times = cls.degenerate_times
    nu0, nu1 = sorted(float(v) for v in degenerate_times)
    lin = lin or OrbitLinearization(orbit, tol)
    T = orbit.period
    R0 = turning_point_symmetry(lin, nu0)
    R1 = turning_point_symmetry(lin, nu1)
    P01 = lin.reduced_flow(nu0, nu1)
    P10 = lin.reduced_flow(nu1, nu0 + T)
    prod = R0 @ P10 @ R1 @ P01
    d = R0.shape[0] // 2
    Jd = J_std(d)
    I = np.eye(2 * d)
    anti = (float(np.max(np.abs(R0.T @ Jd @ R0 + Jd))), float(np.max(np.abs(R1.T @ Jd @ R1 + Jd))))
    M = P10 @ P01
    rev = float(np.max(np.abs((R0 @ M) @ (R0 @ M) - I)))
    return OrbitVerdict(nu0, nu1, T, float(np.max(np.abs(prod - I))), anti,
                        float(abs((nu1 - nu0) - T / 2)), rev, threshold, M, R0, R1)


# ---------------------------------------------------------------------------
# derivative of section traces in the potential


@dataclass(frozen=True)
class SectionDerivative:
    s: np.ndarray
    y_ode: np.ndarray
    y_fd: np.ndarray
    ytilde_ode: np.ndarray
    ytilde_fd: np.ndarray
    discrepancy: float
    fd_error_estimate: float
    converged: bool


def _time_past_sections(H, u, frame: SectionFrame, x0, s_values, direction, tol, horizon):
    """Unforced time at which ``q0`` passes slightly beyond the farthest section."""
    n = frame.n
    s_far = float(np.max(s_values))
    margin = 0.05 * max(s_far, 1e-2)

    def past(t, x):
        return frame.r(x[:n]) - (s_far + margin)

    past.terminal = True
    sol = solve_ivp(lambda t, x: vector_field(H, u, x), (0.0, direction * horizon), as_state(x0),
                    method="DOP853", rtol=tol.rtol, atol=tol.atol, events=past)
    if sol.t_events[0].size:
        return abs(float(sol.t_events[0][0]))
    return horizon


def _section_trace(H, u, frame: SectionFrame, x0, s_values, direction: float, tol: Tolerances,
                   horizon: float) -> np.ndarray:
    """x_* coordinates where the orbit of x0 meets each ``{q0 = s}``."""
    T_end = direction * _time_past_sections(H, u, frame, x0, s_values, direction, tol, horizon)
    seg = flow(H, u, x0, T_end, tol)
    out = []
    ts = np.linspace(0, T_end, 400)
    rs = np.array([frame.r(split(seg(t))[0]) for t in ts])
    for s in s_values:
        if s == 0.0 and abs(rs[0]) < 1e-15:
            out.append(frame.xstar(seg(0.0)))
            continue
        k = np.where(np.sign(rs[:-1] - s) != np.sign(rs[1:] - s))[0]
        if k.size == 0:
            raise ReparametrizationError(f"section q0={s} not reached")
        i = k[0]
        a, b = sorted((ts[i], ts[i + 1]))
        t = brentq(lambda tt: frame.r(split(seg(tt))[0]) - s, a, b, xtol=1e-15, rtol=1e-15)
        out.append(frame.xstar(seg(t)))
    return np.array(out)


def _forced_reduced(H, u, v, frame, x0, s_values, direction, tol, horizon):
    """Solve ``y' = L y + b`` in t along the orbit of x0, sampled at the sections."""
    n = frame.n
    d = n - 1

    def rhs(t, z):
        x = z[:2 * n]
        y = z[2 * n:]
        q, _ = split(x)
        L = section_blocks(H, u, frame, x).L
        b = np.r_[np.zeros(d), -(frame.E.T @ v.grad(q))]
        return np.r_[vector_field(H, u, x), L @ y + b]

    t_end = direction * _time_past_sections(H, u, frame, x0, s_values, direction, tol, horizon)
    sol = solve_ivp(rhs, (0.0, t_end), np.r_[as_state(x0), np.zeros(2 * d)],
                    method="DOP853", rtol=tol.rtol, atol=tol.atol, dense_output=True)
    out = []
    ts = np.linspace(0, t_end, 400)
    zs = sol.sol(ts)
    rs = np.array([frame.r(z[:n]) for z in zs.T])
    for s in s_values:
        if s == 0.0:
            out.append(np.zeros(2 * d))
            continue
        k = np.where(np.sign(rs[:-1] - s) != np.sign(rs[1:] - s))[0]
        if k.size == 0:
            raise ReparametrizationError(f"section q0={s} not reached")
        i = k[0]
        a, b = sorted((ts[i], ts[i + 1]))
        t = brentq(lambda tt: frame.r(sol.sol(tt)[:n]) - s, a, b, xtol=1e-15, rtol=1e-15)
        out.append(sol.sol(t)[2 * n:])
    return np.array(out)


def potential_derivative_in_section(H: Hamiltonian, u: Potential, v: Potential,
                                    orbit: PeriodicOrbit, s_values: Sequence[float],
                                    t_anchor: float, frame: SectionFrame | None = None,
                                    eps_list: Sequence[float] = (1e-3, 5e-4, 2.5e-4),
                                    horizon: float | None = None,
                                    tol: Tolerances = DEFAULT) -> SectionDerivative:
    """Derivative in the potential of the section traces, by ODE and by finite differences.

    ``v`` is expected to vanish on the projected orbit arc through the
    sections.  ``y`` follows the orbit of ``theta(t_anchor)``; ``ytilde``
    follows the orbit of its symmetric image (backwards in time when that
    branch moves against ``e0``).
    """
    x0 = orbit.state(t_anchor)
    frame = frame or build_section(H, u, x0, tol)
    s_values = np.asarray(s_values, dtype=float)
    horizon = horizon if horizon is not None else orbit.period / 4
    xt0 = apply_symmetry(H, u, x0, tol).image.x
    dirt = 1.0 if frame.e0 @ H.grad(*split(xt0))[1] > 0 else -1.0
    y_ode = _forced_reduced(H, u, v, frame, x0, s_values, 1.0, tol, horizon)
    yt_ode = _forced_reduced(H, u, v, frame, xt0, s_values, dirt, tol, horizon)
    fd = richardson_central(
        lambda e: _section_trace(H, u.plus(v, e), frame, x0, s_values, 1.0, tol, horizon), eps_list)
    fdt = richardson_central(
        lambda e: _section_trace(H, u.plus(v, e), frame, xt0, s_values, dirt, tol, horizon), eps_list)
    disc = float(max(np.max(np.abs(y_ode - fd.value)), np.max(np.abs(yt_ode - fdt.value))))
    return SectionDerivative(s_values, y_ode, fd.value, yt_ode, fdt.value, disc,
                             max(fd.error_estimate, fdt.error_estimate), fd.converged and fdt.converged)
