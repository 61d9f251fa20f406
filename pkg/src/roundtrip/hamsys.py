"""Convex Hamiltonians on flat phase space, their flows and variational flows.

States are flat arrays ``x = (q, p)`` of length 2n.  A Hamiltonian is always
used together with an additive potential ``u(q)``; the dynamics is that of
``H + u``.  Oracles return analytic derivatives; finite differences appear only
in cross-checks.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .config import DEFAULT, Tolerances
from .errors import BlowUpError, ConvexityError, EvaluationError, NumericalError


# ---------------------------------------------------------------------------
# phase points


@dataclass(frozen=True)
class PhasePoint:
    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        q = np.atleast_1d(np.asarray(self.q, dtype=float))
        p = np.atleast_1d(np.asarray(self.p, dtype=float))
        if q.shape != p.shape or q.ndim != 1:
            raise ValueError("q and p must be vectors of equal length")
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
            raise ValueError("phase point has non-finite entries")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)

    @property
    def x(self) -> np.ndarray:
        return np.r_[self.q, self.p]

    @classmethod
    def from_state(cls, x) -> "PhasePoint":
        x = np.asarray(x, dtype=float)
        n = x.size // 2
        return cls(x[:n], x[n:])


def as_state(x) -> np.ndarray:
    if isinstance(x, PhasePoint):
        return x.x
    return np.asarray(x, dtype=float).ravel()


def split(x) -> tuple[np.ndarray, np.ndarray]:
    x = as_state(x)
    n = x.size // 2
    return x[:n], x[n:]


def Jn(n: int) -> np.ndarray:
    I = np.eye(n)
    Z = np.zeros((n, n))
    return np.block([[Z, I], [-I, Z]])


# ---------------------------------------------------------------------------
# potentials


class Potential:
    """A function of q only, lifted to phase space."""

    n: int

    def value(self, q) -> float:
        raise NotImplementedError

    def grad(self, q) -> np.ndarray:
        raise NotImplementedError

    def hess(self, q) -> np.ndarray:
        raise NotImplementedError

    def plus(self, other: "Potential", eps: float = 1.0) -> "Potential":
        if eps == 0.0:
            return self
        return SumPotential([self, ScaledPotential(other, eps)])

    def __add__(self, other: "Potential") -> "Potential":
        return SumPotential([self, other])

    def __mul__(self, c: float) -> "Potential":
        return ScaledPotential(self, float(c))

    __rmul__ = __mul__

    def __neg__(self) -> "Potential":
        return ScaledPotential(self, -1.0)


class ZeroPotential(Potential):
    def __init__(self, n: int):
        self.n = n

    def value(self, q):
        return 0.0

    def grad(self, q):
        return np.zeros(self.n)

    def hess(self, q):
        return np.zeros((self.n, self.n))

    def __repr__(self):
        return f"ZeroPotential(n={self.n})"


class SumPotential(Potential):
    def __init__(self, terms: Sequence[Potential]):
        self.terms = list(terms)
        self.n = self.terms[0].n

    def value(self, q):
        return sum(t.value(q) for t in self.terms)

    def grad(self, q):
        return sum(t.grad(q) for t in self.terms)

    def hess(self, q):
        return sum(t.hess(q) for t in self.terms)


class ScaledPotential(Potential):
    def __init__(self, base: Potential, c: float):
        self.base, self.c, self.n = base, c, base.n

    def value(self, q):
        return self.c * self.base.value(q)

    def grad(self, q):
        return self.c * self.base.grad(q)

    def hess(self, q):
        return self.c * self.base.hess(q)


class CallablePotential(Potential):
    def __init__(self, n: int, value: Callable, grad: Callable, hess: Callable):
        self.n = n
        self._v, self._g, self._h = value, grad, hess

    def value(self, q):
        return float(self._v(np.asarray(q, dtype=float)))

    def grad(self, q):
        return np.asarray(self._g(np.asarray(q, dtype=float)), dtype=float)

    def hess(self, q):
        return np.asarray(self._h(np.asarray(q, dtype=float)), dtype=float)


class QuadraticPotential(Potential):
    """``1/2 (q - c)^T K (q - c) + offset``."""

    def __init__(self, K, center=None, offset: float = 0.0):
        K = np.atleast_2d(np.asarray(K, dtype=float))
        self.K = (K + K.T) / 2
        self.n = self.K.shape[0]
        self.center = np.zeros(self.n) if center is None else np.asarray(center, dtype=float)
        self.offset = float(offset)

    def value(self, q):
        dq = np.asarray(q) - self.center
        return 0.5 * dq @ self.K @ dq + self.offset

    def grad(self, q):
        return self.K @ (np.asarray(q) - self.center)

    def hess(self, q):
        return self.K.copy()


class DoubleWellPotential(Potential):
    """``(q1^2 - 1)^2 + omega^2 q2^2 / 2 + coupling q1^2 q2^2``."""

    n = 2

    def __init__(self, omega: float = 1.3, coupling: float = 0.4):
        self.omega = float(omega)
        self.coupling = float(coupling)

    def value(self, q):
        a, b = q
        return (a * a - 1) ** 2 + 0.5 * self.omega**2 * b * b + self.coupling * a * a * b * b

    def grad(self, q):
        a, b = q
        e = self.coupling
        return np.array([4 * a * (a * a - 1) + 2 * e * a * b * b,
                         self.omega**2 * b + 2 * e * a * a * b])

    def hess(self, q):
        a, b = q
        e = self.coupling
        return np.array([[12 * a * a - 4 + 2 * e * b * b, 4 * e * a * b],
                         [4 * e * a * b, self.omega**2 + 2 * e * a * a]])


class PendulumPotential(Potential):
    """``-cos q`` on the circle."""

    n = 1

    def value(self, q):
        return -np.cos(q[0])

    def grad(self, q):
        return np.array([np.sin(q[0])])

    def hess(self, q):
        return np.array([[np.cos(q[0])]])


class GaussianBump(Potential):
    """``amplitude * exp(-|q - c|^2 / width^2)``."""

    def __init__(self, center, width: float, amplitude: float):
        self.center = np.asarray(center, dtype=float)
        self.n = self.center.size
        self.width = float(width)
        self.amplitude = float(amplitude)

    def value(self, q):
        r = np.asarray(q) - self.center
        return self.amplitude * np.exp(-(r @ r) / self.width**2)

    def grad(self, q):
        r = np.asarray(q) - self.center
        return -2.0 / self.width**2 * r * self.value(q)

    def hess(self, q):
        r = np.asarray(q) - self.center
        w2 = self.width**2
        return self.value(q) * (4.0 / w2**2 * np.outer(r, r) - 2.0 / w2 * np.eye(self.n))


def _smooth_bump(z):
    """exp(1 - 1/(1 - z^2)) on |z| < 1 with its first two derivatives."""
    if abs(z) >= 1.0:
        return 0.0, 0.0, 0.0
    w = 1.0 - z * z
    f = np.exp(1.0 - 1.0 / w)
    g = -2.0 * z / w**2  # d/dz of (1 - 1/w)
    dg = -2.0 / w**2 - 8.0 * z * z / w**3
    return f, f * g, f * (g * g + dg)


class CompactBump(Potential):
    """C-infinity bump supported in the ball of the given radius."""

    def __init__(self, center, radius: float, amplitude: float):
        self.center = np.asarray(center, dtype=float)
        self.n = self.center.size
        self.radius = float(radius)
        self.amplitude = float(amplitude)

    def _parts(self, q):
        r = np.asarray(q, dtype=float) - self.center
        rho = np.sqrt(r @ r) / self.radius
        # bump in rho^2 keeps the profile smooth at the centre
        s = rho * rho
        if s >= 1.0:
            return r, 0.0, 0.0, 0.0
        w = 1.0 - s
        f = np.exp(1.0 - 1.0 / w)
        df = -f / w**2  # d f / d s
        d2f = f / w**4 - 2.0 * f / w**3
        return r, f, df, d2f

    def value(self, q):
        _, f, _, _ = self._parts(q)
        return self.amplitude * f

    def grad(self, q):
        r, _, df, _ = self._parts(q)
        return self.amplitude * df * 2.0 * r / self.radius**2

    def hess(self, q):
        r, _, df, d2f = self._parts(q)
        R2 = self.radius**2
        return self.amplitude * (d2f * 4.0 * np.outer(r, r) / R2**2 + df * 2.0 / R2 * np.eye(self.n))


class NormalSlopeBump(Potential):
    """Potential vanishing on a line but with a prescribed normal slope.

    ``v(q) = amplitude * <normal, q - origin> * bump((<direction, q - origin> - center) / half_width)``

    so ``v = 0`` on the line ``origin + s * direction`` and
    ``d v / d normal = amplitude * bump(...)`` there.
    """

    def __init__(self, origin, direction, normal, center: float, half_width: float,
                 amplitude: float):
        self.origin = np.asarray(origin, dtype=float)
        self.n = self.origin.size
        self.direction = np.asarray(direction, dtype=float)
        self.normal = np.asarray(normal, dtype=float)
        self.center = float(center)
        self.half_width = float(half_width)
        self.amplitude = float(amplitude)

    def _parts(self, q):
        r = np.asarray(q, dtype=float) - self.origin
        along = self.direction @ r
        across = self.normal @ r
        f, df, d2f = _smooth_bump((along - self.center) / self.half_width)
        return across, f, df / self.half_width, d2f / self.half_width**2

    def value(self, q):
        across, f, _, _ = self._parts(q)
        return self.amplitude * across * f

    def grad(self, q):
        across, f, df, _ = self._parts(q)
        return self.amplitude * (f * self.normal + across * df * self.direction)

    def hess(self, q):
        across, _, df, d2f = self._parts(q)
        e, nu = self.direction, self.normal
        return self.amplitude * (df * (np.outer(nu, e) + np.outer(e, nu))
                                 + across * d2f * np.outer(e, e))

    def slope(self, s: float) -> float:
        """Normal derivative on the line at parameter s."""
        f, _, _ = _smooth_bump((s - self.center) / self.half_width)
        return self.amplitude * f


# ---------------------------------------------------------------------------
# Hamiltonians


class Hamiltonian:
    """Fiberwise convex Hamiltonian with analytic first and second derivatives.

    Subclasses implement ``_value``, ``_grad`` and ``_hess``; the public methods
    add finiteness and convexity guards.  ``period`` is None on R^n, otherwise a
    length-n array with ``np.inf`` in non-periodic directions.
    """

    n: int
    period: np.ndarray | None = None

    def _value(self, q, p) -> float:
        raise NotImplementedError

    def _grad(self, q, p):
        raise NotImplementedError

    def _hess(self, q, p):
        raise NotImplementedError

    def value(self, q, p) -> float:
        v = float(self._value(q, p))
        if not np.isfinite(v):
            raise EvaluationError(f"H is not finite at q={q}, p={p}")
        return v

    def grad(self, q, p) -> tuple[np.ndarray, np.ndarray]:
        Hq, Hp = self._grad(q, p)
        if not (np.all(np.isfinite(Hq)) and np.all(np.isfinite(Hp))):
            raise EvaluationError(f"grad H is not finite at q={q}, p={p}")
        return np.asarray(Hq, dtype=float), np.asarray(Hp, dtype=float)

    def hess(self, q, p) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return ``(H_qq, H_pq, H_pp)`` with ``H_pq[i, j] = d^2 H / dp_i dq_j``."""
        Hqq, Hpq, Hpp = (np.atleast_2d(np.asarray(X, dtype=float)) for X in self._hess(q, p))
        if not (np.all(np.isfinite(Hqq)) and np.all(np.isfinite(Hpq)) and np.all(np.isfinite(Hpp))):
            raise EvaluationError(f"Hessian of H is not finite at q={q}, p={p}")
        try:
            np.linalg.cholesky(Hpp)
        except np.linalg.LinAlgError:
            raise ConvexityError(f"fiber Hessian not positive definite at q={q}, p={p}") from None
        return Hqq, Hpq, Hpp

    def wrap_delta(self, dq: np.ndarray) -> np.ndarray:
        """Reduce a configuration difference modulo the period box."""
        if self.period is None:
            return dq
        P = self.period
        out = np.array(dq, dtype=float, copy=True)
        per = np.isfinite(P)
        out[..., per] = out[..., per] - P[per] * np.round(out[..., per] / P[per])
        return out


class Mechanical(Hamiltonian):
    """``1/2 p^T G p + V(q) - energy`` with constant SPD G."""

    def __init__(self, V: Potential, inv_mass=None, energy: float = 0.0, period=None):
        self.V = V
        self.n = V.n
        G = np.eye(self.n) if inv_mass is None else np.atleast_2d(np.asarray(inv_mass, dtype=float))
        try:
            np.linalg.cholesky(G)
        except np.linalg.LinAlgError:
            raise ConvexityError("inverse mass matrix is not positive definite") from None
        self.G = G
        self.energy = float(energy)
        self.period = None if period is None else np.asarray(period, dtype=float)

    def _value(self, q, p):
        return 0.5 * p @ self.G @ p + self.V.value(q) - self.energy

    def _grad(self, q, p):
        return self.V.grad(q), self.G @ p

    def _hess(self, q, p):
        return self.V.hess(q), np.zeros((self.n, self.n)), self.G


class Magnetic(Hamiltonian):
    """``1/2 |p - A(q)|^2 + V(q) - energy`` with ``A(q) = beta (-q2, q1)``."""

    n = 2

    def __init__(self, beta: float, V: Potential, energy: float = 0.0):
        self.beta = float(beta)
        self.V = V
        self.energy = float(energy)
        self.dA = self.beta * np.array([[0.0, -1.0], [1.0, 0.0]])

    def A(self, q):
        return self.dA @ np.asarray(q, dtype=float)

    def _value(self, q, p):
        v = p - self.A(q)
        return 0.5 * v @ v + self.V.value(q) - self.energy

    def _grad(self, q, p):
        v = p - self.A(q)
        return -self.dA.T @ v + self.V.grad(q), v

    def _hess(self, q, p):
        return self.dA.T @ self.dA + self.V.hess(q), -self.dA, np.eye(2)


class CoshKinetic(Hamiltonian):
    """``sum_i cosh(p_i) + alpha . p + V(q) - energy``.

    Convex but not reversible when alpha != 0; the fiber minimum sits at
    ``p = arcsinh(-alpha)``.
    """

    def __init__(self, alpha, V: Potential, energy: float = 0.0):
        self.alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
        self.V = V
        self.n = V.n
        if self.alpha.shape != (self.n,):
            raise ValueError("alpha must have length n")
        self.energy = float(energy)

    def _value(self, q, p):
        return float(np.sum(np.cosh(p)) + self.alpha @ p + self.V.value(q) - self.energy)

    def _grad(self, q, p):
        return self.V.grad(q), np.sinh(p) + self.alpha

    def _hess(self, q, p):
        return self.V.hess(q), np.zeros((self.n, self.n)), np.diag(np.cosh(p))


# ---------------------------------------------------------------------------
# evaluation helpers for H + u


def total_energy(H: Hamiltonian, u: Potential, x) -> float:
    q, p = split(x)
    return H.value(q, p) + u.value(q)


def total_grad(H: Hamiltonian, u: Potential, x) -> np.ndarray:
    q, p = split(x)
    Hq, Hp = H.grad(q, p)
    return np.r_[Hq + u.grad(q), Hp]


def total_hess(H: Hamiltonian, u: Potential, x) -> np.ndarray:
    q, p = split(x)
    Hqq, Hpq, Hpp = H.hess(q, p)
    return np.block([[Hqq + u.hess(q), Hpq.T], [Hpq, Hpp]])


def vector_field(H: Hamiltonian, u: Potential, x) -> np.ndarray:
    """``(dH/dp, -dH/dq - grad u)``."""
    q, p = split(x)
    Hq, Hp = H.grad(q, p)
    return np.r_[Hp, -Hq - u.grad(q)]


def field_jacobian(H: Hamiltonian, u: Potential, x) -> np.ndarray:
    n = as_state(x).size // 2
    return Jn(n) @ total_hess(H, u, x)


# ---------------------------------------------------------------------------
# flows


@dataclass(frozen=True)
class OrbitSegment:
    """Densely sampled trajectory of H + u.

    ``jacobian(t)`` is available when the segment comes from
    :func:`variational_flow`.
    """

    times: np.ndarray
    states: np.ndarray
    energy: float
    max_drift: float
    _sol: object = field(default=None, repr=False)
    _n: int = 0
    _with_jacobian: bool = False

    def __post_init__(self):
        for arr in (self.times, self.states):
            arr.setflags(write=False)

    @property
    def n(self) -> int:
        return self._n

    @property
    def t0(self) -> float:
        return float(self.times[0])

    @property
    def t1(self) -> float:
        return float(self.times[-1])

    def _eval(self, t):
        if self._sol is None:
            t_arr = np.asarray(t, dtype=float)
            base = self.states[0] if not self._with_jacobian else np.r_[
                self.states[0], np.eye(2 * self._n).ravel()]
            if t_arr.ndim == 0:
                return base.copy()
            return np.repeat(base[:, None], t_arr.size, axis=1)
        return self._sol(t)

    def __call__(self, t) -> np.ndarray:
        """State at time t (shape (2n,) or (2n, len(t)))."""
        y = self._eval(t)
        return y[: 2 * self._n]

    def q(self, t):
        return self(t)[: self._n]

    def p(self, t):
        return self(t)[self._n: 2 * self._n]

    def jacobian(self, t) -> np.ndarray:
        if not self._with_jacobian:
            raise AttributeError("segment was computed without variational equations")
        y = self._eval(float(t))
        m = 2 * self._n
        return y[m:].reshape(m, m)


def _rhs(H, u):
    def f(t, x):
        return vector_field(H, u, x)
    return f


def _rhs_variational(H, u, n):
    m = 2 * n
    Jm = Jn(n)

    def f(t, y):
        x = y[:m]
        Phi = y[m:].reshape(m, m)
        q, p = x[:n], x[n:]
        Hq, Hp = H.grad(q, p)
        Hqq, Hpq, Hpp = H.hess(q, p)
        hess = np.block([[Hqq + u.hess(q), Hpq.T], [Hpq, Hpp]])
        dx = np.r_[Hp, -Hq - u.grad(q)]
        return np.r_[dx, (Jm @ hess @ Phi).ravel()]
    return f


def _integrate(fun, y0, t, tol: Tolerances, max_step=np.inf):
    sol = solve_ivp(fun, (0.0, t), y0, method="DOP853", dense_output=True,
                    rtol=tol.rtol, atol=tol.atol, max_step=max_step)
    if sol.status != 0 or not np.all(np.isfinite(sol.y)):
        last = float(sol.t[-1]) if sol.t.size else 0.0
        raise BlowUpError(f"integration failed at t={last:.6g}: {sol.message}", last)
    return sol


def _segment(H, u, sol, x0, n, with_jac, tol: Tolerances, t):
    if sol is None:
        times = np.array([0.0])
        states = as_state(x0)[None, :].copy()
    else:
        times = sol.t.copy()
        states = sol.y[: 2 * n].T.copy()
    E = np.array([total_energy(H, u, s) for s in states])
    drift = float(np.max(np.abs(E - E[0])))
    scale = max(1.0, abs(E[0]), max(abs(H.value(*split(s)) - 0.0) for s in states[:1]))
    if drift > tol.energy_drift_tol * scale:
        raise NumericalError(f"energy drift {drift:.3e} exceeds tolerance over t={t}")
    return OrbitSegment(times=times, states=states, energy=float(E[0]), max_drift=drift,
                        _sol=None if sol is None else sol.sol, _n=n, _with_jacobian=with_jac)


def flow(H: Hamiltonian, u: Potential, x0, t: float, tol: Tolerances = DEFAULT,
         max_step: float = np.inf) -> OrbitSegment:
    """Trajectory of H + u from x0 over [0, t] (t may be negative)."""
    x0 = as_state(x0)
    n = x0.size // 2
    if t == 0.0:
        return _segment(H, u, None, x0, n, False, tol, t)
    sol = _integrate(_rhs(H, u), x0, t, tol, max_step)
    seg = _segment(H, u, sol, x0, n, False, tol, t)
    return seg


def variational_flow(H: Hamiltonian, u: Potential, x0, t: float, tol: Tolerances = DEFAULT,
                     max_step: float = np.inf) -> tuple[OrbitSegment, np.ndarray]:
    """Trajectory together with the flow derivative, integrated in one pass."""
    x0 = as_state(x0)
    n = x0.size // 2
    m = 2 * n
    if t == 0.0:
        return _segment(H, u, None, x0, n, True, tol, t), np.eye(m)
    y0 = np.r_[x0, np.eye(m).ravel()]
    sol = _integrate(_rhs_variational(H, u, n), y0, t, tol, max_step)
    seg = _segment(H, u, sol, x0, n, True, tol, t)
    return seg, sol.y[m:, -1].reshape(m, m).copy()


def flow_map(H, u, x0, t, tol: Tolerances = DEFAULT) -> np.ndarray:
    """End point of the flow; cheaper than building a segment."""
    x0 = as_state(x0)
    if t == 0.0:
        return x0.copy()
    sol = solve_ivp(_rhs(H, u), (0.0, t), x0, method="DOP853", rtol=tol.rtol, atol=tol.atol)
    if sol.status != 0 or not np.all(np.isfinite(sol.y)):
        last = float(sol.t[-1]) if sol.t.size else 0.0
        raise BlowUpError(f"integration failed at t={last:.6g}: {sol.message}", last)
    return sol.y[:, -1]


# ---------------------------------------------------------------------------
# dependence on the potential


@dataclass(frozen=True)
class DirectionalDerivative:
    value: np.ndarray
    error_estimate: float
    converged: bool
    estimates: np.ndarray
    warning: str | None = None


def richardson_central(F: Callable[[float], np.ndarray], eps_list: Sequence[float]) -> DirectionalDerivative:
    """Richardson-extrapolated central differences ``(F(e) - F(-e)) / 2e``.

    The error of the central difference is assumed even in e; the table is
    eliminated column by column.  ``converged`` is False when successive
    central differences do not shrink at the expected quadratic rate.
    """
    eps = np.asarray(sorted(eps_list, reverse=True), dtype=float)
    if eps.size < 2:
        raise ValueError("need at least two step sizes")
    D = [np.asarray((F(e) - F(-e)) / (2 * e), dtype=float) for e in eps]
    table = [D]
    for k in range(1, eps.size):
        prev = table[-1]
        nxt = []
        for i in range(len(prev) - 1):
            r = (eps[i] / eps[i + k]) ** (2 * k)
            nxt.append((r * prev[i + 1] - prev[i]) / (r - 1))
        table.append(nxt)
    best = table[-1][0]
    err = float(np.max(np.abs(table[-1][0] - table[-2][-1])))
    diffs = [float(np.max(np.abs(D[i + 1] - D[i]))) for i in range(len(D) - 1)]
    converged = True
    warning = None
    scale = max(1e-14, float(np.max(np.abs(best))))
    if len(diffs) >= 2 and diffs[0] > 1e-12 * scale:
        expected = (eps[1] / eps[0]) ** 2
        ratio = diffs[1] / diffs[0]
        if ratio > 4 * expected and diffs[1] > 1e-10 * scale:
            converged = False
            warning = f"central differences not converging (ratio {ratio:.3g}, expected {expected:.3g})"
    return DirectionalDerivative(value=best, error_estimate=err, converged=converged,
                                 estimates=np.array(D), warning=warning)


def directional_derivative_in_u(H: Hamiltonian, u: Potential, v: Potential, x0, t: float,
                                eps_list: Sequence[float] = (1e-2, 5e-3, 2.5e-3),
                                tol: Tolerances = DEFAULT) -> DirectionalDerivative:
    """Derivative of ``phi(t, x0, u + e v)`` in e at e = 0."""
    x0 = as_state(x0)
    if t == 0.0:
        z = np.zeros_like(x0)
        return DirectionalDerivative(z, 0.0, True, np.zeros((len(eps_list), x0.size)))
    res = richardson_central(lambda e: flow_map(H, u.plus(v, e), x0, t, tol), eps_list)
    if not res.converged:
        warnings.warn(res.warning, RuntimeWarning, stacklevel=2)
    return res


@dataclass(frozen=True)
class ContinuityReport:
    eps: np.ndarray
    displacements: np.ndarray
    fitted_C: float
    fitted_rate: float
    ok: bool
    message: str = ""


def check_parameter_continuity(solve: Callable[[Potential], np.ndarray], u: Potential,
                               v: Potential, eps_values: Sequence[float] = (1e-2, 1e-3, 1e-4),
                               rate_floor: float = 0.8) -> ContinuityReport:
    """Re-solve a nondegenerate problem under ``u + e v`` and measure the drift.

    ``solve`` maps a potential to the solution vector (e.g. a chord or a
    periodic orbit found by Newton).  The displacement is expected to be
    O(e); ``fitted_C = max |x(e) - x(0)| / e`` and ``fitted_rate`` is the
    log-log slope.  Solver failures produce a failing report, not an exception.
    """
    eps = np.asarray(eps_values, dtype=float)
    try:
        x_ref = np.asarray(solve(u), dtype=float)
    except Exception as exc:  # noqa: BLE001 - reported, not raised
        return ContinuityReport(eps, np.full(eps.size, np.nan), np.nan, np.nan, False,
                                f"unperturbed solve failed: {exc}")
    disp = np.empty(eps.size)
    for i, e in enumerate(eps):
        try:
            x = np.asarray(solve(u.plus(v, e)), dtype=float)
        except Exception as exc:  # noqa: BLE001
            disp[i:] = np.nan
            return ContinuityReport(eps, disp, np.nan, np.nan, False,
                                    f"continuation diverged at eps={e:g}: {exc}")
        disp[i] = float(np.linalg.norm(x - x_ref))
    nz = eps > 0
    C = float(np.max(disp[nz] / eps[nz])) if nz.any() else 0.0
    good = nz & (disp > 1e-13)
    if good.sum() >= 2:
        rate = float(np.polyfit(np.log(eps[good]), np.log(disp[good]), 1)[0])
    else:
        rate = np.inf  # displacement below resolution: locally constant
    ok = bool(np.all(np.isfinite(disp)) and rate >= rate_floor)
    msg = "" if ok else f"displacement rate {rate:.3g} below {rate_floor}"
    return ContinuityReport(eps, disp, C, rate, ok, msg)
