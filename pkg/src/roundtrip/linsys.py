"""Forced time-varying Hamiltonian linear systems sharing a forcing channel.

Two systems

    x'  = a(t)  L_t  x + a(t)  b(t)
    x~' = a~(t) L~_t x~ + a~(t) b(t)

are driven by the same forcing ``b`` valued in ``{0} x R^d``.  The module
builds the only block-triangular candidate conjugacy ``R_t`` between them,
evaluates the three structural conditions (constant ratio ``a~/a``,
conformal symplecticity of ``R_t``, conjugacy ODE), compares projections of
forced solutions over bump ensembles and evaluates the ``M_n`` recursion
``M_1 = I, M_{n+1} = M_n' + a M_n L``.

Hamiltonian matrices use the block layout ``[[C^T, B], [-A, -C]]`` of
:func:`roundtrip.sympmat.hamiltonian_block_matrix`.  Curves carry exact
derivatives as jets (lists of derivatives), so ``R_t'`` and the ``M_n`` are
evaluated without numerical differentiation.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from math import comb
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import make_interp_spline

from .config import DEFAULT, Tolerances
from .errors import (CapabilityError, DimensionError, InconsistencyError, InputError,
                     NumericalError)
from .sympmat import J as J_std
from .sympmat import hamiltonian_block_matrix, hamiltonian_blocks, symplectic_residual

# ---------------------------------------------------------------------------
# jets


class Jet:
    """Value and derivatives ``[X, X', ..., X^(k)]`` of a scalar or matrix curve at one time."""

    __slots__ = ("d",)

    def __init__(self, derivs):
        self.d = [np.asarray(x, dtype=float) for x in derivs]

    @classmethod
    def constant(cls, value, order: int) -> "Jet":
        value = np.asarray(value, dtype=float)
        return cls([value] + [np.zeros_like(value)] * order)

    @property
    def order(self) -> int:
        return len(self.d) - 1

    @property
    def value(self) -> np.ndarray:
        return self.d[0]

    def truncate(self, order: int) -> "Jet":
        if order > self.order:
            raise CapabilityError(f"jet of order {self.order} cannot supply order {order}")
        return Jet(self.d[:order + 1])

    def deriv(self) -> "Jet":
        if self.order < 1:
            raise CapabilityError("cannot differentiate an order-0 jet")
        return Jet(self.d[1:])

    @property
    def T(self) -> "Jet":
        return Jet([x.T for x in self.d])

    def _coerce(self, other) -> "Jet":
        return other if isinstance(other, Jet) else Jet.constant(other, self.order)

    def _common(self, other):
        other = self._coerce(other)
        k = min(self.order, other.order)
        return self.d[:k + 1], other.d[:k + 1], k

    def __add__(self, other):
        a, b, _ = self._common(other)
        return Jet([x + y for x, y in zip(a, b)])

    __radd__ = __add__

    def __neg__(self):
        return Jet([-x for x in self.d])

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def _leibniz(self, other, op):
        a, b, k = self._common(other)
        return Jet([sum(comb(n, j) * op(a[j], b[n - j]) for j in range(n + 1)) for n in range(k + 1)])

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return Jet([x * other for x in self.d])
        return self._leibniz(other, lambda x, y: x * y)

    def __rmul__(self, other):
        return self * other

    def __matmul__(self, other):
        return self._leibniz(other, lambda x, y: x @ y)

    def __rmatmul__(self, other):
        return self._coerce(other) @ self

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.reciprocal()
        return Jet([x / other for x in self.d])

    def reciprocal(self) -> "Jet":
        """Jet of ``1 / x`` for a scalar jet."""
        if self.value.ndim:
            raise DimensionError("reciprocal needs a scalar jet; use inv() for matrices")
        y = [1.0 / self.value]
        for n in range(1, self.order + 1):
            acc = sum(comb(n, k) * self.d[k] * y[n - k] for k in range(1, n + 1))
            y.append(-acc / self.value)
        return Jet(y)

    def inv(self) -> "Jet":
        """Jet of the matrix inverse, from ``(X Y)^(n) = 0`` for n >= 1."""
        X0inv = np.linalg.inv(self.value)
        y = [X0inv]
        for n in range(1, self.order + 1):
            acc = sum(comb(n, k) * (self.d[k] @ y[n - k]) for k in range(1, n + 1))
            y.append(-X0inv @ acc)
        return Jet(y)


def block_jet(rows) -> Jet:
    """Assemble a block matrix jet from a nested list of jets of equal order."""
    k = min(b.order for row in rows for b in row)
    return Jet([np.block([[b.d[n] for b in row] for row in rows]) for n in range(k + 1)])


def sub_jet(X: Jet, rows: slice, cols: slice) -> Jet:
    return Jet([x[rows, cols] for x in X.d])


# ---------------------------------------------------------------------------
# curve providers


JetFn = Callable[[float, int], Jet]


@dataclass(frozen=True)
class TrigCurve:
    """``X(t) = X0 + sum_k Ck cos(k w t) + Sk sin(k w t)`` with exact derivatives of any order."""

    X0: np.ndarray
    cos: np.ndarray  # (K, *shape)
    sin: np.ndarray
    omega: float

    def __call__(self, t: float, order: int = 0) -> Jet:
        t = float(t)
        ks = np.arange(1, self.cos.shape[0] + 1, dtype=float)
        ph = ks * self.omega * t
        shape = (-1,) + (1,) * np.ndim(self.X0)
        out = []
        for n in range(order + 1):
            w = (ks * self.omega) ** n
            # n-th derivative of cos and sin is a quarter-turn phase shift
            c = w * np.cos(ph + n * np.pi / 2)
            s = w * np.sin(ph + n * np.pi / 2)
            val = np.sum(c.reshape(shape) * self.cos + s.reshape(shape) * self.sin, axis=0)
            out.append((self.X0 if n == 0 else 0.0) + val)
        return Jet(out)


def random_trig_scalar(rng: np.random.Generator, T: float, modes: int = 2, mean: float = 1.0,
                       amplitude: float = 0.3) -> TrigCurve:
    """Smooth scalar curve whose values stay within ``mean +- amplitude``."""
    c = rng.uniform(-1, 1, modes)
    s = rng.uniform(-1, 1, modes)
    norm = np.sum(np.abs(c) + np.abs(s))
    return TrigCurve(np.asarray(mean, dtype=float), amplitude * c / norm, amplitude * s / norm,
                     2 * np.pi / T)


def random_trig_symmetric(rng: np.random.Generator, d: int, T: float, modes: int = 2,
                          offset: np.ndarray | None = None, amplitude: float = 0.5) -> TrigCurve:
    def sym(M):
        return (M + np.swapaxes(M, -1, -2)) / 2

    X0 = np.zeros((d, d)) if offset is None else np.asarray(offset, dtype=float)
    c = sym(rng.uniform(-amplitude, amplitude, (modes, d, d)))
    s = sym(rng.uniform(-amplitude, amplitude, (modes, d, d)))
    return TrigCurve(X0, c, s, 2 * np.pi / T)


def random_trig_matrix(rng: np.random.Generator, d: int, T: float, modes: int = 2,
                       amplitude: float = 0.5) -> TrigCurve:
    return TrigCurve(rng.uniform(-amplitude, amplitude, (d, d)),
                     rng.uniform(-amplitude, amplitude, (modes, d, d)),
                     rng.uniform(-amplitude, amplitude, (modes, d, d)), 2 * np.pi / T)


def blocks_provider(A: JetFn, B: JetFn, C: JetFn) -> JetFn:
    """Jet provider of ``[[C^T, B], [-A, -C]]`` from block providers."""
    def L(t, order=0):
        a, b, c = A(t, order), B(t, order), C(t, order)
        return block_jet([[c.T, b], [-a, -c]])
    return L


def constant_provider(M) -> JetFn:
    M = np.asarray(M, dtype=float)
    return lambda t, order=0: Jet.constant(M, order)


def sampled_provider(grid: np.ndarray, values: np.ndarray, k: int = 7) -> tuple[JetFn, int]:
    """Spline interpolant of node values; returns the provider and its usable derivative order."""
    spl = make_interp_spline(np.asarray(grid, dtype=float), np.asarray(values, dtype=float), k=k)
    max_order = k - 2
    derivs = [spl] + [spl.derivative(n) for n in range(1, max_order + 1)]

    def f(t, order=0):
        if order > max_order:
            raise CapabilityError(f"sampled curve supplies derivatives up to order {max_order}")
        return Jet([derivs[n](t) for n in range(order + 1)])
    return f, max_order


# ---------------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class HamiltonianCurve:
    """Curve of Hamiltonian 2d x 2d matrices on ``[0, T]``, sampled on a uniform grid."""

    d: int
    T: float
    provider: JetFn = field(repr=False)
    n_grid: int = 201
    max_order: int = 8

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.n_grid)

    def __call__(self, t: float, order: int = 0) -> Jet:
        if order > self.max_order:
            raise CapabilityError(f"curve supplies derivatives up to order {self.max_order}")
        return self.provider(t, order)

    def value(self, t: float) -> np.ndarray:
        return self(t, 0).value

    def values(self) -> np.ndarray:
        return np.array([self.value(t) for t in self.grid])

    def blocks(self, t: float):
        return hamiltonian_blocks(self.value(t))

    def validate(self, tol: float = 1e-9) -> dict:
        """Symmetry of A, B and invertibility of B at every node; returns diagnostics."""
        asym = 0.0
        cond = 0.0
        for t in self.grid:
            L = self.value(t)
            if L.shape != (2 * self.d, 2 * self.d):
                raise DimensionError(f"expected {2 * self.d}x{2 * self.d}, got {L.shape}")
            A, B, _ = hamiltonian_blocks(L)
            asym = max(asym, float(np.max(np.abs(A - A.T))), float(np.max(np.abs(B - B.T))))
            cond = max(cond, float(np.linalg.cond(B)))
        if asym > tol:
            raise InconsistencyError(f"A or B not symmetric (residual {asym:.2e})")
        if not np.isfinite(cond) or cond > 1e12:
            raise NumericalError(f"B not invertible on the grid (condition {cond:.2e})")
        return {"symmetry_residual": asym, "max_cond_B": cond}

    @classmethod
    def from_blocks(cls, A: JetFn, B: JetFn, C: JetFn, d: int, T: float, **kw) -> "HamiltonianCurve":
        return cls(d, T, blocks_provider(A, B, C), **kw)

    @classmethod
    def constant(cls, L, T: float, **kw) -> "HamiltonianCurve":
        L = np.asarray(L, dtype=float)
        return cls(L.shape[0] // 2, T, constant_provider(L), **kw)

    @classmethod
    def random(cls, d: int, T: float, rng: np.random.Generator, modes: int = 2,
               b_floor: float = 1.0, **kw) -> "HamiltonianCurve":
        """Random smooth curve with ``B_t`` positive definite (smallest eigenvalue >= b_floor/2)."""
        A = random_trig_symmetric(rng, d, T, modes)
        # the oscillating part of B has spectral norm at most d * 0.25 * 2 * modes
        B = random_trig_symmetric(rng, d, T, modes, offset=(b_floor + 0.5 * d * modes) * np.eye(d),
                                  amplitude=0.25)
        C = random_trig_matrix(rng, d, T, modes)
        return cls.from_blocks(A, B, C, d, T, **kw)

    @classmethod
    def sampled(cls, values: np.ndarray, T: float, k: int = 7, **kw) -> "HamiltonianCurve":
        values = np.asarray(values, dtype=float)
        grid = np.linspace(0.0, T, values.shape[0])
        f, max_order = sampled_provider(grid, values, k)
        return cls(values.shape[1] // 2, T, f, n_grid=values.shape[0], max_order=max_order)


@dataclass(frozen=True)
class ScalarCurve:
    """Non-vanishing scalar curve with exact derivatives."""

    provider: JetFn = field(repr=False)
    max_order: int = 8

    def __call__(self, t: float, order: int = 0) -> Jet:
        if order > self.max_order:
            raise CapabilityError(f"scalar curve supplies derivatives up to order {self.max_order}")
        return self.provider(t, order)

    def value(self, t: float) -> float:
        return float(self(t, 0).value)

    @classmethod
    def constant(cls, c: float) -> "ScalarCurve":
        return cls(lambda t, order=0: Jet.constant(float(c), order))

    @classmethod
    def affine(cls, c0: float, c1: float) -> "ScalarCurve":
        def f(t, order=0):
            d = [c0 + c1 * t, c1] + [0.0] * max(0, order - 1)
            return Jet(d[:order + 1])
        return cls(f)

    def scaled(self, alpha: float) -> "ScalarCurve":
        return ScalarCurve(lambda t, order=0: self(t, order) * alpha, self.max_order)

    def times(self, other: "ScalarCurve") -> "ScalarCurve":
        return ScalarCurve(lambda t, order=0: self(t, order) * other(t, order),
                           min(self.max_order, other.max_order))


@dataclass(frozen=True)
class ForcingCurve:
    """Smooth bump forcing ``(0, amplitude * direction * bump((t - center) / width))``.

    The bump ``exp(1 - 1 / (1 - s^2))`` has compact support ``|s| < 1``, which
    must lie strictly inside ``(0, T)``.
    """

    d: int
    center: float
    width: float
    direction: np.ndarray
    amplitude: float = 1.0

    def __post_init__(self):
        direction = np.asarray(self.direction, dtype=float)
        if direction.shape != (self.d,):
            raise DimensionError(f"forcing direction must have length {self.d}")
        object.__setattr__(self, "direction", direction)
        if self.width <= 0:
            raise InputError("bump width must be positive")

    @property
    def support(self) -> tuple[float, float]:
        return self.center - self.width, self.center + self.width

    def check_support(self, T: float) -> None:
        lo, hi = self.support
        if not (0.0 < lo and hi < T):
            raise InputError(f"forcing support {self.support} not strictly inside (0, {T})")

    def __call__(self, t: float) -> np.ndarray:
        s = (t - self.center) / self.width
        g = float(np.exp(1.0 - 1.0 / (1.0 - s * s))) if abs(s) < 1 else 0.0
        return np.r_[np.zeros(self.d), self.amplitude * g * self.direction]


def random_bump_ensemble(d: int, T: float, n: int, rng: np.random.Generator,
                         min_width: float = 0.05, max_width: float = 0.25) -> list[ForcingCurve]:
    """Bumps with random center, width (fraction of T) and unit direction."""
    out = []
    for _ in range(n):
        w = rng.uniform(min_width, max_width) * T
        c = rng.uniform(w * 1.01, T - w * 1.01)
        v = rng.normal(size=d)
        out.append(ForcingCurve(d, c, w, v / np.linalg.norm(v)))
    return out


@dataclass(frozen=True)
class LinearSystemPair:
    L: HamiltonianCurve
    L_tilde: HamiltonianCurve
    a: ScalarCurve
    a_tilde: ScalarCurve
    floor: float = 1e-8

    def __post_init__(self):
        if self.L.d != self.L_tilde.d or self.L.T != self.L_tilde.T:
            raise DimensionError("paired curves must share d and T")

    @property
    def d(self) -> int:
        return self.L.d

    @property
    def T(self) -> float:
        return self.L.T

    @property
    def grid(self) -> np.ndarray:
        return self.L.grid

    def validate(self) -> dict:
        for name, c in (("a", self.a), ("a_tilde", self.a_tilde)):
            vals = np.array([c.value(t) for t in self.grid])
            if np.min(np.abs(vals)) < self.floor or not (np.all(vals > 0) or np.all(vals < 0)):
                raise InputError(f"{name} must be sign-constant and bounded away from 0")
        return {"L": self.L.validate(), "L_tilde": self.L_tilde.validate()}

    def side(self, which: "Which") -> tuple[HamiltonianCurve, ScalarCurve]:
        return (self.L, self.a) if Which(which) is Which.ORIGINAL else (self.L_tilde, self.a_tilde)


class Which(str, enum.Enum):
    ORIGINAL = "original"
    TILDE = "tilde"


# ---------------------------------------------------------------------------
# integration


@dataclass(frozen=True)
class ForcedTrajectory:
    """Dense-output solution of one or several forced problems integrated together."""

    sol: object = field(repr=False)
    dim: int
    count: int

    def __call__(self, t) -> np.ndarray:
        """States with shape ``(count, dim)`` (or ``(len(t), count, dim)`` for arrays)."""
        z = self.sol.sol(t)
        if np.ndim(t) == 0:
            return z.reshape(self.count, self.dim)
        return z.T.reshape(-1, self.count, self.dim)


def _integrate(rhs, t_span, z0, tol: Tolerances, t_eval_max_step: float | None = None):
    sol = solve_ivp(rhs, t_span, z0, method="DOP853", rtol=tol.rtol, atol=tol.atol,
                    dense_output=True, max_step=t_eval_max_step or np.inf)
    if sol.status != 0:
        raise NumericalError(f"integration failed at t={sol.t[-1]:.6g}: {sol.message}")
    return sol


def _stacked_forcing(forcings, d: int) -> Callable[[float], np.ndarray]:
    """All forcings at t as an ``(m, 2d)`` array; bumps are evaluated together."""
    bumps = [i for i, b in enumerate(forcings) if isinstance(b, ForcingCurve)]
    others = [i for i, b in enumerate(forcings) if b is not None and i not in set(bumps)]
    m = len(forcings)
    if bumps:
        c = np.array([forcings[i].center for i in bumps])
        w = np.array([forcings[i].width for i in bumps])
        v = np.array([forcings[i].amplitude * forcings[i].direction for i in bumps])

    def f(t):
        out = np.zeros((m, 2 * d))
        if bumps:
            s = (t - c) / w
            inside = np.abs(s) < 1
            g = np.zeros_like(s)
            g[inside] = np.exp(1.0 - 1.0 / (1.0 - s[inside] ** 2))
            out[bumps, d:] = g[:, None] * v
        for i in others:
            out[i] = forcings[i](t)
        return out
    return f


def solve_forced_batch(pair: LinearSystemPair, which, forcings: Sequence[ForcingCurve | None],
                       x0s=None, tol: Tolerances = DEFAULT) -> ForcedTrajectory:
    """Integrate ``x' = a L x + a b`` for several forcings in one call (state stacked)."""
    Lc, a = pair.side(which)
    n = 2 * pair.d
    m = len(forcings)
    x0s = np.zeros((m, n)) if x0s is None else np.asarray(x0s, dtype=float).reshape(m, n)
    for b in forcings:
        if b is not None:
            b.check_support(pair.T)
    # cap the step so no bump is stepped over
    widths = [b.width for b in forcings if b is not None]
    max_step = 0.25 * min(widths) if widths else None

    forcing = _stacked_forcing(forcings, pair.d)

    def rhs(t, z):
        at = a.value(t)
        L = Lc.value(t)
        X = z.reshape(m, n)
        out = at * (X @ L.T + forcing(t))
        return out.ravel()

    sol = _integrate(rhs, (0.0, pair.T), x0s.ravel(), tol, max_step)
    return ForcedTrajectory(sol, n, m)


def solve_forced(pair: LinearSystemPair, which, b: ForcingCurve | None, x0=None,
                 tol: Tolerances = DEFAULT) -> Callable[[float], np.ndarray]:
    """Dense-output solution of one forced system; ``b = None`` means unforced."""
    x0 = np.zeros(2 * pair.d) if x0 is None else np.asarray(x0, dtype=float)
    traj = solve_forced_batch(pair, which, [b], x0[None, :], tol)

    def x(t):
        z = traj(t)
        return z[0] if np.ndim(t) == 0 else z[:, 0, :]
    return x


def superposition_residual(pair: LinearSystemPair, which, b1: ForcingCurve, b2: ForcingCurve,
                           tol: Tolerances = DEFAULT) -> float:
    """``max_t |x(b1 + b2) - x(b1) - x(b2)|`` with the sum forcing integrated directly."""
    class _Sum:
        width = min(b1.width, b2.width)

        def check_support(self, T):
            b1.check_support(T)
            b2.check_support(T)

        def __call__(self, t):
            return b1(t) + b2(t)

    traj = solve_forced_batch(pair, which, [b1, b2, _Sum()], tol=tol)
    X = traj(pair.grid)
    return float(np.max(np.abs(X[:, 2] - X[:, 0] - X[:, 1])))


def resolvent(pair: LinearSystemPair, which, s: float, t: float,
              tol: Tolerances = DEFAULT) -> np.ndarray:
    """Fundamental matrix ``Psi_s^t`` of ``x' = a L x``."""
    Lc, a = pair.side(which)
    n = 2 * pair.d
    if s == t:
        return np.eye(n)

    def rhs(tt, z):
        return (a.value(tt) * Lc.value(tt) @ z.reshape(n, n)).ravel()

    sol = _integrate(rhs, (s, t), np.eye(n).ravel(), tol)
    return sol.y[:, -1].reshape(n, n)


# ---------------------------------------------------------------------------
# candidate conjugacy and the three conditions


def candidate_conjugacy_jet(pair: LinearSystemPair, t: float, order: int = 1) -> Jet:
    """Jet of ``R_t = [[I, 0], [(a~B~)^-1 (a C^T - a~ C~^T), (a/a~) B~^-1 B]]``."""
    d = pair.d
    Lj = pair.L(t, order)
    Ltj = pair.L_tilde(t, order)
    aj = pair.a(t, order)
    atj = pair.a_tilde(t, order)
    top, right = slice(0, d), slice(d, 2 * d)
    B = sub_jet(Lj, top, right)
    Bt = sub_jet(Ltj, top, right)
    CT = sub_jet(Lj, top, top)
    CtT = sub_jet(Ltj, top, top)
    if np.linalg.cond(Bt.value) > 1e12:
        raise NumericalError(f"B~ not invertible at t={t:.6g}")
    Btinv = Bt.inv()
    rat = aj * atj.reciprocal()
    srow = Btinv @ (CT * rat - CtT)
    lower = (Btinv @ B) * rat
    I = Jet.constant(np.eye(d), order)
    Z = Jet.constant(np.zeros((d, d)), order)
    return block_jet([[I, Z], [srow, lower]])


def candidate_conjugacy(pair: LinearSystemPair, t: float) -> np.ndarray:
    return candidate_conjugacy_jet(pair, t, 0).value


RCurve = Callable[[float], np.ndarray]


def _curve_jet1(R_curve, t: float, h: float) -> tuple[np.ndarray, np.ndarray]:
    """Value and first derivative of R: exact for jet providers, 5-point stencil otherwise."""
    try:
        j = R_curve(t, 1)
        if isinstance(j, Jet):
            return j.d[0], j.d[1]
    except TypeError:
        pass
    f = R_curve
    R = np.asarray(f(t), dtype=float)
    dR = (-f(t + 2 * h) + 8 * f(t + h) - 8 * f(t - h) + f(t - 2 * h)) / (12 * h)
    return R, np.asarray(dR, dtype=float)


def conjugacy_ode_residual(pair: LinearSystemPair, R_curve, h: float = 1e-3,
                           grid: np.ndarray | None = None) -> float:
    """``max_t |R' + a R L - a~ L~ R|`` over the grid.

    ``R_curve`` is either a jet provider ``(t, order) -> Jet`` or a plain
    callable ``t -> matrix`` (differentiated by a fourth-order stencil).
    """
    grid = pair.grid if grid is None else grid
    res = 0.0
    for t in grid:
        R, dR = _curve_jet1(R_curve, t, h)
        r = dR + pair.a.value(t) * R @ pair.L.value(t) - pair.a_tilde.value(t) * pair.L_tilde.value(t) @ R
        res = max(res, float(np.max(np.abs(r))))
    return res


def conjugacy_flow_residual(pair: LinearSystemPair, R_curve, pairs: Sequence[tuple[float, float]],
                            tol: Tolerances = DEFAULT) -> float:
    """``max |R_r Psi_s^r - Psi~_s^r R_s|`` over ``(s, r)`` pairs (integral form of the ODE)."""
    def Rv(t):
        j = R_curve(t, 0) if _takes_order(R_curve) else R_curve(t)
        return j.value if isinstance(j, Jet) else np.asarray(j, dtype=float)

    res = 0.0
    for s, r in pairs:
        P = resolvent(pair, Which.ORIGINAL, s, r, tol)
        Pt = resolvent(pair, Which.TILDE, s, r, tol)
        res = max(res, float(np.max(np.abs(Rv(r) @ P - Pt @ Rv(s)))))
    return res


def _takes_order(f) -> bool:
    try:
        f(0.0, 0)
        return True
    except TypeError:
        return False


def candidate_curve(pair: LinearSystemPair) -> Callable[..., Jet]:
    return lambda t, order=0: candidate_conjugacy_jet(pair, t, order)


@dataclass(frozen=True)
class ConditionReport:
    residuals: tuple[float, float, float]
    passed: tuple[bool, bool, bool]
    threshold: float
    ratio_range: tuple[float, float]

    @property
    def all_pass(self) -> bool:
        return all(self.passed)

    def rows(self) -> list[dict]:
        names = ("constant_ratio", "conformal_factor", "conjugacy_ode")
        return [{"condition": n, "residual": r, "tolerance": self.threshold, "pass": p}
                for n, r, p in zip(names, self.residuals, self.passed)]


def check_three_conditions(pair: LinearSystemPair, threshold: float = 1e-4) -> ConditionReport:
    """Residuals of: constant ``a~/a``; conformal form of ``R_t`` with factor ``a~/a``; conjugacy ODE.

    1. total variation of ``a~/a`` over the grid;
    2. ``max_t |lower-right(R_t) - (a~/a) I| + |s_t - s_t^T|``;
    3. :func:`conjugacy_ode_residual` of the assembled ``R_t``.
    """
    d = pair.d
    grid = pair.grid
    ratio = np.array([pair.a_tilde.value(t) / pair.a.value(t) for t in grid])
    r1 = float(np.sum(np.abs(np.diff(ratio))))
    r2 = 0.0
    Rc = candidate_curve(pair)
    for t, rho in zip(grid, ratio):
        R = Rc(t, 0).value
        s = R[d:, :d]
        r2 = max(r2, float(np.linalg.norm(R[d:, d:] - rho * np.eye(d), 2) + np.linalg.norm(s - s.T, 2)))
    r3 = conjugacy_ode_residual(pair, Rc)
    res = (r1, r2, r3)
    return ConditionReport(res, tuple(bool(r <= threshold) for r in res), threshold,
                           (float(ratio.min()), float(ratio.max())))


# ---------------------------------------------------------------------------
# projections of forced solutions


@dataclass(frozen=True)
class ProjectionReport:
    discrepancy: float
    per_member: np.ndarray
    worst_time: float


def projection_agreement(pair: LinearSystemPair, ensemble: Sequence[ForcingCurve],
                         tol: Tolerances = DEFAULT, n_eval: int | None = None) -> ProjectionReport:
    """``max_{t, b} |pi x_b(t) - pi x~_b(t)|`` with both systems started at 0."""
    if len(ensemble) == 0:
        return ProjectionReport(0.0, np.zeros(0), 0.0)
    d = pair.d
    ts = np.linspace(0.0, pair.T, n_eval or 4 * pair.L.n_grid)
    X = solve_forced_batch(pair, Which.ORIGINAL, ensemble, tol=tol)(ts)
    Xt = solve_forced_batch(pair, Which.TILDE, ensemble, tol=tol)(ts)
    diff = np.max(np.abs(X[:, :, :d] - Xt[:, :, :d]), axis=2)  # (time, member)
    per = diff.max(axis=0)
    k = np.unravel_index(np.argmax(diff), diff.shape)
    return ProjectionReport(float(per.max()), per, float(ts[k[0]]))


# ---------------------------------------------------------------------------
# the M_n recursion


def m_sequence_jets(L: HamiltonianCurve, a: ScalarCurve, t: float, n_max: int = 4) -> list[Jet]:
    """Jets of ``M_1 .. M_{n_max}`` at t (M_n carries order ``n_max - n``)."""
    if n_max < 1:
        raise InputError("n_max must be >= 1")
    K = n_max - 1
    if K > min(L.max_order, a.max_order):
        raise CapabilityError(f"M_{n_max} needs derivatives of order {K}")
    Lj = L(t, K)
    aj = a(t, K)
    M = Jet.constant(np.eye(2 * L.d), K)
    out = [M]
    for _ in range(K):
        M = M.deriv() + (aj * M) @ Lj
        out.append(M)
    return out


def m_sequence(curve: tuple[HamiltonianCurve, ScalarCurve], n_max: int = 4,
               grid: np.ndarray | None = None) -> list[np.ndarray]:
    """``[M_2, ..., M_{n_max}]`` on the grid, each with shape ``(len(grid), 2d, 2d)``."""
    L, a = curve
    grid = L.grid if grid is None else grid
    per_t = [m_sequence_jets(L, a, t, n_max) for t in grid]
    return [np.array([jets[n].value for jets in per_t]) for n in range(1, n_max)]


def upper_right(M: np.ndarray) -> np.ndarray:
    d = M.shape[-1] // 2
    return M[..., :d, d:]


def m_identity_residuals(pair: LinearSystemPair, n_max: int = 4) -> list[float]:
    """``max_t |[a M_n] - [a~ M~_n]|`` for n = 2..n_max (upper-right blocks)."""
    grid = pair.grid
    a = np.array([pair.a.value(t) for t in grid])[:, None, None]
    at = np.array([pair.a_tilde.value(t) for t in grid])[:, None, None]
    M = m_sequence((pair.L, pair.a), n_max, grid)
    Mt = m_sequence((pair.L_tilde, pair.a_tilde), n_max, grid)
    return [float(np.max(np.abs(upper_right(a * X) - upper_right(at * Y)))) for X, Y in zip(M, Mt)]


# ---------------------------------------------------------------------------
# converse construction and violators


def build_conjugate_pair(L: HamiltonianCurve, a: ScalarCurve, alpha: float, s0,
                         s_rate=None, sym_tol: float = 1e-7) -> LinearSystemPair:
    """Pair conjugated by ``R_t = [[I, 0], [s_t, alpha I]]`` with ``s_t = s0 + t s_rate``.

    ``a~ = alpha a`` and ``L~ = (R' R^-1 + a R L R^-1) / a~``; both stay
    Hamiltonian because ``R_t`` is conformally symplectic when ``s_t`` is
    symmetric.
    """
    d = L.d
    if alpha == 0:
        raise InputError("alpha must be nonzero")
    s0 = np.atleast_2d(np.asarray(s0, dtype=float))
    s_rate = np.zeros((d, d)) if s_rate is None else np.atleast_2d(np.asarray(s_rate, dtype=float))
    if s0.shape != (d, d) or s_rate.shape != (d, d):
        raise DimensionError(f"s0 and s_rate must be {d}x{d}")
    asym = max(float(np.max(np.abs(s0 - s0.T))), float(np.max(np.abs(s_rate - s_rate.T))))
    if asym > sym_tol:
        raise InconsistencyError(f"s_t lost symmetry (residual {asym:.2e})")
    a_t = a.scaled(alpha)
    I = np.eye(d)

    def R_jet(t, order):
        s = Jet([s0 + t * s_rate, s_rate] + [np.zeros((d, d))] * max(0, order - 1)).truncate(order)
        Ij = Jet.constant(I, order)
        Z = Jet.constant(np.zeros((d, d)), order)
        R = block_jet([[Ij, Z], [s, Ij * alpha]])
        Rinv = block_jet([[Ij, Z], [s * (-1.0 / alpha), Ij * (1.0 / alpha)]])
        return R, Rinv

    def Lt(t, order=0):
        R, Rinv = R_jet(t, order + 1)
        dR = R.deriv()
        Lj = L(t, order)
        aj = a(t, order)
        M = dR @ Rinv.truncate(order) + (aj * (R.truncate(order) @ Lj)) @ Rinv.truncate(order)
        return M * (aj * alpha).reciprocal()

    L_tilde = HamiltonianCurve(d, L.T, Lt, n_grid=L.n_grid, max_order=L.max_order)
    return LinearSystemPair(L, L_tilde, a, a_t)


def conformal_R(d: int, alpha: float, s0, s_rate=None) -> Callable[..., Jet]:
    """Jet provider of the conjugacy used by :func:`build_conjugate_pair`."""
    s0 = np.atleast_2d(np.asarray(s0, dtype=float))
    s_rate = np.zeros((d, d)) if s_rate is None else np.atleast_2d(np.asarray(s_rate, dtype=float))

    def R(t, order=0):
        s = Jet([s0 + t * s_rate, s_rate] + [np.zeros((d, d))] * max(0, order - 1)).truncate(order)
        Ij = Jet.constant(np.eye(d), order)
        return block_jet([[Ij, Jet.constant(np.zeros((d, d)), order)], [s, Ij * alpha]])
    return R


def perturb_blocks(L: HamiltonianCurve, dA=None, B_factor: float = 1.0) -> HamiltonianCurve:
    """Copy of L with ``B`` scaled by B_factor and ``A`` shifted by the constant dA."""
    d = L.d

    def f(t, order=0):
        Lj = L(t, order)
        add = np.zeros((2 * d, 2 * d))
        out = [x.copy() for x in Lj.d]
        out[0][:d, d:] *= B_factor
        for n in range(1, len(out)):
            out[n][:d, d:] *= B_factor
        if dA is not None:
            add[d:, :d] = -np.asarray(dA, dtype=float)
            out[0] = out[0] + add
        return Jet(out)
    return HamiltonianCurve(d, L.T, f, n_grid=L.n_grid, max_order=L.max_order)


def violate_ratio(L: HamiltonianCurve, a: ScalarCurve, slope: float = 0.5) -> LinearSystemPair:
    """``a~ = (1 + slope t) a`` and ``L~ = L``: the ratio ``a~/a`` is not constant."""
    return LinearSystemPair(L, L, a, a.times(ScalarCurve.affine(1.0, slope)))


def violate_conformal(L: HamiltonianCurve, a: ScalarCurve, factor: float = 2.0) -> LinearSystemPair:
    """``B~ = factor B`` with ``a~ = a``: the lower-right block of R is ``factor^-1 I``."""
    return LinearSystemPair(L, perturb_blocks(L, B_factor=factor), a, a)


def violate_conjugacy(L: HamiltonianCurve, a: ScalarCurve, shift: float = 1.0) -> LinearSystemPair:
    """``A~ = A + shift I`` with ``a~ = a``: R = I but the ODE fails."""
    return LinearSystemPair(L, perturb_blocks(L, dA=shift * np.eye(L.d)), a, a)


def random_pair(d: int, T: float, rng: np.random.Generator, alpha: float | None = None,
                n_grid: int = 201) -> tuple[LinearSystemPair, dict]:
    """A converse-construction pair with random L, a, alpha, s0 and s_rate."""
    L = HamiltonianCurve.random(d, T, rng, n_grid=n_grid)
    a = ScalarCurve(random_trig_scalar(rng, T))
    if alpha is None:
        alpha = float(rng.choice([-1, 1]) * rng.uniform(0.5, 2.0))
    S = rng.uniform(-0.5, 0.5, (d, d))
    Sr = rng.uniform(-0.2, 0.2, (d, d))
    s0, sr = (S + S.T) / 2, (Sr + Sr.T) / 2
    return build_conjugate_pair(L, a, alpha, s0, sr), {"alpha": alpha, "s0": s0, "s_rate": sr}


def constant_rotation_check(T: float = 1.0) -> float:
    """Resolvent of the constant system ``L = J``, ``a = 1`` against ``exp(t J)``."""
    from scipy.linalg import expm
    pair = LinearSystemPair(HamiltonianCurve.constant(J_std(1), T), HamiltonianCurve.constant(J_std(1), T),
                            ScalarCurve.constant(1.0), ScalarCurve.constant(1.0))
    P = resolvent(pair, Which.ORIGINAL, 0.0, T)
    return float(np.max(np.abs(P - expm(T * J_std(1)))))


__all__ = [
    "Jet", "TrigCurve", "HamiltonianCurve", "ScalarCurve", "ForcingCurve", "LinearSystemPair", "Which",
    "solve_forced", "solve_forced_batch", "superposition_residual", "resolvent",
    "candidate_conjugacy", "candidate_conjugacy_jet", "candidate_curve", "conjugacy_ode_residual",
    "conjugacy_flow_residual", "check_three_conditions", "projection_agreement", "m_sequence",
    "m_identity_residuals", "build_conjugate_pair", "conformal_R", "violate_ratio",
    "violate_conformal", "violate_conjugacy", "random_pair", "random_bump_ensemble",
    "constant_rotation_check", "perturb_blocks", "symplectic_residual", "hamiltonian_block_matrix",
]
