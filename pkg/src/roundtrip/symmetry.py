"""Fiber minimum, the fiberwise symmetry and its scale factor.

For fixed q the map ``p -> H(q, p)`` is strictly convex.  Its minimizer
``pstar(q)`` traces the critical graph, where the projected velocity
vanishes.  The symmetry sends ``(q, p)`` to the other point ``(q, s)`` of the
same fiber with the same energy whose fiber gradient is a negative multiple of
the original one:

    dH/dp(q, s) = -scale * dH/dp(q, p),   H(q, s) = H(q, p),   scale > 0.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .config import DEFAULT, Tolerances
from .errors import NoMinimumError, SymmetryUnsolvableError
from .hamsys import Hamiltonian, PhasePoint, Potential, as_state, split


@dataclass(frozen=True)
class GammaPoint:
    q: np.ndarray
    p_star: np.ndarray
    residual: float

    @property
    def x(self) -> np.ndarray:
        return np.r_[self.q, self.p_star]


@dataclass(frozen=True)
class SymmetryResult:
    image: PhasePoint
    scale: float
    residuals: tuple[float, float]
    on_gamma: bool = False


def fiber_minimum(H: Hamiltonian, u: Potential | None, q, seed=None,
                  tol: Tolerances = DEFAULT) -> GammaPoint:
    """Minimize ``H(q, .)`` by damped Newton on its gradient."""
    q = np.asarray(q, dtype=float)
    p = np.zeros(q.size) if seed is None else np.array(seed, dtype=float)
    for _ in range(tol.newton_maxiter):
        _, g = H.grad(q, p)
        r = float(np.linalg.norm(g))
        if r <= tol.newton_tol:
            H.hess(q, p)  # convexity guard at the solution
            return GammaPoint(q, p, r)
        _, _, Hpp = H.hess(q, p)
        step = np.linalg.solve(Hpp, g)
        # backtrack on the convex objective
        h0 = H.value(q, p)
        lam = 1.0
        while lam > 1e-8:
            trial = p - lam * step
            try:
                if H.value(q, trial) <= h0 - 1e-4 * lam * (g @ step) or r < 1e-6:
                    break
            except Exception:  # noqa: BLE001 - out of domain, shrink
                pass
            lam *= 0.5
        p = p - lam * step
    _, g = H.grad(q, p)
    raise NoMinimumError(f"fiber minimum not found at q={q} (|dH/dp|={np.linalg.norm(g):.3e})")


def dgamma_section(H: Hamiltonian, u: Potential | None, q, tol: Tolerances = DEFAULT) -> np.ndarray:
    """Derivative of ``q -> pstar(q)``: ``-H_pp^{-1} H_pq`` at the minimum."""
    g = fiber_minimum(H, u, q, tol=tol)
    _, Hpq, Hpp = H.hess(g.q, g.p_star)
    return -np.linalg.solve(Hpp, Hpq)


def legendre_h(H: Hamiltonian, q, p) -> np.ndarray:
    """Fiber derivative ``p -> dH/dp(q, p)``."""
    return H.grad(np.asarray(q, dtype=float), np.asarray(p, dtype=float))[1]


def legendre_g(H: Hamiltonian, q, w, seed=None, tol: Tolerances = DEFAULT) -> np.ndarray:
    """Inverse of :func:`legendre_h` on the fiber, by Newton."""
    q = np.asarray(q, dtype=float)
    w = np.asarray(w, dtype=float)
    p = fiber_minimum(H, None, q, tol=tol).p_star if seed is None else np.array(seed, dtype=float)
    for _ in range(4 * tol.newton_maxiter):
        _, g = H.grad(q, p)
        r = g - w
        if np.linalg.norm(r) <= tol.newton_tol * max(1.0, np.linalg.norm(w)):
            return p
        _, _, Hpp = H.hess(q, p)
        step = np.linalg.solve(Hpp, r)
        # cap the step so exponential kinetics stay finite
        nrm = np.linalg.norm(step)
        if nrm > 1.0:
            step = step / nrm
        p = p - step
    raise SymmetryUnsolvableError(f"fiber derivative value {w} not attained at q={q}", (np.nan, np.nan))


def _residuals(H, q, p, s, scale):
    _, gp = H.grad(q, p)
    _, gs = H.grad(q, s)
    return float(np.linalg.norm(gs + scale * gp)), abs(H.value(q, s) - H.value(q, p))


def _newton_symmetry(H, q, p, seed, tol: Tolerances):
    n = q.size
    _, gp = H.grad(q, p)
    e0 = H.value(q, p)
    s = seed.copy()
    sc = 1.0
    for _ in range(tol.newton_maxiter):
        _, gs = H.grad(q, s)
        F = np.r_[gs + sc * gp, H.value(q, s) - e0]
        if np.linalg.norm(F) <= 1e-13 * max(1.0, abs(e0), np.linalg.norm(gp)):
            break
        _, _, Hpp = H.hess(q, s)
        D = np.zeros((n + 1, n + 1))
        D[:n, :n] = Hpp
        D[:n, n] = gp
        D[n, :n] = gs
        try:
            delta = np.linalg.solve(D, F)
        except np.linalg.LinAlgError:
            return None
        s = s - delta[:n]
        sc = sc - delta[n]
        if not np.all(np.isfinite(s)):
            return None
    return s, sc


def _ray_symmetry(H, q, p, tol: Tolerances):
    """1-D solve along the ray ``-lam * dH/dp(q, p)`` in fiber-derivative coordinates."""
    _, gp = H.grad(q, p)
    e0 = H.value(q, p)
    pstar = fiber_minimum(H, None, q, tol=tol).p_star

    def excess(lam):
        return H.value(q, legendre_g(H, q, -lam * gp, seed=pstar, tol=tol)) - e0

    hi = 1.0
    for _ in range(60):
        if excess(hi) > 0:
            break
        hi *= 2.0
    else:
        raise SymmetryUnsolvableError("energy not reached along the reflected ray", (np.nan, np.nan))
    lam = brentq(excess, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    s = legendre_g(H, q, -lam * gp, seed=pstar, tol=tol)
    return s, lam


def apply_symmetry(H: Hamiltonian, u: Potential | None, x, tol: Tolerances = DEFAULT) -> SymmetryResult:
    """Image of x under the fiberwise symmetry and the scale factor."""
    q, p = split(as_state(x))
    _, gp = H.grad(q, p)
    if np.linalg.norm(gp) <= tol.gamma_tol:
        return SymmetryResult(PhasePoint(q, p), 1.0, (0.0, 0.0), on_gamma=True)
    pstar = fiber_minimum(H, u, q, tol=tol).p_star
    out = _newton_symmetry(H, q, p, 2.0 * pstar - p, tol)
    ok = False
    if out is not None:
        s, sc = out
        # reject the trivial root s = p, scale = -1
        if sc > 0 and np.linalg.norm(s - p) > 1e-8 * max(1.0, np.linalg.norm(p)):
            r1, r2 = _residuals(H, q, p, s, sc)
            ok = r1 <= 1e-9 * max(1.0, np.linalg.norm(gp)) and r2 <= 1e-10 * max(1.0, abs(H.value(q, p)))
    if not ok:
        s, sc = _ray_symmetry(H, q, p, tol)
        s2 = _newton_symmetry(H, q, p, s, tol)  # polish
        if s2 is not None and s2[1] > 0:
            s, sc = s2
    r = _residuals(H, q, p, s, sc)
    if not (sc > 0 and np.isfinite(sc)):
        raise SymmetryUnsolvableError(f"symmetry solve failed at x={as_state(x)}", r)
    return SymmetryResult(PhasePoint(q, s), float(sc), r)


def symmetry_scale(H, u, x, tol: Tolerances = DEFAULT) -> float:
    return apply_symmetry(H, u, x, tol).scale


def symmetry_jacobian_on_gamma(H: Hamiltonian, u: Potential | None, q,
                               tol: Tolerances = DEFAULT) -> np.ndarray:
    """Closed-form derivative of the symmetry at a point of the critical graph."""
    D = dgamma_section(H, u, q, tol)
    n = D.shape[0]
    I = np.eye(n)
    return np.block([[I, np.zeros((n, n))], [2.0 * D, -I]])


def symmetry_jacobian(H: Hamiltonian, u: Potential | None, x, h: float = 1e-4,
                      tol: Tolerances = DEFAULT) -> np.ndarray:
    """Richardson-extrapolated central-difference Jacobian of the symmetry."""
    x = as_state(x)
    m = x.size

    def image(y):
        return apply_symmetry(H, u, y, tol).image.x

    def central(step):
        Jm = np.empty((m, m))
        for j in range(m):
            e = np.zeros(m)
            e[j] = step
            Jm[:, j] = (image(x + e) - image(x - e)) / (2 * step)
        return Jm

    D1 = central(h)
    D2 = central(h / 2)
    return (4.0 * D2 - D1) / 3.0


def model_involution(f: Callable, y, x, tol: Tolerances = DEFAULT) -> tuple[np.ndarray, float]:
    """Reflect x through the minimum of the convex function ``f(y, .)`` at 0.

    Returns ``(xt, s)`` with ``xt = -s x``, ``s > 0`` and ``f(y, xt) = f(y, x)``;
    ``s = 1`` at ``x = 0``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.linalg.norm(x) == 0.0:
        return x.copy(), 1.0
    target = f(y, x)

    def gap(s):
        return f(y, -s * x) - target

    if gap(0.0) >= 0:
        raise SymmetryUnsolvableError("f(y, .) has no strict minimum at 0", (gap(0.0), np.nan))
    hi = 1.0
    for _ in range(60):
        if gap(hi) > 0:
            break
        hi *= 2.0
    else:
        raise SymmetryUnsolvableError("level not reached on the reflected ray", (np.nan, np.nan))
    s = brentq(gap, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    return -s * x, float(s)
