"""Periodic orbits, chords, and the classification of projected orbits.

A periodic orbit is either *neat* (some arc of its projection is embedded
and never revisited) or a *round trip* (the projection retraces itself through
an orientation-reversing time change with two fixed turning points).
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq
from scipy.spatial import cKDTree

from .config import DEFAULT, Tolerances
from .errors import (ClassificationError, ConvergenceError, GeometryError, NumericalError,
                     PeriodCollapseError)
from .hamsys import (Hamiltonian, OrbitSegment, PhasePoint, Potential, as_state, field_jacobian,
                     flow, flow_map, split, total_energy, total_grad, variational_flow,
                     vector_field)
from .symmetry import GammaPoint, apply_symmetry, dgamma_section, fiber_minimum


# ---------------------------------------------------------------------------
# periodic orbits


@dataclass(frozen=True)
class PeriodicOrbit:
    H: Hamiltonian = field(repr=False)
    u: Potential = field(repr=False)
    base_point: PhasePoint
    period: float
    segment: OrbitSegment = field(repr=False)
    closure_residual: float
    minimal: bool
    divisor_residuals: tuple[float, ...] = ()

    def state(self, t) -> np.ndarray:
        """State at time t, wrapped modulo the period."""
        return self.segment(np.mod(t, self.period))


def _closure(H, x1, x0):
    n = x0.size // 2
    d = x1 - x0
    d[:n] = H.wrap_delta(d[:n])
    return d


def find_periodic_orbit(H: Hamiltonian, u: Potential, seed, T_guess: float,
                        tol: Tolerances = DEFAULT, energy_constraint: bool = True,
                        maxiter: int = 40) -> PeriodicOrbit:
    """Gauss-Newton shooting on (x, T) with a phase and an energy condition."""
    x = as_state(seed).copy()
    T = float(T_guess)
    f_seed = vector_field(H, u, x)
    if np.linalg.norm(f_seed) < tol.velocity_floor:
        raise PeriodCollapseError(f"seed is (nearly) an equilibrium: |f| = {np.linalg.norm(f_seed):.2e}")
    x_seed = x.copy()
    m = x.size
    res = np.inf
    for it in range(maxiter):
        seg, Phi = variational_flow(H, u, x, T, tol)
        xT = seg(T)
        F = [_closure(H, xT, x), [(x - x_seed) @ f_seed]]
        Jrows = [np.c_[Phi - np.eye(m), vector_field(H, u, xT)], np.r_[f_seed, 0.0][None, :]]
        if energy_constraint:
            F.append([total_energy(H, u, x)])
            Jrows.append(np.r_[total_grad(H, u, x), 0.0][None, :])
        F = np.concatenate(F)
        Jm = np.vstack(Jrows)
        res = float(np.linalg.norm(F))
        if res < 1e-12:
            break
        step = np.linalg.lstsq(Jm, -F, rcond=None)[0]
        # trust region keeps early iterates inside the basin
        scale = max(np.linalg.norm(step[:m]) / (0.2 * (1.0 + np.linalg.norm(x))),
                    abs(step[m]) / (0.2 * T), 1.0)
        step = step / scale
        x = x + step[:m]
        T = T + step[m]
        if T <= 1e-8 or not np.isfinite(T):
            raise PeriodCollapseError(f"period collapsed to {T:.3e}")
        if np.linalg.norm(step) < 1e-13 * max(1.0, T):
            break
    seg = flow(H, u, x, T, tol)
    closure = float(np.linalg.norm(_closure(H, seg(T), x)))
    if not closure <= max(1e-8, 100 * tol.newton_tol):
        raise ConvergenceError(f"shooting did not converge: closure {closure:.3e}, residual {res:.3e}")
    # minimal-period scan over divisors
    div = []
    for k in range(2, tol.k_div + 1):
        r = float(np.linalg.norm(_closure(H, seg(T / k), x)))
        div.append(r)
        if r <= 1e-6 * max(1.0, np.linalg.norm(x)):
            return find_periodic_orbit(H, u, x, T / k, tol, energy_constraint, maxiter)
    return PeriodicOrbit(H, u, PhasePoint.from_state(x), T, seg, closure, True, tuple(div))


def orbit_from_known_period(H: Hamiltonian, u: Potential, x0, T: float,
                            tol: Tolerances = DEFAULT, closure_tol: float = 1e-8) -> PeriodicOrbit:
    """Wrap a known closed trajectory without shooting.

    Useful for resonant families (e.g. linear oscillators) where the shooting
    Jacobian is rank deficient and Newton drifts along the family.
    """
    x0 = as_state(x0)
    seg = flow(H, u, x0, T, tol)
    closure = float(np.linalg.norm(_closure(H, seg(T), x0)))
    if closure > closure_tol:
        raise ConvergenceError(f"trajectory does not close: {closure:.3e}")
    div = tuple(float(np.linalg.norm(_closure(H, seg(T / k), x0))) for k in range(2, tol.k_div + 1))
    minimal = all(r > 1e-6 * max(1.0, np.linalg.norm(x0)) for r in div)
    return PeriodicOrbit(H, u, PhasePoint.from_state(x0), float(T), seg, closure, minimal, div)


# ---------------------------------------------------------------------------
# chords


def _gamma_point(H, u, q, tol):
    return fiber_minimum(H, u, q, tol=tol)


def level_energy(H, u, q, tol: Tolerances = DEFAULT) -> float:
    """``E(q) = (H + u)(q, pstar(q))``; its zero set is the rest set on the level."""
    g = _gamma_point(H, u, q, tol)
    return H.value(g.q, g.p_star) + u.value(g.q)


def level_energy_grad(H, u, q, tol: Tolerances = DEFAULT) -> np.ndarray:
    g = _gamma_point(H, u, q, tol)
    return H.grad(g.q, g.p_star)[0] + u.grad(g.q)


def project_to_rest_level(H, u, q, tol: Tolerances = DEFAULT, maxiter: int = 50) -> np.ndarray:
    """Minimum-norm Newton onto ``E(q) = 0``."""
    q = np.asarray(q, dtype=float).copy()
    for _ in range(maxiter):
        E = level_energy(H, u, q, tol)
        if abs(E) <= 1e-14:
            return q
        g = level_energy_grad(H, u, q, tol)
        gg = g @ g
        if gg < 1e-24:
            raise GeometryError(f"critical point of the rest energy at q={q}")
        q = q - E * g / gg
    if abs(level_energy(H, u, q, tol)) > 1e-10:
        raise ConvergenceError("projection onto the rest level failed")
    return q


@dataclass(frozen=True)
class Chord:
    start: GammaPoint
    duration: float
    end: GammaPoint
    minimal: bool
    transversality_sigma_min: float
    verified: bool = True
    start_energy: float = 0.0
    end_residual: float = 0.0

    @property
    def transverse(self) -> bool:
        return self.transversality_sigma_min >= DEFAULT.transv_tol

    def as_vector(self) -> np.ndarray:
        return np.r_[self.duration, self.start.q]


def _speed_terms(H, u, x):
    """``dH/dp`` and its time derivative along the flow."""
    q, p = split(x)
    _, Hp = H.grad(q, p)
    _, Hpq, Hpp = H.hess(q, p)
    f = vector_field(H, u, x)
    n = q.size
    return Hp, Hpq @ f[:n] + Hpp @ f[n:]


def gamma_distance2(H, u, x) -> float:
    return float(np.sum(H.grad(*split(x))[1] ** 2))


def _refine_min(fun, dfun, a, b):
    """Refine a local minimum in [a, b] by a root of the derivative."""
    da, db = dfun(a), dfun(b)
    if da < 0 < db:
        return brentq(dfun, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    return a if fun(a) <= fun(b) else b


def _scan_minima(seg: OrbitSegment, H, u, t0: float, t1: float, n: int):
    ts = np.linspace(t0, t1, n)
    X = seg(ts).T
    g = np.array([gamma_distance2(H, u, x) for x in X])
    idx = [i for i in range(1, n - 1) if g[i] <= g[i - 1] and g[i] < g[i + 1]]
    out = []
    gfun = lambda t: gamma_distance2(H, u, seg(t))  # noqa: E731

    def dg(t):
        Hp, dHp = _speed_terms(H, u, seg(t))
        return 2.0 * Hp @ dHp

    for i in idx:
        t = _refine_min(gfun, dg, ts[i - 1], ts[i + 1])
        out.append((t, gfun(t), g.max()))
    return out


def _chord_newton(H, u, q0, t0, tol: Tolerances, maxiter: int = 30):
    """Newton on (t, q): end on the critical graph, start on the rest level."""
    n = q0.size
    q, t = q0.copy(), float(t0)
    for _ in range(maxiter):
        g = _gamma_point(H, u, q, tol)
        x0 = g.x
        seg, Phi = variational_flow(H, u, x0, t, tol)
        xe = seg(t)
        Hp, dHp = _speed_terms(H, u, xe)
        qe, pe = split(xe)
        _, Hpq, Hpp = H.hess(qe, pe)
        dP = dgamma_section(H, u, q, tol)
        lift = np.vstack([np.eye(n), dP])
        F = np.r_[Hp, H.value(g.q, g.p_star) + u.value(g.q)]
        Jm = np.zeros((n + 1, n + 1))
        Jm[:n, 0] = dHp
        Jm[:n, 1:] = np.c_[Hpq, Hpp] @ Phi @ lift
        Jm[n, 1:] = H.grad(g.q, g.p_star)[0] + u.grad(g.q)
        try:
            step = np.linalg.solve(Jm, -F)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(Jm, -F, rcond=None)[0]
        t += step[0]
        q = q + step[1:]
        if t <= 0:
            return None
        if np.linalg.norm(step) < 1e-13 * max(1.0, t) and np.linalg.norm(F) < 1e-9:
            break
    g = _gamma_point(H, u, q, tol)
    xe = flow_map(H, u, g.x, t, tol)
    res = float(np.linalg.norm(H.grad(*split(xe))[1]))
    E0 = H.value(g.q, g.p_star) + u.value(g.q)
    return t, q, res, E0


def chord_transversality(H: Hamiltonian, u: Potential, chord: Chord,
                         tol: Tolerances = DEFAULT) -> tuple[bool, float]:
    """Smallest singular value of the flow restricted to R x Gamma_0, modulo T Gamma."""
    q0 = chord.start.q
    n = q0.size
    x0 = chord.start.x
    if np.linalg.norm(vector_field(H, u, x0)) < tol.velocity_floor:
        raise GeometryError("chord starts at a fixed point")
    gE = level_energy_grad(H, u, q0, tol)
    if np.linalg.norm(gE) < 1e-12:
        raise GeometryError("rest level is singular at the chord start")
    # basis of ker dE, lifted to the critical graph
    _, _, Vt = np.linalg.svd(gE[None, :])
    K = Vt[1:].T
    lift0 = np.vstack([K, dgamma_section(H, u, q0, tol) @ K])
    seg, Phi = variational_flow(H, u, x0, chord.duration, tol)
    xe = seg(chord.duration)
    qe, _ = split(xe)
    dPe = dgamma_section(H, u, qe, tol)
    proj = np.c_[-dPe, np.eye(n)]  # (dq, dp) -> dp - dpstar dq
    cols = np.c_[vector_field(H, u, xe), Phi @ lift0]
    Mt = proj @ cols
    smin = float(np.linalg.svd(Mt, compute_uv=False).min())
    return smin >= tol.transv_tol, smin


def _is_minimal(H, u, x0, t, tol: Tolerances, n_scan: int = 400) -> bool:
    seg = flow(H, u, x0, t, tol)
    margin = 1e-6 * t
    for s, g, gmax in _scan_minima(seg, H, u, margin, t - margin, n_scan):
        if margin < s < t - margin and g <= 10 * tol.gamma_event_tol:
            return False
    return True


def find_chords(H: Hamiltonian, u: Potential, t_max: float, grid: Sequence,
                tol: Tolerances = DEFAULT, n_scan: int = 800, max_candidates: int = 3,
                candidate_ratio: float = 0.05) -> list[Chord]:
    """Search for chords from sample configurations near the rest level.

    Each grid point is projected onto the rest level, the trajectory from the
    critical graph is scanned for near-returns (local minima of ``|dH/dp|^2``),
    and each candidate is polished by Newton on (duration, start).
    """
    chords: list[Chord] = []
    for q_seed in grid:
        try:
            q = project_to_rest_level(H, u, np.asarray(q_seed, dtype=float), tol)
        except Exception:  # noqa: BLE001 - seed outside usable region
            continue
        g = _gamma_point(H, u, q, tol)
        if np.linalg.norm(vector_field(H, u, g.x)) < tol.velocity_floor:
            continue
        seg = flow(H, u, g.x, t_max, tol)
        cands = [c for c in _scan_minima(seg, H, u, 0.0, t_max, n_scan)
                 if c[1] <= candidate_ratio * c[2] and c[0] > t_max / n_scan]
        for t_c, _, _ in cands[:max_candidates]:
            out = _chord_newton(H, u, q, t_c, tol)
            if out is None:
                continue
            t, qs, res, E0 = out
            if not (0 < t <= t_max * (1 + 1e-9)):
                continue
            verified = res <= max(tol.newton_tol, 1e-9) and abs(E0) <= 1e-9
            if not verified:
                continue
            if any(abs(c.duration - t) < 1e-7 * max(1, t) and np.linalg.norm(c.start.q - qs) < 1e-7
                   for c in chords):
                continue
            gs = _gamma_point(H, u, qs, tol)
            xe = flow_map(H, u, gs.x, t, tol)
            qe, pe = split(xe)
            minimal = _is_minimal(H, u, gs.x, t, tol)
            ch = Chord(gs, t, GammaPoint(qe, pe, res), minimal, np.nan, verified, E0, res)
            try:
                _, smin = chord_transversality(H, u, ch, tol)
            except GeometryError:
                smin = np.nan
            chords.append(Chord(gs, t, GammaPoint(qe, pe, res), minimal, smin, verified, E0, res))
    chords.sort(key=lambda c: (c.duration, tuple(c.start.q)))
    return chords


def refine_chord(H: Hamiltonian, u: Potential, chord: Chord, tol: Tolerances = DEFAULT) -> Chord:
    """Newton-continue a chord to the system (H, u)."""
    out = _chord_newton(H, u, chord.start.q, chord.duration, tol)
    if out is None:
        raise ConvergenceError("chord continuation left the admissible region")
    t, q, res, E0 = out
    if res > 1e-8 or abs(E0) > 1e-8:
        raise ConvergenceError(f"chord continuation residual {res:.2e}")
    gs = _gamma_point(H, u, q, tol)
    xe = flow_map(H, u, gs.x, t, tol)
    qe, pe = split(xe)
    ch = Chord(gs, t, GammaPoint(qe, pe, res), chord.minimal, np.nan, True, E0, res)
    _, smin = chord_transversality(H, u, ch, tol)
    return Chord(gs, t, ch.end, chord.minimal, smin, True, E0, res)


# ---------------------------------------------------------------------------
# projected curves and classification


@dataclass(frozen=True)
class ProjectedCurve:
    """Closed configuration curve ``Q: R/TZ -> R^n`` with two derivatives."""

    Q: Callable
    dQ: Callable
    ddQ: Callable
    period: float
    periodic_box: np.ndarray | None = None

    @classmethod
    def from_orbit(cls, orbit: PeriodicOrbit) -> "ProjectedCurve":
        H, u, T = orbit.H, orbit.u, orbit.period
        n = orbit.base_point.q.size

        def Q(t):
            return orbit.state(t)[:n]

        def dQ(t):
            x = orbit.state(t)
            if x.ndim == 1:
                return H.grad(*split(x))[1]
            return np.array([H.grad(*split(c))[1] for c in x.T]).T

        def ddQ(t):
            return _speed_terms(H, u, orbit.state(t))[1]

        return cls(Q, dQ, ddQ, T, H.period)

    def embed(self, pts: np.ndarray) -> np.ndarray:
        """Coordinates for proximity search; periodic axes go on circles."""
        if self.periodic_box is None:
            return pts
        cols = []
        for i, P in enumerate(self.periodic_box):
            if np.isfinite(P):
                r = P / (2 * np.pi)
                cols += [r * np.cos(pts[:, i] / r), r * np.sin(pts[:, i] / r)]
            else:
                cols.append(pts[:, i])
        return np.column_stack(cols)

    def delta(self, a, b):
        d = np.asarray(a) - np.asarray(b)
        if self.periodic_box is None:
            return d
        P = self.periodic_box
        per = np.isfinite(P)
        d = d.copy()
        d[per] -= P[per] * np.round(d[per] / P[per])
        return d


class OrbitKind(enum.Enum):
    NEAT = "Neat"
    ROUND_TRIP = "RoundTrip"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class OrbitClassification:
    kind: OrbitKind
    degenerate_times: tuple[float, ...]
    sigma_samples: tuple[tuple[float, float], ...] = ()
    self_intersection_times: tuple[tuple[float, float], ...] = ()
    neat_interval: tuple[float, float] | None = None
    diagnostics: dict = field(default_factory=dict)


def _runs(idx: np.ndarray, N: int, gap: int = 3) -> list[np.ndarray]:
    """Group sorted circular indices into contiguous runs."""
    if idx.size == 0:
        return []
    idx = np.sort(idx)
    cuts = np.where(np.diff(idx) > gap)[0]
    runs = np.split(idx, cuts + 1)
    if len(runs) > 1 and runs[0][0] + N - runs[-1][-1] <= gap:
        runs[0] = np.r_[runs[-1], runs[0]]
        runs.pop()
    return runs


def _circ_in(run: np.ndarray, i: int) -> bool:
    return bool(np.any(run == i))


@dataclass(frozen=True)
class _Hits:
    times: np.ndarray
    pts: np.ndarray
    others: list  # per index: list of runs not containing it
    own: list  # per index: the run containing it
    step: float


def _proximity(curve: ProjectedCurve, N: int, radius_factor: float = 2.5) -> _Hits:
    T = curve.period
    ts = np.arange(N) * T / N
    pts = np.asarray(curve.Q(ts)).T
    emb = curve.embed(pts)
    steps = np.linalg.norm(np.diff(np.vstack([emb, emb[:1]]), axis=0), axis=1)
    r = radius_factor * steps.max()
    tree = cKDTree(emb)
    others, own = [], []
    for i, nb in enumerate(tree.query_ball_point(emb, r)):
        runs = _runs(np.asarray(nb, dtype=int), N)
        others.append([run for run in runs if not _circ_in(run, i)])
        own.append(next((run for run in runs if _circ_in(run, i)), np.array([i])))
    return _Hits(ts, pts, others, own, float(steps.max()))


def _degenerate_times(curve: ProjectedCurve, N: int, thresh: float) -> list[float]:
    T = curve.period
    ts = np.arange(N + 2) * T / N - T / N
    v = np.asarray(curve.dQ(ts))
    s2 = np.sum(v * v, axis=0)
    fun = lambda t: float(np.sum(np.asarray(curve.dQ(t)) ** 2))  # noqa: E731
    dfun = lambda t: float(2 * np.asarray(curve.dQ(t)) @ np.asarray(curve.ddQ(t)))  # noqa: E731
    out = []
    for i in range(1, N + 1):
        if s2[i] <= s2[i - 1] and s2[i] < s2[i + 1]:
            t = _refine_min(fun, dfun, ts[i - 1], ts[i + 1])
            if np.sqrt(fun(t)) <= thresh:
                tm = float(np.mod(t, T))
                if not any(abs((tm - o + T / 2) % T - T / 2) < 1e-9 * T for o in out):
                    out.append(tm)
    return sorted(out)


def _pair_newton(curve, s, r, maxiter=40):
    """Solve ``Q(s) = Q(r)`` in least squares from (s, r)."""
    for _ in range(maxiter):
        F = curve.delta(curve.Q(s), curve.Q(r))
        Jm = np.c_[curve.dQ(s), -np.asarray(curve.dQ(r))]
        step = np.linalg.lstsq(Jm, -F, rcond=None)[0]
        s, r = s + step[0], r + step[1]
        if np.linalg.norm(step) < 1e-14 * curve.period:
            break
    return s, r, float(np.linalg.norm(curve.delta(curve.Q(s), curve.Q(r))))


def _triple_newton(curve, s1, s2, s3, maxiter=40):
    s = np.array([s1, s2, s3], dtype=float)
    for _ in range(maxiter):
        Q = [np.asarray(curve.Q(t)) for t in s]
        dQ = [np.asarray(curve.dQ(t)) for t in s]
        F = np.r_[curve.delta(Q[0], Q[1]), curve.delta(Q[1], Q[2])]
        n = Q[0].size
        Jm = np.zeros((2 * n, 3))
        Jm[:n, 0], Jm[:n, 1] = dQ[0], -dQ[1]
        Jm[n:, 1], Jm[n:, 2] = dQ[1], -dQ[2]
        step = np.linalg.lstsq(Jm, -F, rcond=None)[0]
        s = s + step
        if np.linalg.norm(step) < 1e-14 * curve.period:
            break
    Q = [np.asarray(curve.Q(t)) for t in s]
    res = float(np.linalg.norm(np.r_[curve.delta(Q[0], Q[1]), curve.delta(Q[1], Q[2])]))
    return np.mod(s, curve.period), res, Q[0]


def _tdist(a, b, T):
    return abs((a - b + T / 2) % T - T / 2)


def _self_intersections(curve: ProjectedCurve, hits: _Hits, tol_res: float = 1e-9):
    T = curve.period
    found: list[tuple[float, float]] = []
    for i, runs in enumerate(hits.others):
        for run in runs:
            j = run[np.argmin(np.linalg.norm(hits.pts[run] - hits.pts[i], axis=1))]
            s, r, res = _pair_newton(curve, hits.times[i], hits.times[j])
            if res > tol_res:
                continue
            s, r = sorted((float(np.mod(s, T)), float(np.mod(r, T))))
            if _tdist(s, r, T) < 1e-6 * T:
                continue
            same = lambda a, b: (_tdist(s, a, T) < 1e-7 * T and _tdist(r, b, T) < 1e-7 * T) or (  # noqa: E731
                _tdist(s, b, T) < 1e-7 * T and _tdist(r, a, T) < 1e-7 * T)
            if not any(same(a, b) for a, b in found):
                found.append((s, r))
    return sorted(found)


def classify_orbit(orbit, tol: Tolerances = DEFAULT, min_neat_run: int = 5,
                   degenerate_speed: float = 1e-6) -> OrbitClassification:
    """Decide Neat / RoundTrip from the projected curve, or report Inconclusive."""
    curve = orbit if isinstance(orbit, ProjectedCurve) else ProjectedCurve.from_orbit(orbit)
    N = tol.samples_per_period
    T = curve.period
    deg = _degenerate_times(curve, N, degenerate_speed)
    hits = _proximity(curve, N)
    free = np.array([len(o) == 0 for o in hits.others])
    # a sample whose own neighbourhood run folds over a turning point is not neat
    deg_idx = [int(round(nu / T * N)) % N for nu in deg]
    folded = np.array([any(_circ_in(run, k) for k in deg_idx) for run in hits.own])
    good = free & ~folded
    # longest circular stretch of neat samples
    best, best_start, cur, cur_start = 0, 0, 0, 0
    for i in range(2 * N):
        if good[i % N]:
            if cur == 0:
                cur_start = i
            cur += 1
            if cur > best:
                best, best_start = min(cur, N), cur_start
        else:
            cur = 0
    diag = {"samples": N, "neat_run": best, "step": hits.step}
    if best >= min_neat_run:
        inter = _self_intersections(curve, hits)
        a = hits.times[best_start % N]
        b = a + (best - 1) * T / N
        return OrbitClassification(OrbitKind.NEAT, tuple(deg), (), tuple(inter), (float(a), float(b)),
                                   diag)
    if len(deg) == 2 and isinstance(orbit, PeriodicOrbit):
        try:
            sig = time_symmetry_sigma(orbit, tol, degenerate_times=deg)
        except ClassificationError as exc:
            diag["sigma_error"] = str(exc)
        else:
            grid = np.linspace(deg[0], deg[0] + T, 201)[:-1]
            samples = tuple((float(np.mod(t, T)), float(sig(t))) for t in grid)
            diag.update(sig.diagnostics)
            return OrbitClassification(OrbitKind.ROUND_TRIP, tuple(deg), samples, (), None, diag)
    diag["degenerate_count"] = len(deg)
    return OrbitClassification(OrbitKind.INCONCLUSIVE, tuple(deg), (), (), None, diag)


# ---------------------------------------------------------------------------
# time symmetry


@dataclass(frozen=True)
class TimeSymmetry:
    """Orientation-reversing involution of R/TZ fixing the two turning points."""

    nu0: float
    nu1: float
    period: float
    _sol: object = field(repr=False)
    _rate: Callable = field(repr=False)
    diagnostics: dict = field(default_factory=dict)

    def __call__(self, t):
        T = self.period
        tt = self.nu0 + np.mod(np.asarray(t, dtype=float) - self.nu0, T)
        return np.mod(self._sol(tt)[0], T)

    def derivative(self, t) -> float:
        return float(self._rate(float(t)))


def time_symmetry_sigma(orbit: PeriodicOrbit, tol: Tolerances = DEFAULT,
                        degenerate_times: Sequence[float] | None = None,
                        check_points: int = 200, match_tol: float = 1e-6) -> TimeSymmetry:
    """Integrate ``sigma' = -1 / scale(theta(t))`` from ``sigma(nu0) = nu0``.

    Along the retraced branch the symmetric point is ``theta(sigma(t))``; its
    fiber velocity is ``-scale(theta(t))`` times that at ``theta(t)`` while the
    projections coincide, which fixes the rate to the reciprocal scale.
    """
    H, u, T = orbit.H, orbit.u, orbit.period
    if degenerate_times is None:
        cls = classify_orbit(orbit, tol)
        if cls.kind is not OrbitKind.ROUND_TRIP:
            raise ClassificationError(f"orbit is {cls.kind.value}, not a round trip")
        degenerate_times = cls.degenerate_times
    if len(degenerate_times) != 2:
        raise ClassificationError(f"expected 2 turning points, found {len(degenerate_times)}")
    nu0, nu1 = sorted(float(v) for v in degenerate_times)

    def rate(t):
        return -1.0 / apply_symmetry(H, u, orbit.state(t), tol).scale

    sol = solve_ivp(lambda t, y: [rate(t)], (nu0, nu0 + T), [nu0], method="DOP853",
                    dense_output=True, rtol=1e-11, atol=1e-12)
    if sol.status != 0:
        raise ClassificationError(f"sigma integration failed: {sol.message}")
    sig = TimeSymmetry(nu0, nu1, T, sol.sol, rate)
    curve = ProjectedCurve.from_orbit(orbit)
    grid = np.linspace(nu0, nu0 + T, check_points + 1)[:-1]
    match = max(float(np.linalg.norm(curve.delta(curve.Q(float(sig(t))), curve.Q(t))))
                for t in grid)
    inv = max(_tdist(float(sig(float(sig(t)))), np.mod(t, T), T) for t in grid)
    fix1 = _tdist(float(sig(nu1)), nu1, T)
    total = float(sol.sol(nu0 + T)[0] - nu0)  # sigma wraps once backwards: -T
    h = 1e-4 * T
    dsig = [(((float(sig(nu + h)) - float(sig(nu - h))) + T / 2) % T - T / 2) / (2 * h)
            for nu in (nu0, nu1)]
    speeds = [float(np.linalg.norm(H.grad(*split(orbit.state(nu)))[1])) for nu in (nu0, nu1)]
    diag = {"match_residual": match, "involution_residual": inv, "fixed_point_residual": fix1,
            "wrap": total, "sigma_prime": tuple(dsig), "turning_speeds": tuple(speeds)}
    object.__setattr__(sig, "diagnostics", diag)
    if match > match_tol or fix1 > match_tol * max(1.0, T) or abs(total + T) > 1e-6 * T:
        raise ClassificationError(f"round-trip structure inconsistent: {diag}")
    return sig


# ---------------------------------------------------------------------------
# multiple points


@dataclass(frozen=True)
class MultipleIntersections:
    count: int
    points: tuple[np.ndarray, ...]
    times: tuple[tuple[float, float, float], ...]
    inconclusive: bool = False
    unresolved_clusters: int = 0

    def __int__(self) -> int:
        return self.count


def count_multiple_intersections(orbit, tol: Tolerances = DEFAULT,
                                 res_tol: float = 1e-9) -> MultipleIntersections:
    """Configuration points visited at three or more distinct times."""
    curve = orbit if isinstance(orbit, ProjectedCurve) else ProjectedCurve.from_orbit(orbit)
    N = tol.samples_per_period
    T = curve.period
    hits = _proximity(curve, N)
    pts: list[np.ndarray] = []
    times: list[tuple[float, float, float]] = []
    unresolved = 0
    for i, runs in enumerate(hits.others):
        if len(runs) < 2:
            continue
        js = [run[np.argmin(np.linalg.norm(hits.pts[run] - hits.pts[i], axis=1))] for run in runs[:2]]
        s, res, P = _triple_newton(curve, hits.times[i], hits.times[js[0]], hits.times[js[1]])
        distinct = min(_tdist(s[0], s[1], T), _tdist(s[1], s[2], T), _tdist(s[0], s[2], T)) > 1e-6 * T
        if res > res_tol or not distinct:
            unresolved += 1
            continue
        if not any(np.linalg.norm(curve.delta(P, o)) < 1e-6 for o in pts):
            pts.append(P)
            times.append(tuple(sorted(float(v) for v in s)))
    # samples flagged only because a retraced branch sits next to itself are not
    # genuine ambiguities; only flag when nothing resolved nearby
    inconclusive = unresolved > 0 and not pts and _mostly_retraced(hits) is False
    return MultipleIntersections(len(pts), tuple(pts), tuple(times), inconclusive, unresolved)


def _mostly_retraced(hits: _Hits) -> bool:
    return sum(1 for o in hits.others if len(o) >= 1) > 0.5 * len(hits.others)
