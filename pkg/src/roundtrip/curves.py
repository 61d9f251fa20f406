"""Synthetic closed configuration curves with known crossing structure.

These feed :func:`roundtrip.orbits.classify_orbit` and
:func:`roundtrip.orbits.count_multiple_intersections` directly, without a
Hamiltonian behind them.
"""
from __future__ import annotations

import numpy as np
from scipy.interpolate import CubicSpline

from .orbits import ProjectedCurve

TWO_PI = 2.0 * np.pi


def _trig_curve(cx, cy, period: float = TWO_PI) -> ProjectedCurve:
    """Curve with coordinates ``sum a_k cos(k w t) + b_k sin(k w t)`` for (k, a, b) triples."""
    w = TWO_PI / period

    def coord(terms, t, n):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for k, a, b in terms:
            kw = k * w
            ph = kw * t + n * np.pi / 2
            out = out + kw**n * (a * np.cos(ph) + b * np.sin(ph))
        return out

    def make(n):
        return lambda t: np.array([coord(cx, t, n), coord(cy, t, n)])

    return ProjectedCurve(make(0), make(1), make(2), period)


def trefoil() -> ProjectedCurve:
    """``(sin t + 2 sin 2t, cos t - 2 cos 2t)``: three transverse double points, no triple point."""
    return _trig_curve([(1, 0.0, 1.0), (2, 0.0, 2.0)], [(1, 1.0, 0.0), (2, -2.0, 0.0)])


def figure_eight() -> ProjectedCurve:
    """Lissajous ``(sin t, sin 2t)``: one transverse double point at the origin."""
    return _trig_curve([(1, 0.0, 1.0)], [(2, 0.0, 1.0)])


def ellipse(a: float = 2.0, b: float = 1.0) -> ProjectedCurve:
    """Embedded curve."""
    return _trig_curve([(1, a, 0.0)], [(1, 0.0, b)])


def three_petal_rose() -> ProjectedCurve:
    """``r = cos 3 theta`` over one period ``pi``: the origin is a triple point."""
    # x = cos(3u) cos(u) = (cos 4u + cos 2u) / 2 with u = t / 2 so the period is 2 pi
    return _trig_curve([(2, 0.5, 0.0), (1, 0.5, 0.0)], [(2, 0.0, 0.5), (1, 0.0, -0.5)])


def retraced_arc() -> ProjectedCurve:
    """``(cos t, cos(2t) / 4)`` runs back and forth along a parabola; turning times 0 and pi."""
    return _trig_curve([(1, 1.0, 0.0)], [(2, 0.25, 0.0)])


def spline_curve(waypoints, period: float = TWO_PI) -> ProjectedCurve:
    """Periodic cubic spline through the waypoints at uniform times."""
    P = np.asarray(waypoints, dtype=float)
    P = np.vstack([P, P[:1]])
    t = np.linspace(0.0, period, P.shape[0])
    cs = CubicSpline(t, P, bc_type="periodic")
    d1, d2 = cs.derivative(1), cs.derivative(2)

    def wrap(f):
        return lambda s: f(np.mod(s, period)).T
    return ProjectedCurve(wrap(cs), wrap(d1), wrap(d2), period)


def three_hub_waypoints(petal: float = 1.0) -> np.ndarray:
    """Route visiting each of three hubs three times, with a petal loop between visits."""
    hubs = [np.array([0.0, 0.0]), np.array([6.0, 0.0]), np.array([3.0, 5.0])]
    centre = np.mean(hubs, axis=0)
    pts = []
    for h in hubs:
        # petals point away from the centre, spread over a half-plane
        base = np.arctan2(*(h - centre)[::-1])
        for ang in (base - 1.0, base, base + 1.0):
            pts.append(h)
            pts.append(h + petal * np.array([np.cos(ang), np.sin(ang)]))
    return np.array(pts)


def three_hub_spline() -> ProjectedCurve:
    """Spline with exactly three triple points (the hubs)."""
    return spline_curve(three_hub_waypoints())
