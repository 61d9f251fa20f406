import numpy as np
import pytest

from roundtrip import curves
from roundtrip.errors import ClassificationError, PeriodCollapseError
from roundtrip.hamsys import GaussianBump, Mechanical, QuadraticPotential, ZeroPotential, flow
from roundtrip.orbits import (OrbitKind, ProjectedCurve, chord_transversality, classify_orbit,
                              count_multiple_intersections, find_chords, find_periodic_orbit,
                              orbit_from_known_period, refine_chord, time_symmetry_sigma)
from roundtrip.systems import build_system, harmonic_seed, recommended_seed
from roundtrip.symmetry import apply_symmetry

Z1, Z2 = ZeroPotential(1), ZeroPotential(2)


def harmonic1():
    return Mechanical(QuadraticPotential(np.eye(1)), energy=0.5)


def test_harmonic_period():
    o = find_periodic_orbit(harmonic1(), Z1, [1.0, 0.0], 6.0)
    assert abs(o.period - 2 * np.pi) <= 1e-8
    assert o.closure_residual <= 1e-8 and o.minimal


def test_equilibrium_seed_collapses():
    with pytest.raises(PeriodCollapseError):
        find_periodic_orbit(Mechanical(QuadraticPotential(np.eye(1))), Z1, [0.0, 0.0], 6.0)


def test_divisor_scan_finds_minimal_period():
    o = find_periodic_orbit(harmonic1(), Z1, [1.0, 0.0], 4 * np.pi)
    assert abs(o.period - 2 * np.pi) <= 1e-8


def test_double_well_orbit_from_chord(double_well_orbit):
    H, u, orbit = double_well_orbit
    chords = find_chords(H, u, 0.6 * orbit.period, [orbit.base_point.q])
    assert chords
    o = find_periodic_orbit(H, u, chords[0].start.x, 2 * chords[0].duration)
    assert o.closure_residual <= 1e-8
    assert abs(o.period - orbit.period) <= 1e-8


def test_chord_is_half_libration():
    H, u = build_system("double_well", {"coupling": 0.0})
    x0, T = recommended_seed("double_well", {"coupling": 0.0})
    chords = find_chords(H, u, 1.1 * T, [x0[:2]])
    first = chords[0]
    assert abs(first.duration - T / 2) <= 1e-6
    assert first.minimal and first.transverse
    # mechanical: the end is a rest point
    assert np.allclose(first.end.p_star, 0, atol=1e-9)
    assert abs(H.value(first.start.q, first.start.p_star) + u.value(first.start.q)) <= 1e-9
    # the full period is a non-minimal chord
    assert any(abs(c.duration - T) < 1e-6 and not c.minimal for c in chords)
    assert find_chords(H, u, 0.3 * T, [x0[:2]]) == []


def test_harmonic_chord_transverse():
    H, u = build_system("harmonic")
    x0, T = harmonic_seed()
    chords = find_chords(H, u, 0.6 * T, [x0[:2]])
    ok, smin = chord_transversality(H, u, chords[0])
    assert ok and smin > 0.1


def test_degenerate_toy_and_bump_restores_transversality():
    H = Mechanical(QuadraticPotential(np.diag([1.0, 0.0])), energy=0.5)
    chords = find_chords(H, Z2, 3.5, [[1.0, 0.0]])
    assert chords and not chords[0].transverse
    bump = GaussianBump([0.0, 0.0], 0.5, 0.05)
    fixed = find_chords(H, Z2.plus(bump, 1.0), 3.5, [[1.0, 0.0]])
    assert fixed and fixed[0].transverse


def test_refine_chord_small_bump(double_well_orbit):
    H, u, orbit = double_well_orbit
    c = find_chords(H, u, 0.6 * orbit.period, [orbit.base_point.q])[0]
    c2 = refine_chord(H, u.plus(GaussianBump([0.5, 0.2], 0.4, 1.0), 1e-4), c)
    assert 0 < np.linalg.norm(c2.as_vector() - c.as_vector()) < 1e-2


def test_classify_round_trip(double_well_orbit):
    H, u, orbit = double_well_orbit
    cls = classify_orbit(orbit)
    assert cls.kind is OrbitKind.ROUND_TRIP
    nu0, nu1 = cls.degenerate_times
    assert abs(nu1 - nu0 - orbit.period / 2) <= 1e-6
    assert cls.sigma_samples


def test_sigma_properties(double_well_orbit):
    H, u, orbit = double_well_orbit
    T = orbit.period
    sig = time_symmetry_sigma(orbit)
    ts = np.linspace(0, T, 50, endpoint=False)
    # reversible system with nu0 = 0: sigma(t) = -t mod T
    assert abs(sig.nu0) < 1e-9
    err = np.abs(((np.array([sig(t) for t in ts]) + ts + T / 2) % T) - T / 2)
    assert np.max(err) <= 1e-6
    inv = [abs(((sig(float(sig(t))) - t + T / 2) % T) - T / 2) for t in ts]
    assert max(inv) <= 1e-6
    assert all(abs(v + 1) <= 1e-4 for v in sig.diagnostics["sigma_prime"])


def test_sigma_requires_round_trip(magnetic_orbit):
    with pytest.raises(ClassificationError):
        time_symmetry_sigma(magnetic_orbit[2])


def test_non_symmetric_round_trip(cosh_orbit):
    H, u, orbit = cosh_orbit
    cls = classify_orbit(orbit)
    assert cls.kind is OrbitKind.ROUND_TRIP
    nu0, nu1 = cls.degenerate_times
    # without momentum reversal the two halves take different times
    assert abs(nu1 - nu0 - orbit.period / 2) > 1e-2
    assert cls.diagnostics["match_residual"] <= 1e-6


def test_magnetic_circle_neat(magnetic_orbit):
    cls = classify_orbit(magnetic_orbit[2])
    assert cls.kind is OrbitKind.NEAT and not cls.self_intersection_times
    assert count_multiple_intersections(magnetic_orbit[2]).count == 0


def test_figure_eight_orbit():
    H, u = build_system("harmonic", {"omegas": [1.0, 2.0], "energy": 2.5})
    orbit = orbit_from_known_period(H, u, [0.0, 0.0, 1.0, 2.0], 2 * np.pi)
    cls = classify_orbit(orbit)
    assert cls.kind is OrbitKind.NEAT and len(cls.self_intersection_times) == 1
    s, r = cls.self_intersection_times[0]
    assert np.allclose(orbit.state(s)[:2], orbit.state(r)[:2], atol=1e-8)


def test_libration_has_no_multiple_points(double_well_orbit):
    assert count_multiple_intersections(double_well_orbit[2]).count == 0


@pytest.mark.parametrize("make, crossings, triples", [
    (curves.ellipse, 0, 0), (curves.figure_eight, 1, 0), (curves.trefoil, 3, 0),
    (curves.three_petal_rose, 3, 1)])
def test_synthetic_curves(make, crossings, triples):
    c = make()
    cls = classify_orbit(c)
    assert cls.kind is OrbitKind.NEAT
    assert len(cls.self_intersection_times) == crossings
    assert count_multiple_intersections(c).count == triples


def test_three_hub_spline_has_three_triple_points():
    m = count_multiple_intersections(curves.three_hub_spline())
    assert m.count == 3
    hubs = curves.three_hub_waypoints()[::6]
    for P in m.points:
        assert min(np.linalg.norm(P - h) for h in hubs) < 1e-8


def test_bare_retraced_curve_is_inconclusive():
    cls = classify_orbit(curves.retraced_arc())
    assert cls.kind is OrbitKind.INCONCLUSIVE and len(cls.degenerate_times) == 2


def test_pendulum_on_circle():
    H, u = build_system("pendulum")
    x0, T = recommended_seed("pendulum")
    o = find_periodic_orbit(H, u, x0, T)
    assert abs(o.period - T) < 1e-8
    assert classify_orbit(o).kind is OrbitKind.ROUND_TRIP


def test_projected_curve_periodic_delta():
    c = ProjectedCurve(lambda t: t, lambda t: 1, lambda t: 0, 1.0, np.array([2 * np.pi]))
    assert np.allclose(c.delta(np.array([2 * np.pi - 0.1]), np.array([0.1])), [-0.2])


def test_flow_helper_consistency(double_well_orbit):
    H, u, orbit = double_well_orbit
    seg = flow(H, u, orbit.base_point.x, orbit.period)
    assert np.allclose(seg(orbit.period), orbit.base_point.x, atol=1e-8)


def test_sigma_rate_is_reciprocal_scale(cosh_orbit):
    # the rate that keeps Q(sigma(t)) = Q(t) is -1/scale, not -scale
    H, u, orbit = cosh_orbit
    sig = time_symmetry_sigma(orbit)
    t, h = 0.3 * orbit.period, 1e-5
    fd = (sig(t + h) - sig(t - h)) / (2 * h)
    scale = apply_symmetry(H, u, orbit.state(t)).scale
    assert abs(scale - 1.0) > 0.05
    assert abs(fd + 1.0 / scale) <= 1e-6
    assert abs(fd + scale) > 1e-2
    assert np.linalg.norm(orbit.state(float(sig(t)))[:2] - orbit.state(t)[:2]) <= 1e-6
