"""Acceptance criteria, each checked at its stated tolerance and time budget.

Every test records one ``PASS``/``FAIL`` line (shown in the pytest terminal
summary, and printed directly when this file is run as a script).
"""
import time

import numpy as np
import pytest

from roundtrip.hamsys import (
    DoubleWellPotential,
    GaussianBump,
    Mechanical,
    NormalSlopeBump,
    ZeroPotential,
    check_parameter_continuity,
)
from roundtrip.linsys import (
    check_three_conditions,
    m_identity_residuals,
    projection_agreement,
    random_bump_ensemble,
    random_pair,
    violate_conformal,
    violate_conjugacy,
    violate_ratio,
)
from roundtrip.orbits import (
    OrbitKind,
    classify_orbit,
    find_chords,
    find_periodic_orbit,
    orbit_from_known_period,
    refine_chord,
    time_symmetry_sigma,
)
from roundtrip.reduced import (
    OrbitLinearization,
    build_section,
    check_reversible_orbit,
    potential_derivative_in_section,
    reduced_return_map,
    transition_map,
)
from roundtrip.symmetry import apply_symmetry, fiber_minimum, symmetry_jacobian, symmetry_jacobian_on_gamma
from roundtrip.sympmat import (
    R0,
    conjugate_involution,
    make_r_reversible,
    match_eigenvalues,
    min_pairwise_gap,
    random_symplectic,
    reversibility_residual,
    tangent_basis_A2d,
)
from roundtrip.systems import build_system, double_well_libration, recommended_seed

from conftest import ACCEPTANCE_LINES


def record(number, title, ok, budget, elapsed, detail):
    timed = elapsed < budget
    verdict = "PASS" if ok and timed else "FAIL"
    line = f"{verdict} [{number:2d}] {title}: {detail} ({elapsed:.1f} s of {budget:g} s)"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line
    assert timed, line


def orbit_of(name, params=None, known=False):
    H, u = build_system(name, params)
    x0, T = recommended_seed(name, params)
    make = orbit_from_known_period if known else find_periodic_orbit
    return H, u, make(H, u, x0, T)


def test_01_tangent_space_dimension():
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    worst = []
    for d in (1, 2, 3):
        Rs = [R0(d)] + [conjugate_involution(random_symplectic(d, rng, 0.5), R0(d)) for _ in range(5)]
        for R in Rs:
            basis = tangent_basis_A2d(R)
            rank = np.linalg.matrix_rank(np.array([X.ravel() for X in basis]))
            worst.append(len(basis) == d * (d + 1) and rank == d * (d + 1))
    record(1, "tangent space of involutions has dimension d(d+1)", all(worst), 1.0,
           time.perf_counter() - t0, f"{sum(worst)}/{len(worst)} involutions")


def test_02_reversible_simple_spectrum():
    t0 = time.perf_counter()
    rng = np.random.default_rng(202)
    good, worst_res = 0, 0.0
    for k in range(100):
        d = 1 + k % 3
        R = conjugate_involution(random_symplectic(d, rng, 0.3), R0(d))
        x = 1.0 + np.cumsum(rng.uniform(0.05, 1.0, d))
        L = make_r_reversible(R, x)
        res = reversibility_residual(R, L) / max(1.0, np.linalg.norm(L) ** 2)
        worst_res = max(worst_res, res)
        good += res <= 1e-8 and min_pairwise_gap(np.linalg.eigvals(L)) > 1e-3
    record(2, "R-reversible construction has simple spectrum", good >= 99, 5.0,
           time.perf_counter() - t0, f"{good}/100 draws good, worst scaled residual {worst_res:.1e}")


def test_03_symmetry_identities():
    t0 = time.perf_counter()
    H, u = build_system("magnetic")
    rng = np.random.default_rng(303)
    inv = energy = prod = 0.0
    for _ in range(1000):
        x = rng.uniform(-1.5, 1.5, 4)
        r = apply_symmetry(H, u, x)
        back = apply_symmetry(H, u, r.image.x)
        q, p = x[:2], x[2:]
        inv = max(inv, float(np.max(np.abs(back.image.x - x))))
        energy = max(energy, abs(H.value(q, r.image.p) - H.value(q, p)))
        prod = max(prod, abs(r.scale * back.scale - 1.0))
    jac = 0.0
    for _ in range(50):
        q = rng.uniform(-1.5, 1.5, 2)
        g = fiber_minimum(H, u, q)
        jac = max(jac, float(np.max(np.abs(symmetry_jacobian_on_gamma(H, u, q)
                                           - symmetry_jacobian(H, u, g.x, h=1e-3)))))
    ok = inv <= 1e-7 and energy <= 1e-9 and prod <= 1e-7 and jac <= 1e-4
    record(3, "symmetry identities on the magnetic system", ok, 30.0, time.perf_counter() - t0,
           f"involution {inv:.1e}, energy {energy:.1e}, scale product {prod:.1e}, Jacobian on graph {jac:.1e}")


def test_04_round_trip_certification():
    t0 = time.perf_counter()
    H, u, orbit = orbit_of("double_well", {"coupling": 0.3})
    cls = classify_orbit(orbit)
    nu0, nu1 = cls.degenerate_times
    half = abs(nu1 - nu0 - orbit.period / 2)
    sig = time_symmetry_sigma(orbit, degenerate_times=cls.degenerate_times)
    rates = [abs(sig.derivative(nu) + 1.0) for nu in (nu0, nu1)]
    _, _, mag = orbit_of("magnetic", known=True)
    mag_kind = classify_orbit(mag).kind
    ok = (cls.kind is OrbitKind.ROUND_TRIP and half <= 1e-6 and max(rates) <= 1e-4
          and mag_kind is OrbitKind.NEAT)
    record(4, "libration is a round trip, magnetic circle is neat", ok, 60.0, time.perf_counter() - t0,
           f"{cls.kind.value}, |nu1-nu0-T/2| {half:.1e}, |sigma'+1| {max(rates):.1e}, magnetic {mag_kind.value}")


LIBRATIONS = [
    {"omega": 1.3, "coupling": 0.0, "energy": 0.5},
    {"omega": 1.3, "coupling": 0.3, "energy": 0.5},
    {"omega": 0.9, "coupling": 0.5, "energy": 0.3},
    {"omega": 1.7, "coupling": 0.1, "energy": 0.8},
    {"omega": 1.1, "coupling": 0.4, "energy": 1.5},
]


def test_05_reversibility_identity():
    t0 = time.perf_counter()
    ident, anti = [], []
    for params in LIBRATIONS:
        H, u, orbit = orbit_of("double_well", params)
        v = check_reversible_orbit(H, u, orbit)
        ident.append(v.identity_residual)
        anti.append(max(v.antisymplectic_residuals))
    ok = max(ident) <= 1e-5 and max(anti) <= 1e-5
    record(5, "reversibility identity on five librations", ok, 120.0, time.perf_counter() - t0,
           f"worst identity {max(ident):.1e}, worst antisymplectic {max(anti):.1e}")


def test_06_anchor_invariance():
    t0 = time.perf_counter()
    cases = [orbit_of("double_well", {"coupling": 0.3}), orbit_of("magnetic", known=True),
             orbit_of("cosh_asymmetric", {"alpha": [0.6, 0.0]}),
             orbit_of("harmonic", {"omegas": [1.0, 2 ** 0.5]})]
    worst = 0.0
    for H, u, orbit in cases:
        lin = OrbitLinearization(orbit)
        eigs = [np.linalg.eigvals(reduced_return_map(H, u, orbit, f * orbit.period, lin))
                for f in (0.11, 0.37, 0.83)]
        worst = max(worst, *(match_eigenvalues(eigs[0], e) for e in eigs[1:]))
    record(6, "return-map spectrum independent of the anchor", worst <= 1e-6, 60.0,
           time.perf_counter() - t0, f"worst eigenvalue mismatch {worst:.1e} over {len(cases)} orbits")


def test_07_b_block_identity():
    t0 = time.perf_counter()
    worst, min_eig = 0.0, np.inf
    # the third path has an anisotropic mass, so the transverse fiber Hessian is 2.5
    x0, T = double_well_libration(1.3, 0.3, 0.5)
    heavy = Mechanical(DoubleWellPotential(1.3, 0.3), inv_mass=np.diag([1.0, 2.5]), energy=0.5)
    cases = [orbit_of("double_well", p) for p in LIBRATIONS[1:3]]
    cases.append((heavy, ZeroPotential(2), find_periodic_orbit(heavy, ZeroPotential(2), x0, T)))
    for H, u, orbit in cases:
        tm = transition_map(H, u, orbit, -0.1, 0.15, t_anchor=orbit.period / 4)
        worst = max(worst, float(np.max(np.abs(tm.B - tm.Hpp_star))))
        min_eig = min(min_eig, min(float(np.linalg.eigvalsh(B).min()) for B in tm.B))
    ok = worst <= 1e-6 and min_eig > 0
    record(7, "B block equals transverse fiber Hessian on straight paths", ok, 30.0,
           time.perf_counter() - t0, f"worst {worst:.1e}, smallest B eigenvalue {min_eig:.3g} over {len(cases)} paths")


def test_08_three_conditions_both_directions():
    t0 = time.perf_counter()
    rng = np.random.default_rng(808)
    T = 2.0
    agree, m_res, cond_ok = [], [], []
    viol = {"ratio": [], "conformal": [], "conjugacy": []}
    for k in range(20):
        d = 1 + k % 2
        pair, _ = random_pair(d, T, rng, n_grid=101)
        ens = random_bump_ensemble(d, T, 50, rng)
        agree.append(projection_agreement(pair, ens).discrepancy)
        cond_ok.append(check_three_conditions(pair).all_pass)
        m_res.append(max(m_identity_residuals(pair, 4)))
        if k < 4:
            for name, make in (("ratio", violate_ratio), ("conformal", violate_conformal),
                               ("conjugacy", violate_conjugacy)):
                viol[name].append(projection_agreement(make(pair.L, pair.a), ens).discrepancy)
    least_viol = {n: min(v) for n, v in viol.items()}
    ok = (max(agree) <= 1e-6 and all(cond_ok) and max(m_res) <= 1e-5
          and min(least_viol.values()) > 1e-3)
    record(8, "conjugate pairs agree, each violator disagrees", ok, 300.0, time.perf_counter() - t0,
           f"worst agreement {max(agree):.1e}, worst M_n {max(m_res):.1e}, smallest violator gap "
           + ", ".join(f"{n} {v:.2g}" for n, v in least_viol.items()))


def test_09_section_derivative_routes():
    t0 = time.perf_counter()
    H, u, orbit = orbit_of("double_well", {"coupling": 0.3})
    ta = orbit.period / 4
    xa = orbit.state(ta)
    fr = build_section(H, u, xa)
    worst = 0.0
    for center, width, amp in [(0.1, 0.08, 1.0), (0.12, 0.05, -0.5), (0.08, 0.06, 2.0)]:
        v = NormalSlopeBump(origin=xa[:2], direction=fr.e0, normal=fr.E[:, 0],
                            center=center, half_width=width, amplitude=amp)
        sd = potential_derivative_in_section(H, u, v, orbit, [0.0, 0.05, 0.1, 0.15, 0.2], ta, fr)
        worst = max(worst, sd.discrepancy)
    record(9, "ODE and finite-difference section derivatives agree", worst <= 1e-4, 60.0,
           time.perf_counter() - t0, f"worst discrepancy {worst:.1e} over 3 bumps")


def test_10_chord_persistence():
    t0 = time.perf_counter()
    H, u, orbit = orbit_of("double_well", {"coupling": 0.3})
    chord = find_chords(H, u, 0.6 * orbit.period, [orbit.base_point.q])[0]
    assert chord.minimal and chord.transverse
    rng = np.random.default_rng(1010)

    def solve(pot):
        return refine_chord(H, pot, chord).as_vector()

    Cs, all_ok, still_transverse = [], True, True
    for _ in range(10):
        v = GaussianBump(rng.uniform(-1.0, 1.0, 2) + [1.0, 0.0], rng.uniform(0.2, 0.6), rng.choice([-1.0, 1.0]))
        rep = check_parameter_continuity(solve, u, v, [1e-3, 1e-4])
        Cs.append(rep.fitted_C)
        all_ok &= rep.ok and bool(np.all(rep.displacements <= rep.fitted_C * rep.eps + 1e-12))
        still_transverse &= refine_chord(H, u.plus(v, 1e-3), chord).transverse
    ok = all_ok and still_transverse and np.all(np.isfinite(Cs))
    record(10, "transverse chord persists under small bumps", ok, 60.0, time.perf_counter() - t0,
           f"fitted C max {max(Cs):.3g} (median {np.median(Cs):.3g}), transverse after bump: {still_transverse}")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
