"""Built-in Hamiltonian systems with parameter schemas and recommended seeds.

Every system is returned as a pair ``(H, u)`` whose zero level ``H + u = 0``
is the dynamically relevant one; the ``energy`` parameter shifts H so that
the physical energy of interest sits at zero.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import quad, solve_ivp

from .errors import ConfigError
from .hamsys import (CoshKinetic, DoubleWellPotential, Hamiltonian, Magnetic, Mechanical,
                     PendulumPotential, Potential, QuadraticPotential, ZeroPotential,
                     vector_field)


@dataclass(frozen=True)
class Param:
    name: str
    default: float | list
    description: str


@dataclass(frozen=True)
class SystemSpec:
    name: str
    description: str
    reversible: bool
    params: tuple[Param, ...]
    factory: Callable[..., tuple[Hamiltonian, Potential]] = field(repr=False)
    seed: Callable[..., tuple[np.ndarray, float]] = field(repr=False)

    def defaults(self) -> dict:
        return {p.name: p.default for p in self.params}

    def resolve(self, params: dict | None) -> dict:
        params = dict(params or {})
        unknown = sorted(set(params) - {p.name for p in self.params})
        if unknown:
            raise ConfigError(f"system '{self.name}': unknown parameters {unknown}")
        out = self.defaults()
        out.update(params)
        return out

    def schema(self) -> dict:
        return {
            "name": self.name,
            "description": self.description,
            "reversible": self.reversible,
            "params": [{"name": p.name, "default": p.default, "description": p.description}
                       for p in self.params],
        }


# ---------------------------------------------------------------------------
# factories


def double_well(omega: float = 1.3, coupling: float = 0.0, energy: float = 0.5):
    H = Mechanical(DoubleWellPotential(omega, coupling), energy=energy)
    return H, ZeroPotential(2)


def double_well_libration(omega: float = 1.3, coupling: float = 0.0, energy: float = 0.5,
                          branch: str = "right"):
    """Rest point and period of the libration along the q1 axis.

    For energy < 1 the motion stays in one well (``branch`` picks it); above
    the barrier it swings across both wells.
    """
    if energy <= 0:
        raise ConfigError("double-well libration needs energy > 0")
    root = np.sqrt(energy)
    hi = np.sqrt(1.0 + root)
    lo = np.sqrt(1.0 - root) if energy < 1 else -hi
    sign = -1.0 if (branch == "left" and energy < 1) else 1.0

    def integrand(a):
        return 1.0 / np.sqrt(max(2.0 * (energy - (a * a - 1) ** 2), 1e-300))

    # substitution-free quad handles the inverse square-root endpoints
    half, _ = quad(integrand, lo, hi, limit=200)
    x0 = np.array([sign * hi, 0.0, 0.0, 0.0])
    return x0, 2.0 * half


def magnetic(beta: float = 0.5, k: float = 1.0, energy: float = 0.5):
    V = QuadraticPotential(k * np.eye(2))
    return Magnetic(beta, V, energy=energy), ZeroPotential(2)


def magnetic_circle(beta: float = 0.5, k: float = 1.0, energy: float = 0.5, direction: int = 1):
    """Circular orbit q = rho (cos wt, sin wt) at the given energy.

    The radial force balance gives ``w^2 + 2 beta w - k = 0`` and the energy
    ``rho^2 (w^2 + k) / 2 = energy``.
    """
    disc = np.sqrt(beta * beta + k)
    w = -beta + disc if direction > 0 else -beta - disc
    rho = np.sqrt(2.0 * energy / (w * w + k))
    q = np.array([rho, 0.0])
    qdot = np.array([0.0, rho * w])
    A = beta * np.array([-q[1], q[0]])
    return np.r_[q, qdot + A], 2.0 * np.pi / abs(w)


def pendulum(energy: float = -0.5):
    H = Mechanical(PendulumPotential(), energy=energy, period=[2 * np.pi])
    return H, ZeroPotential(1)


def pendulum_seed(energy: float = -0.5):
    if not -1.0 < energy < 1.0:
        raise ConfigError("pendulum libration needs -1 < energy < 1")
    amp = np.arccos(-energy)
    half, _ = quad(lambda a: 1.0 / np.sqrt(max(2.0 * (energy + np.cos(a)), 1e-300)), -amp, amp,
                   limit=200)
    return np.array([amp, 0.0]), 2.0 * half


def harmonic(omegas=(1.0, 1.4142135623730951), energy: float = 0.5):
    w = np.asarray(omegas, dtype=float)
    V = QuadraticPotential(np.diag(w * w))
    return Mechanical(V, energy=energy), ZeroPotential(w.size)


def harmonic_seed(omegas=(1.0, 1.4142135623730951), energy: float = 0.5):
    w = np.asarray(omegas, dtype=float)
    q = np.zeros(w.size)
    q[0] = np.sqrt(2.0 * energy) / w[0]
    return np.r_[q, np.zeros(w.size)], 2.0 * np.pi / w[0]


def cosh_asymmetric(alpha=(0.3, 0.0), k: float = 1.0, energy: float = 2.5):
    a = np.asarray(alpha, dtype=float)
    V = QuadraticPotential(k * np.eye(a.size))
    return CoshKinetic(a, V, energy=energy), ZeroPotential(a.size)


def cosh_seed(alpha=(0.3, 0.0), k: float = 1.0, energy: float = 2.5):
    """Rest point on the critical graph at energy zero along the first axis."""
    a = np.asarray(alpha, dtype=float)
    pstar = np.arcsinh(-a)
    kin = float(np.sum(np.cosh(pstar)) + a @ pstar)
    if energy <= kin:
        raise ConfigError("energy below the minimum of the kinetic term")
    q = np.zeros(a.size)
    q[0] = np.sqrt(2.0 * (energy - kin) / k)
    x0 = np.r_[q, pstar]
    # the motion stays on the first axis: time the next stop of q1
    H, u = cosh_asymmetric(alpha, k, energy)
    n = a.size

    def stop(t, x):
        return np.sinh(x[n]) + a[0]

    stop.direction = 1.0
    sol = solve_ivp(lambda t, x: vector_field(H, u, x), (0.0, 100.0), x0, events=stop,
                    rtol=1e-12, atol=1e-12)
    half = float(sol.t_events[0][0])
    return x0, 2.0 * half


CATALOG: dict[str, SystemSpec] = {
    s.name: s for s in [
        SystemSpec(
            "double_well", "1/2|p|^2 + (q1^2-1)^2 + omega^2 q2^2/2 + coupling q1^2 q2^2 - energy",
            True,
            (Param("omega", 1.3, "transverse frequency"),
             Param("coupling", 0.0, "q1^2 q2^2 coupling"),
             Param("energy", 0.5, "energy of the zero level")),
            double_well, double_well_libration),
        SystemSpec(
            "magnetic", "1/2|p - beta(-q2, q1)|^2 + k|q|^2/2 - energy (not reversible)", False,
            (Param("beta", 0.5, "magnetic field strength"),
             Param("k", 1.0, "spring constant"),
             Param("energy", 0.5, "energy of the zero level")),
            magnetic, magnetic_circle),
        SystemSpec(
            "pendulum", "1/2 p^2 - cos q - energy on the circle (d = 0)", True,
            (Param("energy", -0.5, "energy of the zero level"),),
            pendulum, pendulum_seed),
        SystemSpec(
            "harmonic", "1/2|p|^2 + sum omega_i^2 q_i^2 / 2 - energy", True,
            (Param("omegas", [1.0, 1.4142135623730951], "frequencies"),
             Param("energy", 0.5, "energy of the zero level")),
            harmonic, harmonic_seed),
        SystemSpec(
            "cosh_asymmetric", "sum cosh(p_i) + alpha.p + k|q|^2/2 - energy (not reversible)", False,
            (Param("alpha", [0.3, 0.0], "linear momentum term"),
             Param("k", 1.0, "spring constant"),
             Param("energy", 2.5, "energy of the zero level")),
            cosh_asymmetric, cosh_seed),
    ]
}


def list_builtin_systems() -> list[dict]:
    return [CATALOG[k].schema() for k in sorted(CATALOG)]


def _lookup(name: str) -> SystemSpec:
    try:
        return CATALOG[name]
    except KeyError:
        raise ConfigError(f"unknown system '{name}'; choose from {sorted(CATALOG)}") from None


def build_system(name: str, params: dict | None = None) -> tuple[Hamiltonian, Potential]:
    spec = _lookup(name)
    return spec.factory(**spec.resolve(params))


def recommended_seed(name: str, params: dict | None = None) -> tuple[np.ndarray, float]:
    spec = _lookup(name)
    return spec.seed(**spec.resolve(params))
