"""Numerical thresholds shared by every module.

One :class:`Tolerances` instance carries all knobs; functions take an explicit
value when one is passed and fall back to :data:`DEFAULT` otherwise.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace


@dataclass(frozen=True)
class Tolerances:
    # matrix algebra
    symplectic_tol: float = 1e-9
    gap_tol: float = 1e-7
    root_tol: float = 1e-8
    k_max: int = 12
    # integration
    rtol: float = 1e-12
    atol: float = 1e-12
    energy_drift_tol: float = 1e-8
    # nonlinear solves
    newton_tol: float = 1e-10
    newton_maxiter: int = 50
    # fiber geometry
    gamma_tol: float = 1e-6
    gamma_event_tol: float = 1e-10
    velocity_floor: float = 1e-8
    transv_tol: float = 1e-6
    # orbit classification
    samples_per_period: int = 2000
    k_div: int = 6

    def __post_init__(self) -> None:
        for f in fields(self):
            if getattr(self, f.name) <= 0:
                raise ValueError(f"tolerance {f.name} must be positive")

    def with_(self, **changes) -> "Tolerances":
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict | None) -> "Tolerances":
        if not data:
            return cls()
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"unknown tolerance keys: {', '.join(unknown)}")
        return cls(**data)


DEFAULT = Tolerances()
