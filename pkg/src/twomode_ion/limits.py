"""Time windows in which the resonant two-mode Hamiltonian is trustworthy.

Saturation times are reported raw; the "much less than" comparisons are made
by :func:`timescale_table` with an explicit margin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .hamiltonian import raman_coefficient
from .laser_config import RamanPairConfig, TargetInteraction, TrapConfig, spontaneous_timescale

__all__ = [
    "StateBelowSideband",
    "ZeroCoupling",
    "ValidityReport",
    "TIME_MARGIN",
    "off_resonant_bounds",
    "rotation_time",
    "characteristic_state",
    "timescale_table",
]

TIME_MARGIN = 10.0


class StateBelowSideband(ValueError):
    pass


class ZeroCoupling(ValueError):
    pass


def off_resonant_bounds(M, N, k_a, k_b, g00, eta12, eta23, nu_a, nu_b) -> tuple[float, float]:
    """Times at which the strongest off-resonant a- and b-sideband terms stop being negligible.

    ``M`` and ``N`` are the highest occupations of modes a and b that the
    dynamics may reach.
    """
    if M < k_a or N < k_b:
        raise StateBelowSideband(f"state ({M}, {N}) lies below the ({k_a}, {k_b}) sideband")
    if g00 == 0:
        raise ZeroCoupling("g00 must be non-zero")
    g2 = abs(g00) ** 2
    fm, fn = math.factorial(M), math.factorial(N)
    weight_a = fm * fn / (math.factorial(M - k_a + 1) * math.factorial(N - k_b))
    weight_b = fm * fn / (math.factorial(M - k_a) * math.factorial(N - k_b + 1))
    t_a = nu_a / (g2 * weight_a * (k_a / eta12) ** 2)
    t_b = nu_b / (g2 * weight_b * (k_b / eta23) ** 2)
    return t_a, t_b


def rotation_time(g: complex, theta: float) -> float:
    """Time to rotate the two modes by ``theta`` at coupling ``g``."""
    if g == 0:
        raise ZeroCoupling("rotation needs a non-zero coupling")
    return theta / abs(g)


def characteristic_state(alpha_a: complex, alpha_b: complex | None = None) -> tuple[int, int]:
    """Occupations three standard deviations above the mean of each coherent amplitude."""
    alpha_b = alpha_a if alpha_b is None else alpha_b
    return tuple(math.ceil(abs(a) ** 2 + 3 * abs(a)) for a in (alpha_a, alpha_b))


@dataclass(frozen=True)
class ValidityReport:
    t_offres_a: float
    t_offres_b: float
    gamma_ratio: float
    t_rot: float
    t_spont: float
    characteristic_state: tuple[int, int]
    g00: float
    margin: float = TIME_MARGIN
    flags: tuple[str, ...] = field(default=())

    @property
    def ok(self) -> bool:
        return not self.flags

    def as_dict(self) -> dict:
        return {
            "t_offres_a": self.t_offres_a,
            "t_offres_b": self.t_offres_b,
            "gamma_ratio": self.gamma_ratio,
            "t_rot": self.t_rot,
            "t_rot_gt": self.t_rot * self.g00,
            "t_spont": self.t_spont,
            "characteristic_state": list(self.characteristic_state),
            "g00": self.g00,
            "margin": self.margin,
            "flags": list(self.flags),
        }


def timescale_table(
    trap: TrapConfig,
    target: TargetInteraction,
    g13: complex,
    eta12: float,
    eta23: float,
    *,
    alpha: complex = 1.0,
    theta: float = math.pi / 2,
    pair: RamanPairConfig | None = None,
    margin: float = TIME_MARGIN,
) -> ValidityReport:
    """Compare rotation, spontaneous-emission and off-resonant timescales.

    Only ``t_rot >= t_spont / margin`` raises a flag. The off-resonant
    saturation times are reported for inspection. Without ``pair`` the
    spontaneous-emission time is infinite.
    """
    g00 = abs(raman_coefficient(target.k_a, 0, 0, target.k_b, g13, eta12, eta23))
    t_rot = rotation_time(g00, theta)
    t_spont = math.inf if pair is None else spontaneous_timescale(pair)
    M, N = characteristic_state(alpha)
    M, N = max(M, target.k_a), max(N, target.k_b)
    t_a, t_b = off_resonant_bounds(M, N, target.k_a, target.k_b, g00, eta12, eta23,
                                   trap.nu_a, trap.nu_b)
    flags = []
    if t_rot >= t_spont / margin:
        flags.append("t_rot_vs_t_spont")
    return ValidityReport(t_a, t_b, trap.nu_b / abs(g13), t_rot, t_spont, (M, N), g00,
                          margin, tuple(flags))
