"""Laser and trap parameters for a single Raman pair and its symmetric partner.

All frequencies are angular (rad/s). Conversion from cyclic Hz happens at the
configuration boundary through :func:`hz`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.constants import hbar

__all__ = [
    "TrapConfig",
    "RamanPairConfig",
    "DerivedCouplings",
    "TargetInteraction",
    "AdiabaticityReport",
    "ZeroDetuning",
    "ADIABATIC_MARGIN",
    "hz",
    "derive_couplings",
    "equal_dipole_coupling",
    "sideband_detuning",
    "symmetric_pair",
    "adiabaticity_check",
    "spontaneous_timescale",
]

ADIABATIC_MARGIN = 20.0


class ZeroDetuning(ValueError):
    """A single-photon detuning vanished; the excited level cannot be eliminated."""


def hz(cyclic: float) -> float:
    """Cyclic frequency in Hz to angular frequency in rad/s."""
    return 2 * math.pi * cyclic


@dataclass(frozen=True)
class TrapConfig:
    nu_a: float
    nu_b: float
    mass: float | None = None

    def __post_init__(self):
        if not (self.nu_a > 0 and self.nu_b > 0):
            raise ValueError("trap frequencies must be positive")
        if self.mass is not None and not self.mass > 0:
            raise ValueError("ion mass must be positive")

    def _width(self, nu: float) -> float:
        if self.mass is None:
            raise ValueError("ground-state widths need the ion mass")
        return math.sqrt(hbar / (2 * nu * self.mass))

    @property
    def dx0(self) -> float:
        """Ground-state width along x, sqrt(hbar / 2 nu_a m)."""
        return self._width(self.nu_a)

    @property
    def dy0(self) -> float:
        return self._width(self.nu_b)

    @property
    def ratio(self) -> float:
        return self.nu_a / self.nu_b


@dataclass(frozen=True)
class RamanPairConfig:
    """One Raman pair.

    ``k12``/``k23`` are the signed projections of the driving wave vector on
    x and y. For almost counter-propagating beams pass the projections of the
    summed wave vector; only the final projections are used here.
    """

    g12: complex
    g23: complex
    delta12: float
    delta23: float
    k12: float = 0.0
    k23: float = 0.0
    gamma_decay: float = 0.0

    def __post_init__(self):
        if self.delta12 == 0 or self.delta23 == 0:
            raise ZeroDetuning("delta12 and delta23 must be non-zero")


@dataclass(frozen=True)
class DerivedCouplings:
    g13: complex
    omega1_shift: float
    omega3_shift: float
    eta12: float
    eta23: float
    delta13: float = 0.0


@dataclass(frozen=True)
class TargetInteraction:
    k_a: int
    k_b: int
    coupling_phase: float = 0.0

    def __post_init__(self):
        if self.k_a < 1 or self.k_b < 1:
            raise ValueError("k_a and k_b must be positive integers")


@dataclass(frozen=True)
class AdiabaticityReport:
    ok: bool
    ratio: float
    margin: float
    margins: dict


def derive_couplings(
    pair: RamanPairConfig,
    trap: TrapConfig | None = None,
    *,
    eta12: float | None = None,
    eta23: float | None = None,
) -> DerivedCouplings:
    """Raman coupling, Stark shifts and Lamb-Dicke parameters of one pair.

    Lamb-Dicke parameters come from the wavenumbers and ``trap`` unless given
    directly through ``eta12``/``eta23``.
    """
    g13 = complex(pair.g12) * np.conj(pair.g23) * (1 / pair.delta12 + 1 / pair.delta23)
    shift1 = -2 * abs(pair.g12) ** 2 / pair.delta12
    shift3 = -2 * abs(pair.g23) ** 2 / pair.delta23
    if eta12 is None or eta23 is None:
        if trap is None:
            raise ValueError("need a trap or explicit Lamb-Dicke parameters")
        eta12 = trap.dx0 * pair.k12 if eta12 is None else eta12
        eta23 = trap.dy0 * pair.k23 if eta23 is None else eta23
    return DerivedCouplings(complex(g13), shift1, shift3, float(eta12), float(eta23))


def equal_dipole_coupling(g13_abs: float, delta12: float, delta23: float) -> float:
    """|g12| = |g23| that produces Raman coupling ``g13_abs`` at the given detunings."""
    factor = abs(1 / delta12 + 1 / delta23)
    if factor == 0:
        raise ZeroDetuning("detunings cancel; no Raman coupling possible")
    return math.sqrt(g13_abs / factor)


def sideband_detuning(target: TargetInteraction, trap: TrapConfig) -> float:
    """Raman detuning that puts the pair on the (k_a, k_b) red sidebands."""
    return target.k_b * trap.nu_b - target.k_a * trap.nu_a


def symmetric_pair(primary: DerivedCouplings) -> DerivedCouplings:
    """Quantities of the second pair that makes the total Hamiltonian factorize."""
    return replace(
        primary,
        delta13=-primary.delta13,
        eta12=-primary.eta12,
        eta23=-primary.eta23,
        g13=complex(np.conj(primary.g13)),
    )


def adiabaticity_check(pair: RamanPairConfig, margin: float = ADIABATIC_MARGIN) -> AdiabaticityReport:
    """Far-detuning condition min|Delta| >> |g12|, |g23|, |Delta12 - Delta23|.

    A zero detuning difference is left out of the maximum.
    """
    small = {"g12": abs(pair.g12), "g23": abs(pair.g23)}
    diff = abs(pair.delta12 - pair.delta23)
    if diff > 0:
        small["delta_diff"] = diff
    large = min(abs(pair.delta12), abs(pair.delta23))
    margins = {name: (large / val if val > 0 else math.inf) for name, val in small.items()}
    ratio = min(margins.values())
    return AdiabaticityReport(ok=ratio >= margin, ratio=ratio, margin=margin, margins=margins)


def spontaneous_timescale(pair: RamanPairConfig) -> float:
    """Time in seconds after which spontaneous emission from level 2 matters."""
    if pair.gamma_decay < 0:
        raise ValueError("gamma_decay must be non-negative")
    rate = (
        abs(pair.g12) ** 2 / pair.delta12**2 + abs(pair.g23) ** 2 / pair.delta23**2
    ) * pair.gamma_decay
    return math.inf if rate == 0 else 1 / rate
