"""Degenerate Raman terms for a commensurate trap ratio l = nu_a / nu_b = p/q.

With the Raman detuning on the (k_a, k_b) sidebands, a term
a†^m a^mu b†^nu b^n is resonant exactly when

    mu - m = N - k_a,    nu - n = l N - k_b

for an integer N, which must be a multiple of q. N = 0 is the wanted term.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction

from .hamiltonian import raman_coefficient

__all__ = [
    "InvalidRatio",
    "DegenerateLambDicke",
    "ResonanceRecord",
    "LambDickeReport",
    "as_ratio",
    "classify_case",
    "min_trap_ratio",
    "representative_exponents",
    "default_n_range",
    "enumerate_resonances",
    "lamb_dicke_ratio_check",
    "resonance_table",
]


class InvalidRatio(ValueError):
    pass


class DegenerateLambDicke(ValueError):
    """eta = 0 leaves every coupling ratio undefined."""


@dataclass(frozen=True)
class ResonanceRecord:
    N: int
    case_label: str
    exponents: tuple[int, int, int, int]
    coupling_mag: float
    ratio_to_desired: float


@dataclass(frozen=True)
class LambDickeReport:
    threshold: float
    flagged: tuple[ResonanceRecord, ...]

    @property
    def ok(self) -> bool:
        return not self.flagged


def as_ratio(l) -> Fraction:
    """Exact positive rational trap ratio from an int, Fraction, ``"p/q"`` string or float."""
    try:
        ratio = Fraction(repr(l)) if isinstance(l, float) else Fraction(l)
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        raise InvalidRatio(f"cannot read trap ratio {l!r}") from exc
    if ratio <= 0:
        raise InvalidRatio(f"trap ratio must be positive, got {ratio}")
    return ratio


def classify_case(N: int, k_a: int, k_b: int, l) -> str:
    l = as_ratio(l)
    if N < 0:
        return "3"
    if N == 0:
        return "1"
    sub = "i" if N * l <= k_b else "ii"
    return f"2a-{sub}" if N <= k_a else f"2b-{sub}"


def min_trap_ratio(k_a: int, k_b: int) -> int:
    """Smallest integer l for which no N != 0 resonance competes at leading Lamb-Dicke order."""
    if k_a < 1 or k_b < 1:
        raise ValueError("k_a and k_b must be positive")
    return max(2 * k_b + 3, 2 * k_b + k_a)


def representative_exponents(N: int, k_a: int, k_b: int, l) -> tuple[int, int, int, int]:
    """Lowest-order (m, mu, nu, n) in resonance category ``N``."""
    l = as_ratio(l)
    shift_b = l * N - k_b
    if shift_b.denominator != 1:
        raise ValueError(f"N = {N} is not a multiple of q = {l.denominator}")
    d_a, d_b = N - k_a, int(shift_b)
    m, mu = (0, d_a) if d_a >= 0 else (-d_a, 0)
    nu, n = (d_b, 0) if d_b >= 0 else (0, -d_b)
    return m, mu, nu, n


def default_n_range(k_a: int, l) -> range:
    q = as_ratio(l).denominator
    top = max(k_a, 4) * q
    return range(-top, top + 1)


def enumerate_resonances(k_a, k_b, l, eta12, eta23, g13=1.0, n_range=None) -> list[ResonanceRecord]:
    """One record per admissible N (multiples of q inside ``n_range``), sorted by N."""
    l = as_ratio(l)
    if k_a < 1 or k_b < 1:
        raise ValueError("k_a and k_b must be positive")
    n_range = default_n_range(k_a, l) if n_range is None else n_range
    g00 = abs(raman_coefficient(k_a, 0, 0, k_b, g13, eta12, eta23))
    records = []
    for N in sorted(set(n_range)):
        if N % l.denominator:
            continue
        exps = representative_exponents(N, k_a, k_b, l)
        mag = abs(raman_coefficient(*exps, g13, eta12, eta23))
        if N == 0:
            ratio = 1.0
        else:
            ratio = mag / g00 if g00 > 0 else math.inf
        records.append(ResonanceRecord(N, classify_case(N, k_a, k_b, l), exps, mag, ratio))
    return records


def lamb_dicke_ratio_check(records, eta: float, tolerance: float = 1.0) -> LambDickeReport:
    """Flag every N != 0 record whose ratio exceeds ``tolerance * eta**2``."""
    if eta == 0:
        raise DegenerateLambDicke("eta = 0: the desired coupling vanishes")
    threshold = tolerance * eta**2
    flagged = tuple(r for r in records if r.N != 0 and r.ratio_to_desired > threshold)
    return LambDickeReport(threshold, flagged)


def resonance_table(records, report: LambDickeReport | None = None) -> str:
    """CSV with columns N, case, m, mu, nu, n, ratio, flagged."""
    flagged = set() if report is None else {r.N for r in report.flagged}
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["N", "case", "m", "mu", "nu", "n", "ratio", "flagged"])
    for r in records:
        writer.writerow([r.N, r.case_label, *r.exponents, f"{r.ratio_to_desired:.12g}",
                         int(r.N in flagged)])
    return buf.getvalue()
