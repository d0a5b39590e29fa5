"""Motional Hamiltonians generated by the symmetric Raman scheme.

A :class:`HamiltonianModel` is a list of oscillating normal-ordered monomials

    H(t) = sum_k coeff_k a†^m a^mu b†^nu b^n exp(i osc_freq_k t) + h.c.

with hbar = 1, so coefficients and frequencies are in rad/s.
"""

from __future__ import annotations

import cmath
import csv
import io
import math
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from itertools import product

import numpy as np
import scipy.linalg
import scipy.sparse

from .fock import FockBasis, OperatorMatrix, monomial_op, single_mode_monomial
from .laser_config import (
    DerivedCouplings,
    RamanPairConfig,
    TargetInteraction,
    TrapConfig,
    derive_couplings,
)

__all__ = [
    "TimeDependentTerm",
    "HamiltonianModel",
    "VibronicModel",
    "CapTooSmall",
    "DimensionTooLarge",
    "DEFAULT_ORDER_CAP",
    "DEFAULT_FLOOR_FACTOR",
    "raman_coefficient",
    "term_frequency",
    "required_g13_phase",
    "full_raman_terms",
    "rotation_tuned_model",
    "resonant_coupling",
    "resonant_terms",
    "resonant_hamiltonian",
    "resonant_model",
    "ideal_terms",
    "ideal_hamiltonian",
    "ideal_model",
    "three_level_model",
    "effective_raman_model",
    "commensurate_period",
]

DEFAULT_ORDER_CAP = 8
# Terms smaller than this fraction of |g13| are dropped.
DEFAULT_FLOOR_FACTOR = 1e-8
VALIDATION_DIM_CAP = 2000


class CapTooSmall(ValueError):
    """The order cap would drop the targeted resonant term."""


class DimensionTooLarge(ValueError):
    """Vibronic validation model exceeds the configured dimension cap."""


@dataclass(frozen=True)
class TimeDependentTerm:
    m: int
    mu: int
    nu: int
    n: int
    coeff: complex
    osc_freq: float = 0.0

    @property
    def exponents(self) -> tuple[int, int, int, int]:
        return (self.m, self.mu, self.nu, self.n)

    @property
    def order(self) -> int:
        return self.m + self.mu + self.nu + self.n

    @property
    def shift(self) -> tuple[int, int]:
        """Change of (n_a, n_b) produced by the monomial."""
        return (self.m - self.mu, self.nu - self.n)


def raman_coefficient(m, mu, nu, n, g13, eta12, eta23) -> complex:
    """Coefficient of a†^m a^mu b†^nu b^n in the Lamb-Dicke expansion of one Raman pair."""
    prefactor = -complex(g13) * math.exp(-(eta12**2 + eta23**2) / 2)
    part_a = (-1j * eta12) ** (m + mu) / (math.factorial(m) * math.factorial(mu))
    part_b = (1j * eta23) ** (n + nu) / (math.factorial(n) * math.factorial(nu))
    return prefactor * part_a * part_b


def required_g13_phase(target: TargetInteraction, eta12: float, eta23: float) -> float:
    """arg(g13) in [0, 2pi) that gives g(0,0) the phase ``target.coupling_phase``."""
    base = cmath.phase(raman_coefficient(target.k_a, 0, 0, target.k_b, 1.0, eta12, eta23))
    return (target.coupling_phase - base) % (2 * math.pi)


def term_frequency(m, mu, nu, n, nu_a, nu_b, delta13) -> float:
    return nu_a * (m - mu) + nu_b * (nu - n) + delta13


def commensurate_period(freqs, max_denominator: int = 1000, rtol: float = 1e-10) -> float | None:
    """Common period of ``exp(i f t)`` for all ``f`` in ``freqs``, or None if incommensurate."""
    nonzero = [abs(f) for f in freqs if f != 0]
    if not nonzero:
        return None
    ref = max(nonzero)
    fracs = []
    for f in nonzero:
        frac = Fraction(f / ref).limit_denominator(max_denominator)
        if abs(float(frac) - f / ref) > rtol:
            return None
        fracs.append(frac)
    lcm = reduce(math.lcm, (fr.denominator for fr in fracs))
    gcd = reduce(math.gcd, (fr.numerator * (lcm // fr.denominator) for fr in fracs))
    return 2 * math.pi * lcm / (ref * gcd)


class HamiltonianModel:
    """Sum of oscillating monomials plus Hermitian conjugates on a two-mode basis.

    When ``frame=(nu_a, nu_b)`` is given, every term must satisfy
    ``osc_freq = nu_a*(m-mu) + nu_b*(nu-n) + carrier`` for one of a few
    carrier frequencies. H(t) is then evaluated as a phase matrix
    ``exp(i (E_i - E_j) t)`` times a sum over carriers, which is exact and
    much cheaper than summing hundreds of term matrices.
    """

    def __init__(self, basis: FockBasis, terms, frame: tuple[float, float] | None = None,
                 label: str = ""):
        self.basis = basis
        self.terms = tuple(terms)
        self.frame = None if frame is None else (float(frame[0]), float(frame[1]))
        self.label = label
        self.term_matrices = tuple(
            scipy.sparse.csr_matrix(monomial_op(*t.exponents, basis).entries) for t in self.terms
        )

        n_a, n_b = basis.occupation_arrays()
        if self.frame is None:
            self.frame_energies = np.zeros(basis.dim)
        else:
            self.frame_energies = self.frame[0] * n_a + self.frame[1] * n_b

        scale = max([abs(t.osc_freq) for t in self.terms] + [1.0])
        groups: dict[float, np.ndarray] = defaultdict(lambda: np.zeros((basis.dim, basis.dim), complex))
        keys: dict[float, float] = {}
        for term, mat in zip(self.terms, self.term_matrices):
            carrier = term.osc_freq
            if self.frame is not None:
                carrier -= self.frame[0] * term.shift[0] + self.frame[1] * term.shift[1]
            key = round(carrier / scale, 9)
            keys.setdefault(key, carrier)
            groups[key] += term.coeff * mat.toarray()
        ordered = sorted(groups)
        self.carriers = np.array([keys[k] for k in ordered], dtype=float)
        self._blocks = (
            np.stack([groups[k] for k in ordered])
            if ordered
            else np.zeros((0, basis.dim, basis.dim), complex)
        )
        for arr in (self.carriers, self._blocks, self.frame_energies):
            arr.setflags(write=False)

    def __repr__(self):
        return (f"HamiltonianModel({self.label!r}, {len(self.terms)} terms, "
                f"{len(self.carriers)} carriers, dim={self.basis.dim})")

    @property
    def is_static(self) -> bool:
        return all(t.osc_freq == 0 for t in self.terms)

    @property
    def max_frequency(self) -> float:
        return max([abs(t.osc_freq) for t in self.terms] + [0.0])

    def frequencies(self) -> list[float]:
        """Distinct oscillation frequencies (terms only, h.c. carry the negatives)."""
        return sorted({t.osc_freq for t in self.terms})

    @property
    def period(self) -> float | None:
        """Common period of H(t) in seconds, None if static or incommensurate."""
        if self.is_static:
            return None
        gens = list(self.carriers)
        if self.frame is not None:
            gens += list(self.frame)
        return commensurate_period(gens)

    def norm_bound(self) -> float:
        """Upper bound on the spectral norm of H(t) over all t."""
        if not len(self._blocks):
            return 0.0
        absmat = np.abs(self._blocks).sum(axis=0)
        return float(np.linalg.norm(absmat + absmat.T, 2))

    def dense_at(self, t: float) -> np.ndarray:
        phases = np.exp(1j * self.carriers * t)
        v = np.tensordot(phases, self._blocks, axes=1)
        v = v + v.conj().T
        if self.frame is not None:
            e = np.exp(1j * self.frame_energies * t)
            v *= np.outer(e, e.conj())
        return v

    def matrix_at(self, t: float) -> OperatorMatrix:
        return OperatorMatrix(self.basis, self.dense_at(t), tag="hamiltonian")

    def dense_by_sum(self, t: float) -> np.ndarray:
        """Reference evaluation summing every term matrix individually."""
        h = np.zeros((self.basis.dim, self.basis.dim), complex)
        for term, mat in zip(self.terms, self.term_matrices):
            h += term.coeff * np.exp(1j * term.osc_freq * t) * mat.toarray()
        return h + h.conj().T

    def subset(self, keep, label: str | None = None) -> "HamiltonianModel":
        """New model restricted to terms for which ``keep(term)`` is true."""
        return HamiltonianModel(
            self.basis, [t for t in self.terms if keep(t)], self.frame,
            self.label if label is None else label,
        )

    def resonant_part(self, atol: float = 1e-9) -> "HamiltonianModel":
        scale = max(self.max_frequency, 1.0)
        return self.subset(lambda t: abs(t.osc_freq) <= atol * scale, label=f"{self.label}:resonant")

    def term_table(self) -> str:
        """Terms as CSV ``m,mu,nu,n,re_coeff,im_coeff,osc_freq``."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["m", "mu", "nu", "n", "re_coeff", "im_coeff", "osc_freq"])
        for t in self.terms:
            writer.writerow([t.m, t.mu, t.nu, t.n, f"{t.coeff.real:.12g}",
                             f"{t.coeff.imag:.12g}", f"{t.osc_freq:.12g}"])
        return buf.getvalue()


def _nonzero_monomial(m, mu, nu, n, basis: FockBasis) -> bool:
    return max(m, mu) <= basis.cutoff_a and max(nu, n) <= basis.cutoff_b


def full_raman_terms(
    derived: DerivedCouplings,
    delta13: float,
    trap: TrapConfig,
    basis: FockBasis,
    order_cap: int = DEFAULT_ORDER_CAP,
    coeff_floor: float | None = None,
    target: TargetInteraction | None = None,
) -> HamiltonianModel:
    """Every monomial of the factorized symmetric-pair Hamiltonian up to ``order_cap``.

    Monomials that vanish identically on ``basis`` are skipped, as are terms
    with ``|coeff| < coeff_floor`` (default ``|g13| * 1e-8``).
    """
    if order_cap < 0:
        raise ValueError("order_cap must be non-negative")
    if target is not None and order_cap < target.k_a + target.k_b:
        raise CapTooSmall(
            f"order_cap={order_cap} drops the resonant term of order {target.k_a + target.k_b}"
        )
    if coeff_floor is None:
        coeff_floor = abs(derived.g13) * DEFAULT_FLOOR_FACTOR
    if coeff_floor < 0:
        raise ValueError("coeff_floor must be non-negative")

    terms = []
    rng = range(order_cap + 1)
    for m, mu, nu, n in product(rng, rng, rng, rng):
        if m + mu + nu + n > order_cap or not _nonzero_monomial(m, mu, nu, n, basis):
            continue
        c = raman_coefficient(m, mu, nu, n, derived.g13, derived.eta12, derived.eta23)
        if abs(c) < coeff_floor or c == 0:
            continue
        w = term_frequency(m, mu, nu, n, trap.nu_a, trap.nu_b, delta13)
        terms.append(TimeDependentTerm(m, mu, nu, n, c, w))
    return HamiltonianModel(basis, terms, frame=(trap.nu_a, trap.nu_b), label="full")


def rotation_tuned_model(
    g13_abs: float,
    eta12: float,
    eta23: float,
    trap: TrapConfig,
    basis: FockBasis,
    order_cap: int = DEFAULT_ORDER_CAP,
    coeff_floor: float | None = None,
) -> HamiltonianModel:
    """Full Hamiltonian tuned for mode rotation: Delta13 = nu_b - nu_a, g13 = i|g13|."""
    delta13 = trap.nu_b - trap.nu_a
    derived = DerivedCouplings(1j * abs(g13_abs), 0.0, 0.0, eta12, eta23, delta13)
    return full_raman_terms(derived, delta13, trap, basis, order_cap, coeff_floor,
                            target=TargetInteraction(1, 1))


def resonant_coupling(mu: int, nu: int, target: TargetInteraction, derived: DerivedCouplings) -> complex:
    """g(mu, nu): coupling of the resonant term dressed by (a†a)^mu-like and (b†b)^nu-like factors."""
    return raman_coefficient(target.k_a + mu, mu, nu, nu + target.k_b,
                             derived.g13, derived.eta12, derived.eta23)


def resonant_terms(target: TargetInteraction, derived: DerivedCouplings, basis: FockBasis,
                   munu_cap: int) -> list[TimeDependentTerm]:
    if munu_cap < 0:
        raise ValueError("munu_cap must be non-negative")
    terms = []
    for mu in range(munu_cap + 1):
        for nu in range(munu_cap + 1):
            m, n = target.k_a + mu, nu + target.k_b
            if not _nonzero_monomial(m, mu, nu, n, basis):
                continue
            terms.append(TimeDependentTerm(m, mu, nu, n, resonant_coupling(mu, nu, target, derived)))
    return terms


def resonant_model(target, derived, basis, munu_cap=DEFAULT_ORDER_CAP) -> HamiltonianModel:
    return HamiltonianModel(basis, resonant_terms(target, derived, basis, munu_cap), label="resonant")


def resonant_hamiltonian(target: TargetInteraction, derived: DerivedCouplings, basis: FockBasis,
                         munu_cap: int = DEFAULT_ORDER_CAP) -> OperatorMatrix:
    """Resonant-only Hamiltonian: sum_{mu,nu} g(mu,nu) a†^{k_a} a†^mu a^mu b†^nu b^nu b^{k_b} + h.c."""
    return resonant_model(target, derived, basis, munu_cap).matrix_at(0.0)


def ideal_terms(target: TargetInteraction, g: complex) -> list[TimeDependentTerm]:
    return [TimeDependentTerm(target.k_a, 0, 0, target.k_b, complex(g))]


def ideal_model(target: TargetInteraction, g: complex, basis: FockBasis) -> HamiltonianModel:
    return HamiltonianModel(basis, ideal_terms(target, g), label="ideal")


def ideal_hamiltonian(target: TargetInteraction, g: complex, basis: FockBasis) -> OperatorMatrix:
    """g a†^{k_a} b^{k_b} + g* a^{k_a} b†^{k_b}.

    The linear rotation coupler i g (a†b - a b†) with real g is
    ``ideal_hamiltonian(TargetInteraction(1, 1), 1j * g, basis)``.
    """
    return ideal_model(target, g, basis).matrix_at(0.0)


@dataclass(frozen=True, eq=False)
class VibronicModel:
    """Static Hamiltonian on motional ⊗ electronic space (motional index outer).

    ``levels`` names the electronic levels in index order.
    """

    basis: FockBasis
    levels: tuple[str, ...]
    matrix: np.ndarray

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    @property
    def dim(self) -> int:
        return self.basis.dim * self.n_levels

    def product_state(self, level: str, motional: np.ndarray) -> np.ndarray:
        elec = np.zeros(self.n_levels, complex)
        elec[self.levels.index(level)] = 1.0
        return np.kron(np.asarray(motional, complex), elec)

    def level_component(self, psi: np.ndarray, level: str) -> np.ndarray:
        """Motional amplitudes attached to one electronic level."""
        return np.asarray(psi).reshape(self.basis.dim, self.n_levels)[:, self.levels.index(level)]

    def level_population(self, psi: np.ndarray, level: str) -> float:
        comp = self.level_component(psi, level)
        return float(np.vdot(comp, comp).real)

    def hermiticity_defect(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T)))

    def evolve(self, psi0: np.ndarray, times) -> np.ndarray:
        """States exp(-i H t) psi0 for each t, via eigendecomposition."""
        evals, evecs = np.linalg.eigh(self.matrix)
        coeffs = evecs.conj().T @ psi0
        phases = np.exp(-1j * np.outer(np.asarray(times, float), evals))
        return (phases * coeffs) @ evecs.T


def _displacement(eta: float, cutoff: int) -> np.ndarray:
    """exp(-i eta (c + c†)) on a truncated single mode, by exact matrix exponential."""
    lower = single_mode_monomial(0, 1, cutoff)
    return scipy.linalg.expm(-1j * eta * (lower + lower.T))


def _check_validation_dim(basis: FockBasis, levels: int, dim_cap: int):
    if basis.dim * levels > dim_cap:
        raise DimensionTooLarge(f"{basis.dim * levels} > validation cap {dim_cap}")


def _motional_energy(trap: TrapConfig, basis: FockBasis) -> np.ndarray:
    n_a, n_b = basis.occupation_arrays()
    return np.diag(trap.nu_a * n_a + trap.nu_b * n_b).astype(complex)


def three_level_model(
    pair: RamanPairConfig,
    trap: TrapConfig,
    basis: FockBasis,
    *,
    eta12: float | None = None,
    eta23: float | None = None,
    dim_cap: int = VALIDATION_DIM_CAP,
) -> VibronicModel:
    """Lambda system before elimination of level 2, in the frame rotating with the lasers.

    Level energies become 0, Delta12 and Delta12 - Delta23 for levels 1, 2, 3,
    which leaves a time-independent Hamiltonian. The factors exp(-i k x) are
    exponentials of the truncated position operators, independent of any
    Lamb-Dicke expansion.
    """
    _check_validation_dim(basis, 3, dim_cap)
    d = derive_couplings(pair, trap, eta12=eta12, eta23=eta23)
    eye_a, eye_b = np.eye(basis.cutoff_a + 1), np.eye(basis.cutoff_b + 1)
    kick_x = np.kron(_displacement(d.eta12, basis.cutoff_a), eye_b)  # exp(-i k12 x)
    kick_y = np.kron(eye_a, _displacement(d.eta23, basis.cutoff_b))  # exp(-i k23 y)

    def proj(i, j):
        e = np.zeros((3, 3))
        e[i, j] = 1.0
        return e

    h = np.kron(_motional_energy(trap, basis), np.eye(3))
    h += np.kron(np.eye(basis.dim), pair.delta12 * proj(1, 1) + (pair.delta12 - pair.delta23) * proj(2, 2))
    c12 = -pair.g12 * np.kron(kick_x, proj(0, 1))  # |1><2|
    c32 = -pair.g23 * np.kron(kick_y, proj(2, 1))  # |3><2|
    h += c12 + c12.conj().T + c32 + c32.conj().T
    return VibronicModel(basis, ("1", "2", "3"), h)


def effective_raman_model(
    pair: RamanPairConfig,
    trap: TrapConfig,
    basis: FockBasis,
    *,
    eta12: float | None = None,
    eta23: float | None = None,
    elimination_scale: float = 1.0,
    dim_cap: int = VALIDATION_DIM_CAP,
) -> VibronicModel:
    """Two-level Raman model after elimination of level 2, same rotating frame as
    :func:`three_level_model`.

    Uses the Raman coupling and Stark shifts of :func:`derive_couplings`,
    multiplied by ``elimination_scale``. The motional factor is
    exp(-i(k12 x - k23 y)).
    """
    _check_validation_dim(basis, 2, dim_cap)
    d = derive_couplings(pair, trap, eta12=eta12, eta23=eta23)
    kick = np.kron(_displacement(d.eta12, basis.cutoff_a), _displacement(-d.eta23, basis.cutoff_b))
    s = elimination_scale
    h = np.kron(_motional_energy(trap, basis), np.eye(2))
    h += np.kron(np.eye(basis.dim), np.diag([s * d.omega1_shift,
                                              pair.delta12 - pair.delta23 + s * d.omega3_shift]))
    c13 = -s * d.g13 * np.kron(kick, np.array([[0, 1], [0, 0]]))  # |1><3|
    h = h + c13 + c13.conj().T
    return VibronicModel(basis, ("1", "3"), h)
