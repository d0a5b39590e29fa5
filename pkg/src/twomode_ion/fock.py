"""Truncated two-mode Fock space: basis indexing, ladder operators, coherent states.

Basis states |n_a>|n_b> are stored row-major, n_a outer and n_b inner, so the
flat index is ``n_a * (cutoff_b + 1) + n_b``. Operators are truncated by
dropping matrix elements that would leave the basis.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "FockBasis",
    "StateVector",
    "OperatorMatrix",
    "BasisMismatch",
    "TailTooHeavy",
    "COHERENT_TAIL_TOL",
    "make_basis",
    "ladder_op",
    "number_op",
    "monomial_op",
    "single_mode_monomial",
    "coherent_state",
    "coherent_amplitudes",
    "fock_state",
    "overlap",
    "expectation",
]

# Maximum allowed truncated probability weight of a coherent state.
COHERENT_TAIL_TOL = 1e-5
HERMITIAN_TOL = 1e-12


class BasisMismatch(ValueError):
    """Raised when two objects defined on different bases are combined."""


class TailTooHeavy(UserWarning):
    """Coherent state has significant weight above the cutoff."""


@dataclass(frozen=True)
class FockBasis:
    cutoff_a: int
    cutoff_b: int

    def __post_init__(self):
        if self.cutoff_a < 0 or self.cutoff_b < 0:
            raise ValueError("cutoffs must be non-negative")

    @property
    def dim(self) -> int:
        return (self.cutoff_a + 1) * (self.cutoff_b + 1)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.cutoff_a + 1, self.cutoff_b + 1)

    def index(self, n_a: int, n_b: int) -> int:
        if not (0 <= n_a <= self.cutoff_a and 0 <= n_b <= self.cutoff_b):
            raise IndexError(f"|{n_a},{n_b}> outside basis {self.shape}")
        return n_a * (self.cutoff_b + 1) + n_b

    def occupations(self, index: int) -> tuple[int, int]:
        if not 0 <= index < self.dim:
            raise IndexError(index)
        return divmod(index, self.cutoff_b + 1)

    def occupation_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Arrays ``(n_a, n_b)`` of length ``dim`` in flat-index order."""
        n_a, n_b = np.divmod(np.arange(self.dim), self.cutoff_b + 1)
        return n_a, n_b


def make_basis(cutoff_a: int, cutoff_b: int) -> FockBasis:
    return FockBasis(int(cutoff_a), int(cutoff_b))


def _check_same_basis(x, y):
    if x.basis != y.basis:
        raise BasisMismatch(f"{x.basis} != {y.basis}")


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=complex)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class StateVector:
    basis: FockBasis
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = _frozen(self.amplitudes)
        if amps.shape != (self.basis.dim,):
            raise ValueError(f"expected {self.basis.dim} amplitudes, got {amps.shape}")
        object.__setattr__(self, "amplitudes", amps)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "StateVector":
        nrm = self.norm()
        if nrm == 0:
            raise ValueError("cannot normalize the zero vector")
        return StateVector(self.basis, self.amplitudes / nrm)

    def populations(self) -> np.ndarray:
        """Occupation probabilities as a ``(cutoff_a+1, cutoff_b+1)`` array."""
        return (np.abs(self.amplitudes) ** 2).reshape(self.basis.shape)

    def amplitude(self, n_a: int, n_b: int) -> complex:
        return complex(self.amplitudes[self.basis.index(n_a, n_b)])

    def rows(self):
        """Yield ``(n_a, n_b, re, im)`` in basis order."""
        n_a, n_b = self.basis.occupation_arrays()
        for i, c in enumerate(self.amplitudes):
            yield int(n_a[i]), int(n_b[i]), float(c.real), float(c.imag)


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    """Dense operator on a two-mode basis.

    ``tag`` records the role. Matrices tagged ``"hamiltonian"`` (units rad/s)
    must be Hermitian to ``HERMITIAN_TOL``.
    """

    basis: FockBasis
    entries: np.ndarray
    tag: str = "operator"

    def __post_init__(self):
        mat = _frozen(self.entries)
        dim = self.basis.dim
        if mat.shape != (dim, dim):
            raise ValueError(f"expected ({dim}, {dim}) matrix, got {mat.shape}")
        object.__setattr__(self, "entries", mat)
        if self.tag == "hamiltonian" and self.hermiticity_defect() > HERMITIAN_TOL:
            raise ValueError(
                f"Hamiltonian is not Hermitian (defect {self.hermiticity_defect():.3g})"
            )

    def hermiticity_defect(self) -> float:
        return float(np.max(np.abs(self.entries - self.entries.conj().T), initial=0.0))

    def dag(self) -> "OperatorMatrix":
        return OperatorMatrix(self.basis, self.entries.conj().T, self.tag)

    def __matmul__(self, other):
        if isinstance(other, OperatorMatrix):
            _check_same_basis(self, other)
            return OperatorMatrix(self.basis, self.entries @ other.entries)
        if isinstance(other, StateVector):
            _check_same_basis(self, other)
            return StateVector(self.basis, self.entries @ other.amplitudes)
        return NotImplemented

    def __add__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        _check_same_basis(self, other)
        tag = self.tag if self.tag == other.tag else "operator"
        return OperatorMatrix(self.basis, self.entries + other.entries, tag)

    def __sub__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        _check_same_basis(self, other)
        return OperatorMatrix(self.basis, self.entries - other.entries)

    def scaled(self, factor: complex, tag: str = "operator") -> "OperatorMatrix":
        return OperatorMatrix(self.basis, factor * self.entries, tag)


def _lower_1mode(cutoff: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, cutoff + 1, dtype=float)), k=1)


def single_mode_monomial(n_raise: int, n_lower: int, cutoff: int) -> np.ndarray:
    """Truncated single-mode ``c^dagger**n_raise @ c**n_lower`` (real matrix).

    Element ``<k - n_lower + n_raise| ... |k>`` equals
    ``sqrt(k! (k - n_lower + n_raise)!) / (k - n_lower)!``.
    """
    if n_raise < 0 or n_lower < 0:
        raise ValueError("exponents must be non-negative")
    size = cutoff + 1
    out = np.zeros((size, size))
    for k in range(n_lower, size):
        j = k - n_lower + n_raise
        if j < size:
            # sqrt(k!/(k-n_lower)!) * sqrt(j!/(k-n_lower)!)
            low = np.prod(np.arange(k - n_lower + 1, k + 1, dtype=float))
            high = np.prod(np.arange(k - n_lower + 1, j + 1, dtype=float))
            out[j, k] = np.sqrt(low * high)
    return out


def _embed(op_a: np.ndarray, op_b: np.ndarray) -> np.ndarray:
    return np.kron(op_a, op_b)


def ladder_op(mode: str, kind: str, basis: FockBasis) -> OperatorMatrix:
    """Annihilation (``kind="lower"``) or creation (``"raise"``) operator on mode ``a`` or ``b``."""
    if mode not in ("a", "b") or kind not in ("lower", "raise"):
        raise ValueError(f"bad ladder operator spec ({mode!r}, {kind!r})")
    cutoff = basis.cutoff_a if mode == "a" else basis.cutoff_b
    single = _lower_1mode(cutoff)
    if kind == "raise":
        single = single.T
    eye_a = np.eye(basis.cutoff_a + 1)
    eye_b = np.eye(basis.cutoff_b + 1)
    full = _embed(single, eye_b) if mode == "a" else _embed(eye_a, single)
    return OperatorMatrix(basis, full)


def number_op(mode: str, basis: FockBasis) -> OperatorMatrix:
    n_a, n_b = basis.occupation_arrays()
    occ = n_a if mode == "a" else n_b
    return OperatorMatrix(basis, np.diag(occ.astype(float)), tag="hamiltonian")


def monomial_op(m: int, mu: int, nu: int, n: int, basis: FockBasis) -> OperatorMatrix:
    """Normal-ordered ``a†^m a^mu b†^nu b^n`` on the truncated basis."""
    op_a = single_mode_monomial(m, mu, basis.cutoff_a)
    op_b = single_mode_monomial(nu, n, basis.cutoff_b)
    return OperatorMatrix(basis, _embed(op_a, op_b))


def coherent_amplitudes(alpha: complex, cutoff: int) -> np.ndarray:
    """Untruncated-normalisation amplitudes ``e^{-|a|^2/2} a^n / sqrt(n!)`` for n <= cutoff."""
    amps = np.empty(cutoff + 1, dtype=complex)
    amps[0] = np.exp(-abs(alpha) ** 2 / 2)
    for k in range(1, cutoff + 1):
        amps[k] = amps[k - 1] * alpha / np.sqrt(k)
    return amps


def coherent_state(alpha_a: complex, alpha_b: complex, basis: FockBasis) -> StateVector:
    """Two-mode coherent state |alpha_a>|alpha_b>, renormalised on the truncated basis.

    Emits :class:`TailTooHeavy` if the probability weight captured by the
    basis before renormalisation is below ``1 - COHERENT_TAIL_TOL``.
    """
    amps = _embed(
        coherent_amplitudes(alpha_a, basis.cutoff_a),
        coherent_amplitudes(alpha_b, basis.cutoff_b),
    )
    weight = float(np.vdot(amps, amps).real)
    if weight < 1 - COHERENT_TAIL_TOL:
        warnings.warn(
            f"coherent state ({alpha_a}, {alpha_b}) keeps only {weight:.8f} of its "
            f"weight inside cutoffs {basis.shape}",
            TailTooHeavy,
            stacklevel=2,
        )
    return StateVector(basis, amps / np.sqrt(weight))


def fock_state(n_a: int, n_b: int, basis: FockBasis) -> StateVector:
    amps = np.zeros(basis.dim, dtype=complex)
    amps[basis.index(n_a, n_b)] = 1.0
    return StateVector(basis, amps)


def overlap(x: StateVector, y: StateVector) -> complex:
    """Inner product <x|y>."""
    _check_same_basis(x, y)
    return complex(np.vdot(x.amplitudes, y.amplitudes))


def expectation(op: OperatorMatrix, x: StateVector) -> complex:
    _check_same_basis(op, x)
    return complex(np.vdot(x.amplitudes, op.entries @ x.amplitudes))
