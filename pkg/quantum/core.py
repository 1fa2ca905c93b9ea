"""
Single-qubit state algebra for the time-bin encoding.

Time basis Z = {|e>, |l>} (early / late arrival), phase basis X = {|+>, |->}.
Bit 0 is carried by |e> and |+>, bit 1 by |l> and |->. hbar = 1 everywhere.
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Iterable, Tuple

import numpy as np

from static.errors import DegenerateOutcome, InvalidDensityMatrix, KrausNotTracePreserving

logger = logging.getLogger(__name__)

STRUCTURE_TOL = 1e-12
COMPLETENESS_TOL = 1e-10
DEGENERATE_TOL = 1e-14

_SQRT_HALF = 1.0 / math.sqrt(2.0)


class Basis(str, Enum):
    Z = "Z"  # time
    X = "X"  # phase

    @property
    def conjugate(self) -> "Basis":
        return Basis.X if self is Basis.Z else Basis.Z


class BasisState(Enum):
    EARLY = (Basis.Z, 0)
    LATE = (Basis.Z, 1)
    PLUS = (Basis.X, 0)
    MINUS = (Basis.X, 1)

    @property
    def basis(self) -> Basis:
        return self.value[0]

    @property
    def bit(self) -> int:
        return self.value[1]

    @property
    def ket(self) -> np.ndarray:
        return _KETS[self]

    @classmethod
    def for_bit(cls, basis: Basis, bit: int) -> "BasisState":
        return cls((Basis(basis), int(bit)))


_KETS = {
    BasisState.EARLY: np.array([1.0, 0.0], dtype=complex),
    BasisState.LATE: np.array([0.0, 1.0], dtype=complex),
    BasisState.PLUS: np.array([_SQRT_HALF, _SQRT_HALF], dtype=complex),
    BasisState.MINUS: np.array([_SQRT_HALF, -_SQRT_HALF], dtype=complex),
}


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """2x2 Hermitian, unit-trace, positive semidefinite matrix; checked on construction"""

    elems: np.ndarray

    def __post_init__(self):
        arr = np.array(self.elems, dtype=complex).reshape(2, 2)
        arr.setflags(write=False)
        object.__setattr__(self, "elems", arr)
        problem = _invariant_violation(arr)
        if problem:
            raise InvalidDensityMatrix(f"{problem}: {arr.tolist()}")

    @property
    def off_diagonal(self) -> complex:
        return complex(self.elems[0, 1])

    def is_valid(self) -> bool:
        return _invariant_violation(self.elems) is None

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.elems)

    def allclose(self, other: "DensityMatrix", atol: float = STRUCTURE_TOL) -> bool:
        return bool(np.allclose(self.elems, other.elems, rtol=0.0, atol=atol))


def _invariant_violation(arr: np.ndarray):
    """Returns a description of the first broken invariant, or None"""
    if not np.all(np.isfinite(arr)):
        return "non-finite entry"
    a, b, c, d = complex(arr[0, 0]), complex(arr[0, 1]), complex(arr[1, 0]), complex(arr[1, 1])
    if abs(a.imag) > STRUCTURE_TOL or abs(d.imag) > STRUCTURE_TOL or abs(b - c.conjugate()) > STRUCTURE_TOL:
        return "not Hermitian"
    if abs(a.real + d.real - 1.0) > STRUCTURE_TOL:
        return "trace differs from 1"
    half_gap = math.sqrt(((a.real - d.real) / 2.0) ** 2 + abs(b) ** 2)
    if (a.real + d.real) / 2.0 - half_gap < -STRUCTURE_TOL:
        return "negative eigenvalue"
    return None


def hermitize(m: np.ndarray) -> np.ndarray:
    return (m + m.conj().T) / 2.0


@dataclass(frozen=True, eq=False)
class Projector:
    matrix: np.ndarray
    basis: Basis
    bit: int


@lru_cache(maxsize=None)
def projector(basis: Basis, bit: int) -> Projector:
    ket = BasisState.for_bit(basis, bit).ket
    matrix = np.outer(ket, ket.conj())
    matrix.setflags(write=False)
    return Projector(matrix=matrix, basis=Basis(basis), bit=int(bit))


BB84_PROJECTORS: Tuple[Projector, ...] = tuple(
    projector(basis, bit) for basis in (Basis.Z, Basis.X) for bit in (0, 1)
)


@lru_cache(maxsize=None)
def dm_from_state(s: BasisState) -> DensityMatrix:
    return DensityMatrix(np.outer(s.ket, s.ket.conj()))


def dm_from_amplitudes(a0: complex, a1: complex) -> DensityMatrix:
    ket = np.array([a0, a1], dtype=complex)
    norm = np.linalg.norm(ket)
    if norm == 0.0:
        raise InvalidDensityMatrix("zero state vector")
    ket = ket / norm
    return DensityMatrix(np.outer(ket, ket.conj()))


def maximally_mixed() -> DensityMatrix:
    return DensityMatrix(np.eye(2) / 2.0)


def random_density_matrix(rng: np.random.Generator) -> DensityMatrix:
    """Ginibre-distributed mixed state"""
    g = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    rho = g @ g.conj().T
    return DensityMatrix(hermitize(rho / np.trace(rho).real))


def born_probability(rho: DensityMatrix, basis: Basis, bit: int) -> float:
    """trace(P_b rho)"""
    e = rho.elems
    if basis == Basis.Z:
        p = e[bit, bit].real
    else:
        sign = 1.0 if bit == 0 else -1.0
        p = 0.5 + sign * e[0, 1].real
    return min(1.0, max(0.0, float(p)))


def apply_kraus(rho: DensityMatrix, ops: Iterable[np.ndarray]) -> DensityMatrix:
    ops = [np.asarray(op, dtype=complex) for op in ops]
    completeness = sum(op.conj().T @ op for op in ops)
    deviation = float(np.max(np.abs(completeness - np.eye(2))))
    if deviation > COMPLETENESS_TOL:
        raise KrausNotTracePreserving(f"sum of A^dagger A deviates from identity by {deviation:.3e}")
    out = sum(op @ rho.elems @ op.conj().T for op in ops)
    return DensityMatrix(hermitize(out))


def projective_measure(rho: DensityMatrix, basis: Basis, rng: np.random.Generator) -> Tuple[int, DensityMatrix]:
    """Born-rule measurement; returns the outcome bit and the collapsed state"""
    p0 = born_probability(rho, basis, 0)
    bit = 0 if rng.random() < p0 else 1
    p = p0 if bit == 0 else 1.0 - p0
    if p < DEGENERATE_TOL:
        raise DegenerateOutcome(f"outcome {bit} in basis {basis.value} has probability {p:.3e}")
    return bit, dm_from_state(BasisState.for_bit(basis, bit))


def trace_distance(a: DensityMatrix, b: DensityMatrix) -> float:
    eigenvalues = np.linalg.eigvalsh(hermitize(a.elems - b.elems))
    return float(min(1.0, 0.5 * np.sum(np.abs(eigenvalues))))
