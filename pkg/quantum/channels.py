"""
Eavesdropping channels acting on a single time-bin qubit.

    monitoring_channel  (1 - d) rho + d * sum_i A_i rho A_i^dagger,  A_i = P_i / sqrt(2)
    partial_channel     (1 - g) rho + sum_i (g / 2) P_i rho P_i     (probeless)
    weak_channel_exact  off-diagonals multiplied by the pointer overlap chi_01
    intercept_resend    projective measurement, eigenstate resent

The P_i run over the four BB84 projectors, so monitoring and partial coincide
when d = g. For the partial map eps in [0, 1] is a probability; for the weak
channel eps is a pointer displacement and only eps / width matters.
"""
import logging
import math
from typing import List, Optional, Tuple

import numpy as np

from quantum.core import (
    BB84_PROJECTORS,
    Basis,
    DensityMatrix,
    hermitize,
    apply_kraus,
    maximally_mixed,
    projective_measure,
    projector,
)
from quantum.pointer import Observable, PointerShape, overlap_chi

logger = logging.getLogger(__name__)

_HADAMARD = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex) / math.sqrt(2.0)


def _check_strength(name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value}")


def _projector_set(basis: Optional[Basis]):
    if basis is None:
        return BB84_PROJECTORS
    return (projector(basis, 0), projector(basis, 1))


def monitoring_kraus(basis: Optional[Basis] = None) -> List[np.ndarray]:
    """A_i = P_i / sqrt(k/2) so that sum A_i^dagger A_i = I for the chosen projector set"""
    projectors = _projector_set(basis)
    scale = 1.0 / math.sqrt(len(projectors) / 2.0)
    return [p.matrix * scale for p in projectors]


def monitoring_channel(rho: DensityMatrix, delta: float, basis: Optional[Basis] = None) -> DensityMatrix:
    _check_strength("delta", delta)
    if delta == 0.0:
        return rho
    monitored = apply_kraus(rho, monitoring_kraus(basis))
    return DensityMatrix(hermitize((1.0 - delta) * rho.elems + delta * monitored.elems))


def partial_channel(rho: DensityMatrix, gamma: float, basis: Optional[Basis] = None) -> DensityMatrix:
    """
    Probeless partial measurement as an affine map.

    With basis=None the sum runs over all four BB84 projectors with weight
    gamma/2 each (basis-averaged monitoring); with a basis it runs over that
    basis' two projectors with weight gamma each.
    """
    _check_strength("gamma", gamma)
    projectors = _projector_set(basis)
    weight = gamma * 2.0 / len(projectors)
    out = (1.0 - gamma) * rho.elems
    for p in projectors:
        out = out + weight * (p.matrix @ rho.elems @ p.matrix)
    return DensityMatrix(hermitize(out))


def dephase_in_basis(rho: DensityMatrix, basis: Basis, factor: float) -> DensityMatrix:
    """Scale the off-diagonal elements of rho, written in `basis`, by `factor`"""
    if basis == Basis.Z:
        e = rho.elems.copy()
        e[0, 1] *= factor
        e[1, 0] *= factor
        return DensityMatrix(e)
    rotated = _HADAMARD @ rho.elems @ _HADAMARD
    rotated[0, 1] *= factor
    rotated[1, 0] *= factor
    return DensityMatrix(hermitize(_HADAMARD @ rotated @ _HADAMARD))


def weak_channel_exact(
    rho: DensityMatrix,
    shape: PointerShape,
    eps: float,
    obs: Observable = Observable(),
    basis: Basis = Basis.Z,
) -> DensityMatrix:
    """Trace out the pointer after a von Neumann coupling of strength eps to the `basis` observable"""
    if eps < 0:
        raise ValueError(f"eps must be non-negative, got {eps}")
    chi = overlap_chi(shape, eps, obs, 0, 1)
    return dephase_in_basis(rho, basis, chi)


def intercept_resend(
    state_in: DensityMatrix, eve_basis: Basis, rng: np.random.Generator
) -> Tuple[int, DensityMatrix]:
    return projective_measure(state_in, eve_basis, rng)


def erasure_channel(rho: DensityMatrix) -> DensityMatrix:
    """Replaces any input with I/2"""
    return maximally_mixed()
