"""
Continuous probe wavefunctions for probe-based (von Neumann) weak measurements.

A pointer phi(x) coupled to an observable with eigenvalues (l1, l2) ends up
shifted by eps*l_i for the component |i>. The overlap of two shifted copies,
chi_ij = <phi(x - eps*l_i) | phi(x - eps*l_j)>, multiplies the off-diagonal
elements of the measured qubit. The shift sign is +eps*l_i throughout.

The rect and triangle templates are rescaled to unit L2 norm before use.
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Callable, Iterable, Tuple

import numpy as np
from scipy.stats import norm

from static.errors import QuadratureNotConverged

logger = logging.getLogger(__name__)

QUAD_TOL = 1e-10
QUAD_BUDGET = 2**18
_MIN_DEPTH = 3
_GAUSSIAN_TAIL = 20.0  # widths beyond which |phi|^2 is below double precision


class PointerKind(str, Enum):
    GAUSSIAN = "gaussian"
    RECT = "rect"
    TRIANGLE = "triangle"


@dataclass(frozen=True)
class PointerShape:
    """
    Pointer wavefunction.

    `width` is the Gaussian Delta (std-dev of |phi|^2), the rect full width L, or
    the triangle half-base L. `center` is x0.
    """

    kind: PointerKind
    width: float
    center: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", PointerKind(self.kind))
        if not (math.isfinite(self.width) and self.width > 0.0):
            raise ValueError(f"pointer width must be positive, got {self.width}")
        if not math.isfinite(self.center):
            raise ValueError(f"pointer center must be finite, got {self.center}")

    @classmethod
    def gaussian(cls, delta: float = 1.0, center: float = 0.0) -> "PointerShape":
        return cls(PointerKind.GAUSSIAN, delta, center)

    @classmethod
    def rect(cls, length: float, center: float = 0.0) -> "PointerShape":
        return cls(PointerKind.RECT, length, center)

    @classmethod
    def triangle(cls, length: float, center: float = 0.0) -> "PointerShape":
        return cls(PointerKind.TRIANGLE, length, center)

    @property
    def support_halfwidth(self) -> float:
        if self.kind is PointerKind.GAUSSIAN:
            return _GAUSSIAN_TAIL * self.width
        if self.kind is PointerKind.RECT:
            return self.width / 2.0
        return self.width

    def kinks(self, shift: float = 0.0) -> Tuple[float, ...]:
        """Points where the amplitude (shifted by `shift`) is not smooth"""
        c = self.center + shift
        if self.kind is PointerKind.RECT:
            return (c - self.width / 2.0, c + self.width / 2.0)
        if self.kind is PointerKind.TRIANGLE:
            return (c - self.width, c, c + self.width)
        return (c,)


@dataclass(frozen=True)
class Observable:
    """Eigenvalues attached to (Early, Late) or to (bit 0, bit 1) of whichever basis is coupled"""

    eigenvalues: Tuple[float, float] = (1.0, -1.0)

    def __post_init__(self):
        l1, l2 = (float(v) for v in self.eigenvalues)
        if l1 == l2:
            raise ValueError("observable eigenvalues must differ")
        object.__setattr__(self, "eigenvalues", (l1, l2))

    @property
    def gap(self) -> float:
        return abs(self.eigenvalues[0] - self.eigenvalues[1])


def amplitude(shape: PointerShape, x):
    """L2-normalized amplitude; accepts scalars or arrays"""
    u = np.asarray(x, dtype=float) - shape.center
    w = shape.width
    if shape.kind is PointerKind.GAUSSIAN:
        out = (2.0 * math.pi * w**2) ** -0.25 * np.exp(-(u**2) / (4.0 * w**2))
    elif shape.kind is PointerKind.RECT:
        out = np.where(np.abs(u) < w / 2.0, 1.0 / math.sqrt(w), 0.0)
    else:
        out = np.where(np.abs(u) < w, (w - np.abs(u)) * math.sqrt(1.5 / w**3), 0.0)
    return float(out) if np.ndim(out) == 0 else out


def probability_cdf(shape: PointerShape, u: float) -> float:
    """CDF of |phi|^2 at offset u from the pointer center"""
    w = shape.width
    if shape.kind is PointerKind.GAUSSIAN:
        return float(norm.cdf(u / w))
    if shape.kind is PointerKind.RECT:
        return min(1.0, max(0.0, u / w + 0.5))
    if u <= -w:
        return 0.0
    if u >= w:
        return 1.0
    if u <= 0.0:
        return 0.5 * (1.0 + u / w) ** 3
    return 1.0 - 0.5 * (1.0 - u / w) ** 3


def adaptive_simpson(
    f: Callable[[float], float],
    a: float,
    b: float,
    tol: float = QUAD_TOL,
    budget: int = QUAD_BUDGET,
    breakpoints: Iterable[float] = (),
) -> float:
    """
    Adaptive Simpson quadrature of f over [a, b].

    The interval is first cut at `breakpoints` (kinks or jumps of f); segment
    end values are taken one ulp inside so that jumps do not stall refinement.
    The error tolerance is distributed in proportion to subinterval length.
    """
    if b <= a:
        return 0.0
    cuts = sorted({a, b, *(p for p in breakpoints if a < p < b)})
    span = b - a
    stack = []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        fa = f(float(np.nextafter(lo, hi)))
        fb = f(float(np.nextafter(hi, lo)))
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        stack.append((lo, hi, fa, fm, fb, (hi - lo) / 6.0 * (fa + 4.0 * fm + fb), 0))

    pieces = []
    used = 0
    while stack:
        lo, hi, fa, fm, fb, whole, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        flm = f(0.5 * (lo + mid))
        frm = f(0.5 * (mid + hi))
        left = (mid - lo) / 6.0 * (fa + 4.0 * flm + fm)
        right = (hi - mid) / 6.0 * (fm + 4.0 * frm + fb)
        used += 1
        if used > budget:
            raise QuadratureNotConverged(f"adaptive Simpson exceeded {budget} intervals on [{a}, {b}]")
        delta = left + right - whole
        if depth >= _MIN_DEPTH and abs(delta) <= 15.0 * tol * (hi - lo) / span:
            pieces.append(left + right + delta / 15.0)
        else:
            stack.append((lo, mid, fa, flm, fm, left, depth + 1))
            stack.append((mid, hi, fm, frm, fb, right, depth + 1))
    return math.fsum(pieces)


def _shifts(eps: float, obs: Observable, i: int, j: int) -> Tuple[float, float]:
    return eps * obs.eigenvalues[i], eps * obs.eigenvalues[j]


@lru_cache(maxsize=4096)
def overlap_chi_quadrature(shape: PointerShape, eps: float, obs: Observable, i: int, j: int) -> float:
    si, sj = _shifts(eps, obs, i, j)
    pad = max(abs(si), abs(sj))
    lo = shape.center - shape.support_halfwidth - pad
    hi = shape.center + shape.support_halfwidth + pad

    def integrand(x: float) -> float:
        return amplitude(shape, x - si) * amplitude(shape, x - sj)

    value = adaptive_simpson(integrand, lo, hi, breakpoints=shape.kinks(si) + shape.kinks(sj))
    return min(1.0, max(-1.0, value))


def overlap_chi(shape: PointerShape, eps: float, obs: Observable, i: int, j: int) -> float:
    """Response function chi_ij; closed form for Gaussian and rect, quadrature for triangle"""
    if eps < 0:
        raise ValueError(f"eps must be non-negative, got {eps}")
    if i == j:
        return 1.0
    si, sj = _shifts(eps, obs, i, j)
    d = abs(si - sj)
    if shape.kind is PointerKind.GAUSSIAN:
        return math.exp(-(d**2) / (8.0 * shape.width**2))
    if shape.kind is PointerKind.RECT:
        return max(0.0, 1.0 - d / shape.width)
    return overlap_chi_quadrature(shape, float(eps), obs, i, j)


def _draw_offset(shape: PointerShape, rng: np.random.Generator) -> float:
    w = shape.width
    if shape.kind is PointerKind.GAUSSIAN:
        return float(rng.normal(0.0, w))
    if shape.kind is PointerKind.RECT:
        return float(rng.uniform(-w / 2.0, w / 2.0))
    # inverse CDF of the half-density proportional to (L - u)^2 on [0, L)
    sign = 1.0 if rng.random() < 0.5 else -1.0
    return sign * w * (1.0 - (1.0 - rng.random()) ** (1.0 / 3.0))


def sample_outcome(shape: PointerShape, eps: float, lam: float, rng: np.random.Generator) -> Tuple[float, int]:
    """Draw x from |phi(x - eps*lam)|^2 and decode it against the threshold x0 (tie -> 0)"""
    x = shape.center + eps * lam + _draw_offset(shape, rng)
    return x, 0 if x >= shape.center else 1


def decode_outcome(x: float, shape: PointerShape, eps: float, obs: Observable) -> int:
    """Nearest-eigenvalue decoding of a pointer reading; reduces to x >= x0 for (+1, -1)"""
    l1, l2 = obs.eigenvalues
    threshold = shape.center + eps * (l1 + l2) / 2.0
    side = (x - threshold) if l1 > l2 else (threshold - x)
    return 0 if side >= 0.0 else 1


def correct_decode_probability(shape: PointerShape, eps: float, obs: Observable) -> float:
    """Probability that decode_outcome returns the eigenvector actually coupled"""
    return probability_cdf(shape, eps * obs.gap / 2.0)
