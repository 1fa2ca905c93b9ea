"""
Eve's strategy catalog and per-pulse application.

Partial attacks can be realized three ways, all with the same expected
statistics: a Bernoulli(eps) draw per pulse, a deterministic duty cycle
(time-division multiplexing: Eve measures the first floor(eps*N) of N pulses,
R = t/T = eps), or the affine channel map of quantum.channels.partial_channel.
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, NamedTuple, Optional

import numpy as np

from quantum.channels import intercept_resend, partial_channel, weak_channel_exact
from quantum.core import Basis, DensityMatrix, born_probability, projective_measure
from quantum.pointer import Observable, PointerShape, decode_outcome, sample_outcome
from static.errors import InvalidPulse

logger = logging.getLogger(__name__)


class AttackKind(str, Enum):
    NONE = "none"
    GUESS = "guess"
    PARTIAL = "partial"
    WEAK = "weak"
    INTERCEPT_RESEND = "intercept_resend"
    PNS_PARTIAL = "pns_partial"


class BasisPolicy(str, Enum):
    RANDOM = "random"
    FIXED_Z = "fixed_z"


class Realization(str, Enum):
    BERNOULLI = "bernoulli"
    DUTY_CYCLE = "duty_cycle"
    CHANNEL = "channel"


PROBABILISTIC_KINDS = (AttackKind.PARTIAL, AttackKind.PNS_PARTIAL)


@dataclass(frozen=True)
class NoiseInjection:
    """Calibration-stage bias offset Eve applies to Bob's phase-basis interferometer"""

    offset_mv: float = 0.0
    working_voltage_v: float = 0.92
    v_pi_v: float = 1.0
    step_mv: float = 20.0
    max_steps: int = 10

    def __post_init__(self):
        if self.step_mv <= 0 or self.max_steps < 1:
            raise ValueError("injection step must be positive and allow at least one step")
        if self.v_pi_v <= 0:
            raise ValueError(f"half-wave voltage must be positive, got {self.v_pi_v}")
        steps = self.offset_mv / self.step_mv
        if self.offset_mv < 0 or abs(steps - round(steps)) > 1e-9 or round(steps) > self.max_steps:
            raise ValueError(
                f"offset {self.offset_mv} mV is not a multiple of {self.step_mv} mV within {self.max_steps} steps"
            )

    @property
    def bias_voltage_v(self) -> float:
        return self.working_voltage_v + self.offset_mv / 1000.0

    def at_step(self, k: int) -> "NoiseInjection":
        return NoiseInjection(k * self.step_mv, self.working_voltage_v, self.v_pi_v, self.step_mv, self.max_steps)


def injected_x_qber(inj: NoiseInjection) -> float:
    """Phase-basis error added by the bias offset: (1 - cos(pi * V / V_pi)) / 2"""
    phase = math.pi * inj.offset_mv / (1000.0 * inj.v_pi_v)
    return (1.0 - math.cos(phase)) / 2.0


def offset_schedule(inj: NoiseInjection) -> List[NoiseInjection]:
    return [inj.at_step(k) for k in range(inj.max_steps + 1)]


def masking_eps(q_e: float, q_env_x: float, policy: "BasisPolicy") -> float:
    """
    Partial-measurement strength whose live X-line QBER matches the calibrated
    level q_env_x + q_e, given that Eve's errors and environmental flips compose
    as independent bit flips. Clipped to [0, 1].
    """
    per_eps = 0.5 if policy is BasisPolicy.FIXED_Z else 0.25
    eve_error = q_e / (1.0 - 2.0 * q_env_x)
    return min(1.0, max(0.0, eve_error / per_eps))


@dataclass(frozen=True)
class AttackStrategy:
    kind: AttackKind = AttackKind.NONE
    eps: float = 0.0
    policy: BasisPolicy = BasisPolicy.RANDOM
    shape: Optional[PointerShape] = None
    obs: Observable = field(default_factory=Observable)
    realization: Realization = Realization.BERNOULLI
    injection: Optional[NoiseInjection] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", AttackKind(self.kind))
        object.__setattr__(self, "policy", BasisPolicy(self.policy))
        object.__setattr__(self, "realization", Realization(self.realization))
        if self.kind in PROBABILISTIC_KINDS and not 0.0 <= self.eps <= 1.0:
            raise ValueError(f"{self.kind.value} strength must lie in [0, 1], got {self.eps}")
        if self.eps < 0:
            raise ValueError(f"interaction strength must be non-negative, got {self.eps}")
        if self.kind is AttackKind.WEAK and self.shape is None:
            raise ValueError("weak attack needs a pointer shape")

    @classmethod
    def no_attack(cls, injection: Optional[NoiseInjection] = None) -> "AttackStrategy":
        return cls(AttackKind.NONE, injection=injection)

    @classmethod
    def guess_only(cls) -> "AttackStrategy":
        return cls(AttackKind.GUESS)

    @classmethod
    def partial(cls, eps: float, policy=BasisPolicy.RANDOM, realization=Realization.BERNOULLI) -> "AttackStrategy":
        return cls(AttackKind.PARTIAL, eps, policy, realization=realization)

    @classmethod
    def weak(cls, shape: PointerShape, eps: float, policy=BasisPolicy.RANDOM, obs: Observable = None) -> "AttackStrategy":
        return cls(AttackKind.WEAK, eps, policy, shape=shape, obs=obs or Observable())

    @classmethod
    def intercept_resend_attack(cls, policy=BasisPolicy.RANDOM) -> "AttackStrategy":
        return cls(AttackKind.INTERCEPT_RESEND, 1.0, policy)

    @classmethod
    def pns_partial(cls, eps: float, policy=BasisPolicy.RANDOM, realization=Realization.BERNOULLI) -> "AttackStrategy":
        return cls(AttackKind.PNS_PARTIAL, eps, policy, realization=realization)


class AttackOutcome(NamedTuple):
    eve_bit: int
    eve_measured: bool
    rho_out: DensityMatrix
    eve_basis: Optional[Basis] = None
    resolved_in_memory: bool = False  # stored photon read out after basis reconciliation


def _guess(rng: np.random.Generator) -> int:
    return 1 if rng.random() < 0.5 else 0


def policy_basis(policy: BasisPolicy, rng: np.random.Generator) -> Basis:
    if policy is BasisPolicy.FIXED_Z:
        return Basis.Z
    return Basis.Z if rng.random() < 0.5 else Basis.X


def _partial(
    strategy: AttackStrategy, rho_in: DensityMatrix, rng: np.random.Generator, measure: Optional[bool]
) -> AttackOutcome:
    measured = (rng.random() < strategy.eps) if measure is None else bool(measure)

    if strategy.realization is Realization.CHANNEL:
        restricted = Basis.Z if strategy.policy is BasisPolicy.FIXED_Z else None
        rho_out = partial_channel(rho_in, strategy.eps, basis=restricted)
        if not measured:
            return AttackOutcome(_guess(rng), False, rho_out)
        basis = policy_basis(strategy.policy, rng)
        bit, _ = projective_measure(rho_in, basis, rng)
        return AttackOutcome(bit, True, rho_out, basis)

    if not measured:
        return AttackOutcome(_guess(rng), False, rho_in)
    basis = policy_basis(strategy.policy, rng)
    bit, rho_out = projective_measure(rho_in, basis, rng)
    return AttackOutcome(bit, True, rho_out, basis)


def _weak(strategy: AttackStrategy, rho_in: DensityMatrix, rng: np.random.Generator) -> AttackOutcome:
    basis = policy_basis(strategy.policy, rng)
    rho_out = weak_channel_exact(rho_in, strategy.shape, strategy.eps, strategy.obs, basis)
    # pointer reading: Born-weighted mixture of the two shifted pointers
    component = 0 if rng.random() < born_probability(rho_in, basis, 0) else 1
    x, _ = sample_outcome(strategy.shape, strategy.eps, strategy.obs.eigenvalues[component], rng)
    bit = decode_outcome(x, strategy.shape, strategy.eps, strategy.obs)
    return AttackOutcome(bit, True, rho_out, basis)


def apply_attack(
    strategy: AttackStrategy,
    rho_in: DensityMatrix,
    alice_basis: Basis,
    photon_n: int,
    rng: np.random.Generator,
    measure: Optional[bool] = None,
) -> AttackOutcome:
    """
    Eve's action on one non-vacuum pulse.

    `measure` overrides the Bernoulli(eps) decision of probabilistic attacks
    (used by the duty-cycle realization); it is ignored by other kinds.
    """
    if photon_n < 1:
        raise InvalidPulse("vacuum pulses never reach the eavesdropper")

    kind = strategy.kind
    if kind in (AttackKind.NONE, AttackKind.GUESS):
        return AttackOutcome(_guess(rng), False, rho_in)
    if kind is AttackKind.PARTIAL:
        return _partial(strategy, rho_in, rng, measure)
    if kind is AttackKind.WEAK:
        return _weak(strategy, rho_in, rng)
    if kind is AttackKind.INTERCEPT_RESEND:
        basis = policy_basis(strategy.policy, rng)
        bit, rho_out = intercept_resend(rho_in, basis, rng)
        return AttackOutcome(bit, True, rho_out, basis)
    if kind is AttackKind.PNS_PARTIAL:
        if photon_n >= 2:
            # stored photon read out in Alice's basis after reconciliation
            bit, _ = projective_measure(rho_in, alice_basis, rng)
            return AttackOutcome(bit, True, rho_in, alice_basis, resolved_in_memory=True)
        return _partial(strategy, rho_in, rng, measure)
    raise ValueError(f"unsupported attack kind {kind}")
