"""
BB84 session state machine for the time-bin encoding.

    prepare -> photon number -> attack -> Bob -> environmental flip -> sift -> score

StandardBB84 keeps every basis-matched record as key and aborts on the combined
QBER. SimplifiedBB84 distills key from Z only and aborts on the X (monitoring)
line.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np

from qkd.attacks import AttackKind, AttackStrategy, Realization, apply_attack, injected_x_qber
from quantum.core import Basis, BasisState, DensityMatrix, dm_from_state, projective_measure
from quantum.photon_source import SourceConfig, pns_split, sample_detected_photon_number, sample_photon_number
from static.errors import EmptySiftedKey

logger = logging.getLogger(__name__)

DEFAULT_ABORT_THRESHOLD = 0.11
DEFAULT_N_PULSES = 10_000
CI_SIGMAS = 3.0


class ProtocolVariant(str, Enum):
    STANDARD = "standard"
    SIMPLIFIED = "simplified"


@dataclass(frozen=True)
class NoiseConfig:
    """
    Environmental bit-flip probabilities per measurement basis.

    `injected_x` is extra X-line error added by a calibration-stage bias offset;
    the total X flip probability is q_env_x + injected_x, clipped to 1.
    """

    q_env_z: float = 0.07
    q_env_x: float = 0.07
    affects_eve: bool = True
    injected_x: float = 0.0

    def __post_init__(self):
        for name in ("q_env_z", "q_env_x", "injected_x"):
            value = getattr(self, name)
            if not 0.0 <= value <= 0.5:
                raise ValueError(f"{name} must lie in [0, 0.5], got {value}")

    @classmethod
    def noiseless(cls) -> "NoiseConfig":
        return cls(0.0, 0.0)

    @property
    def is_zero(self) -> bool:
        return self.q_env_z == 0.0 and self.q_env_x == 0.0 and self.injected_x == 0.0

    def flip_probability(self, basis: Basis) -> float:
        if basis == Basis.Z:
            return self.q_env_z
        return min(1.0, self.q_env_x + self.injected_x)


@dataclass
class PulseRecord:
    alice_bit: int
    alice_basis: Basis
    photon_n: int
    eve_bit: int
    eve_measured: bool
    bob_basis: Basis
    bob_bit: Optional[int]

    @property
    def detected(self) -> bool:
        return self.bob_bit is not None

    @property
    def matched(self) -> bool:
        return self.detected and self.alice_basis == self.bob_basis


@dataclass(frozen=True)
class SessionStats:
    variant: ProtocolVariant
    sifted_len: int
    n_z: int
    n_x: int
    qber_z: float
    qber_x: float
    qber_combined: float
    gain: float
    aborted: bool
    ci_halfwidth: float
    q_stderr: float = 0.0
    g_stderr: float = 0.0

    @property
    def monitored_qber(self) -> float:
        return self.qber_x if self.variant is ProtocolVariant.SIMPLIFIED else self.qber_combined

    @property
    def monitored_count(self) -> int:
        return self.n_x if self.variant is ProtocolVariant.SIMPLIFIED else self.sifted_len

    def to_row(self) -> dict:
        return {
            "variant": self.variant.value,
            "sifted_len": self.sifted_len,
            "n_z": self.n_z,
            "n_x": self.n_x,
            "qber_z": self.qber_z,
            "qber_x": self.qber_x,
            "qber_combined": self.qber_combined,
            "gain": self.gain,
            "aborted": self.aborted,
            "ci_halfwidth": self.ci_halfwidth,
        }


@dataclass(frozen=True)
class SessionConfig:
    variant: ProtocolVariant = ProtocolVariant.STANDARD
    n_pulses: int = DEFAULT_N_PULSES
    basis_bias: float = 0.5
    abort_threshold: float = DEFAULT_ABORT_THRESHOLD
    post_select: bool = True

    def __post_init__(self):
        object.__setattr__(self, "variant", ProtocolVariant(self.variant))
        if self.n_pulses < 1:
            raise ValueError(f"n_pulses must be at least 1, got {self.n_pulses}")
        if not 0.0 < self.basis_bias < 1.0:
            raise ValueError(f"basis_bias must lie in (0, 1), got {self.basis_bias}")


@dataclass(frozen=True)
class SessionPlan:
    """Everything a session needs except its random stream; picklable for worker pools"""

    session: SessionConfig = field(default_factory=SessionConfig)
    source: SourceConfig = field(default_factory=SourceConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    attack: AttackStrategy = field(default_factory=AttackStrategy)

    @property
    def variant(self) -> ProtocolVariant:
        return self.session.variant

    def with_eps(self, eps: float) -> "SessionPlan":
        return replace(self, attack=replace(self.attack, eps=eps))

    def with_mu(self, mu: float) -> "SessionPlan":
        return replace(self, source=SourceConfig(mu))

    def with_attack(self, attack: AttackStrategy) -> "SessionPlan":
        return replace(self, attack=attack)

    def with_pulses(self, n_pulses: int) -> "SessionPlan":
        return replace(self, session=replace(self.session, n_pulses=n_pulses))

    def run(self, rng: np.random.Generator, calibration: bool = False) -> SessionStats:
        return run_session(
            self.variant,
            self.source,
            self.noise,
            self.attack,
            self.session.n_pulses,
            rng,
            basis_bias=self.session.basis_bias,
            abort_threshold=self.session.abort_threshold,
            post_select=self.session.post_select,
            calibration=calibration,
        )


def binomial_stderr(p: float, n: int) -> float:
    if n <= 0:
        return 0.0
    return math.sqrt(max(0.0, p * (1.0 - p)) / n)


def _choose_basis(basis_bias: float, rng: np.random.Generator) -> Basis:
    return Basis.Z if rng.random() < basis_bias else Basis.X


def alice_prepare(
    variant: ProtocolVariant, basis_bias: float, rng: np.random.Generator
) -> Tuple[int, Basis, BasisState]:
    """Uniform bit, Z with probability basis_bias. Both variants prepare all four states."""
    if not 0.0 < basis_bias < 1.0:
        raise ValueError(f"basis_bias must lie in (0, 1), got {basis_bias}")
    bit = 1 if rng.random() < 0.5 else 0
    basis = _choose_basis(basis_bias, rng)
    return bit, basis, BasisState.for_bit(basis, bit)


def bob_measure(
    rho: DensityMatrix,
    rng: np.random.Generator,
    basis_bias: float = 0.5,
    forced_basis: Optional[Basis] = None,
) -> Tuple[Basis, int]:
    """Passive beamsplitter basis choice, then a Born-rule readout"""
    basis = _choose_basis(basis_bias, rng) if forced_basis is None else Basis(forced_basis)
    bit, _ = projective_measure(rho, basis, rng)
    return basis, bit


def _errors(records: Sequence[PulseRecord]) -> int:
    return sum(1 for r in records if r.alice_bit != r.bob_bit)


def _eve_correct(records: Sequence[PulseRecord]) -> int:
    return sum(1 for r in records if r.alice_bit == r.eve_bit)


def _rate(count: int, total: int) -> float:
    return count / total if total else 0.0


def sift_and_score(
    records: Sequence[PulseRecord], variant: ProtocolVariant, abort_threshold: float = DEFAULT_ABORT_THRESHOLD
) -> SessionStats:
    variant = ProtocolVariant(variant)
    matched = [r for r in records if r.matched]
    z_matched = [r for r in matched if r.alice_basis == Basis.Z]
    x_matched = [r for r in matched if r.alice_basis == Basis.X]
    key = matched if variant is ProtocolVariant.STANDARD else z_matched
    if not key:
        raise EmptySiftedKey(f"no {variant.value} key bits survived sifting out of {len(records)} records")

    qber_z = _rate(_errors(z_matched), len(z_matched))
    qber_x = _rate(_errors(x_matched), len(x_matched))
    qber_combined = _rate(_errors(matched), len(matched))
    gain = _rate(_eve_correct(key), len(key))

    if variant is ProtocolVariant.STANDARD:
        monitored, monitored_n = qber_combined, len(matched)
    else:
        monitored, monitored_n = qber_x, len(x_matched)

    q_stderr = binomial_stderr(monitored, monitored_n)
    return SessionStats(
        variant=variant,
        sifted_len=len(key),
        n_z=len(z_matched),
        n_x=len(x_matched),
        qber_z=qber_z,
        qber_x=qber_x,
        qber_combined=qber_combined,
        gain=gain,
        aborted=monitored > abort_threshold,
        ci_halfwidth=CI_SIGMAS * q_stderr,
        q_stderr=q_stderr,
        g_stderr=binomial_stderr(gain, len(key)),
    )


def _photon_numbers(source: SourceConfig, n_pulses: int, post_select: bool, rng: np.random.Generator) -> np.ndarray:
    if post_select:
        return sample_detected_photon_number(source.mu, rng, size=n_pulses)
    return sample_photon_number(source.mu, rng, size=n_pulses)


def run_session_records(
    variant: ProtocolVariant,
    source: SourceConfig,
    noise: NoiseConfig,
    attack: AttackStrategy,
    n_pulses: int,
    rng: np.random.Generator,
    *,
    basis_bias: float = 0.5,
    abort_threshold: float = DEFAULT_ABORT_THRESHOLD,
    post_select: bool = True,
    calibration: bool = False,
) -> Tuple[SessionStats, List[PulseRecord]]:
    """
    One session, returning the per-pulse records alongside the statistics.

    With `calibration` set, the attack's NoiseInjection (if any) raises the X
    flip probability for the whole session.
    """
    variant = ProtocolVariant(variant)
    if n_pulses < 1:
        raise ValueError(f"n_pulses must be at least 1, got {n_pulses}")
    if calibration and attack.injection is not None:
        noise = replace(noise, injected_x=injected_x_qber(attack.injection))

    photon_ns = _photon_numbers(source, n_pulses, post_select, rng)
    quota = None
    if attack.realization is Realization.DUTY_CYCLE:
        quota = math.floor(attack.eps * int(np.count_nonzero(photon_ns)))

    records: List[PulseRecord] = []
    detected = 0
    for n in photon_ns:
        n = int(n)
        if n == 0:
            continue
        bit, a_basis, state = alice_prepare(variant, basis_bias, rng)
        measure = (detected < quota) if quota is not None else None
        detected += 1

        outcome = apply_attack(attack, dm_from_state(state), a_basis, n, rng, measure=measure)
        eve_bit = outcome.eve_bit
        noisy_readout = outcome.eve_measured and not outcome.resolved_in_memory
        if noise.affects_eve and noisy_readout and rng.random() < noise.flip_probability(outcome.eve_basis):
            eve_bit ^= 1

        if attack.kind is AttackKind.PNS_PARTIAL:
            _, bob_n = pns_split(n)
            if bob_n < 1:
                continue

        b_basis, b_bit = bob_measure(outcome.rho_out, rng, basis_bias)
        if rng.random() < noise.flip_probability(b_basis):
            b_bit ^= 1
        records.append(PulseRecord(bit, a_basis, n, eve_bit, outcome.eve_measured, b_basis, b_bit))

    return sift_and_score(records, variant, abort_threshold), records


def run_session(
    variant: ProtocolVariant,
    source: SourceConfig,
    noise: NoiseConfig,
    attack: AttackStrategy,
    n_pulses: int,
    rng: np.random.Generator,
    **options,
) -> SessionStats:
    stats, _ = run_session_records(variant, source, noise, attack, n_pulses, rng, **options)
    return stats
