"""
Run configuration: TOML document -> validated RunConfig.

    seed = 7
    variant = "simplified"

    [attack]
    kind = "partial"
    eps = 0.5
    policy = "fixed_z"

Unknown keys are rejected; every error names the dotted key it concerns.
"""
import logging
from dataclasses import dataclass
from typing import Any, List, Optional, Tuple

import toml
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationInfo, field_validator
from pydantic import ValidationError as PydanticValidationError
from pydantic_settings import BaseSettings, SettingsConfigDict

from qkd.attacks import AttackKind, AttackStrategy, BasisPolicy, NoiseInjection, PROBABILISTIC_KINDS, Realization
from qkd.protocol import NoiseConfig, ProtocolVariant, SessionConfig, SessionPlan
from quantum.photon_source import SourceConfig
from quantum.pointer import Observable, PointerKind, PointerShape
from static.errors import ParseError, UnknownKey, ValidationError
from static.seeding import MAX_SEED

logger = logging.getLogger(__name__)


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class AttackSection(_Section):
    kind: AttackKind = AttackKind.NONE
    eps: float = 0.0
    policy: BasisPolicy = BasisPolicy.RANDOM
    realization: Realization = Realization.BERNOULLI
    pointer: PointerKind = PointerKind.GAUSSIAN
    width: float = Field(1.0, gt=0)
    center: float = 0.0
    eigenvalues: Tuple[float, float] = (1.0, -1.0)

    @field_validator("eps")
    @classmethod
    def eps_in_range(cls, v: float, info: ValidationInfo) -> float:
        if info.data.get("kind") in PROBABILISTIC_KINDS and not 0.0 <= v <= 1.0:
            raise ValueError("must lie in [0, 1] for partial attacks")
        if v < 0:
            raise ValueError("must be non-negative")
        return v

    @field_validator("eigenvalues")
    @classmethod
    def distinct_eigenvalues(cls, v: Tuple[float, float]) -> Tuple[float, float]:
        if v[0] == v[1]:
            raise ValueError("eigenvalues must differ")
        return v


class SourceSection(_Section):
    mu: float = Field(0.1, gt=0)


class NoiseSection(_Section):
    q_env_z: float = Field(0.07, ge=0, le=0.5)
    q_env_x: float = Field(0.07, ge=0, le=0.5)
    affects_eve: bool = True


class SessionSection(_Section):
    n_pulses: int = Field(10_000, ge=1)
    trials: int = Field(10_000, ge=1)
    abort_threshold: float = Field(0.11, ge=0, le=1)
    basis_bias: float = Field(0.5, gt=0, lt=1)
    post_select: bool = True
    workers: int = Field(0, ge=0)


class SweepSection(_Section):
    eps_grid: List[float] = Field(default_factory=lambda: [0.0, 0.25, 0.5, 0.75, 1.0], min_length=1)
    mu_grid: List[float] = Field(default_factory=lambda: [0.01, 0.1, 0.5, 1.0, 10.0], min_length=1)

    @field_validator("eps_grid")
    @classmethod
    def eps_non_negative(cls, v: List[float]) -> List[float]:
        if any(e < 0 for e in v):
            raise ValueError("grid values must be non-negative")
        return v

    @field_validator("mu_grid")
    @classmethod
    def mu_positive(cls, v: List[float]) -> List[float]:
        if any(m <= 0 for m in v):
            raise ValueError("grid values must be positive")
        return v


class InjectionSection(_Section):
    step_mv: float = Field(20.0, gt=0)
    max_steps: int = Field(10, ge=1)
    offset_mv: float = Field(0.0, ge=0)
    working_voltage_v: float = 0.92
    v_pi_v: float = Field(1.0, gt=0)

    @field_validator("offset_mv")
    @classmethod
    def offset_on_schedule(cls, v: float, info: ValidationInfo) -> float:
        step = info.data.get("step_mv")
        max_steps = info.data.get("max_steps")
        if step and max_steps:
            k = v / step
            if abs(k - round(k)) > 1e-9 or round(k) > max_steps:
                raise ValueError(f"must be a multiple of {step} mV, at most {max_steps} steps")
        return v


class RunConfig(_Section):
    seed: int = Field(0, ge=0, le=MAX_SEED)
    output: str = "results.csv"
    variant: ProtocolVariant = ProtocolVariant.STANDARD
    attack: AttackSection = Field(default_factory=AttackSection)
    source: SourceSection = Field(default_factory=SourceSection)
    noise: NoiseSection = Field(default_factory=NoiseSection)
    session: SessionSection = Field(default_factory=SessionSection)
    sweep: SweepSection = Field(default_factory=SweepSection)
    injection: InjectionSection = Field(default_factory=InjectionSection)

    def pointer_shape(self) -> PointerShape:
        return PointerShape(self.attack.pointer, self.attack.width, self.attack.center)

    def injection_config(self) -> NoiseInjection:
        i = self.injection
        return NoiseInjection(i.offset_mv, i.working_voltage_v, i.v_pi_v, i.step_mv, i.max_steps)

    def attack_strategy(self, eps: Optional[float] = None) -> AttackStrategy:
        a = self.attack
        shape = self.pointer_shape() if a.kind is AttackKind.WEAK else None
        return AttackStrategy(
            kind=a.kind,
            eps=a.eps if eps is None else eps,
            policy=a.policy,
            shape=shape,
            obs=Observable(a.eigenvalues),
            realization=a.realization,
        )

    def session_plan(self) -> SessionPlan:
        s = self.session
        return SessionPlan(
            session=SessionConfig(self.variant, s.n_pulses, s.basis_bias, s.abort_threshold, s.post_select),
            source=SourceConfig(self.source.mu),
            noise=NoiseConfig(self.noise.q_env_z, self.noise.q_env_x, self.noise.affects_eve),
            attack=self.attack_strategy(),
        )


class EnvOverrides(BaseSettings):
    """Process environment (and .env) values that override the config file"""

    model_config = SettingsConfigDict(env_file=".env", extra="ignore")

    sim_seed: Optional[int] = Field(None, ge=0, le=MAX_SEED)


def _dotted(loc: Tuple[Any, ...]) -> Optional[str]:
    parts = [str(p) for p in loc if not isinstance(p, int)]
    return ".".join(parts) or None


def _check_cross_section(config: RunConfig) -> None:
    if config.attack.kind in PROBABILISTIC_KINDS and any(e > 1.0 for e in config.sweep.eps_grid):
        raise ValidationError("grid values must lie in [0, 1] for partial attacks", key="sweep.eps_grid")


def parse_config(text: str) -> RunConfig:
    """Validated RunConfig from a TOML document; an empty document yields all defaults"""
    try:
        document = toml.loads(text or "")
    except toml.TomlDecodeError as e:
        raise ParseError(f"malformed config document: {e}") from e

    try:
        config = RunConfig.model_validate(document)
    except PydanticValidationError as e:
        first = e.errors()[0]
        key = _dotted(first["loc"])
        if first["type"] == "extra_forbidden":
            raise UnknownKey(f"unknown config key '{key}'", key=key) from e
        raise ValidationError(f"invalid value for '{key}': {first['msg']}", key=key) from e

    _check_cross_section(config)
    return config


@dataclass
class Overrides:
    seed: Optional[int] = None
    output: Optional[str] = None
    trials: Optional[int] = None
    workers: Optional[int] = None


class ConfigHandler:
    """Loads a config file once and applies flag / environment overrides"""

    def __init__(self, path: Optional[str] = None):
        self.path = path
        self._config_cache: Optional[RunConfig] = None
        load_dotenv()

    def load_config(self) -> RunConfig:
        if self._config_cache is not None:
            return self._config_cache

        text = ""
        if self.path:
            try:
                with open(self.path, "r", encoding="utf-8") as f:
                    text = f.read()
            except OSError as e:
                raise ParseError(f"cannot read config file {self.path}: {e}") from e

        self._config_cache = parse_config(text)
        logger.info(f"✅ Loaded config from {self.path or 'defaults'}")
        return self._config_cache

    def resolve(self, overrides: Overrides) -> RunConfig:
        """Seed precedence: flag, then SIM_SEED, then the file"""
        config = self.load_config()
        try:
            env = EnvOverrides()
        except PydanticValidationError as e:
            raise ValidationError(f"invalid SIM_SEED: {e.errors()[0]['msg']}", key="SIM_SEED") from e

        update = {}
        seed = overrides.seed if overrides.seed is not None else env.sim_seed
        if seed is not None:
            if not 0 <= seed <= MAX_SEED:
                raise ValidationError(f"seed must be a 64-bit unsigned integer, got {seed}", key="seed")
            update["seed"] = seed
        if overrides.output is not None:
            update["output"] = overrides.output

        session_update = {}
        if overrides.trials is not None:
            if overrides.trials < 1:
                raise ValidationError("trials must be positive", key="session.trials")
            session_update["trials"] = overrides.trials
        if overrides.workers is not None:
            if overrides.workers < 0:
                raise ValidationError("workers must be non-negative", key="session.workers")
            session_update["workers"] = overrides.workers
        if session_update:
            update["session"] = config.session.model_copy(update=session_update)

        return config.model_copy(update=update)

    def get_field(self, field_path: str, default: Any = None) -> Any:
        """Config value by dotted path, e.g. 'attack.eps'"""
        current: Any = self.load_config()
        for key in field_path.split("."):
            if isinstance(current, BaseModel) and key in type(current).model_fields:
                current = getattr(current, key)
            else:
                return default
        return current
