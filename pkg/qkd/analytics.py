"""
Closed-form oracles, epsilon / mu sweeps and the Q/G efficiency metric.

Every grid point runs on its own stream derived from (master seed, grid index,
trial index), so tables are identical for any worker count.
"""
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from qkd.attacks import AttackKind, AttackStrategy, BasisPolicy
from qkd.protocol import NoiseConfig, ProtocolVariant, SessionPlan, SessionStats
from quantum.core import Basis
from quantum.photon_source import SourceConfig, poisson_pmf, prob_multi, prob_nonvacuum
from quantum.pointer import Observable, PointerShape, correct_decode_probability, overlap_chi
from static.errors import DivisionByZeroGain
from static.seeding import derive_stream

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = ["eps", "mu", "q", "g", "q_over_g", "q_stderr", "g_stderr", "source"]
HEATMAP_COLUMNS = ["mu", "eps", "g", "q", "mode"]
EFFICIENCY_SCALE = 0.1


class SweepSource(str, Enum):
    MONTE_CARLO = "MonteCarlo"
    ANALYTIC = "Analytic"


@dataclass(frozen=True)
class SweepRow:
    eps: float
    mu: Optional[float]
    q: float
    g: float
    q_stderr: float
    g_stderr: float
    source: SweepSource
    q_count: int = 0  # sample sizes behind q and g; not exported
    g_count: int = 0

    def __post_init__(self):
        if self.q_stderr < 0 or self.g_stderr < 0:
            raise ValueError("standard errors must be non-negative")

    @property
    def q_over_g(self) -> Optional[float]:
        return self.q / self.g if self.g > 0 else None

    def to_row(self) -> dict:
        return {
            "eps": self.eps,
            "mu": self.mu,
            "q": self.q,
            "g": self.g,
            "q_over_g": self.q_over_g,
            "q_stderr": self.q_stderr,
            "g_stderr": self.g_stderr,
            "source": self.source.value,
        }


@dataclass(frozen=True)
class SweepResult:
    rows: Tuple[SweepRow, ...]

    def select(self, source: SweepSource) -> List[SweepRow]:
        return [r for r in self.rows if r.source is source]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([r.to_row() for r in self.rows], columns=SWEEP_COLUMNS)


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------

def analytic_partial(eps: float) -> Tuple[float, float]:
    """Random-basis partial measurement in standard BB84: G = 1/2 + eps/4, Q = eps/4"""
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"eps must lie in [0, 1], got {eps}")
    return 0.5 + eps / 4.0, eps / 4.0


def analytic_partial_policy(
    eps: float, variant: ProtocolVariant = ProtocolVariant.STANDARD, policy: BasisPolicy = BasisPolicy.RANDOM
) -> Tuple[float, float]:
    """
    (G, monitored Q) for a partial measurement under either basis policy.

    Only simplified BB84 with a fixed-Z Eve differs from the random-basis law:
    every key bit is then measured in the right basis and every monitoring bit
    in the wrong one, giving G = 1/2 + eps/2 and Q_X = eps/2.
    """
    g, q = analytic_partial(eps)
    if ProtocolVariant(variant) is ProtocolVariant.SIMPLIFIED and BasisPolicy(policy) is BasisPolicy.FIXED_Z:
        return 0.5 + eps / 2.0, eps / 2.0
    return g, q


def _monitored(per_basis: Dict[Basis, Tuple[float, float]], variant: ProtocolVariant) -> Tuple[float, float]:
    # standard keys and monitors both bases in equal shares; simplified keys Z, monitors X
    if ProtocolVariant(variant) is ProtocolVariant.SIMPLIFIED:
        return per_basis[Basis.Z][0], per_basis[Basis.X][1]
    (g_z, q_z), (g_x, q_x) = per_basis[Basis.Z], per_basis[Basis.X]
    return (g_z + g_x) / 2.0, (q_z + q_x) / 2.0


def analytic_partial_noisy(
    eps: float,
    noise: NoiseConfig,
    variant: ProtocolVariant = ProtocolVariant.STANDARD,
    policy: BasisPolicy = BasisPolicy.RANDOM,
) -> Tuple[float, float]:
    """
    Partial-attack (G, monitored Q) composed with environmental bit flips.

    Bob's error is Eve's disturbance XOR the flip of his basis; with
    noise.affects_eve Eve's outcome is also flipped in the basis she measured.
    """
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"eps must lie in [0, 1], got {eps}")
    fixed_z = BasisPolicy(policy) is BasisPolicy.FIXED_Z
    per_basis = {}
    for basis in (Basis.Z, Basis.X):
        q_env = noise.flip_probability(basis)
        q_eve = q_env if noise.affects_eve else 0.0
        # chance that a measuring Eve picked Alice's basis
        aligned = (1.0 if basis is Basis.Z else 0.0) if fixed_z else 0.5
        g = (1.0 - eps) / 2.0 + eps * (aligned * (1.0 - q_eve) + (1.0 - aligned) / 2.0)
        q = (1.0 - eps) * q_env + eps * (aligned * q_env + (1.0 - aligned) / 2.0)
        per_basis[basis] = (g, q)
    return _monitored(per_basis, variant)


def pns_partial_analytic(
    mu: float,
    eps: float,
    variant: ProtocolVariant = ProtocolVariant.STANDARD,
    policy: BasisPolicy = BasisPolicy.RANDOM,
    noise: Optional[NoiseConfig] = None,
) -> Tuple[float, float]:
    """
    G = [P1 g1 + P(n>1)] / P(n>0), Q = [P1 q1 + P(n>1) q_env] / P(n>0)

    (g1, q1) is the single-photon partial law, noise-composed when `noise` is
    given. Multi-photon pulses reach Bob undisturbed and Eve reads her stored
    photon without error, so only Bob's environmental flips remain.
    """
    if mu <= 0:
        raise ValueError(f"mu must be positive, got {mu}")
    if noise is None or noise.is_zero:
        g1, q1 = analytic_partial_policy(eps, variant, policy)
        q_multi = 0.0
    else:
        g1, q1 = analytic_partial_noisy(eps, noise, variant, policy)
        _, q_multi = analytic_partial_noisy(0.0, noise, variant, policy)
    p_detect = prob_nonvacuum(mu)
    p1 = poisson_pmf(1, mu)
    p_multi = prob_multi(mu)
    return (p1 * g1 + p_multi) / p_detect, (p1 * q1 + p_multi * q_multi) / p_detect


def analytic_weak(
    shape: PointerShape,
    eps: float,
    obs: Observable = Observable(),
    policy: BasisPolicy = BasisPolicy.RANDOM,
    variant: ProtocolVariant = ProtocolVariant.STANDARD,
) -> Tuple[float, float]:
    """
    Expected (G, monitored Q) of the weak attack for any pointer.

    Per basis-matched bit Eve is right with probability P = CDF(eps*gap/2) when
    her coupling basis matches Alice's, otherwise with 1/2; Bob errs with
    (1 - chi)/2 when the bases differ, otherwise never.
    """
    p = correct_decode_probability(shape, eps, obs)
    flip = (1.0 - overlap_chi(shape, eps, obs, 0, 1)) / 2.0
    if ProtocolVariant(variant) is ProtocolVariant.SIMPLIFIED and BasisPolicy(policy) is BasisPolicy.FIXED_Z:
        return p, flip
    return (p + 0.5) / 2.0, flip / 2.0


def analytic_weak_gaussian(
    eps_over_delta: float,
    policy: BasisPolicy = BasisPolicy.RANDOM,
    variant: ProtocolVariant = ProtocolVariant.STANDARD,
) -> Tuple[float, float]:
    if eps_over_delta < 0:
        raise ValueError(f"eps/delta must be non-negative, got {eps_over_delta}")
    return analytic_weak(PointerShape.gaussian(1.0), eps_over_delta, Observable(), policy, variant)


def analytic_for(
    attack: AttackStrategy, variant: ProtocolVariant, source: SourceConfig
) -> Optional[Tuple[float, float]]:
    """Closed-form (G, monitored Q) for a noiseless session, or None when no oracle applies"""
    kind = attack.kind
    if kind in (AttackKind.NONE, AttackKind.GUESS):
        return 0.5, 0.0
    if kind is AttackKind.PARTIAL:
        return analytic_partial_policy(attack.eps, variant, attack.policy)
    if kind is AttackKind.INTERCEPT_RESEND:
        return analytic_partial_policy(1.0, variant, attack.policy)
    if kind is AttackKind.WEAK:
        return analytic_weak(attack.shape, attack.eps, attack.obs, attack.policy, variant)
    if kind is AttackKind.PNS_PARTIAL:
        return pns_partial_analytic(source.mu, attack.eps, variant, attack.policy)
    return None


def efficiency(q: float, g: float) -> float:
    if g <= 0:
        raise DivisionByZeroGain(f"efficiency undefined for gain {g}")
    return q / g


def efficiency_table(eps_grid: Sequence[float], scale: float = EFFICIENCY_SCALE) -> pd.DataFrame:
    """
    Q/G of the partial attack and the three weak pointers at each eps.

    Pointers are sized so each reaches the strong-measurement limit by eps = 1:
    Gaussian delta = scale, rect L = 2*scale, triangle L = scale.
    """
    pointers = {
        "gaussian": PointerShape.gaussian(scale),
        "rect": PointerShape.rect(2.0 * scale),
        "triangle": PointerShape.triangle(scale),
    }
    rows = []
    for eps in eps_grid:
        g, q = analytic_partial(eps)
        row = {"eps": float(eps), "partial": efficiency(q, g)}
        for name, shape in pointers.items():
            g, q = analytic_weak(shape, eps)
            row[name] = efficiency(q, g)
        rows.append(row)
    return pd.DataFrame(rows, columns=["eps", "partial", *pointers])


# ---------------------------------------------------------------------------
# statistics helpers
# ---------------------------------------------------------------------------

def binomial_band(expected: float, n: int, sigmas: float = 3.0) -> float:
    """sigmas * sqrt(p(1-p)/n) around the expected rate, plus a half-count continuity term"""
    if n <= 0:
        return math.inf
    return sigmas * math.sqrt(max(0.0, expected * (1.0 - expected)) / n) + 0.5 / n


def linear_fit(x: Sequence[float], y: Sequence[float]) -> Tuple[float, float, float]:
    """Least squares (slope, intercept, r^2)"""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    slope, intercept = np.polyfit(x, y, 1)
    residual = y - (slope * x + intercept)
    total = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(residual**2)) / total if total > 0 else 1.0
    return float(slope), float(intercept), r2


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    slope, _, _ = linear_fit(np.log(np.asarray(x, dtype=float)), np.log(np.asarray(y, dtype=float)))
    return slope


# ---------------------------------------------------------------------------
# Monte Carlo grids
# ---------------------------------------------------------------------------

def resolve_workers(workers: Optional[int]) -> int:
    if not workers:
        return os.cpu_count() or 1
    return max(1, int(workers))


def _run_point(task: Tuple[SessionPlan, int, int, int]) -> SessionStats:
    plan, seed, grid_index, trial_index = task
    return plan.run(derive_stream(seed, grid_index, trial_index))


def run_grid(plans: Sequence[SessionPlan], seed: int, workers: Optional[int] = 1, desc: str = "grid") -> List[SessionStats]:
    """Run one session per plan; plan k uses stream (seed, k, 0). Output order follows input order."""
    tasks = [(plan, seed, k, 0) for k, plan in enumerate(plans)]
    n_workers = min(resolve_workers(workers), len(tasks))
    logger.info(f"🚀 running {len(tasks)} sessions on {n_workers} worker(s)")
    if n_workers <= 1:
        return [_run_point(t) for t in tqdm(tasks, desc=desc, disable=None)]
    with ProcessPoolExecutor(max_workers=n_workers) as pool:
        return list(tqdm(pool.map(_run_point, tasks), total=len(tasks), desc=desc, disable=None))


def _attack_depends_on_mu(attack: AttackStrategy) -> bool:
    return attack.kind is AttackKind.PNS_PARTIAL


def sweep_epsilon(
    plan: SessionPlan,
    eps_grid: Sequence[float],
    trials_per_point: int,
    seed: int,
    workers: Optional[int] = 1,
) -> SweepResult:
    """
    One Monte Carlo row per eps, each followed by its Analytic row when a closed
    form exists and the session is noiseless.
    """
    if not eps_grid:
        raise ValueError("eps grid must not be empty")
    if trials_per_point < 1:
        raise ValueError(f"trials_per_point must be positive, got {trials_per_point}")
    plans = [plan.with_eps(float(eps)).with_pulses(trials_per_point) for eps in eps_grid]
    stats = run_grid(plans, seed, workers, desc="eps sweep")

    mu = plan.source.mu
    rows: List[SweepRow] = []
    for point, s in zip(plans, stats):
        eps = point.attack.eps
        rows.append(
            SweepRow(eps, mu, s.monitored_qber, s.gain, s.q_stderr, s.g_stderr, SweepSource.MONTE_CARLO,
                     s.monitored_count, s.sifted_len)
        )
        closed = analytic_for(point.attack, point.variant, point.source) if point.noise.is_zero else None
        if closed is not None:
            g, q = closed
            rows.append(SweepRow(eps, mu, q, g, 0.0, 0.0, SweepSource.ANALYTIC))
    logger.info(f"✅ eps sweep finished: {len(stats)} points")
    return SweepResult(tuple(rows))


def heatmap_mu_epsilon(
    plan: SessionPlan,
    eps_grid: Sequence[float],
    mu_grid: Sequence[float],
    mode: SweepSource,
    trials_per_cell: int = 10_000,
    seed: int = 0,
    workers: Optional[int] = 1,
) -> pd.DataFrame:
    """
    Row-major (mu outer, eps inner) grid of the PNS-combined attack's (G, Q).

    Analytic mode evaluates pns_partial_analytic under the plan's noise;
    MonteCarlo mode runs one session per cell with stream (seed, cell index, 0).
    """
    if not eps_grid or not mu_grid:
        raise ValueError("heatmap grids must not be empty")
    mode = SweepSource(mode)
    attack = plan.attack
    if attack.kind is not AttackKind.PNS_PARTIAL:
        attack = AttackStrategy.pns_partial(0.0, attack.policy, attack.realization)
    cells = [(float(mu), float(eps)) for mu in mu_grid for eps in eps_grid]

    if mode is SweepSource.ANALYTIC:
        values = [pns_partial_analytic(mu, eps, plan.variant, attack.policy, plan.noise) for mu, eps in cells]
    else:
        plans = [
            plan.with_attack(attack).with_mu(mu).with_eps(eps).with_pulses(trials_per_cell) for mu, eps in cells
        ]
        values = [(s.gain, s.monitored_qber) for s in run_grid(plans, seed, workers, desc="heatmap")]

    rows = [
        {"mu": mu, "eps": eps, "g": g, "q": q, "mode": mode.value} for (mu, eps), (g, q) in zip(cells, values)
    ]
    return pd.DataFrame(rows, columns=HEATMAP_COLUMNS)
