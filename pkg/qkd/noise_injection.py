"""
Calibration-stage noise injection followed by a live partial attack.

During calibration Eve detunes Bob's phase-basis interferometer so the parties
record an inflated X-line baseline (environmental plus injected error). In the
live phase the offset is removed and Eve measures with strength eps, hiding
under the baseline she planted.
"""
import logging
from typing import List, Optional, Sequence

import pandas as pd

from qkd.attacks import AttackStrategy, NoiseInjection, injected_x_qber, masking_eps, offset_schedule
from qkd.protocol import SessionPlan
from static.seeding import derive_stream

logger = logging.getLogger(__name__)

NOISE_INJECTION_COLUMNS = [
    "offset_mv",
    "voltage_v",
    "q_e",
    "eps",
    "calibrated_qber_x",
    "expected_calibrated_qber_x",
    "live_qber_x",
    "masked",
]
DEFAULT_EPS_GRID = (0.0, 0.05, 0.1, 0.15, 0.2)


def expected_calibrated_qber_x(q_env_x: float, inj: NoiseInjection) -> float:
    return min(1.0, q_env_x + injected_x_qber(inj))


def run_noise_injection_scenario(
    plan: SessionPlan,
    inj: NoiseInjection,
    eps_grid: Sequence[float] = DEFAULT_EPS_GRID,
    seed: int = 0,
    step_index: int = 0,
) -> pd.DataFrame:
    """
    One calibration session at the given offset, then one live session per eps.

    Streams: calibration uses (seed, 0, step_index), live point i uses
    (seed, i + 1, step_index). A live row is `masked` when its X-line QBER does
    not exceed the calibrated level.
    """
    calibration = plan.with_attack(AttackStrategy.no_attack(injection=inj))
    calibrated = calibration.run(derive_stream(seed, 0, step_index), calibration=True).qber_x
    expected = expected_calibrated_qber_x(plan.noise.q_env_x, inj)
    q_e = injected_x_qber(inj)
    logger.info(
        f"📊 calibration at {inj.offset_mv:g} mV: measured Q_X {calibrated:.4f}, expected {expected:.4f}, "
        f"masking eps {masking_eps(q_e, plan.noise.q_env_x, plan.attack.policy):.4f}"
    )

    rows = []
    for i, eps in enumerate(eps_grid):
        live_attack = AttackStrategy.partial(float(eps), plan.attack.policy, plan.attack.realization)
        live = plan.with_attack(live_attack).run(derive_stream(seed, i + 1, step_index)).qber_x
        rows.append(
            {
                "offset_mv": inj.offset_mv,
                "voltage_v": inj.bias_voltage_v,
                "q_e": q_e,
                "eps": float(eps),
                "calibrated_qber_x": calibrated,
                "expected_calibrated_qber_x": expected,
                "live_qber_x": live,
                "masked": live <= calibrated,
            }
        )
    return pd.DataFrame(rows, columns=NOISE_INJECTION_COLUMNS)


def run_injection_sweep(
    plan: SessionPlan,
    inj: NoiseInjection,
    eps_grid: Sequence[float] = DEFAULT_EPS_GRID,
    seed: int = 0,
    offsets: Optional[List[NoiseInjection]] = None,
) -> pd.DataFrame:
    """The scenario at every offset of the schedule (0, step, ..., max_steps*step)"""
    schedule = offsets if offsets is not None else offset_schedule(inj)
    frames = [run_noise_injection_scenario(plan, step, eps_grid, seed, k) for k, step in enumerate(schedule)]
    logger.info(f"✅ noise injection sweep finished: {len(schedule)} offsets x {len(eps_grid)} eps")
    return pd.concat(frames, ignore_index=True)


def calibration_curve(plan: SessionPlan, inj: NoiseInjection, seed: int = 0) -> pd.DataFrame:
    """Calibration-phase X-line QBER at each scheduled offset, without the live phase"""
    rows = []
    for k, step in enumerate(offset_schedule(inj)):
        stats = plan.with_attack(AttackStrategy.no_attack(injection=step)).run(derive_stream(seed, 0, k), calibration=True)
        rows.append(
            {
                "offset_mv": step.offset_mv,
                "q_e": injected_x_qber(step),
                "calibrated_qber_x": stats.qber_x,
                "expected_calibrated_qber_x": expected_calibrated_qber_x(plan.noise.q_env_x, step),
                "n_x": stats.n_x,
            }
        )
    return pd.DataFrame(rows)
