import json
import logging
import sys
import uuid
from dataclasses import dataclass
from typing import Callable, Optional

import click
import pandas as pd

from qkd.analytics import SweepSource, heatmap_mu_epsilon, resolve_workers, sweep_epsilon
from qkd.attacks import AttackStrategy, BasisPolicy
from qkd.noise_injection import DEFAULT_EPS_GRID, run_injection_sweep
from qkd.validation import all_passed, run_validation
from static.config_utils import ConfigHandler, Overrides, RunConfig
from static.errors import ConfigError, SimulationError
from static.results_writer import ResultsWriter
from static.seeding import derive_stream
from static.unified_logger import UnifiedLogger

logger = logging.getLogger(__name__)

EXIT_CONFIG = 2
EXIT_SIMULATION = 3
EXIT_VALIDATION = 4

RUN_COLUMNS = [
    "variant", "sifted_len", "n_z", "n_x", "qber_z", "qber_x", "qber_combined", "gain", "aborted", "ci_halfwidth",
]


class ExperimentPipeline:
    """One configured experiment: builds the session plan, runs a command, writes the CSV"""

    def __init__(self, config: RunConfig, log_level: str = "INFO"):
        self.config = config
        self.run_id = uuid.uuid4().hex[:8]
        self.log = UnifiedLogger(self.run_id, "experiment", log_level)
        self.writer = ResultsWriter(config.output)
        self.workers = resolve_workers(config.session.workers)

    def _metadata(self, command: str) -> dict:
        return {
            "command": command,
            "run_id": self.run_id,
            "seed": self.config.seed,
            "workers": self.workers,
            "config": self.config.model_dump(mode="json"),
        }

    def execute(self, command: str, step: Callable[[], pd.DataFrame]) -> pd.DataFrame:
        try:
            self.log.info(f"🚀 Starting {command} (seed {self.config.seed}, {self.workers} worker(s))")
            frame = step()
            self.writer.save_table(frame, self._metadata(command))
            self.log.info(f"✅ {command} completed: {len(frame)} rows -> {self.config.output}")
            return frame

        except Exception as e:
            self.log.error(f"❌ {command} failed: {e}")
            raise

        finally:
            self.log.save_logs(self.writer.log_directory)

    def run_single(self) -> pd.DataFrame:
        plan = self.config.session_plan()
        stats = plan.run(derive_stream(self.config.seed, 0, 0))
        self.log.info(
            f"📊 sifted {stats.sifted_len}, Q_Z {stats.qber_z:.4f}, Q_X {stats.qber_x:.4f}, G {stats.gain:.4f}",
            {"aborted": stats.aborted},
        )
        if stats.aborted:
            self.log.warning("⚠️ monitored QBER above the abort threshold")
        return pd.DataFrame([stats.to_row()], columns=RUN_COLUMNS)

    def run_sweep(self) -> pd.DataFrame:
        result = sweep_epsilon(
            self.config.session_plan(),
            self.config.sweep.eps_grid,
            self.config.session.trials,
            self.config.seed,
            self.workers,
        )
        return result.to_frame()

    def run_heatmap(self, mode: str) -> pd.DataFrame:
        modes = [SweepSource.ANALYTIC, SweepSource.MONTE_CARLO] if mode == "both" else [SweepSource(mode)]
        frames = [
            heatmap_mu_epsilon(
                self.config.session_plan(),
                self.config.sweep.eps_grid,
                self.config.sweep.mu_grid,
                m,
                self.config.session.trials,
                self.config.seed,
                self.workers,
            )
            for m in modes
        ]
        return pd.concat(frames, ignore_index=True)

    def run_noise_injection(self) -> pd.DataFrame:
        plan = self.config.session_plan()
        # live phase defaults to a fixed-Z Eve on [0, 0.2] unless the file says otherwise
        if "policy" not in self.config.attack.model_fields_set:
            plan = plan.with_attack(AttackStrategy.partial(0.0, BasisPolicy.FIXED_Z, plan.attack.realization))
        eps_grid = self.config.sweep.eps_grid if "eps_grid" in self.config.sweep.model_fields_set else DEFAULT_EPS_GRID
        return run_injection_sweep(plan, self.config.injection_config(), eps_grid, self.config.seed)


@dataclass
class GlobalOptions:
    config_path: Optional[str]
    overrides: Overrides
    log_level: str


def _fail(exc: Exception, code: int, key: Optional[str] = None):
    click.echo(json.dumps({"error": type(exc).__name__, "key": key, "message": str(exc)}), err=True)
    sys.exit(code)


def _load(options: GlobalOptions) -> RunConfig:
    try:
        return ConfigHandler(options.config_path).resolve(options.overrides)
    except ConfigError as e:
        _fail(e, EXIT_CONFIG, e.key)


def _run_pipeline(options: GlobalOptions, command: str, step: Callable[[ExperimentPipeline], pd.DataFrame]):
    config = _load(options)
    pipeline = ExperimentPipeline(config, options.log_level)
    try:
        pipeline.execute(command, lambda: step(pipeline))
    except (SimulationError, ValueError, OSError) as e:
        _fail(e, EXIT_SIMULATION)


@click.group()
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None, help="TOML run configuration")
@click.option("--seed", type=int, default=None, help="Master seed (overrides SIM_SEED and the config file)")
@click.option("--out", "output", type=click.Path(dir_okay=False), default=None, help="CSV output path")
@click.option("--trials", type=int, default=None, help="Sessions length per grid point / validation base trials")
@click.option("--workers", type=int, default=None, help="Worker processes (0 = all cores)")
@click.option("--log-level", default="INFO", type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False))
@click.pass_context
def cli(ctx, config_path, seed, output, trials, workers, log_level):
    """Time-bin BB84 eavesdropping simulator"""
    logging.basicConfig(level=getattr(logging, log_level.upper()), format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
    ctx.obj = GlobalOptions(config_path, Overrides(seed, output, trials, workers), log_level.upper())


@cli.command()
@click.pass_obj
def run(options: GlobalOptions):
    """Run one session and write its statistics"""
    _run_pipeline(options, "run", ExperimentPipeline.run_single)


@cli.command()
@click.pass_obj
def sweep(options: GlobalOptions):
    """Sweep the attack strength over sweep.eps_grid"""
    _run_pipeline(options, "sweep", ExperimentPipeline.run_sweep)


@cli.command()
@click.option("--mode", type=click.Choice(["Analytic", "MonteCarlo", "both"]), default="both")
@click.pass_obj
def heatmap(options: GlobalOptions, mode: str):
    """(G, Q) of the PNS-combined attack over sweep.mu_grid x sweep.eps_grid"""
    _run_pipeline(options, "heatmap", lambda p: p.run_heatmap(mode))


@cli.command("noise-injection")
@click.pass_obj
def noise_injection(options: GlobalOptions):
    """Calibration-stage noise injection followed by a live partial attack"""
    _run_pipeline(options, "noise-injection", ExperimentPipeline.run_noise_injection)


@cli.command()
@click.pass_obj
def validate(options: GlobalOptions):
    """Run the oracle-agreement and invariant suite"""
    config = _load(options)
    try:
        results = run_validation(config.session.trials, config.seed, resolve_workers(config.session.workers))
    except (SimulationError, ValueError) as e:
        _fail(e, EXIT_SIMULATION)
    for result in results:
        click.echo(result.line())
    if not all_passed(results):
        sys.exit(EXIT_VALIDATION)


if __name__ == "__main__":
    cli()
