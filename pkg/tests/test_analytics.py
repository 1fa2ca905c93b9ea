"""
Tests for qkd/analytics.py: closed forms, sweeps, heatmaps and the efficiency metric.
"""
import json
import math
import os
from pathlib import Path

import pytest
from scipy import stats

from qkd.analytics import (
    HEATMAP_COLUMNS,
    SWEEP_COLUMNS,
    SweepRow,
    SweepSource,
    analytic_for,
    analytic_partial,
    analytic_partial_noisy,
    analytic_partial_policy,
    analytic_weak,
    analytic_weak_gaussian,
    binomial_band,
    efficiency,
    efficiency_table,
    heatmap_mu_epsilon,
    linear_fit,
    loglog_slope,
    pns_partial_analytic,
    resolve_workers,
    sweep_epsilon,
)
from qkd.attacks import AttackStrategy, BasisPolicy
from qkd.protocol import NoiseConfig, ProtocolVariant, SessionConfig, SessionPlan
from quantum.photon_source import SourceConfig
from quantum.pointer import Observable, PointerShape
from static.errors import DivisionByZeroGain
from static.results_writer import ResultsWriter
from static.seeding import derive_stream

FIXTURES = Path(__file__).parent / "fixtures"
STANDARD = ProtocolVariant.STANDARD
SIMPLIFIED = ProtocolVariant.SIMPLIFIED


def _noiseless_plan(attack: AttackStrategy, variant=STANDARD, mu: float = 0.1) -> SessionPlan:
    return SessionPlan(SessionConfig(variant, 1_000), SourceConfig(mu), NoiseConfig.noiseless(), attack)


class TestClosedForms:
    @pytest.mark.parametrize("eps, expected", [(0.0, (0.5, 0.0)), (0.5, (0.625, 0.125)), (1.0, (0.75, 0.25))])
    def test_partial_law(self, eps, expected):
        assert analytic_partial(eps) == pytest.approx(expected)

    def test_partial_out_of_range(self):
        with pytest.raises(ValueError):
            analytic_partial(1.2)

    def test_fixed_z_simplified(self):
        assert analytic_partial_policy(0.4, SIMPLIFIED, BasisPolicy.FIXED_Z) == pytest.approx((0.7, 0.2))

    def test_fixed_z_standard_keeps_random_law(self):
        assert analytic_partial_policy(0.4, STANDARD, BasisPolicy.FIXED_Z) == pytest.approx(analytic_partial(0.4))

    def test_pns_reference_point(self):
        g, q = pns_partial_analytic(0.2, 1.0)
        assert g == pytest.approx(0.77417, abs=1e-5)
        assert q == pytest.approx(0.22583, abs=1e-5)

    @pytest.mark.parametrize("eps", [0.0, 0.25, 0.5, 0.75, 1.0])
    def test_pns_vanishing_mu_is_partial(self, eps):
        assert pns_partial_analytic(1e-6, eps) == pytest.approx(analytic_partial(eps), abs=1e-5)

    @pytest.mark.parametrize("eps", [0.0, 0.5, 1.0])
    def test_pns_large_mu_saturates(self, eps):
        g, q = pns_partial_analytic(10.0, eps)
        assert g > 0.999
        assert q < 5e-4

    def test_pns_rejects_nonpositive_mu(self):
        with pytest.raises(ValueError):
            pns_partial_analytic(0.0, 0.5)

    @pytest.mark.parametrize("variant", [STANDARD, SIMPLIFIED])
    @pytest.mark.parametrize("policy", [BasisPolicy.RANDOM, BasisPolicy.FIXED_Z])
    @pytest.mark.parametrize("eps", [0.0, 0.4, 1.0])
    def test_noisy_law_without_noise_is_partial_law(self, variant, policy, eps):
        noisy = analytic_partial_noisy(eps, NoiseConfig.noiseless(), variant, policy)
        assert noisy == pytest.approx(analytic_partial_policy(eps, variant, policy))

    def test_noisy_law_composes_flips(self):
        g, q = analytic_partial_noisy(0.2, NoiseConfig(0.07, 0.07), SIMPLIFIED, BasisPolicy.FIXED_Z)
        e, n = 0.1, 0.07
        assert q == pytest.approx(e + n - 2 * e * n)
        assert g == pytest.approx(0.4 + 0.2 * 0.93)

    def test_noisy_law_blind_eve(self):
        noise = NoiseConfig(0.07, 0.07, affects_eve=False)
        g, _ = analytic_partial_noisy(1.0, noise, SIMPLIFIED, BasisPolicy.FIXED_Z)
        assert g == pytest.approx(1.0)

    def test_pns_under_noise_keeps_stored_photons_exact(self):
        g, q = pns_partial_analytic(10.0, 1.0, noise=NoiseConfig())
        assert g > 0.999
        assert q == pytest.approx(0.07, abs=1e-3)

    def test_pns_zero_noise_matches_noiseless_path(self):
        assert pns_partial_analytic(0.2, 1.0, noise=NoiseConfig.noiseless()) == pns_partial_analytic(0.2, 1.0)

    def test_weak_gaussian_regression(self):
        frozen = json.loads((FIXTURES / "weak_gaussian_regression.json").read_text())
        g, q = analytic_weak_gaussian(frozen["eps_over_delta"])
        assert g == pytest.approx(frozen["g"], abs=frozen["tolerance"])
        assert q == pytest.approx(frozen["q"], abs=frozen["tolerance"])

    def test_weak_gaussian_regression_against_seeded_run(self):
        frozen = json.loads((FIXTURES / "weak_gaussian_regression.json").read_text())
        run = frozen["monte_carlo"]
        attack = AttackStrategy.weak(PointerShape.gaussian(1.0), frozen["eps_over_delta"])
        plan = SessionPlan(
            SessionConfig(STANDARD, run["n_pulses"]), SourceConfig(run["mu"]), NoiseConfig.noiseless(), attack
        )
        stats = plan.run(derive_stream(run["seed"]))
        band_g = binomial_band(frozen["g"], stats.sifted_len, run["sigmas"])
        band_q = binomial_band(frozen["q"], stats.sifted_len, run["sigmas"])
        assert abs(stats.gain - frozen["g"]) <= band_g
        assert abs(stats.qber_combined - frozen["q"]) <= band_q

    def test_weak_gaussian_fixed_z_simplified(self):
        g, q = analytic_weak_gaussian(1.0, BasisPolicy.FIXED_Z, SIMPLIFIED)
        assert g == pytest.approx(stats.norm.cdf(1.0))
        assert q == pytest.approx((1 - math.exp(-0.5)) / 2)

    def test_weak_rect_strong_limit_is_intercept_resend(self):
        assert analytic_weak(PointerShape.rect(1.0), 1.0) == pytest.approx((0.75, 0.25))

    def test_weak_zero_coupling_is_a_guess(self):
        assert analytic_weak(PointerShape.triangle(1.0), 0.0) == pytest.approx((0.5, 0.0), abs=1e-8)

    def test_analytic_for_dispatch(self):
        source = SourceConfig(0.1)
        assert analytic_for(AttackStrategy.no_attack(), STANDARD, source) == (0.5, 0.0)
        assert analytic_for(AttackStrategy.intercept_resend_attack(), STANDARD, source) == pytest.approx((0.75, 0.25))
        assert analytic_for(AttackStrategy.pns_partial(0.3), STANDARD, source) == pytest.approx(
            pns_partial_analytic(0.1, 0.3)
        )


class TestWeakSessions:
    @pytest.mark.parametrize(
        "shape, eps",
        [(PointerShape.gaussian(1.0), 1.0), (PointerShape.rect(1.0), 0.3), (PointerShape.triangle(1.0), 0.5)],
    )
    @pytest.mark.parametrize("variant, policy", [(STANDARD, BasisPolicy.RANDOM), (SIMPLIFIED, BasisPolicy.FIXED_Z)])
    def test_monte_carlo_tracks_closed_form(self, shape, eps, variant, policy):
        attack = AttackStrategy.weak(shape, eps, policy)
        stats = _noiseless_plan(attack, variant).with_pulses(20_000).run(derive_stream(21))
        g_exp, q_exp = analytic_weak(shape, eps, Observable(), policy, variant)
        if variant is SIMPLIFIED:
            q, n_g, n_q = stats.qber_x, stats.n_z, stats.n_x
        else:
            q, n_g, n_q = stats.qber_combined, stats.sifted_len, stats.sifted_len
        assert abs(stats.gain - g_exp) <= binomial_band(g_exp, n_g, sigmas=4.0)
        assert abs(q - q_exp) <= binomial_band(q_exp, n_q, sigmas=4.0)


class TestEfficiency:
    def test_ratio(self):
        assert efficiency(0.125, 0.625) == pytest.approx(0.2)

    def test_zero_gain_raises(self):
        with pytest.raises(DivisionByZeroGain):
            efficiency(0.1, 0.0)

    def test_table_columns(self):
        table = efficiency_table([0.5, 1.0])
        assert list(table.columns) == ["eps", "partial", "gaussian", "rect", "triangle"]
        assert len(table) == 2

    def test_partial_is_most_efficient(self):
        table = efficiency_table([round(0.1 * k, 10) for k in range(1, 11)])
        slack = 1e-12
        assert (table["partial"] <= table["gaussian"] + slack).all()
        assert (table["gaussian"] <= table["rect"] + slack).all()
        assert (table["gaussian"] <= table["triangle"] + slack).all()

    def test_q_over_g_undefined_for_zero_gain(self):
        row = SweepRow(0.0, 0.1, 0.0, 0.0, 0.0, 0.0, SweepSource.MONTE_CARLO)
        assert row.q_over_g is None
        assert row.to_row()["q_over_g"] is None


class TestStatisticsHelpers:
    def test_linear_fit_exact_line(self):
        slope, intercept, r2 = linear_fit([0, 1, 2, 3], [1, 3, 5, 7])
        assert slope == pytest.approx(2.0)
        assert intercept == pytest.approx(1.0)
        assert r2 == pytest.approx(1.0)

    def test_loglog_slope_of_square(self):
        xs = [0.01, 0.02, 0.05, 0.1]
        assert loglog_slope(xs, [x * x for x in xs]) == pytest.approx(2.0)

    def test_binomial_band(self):
        assert binomial_band(0.5, 100) == pytest.approx(0.155)
        assert binomial_band(0.25, 0) == math.inf

    def test_resolve_workers(self):
        assert resolve_workers(3) == 3
        assert resolve_workers(None) == (os.cpu_count() or 1)
        assert resolve_workers(0) == (os.cpu_count() or 1)


class TestSweepEpsilon:
    def test_rows_alternate_monte_carlo_and_analytic(self):
        result = sweep_epsilon(_noiseless_plan(AttackStrategy.partial(0.0)), [0.0, 0.5, 1.0], 1_000, seed=3)
        sources = [r.source for r in result.rows]
        assert sources == [SweepSource.MONTE_CARLO, SweepSource.ANALYTIC] * 3
        assert [r.eps for r in result.select(SweepSource.ANALYTIC)] == [0.0, 0.5, 1.0]
        assert result.select(SweepSource.ANALYTIC)[1].g == pytest.approx(0.625)

    def test_frame_schema(self):
        frame = sweep_epsilon(_noiseless_plan(AttackStrategy.partial(0.0)), [0.2], 500, seed=1).to_frame()
        assert list(frame.columns) == SWEEP_COLUMNS
        assert list(frame["source"]) == ["MonteCarlo", "Analytic"]

    def test_no_analytic_rows_under_noise(self):
        plan = SessionPlan(SessionConfig(STANDARD, 1_000), SourceConfig(0.1), NoiseConfig(), AttackStrategy.partial(0.0))
        result = sweep_epsilon(plan, [0.0, 1.0], 1_000, seed=4)
        assert all(r.source is SweepSource.MONTE_CARLO for r in result.rows)

    def test_monte_carlo_tracks_closed_form(self):
        plan = _noiseless_plan(AttackStrategy.partial(0.0, BasisPolicy.FIXED_Z), SIMPLIFIED)
        result = sweep_epsilon(plan, [0.0, 0.4, 0.8], 20_000, seed=5)
        for row in result.select(SweepSource.MONTE_CARLO):
            g_exp, q_exp = analytic_partial_policy(row.eps, SIMPLIFIED, BasisPolicy.FIXED_Z)
            assert abs(row.g - g_exp) <= binomial_band(g_exp, row.g_count, sigmas=4.0)
            assert abs(row.q - q_exp) <= binomial_band(q_exp, row.q_count, sigmas=4.0)

    def test_weak_gaussian_sweep_is_monotone(self):
        plan = _noiseless_plan(AttackStrategy.weak(PointerShape.gaussian(1.0), 0.0))
        result = sweep_epsilon(plan, [0.0, 0.5, 1.0, 2.0], 20_000, seed=6)
        for source in (SweepSource.MONTE_CARLO, SweepSource.ANALYTIC):
            rows = result.select(source)
            assert all(b.g > a.g for a, b in zip(rows, rows[1:]))
            assert all(b.q > a.q for a, b in zip(rows, rows[1:]))

    def test_identical_for_any_worker_count(self):
        plan = _noiseless_plan(AttackStrategy.partial(0.0))
        texts = [
            ResultsWriter.to_csv_text(sweep_epsilon(plan, [0.0, 0.5, 1.0], 800, seed=42, workers=w).to_frame())
            for w in (1, 2)
        ]
        assert texts[0] == texts[1]

    def test_empty_grid_rejected(self):
        with pytest.raises(ValueError):
            sweep_epsilon(_noiseless_plan(AttackStrategy.partial(0.0)), [], 100, seed=0)

    def test_nonpositive_trials_rejected(self):
        with pytest.raises(ValueError):
            sweep_epsilon(_noiseless_plan(AttackStrategy.partial(0.0)), [0.1], 0, seed=0)


class TestHeatmap:
    def test_analytic_grid_is_mu_major(self):
        plan = _noiseless_plan(AttackStrategy.pns_partial(0.0))
        frame = heatmap_mu_epsilon(plan, [0.0, 0.5, 1.0], [0.01, 0.1], SweepSource.ANALYTIC)
        assert list(frame.columns) == HEATMAP_COLUMNS
        assert list(frame["mu"]) == [0.01] * 3 + [0.1] * 3
        assert list(frame["eps"]) == [0.0, 0.5, 1.0] * 2
        assert set(frame["mode"]) == {"Analytic"}

    def test_analytic_values(self):
        plan = _noiseless_plan(AttackStrategy.pns_partial(0.0))
        frame = heatmap_mu_epsilon(plan, [1.0], [0.2], SweepSource.ANALYTIC)
        assert frame.loc[0, "g"] == pytest.approx(0.77417, abs=1e-5)
        assert frame.loc[0, "q"] == pytest.approx(0.22583, abs=1e-5)

    def test_non_pns_attack_is_promoted(self):
        plan = _noiseless_plan(AttackStrategy.partial(0.0))
        frame = heatmap_mu_epsilon(plan, [0.0], [10.0], SweepSource.ANALYTIC)
        assert frame.loc[0, "g"] > 0.999

    def test_monte_carlo_cells(self):
        plan = _noiseless_plan(AttackStrategy.pns_partial(0.0))
        frame = heatmap_mu_epsilon(plan, [0.0, 1.0], [0.1, 10.0], SweepSource.MONTE_CARLO, trials_per_cell=4_000, seed=9)
        assert set(frame["mode"]) == {"MonteCarlo"}
        for row in frame.itertuples():
            g_exp, q_exp = pns_partial_analytic(row.mu, row.eps)
            assert row.g == pytest.approx(g_exp, abs=0.05)
            assert row.q == pytest.approx(q_exp, abs=0.05)

    def test_modes_agree_under_noise(self):
        attack = AttackStrategy.pns_partial(0.0)
        plan = SessionPlan(SessionConfig(STANDARD, 1_000), SourceConfig(0.1), NoiseConfig(), attack)
        eps_grid, mu_grid = [0.5, 1.0], [0.1, 10.0]
        analytic = heatmap_mu_epsilon(plan, eps_grid, mu_grid, SweepSource.ANALYTIC)
        monte_carlo = heatmap_mu_epsilon(
            plan, eps_grid, mu_grid, SweepSource.MONTE_CARLO, trials_per_cell=12_000, seed=10
        )
        assert (analytic["g"] - monte_carlo["g"]).abs().max() < 0.03
        assert (analytic["q"] - monte_carlo["q"]).abs().max() < 0.03
        saturated = (analytic["mu"] == 10.0) & (analytic["eps"] == 1.0)
        assert analytic.loc[saturated, "g"].item() > 0.999
        assert monte_carlo.loc[saturated, "g"].item() > 0.999

    def test_empty_grid_rejected(self):
        with pytest.raises(ValueError):
            heatmap_mu_epsilon(_noiseless_plan(AttackStrategy.pns_partial(0.0)), [], [0.1], SweepSource.ANALYTIC)
