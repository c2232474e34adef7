"""Acceptance suite: every shipped-behavior criterion at its stated tolerance.

Each test prints one PASS line when its criterion holds (run pytest -s to see
them); assertions carry the same bounds.
"""

import json

import numpy as np
import pytest

from eventimpact import _kernels
from eventimpact.catalog import StudyWindow
from eventimpact.cli import main as cli_main
from eventimpact.impact import compute_kappa, excess_cases
from eventimpact.misd import (
    FitOptions,
    e_step,
    fit,
    m_step,
    period_index,
)
from eventimpact.simulator import SimConfig, bin_to_days, simulate
from eventimpact.study import DEFAULT_MASTER_SEED, run_study

from conftest import sim_series
from test_misd import oracle_for, random_case
from test_impact import fake_fit


@pytest.fixture(scope="session")
def study_report():
    """The full 250-catalog replication under the fixed master seed."""
    return run_study(DEFAULT_MASTER_SEED)


def summary_for(report, duration):
    return next(s for s in report.summaries if s.duration == duration)


class TestCriterion1DurationRecovery:
    def test_median_and_band_per_scenario(self, study_report):
        for duration in (10, 20, 30, 40):
            s = summary_for(study_report, duration)
            median = s.error_percentiles[50]
            p5 = s.error_percentiles[5]
            p95 = s.error_percentiles[95]
            assert -2 <= median <= 3, f"d{duration} median {median}"
            assert p5 >= -10, f"d{duration} p5 {p5}"
            assert p95 <= 7, f"d{duration} p95 {p95}"
            print(f"ACCEPTANCE 1 (d{duration}): PASS median={median:+.1f} "
                  f"band=[{p5:+.1f},{p95:+.1f}] within [-2,+3]/[-10,+7]")


class TestCriterion2FalsePositives:
    def test_duration_zero_false_positives(self, study_report):
        s = summary_for(study_report, 0)
        assert s.nonzero_estimates <= 8
        print(f"ACCEPTANCE 2: PASS {s.nonzero_estimates}/50 duration-0 catalogs "
              "received a nonzero duration (allowed <= 8)")


class TestCriterion3ProductivityRatio:
    def test_ratio_medians(self, study_report):
        r40 = summary_for(study_report, 40).ratio_median
        r10 = summary_for(study_report, 10).ratio_median
        assert 4.0 <= r40 <= 7.0, r40
        assert 1.0 <= r10 <= 3.5, r10
        print(f"ACCEPTANCE 3: PASS ratio medians d40={r40:.2f} in [4,7], "
              f"d10={r10:.2f} in [1,3.5]")

    def test_ratio_at_true_change_point(self):
        # duration-40 scenario with t_prime fixed at the truth
        ratios = []
        for replicate in range(50):
            series = sim_series(40, replicate)
            window = StudyWindow(t0=0, t_star=30, T=99, t_prime=70)
            result = fit(series, window)
            realized = result.summary.realized_per_parent()
            ratios.append((realized[1] - realized[0]) / realized[0]
                          if realized[0] > 0 else float("inf"))
        median = float(np.median(ratios))
        assert 4.0 <= median <= 7.0
        print(f"ACCEPTANCE 3 (fixed t'): PASS median ratio {median:.2f} in [4,7]")


class TestCriterion4AggregationEquivalence:
    def test_count_aggregation_matches_per_point(self):
        rng = np.random.default_rng(20200620)
        for case in range(100):
            series, window, params = random_case(rng, max_days=15, max_total=50)
            oracle = oracle_for(series, params, window)
            for d in range(len(series)):
                from eventimpact.misd import conditional_intensity

                assert conditional_intensity(params, series, d) == pytest.approx(
                    oracle.intensity(d), abs=1e-9
                )
            resp = e_step(params, series)
            b, w = oracle.aggregated_estep()
            np.testing.assert_allclose(resp.background, b, atol=1e-9)
            np.testing.assert_allclose(resp.trigger, w, atol=1e-9)
            per = period_index(len(series), window)
            pts = np.array([series.values()[per == p].sum() for p in range(3)])
            t_prime = window.t_star if window.t_prime is None else window.t_prime
            days = np.array([window.t_star + 1.0, t_prime - window.t_star,
                             window.T - t_prime])
            for normalization, per_parent in (("per-parent", True), ("per-day", False)):
                mu, step, kernel = m_step(resp, series, window, normalization)
                mu_o, levels_o, g_o = oracle.mstep(
                    lambda d: int(per[d]), pts, days, per_parent
                )
                assert mu == pytest.approx(mu_o, abs=1e-9)
                np.testing.assert_allclose(kernel.densities, g_o, atol=1e-9)
                levels = step.levels()
                assert levels[0] == pytest.approx(levels_o[0], abs=1e-9)
                if days[1] > 0:
                    assert levels[1] == pytest.approx(levels_o[1], abs=1e-9)
                if days[2] > 0:
                    assert levels[2] == pytest.approx(levels_o[2], abs=1e-9)
        print("ACCEPTANCE 4: PASS count-aggregated E-step, M-step, and intensity "
              "match the per-point formulation to 1e-9 on 100 random catalogs")


class TestCriterion5StationaryRecovery:
    def test_constant_productivity_recovery(self):
        mus, ks = [], []
        for replicate in range(20):
            config = SimConfig(mu=3.0, decay_rate=0.25, levels=(0.2, 0.2, 0.2),
                               t_star=31.0, t_prime=31.0, horizon=100.0,
                               seed=(1, replicate))
            series = bin_to_days(simulate(config), 100)
            window = StudyWindow(t0=0, t_star=30, T=99, t_prime=60)
            result = fit(series, window)
            mus.append(result.mu)
            ks.append(result.step.k)
        mu_mean, k_mean = float(np.mean(mus)), float(np.mean(ks))
        assert abs(mu_mean - 3.0) / 3.0 < 0.20
        assert abs(k_mean - 0.2) < 0.1
        print(f"ACCEPTANCE 5: PASS mean mu={mu_mean:.3f} (within 20% of 3), "
              f"mean k={k_mean:.3f} (within 0.1 of 0.2)")


class TestCriterion6InvariantSuite:
    def test_responsibility_conservation_and_kernel_norm(self):
        rng = np.random.default_rng(8)
        for _ in range(30):
            series, window, params = random_case(rng)
            resp = e_step(params, series)
            np.testing.assert_allclose(resp.row_totals(), series.values(), atol=1e-9)
            _, _, kernel = m_step(resp, series, window)
            assert kernel.integral() == pytest.approx(1.0, abs=1e-9)

    def test_fitted_parameters_invariants(self):
        for duration, replicate in ((0, 0), (20, 1), (40, 2)):
            series = sim_series(duration, replicate)
            window = StudyWindow(t0=0, t_star=30, T=99,
                                 t_prime=None if duration == 0 else 30 + duration)
            result = fit(series, window)
            assert result.mu >= 0
            assert (result.step.levels() >= 0).all()
            assert (result.kernel.densities >= 0).all()
            assert result.kernel.integral() == pytest.approx(1.0, abs=1e-9)
            if result.converged:
                c = series.values()
                per = period_index(len(series), window)
                pts = np.array([c[per == p].sum() for p in range(3)])
                lev = result.summary.per_parent()
                lev_next, *_ = _kernels.em_levels(
                    c, per, pts, result.mu, lev, result.kernel.densities,
                    tol=0.0, max_iter=1,
                )
                assert np.abs(lev_next - lev).max() < FitOptions().tol

    def test_likelihood_trend(self):
        for duration, replicate in ((20, 4), (40, 6)):
            series = sim_series(duration, replicate)
            window = StudyWindow(t0=0, t_star=30, T=99, t_prime=30 + duration)
            anchor = fit(series, window)
            c = series.values()
            per = period_index(len(series), window)
            pts = np.array([c[per == p].sum() for p in range(3)])
            g = anchor.kernel.densities
            lev = np.full(3, 0.4)
            previous = None
            for _ in range(80):
                lam = _kernels.intensity_curve(c, per, lev, anchor.mu, g)
                ll = float(np.where(c > 0, c * np.log(lam), 0.0).sum() - lam.sum())
                if previous is not None:
                    assert ll >= previous - 1e-6
                previous = ll
                lev, *_ = _kernels.em_levels(c, per, pts, anchor.mu, lev, g,
                                             tol=0.0, max_iter=1)

    def test_kappa_antisymmetry_and_excess_identities(self):
        pops = {"a": 50_000, "b": 900_000}
        fit_a, fit_b = fake_fit(0.4, 3.0), fake_fit(0.9, 1.2)
        forward = compute_kappa(fit_a, fit_b, pops, "a", "b")
        backward = compute_kappa(fit_b, fit_a, pops, "b", "a")
        assert forward == pytest.approx(-backward, rel=1e-12)
        assert excess_cases(2e-4, 10**5, 10) == 200
        assert excess_cases(-5.0, 10**5, 10) == 0
        assert excess_cases(0.5, 10**5, 0) == 0
        print("ACCEPTANCE 6: PASS invariant suite (conservation, kernel norm, "
              "nonnegativity, fixed point, likelihood trend, kappa antisymmetry, "
              "excess-case identities)")


class TestParallelismInvariant:
    def test_parallel_study_matches_serial(self, study_report):
        parallel = run_study(DEFAULT_MASTER_SEED, jobs=2)
        assert [r.__dict__ for r in parallel.results] == [
            r.__dict__ for r in study_report.results
        ]
        print("ACCEPTANCE 6 (parallelism): PASS jobs=2 replication is identical "
              "to the serial run")


class TestCriterion7EndToEndGolden:
    def test_impact_pipeline_reproduces_golden(self, tmp_path, fixtures_dir,
                                               monkeypatch):
        monkeypatch.setenv("EVENTIMPACT_BACKEND", "numpy")
        out = tmp_path / "impact"
        code = cli_main([
            "impact",
            "--csv", str(fixtures_dir / "nyt_fixture.csv"),
            "--county", "101",
            "--state", "Testonia",
            "--populations", str(fixtures_dir / "populations.csv"),
            "--event-date", "2020-05-31",
            "--out-dir", str(out),
        ])
        assert code == 0
        golden = (fixtures_dir / "golden_impact.json").read_bytes()
        assert (out / "impact.json").read_bytes() == golden
        assert (out / "impact_summary.csv").read_bytes() == \
            (fixtures_dir / "golden_impact_summary.csv").read_bytes()
        doc = json.loads(golden)
        assert doc["outcome"] == "RallyEffect"
        print("ACCEPTANCE 7: PASS end-to-end impact run reproduces the committed "
              f"report byte-for-byte (outcome {doc['outcome']}, "
              f"duration {doc['duration']}, excess {doc['excess_cases']})")
