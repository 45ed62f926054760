"""Monte Carlo harness: metrics, determinism, persistence, projections."""

import math
import os

import numpy as np
import pytest
from scipy.integrate import quad

from maxstable.errors import DomainError, MaxStableError
from maxstable.fit import FamilySpec, fit_model
from maxstable.likelihood import build_scheme
from maxstable.models import variogram
from maxstable.simulate import RngSpec, sample_logistic
from maxstable.study import (
    StudyConfig,
    aggregate,
    project_cost,
    read_raw_estimates,
    read_timings,
    run_efficiency_study,
    run_single_experiment,
    run_truncation_study,
    variogram_l2_ratio,
    write_raw_estimates,
    write_report,
    write_timings,
)


@pytest.fixture(scope="module")
def logistic_report():
    cfg = StudyConfig(family="logistic", true_params=(0.6,), Q=5, m=30, J=12,
                      q_list=(2, 3, 5), seed=314)
    return cfg, run_efficiency_study(cfg)


class TestConfig:
    def test_validation(self):
        with pytest.raises(DomainError):
            StudyConfig("logistic", (0.6,), Q=5, m=30, J=0, q_list=(2,))
        with pytest.raises(DomainError):
            StudyConfig("logistic", (0.6,), Q=5, m=0, J=1, q_list=(2,))
        with pytest.raises(DomainError):
            StudyConfig("logistic", (0.6,), Q=5, m=30, J=1, q_list=(1,))
        with pytest.raises(DomainError):
            StudyConfig("logistic", (0.6,), Q=5, m=30, J=1, q_list=(6,))
        with pytest.raises(DomainError):
            StudyConfig("logistic", (0.6,), Q=5, m=30, J=1, q_list=(2,),
                        t_list=(0.0,))
        with pytest.raises(DomainError):
            StudyConfig("logistic", (0.6,), Q=5, m=30, J=1, q_list=(2,),
                        sites=np.zeros((3, 2)))
        with pytest.raises(DomainError):
            StudyConfig("reich_shaby", (0.6, 0.2), Q=5, m=30, J=1, q_list=(2,))

    def test_cell_grid_top_order_untruncated(self):
        cfg = StudyConfig("logistic", (0.6,), Q=5, m=10, J=1, q_list=(2, 5),
                          t_list=(0.5, 1.0))
        assert cfg.cells() == [(2, 1.0), (2, 0.5), (5, 1.0)]


class TestMetrics:
    def test_rmse_decomposition_identity(self, logistic_report):
        _, rep = logistic_report
        for r in rep.rows:
            assert abs(r.rmse ** 2 - (r.bias ** 2 + r.sd ** 2)) < 1e-10

    def test_reference_rre_is_one(self, logistic_report):
        _, rep = logistic_report
        ref = [r for r in rep.rows if r.q == 5]
        assert len(ref) == 1 and ref[0].rre == 1.0

    def test_rre_identity(self, logistic_report):
        _, rep = logistic_report
        rmse_ref = [r for r in rep.rows if r.q == 5][0].rmse
        for r in rep.rows:
            assert r.rre * r.rmse == pytest.approx(rmse_ref, abs=1e-12)

    def test_counts_complete(self, logistic_report):
        cfg, rep = logistic_report
        assert len(rep.raw) == cfg.J * len(cfg.q_list)
        for r in rep.rows:
            assert r.n_ok + r.n_fail == cfg.J


class TestDeterminism:
    def test_seed_isolation(self, logistic_report):
        cfg, rep = logistic_report
        solo = run_single_experiment(cfg, 3)
        batch = [r for r in rep.raw if r.j == 3]
        assert len(solo) == len(batch)
        for a, b in zip(solo, batch):
            assert a.theta == b.theta and a.objective == b.objective

    def test_parallel_matches_serial(self):
        kwargs = dict(family="logistic", true_params=(0.6,), Q=4, m=20, J=6,
                      q_list=(2, 4), seed=99)
        ser = run_efficiency_study(StudyConfig(n_jobs=1, **kwargs))
        par = run_efficiency_study(StudyConfig(n_jobs=2, **kwargs))
        for a, b in zip(ser.raw, par.raw):
            assert a.theta == b.theta and a.objective == b.objective


class TestPersistence:
    def test_raw_round_trip_and_reaggregation(self, logistic_report, tmp_path):
        cfg, rep = logistic_report
        path = tmp_path / "raw_estimates.csv"
        write_raw_estimates(path, cfg, rep.raw)
        back = read_raw_estimates(path)
        for a, b in zip(rep.raw, back):
            assert a.theta == b.theta and a.objective == b.objective
            assert (a.j, a.q, a.t, a.converged) == (b.j, b.q, b.t, b.converged)
        for a, b in zip(rep.rows, aggregate(cfg, back)):
            assert a.bias == b.bias and a.sd == b.sd
            assert a.rmse == b.rmse and a.rre == b.rre

    def test_report_and_timing_files(self, logistic_report, tmp_path):
        cfg, rep = logistic_report
        write_report(tmp_path / "report.csv", rep.rows)
        write_timings(tmp_path / "timings.csv", rep.timings)
        with open(tmp_path / "report.csv") as fh:
            header = fh.readline().strip().split(",")
        assert "rre" in header and "bias" in header
        assert not any("wall" in h or "second" in h for h in header)
        timings = read_timings(tmp_path / "timings.csv")
        assert [(t.q, t.t) for t in timings] == [(r.q, r.t) for r in rep.timings]
        assert timings[0].partials_per_call == rep.timings[0].partials_per_call


@pytest.fixture(scope="module")
def rs_truncation():
    g = np.linspace(0.0, 1.0, 5)
    knots = np.array([[a, b] for a in g for b in g])
    cfg = StudyConfig(family="reich_shaby", true_params=(0.6, 0.2), Q=5,
                      m=20, J=6, q_list=(2, 5), t_list=(0.6, 1.0), seed=7,
                      knots=knots)
    return cfg, run_truncation_study(cfg)


class TestTruncation:
    def test_untruncated_column_matches_efficiency_study(self):
        kwargs = dict(family="logistic", true_params=(0.6,), Q=4, m=15, J=5,
                      q_list=(2, 4), seed=11)
        eff = run_efficiency_study(StudyConfig(**kwargs))
        trunc = run_truncation_study(StudyConfig(t_list=(1.0,), **kwargs))
        for a, b in zip(eff.raw, trunc.raw):
            assert a.theta == b.theta

    def test_truncated_cells_are_cheaper(self, rs_truncation):
        _, rep = rs_truncation
        for row in rep.truncation_ratios:
            if row["t"] < 1.0:
                assert row["pct_of_untruncated"] < 100.0
            else:
                assert row["pct_of_untruncated"] == pytest.approx(100.0)

    def test_ratio_table_covers_grid(self, rs_truncation):
        cfg, rep = rs_truncation
        assert {(r["q"], r["t"]) for r in rep.truncation_ratios} == set(cfg.cells())


class TestFailureHandling:
    def test_all_fits_failing_aborts(self):
        # one iteration can never shrink the simplex below tolerance
        cfg = StudyConfig(family="logistic", true_params=(0.6,), Q=3, m=5, J=2,
                          q_list=(2,), seed=1, max_iterations=1)
        with pytest.raises(MaxStableError):
            run_efficiency_study(cfg)


class TestWarmStart:
    def test_median_evaluations_not_worse_than_cold(self):
        cfg = StudyConfig(family="logistic", true_params=(0.6,), Q=5, m=30,
                          J=10, q_list=(2, 5), seed=2718)
        rep = run_efficiency_study(cfg)
        warm = [r.evaluations for r in rep.raw if r.q == 5]
        cold = []
        for j in range(cfg.J):
            gen = RngSpec(seed=cfg.seed, stream=j).generator()
            gen.uniform(0.0, 1.0, (5, 2))  # sites drawn before data
            data = sample_logistic(5, 0.6, 30, gen)
            cold.append(fit_model(data, FamilySpec("logistic"),
                                  build_scheme(5, 5), [0.6]).evaluations)
        assert np.median(warm) <= np.median(cold)


class TestVariogramRatio:
    def test_degenerate_and_equal_cases(self):
        assert variogram_l2_ratio((0.42, 1.5), (0.42, 1.5), (0.42, 1.5)) == 1.0
        assert variogram_l2_ratio((0.42, 1.5), (0.5, 1.2), (0.5, 1.2)) == 1.0

    def test_perturbed_order_q_with_exact_reference(self):
        assert variogram_l2_ratio((0.42, 1.5), (0.42 * 1.1, 1.5),
                                  (0.42, 1.5)) == 0.0

    def test_matches_adaptive_quadrature(self):
        true_p, fq, fQ = (0.42, 1.5), (0.5, 1.3), (0.44, 1.45)
        got = variogram_l2_ratio(true_p, fq, fQ)

        def dist(fit):
            val, _ = quad(lambda h: (variogram(*true_p, h) - variogram(*fit, h)) ** 2,
                          0.0, math.sqrt(2.0), epsabs=1e-13, epsrel=1e-12)
            return math.sqrt(val)

        assert got == pytest.approx(dist(fQ) / dist(fq), rel=1e-6)


class TestCostProjection:
    def test_measured_target_is_identity(self):
        rows = project_cost([(2, 50, 0.01)], [(2, 50)])
        assert rows[0].projected_seconds == pytest.approx(0.01)

    def test_pairwise_binomial_ratio(self):
        rows = project_cost([(2, 50, 0.01)], [(2, 100)])
        assert rows[0].projected_seconds == pytest.approx(
            0.01 * math.comb(100, 2) / math.comb(50, 2))
        assert math.comb(100, 2) / math.comb(50, 2) == pytest.approx(4950 / 1225)

    def test_largest_available_measurement_wins(self):
        rows = project_cost([(3, 10, 0.5), (3, 20, 0.02)], [(3, 50)])
        assert rows[0].Q_measured == 20
        assert rows[0].projected_seconds == pytest.approx(
            0.02 * math.comb(50, 3) / math.comb(20, 3))

    def test_gap_reported_not_raised(self):
        rows = project_cost([(2, 50, 0.01)], [(4, 50)])
        assert rows[0].gap and math.isnan(rows[0].projected_seconds)

    def test_budget_truncation_fraction(self):
        rows = project_cost([(2, 50, 0.01)], [(2, 100)], budget=0.02)
        expect = min(1.0, 0.02 / (0.01 * 4950 / 1225))
        assert rows[0].t_for_budget == pytest.approx(expect)
        rows1 = project_cost([(2, 50, 0.01)], [(2, 50)], budget=1.0)
        assert rows1[0].t_for_budget == 1.0
