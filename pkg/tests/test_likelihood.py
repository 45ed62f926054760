"""Partition-sum density assembly and composite-likelihood schemes."""

import math

import numpy as np
import pytest
from mpmath import mp
from numpy.polynomial.legendre import leggauss

from maxstable.errors import DomainError
from maxstable.likelihood import (
    CompositeScheme,
    Dataset,
    Telemetry,
    build_scheme,
    expected_partial_evaluations,
    log_composite,
    log_density_full,
    log_density_full_streaming,
    log_density_rows,
    log_likelihood_replicates,
)
from maxstable.models import (
    BrownResnickParams,
    LogisticParams,
    MixtureParams,
    ReichShabyParams,
    exponent_measure,
    exponent_measure_batch,
    exponent_measure_partial,
    restrict_model,
)
from maxstable.partitions import SubsetId, get_partition_table

from fd_oracles import mp_exponent_measure


def _rs_model(locations, alpha=0.6, tau=0.35):
    g = np.linspace(0.0, 1.0, 4)
    knots = np.array([[a, b] for a in g for b in g])
    return ReichShabyParams(alpha=alpha, tau=tau, knots=knots,
                            locations=np.asarray(locations, dtype=float))


def _br_model(locations, lam=0.6, nu=1.3, budget=65_536):
    return BrownResnickParams(lam=lam, nu=nu,
                              locations=np.asarray(locations, dtype=float),
                              mvn_sample_budget=budget)


def _oracle_partitions(n):
    """Every set partition of {1..n}, by inserting element n into each slot."""
    if n == 0:
        return [[]]
    out = []
    for p in _oracle_partitions(n - 1):
        for i in range(len(p)):
            out.append([b + ([n] if j == i else []) for j, b in enumerate(p)])
        out.append(p + [[n]])
    return out


def _oracle_log_density(model, z):
    """Direct float-domain partition sum from per-block partials."""
    z = np.asarray(z, dtype=float)
    V = exponent_measure(model, z)
    total = 0.0
    for p in _oracle_partitions(len(z)):
        prod = 1.0
        for block in p:
            prod *= -exponent_measure_partial(model, z, SubsetId(tuple(block)))
        total += prod
    return -V + math.log(total)


class TestDensityExamples:
    def test_univariate_at_one(self):
        # f(z) = z^-2 exp(-1/z): log f(1) = -1 exactly
        assert log_density_full(LogisticParams(alpha=0.5), [1.0]) == -1.0
        assert log_density_full(LogisticParams(alpha=1.0), [1.0]) == -1.0

    def test_pair_independence_value(self):
        # alpha = 1: product of Frechet densities
        got = log_density_full(LogisticParams(alpha=1.0), [1.0, 2.0])
        want = (-1.0 - 2.0 * math.log(1.0)) + (-0.5 - 2.0 * math.log(2.0))
        assert got == pytest.approx(want, abs=1e-14)

    def test_univariate_general(self):
        z = 1.7
        got = log_density_full(LogisticParams(alpha=0.3), [z])
        assert got == pytest.approx(-1.0 / z - 2.0 * math.log(z), rel=1e-14)

    def test_trivariate_matches_cdf_mixed_derivative(self):
        model = LogisticParams(alpha=0.55)
        z = np.array([1.2, 0.9, 1.6])
        got = math.exp(log_density_full(model, z))
        with mp.workdps(40):
            f = lambda a, b, c: mp.exp(-mp_exponent_measure(model, [a, b, c]))
            want = float(mp.diff(f, tuple(z), (1, 1, 1)))
        assert got == pytest.approx(want, rel=1e-4)


class TestOracleEquivalence:
    @pytest.mark.parametrize("q", [2, 3, 4, 5, 6])
    def test_logistic(self, q):
        rng = np.random.default_rng(100 + q)
        model = LogisticParams(alpha=0.55)
        for _ in range(3):
            z = rng.uniform(0.5, 3.0, q)
            a = log_density_full(model, z)
            b = _oracle_log_density(model, z)
            assert a == pytest.approx(b, rel=1e-10)

    @pytest.mark.parametrize("q", [2, 3, 4, 5, 6])
    def test_mixture(self, q):
        rng = np.random.default_rng(200 + q)
        model = MixtureParams(weights=(0.7, 0.3), alphas=(0.4, 0.85))
        z = rng.uniform(0.5, 3.0, q)
        assert log_density_full(model, z) == pytest.approx(
            _oracle_log_density(model, z), rel=1e-10)

    @pytest.mark.parametrize("q", [2, 3, 4, 5, 6])
    def test_kernel_basis(self, q):
        rng = np.random.default_rng(300 + q)
        model = _rs_model(rng.uniform(0.0, 1.0, (q, 2)))
        z = rng.uniform(0.5, 3.0, q)
        assert log_density_full(model, z) == pytest.approx(
            _oracle_log_density(model, z), rel=1e-10)

    @pytest.mark.parametrize("q", [2, 4])
    def test_variogram_process(self, q):
        rng = np.random.default_rng(400 + q)
        model = _br_model(rng.uniform(0.0, 1.0, (q, 2)))
        z = rng.uniform(0.5, 3.0, q)
        assert log_density_full(model, z) == pytest.approx(
            _oracle_log_density(model, z), rel=1e-10)

    def test_alpha_one_all_dimensions(self):
        # independence: only the all-singletons partition survives
        model = LogisticParams(alpha=1.0)
        rng = np.random.default_rng(5)
        for q in (2, 3, 5):
            z = rng.uniform(0.5, 3.0, q)
            want = float(np.sum(-1.0 / z - 2.0 * np.log(z)))
            assert log_density_full(model, z) == pytest.approx(want, rel=1e-13)


class TestNormalization:
    @pytest.mark.parametrize("alpha", [0.3, 0.6, 0.9])
    def test_pair_density_integrates_to_one(self, alpha):
        n = 100
        x, w = leggauss(n)
        u = 0.5 * (x + 1.0)
        wu = 0.5 * w
        U1, U2 = np.meshgrid(u, u, indexing="ij")
        Z1 = -1.0 / np.log(U1)
        Z2 = -1.0 / np.log(U2)
        pts = np.column_stack([Z1.ravel(), Z2.ravel()])
        ld = log_density_rows(LogisticParams(alpha=alpha), pts).reshape(n, n)
        jac = (Z1 * Z1 / U1) * (Z2 * Z2 / U2)
        integral = float(np.sum(np.outer(wu, wu) * np.exp(ld) * jac))
        assert integral == pytest.approx(1.0, abs=1e-3)


class TestCdfConsistency:
    """Density equals the mixed partial derivative of exp(-V)."""

    @pytest.mark.parametrize("family", ["logistic", "mixture", "kernel"])
    def test_closed_form_trivariate(self, family):
        rng = np.random.default_rng(17)
        if family == "logistic":
            model = LogisticParams(alpha=0.45)
        elif family == "mixture":
            model = MixtureParams(weights=(0.55, 0.45), alphas=(0.35, 0.8))
        else:
            model = _rs_model(rng.uniform(0.0, 1.0, (3, 2)))
        z = np.array([1.1, 0.8, 1.5])
        got = math.exp(log_density_full(model, z))
        with mp.workdps(40):
            f = lambda a, b, c: mp.exp(-mp_exponent_measure(model, [a, b, c]))
            want = float(mp.diff(f, tuple(z), (1, 1, 1)))
        assert got == pytest.approx(want, rel=1e-4)

    def test_variogram_process_trivariate(self):
        # dimension 3 only ever needs exact 1- and 2-dimensional normal
        # CDFs, so V is analytic and a float Richardson stencil applies
        rng = np.random.default_rng(23)
        model = _br_model(rng.uniform(0.0, 1.0, (3, 2)))
        z = np.array([1.3, 0.9, 1.1])
        got = math.exp(log_density_full(model, z))

        def cdf(pt):
            return math.exp(-exponent_measure(model, pt))

        def mixed(h):
            total = 0.0
            for s in np.ndindex(2, 2, 2):
                signs = 1 - 2 * np.array(s)
                pt = z + signs * h * z
                total += np.prod(signs) * cdf(pt)
            return total / np.prod(2.0 * h * z)

        h = 1e-2
        fine, coarse = mixed(np.full(3, h / 2)), mixed(np.full(3, h))
        want = (4.0 * fine - coarse) / 3.0
        assert got == pytest.approx(want, rel=1e-4)


class TestSchemeConstruction:
    def test_line_truncation_keeps_nearest_pair(self):
        X = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
        sch = build_scheme(3, 2, locations=X, t=0.34)
        assert [s.members for s in sch.subsets] == [(1, 2)]
        assert sch.max_set_distances == pytest.approx([1.0])

    def test_full_scheme_is_all_subsets(self):
        sch = build_scheme(3, 2)
        assert [s.members for s in sch.subsets] == [(1, 2), (1, 3), (2, 3)]
        assert np.all(sch.weights == 1.0)

    def test_half_truncation_count(self):
        rng = np.random.default_rng(11)
        X = rng.uniform(0.0, 1.0, (5, 2))
        sch = build_scheme(5, 3, locations=X, t=0.5)
        assert sch.n_subsets == 5  # round(0.5 * 10)
        assert np.all(np.diff(sch.max_set_distances) >= 0.0)

    def test_tie_break_is_lexicographic(self):
        # unit square corners: four side pairs tie at distance 1
        X = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
        sch = build_scheme(4, 2, locations=X, t=0.5)
        assert [s.members for s in sch.subsets] == [(1, 2), (1, 3), (2, 4)]

    def test_retains_at_least_one_subset(self):
        X = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
        sch = build_scheme(3, 2, locations=X, t=0.01)
        assert sch.n_subsets == 1

    def test_invalid_truncation_rejected(self):
        with pytest.raises(DomainError):
            build_scheme(3, 2, t=0.0)
        with pytest.raises(DomainError):
            build_scheme(3, 2, t=1.5)
        with pytest.raises(DomainError):
            build_scheme(3, 2, t=0.5)  # no locations
        with pytest.raises(DomainError):
            build_scheme(3, 4)

    def test_weight_vector_validation(self):
        with pytest.raises(DomainError):
            build_scheme(3, 2, weights=[1.0, 1.0])
        with pytest.raises(DomainError):
            build_scheme(3, 2, weights=[1.0, -1.0, 1.0])

    def test_duplicate_subsets_rejected(self):
        s = SubsetId((1, 2))
        with pytest.raises(DomainError):
            CompositeScheme(Q=3, q=2, subsets=(s, s), weights=np.ones(2))


class TestCompositeLikelihood:
    def test_top_order_scheme_equals_full_density(self):
        z = np.array([1.3, 0.8, 2.1, 1.1])
        for model in (LogisticParams(alpha=0.55),
                      _rs_model(np.random.default_rng(3).uniform(0, 1, (4, 2)))):
            full = log_density_full(model, z)
            comp = log_composite(model, build_scheme(4, 4), z)
            assert comp == pytest.approx(full, rel=1e-13)

    def test_pairwise_independence_doubles_full(self):
        # alpha = 1, Q = 3: each of the 3 pairs contributes two marginal
        # terms, so every site appears exactly twice
        model = LogisticParams(alpha=1.0)
        z = np.array([1.3, 0.8, 2.1])
        comp = log_composite(model, build_scheme(3, 2), z)
        assert comp == pytest.approx(2.0 * log_density_full(model, z), rel=1e-14)

    def test_weight_doubling_doubles_value(self):
        model = LogisticParams(alpha=0.4)
        z = np.array([1.3, 0.8, 2.1])
        base = log_composite(model, build_scheme(3, 2), z)
        doubled = log_composite(model, build_scheme(3, 2, weights=[2.0] * 3), z)
        assert doubled == pytest.approx(2.0 * base, rel=1e-14)

    def test_spatial_composite_matches_manual_restriction(self):
        rng = np.random.default_rng(31)
        model = _rs_model(rng.uniform(0.0, 1.0, (4, 2)))
        Z = rng.uniform(0.5, 4.0, (3, 4))
        got = log_likelihood_replicates(model, build_scheme(4, 2), Dataset(Z))
        manual = 0.0
        for ms in [(1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4)]:
            sub = restrict_model(model, ms)
            for i in range(3):
                manual += log_density_full(sub, Z[i, [k - 1 for k in ms]])
        assert got == pytest.approx(manual, rel=1e-12)

    def test_exchangeable_composite_matches_manual(self):
        rng = np.random.default_rng(37)
        model = LogisticParams(alpha=0.62)
        Z = rng.uniform(0.5, 4.0, (4, 5))
        sch = build_scheme(5, 3)
        got = log_likelihood_replicates(model, sch, Dataset(Z))
        manual = math.fsum(
            log_composite(model, sch, Z[i]) for i in range(4))
        assert got == pytest.approx(manual, rel=1e-12)

    def test_replicate_order_is_bit_identical(self):
        rng = np.random.default_rng(41)
        model = LogisticParams(alpha=0.55)
        Z = rng.uniform(0.5, 4.0, (8, 4))
        sch = build_scheme(4, 2)
        a = log_likelihood_replicates(model, sch, Dataset(Z))
        for _ in range(3):
            perm = rng.permutation(8)
            b = log_likelihood_replicates(model, sch, Dataset(Z[perm]))
            assert a == b

    def test_telemetry_counts_are_exact(self):
        rng = np.random.default_rng(43)
        Z = rng.uniform(0.5, 4.0, (5, 4))
        tel = Telemetry()
        sch = build_scheme(4, 2)
        log_likelihood_replicates(LogisticParams(alpha=0.5), sch, Dataset(Z),
                                  telemetry=tel)
        assert tel.n_partial_evaluations == 5 * 6 * 3
        assert tel.n_partial_evaluations == expected_partial_evaluations(4, 2, 5)
        assert tel.n_density_evaluations == 5
        assert tel.peak_table_bytes == get_partition_table(2).memory_bytes()
        assert tel.wall_time > 0.0

    def test_dimension_mismatches_rejected(self):
        model = LogisticParams(alpha=0.5)
        with pytest.raises(DomainError):
            log_composite(model, build_scheme(3, 2), [1.0, 2.0])
        with pytest.raises(DomainError):
            log_likelihood_replicates(model, build_scheme(3, 2),
                                      Dataset(np.ones((2, 4))))
        with pytest.raises(DomainError):
            log_density_rows(model, np.ones((2, 3)), get_partition_table(2))

    def test_dataset_validation(self):
        with pytest.raises(DomainError):
            Dataset(np.array([[1.0, -2.0]]))
        with pytest.raises(DomainError):
            Dataset(np.array([[1.0, np.inf]]))
        with pytest.raises(DomainError):
            Dataset(np.ones((2, 3)), locations=np.zeros((2, 2)))
        with pytest.raises(DomainError):
            Dataset(np.ones((2, 3)), locations=np.zeros((3, 2)))
        with pytest.raises(DomainError):
            Dataset(np.ones((2, 3)), replicate_ids=np.arange(5))
        ds = Dataset(np.ones(3))  # single replicate promotes to a row
        assert ds.m == 1 and ds.Q == 3


class TestStreamingFallback:
    @pytest.mark.parametrize("q", [3, 5, 6])
    def test_matches_table_path(self, q):
        rng = np.random.default_rng(600 + q)
        model = LogisticParams(alpha=0.48)
        z = rng.uniform(0.5, 3.0, q)
        a = log_density_full(model, z)
        b = log_density_full_streaming(model, z)
        assert b == pytest.approx(a, rel=1e-12)

    def test_independence_case(self):
        z = np.array([1.0, 2.0, 0.7])
        a = log_density_full_streaming(LogisticParams(alpha=1.0), z)
        assert a == pytest.approx(float(np.sum(-1 / z - 2 * np.log(z))), rel=1e-13)
