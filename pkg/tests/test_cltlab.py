import math

import pytest

from gcltlab import (
    CapacityError,
    ConvergenceRow,
    EvaluatorKind,
    GParams,
    GridSpec,
    InvalidSpecError,
    PartialRunError,
    Scenario,
    SequenceSpec,
    WeightSpec,
    cesaro_deviation,
    get_scenario,
    phi_by_name,
    run_convergence,
    scenario_catalog,
    weight_ratio,
    weights_array,
)

ONES = WeightSpec("ones")
COS = phi_by_name("cos_k", (1.0,))
VOL_SEQ = SequenceSpec("constant", GParams(0.0, 0.0, 0.5, 1.0))


class TestWeightRatio:
    def test_ones_closed_form(self):
        for n in (1, 10, 100):
            for alpha in (0.25, 0.5, 1.0):
                got = weight_ratio(ONES, n, alpha=alpha)
                assert got == pytest.approx(n ** (-alpha / 2.0), rel=1e-14)
        assert weight_ratio(ONES, 100, alpha=1.0) == pytest.approx(0.1, rel=1e-14)

    def test_identity_exact_sums(self):
        # sum i^3 = 5050^2, sum i^2 = 338350 for n = 100
        got = weight_ratio(WeightSpec("identity"), 100, alpha=1.0)
        assert got == pytest.approx(5050.0**2 / 338350.0**1.5, rel=1e-13)
        assert got == pytest.approx(0.1296, abs=1e-4)

    def test_geometric_fails_condition(self):
        w = WeightSpec("geometric", q=2.0, alpha=1.0)
        vals = [weight_ratio(w, n) for n in range(2, 31)]
        assert vals[-1] == pytest.approx(3.0 * math.sqrt(3.0) / 7.0, abs=1e-6)
        # the ratio settles at a positive limit instead of vanishing
        assert min(vals) >= 0.5

    def test_alpha_validated(self):
        with pytest.raises(InvalidSpecError):
            weight_ratio(ONES, 5, alpha=1.5)
        with pytest.raises(InvalidSpecError):
            weight_ratio(ONES, 5, alpha=0.0)


class TestCesaroDeviation:
    def test_constant_sequence_is_zero(self):
        for w in (ONES, WeightSpec("identity"), WeightSpec("geometric", q=2.0)):
            assert cesaro_deviation(VOL_SEQ, w, 17) == (0.0, 0.0)

    def test_harmonic_number_value(self):
        seq = SequenceSpec("harmonic_drift", GParams(0.0, 0.0, 0.5, 1.0), drift_scale=1.0)
        h100 = math.fsum(1.0 / i for i in range(1, 101))
        sig, mu = cesaro_deviation(seq, ONES, 100)
        assert sig == pytest.approx(h100 / 100.0, rel=1e-13)
        assert sig == pytest.approx(0.05187, abs=1e-4)

    def test_matches_direct_sum_with_geometric_weights(self):
        seq = SequenceSpec("harmonic_drift", GParams(0.0, 0.0, 0.5, 1.0), drift_scale=1.0)
        w = weights_array(WeightSpec("geometric", q=2.0), 30)
        big_w = math.fsum(x * x for x in w)
        oracle = math.fsum(w[i - 1] ** 2 / big_w / i for i in range(1, 31))
        sig, mu = cesaro_deviation(seq, WeightSpec("geometric", q=2.0), 30)
        assert sig == pytest.approx(oracle, rel=1e-12)
        assert mu == pytest.approx(oracle, rel=1e-12)

    def test_mean_drift_tracked(self):
        seq = SequenceSpec("harmonic_drift", GParams(0.0, 0.5, 0.0, 1.0), drift_scale=0.2)
        sig, mu = cesaro_deviation(seq, ONES, 10)
        assert sig > 0 and mu > 0


class TestScenario:
    def test_n_list_validated(self):
        with pytest.raises(InvalidSpecError):
            Scenario("x", VOL_SEQ, ONES, COS, ())
        with pytest.raises(InvalidSpecError):
            Scenario("x", VOL_SEQ, ONES, COS, (8, 4))

    def test_catalog_contract(self):
        catalog = scenario_catalog()
        names = [s.name for s in catalog]
        assert len(catalog) >= 7 and len(set(names)) == len(names)
        peng = get_scenario("peng-iid")
        assert peng.seq.generator.value == "constant"
        assert peng.weights.generator.value == "ones"
        bad = get_scenario("bad-weights")
        assert bad.weights.generator.value == "geometric" and bad.weights.q == 2.0

    def test_unknown_scenario(self):
        with pytest.raises(InvalidSpecError):
            get_scenario("nope")


class TestRunConvergence:
    def test_peng_iid_error_trend(self):
        rows = run_convergence(get_scenario("peng-iid"))
        assert [r.n for r in rows] == [4, 16, 64, 256]
        errs = [r.abs_error for r in rows]
        assert all(b <= 1.2 * a for a, b in zip(errs, errs[1:]))
        assert errs[-1] <= 2e-2

    def test_lln_value_is_average_grid_max(self):
        scn = get_scenario("lln-maximal")
        fn = scn.fn
        rows = run_convergence(scn)
        for r in rows:
            n = r.n
            oracle = max(fn((k * 0.5 + (n - k) * 0.1) / n) for k in range(n + 1))
            assert r.value_n == pytest.approx(oracle, abs=1e-12)
        assert rows[-1].limit == pytest.approx(fn(0.5), abs=5e-3)

    def test_degenerate_gaussian_scenario(self):
        scn = Scenario(
            "classical",
            SequenceSpec("constant", GParams(0.0, 0.0, 1.0, 1.0)),
            ONES,
            COS,
            (4, 256),
            EvaluatorKind.GRID,
            get_scenario("peng-iid").grid,
        )
        rows = run_convergence(scn)
        assert rows[0].limit == pytest.approx(0.60653, abs=5e-3)
        assert rows[-1].abs_error <= 1e-2

    def test_rows_carry_condition_statistics(self):
        rows = run_convergence(get_scenario("bad-weights"))
        for r in rows:
            assert isinstance(r, ConvergenceRow)
            assert r.abs_error == abs(r.value_n - r.limit)
            assert r.sigma_dev == 0.0 and r.mu_dev == 0.0
        ratios = [r.weight_ratio for r in rows if r.n >= 10]
        assert all(x >= 0.5 for x in ratios)

    def test_universality_of_limit(self):
        two = run_convergence(get_scenario("universality-2pt"))
        three = run_convergence(get_scenario("universality-3pt"))
        assert two[-1].limit == three[-1].limit
        assert abs(two[-1].value_n - three[-1].value_n) <= 3e-2

    def test_weight_invariance_of_limit(self):
        finals = {}
        for name in ("peng-iid", "weighted-linear", "weighted-sqrt"):
            rows = run_convergence(get_scenario(name))
            finals[name] = rows[-1]
        limits = {r.limit for r in finals.values()}
        assert len(limits) == 1
        assert all(r.abs_error <= 2e-2 for r in finals.values())

    def test_endpoint_error_comparison_across_catalog(self):
        for scn in scenario_catalog():
            if scn.name == "bad-weights":
                continue
            rows = run_convergence(scn)
            assert rows[-1].abs_error <= rows[0].abs_error, scn.name

    def test_partial_run_keeps_completed_rows(self):
        scn = Scenario("x", VOL_SEQ, ONES, COS, (2, 25), EvaluatorKind.TREE)
        with pytest.raises(PartialRunError) as err:
            run_convergence(scn)
        assert len(err.value.rows) == 1 and err.value.rows[0].n == 2
        assert isinstance(err.value.cause, CapacityError)
