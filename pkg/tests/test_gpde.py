import math

import numpy as np
import pytest
from scipy.integrate import quad as spquad

from gcltlab import (
    GParams,
    GridSpec,
    InvalidSpecError,
    NumericsError,
    ValueGrid,
    eval_at,
    limit_expectation,
    phi_by_name,
    semigroup_residual,
    solve_gheat,
)
from gcltlab.gpde import (
    _march,
    assert_monotone,
    corner_controls,
    coverage_halfwidth,
    scheme_time_step,
    stencil_coefficients,
)
from gcltlab.model import default_catalog

COS = phi_by_name("cos_k", (1.0,))
GAUSS = GParams(0.0, 0.0, 1.0, 1.0)  # classical N(0,1) limit
DESK = GridSpec(L=8.0, nx=800)  # dx = 0.02


def gauss_expect(fn):
    """Quadrature oracle for E[fn(Z)], Z standard normal."""
    val, err = spquad(lambda x: fn(x) * math.exp(-0.5 * x * x) / math.sqrt(2 * math.pi),
                      -10.0, 10.0, limit=200)
    assert err < 1e-9
    return val


class TestGridSpec:
    def test_dx_and_nodes(self):
        g = GridSpec(L=2.0, nx=4)
        assert g.dx == 1.0
        assert list(g.nodes()) == [-2.0, -1.0, 0.0, 1.0, 2.0]

    def test_validation(self):
        for bad in (dict(L=0.0), dict(nx=2), dict(cfl=0.0), dict(cfl=1.5), dict(T=0.0)):
            with pytest.raises(InvalidSpecError):
                GridSpec(**bad)


class TestScheme:
    def test_corner_controls_distinct(self):
        assert corner_controls(GAUSS) == [(1.0, 0.0)]
        assert len(corner_controls(GParams(0.0, 0.2, 0.5, 1.0))) == 4

    def test_time_step_obeys_cfl(self):
        params = GParams(-0.3, 0.2, 0.5, 1.0)
        dt, nt = scheme_time_step(params, DESK)
        dx = DESK.dx
        assert dt <= DESK.cfl * dx * dx / (params.sigma_hi**2 + 0.3 * dx) * (1 + 1e-12)
        assert nt * dt == pytest.approx(DESK.T)

    def test_time_step_degenerate(self):
        assert scheme_time_step(GParams(0.0, 0.0, 0.0, 0.0), DESK) == (DESK.T, 1)

    def test_monotone_at_scheme_step(self):
        params = GParams(-0.3, 0.2, 0.5, 1.0)
        dt, _ = scheme_time_step(params, DESK)
        assert_monotone(params, DESK, dt)
        assert min(stencil_coefficients(params, DESK, dt).values()) >= 0.0

    def test_cfl_violation_raises(self):
        params = GParams(0.0, 0.0, 1.0, 1.0)
        dt, _ = scheme_time_step(params, DESK)
        with pytest.raises(NumericsError):
            assert_monotone(params, DESK, 2.5 * dt)


class TestSolve:
    def test_gaussian_cos(self):
        vg = solve_gheat(GAUSS, COS, DESK)
        assert eval_at(vg, 1.0, 0.0) == pytest.approx(math.exp(-0.5), abs=5e-3)

    def test_pure_transport_neg_quad(self):
        # max over |mu| <= 1 of -(x + mu)^2 is 0 at x = 0
        params = GParams(-1.0, 1.0, 0.0, 0.0)
        vg = solve_gheat(params, phi_by_name("neg_quad"), GridSpec(L=6.0, nx=600))
        assert eval_at(vg, 1.0, 0.0) == pytest.approx(0.0, abs=5e-3)

    def test_constant_preserved_exactly(self):
        vg = solve_gheat(GAUSS, lambda x: 0.7, GridSpec(L=8.0, nx=200))
        assert np.all(vg.values == 0.7)

    def test_initial_slice_is_payoff(self):
        vg = solve_gheat(GAUSS, COS, GridSpec(L=8.0, nx=200))
        assert np.array_equal(vg.values[0], np.cos(vg.x))
        assert vg.times[0] == 0.0

    def test_undersized_domain_rejected(self):
        with pytest.raises(InvalidSpecError):
            solve_gheat(GAUSS, COS, GridSpec(L=2.0, nx=200))

    def test_comparison_principle_random_pairs(self):
        # the extrapolated ghosts make the two edge nodes non-monotone, so
        # ordering is guaranteed only beyond their nt-node influence range
        params = GParams(-0.2, 0.3, 0.5, 1.0)
        grid = GridSpec(L=4.0, nx=200, T=0.05)
        _, nt = scheme_time_step(params, GridSpec(grid.L, grid.nx, grid.cfl, grid.T))
        rng = np.random.default_rng(11)
        x = grid.nodes()
        for _ in range(10):
            lo = rng.normal(size=x.shape)
            hi = lo + np.abs(rng.normal(size=x.shape))
            u = _march(params, lo, grid, grid.T).final_slice()
            v = _march(params, hi, grid, grid.T).final_slice()
            assert np.all(u[nt:-nt] <= v[nt:-nt] + 1e-12)

    def test_convexity_selects_upper_variance(self):
        params = GParams(0.0, 0.0, 0.5, 1.0)
        vg = solve_gheat(params, phi_by_name("quad"), DESK)
        for t in (0.25, 0.5, 1.0):
            assert eval_at(vg, t, 0.0) == pytest.approx(params.sigma_hi**2 * t, abs=1e-2)
        interior = np.abs(vg.x) <= vg.L - coverage_halfwidth(params, 1.0)
        final = vg.final_slice()
        d2 = final[2:] - 2 * final[1:-1] + final[:-2]
        assert np.all(d2[interior[1:-1]] >= -1e-10)

    def test_linear_case_matches_quadrature(self):
        for fn in default_catalog():
            if not fn.bounded:
                continue
            got = limit_expectation(GAUSS, fn, DESK)
            assert got == pytest.approx(gauss_expect(fn), abs=5e-3), fn.name

    def test_domain_insensitivity(self):
        a = limit_expectation(GAUSS, COS, GridSpec(L=8.0, nx=800))
        b = limit_expectation(GAUSS, COS, GridSpec(L=16.0, nx=1600))
        assert abs(a - b) <= 1e-6


class TestEvalAt:
    def make_linear(self):
        grid = GridSpec(L=1.0, nx=4)
        x = grid.nodes()
        values = np.vstack([2 * x + 1, 2 * x + 3])
        return ValueGrid(np.array([0.0, 1.0]), x, values, np.zeros(2),
                         GAUSS, grid)

    def test_stored_node_exact(self):
        vg = self.make_linear()
        assert eval_at(vg, 0.0, -0.5) == 0.0
        assert eval_at(vg, 1.0, 0.5) == 4.0

    def test_linear_reproduction_between_nodes(self):
        vg = self.make_linear()
        assert eval_at(vg, 0.5, 0.25) == pytest.approx(2.5, abs=1e-14)

    def test_out_of_range_rejected(self):
        vg = self.make_linear()
        with pytest.raises(InvalidSpecError):
            eval_at(vg, 1.5, 0.0)
        with pytest.raises(InvalidSpecError):
            eval_at(vg, 0.5, 1.5)

    def test_influence_flag(self):
        vg = solve_gheat(GAUSS, COS, DESK)
        assert not vg.influenced(1.0, 0.0)
        assert vg.influenced(1.0, 7.9)


class TestLimit:
    def test_gaussian_value(self):
        assert limit_expectation(GAUSS, COS, DESK) == pytest.approx(0.60653, abs=5e-3)

    def test_upper_variance_for_quad(self):
        got = limit_expectation(GParams(0.0, 0.0, 0.5, 1.0), phi_by_name("quad"), DESK)
        assert got == pytest.approx(1.0, abs=1e-2)

    def test_maximal_mean_for_linear(self):
        got = limit_expectation(GParams(0.1, 0.5, 0.0, 0.0), phi_by_name("linear"),
                                GridSpec(L=4.0, nx=400))
        assert got == pytest.approx(0.5, abs=1e-3)

    def test_horizon_must_cover_one(self):
        with pytest.raises(InvalidSpecError):
            limit_expectation(GAUSS, COS, GridSpec(L=8.0, nx=800, T=0.5))


class TestSemigroup:
    def test_nonlinear_residual_small(self):
        params = GParams(0.0, 0.0, 0.5, 1.0)
        r = semigroup_residual(params, COS, 0.5, 0.5, DESK)
        assert r <= 5e-3

    def test_degenerate_linear_residual_tiny(self):
        r = semigroup_residual(GAUSS, COS, 0.5, 0.5, DESK)
        assert r <= 1e-6

    def test_residual_halves_with_dx(self):
        params = GParams(0.0, 0.0, 0.5, 1.0)
        r1 = semigroup_residual(params, COS, 0.5, 0.5, GridSpec(L=8.0, nx=800))
        r2 = semigroup_residual(params, COS, 0.5, 0.5, GridSpec(L=8.0, nx=1600))
        assert r2 <= 0.6 * r1 + 1e-12

    def test_argument_validation(self):
        with pytest.raises(InvalidSpecError):
            semigroup_residual(GAUSS, COS, 0.0, 0.5, DESK)
        with pytest.raises(InvalidSpecError):
            semigroup_residual(GAUSS, COS, 0.7, 0.7, DESK)
