"""Cross-solver consistency: all three problems live on one convex
rate/power region, so each solution's multipliers must reproduce it through
the other solvers."""

import numpy as np
import pytest

from ofdmalloc import (
    MinRatesProblem,
    solve_minpower,
    solve_minrates_waterfill,
    solve_minrates_weights,
    solve_wsr,
)
from conftest import random_gains


class TestMinpowerAsWeightedSumRate:
    @pytest.mark.parametrize("seed", [1, 2, 3])
    def test_multipliers_reproduce_the_allocation(self, seed):
        # the minimum-power solution maximizes mu_tilde' R - P; feeding the
        # multipliers back as weights with the optimal power as the budget
        # must return the same rates, at unit power price
        g = random_gains(3, 6, seed=seed)
        rng = np.random.default_rng(seed)
        targets = rng.uniform(0.4, 1.3, 3)
        mp = solve_minpower(g, targets)
        wsr = solve_wsr(g, mp.duals.mu_tilde, mp.objective)
        assert np.allclose(wsr.rate_totals, mp.rate_totals, atol=1e-6)
        assert wsr.duals.lam == pytest.approx(1.0, rel=1e-6)
        assert wsr.objective == pytest.approx(
            float(mp.duals.mu_tilde @ mp.rate_totals), rel=1e-8
        )

    def test_scaled_multipliers_scale_the_price(self):
        g = random_gains(2, 4, seed=9)
        mp = solve_minpower(g, [1.0, 0.7])
        wsr = solve_wsr(g, 3.0 * mp.duals.mu_tilde, mp.objective)
        assert wsr.duals.lam == pytest.approx(3.0, rel=1e-6)
        assert np.allclose(wsr.rate_totals, mp.rate_totals, atol=1e-6)


class TestMinratesAsWeightedSumRate:
    @pytest.mark.parametrize("solver", [solve_minrates_weights, solve_minrates_waterfill])
    def test_composite_weights_reproduce_the_allocation(self, solver):
        g = random_gains(3, 8, seed=17)
        mu = np.array([0.8, 0.5, 0.2])
        p_budget = 8.0 * 2.5
        base = solve_wsr(g, mu, p_budget).rate_totals
        targets = np.array([0.0, base[1] * 1.7, base[2] * 2.2])
        problem = MinRatesProblem(gains=g, mu=mu, targets=targets, p_budget=p_budget)
        rep = solver(problem)
        assert rep.converged
        again = solve_wsr(g, rep.duals.mu_star, p_budget)
        assert np.allclose(again.rate_totals, rep.rate_totals, atol=2e-5)
        assert again.duals.lam == pytest.approx(rep.duals.lam, rel=1e-5)


class TestBoundaryContinuity:
    def test_minrates_at_the_minimum_power_matches_minpower(self):
        # the combined problem degenerates to the minimum-power solution as
        # the budget approaches the feasibility threshold
        g = random_gains(3, 6, seed=23)
        targets = np.array([0.9, 0.4, 0.7])
        mp = solve_minpower(g, targets)
        problem = MinRatesProblem(
            gains=g,
            mu=np.array([0.2, 0.5, 0.3]),
            targets=targets,
            p_budget=mp.objective * (1 + 1e-8),
        )
        rep = solve_minrates_waterfill(problem)
        assert np.allclose(rep.rate_totals, mp.rate_totals, atol=1e-4)
        assert rep.sum_power == pytest.approx(mp.objective, rel=1e-6)
