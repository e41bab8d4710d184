import math

import numpy as np
import pytest

from ofdmalloc import (
    InfeasibleError,
    MinRatesProblem,
    check_feasibility,
    rate_monotonicity_probe,
    sample_feasible_region,
    solve_minpower,
    solve_minrates_waterfill,
    solve_minrates_weights,
    solve_wsr,
    tangent_normal,
)
from conftest import random_gains

LN2 = math.log(2.0)


def make_problem(seed, M=3, K=8, mu=None, boost=(1.6, 0.5), p_db=5.0):
    """Random instance whose floors mix active and inactive constraints."""
    g = random_gains(M, K, seed=seed)
    mu = np.asarray(mu if mu is not None else np.linspace(1.0, 0.4, M))
    p_budget = K * g.sigma2 * 10 ** (p_db / 10.0)
    base = solve_wsr(g, mu, p_budget).rate_totals
    targets = base.copy()
    targets[0] = 0.0
    targets[1:] = base[1:] * np.asarray(boost)[: M - 1]
    return MinRatesProblem(gains=g, mu=mu, targets=targets, p_budget=p_budget), base


class TestCheckFeasibility:
    def test_zero_floors_always_feasible(self):
        g = random_gains(2, 4, seed=0)
        out = check_feasibility(g, [0.0, 0.0], 1.0)
        assert out["feasible"] and out["p_min"] == 0.0

    def test_exact_minimum_is_boundary(self):
        g = random_gains(2, 4, seed=1)
        p_min = solve_minpower(g, [1.0, 0.5]).objective
        out = check_feasibility(g, [1.0, 0.5], p_min)
        assert out["feasible"] and out["boundary"]

    def test_constructed_margin(self):
        g = random_gains(2, 4, seed=2)
        p0 = 4.0
        targets = solve_wsr(g, [1.0, 1.5], p0 / 2).rate_totals
        out = check_feasibility(g, targets, p0)
        assert out["feasible"] and not out["boundary"]
        assert out["p_min"] == pytest.approx(p0 / 2, rel=1e-6)

    def test_sided_answers_around_minimum(self):
        g = random_gains(2, 4, seed=3)
        p_min = solve_minpower(g, [1.2, 0.8]).objective
        assert check_feasibility(g, [1.2, 0.8], 1.01 * p_min)["feasible"]
        assert not check_feasibility(g, [1.2, 0.8], 0.99 * p_min)["feasible"]


class TestWeightsSolver:
    def test_zero_floors_reduce_to_wsr(self):
        g = random_gains(3, 4, seed=4)
        mu = np.array([1.0, 0.5, 0.8])
        problem = MinRatesProblem(gains=g, mu=mu, targets=np.zeros(3), p_budget=5.0)
        rep = solve_minrates_weights(problem)
        plain = solve_wsr(g, mu, 5.0)
        assert rep.objective == pytest.approx(plain.objective, rel=1e-12)
        assert np.all(rep.duals.mu_tilde == 0.0)

    def test_active_floor_met_with_equality(self):
        problem, base = make_problem(seed=5)
        rep = solve_minrates_weights(problem)
        assert rep.converged
        assert rep.rate_totals[1] == pytest.approx(problem.targets[1], abs=1e-7)
        assert rep.duals.mu_tilde[1] > 0
        # unconstrained user keeps its plain weight
        assert rep.duals.mu_star[0] == problem.mu[0]

    def test_weights_never_decrease(self):
        problem, _ = make_problem(seed=6)
        rep = solve_minrates_weights(problem)
        assert np.all(rep.duals.mu_star >= problem.mu - 1e-15)
        # the accepted working-weight sequence is componentwise nondecreasing
        path = rep.details["weight_path"]
        assert path.shape[0] >= 2
        assert np.all(np.diff(path, axis=0) >= 0.0)

    def test_boundary_budget_activates_everything(self):
        g = random_gains(3, 6, seed=7)
        targets = np.array([0.8, 0.6, 0.9])
        p_min = solve_minpower(g, targets).objective
        problem = MinRatesProblem(
            gains=g, mu=np.array([0.5, 0.3, 0.2]), targets=targets, p_budget=p_min * (1 + 1e-6)
        )
        rep = solve_minrates_weights(problem)
        assert np.allclose(rep.rate_totals, targets, atol=1e-5)

    def test_infeasible_fails_fast_with_p_min(self):
        g = random_gains(2, 4, seed=8)
        p_min = solve_minpower(g, [1.0, 1.0]).objective
        problem = MinRatesProblem(
            gains=g, mu=np.ones(2), targets=np.array([1.0, 1.0]), p_budget=0.5 * p_min
        )
        with pytest.raises(InfeasibleError) as err:
            solve_minrates_weights(problem)
        assert err.value.p_min == pytest.approx(p_min, rel=1e-9)


class TestWaterfillSolver:
    def test_zero_floors_single_user_is_waterfilling(self):
        g = random_gains(1, 6, seed=9)
        problem = MinRatesProblem(gains=g, mu=np.ones(1), targets=np.zeros(1), p_budget=3.0)
        rep = solve_minrates_waterfill(problem)
        plain = solve_wsr(g, [1.0], 3.0)
        assert rep.objective == pytest.approx(plain.objective, rel=1e-8)
        assert rep.sum_power == pytest.approx(3.0, rel=1e-8)

    def test_zero_floors_reduce_to_wsr(self):
        g = random_gains(3, 4, seed=10)
        mu = np.array([1.0, 0.5, 0.8])
        problem = MinRatesProblem(gains=g, mu=mu, targets=np.zeros(3), p_budget=5.0)
        rep = solve_minrates_waterfill(problem)
        plain = solve_wsr(g, mu, 5.0)
        assert rep.objective == pytest.approx(plain.objective, rel=1e-8)

    def test_boundary_budget_matches_minpower_rates(self):
        g = random_gains(3, 6, seed=11)
        targets = np.array([0.8, 0.6, 0.9])
        mp = solve_minpower(g, targets)
        problem = MinRatesProblem(
            gains=g,
            mu=np.array([0.5, 0.3, 0.2]),
            targets=targets,
            p_budget=mp.objective * (1 + 1e-6),
        )
        rep = solve_minrates_waterfill(problem)
        assert np.allclose(rep.rate_totals, mp.rate_totals, atol=1e-5)

    def test_price_trace_monotone(self):
        problem, _ = make_problem(seed=12)
        rep = solve_minrates_waterfill(problem)
        pairs = sorted(rep.details["price_trace"])
        powers = [p for _, p in pairs]
        assert all(a >= b - 1e-8 * max(abs(b), 1.0) for a, b in zip(powers, powers[1:]))


class TestCrossAgreement:
    @pytest.mark.parametrize("seed", [20, 21, 22])
    def test_objectives_and_rates_agree(self, seed):
        problem, _ = make_problem(seed=seed, M=3, K=8)
        a = solve_minrates_weights(problem)
        b = solve_minrates_waterfill(problem)
        assert a.converged and b.converged
        assert abs(a.objective - b.objective) <= 1e-5 * abs(a.objective)
        assert np.max(np.abs(a.rate_totals - b.rate_totals)) <= 1e-4

    def test_large_scale_parameter_set(self):
        # 4 users on 256 carriers at 10 dB with mixed floors; the user with
        # a zero floor must end unconstrained, and the two independent
        # algorithms must agree (exact values depend on the random draw)
        g = random_gains(4, 256, seed=314, L=8)
        mu = np.array([0.35, 0.4, 0.1, 0.15])
        targets = np.array([1.0, 0.0, 1.25, 0.5]) * LN2
        p_budget = g.K * g.sigma2 * 10.0
        problem = MinRatesProblem(gains=g, mu=mu, targets=targets, p_budget=p_budget)
        a = solve_minrates_weights(problem)
        b = solve_minrates_waterfill(problem)
        assert a.converged and b.converged
        assert a.duals.mu_tilde[1] == 0.0 and b.duals.mu_tilde[1] == 0.0
        assert abs(a.objective - b.objective) <= 1e-5 * abs(a.objective)
        assert np.max(np.abs(a.rate_totals - b.rate_totals)) <= 1e-4
        for rep in (a, b):
            assert np.all(rep.rate_totals >= targets - 1e-7)
            assert rep.sum_power == pytest.approx(p_budget, rel=1e-6)

    def test_budget_spent_and_slackness(self):
        problem, _ = make_problem(seed=23)
        for rep in (solve_minrates_weights(problem), solve_minrates_waterfill(problem)):
            assert rep.sum_power == pytest.approx(problem.p_budget, rel=1e-6)
            mu_t = rep.duals.mu_tilde
            gap = mu_t * np.abs(rep.rate_totals - problem.targets) / (1.0 + mu_t)
            assert np.all(gap <= 1e-6)


class TestTangentNormal:
    def test_unconstrained_normal_is_plain_weights(self):
        g = random_gains(2, 4, seed=24)
        mu = np.array([1.0, 0.5])
        problem = MinRatesProblem(gains=g, mu=mu, targets=np.zeros(2), p_budget=4.0)
        rep = solve_minrates_weights(problem)
        out = tangent_normal(rep)
        assert np.array_equal(out["mu_star"], mu)

    def test_active_floor_strictly_raises_weight(self):
        problem, _ = make_problem(seed=25)
        rep = solve_minrates_weights(problem)
        active = rep.duals.mu_tilde > 1e-9
        assert active.any()
        assert np.all(rep.duals.mu_star[active] > problem.mu[active])

    def test_supports_sampled_region(self):
        problem, _ = make_problem(seed=26, M=2, K=2)
        rep = solve_minrates_waterfill(problem)
        samples = sample_feasible_region(
            problem.gains, (0.01, problem.p_budget * 2), 10_000, seed=7
        )
        out = tangent_normal(rep, samples=samples)
        assert out["support_holds"], out["support_violation"]


class TestRateMonotonicity:
    def test_zero_delta_no_change(self):
        g = random_gains(2, 4, seed=27)
        out = rate_monotonicity_probe(g, [1.0, 0.5], 3.0, 0, 0.0)
        assert np.allclose(out["delta_rates"], 0.0, atol=1e-12)

    def test_single_user_scale_invariant(self):
        g = random_gains(1, 4, seed=28)
        out = rate_monotonicity_probe(g, [1.0], 3.0, 0, 5.0)
        assert abs(out["delta_rates"][0]) <= 1e-9

    def test_probes_hold_on_random_instance(self):
        g = random_gains(3, 4, seed=29)
        for m in range(3):
            out = rate_monotonicity_probe(g, [1.0, 0.7, 0.4], 4.0, m, 0.1)
            assert out["own_ok"] and out["others_ok"]


class TestProblemValidation:
    def test_explicit_constrained_set_masks_targets(self):
        g = random_gains(3, 4, seed=30)
        problem = MinRatesProblem(
            gains=g,
            mu=np.ones(3),
            targets=np.array([1.0, 2.0, 3.0]),
            p_budget=5.0,
            constrained=frozenset({1}),
        )
        assert problem.targets.tolist() == [0.0, 2.0, 0.0]

    def test_rejects_unknown_users_in_set(self):
        g = random_gains(2, 2, seed=31)
        with pytest.raises(ValueError):
            MinRatesProblem(
                gains=g, mu=np.ones(2), targets=np.zeros(2), p_budget=1.0, constrained=frozenset({5})
            )

    def test_rejects_nonpositive_budget(self):
        g = random_gains(2, 2, seed=32)
        with pytest.raises(ValueError):
            MinRatesProblem(gains=g, mu=np.ones(2), targets=np.zeros(2), p_budget=0.0)
