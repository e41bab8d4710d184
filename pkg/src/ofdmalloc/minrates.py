"""Weighted-sum-rate maximization under rate floors and a power budget.

Feasibility reduces to comparing the budget against the minimum power that
meets the floors.  Two solvers, both globally optimal on feasible inputs:

* ``solve_minrates_weights`` raises the working weight of every user whose
  floor is violated until the budget-constrained weighted-sum-rate solution
  meets it with equality; the weight increments are exactly the
  rate-constraint multipliers.
* ``solve_minrates_waterfill`` bisects the power price; at a fixed price
  each user water-fills to the level log(weight/price), raised where needed
  so its floor holds with equality.

The composite weights together with the power price form the normal vector
of the hyperplane supporting the rate/power region at the solution, and
their descending order is the downlink encoding order.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import _kernels as kernels
from .capacity import (
    BC,
    DecodingOrder,
    PowerAllocation,
    RateAllocation,
    bc_to_mac_powers,
    kkt_residuals_wsr,
    mac_to_bc_powers,
    rate_constraint_residuals,
    rates_to_powers,
    weight_order_ascending,
)
from .errors import ConvergenceError, InfeasibleError
from .minpower import (
    carrier_orders,
    check_requirements,
    ranked_total_power,
    solve_minpower,
)
from .report import DualState, SolverReport
from .wsr import PRICE_TOL, _price_search, _solve_core, check_weights

__all__ = [
    "MinRatesProblem",
    "check_feasibility",
    "solve_minrates_weights",
    "solve_minrates_waterfill",
    "tangent_normal",
    "rate_monotonicity_probe",
]

RATE_TOL = 1e-8
BOUNDARY_BAND = 1e-9


@dataclass(frozen=True)
class MinRatesProblem:
    """Instance of the combined problem: weights, rate floors (nats), power
    budget and optionally an explicit set of constrained users.

    Users outside ``constrained`` have their floors zeroed; a floor of zero
    never binds, so the set is otherwise implicit in the requirement vector.
    """

    gains: object
    mu: np.ndarray
    targets: np.ndarray
    p_budget: float
    constrained: frozenset | None = None

    def __post_init__(self):
        mu = check_weights(self.mu, self.gains.M)
        targets = check_requirements(self.targets, self.gains.M)
        if self.p_budget <= 0 or not np.isfinite(self.p_budget):
            raise ValueError("the power budget must be positive and finite")
        if self.constrained is not None:
            keep = frozenset(int(m) for m in self.constrained)
            if not keep <= set(range(self.gains.M)):
                raise ValueError("constrained-user set contains unknown users")
            masked = np.where([m in keep for m in range(self.gains.M)], targets, 0.0)
            object.__setattr__(self, "constrained", keep)
            targets = masked
        mu.setflags(write=False)
        targets.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "p_budget", float(self.p_budget))


def check_feasibility(gains, targets, p_budget: float) -> dict:
    """Whether the rate floors fit inside the power budget.

    Solves the minimum-power problem; feasible iff its optimum does not
    exceed the budget.  A budget within a relative 1e-9 band of the optimum
    reports ``boundary=True``.
    """
    if p_budget <= 0:
        raise ValueError("the power budget must be positive")
    report = solve_minpower(gains, targets)
    p_min = report.details["p_min"]
    band = BOUNDARY_BAND * max(p_min, 1.0)
    return {
        "feasible": bool(p_min <= p_budget + band),
        "boundary": bool(abs(p_min - p_budget) <= band),
        "p_min": p_min,
        "minpower_report": report,
    }


def _guard_feasible(problem: MinRatesProblem) -> dict:
    feas = check_feasibility(problem.gains, problem.targets, problem.p_budget)
    if not feas["feasible"]:
        raise InfeasibleError(feas["p_min"], problem.p_budget)
    return feas


def _single_user_ceiling(gains, m: int, p_budget: float) -> float:
    """Best rate user m alone can reach within the budget (water-filling)."""
    a = np.full((gains.M, gains.K), np.inf)
    a[m] = gains.noise_over_gain()[m]
    mu = np.zeros(gains.M)
    mu[m] = 1.0
    lam, _ = _price_search(a, mu, p_budget, PRICE_TOL)
    depth = np.clip(1.0 / lam - a[m], 0.0, None)
    return float(np.sum(np.log1p(np.where(depth > 0, depth / a[m], 0.0))))


def solve_minrates_weights(
    problem: MinRatesProblem,
    tol: float = RATE_TOL,
    max_sweeps: int = 2000,
) -> SolverReport:
    """Weight-raising solver built on repeated budget-constrained
    weighted-sum-rate solves.

    Sweeps the users; whenever a floor is violated, the user's working
    weight is raised by bisection until its rate meets the floor within
    ``tol`` nats.  The working weight vector is componentwise nondecreasing
    across the run, which drives the convergence argument.
    """
    t0 = time.perf_counter()
    gains, mu, targets, p_budget = problem.gains, problem.mu, problem.targets, problem.p_budget
    feas = _guard_feasible(problem)

    mu_star = mu.copy()

    def resolve(vector, hint):
        return _solve_core(gains, vector, p_budget, PRICE_TOL, lam_hint=hint)

    lam, rates, p_bc, _ = resolve(mu_star, None)
    totals = rates.sum(axis=1)
    trace = []
    weight_path = [mu_star.copy()]
    converged = False
    for _ in range(max_sweeps):
        adjusted = False
        for m in range(gains.M):
            if targets[m] <= 0 or totals[m] >= targets[m] - tol:
                continue
            adjusted = True
            lo = mu_star[m]
            hi = lo if lo > 0 else float(np.max(mu_star)) * 2.0**-20
            grown = False
            for _ in range(80):
                hi *= 2.0
                probe = mu_star.copy()
                probe[m] = hi
                lam, rates, p_bc, _ = resolve(probe, lam)
                totals = rates.sum(axis=1)
                if totals[m] >= targets[m]:
                    grown = True
                    break
                lo = hi
            if not grown:
                ceiling = _single_user_ceiling(gains, m, p_budget)
                raise ConvergenceError(
                    f"could not raise user {m + 1} to its floor; its single-user "
                    f"ceiling at this budget is {ceiling!r} nats",
                    trace,
                )
            # bisect on the working weight; the rate is nondecreasing in it
            x = hi
            while abs(totals[m] - targets[m]) > tol and (hi - lo) > 1e-15 * hi:
                x = 0.5 * (lo + hi)
                probe = mu_star.copy()
                probe[m] = x
                lam, rates, p_bc, _ = resolve(probe, lam)
                totals = rates.sum(axis=1)
                if totals[m] < targets[m]:
                    lo = x
                else:
                    hi = x
            if totals[m] < targets[m] - tol:
                # interval collapsed below the floor; keep the safe endpoint
                x = hi
                probe = mu_star.copy()
                probe[m] = x
                lam, rates, p_bc, _ = resolve(probe, lam)
                totals = rates.sum(axis=1)
            mu_star[m] = x
        trace.append(float(mu @ totals))
        weight_path.append(mu_star.copy())
        if not adjusted:
            converged = True
            break
        if np.all(totals >= targets - tol):
            converged = True
            break
    order_asc = weight_order_ascending(mu_star)
    pa_bc = PowerAllocation(powers=p_bc, side=BC)
    pa_mac = bc_to_mac_powers(gains, pa_bc, DecodingOrder.global_order(order_asc))
    report = _assemble_report(
        "minrates-weights",
        problem,
        mu_star,
        lam,
        rates,
        pa_mac,
        pa_bc,
        trace,
        "objective",
        converged,
        feas,
        t0,
    )
    report.details["weight_path"] = np.asarray(weight_path)
    return report


def _assemble_report(
    name, problem, mu_star, lam, rates_matrix, pa_mac, pa_bc, trace, trace_kind, converged, feas, t0
):
    gains, mu = problem.gains, problem.mu
    rates = RateAllocation(rates=rates_matrix)
    mu_tilde = np.clip(mu_star - mu, 0.0, None)
    kkt = kkt_residuals_wsr(gains, pa_mac, mu_star, lam, problem.p_budget)
    kkt.update(rate_constraint_residuals(rates, problem.targets, mu_tilde))
    objective = float(mu @ rates.per_user)
    return SolverReport(
        problem=name,
        converged=converged,
        iterations=len(trace),
        rates=rates.rates,
        powers_mac=pa_mac.powers,
        powers_bc=pa_bc.powers,
        duals=DualState(lam=lam, mu_tilde=mu_tilde, mu_star=mu_star),
        order=list(np.argsort(-mu_star, kind="stable")),
        carrier_orders=carrier_orders(gains).matrix(gains.K).copy(),
        kkt=kkt,
        trace=trace,
        trace_kind=trace_kind,
        objective=objective,
        wall_time_s=time.perf_counter() - t0,
        details={
            "p_budget": problem.p_budget,
            "p_min": feas["p_min"],
            "targets": problem.targets,
        },
    )


def solve_minrates_waterfill(
    problem: MinRatesProblem,
    tol: float = PRICE_TOL,
    inner_tol: float = 1e-10,
    max_inner: int = 5000,
) -> SolverReport:
    """Price-bisection solver built on floor-constrained water-filling.

    For a fixed power price the inner loop sweeps the users to a fixed
    point: each fills to the level log(weight/price) and raises the level
    when its floor is unmet.  The resulting total power is nonincreasing in
    the price, so the budget is matched by bisection.
    """
    t0 = time.perf_counter()
    gains, mu, targets, p_budget = problem.gains, problem.mu, problem.targets, problem.p_budget
    feas = _guard_feasible(problem)

    order = carrier_orders(gains)
    order_mat = np.ascontiguousarray(order.matrix(gains.K))
    rank_mat = np.ascontiguousarray(order.ranks(gains.K))
    A = np.ascontiguousarray(gains.noise_over_gain())
    a_ranked = np.take_along_axis(A, order_mat.T, axis=0)
    R = np.zeros((gains.M, gains.K))
    levels = np.full(gains.M, -np.inf)
    price_trace = []

    def power_at(lam):
        # cold start so the spent power is a deterministic function of the
        # price alone; both the objective and the power must settle, or the
        # bisection can be fed a value from a half-converged sweep state
        R[:] = 0.0
        prev_obj, prev_p = np.inf, np.inf
        p_total = np.inf
        for _ in range(max_inner):
            kernels.minrates_sweep(A, order_mat, rank_mat, mu, targets, lam, R, levels)
            obj = float(mu @ R.sum(axis=1))
            p_total = ranked_total_power(a_ranked, order_mat.T, R)
            if abs(obj - prev_obj) <= inner_tol * max(abs(obj), 1e-300) and abs(
                p_total - prev_p
            ) <= inner_tol * max(p_total, 1e-300):
                break
            prev_obj, prev_p = obj, p_total
        price_trace.append((lam, p_total))
        return p_total

    with np.errstate(invalid="ignore"):
        weighted = np.where(np.isfinite(A), mu[:, None] / A, 0.0)
    lam_shutoff = float(weighted.max())
    if lam_shutoff <= 0:
        raise ValueError("every user with positive weight has zero gain everywhere")
    hi = lam_shutoff
    lam = hi
    converged = False
    at_floor = False
    prev_power = np.inf
    for _ in range(300):
        p_total = power_at(hi)
        if p_total <= p_budget:
            break
        if abs(p_total - prev_power) <= 1e-14 * max(p_total, 1e-300):
            # spent power has hit its floor; the budget sits at the
            # boundary of feasibility, so the rate floors fix everything
            at_floor = True
            lam = hi
            converged = p_total - p_budget <= 1e-6 * p_budget
            break
        prev_power = p_total
        hi *= 2.0
    else:
        raise ConvergenceError("no upper price bracket found", [p for _, p in price_trace])
    if not at_floor:
        lo = hi
        for _ in range(2100):
            lo /= 2.0
            if power_at(lo) >= p_budget:
                break
        else:
            raise ConvergenceError("no lower price bracket found", [p for _, p in price_trace])
        lam = hi
        for _ in range(200):
            lam = 0.5 * (lo + hi)
            p_total = power_at(lam)
            if abs(p_total - p_budget) <= tol * p_budget:
                converged = True
                break
            if p_total > p_budget:
                lo = lam
            else:
                hi = lam
    # polish at the accepted price: drive the sweep map to its fixed point so
    # the recovered multipliers and rates are solver-tolerance clean
    prev_R = R.copy()
    for _ in range(max_inner):
        kernels.minrates_sweep(A, order_mat, rank_mat, mu, targets, lam, R, levels)
        if float(np.max(np.abs(R - prev_R))) <= 1e-12:
            break
        prev_R[:] = R
    # recover the composite weights from the final levels; a level above the
    # fixed one means the rate floor was binding (tolerance covers the
    # compiled backend computing the fixed level with a different libm)
    with np.errstate(divide="ignore"):
        base = np.where(mu > 0, np.log(mu / lam), -np.inf)
    raised = levels > base + 1e-12 * (1.0 + np.abs(np.where(np.isfinite(base), base, 0.0)))
    mu_star = np.where(raised, lam * np.exp(levels), mu)
    pa_mac = rates_to_powers(gains, RateAllocation(rates=R), order)
    pa_bc = mac_to_bc_powers(gains, pa_mac, order)
    report = _assemble_report(
        "minrates-waterfill",
        problem,
        mu_star,
        lam,
        R,
        pa_mac,
        pa_bc,
        [p for _, p in price_trace],
        "sum_power",
        converged,
        feas,
        t0,
    )
    report.details["price_trace"] = [(float(x), float(p)) for x, p in price_trace]
    return report


def tangent_normal(report: SolverReport, samples=None, tol: float = 1e-7) -> dict:
    """Normal vector of the hyperplane supporting the rate/power region at
    the reported solution: the composite weights stacked with the power
    price.  Given sampled feasible (rates, power) points, also checks the
    support inequality against every sample.
    """
    mu_star = np.asarray(report.duals.mu_star, dtype=np.float64)
    lam = float(report.duals.lam)
    out = {
        "mu_star": mu_star,
        "lam": lam,
        "order": list(np.argsort(-mu_star, kind="stable")),
    }
    if samples is not None:
        rate_points, power_points = samples
        rate_points = np.asarray(rate_points, dtype=np.float64)
        power_points = np.asarray(power_points, dtype=np.float64)
        spent = report.details.get("p_budget", report.sum_power)
        best = float(mu_star @ report.rate_totals - lam * spent)
        values = rate_points @ mu_star - lam * power_points
        violation = float(np.max(values - best)) if values.size else 0.0
        out["support_violation"] = max(violation, 0.0)
        out["support_holds"] = bool(violation <= tol)
    return out


def rate_monotonicity_probe(gains, mu, p_budget: float, m: int, delta: float) -> dict:
    """Raise one weight and compare budget-constrained solutions.

    The probed user's rate must not decrease and every other rate must not
    increase (tolerance 1e-9 nats).
    """
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    mu = check_weights(mu, gains.M)
    _, rates_a, _, _ = _solve_core(gains, mu, p_budget, PRICE_TOL)
    bumped = mu.copy()
    bumped[m] += delta
    _, rates_b, _, _ = _solve_core(gains, bumped, p_budget, PRICE_TOL)
    change = rates_b.sum(axis=1) - rates_a.sum(axis=1)
    others = np.delete(change, m)
    return {
        "delta_rates": change,
        "own_ok": bool(change[m] >= -1e-9),
        "others_ok": bool(np.all(others <= 1e-9)),
    }
