"""Minimum total power meeting per-user rate requirements.

Works in the uplink with per-carrier decode orders sorted by decreasing
gain, under which the total power is a convex function of the per-carrier
rates.  The solver sweeps the users round-robin: each recomputes its
effective noise floors against the others' current rates and water-fills
its own requirement exactly.  The per-sweep total power is nonincreasing
and converges to the global optimum; the final water levels expose the
rate-constraint multipliers.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import _kernels as kernels
from .capacity import (
    DecodingOrder,
    RateAllocation,
    kkt_residuals_minpower,
    mac_to_bc_powers,
    powers_from_rates_ranked,
    rates_to_powers,
)
from .errors import UnreachableUserError
from .report import DualState, SolverReport

__all__ = [
    "CostCoefficients",
    "check_requirements",
    "carrier_orders",
    "cost_coefficients",
    "effective_noise",
    "waterfill_user",
    "solve_minpower",
    "extract_decoding_orders",
]

SWEEP_TOL = 1e-9
MAX_SWEEPS = 10000


def check_requirements(targets, M: int) -> np.ndarray:
    """Validate a rate-requirement vector (nats): nonnegative and finite."""
    targets = np.asarray(targets, dtype=np.float64).reshape(-1)
    if targets.size != M:
        raise ValueError(f"expected {M} rate requirements, got {targets.size}")
    if not np.all(np.isfinite(targets)) or np.any(targets < 0):
        raise ValueError("rate requirements must be finite and nonnegative")
    return targets


@dataclass(frozen=True)
class CostCoefficients:
    """Marginal power costs in per-carrier decode-position order.

    ``c[0, k] = sigma2 / h(strongest user on k)`` and
    ``c[j, k] = sigma2 * (1/h_j - 1/h_{j-1})`` down the gain ranking, so all
    entries are nonnegative; positions holding zero-gain users carry +inf
    and are excluded from any allocation.  ``orders`` is the (K, M)
    gain-descending position->user matrix.
    """

    c: np.ndarray
    orders: np.ndarray


def carrier_orders(gains) -> DecodingOrder:
    """Per-carrier decode orders: gains descending, ties by user index."""
    keys = np.argsort(-gains.gains, axis=0, kind="stable")
    return DecodingOrder.per_carrier(keys.T)


def cost_coefficients(gains) -> CostCoefficients:
    """Per-position marginal power costs under the gain-descending orders."""
    orders = carrier_orders(gains).matrix(gains.K)
    a_r = np.take_along_axis(gains.noise_over_gain(), orders.T, axis=0)
    c = np.empty_like(a_r)
    c[0] = a_r[0]
    with np.errstate(invalid="ignore"):
        c[1:] = a_r[1:] - a_r[:-1]
    # positions held by zero-gain users can never carry rate
    c[~np.isfinite(a_r)] = np.inf
    return CostCoefficients(c=c, orders=orders)


def effective_noise(gains, rates: RateAllocation, m: int) -> np.ndarray:
    """Per-carrier noise floors of user m given everyone's current rates.

    The floor is the log of the marginal power cost of user m's first unit
    of rate on that carrier, holding the other users' rates fixed: +inf on
    carriers where user m has no gain.  Returned as a length-K vector.
    """
    if not 0 <= m < gains.M:
        raise ValueError(f"user index {m} out of range")
    order = carrier_orders(gains)
    return kernels.effective_noise_floor(
        gains.noise_over_gain(),
        np.ascontiguousarray(order.matrix(gains.K)),
        np.ascontiguousarray(order.ranks(gains.K)),
        np.ascontiguousarray(rates.rates),
        m,
    )


def waterfill_user(noise_floors: np.ndarray, target: float):
    """Exact rate water-filling for one user.

    Finds the smallest active carrier set and the level nu with
    sum_k [nu - n_k]+ = target; returns (rates, nu).  A zero target yields
    all-zero rates and nu = -inf (the requirement never binds).
    """
    noise_floors = np.asarray(noise_floors, dtype=np.float64).reshape(-1)
    if target < 0:
        raise ValueError("the rate target must be nonnegative")
    if target == 0:
        return np.zeros_like(noise_floors), -np.inf
    if not np.any(np.isfinite(noise_floors)):
        raise ValueError("no usable carrier for a positive rate target")
    nu, rates = kernels.waterfill_to_target(noise_floors, target)
    return rates, nu


def ranked_total_power(a_ranked: np.ndarray, order_T: np.ndarray, rates_matrix: np.ndarray) -> float:
    """Sum power from a precomputed gain-ranked noise-over-gain matrix."""
    r_r = np.take_along_axis(rates_matrix, order_T, axis=0)
    return float(powers_from_rates_ranked(a_ranked, r_r).sum())


def total_power_of_rates(gains, rates_matrix: np.ndarray) -> float:
    """Uplink sum power realizing the given per-carrier rates under the
    gain-descending orders."""
    order_T = carrier_orders(gains).matrix(gains.K).T
    a_r = np.take_along_axis(gains.noise_over_gain(), order_T, axis=0)
    return ranked_total_power(a_r, order_T, rates_matrix)


def solve_minpower(
    gains,
    targets,
    tol: float = SWEEP_TOL,
    max_sweeps: int = MAX_SWEEPS,
) -> SolverReport:
    """Minimize the total uplink power subject to per-user rate requirements.

    Iterates full user sweeps from zero rates until the relative per-sweep
    decrease of the total power drops to ``tol``.  Returns the rates, both
    power allocations, the multipliers exp(water level), the per-carrier
    orders and the per-sweep power trace (nonincreasing after the first
    sweep).  A report with ``converged=False`` is returned when the sweep
    budget runs out.
    """
    t0 = time.perf_counter()
    targets = check_requirements(targets, gains.M)
    if tol <= 0 or max_sweeps < 1:
        raise ValueError("need tol > 0 and max_sweeps >= 1")
    for m in range(gains.M):
        if targets[m] > 0 and not np.any(gains.gains[m] > 0):
            raise UnreachableUserError(m)

    order = carrier_orders(gains)
    order_mat = np.ascontiguousarray(order.matrix(gains.K))
    rank_mat = np.ascontiguousarray(order.ranks(gains.K))
    A = np.ascontiguousarray(gains.noise_over_gain())
    a_ranked = np.take_along_axis(A, order_mat.T, axis=0)
    R = np.zeros((gains.M, gains.K))
    levels = np.full(gains.M, -np.inf)

    trace = []
    converged = False
    prev = np.inf
    for _ in range(max_sweeps):
        kernels.minpower_sweep(A, order_mat, rank_mat, targets, R, levels)
        p_total = ranked_total_power(a_ranked, order_mat.T, R)
        trace.append(p_total)
        if p_total == 0.0 or (np.isfinite(prev) and prev - p_total <= tol * max(p_total, 1e-300)):
            converged = True
            break
        prev = p_total
    # a vanishing per-sweep power change can still leave the slower users'
    # floors slightly stale; polish until the stationarity system checks out
    if converged and p_total > 0.0:
        for _ in range(max_sweeps - len(trace)):
            residuals = kkt_residuals_minpower(
                gains, RateAllocation(rates=R), np.exp(levels), targets
            )
            if residuals["stationarity"] <= 1e-7:
                break
            kernels.minpower_sweep(A, order_mat, rank_mat, targets, R, levels)
            trace.append(ranked_total_power(a_ranked, order_mat.T, R))

    rates = RateAllocation(rates=R)
    pa_mac = rates_to_powers(gains, rates, order)
    pa_bc = mac_to_bc_powers(gains, pa_mac, order)
    mu_tilde = np.exp(levels)
    kkt = kkt_residuals_minpower(gains, rates, mu_tilde, targets)
    priority = list(np.argsort(-mu_tilde, kind="stable"))
    return SolverReport(
        problem="minpower",
        converged=converged,
        iterations=len(trace),
        rates=R,
        powers_mac=pa_mac.powers,
        powers_bc=pa_bc.powers,
        duals=DualState(lam=1.0, mu_tilde=mu_tilde, mu_star=mu_tilde),
        order=priority,
        carrier_orders=order.matrix(gains.K).copy(),
        kkt=kkt,
        trace=trace,
        trace_kind="sum_power",
        objective=pa_mac.sum_power(),
        wall_time_s=time.perf_counter() - t0,
        details={"p_min": pa_mac.sum_power(), "targets": targets, "sweep_tol": tol},
    )


def extract_decoding_orders(report: SolverReport, active_tol: float = 1e-9) -> dict:
    """Global priority order induced by the multipliers, checked against
    every carrier's active-user gain ranking.

    Two users transmitting on a common carrier must order the same way by
    gain and (reversed) by multiplier: the stronger user decodes earlier and
    carries the smaller multiplier.  Users never sharing a carrier may be
    swapped freely, so the set of optimal orders is the intersection of the
    per-carrier constraints.  Reports the worst pairwise multiplier
    violation (0.0 when the global order is consistent everywhere).
    """
    mu = np.asarray(report.duals.mu_star, dtype=np.float64)
    p = np.asarray(report.powers_mac)
    carrier_orders_mat = report.carrier_orders
    if carrier_orders_mat is None:
        raise ValueError("report carries no per-carrier orders")
    M, K = p.shape
    threshold = active_tol * max(p.sum() / K, 1e-300)
    active_sets = [np.flatnonzero(p[:, k] > threshold) for k in range(K)]
    violation = 0.0
    scale = max(float(np.max(mu)), 1e-300)
    shared = np.zeros((M, M), dtype=bool)
    for k, users in enumerate(active_sets):
        if users.size < 2:
            continue
        row = list(carrier_orders_mat[k])
        ranked = sorted(users, key=row.index)  # gain-descending among active
        for i in range(len(ranked) - 1):
            for j in range(i + 1, len(ranked)):
                u, v = ranked[i], ranked[j]
                shared[u, v] = shared[v, u] = True
                # stronger user u must not carry the larger multiplier
                violation = max(violation, (mu[u] - mu[v]) / scale)
    order = list(np.argsort(-mu, kind="stable"))
    return {
        "order": order,
        "consistent": violation <= 1e-9,
        "violation": float(max(violation, 0.0)),
        "active_sets": active_sets,
        "share_carrier": shared,
    }
