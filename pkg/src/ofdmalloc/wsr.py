"""Weighted-sum-rate maximization under a total power budget.

The downlink construction: at power price lam, user m offers marginal
utility mu_m/(sigma2/h + z) - lam at fill depth z on each carrier.  The
price is found by bisection so that the total fill depth matches the
budget; each carrier is then split into segments of its utility upper
envelope, and every segment integrates to a closed-form rate for its
winning user.  The uplink allocation follows by the duality transform.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import _kernels as kernels
from .capacity import (
    BC,
    MAC,
    DecodingOrder,
    PowerAllocation,
    RateAllocation,
    bc_to_mac_powers,
    kkt_residuals_wsr,
    weight_order_ascending,
)
from .errors import ConvergenceError
from .report import DualState, SolverReport

__all__ = [
    "CarrierSegmentation",
    "check_weights",
    "marginal_utility",
    "total_power_at_price",
    "solve_power_price",
    "segment_carrier",
    "rates_from_segments",
    "powers_from_segments",
    "solve_wsr",
    "check_fdma_optimality",
    "check_single_user_optimality",
    "fdma_waterfill",
]

PRICE_TOL = 1e-10
MAX_BISECTIONS = 200


def check_weights(mu, M: int) -> np.ndarray:
    """Validate a priority vector: nonnegative, finite, not all zero."""
    mu = np.asarray(mu, dtype=np.float64).reshape(-1)
    if mu.size != M:
        raise ValueError(f"expected {M} weights, got {mu.size}")
    if not np.all(np.isfinite(mu)) or np.any(mu < 0):
        raise ValueError("weights must be finite and nonnegative")
    if not np.any(mu > 0):
        raise ValueError("at least one weight must be positive")
    return mu


@dataclass(frozen=True)
class CarrierSegmentation:
    """Upper-envelope split of one carrier's fill range [0, z_max].

    ``breakpoints`` is strictly increasing from 0 to z_max; ``winners[j]``
    collects the depth slice between breakpoints j and j+1.  The summed
    slice lengths of a user equal its downlink power on this carrier.
    """

    carrier: int
    breakpoints: np.ndarray
    winners: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.breakpoints, dtype=np.float64)
        w = np.asarray(self.winners, dtype=np.int64)
        if b.size != w.size + 1 or b[0] != 0.0:
            raise ValueError("breakpoints must start at 0 and bracket every winner")
        if np.any(np.diff(b) <= 0) and w.size > 0:
            raise ValueError("breakpoints must be strictly increasing")
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "winners", w)

    @property
    def z_max(self) -> float:
        return float(self.breakpoints[-1])

    @property
    def is_empty(self) -> bool:
        return self.winners.size == 0


def marginal_utility(mu_m: float, h_mk: float, sigma2: float, lam: float, z: float) -> float:
    """Marginal revenue of user m at fill depth z, net of the power price.

    A zero gain makes the user worthless at any depth: returns -lam.
    """
    if h_mk <= 0:
        return -lam
    return mu_m / (sigma2 / h_mk + z) - lam


def total_power_at_price(gains, mu, lam: float) -> float:
    """Total power spent at price lam; nonincreasing and continuous in lam."""
    mu = check_weights(mu, gains.M)
    if lam <= 0:
        raise ValueError("the power price must be positive")
    return kernels.total_power_at_price(gains.noise_over_gain(), mu, lam)


def _price_search(a, mu, p_budget, tol, lam_hint=None):
    """Bisection on the price so the spent power matches the budget.

    Returns (lam, trace of power evaluations).  The bracket starts at the
    price that shuts every carrier off and expands geometrically downward
    (or around ``lam_hint`` when given).
    """
    with np.errstate(invalid="ignore"):
        weighted = np.where(np.isfinite(a), mu[:, None] / a, 0.0)
    lam_shutoff = float(weighted.max())
    if lam_shutoff <= 0:
        raise ValueError("every user with positive weight has zero gain everywhere")
    trace = []

    def power(lam):
        value = kernels.total_power_at_price(a, mu, lam)
        trace.append(value)
        return value

    if lam_hint is not None and 0 < lam_hint < lam_shutoff:
        lo, hi = lam_hint / 2.0, lam_hint * 2.0
        for _ in range(200):
            if power(lo) >= p_budget:
                break
            lo /= 2.0
        for _ in range(200):
            if power(hi) <= p_budget or hi >= lam_shutoff:
                break
            hi *= 2.0
        hi = min(hi, lam_shutoff)
    else:
        hi = lam_shutoff
        lo = hi / 2.0
        for _ in range(2100):
            if power(lo) >= p_budget:
                break
            lo /= 2.0
        else:
            raise ConvergenceError("no price bracket found", trace)
    for _ in range(MAX_BISECTIONS):
        mid = 0.5 * (lo + hi)
        value = power(mid)
        if abs(value - p_budget) <= tol * p_budget:
            return mid, trace
        if value > p_budget:
            lo = mid
        else:
            hi = mid
    raise ConvergenceError(
        f"price bisection did not reach tolerance {tol!r} in {MAX_BISECTIONS} steps", trace
    )


def solve_power_price(gains, mu, p_budget: float, tol: float = PRICE_TOL) -> float:
    """Find the power price at which the spent power equals the budget."""
    mu = check_weights(mu, gains.M)
    if p_budget <= 0:
        raise ValueError("the power budget must be positive")
    lam, _ = _price_search(gains.noise_over_gain(), mu, p_budget, tol)
    return lam


def segment_carrier(gains, mu, lam: float, k: int) -> CarrierSegmentation:
    """Envelope segmentation of carrier k at price lam."""
    mu = check_weights(mu, gains.M)
    if lam <= 0:
        raise ValueError("the power price must be positive")
    a = gains.noise_over_gain()
    breaks, winners = kernels.carrier_segments(np.ascontiguousarray(a[:, k]), mu, lam)
    return CarrierSegmentation(carrier=k, breakpoints=breaks, winners=winners)


def rates_from_segments(segments, gains) -> RateAllocation:
    """Closed-form downlink rates for one or more carrier segmentations.

    Each segment [lo, hi] won by user m on carrier k adds
    log((sigma2/h + hi) / (sigma2/h + lo)) to that user's rate.
    """
    if isinstance(segments, CarrierSegmentation):
        segments = [segments]
    a = gains.noise_over_gain()
    rates = np.zeros((gains.M, gains.K))
    for seg in segments:
        b, w = seg.breakpoints, seg.winners
        for j, m in enumerate(w):
            rates[m, seg.carrier] += np.log((a[m, seg.carrier] + b[j + 1]) / (a[m, seg.carrier] + b[j]))
    return RateAllocation(rates=rates)


def powers_from_segments(segments, gains) -> PowerAllocation:
    """Downlink powers (segment lengths) for one or more segmentations."""
    if isinstance(segments, CarrierSegmentation):
        segments = [segments]
    powers = np.zeros((gains.M, gains.K))
    for seg in segments:
        lengths = np.diff(seg.breakpoints)
        for j, m in enumerate(seg.winners):
            powers[m, seg.carrier] += lengths[j]
    return PowerAllocation(powers=powers, side=BC)


def _solve_core(gains, mu, p_budget, tol, lam_hint=None):
    """Price search plus allocation, without report assembly.

    Returns (lam, rates (M,K), bc powers (M,K), trace).
    """
    a = gains.noise_over_gain()
    lam, trace = _price_search(a, mu, p_budget, tol, lam_hint=lam_hint)
    rates, powers = kernels.wsr_rates_powers(a, mu, lam)
    return lam, rates, powers, trace


def solve_wsr(gains, mu, p_budget: float, tol: float = PRICE_TOL) -> SolverReport:
    """Maximize the weighted sum rate subject to the total power budget.

    Returns the downlink rates and powers, the dual uplink powers, the
    power price, the priority order and first-order optimality residuals.
    """
    t0 = time.perf_counter()
    mu = check_weights(mu, gains.M)
    if p_budget <= 0:
        raise ValueError("the power budget must be positive")
    lam, rates, p_bc, trace = _solve_core(gains, mu, p_budget, tol)
    order_asc = weight_order_ascending(mu)
    dec = DecodingOrder.global_order(order_asc)
    pa_bc = PowerAllocation(powers=p_bc, side=BC)
    pa_mac = bc_to_mac_powers(gains, pa_bc, dec)
    kkt = kkt_residuals_wsr(gains, pa_mac, mu, lam, p_budget)
    objective = float(mu @ rates.sum(axis=1))
    certificates = _certificates(gains, mu, p_bc)
    converged = kkt["stationarity"] <= 1e-6 and kkt["power_gap_rel"] <= max(tol * 10, 1e-9)
    return SolverReport(
        problem="wsr",
        converged=converged,
        iterations=len(trace),
        rates=rates,
        powers_mac=pa_mac.powers,
        powers_bc=p_bc,
        duals=DualState(lam=lam, mu_tilde=np.zeros(gains.M), mu_star=mu),
        order=list(order_asc[::-1]),
        carrier_orders=None,
        kkt=kkt,
        trace=trace,
        trace_kind="sum_power",
        objective=objective,
        wall_time_s=time.perf_counter() - t0,
        certificates=certificates,
        details={"p_budget": p_budget, "price_tol": tol},
    )


def _certificates(gains, mu, p_bc):
    """Orthogonality certificates, evaluated when the allocation qualifies."""
    positive = p_bc > 0
    users_per_carrier = positive.sum(axis=0)
    exclusive = bool(np.all(users_per_carrier <= 1))
    out = {"exclusive": exclusive, "fdma": None, "single_user": None}
    if not exclusive:
        return out
    winners = np.where(
        users_per_carrier > 0,
        positive.argmax(axis=0),
        (mu[:, None] * gains.gains).argmax(axis=0),
    )
    pa = PowerAllocation(powers=p_bc, side=BC)
    out["fdma"] = check_fdma_optimality(gains, mu, winners, pa)
    active_users = np.unique(np.argwhere(positive)[:, 0])
    if active_users.size == 1:
        out["single_user"] = check_single_user_optimality(gains, mu, int(active_users[0]), pa)
    return out


def check_fdma_optimality(gains, mu, carrier_winners, p: PowerAllocation) -> dict:
    """Certificate that an exclusive (one user per carrier) allocation is
    globally optimal for the weighted sum rate.

    Compares the winners' tightest marginal utility against the best
    stationarity bound any bystander could claim:

        max_k  mu_w h_w / (sigma2 + p_w h_w)
          >=  max_{m != w_k, k}  max(mu_m - mu_w, 0) * h_m / sigma2
                                 + min(mu_w, mu_m) * h_m / (sigma2 + p_w h_w)

    The comparison only uses pairwise weight min/max, so it is invariant to
    user relabeling.  The inequality is tested non-strictly; a margin within
    1e-12 of zero is flagged as ``boundary``.  With a single user the right
    side is a maximum over an empty set, taken as -inf.
    """
    mu = check_weights(mu, gains.M)
    winners = np.asarray(carrier_winners, dtype=np.int64).reshape(-1)
    if winners.size != gains.K:
        raise ValueError(f"expected {gains.K} carrier winners")
    pw = p.powers
    for k in range(gains.K):
        others = np.delete(np.arange(gains.M), winners[k])
        if others.size and np.any(pw[others, k] > 0):
            raise ValueError(f"allocation is not exclusive on carrier {k + 1}")
    h = gains.gains
    s2 = gains.sigma2
    idx = np.arange(gains.K)
    hw = h[winners, idx]
    denom = s2 + pw[winners, idx] * hw
    lhs = float(np.max(mu[winners] * hw / denom))
    rhs = -np.inf
    if gains.M > 1:
        mu_w = mu[winners][None, :]
        rival = np.clip(mu[:, None] - mu_w, 0.0, None) * h / s2 + np.minimum(
            mu_w, mu[:, None]
        ) * h / denom[None, :]
        mask = np.ones_like(rival, dtype=bool)
        mask[winners, idx] = False
        rhs = float(rival[mask].max())
    margin = lhs - rhs
    scale = max(abs(lhs), abs(rhs) if np.isfinite(rhs) else 0.0, 1e-300)
    return {
        "holds": bool(margin >= -1e-12 * scale),
        "margin": margin,
        "boundary": bool(np.isfinite(rhs) and abs(margin) <= 1e-12 * scale),
    }


def check_single_user_optimality(gains, mu, m_su: int, p: PowerAllocation) -> dict:
    """Certificate that serving only user ``m_su`` is globally optimal."""
    others = np.delete(np.arange(gains.M), m_su)
    if others.size and np.any(p.powers[others, :] > 0):
        raise ValueError("allocation is not single-user")
    winners = np.full(gains.K, m_su, dtype=np.int64)
    return check_fdma_optimality(gains, mu, winners, p)


def fdma_waterfill(gains, mu, p_budget: float, tol: float = PRICE_TOL):
    """Exclusive allocation: per carrier the best weighted gain wins, then
    the winners' carriers are water-filled against a common price.

    Returns (winners, PowerAllocation).  Optimal whenever the resulting
    allocation passes :func:`check_fdma_optimality`, which is guaranteed at
    low SNR and for equal weights.
    """
    mu = check_weights(mu, gains.M)
    if p_budget <= 0:
        raise ValueError("the power budget must be positive")
    winners = (mu[:, None] * gains.gains).argmax(axis=0)
    idx = np.arange(gains.K)
    # mask: only the winner may fill its carrier
    a_masked = np.full((gains.M, gains.K), np.inf)
    a = gains.noise_over_gain()
    a_masked[winners, idx] = a[winners, idx]
    lam, _ = _price_search(np.ascontiguousarray(a_masked), mu, p_budget, tol)
    depth = np.clip(mu[winners] / lam - a[winners, idx], 0.0, None)
    powers = np.zeros((gains.M, gains.K))
    powers[winners, idx] = depth
    return winners, PowerAllocation(powers=powers, side=MAC)
