"""Rate evaluation, uplink/downlink power transforms and optimality residuals.

Index conventions (easy to swap by accident, so stated once here and relied
on everywhere):

* A decoding order lists users by position.  ``order[0]`` is decoded first
  in the uplink and therefore sees every later-listed user as interference;
  ``order[-1]`` is decoded last and sees none.
* The downlink uses the same object read backwards: ``order[-1]`` is encoded
  first, ``order[0]`` last.  When the user at position i is encoded, the
  codewords of positions i+1.. are already fixed and get pre-subtracted, so
  position i only suffers interference from positions n < i.  Position 0
  sees a clean channel on both sides.
* Uplink interference adds up as sum of h[n] * p[n] over later positions
  (each interferer arrives through its own channel); downlink interference
  is the user's own gain times the sum of earlier positions' powers (all
  signals reach a given receiver through the same channel).

All rates are in nats per channel use.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "PowerAllocation",
    "RateAllocation",
    "DecodingOrder",
    "mac_rates",
    "bc_rates",
    "bc_to_mac_powers",
    "mac_to_bc_powers",
    "rates_to_powers",
    "kkt_residuals_wsr",
    "kkt_residuals_minpower",
    "rate_constraint_residuals",
]

MAC = "MAC"
BC = "BC"


@dataclass(frozen=True)
class PowerAllocation:
    """An M x K matrix of transmit powers tagged with its channel side."""

    powers: np.ndarray
    side: str

    def __post_init__(self):
        p = np.array(self.powers, dtype=np.float64, copy=True)
        if p.ndim != 2 or p.size == 0:
            raise ValueError("powers must be a nonempty M x K matrix")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise ValueError("powers must be finite and nonnegative")
        if self.side not in (MAC, BC):
            raise ValueError("side must be 'MAC' or 'BC'")
        p.setflags(write=False)
        object.__setattr__(self, "powers", p)

    def sum_power(self) -> float:
        return float(self.powers.sum())


@dataclass(frozen=True)
class RateAllocation:
    """Per-user per-carrier rates (nats) plus per-user totals."""

    rates: np.ndarray

    def __post_init__(self):
        r = np.array(self.rates, dtype=np.float64, copy=True)
        if r.ndim != 2 or r.size == 0:
            raise ValueError("rates must be a nonempty M x K matrix")
        if not np.all(np.isfinite(r)) or np.any(r < 0):
            raise ValueError("rates must be finite and nonnegative")
        r.setflags(write=False)
        object.__setattr__(self, "rates", r)

    @property
    def per_user(self) -> np.ndarray:
        return self.rates.sum(axis=1)


@dataclass(frozen=True)
class DecodingOrder:
    """A user permutation, either one global order or one per carrier.

    ``perms`` has shape (K, M); row k lists the user indices (0-based) in
    decode-position order on carrier k.  A global order stores a single row.
    """

    perms: np.ndarray
    is_global: bool

    def __post_init__(self):
        p = np.array(self.perms, dtype=np.int64, copy=True)
        if p.ndim != 2:
            raise ValueError("perms must have shape (K, M)")
        M = p.shape[1]
        ref = np.broadcast_to(np.arange(M), p.shape)
        if not np.array_equal(np.sort(p, axis=1), ref):
            bad = int(np.argmax(np.any(np.sort(p, axis=1) != ref, axis=1)))
            raise ValueError(f"{p[bad].tolist()} is not a permutation of 0..{M - 1}")
        p.setflags(write=False)
        object.__setattr__(self, "perms", p)

    @classmethod
    def global_order(cls, perm) -> "DecodingOrder":
        perm = np.asarray(perm, dtype=np.int64).reshape(1, -1)
        return cls(perms=perm, is_global=True)

    @classmethod
    def per_carrier(cls, perms) -> "DecodingOrder":
        return cls(perms=np.asarray(perms, dtype=np.int64), is_global=False)

    @classmethod
    def identity(cls, M: int) -> "DecodingOrder":
        return cls.global_order(np.arange(M))

    @property
    def M(self) -> int:
        return self.perms.shape[1]

    def matrix(self, K: int) -> np.ndarray:
        """Expand to an explicit (K, M) position->user matrix."""
        if self.is_global:
            return np.broadcast_to(self.perms[0], (K, self.M))
        if self.perms.shape[0] != K:
            raise ValueError(f"order has {self.perms.shape[0]} carriers, instance has {K}")
        return self.perms

    def ranks(self, K: int) -> np.ndarray:
        """Inverse permutations: (K, M) user->position matrix."""
        mat = self.matrix(K)
        ranks = np.empty((K, self.M), dtype=np.int64)
        rows = np.arange(K)[:, None]
        ranks[rows, mat] = np.arange(self.M)[None, :]
        return ranks


def _check_shapes(gains, matrix, name):
    if matrix.shape != gains.gains.shape:
        raise ValueError(
            f"{name} shape {matrix.shape} does not match instance shape {gains.gains.shape}"
        )


def _ranked(values: np.ndarray, order_mat: np.ndarray) -> np.ndarray:
    """Rearrange (M, K) values into decode-position order: out[j, k] = values[order[k, j], k]."""
    return np.take_along_axis(values, order_mat.T, axis=0)


def _scatter(ranked: np.ndarray, order_mat: np.ndarray) -> np.ndarray:
    out = np.empty_like(ranked)
    np.put_along_axis(out, order_mat.T, ranked, axis=0)
    return out


def mac_rates(gains, p: PowerAllocation, order: DecodingOrder) -> RateAllocation:
    """Uplink rates under successive interference cancellation.

    The user at position j on carrier k gets
    log(1 + h*p / (sigma2 + sum over later positions of h*p)).
    """
    if p.side != MAC:
        raise ValueError("mac_rates expects a MAC-side allocation")
    _check_shapes(gains, p.powers, "powers")
    mat = order.matrix(gains.K)
    h_r = _ranked(gains.gains, mat)
    p_r = _ranked(p.powers, mat)
    hp = h_r * p_r
    tail = np.flip(np.cumsum(np.flip(hp, axis=0), axis=0), axis=0)
    rates_r = np.log1p(hp / (gains.sigma2 + tail - hp))
    return RateAllocation(rates=_scatter(rates_r, mat))


def bc_rates(gains, p: PowerAllocation, order: DecodingOrder) -> RateAllocation:
    """Downlink rates under dirty-paper/superposition coding.

    The user at position j on carrier k gets
    log(1 + h*p / (sigma2 + h * sum over earlier positions of p)).
    """
    if p.side != BC:
        raise ValueError("bc_rates expects a BC-side allocation")
    _check_shapes(gains, p.powers, "powers")
    mat = order.matrix(gains.K)
    h_r = _ranked(gains.gains, mat)
    p_r = _ranked(p.powers, mat)
    below = np.cumsum(p_r, axis=0) - p_r
    rates_r = np.log1p(h_r * p_r / (gains.sigma2 + h_r * below))
    return RateAllocation(rates=_scatter(rates_r, mat))


def bc_to_mac_powers(gains, p_bc: PowerAllocation, order: DecodingOrder) -> PowerAllocation:
    """Map a downlink allocation to the uplink one achieving the same rates.

    Works position by position from the last-decoded user down, matching the
    signal-to-interference-plus-noise ratio on every carrier; per-user
    per-carrier rates and the total power are preserved exactly.
    """
    if p_bc.side != BC:
        raise ValueError("bc_to_mac_powers expects a BC-side allocation")
    _check_shapes(gains, p_bc.powers, "powers")
    sigma2 = gains.sigma2
    mat = order.matrix(gains.K)
    h_r = _ranked(gains.gains, mat)
    p_r = _ranked(p_bc.powers, mat)
    M = h_r.shape[0]
    below = np.cumsum(p_r, axis=0) - p_r  # downlink interference totals
    out = np.empty_like(p_r)
    mac_interf = np.zeros(h_r.shape[1])  # sum of h * p_mac over later positions
    for j in range(M - 1, -1, -1):
        out[j] = p_r[j] * (sigma2 + mac_interf) / (sigma2 + h_r[j] * below[j])
        mac_interf = mac_interf + h_r[j] * out[j]
    return PowerAllocation(powers=_scatter(out, mat), side=MAC)


def mac_to_bc_powers(gains, p_mac: PowerAllocation, order: DecodingOrder) -> PowerAllocation:
    """Exact inverse of :func:`bc_to_mac_powers`, solved from position 0 up."""
    if p_mac.side != MAC:
        raise ValueError("mac_to_bc_powers expects a MAC-side allocation")
    _check_shapes(gains, p_mac.powers, "powers")
    sigma2 = gains.sigma2
    mat = order.matrix(gains.K)
    h_r = _ranked(gains.gains, mat)
    p_r = _ranked(p_mac.powers, mat)
    M = h_r.shape[0]
    hp = h_r * p_r
    tail = np.flip(np.cumsum(np.flip(hp, axis=0), axis=0), axis=0)
    out = np.empty_like(p_r)
    below = np.zeros(h_r.shape[1])  # sum of downlink powers over earlier positions
    for j in range(M):
        out[j] = p_r[j] * (sigma2 + h_r[j] * below) / (sigma2 + tail[j] - hp[j])
        below = below + out[j]
    return PowerAllocation(powers=_scatter(out, mat), side=BC)


def powers_from_rates_ranked(a_ranked: np.ndarray, rates_ranked: np.ndarray) -> np.ndarray:
    """Uplink powers for given per-carrier rates, both in decode-position order.

    ``a_ranked`` holds sigma2/h (+inf on dead carriers); position j needs
    a * (exp(R_j) - 1) * exp(sum of later positions' rates).  Zero-rate
    positions draw zero power even where a is infinite.
    """
    tail = np.flip(np.cumsum(np.flip(rates_ranked, axis=0), axis=0), axis=0)
    growth = np.expm1(rates_ranked) * np.exp(tail - rates_ranked)
    with np.errstate(invalid="ignore"):
        raw = a_ranked * growth
    return np.where(growth > 0, raw, 0.0)


def rates_to_powers(gains, rates: RateAllocation, order: DecodingOrder) -> PowerAllocation:
    """Invert the uplink SIC rate map: the exact powers realizing ``rates``.

    Raises ``ValueError`` when a positive rate sits on a zero-gain carrier,
    which no finite power can realize.
    """
    _check_shapes(gains, rates.rates, "rates")
    bad = (gains.gains == 0) & (rates.rates > 0)
    if np.any(bad):
        m, k = np.argwhere(bad)[0]
        raise ValueError(
            f"user {m + 1} requires positive rate on carrier {k + 1} where its gain is zero"
        )
    mat = order.matrix(gains.K)
    a_r = _ranked(gains.noise_over_gain(), mat)
    r_r = _ranked(rates.rates, mat)
    p_r = powers_from_rates_ranked(a_r, r_r)
    return PowerAllocation(powers=_scatter(p_r, mat), side=MAC)


def weight_order_ascending(mu: np.ndarray) -> np.ndarray:
    """Decode-position order for a weighted-sum objective.

    Positions run from smallest to largest weight: the largest weight is
    decoded last and sees a clean channel.  Reversing the result lists users
    by weight descending with ties broken by ascending user index.
    """
    mu = np.asarray(mu, dtype=np.float64)
    return np.argsort(-mu, kind="stable")[::-1].copy()


def _weight_differences(mu: np.ndarray):
    """Ascending decode order plus the nonnegative weight increments that
    telescope to the weight at each position."""
    order = weight_order_ascending(mu)
    mu = np.asarray(mu, dtype=np.float64)
    c = np.diff(np.concatenate(([0.0], mu[order])))
    return order, c


def kkt_residuals_wsr(gains, p: PowerAllocation, mu, lam: float, p_budget: float) -> dict:
    """First-order optimality residuals for the weighted-sum-rate problem.

    Checks the uplink stationarity system at power price ``lam``: on every
    carrier and decode position j (weights ascending along positions), the
    cumulative marginal utility ``h_j * sum_{s<=j} c_s / N_s`` with
    ``N_s = sigma2 + sum_{n>=s} h_n p_n`` must equal ``lam`` wherever power
    is positive and must not exceed it where power is zero.  Residuals are
    normalized by ``lam``.
    """
    if p.side != MAC:
        raise ValueError("the stationarity system is an uplink one; pass a MAC allocation")
    _check_shapes(gains, p.powers, "powers")
    mu = np.asarray(mu, dtype=np.float64)
    order, c = _weight_differences(mu)
    mat = np.broadcast_to(order, (gains.K, order.size))
    h_r = _ranked(gains.gains, mat)
    p_r = _ranked(p.powers, mat)
    hp = h_r * p_r
    denom = gains.sigma2 + np.flip(np.cumsum(np.flip(hp, axis=0), axis=0), axis=0)
    marginal = h_r * np.cumsum(c[:, None] / denom, axis=0)
    scale = max(float(lam), 1e-300)
    active = p_r > 0
    stationarity = float(np.abs(marginal[active] / scale - 1.0).max()) if active.any() else 0.0
    inactive = ~active
    sign = (
        float(np.clip(marginal[inactive] / scale - 1.0, 0.0, None).max()) if inactive.any() else 0.0
    )
    total = p.sum_power()
    gap = abs(total - p_budget) / max(abs(p_budget), 1.0)
    return {
        "stationarity": stationarity,
        "sign_violation": sign,
        "power_gap_rel": float(gap),
        "comp_slackness": float(gap if lam > 0 else 0.0),
    }


def kkt_residuals_minpower(gains, rates: RateAllocation, mu_tilde, targets) -> dict:
    """First-order optimality residuals for the minimum-sum-power problem.

    Uses per-carrier decode orders sorted by decreasing gain and the cost
    increments c[0] = sigma2/h(strongest), c[j] = sigma2*(1/h_j - 1/h_{j-1}).
    On active entries the cumulative marginal power
    ``sum_{s<=j} c_s * exp(sum_{n>=s} R_n)`` must equal the user's
    multiplier; on inactive entries it must be at least the multiplier.
    Also reports the worst unmet rate requirement (nats) and the
    complementary-slackness residual, normalized by (1 + multiplier).
    """
    _check_shapes(gains, rates.rates, "rates")
    mu_tilde = np.asarray(mu_tilde, dtype=np.float64)
    from .minpower import carrier_orders, cost_coefficients  # local import avoids a cycle

    coeffs = cost_coefficients(gains)
    mat = carrier_orders(gains).matrix(gains.K)
    r_r = _ranked(rates.rates, mat)
    tail = np.flip(np.cumsum(np.flip(r_r, axis=0), axis=0), axis=0)
    terms = np.where(np.isfinite(coeffs.c), coeffs.c, 0.0) * np.exp(tail)
    terms = np.where(np.isfinite(coeffs.c), terms, np.inf)
    marginal = np.cumsum(terms, axis=0)
    mu_r = _ranked(np.broadcast_to(mu_tilde[:, None], gains.gains.shape), mat)
    scale = np.maximum(mu_r, 1e-300)
    active = r_r > 0
    finite = np.isfinite(marginal)
    stat_mask = active & finite
    stationarity = (
        float(np.abs(marginal[stat_mask] / scale[stat_mask] - 1.0).max()) if stat_mask.any() else 0.0
    )
    sign_mask = ~active & finite
    sign = (
        float(np.clip(1.0 - marginal[sign_mask] / scale[sign_mask], 0.0, None).max())
        if sign_mask.any()
        else 0.0
    )
    out = {"stationarity": stationarity, "sign_violation": sign}
    out.update(rate_constraint_residuals(rates, targets, mu_tilde))
    return out


def rate_constraint_residuals(rates: RateAllocation, targets, mu_tilde) -> dict:
    """Primal rate gaps and complementary slackness for rate requirements."""
    targets = np.asarray(targets, dtype=np.float64)
    mu_tilde = np.asarray(mu_tilde, dtype=np.float64)
    totals = rates.per_user
    gap = float(np.clip(targets - totals, 0.0, None).max())
    comp = float((mu_tilde * np.abs(totals - targets) / (1.0 + mu_tilde)).max())
    return {"rate_gap": gap, "comp_slackness": comp}
