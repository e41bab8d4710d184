"""Pure NumPy implementations of the hot solver kernels.

Same call signatures as the compiled core (``_core``); selected at import
time by the package ``__init__``.  Array arguments are float64 / int64,
C-contiguous, shaped (M, K) for per-user per-carrier matrices.  ``a`` and
``A`` always denote noise-over-gain ratios sigma2/h, +inf on dead carriers.
"""

from __future__ import annotations

import numpy as np

NAME = "python"


def total_power_at_price(a: np.ndarray, mu: np.ndarray, lam: float) -> float:
    """Total transmit power spent when the power price is ``lam``.

    Per carrier the best user fills up to depth mu/lam - a, clamped at 0.
    Nonincreasing and continuous in ``lam``.
    """
    depth = mu[:, None] / lam - a
    top = depth.max(axis=0)
    return float(np.clip(top, 0.0, None).sum())


def carrier_segments(a_col: np.ndarray, mu: np.ndarray, lam: float):
    """Upper envelope of the marginal utilities mu/(a+z) - lam on one carrier.

    Returns (breakpoints, winners): winners[j] holds the user collecting the
    power slice between breakpoints[j] and breakpoints[j+1].  The water depth
    runs from 0 to z_max = max over users of (mu/lam - a), clamped at 0; an
    exhausted carrier yields breakpoints == [0.0] and no winners.

    At any depth the winner maximizes mu/(a+z); value ties go to the larger
    weight (it dominates immediately above the tie), then to the larger gain,
    then to the lower user index.  A user overtakes the current winner only
    if its weight is strictly larger, so there are at most M segments.
    """
    M = a_col.shape[0]
    z_max = 0.0
    for m in range(M):
        depth = mu[m] / lam - a_col[m]
        if depth > z_max:
            z_max = depth
    if z_max <= 0.0:
        return np.array([0.0]), np.array([], dtype=np.int64)

    def better(i, j):
        # is user i a better winner than j at the current depth state?
        vi = mu[i] / (a_col[i] + z) if np.isfinite(a_col[i]) else 0.0
        vj = mu[j] / (a_col[j] + z) if np.isfinite(a_col[j]) else 0.0
        if vi != vj:
            return vi > vj
        if mu[i] != mu[j]:
            return mu[i] > mu[j]
        if a_col[i] != a_col[j]:
            return a_col[i] < a_col[j]
        return i < j

    z = 0.0
    w = 0
    for m in range(1, M):
        if better(m, w):
            w = m
    breaks = [0.0]
    winners = []
    while True:
        # earliest strict overtake of w; only strictly larger weights qualify
        z_next = z_max
        cand = -1
        for j in range(M):
            if mu[j] <= mu[w] or not np.isfinite(a_col[j]):
                continue
            cross = (mu[j] * a_col[w] - mu[w] * a_col[j]) / (mu[w] - mu[j])
            if z < cross < z_next:
                z_next = cross
                cand = j
            elif cross == z_next and cand >= 0 and mu[j] > mu[cand]:
                cand = j
        breaks.append(z_next)
        winners.append(w)
        if cand < 0 or z_next >= z_max:
            break
        z = z_next
        w = cand
    breaks[-1] = z_max
    return np.asarray(breaks), np.asarray(winners, dtype=np.int64)


def wsr_rates_powers(a: np.ndarray, mu: np.ndarray, lam: float):
    """Downlink rates and powers for all carriers at power price ``lam``.

    Each envelope segment [lo, hi] won by user m on carrier k contributes
    log((a + hi)/(a + lo)) rate and hi - lo power.
    """
    M, K = a.shape
    R = np.zeros((M, K))
    p = np.zeros((M, K))
    for k in range(K):
        breaks, winners = carrier_segments(a[:, k], mu, lam)
        for j, m in enumerate(winners):
            lo, hi = breaks[j], breaks[j + 1]
            R[m, k] += np.log((a[m, k] + hi) / (a[m, k] + lo))
            p[m, k] += hi - lo
    return R, p


def effective_noise_floor(
    A: np.ndarray, order: np.ndarray, rank: np.ndarray, R: np.ndarray, m: int
) -> np.ndarray:
    """Log of the marginal power cost of user m's first rate unit per carrier.

    With per-carrier decode positions sorted by decreasing gain, the floor on
    carrier k is the log of exp(sum of later positions' rates) times the
    user's own noise-over-gain plus the accumulated power of the stronger
    positions re-expanded to its interference level.  +inf on dead carriers.
    """
    K = A.shape[1]
    Rr = np.take_along_axis(R, order.T, axis=0)
    Ar = np.take_along_axis(A, order.T, axis=0)
    C = np.cumsum(Rr, axis=0)
    total = C[-1, :]
    # dead carriers carry zero rate, so their interference contribution is zero
    term = np.where(np.isfinite(Ar), Ar, 0.0) * np.expm1(Rr) * np.exp(-C)
    W = np.cumsum(term, axis=0)
    r = rank[:, m]
    cols = np.arange(K)
    suffix = total - C[r, cols]
    stronger = np.where(r > 0, np.exp(C[r - 1, cols]) * W[r - 1, cols], 0.0)
    with np.errstate(divide="ignore"):
        return suffix + np.log(A[m, :] + stronger)


def waterfill_to_target(n: np.ndarray, target: float):
    """Exact active-set water-filling: level nu with sum_k [nu - n_k]+ = target.

    Returns (nu, rates).  Requires at least one finite floor when target > 0.
    """
    finite = np.isfinite(n)
    ns = np.sort(n[finite])
    if ns.size == 0:
        raise ValueError("no usable carrier for a positive rate target")
    j = np.arange(1, ns.size + 1)
    levels = (target + np.cumsum(ns)) / j
    nxt = np.append(ns[1:], np.inf)
    jstar = int(np.argmax(levels <= nxt))
    nu = float(levels[jstar])
    rates = np.clip(nu - n, 0.0, None)
    rates[~finite] = 0.0
    return nu, rates


def minpower_sweep(
    A: np.ndarray,
    order: np.ndarray,
    rank: np.ndarray,
    targets: np.ndarray,
    R: np.ndarray,
    levels: np.ndarray,
) -> None:
    """One round-robin pass of rate water-filling, updating ``R`` in place.

    Each user in turn recomputes its noise floors against the others'
    current rates and water-fills its own requirement exactly.  ``levels``
    receives the water levels (-inf for users without a requirement).
    """
    M = A.shape[0]
    for m in range(M):
        if targets[m] <= 0.0:
            R[m, :] = 0.0
            levels[m] = -np.inf
            continue
        n = effective_noise_floor(A, order, rank, R, m)
        nu, rates = waterfill_to_target(n, targets[m])
        R[m, :] = rates
        levels[m] = nu


def minrates_sweep(
    A: np.ndarray,
    order: np.ndarray,
    rank: np.ndarray,
    mu: np.ndarray,
    targets: np.ndarray,
    lam: float,
    R: np.ndarray,
    levels: np.ndarray,
) -> None:
    """One pass of fixed-level water-filling with rate floors, in place.

    Each user fills to the level log(mu/lam); if that leaves its requirement
    unmet, the level is raised so the requirement holds with equality.
    """
    M = A.shape[0]
    for m in range(M):
        n = effective_noise_floor(A, order, rank, R, m)
        finite = np.isfinite(n)
        base = np.log(mu[m] / lam) if mu[m] > 0 else -np.inf
        rates = np.zeros_like(n)
        if np.isfinite(base):
            rates[finite] = np.clip(base - n[finite], 0.0, None)
        level = base
        if targets[m] > 0.0 and rates.sum() < targets[m]:
            level, rates = waterfill_to_target(n, targets[m])
        R[m, :] = rates
        levels[m] = level
