# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled implementations of the hot solver kernels.

Mirrors ``_fallback`` exactly (same signatures, same tie-break rules); the
test suite cross-checks both backends on random inputs.
"""

from libc.math cimport INFINITY, exp, expm1, isfinite, log
from libc.stdint cimport int64_t
from libc.stdlib cimport free, malloc, qsort

import numpy as np

NAME = "compiled"


cdef int _cmp_double(const void* pa, const void* pb) noexcept nogil:
    cdef double a = (<const double*> pa)[0]
    cdef double b = (<const double*> pb)[0]
    if a < b:
        return -1
    if a > b:
        return 1
    return 0


def total_power_at_price(const double[:, ::1] a, const double[::1] mu, double lam):
    """Total transmit power spent when the power price is ``lam``."""
    cdef Py_ssize_t M = a.shape[0], K = a.shape[1], m, k
    cdef double total = 0.0, top, depth
    with nogil:
        for k in range(K):
            top = 0.0
            for m in range(M):
                depth = mu[m] / lam - a[m, k]
                if depth > top:
                    top = depth
            total += top
    return float(total)


cdef inline bint _better(const double[::1] a_col, const double[::1] mu, double z,
                         Py_ssize_t i, Py_ssize_t j) noexcept nogil:
    # winner comparison at depth z: value, then weight, then gain, then index
    cdef double vi = mu[i] / (a_col[i] + z) if isfinite(a_col[i]) else 0.0
    cdef double vj = mu[j] / (a_col[j] + z) if isfinite(a_col[j]) else 0.0
    if vi != vj:
        return vi > vj
    if mu[i] != mu[j]:
        return mu[i] > mu[j]
    if a_col[i] != a_col[j]:
        return a_col[i] < a_col[j]
    return i < j


cdef Py_ssize_t _walk_envelope(const double[::1] a_col, const double[::1] mu, double lam,
                               double* breaks, int64_t* winners) noexcept nogil:
    """Fill breaks/winners (capacity M+1 / M); returns the segment count."""
    cdef Py_ssize_t M = a_col.shape[0], m, w, cand, count
    cdef double z_max = 0.0, depth, z, z_next, cross
    for m in range(M):
        depth = mu[m] / lam - a_col[m]
        if depth > z_max:
            z_max = depth
    breaks[0] = 0.0
    if z_max <= 0.0:
        return 0
    z = 0.0
    w = 0
    for m in range(1, M):
        if _better(a_col, mu, z, m, w):
            w = m
    count = 0
    while True:
        z_next = z_max
        cand = -1
        for m in range(M):
            if mu[m] <= mu[w] or not isfinite(a_col[m]):
                continue
            cross = (mu[m] * a_col[w] - mu[w] * a_col[m]) / (mu[w] - mu[m])
            if z < cross < z_next:
                z_next = cross
                cand = m
            elif cross == z_next and cand >= 0 and mu[m] > mu[cand]:
                cand = m
        winners[count] = w
        breaks[count + 1] = z_next
        count += 1
        if cand < 0 or z_next >= z_max:
            break
        z = z_next
        w = cand
    breaks[count] = z_max
    return count


def carrier_segments(const double[::1] a_col, const double[::1] mu, double lam):
    """Envelope breakpoints and segment winners for one carrier."""
    cdef Py_ssize_t M = a_col.shape[0], count
    breaks_arr = np.empty(M + 1, dtype=np.float64)
    winners_arr = np.empty(M, dtype=np.int64)
    cdef double[::1] breaks = breaks_arr
    cdef int64_t[::1] winners = winners_arr
    count = _walk_envelope(a_col, mu, lam, &breaks[0], &winners[0])
    return breaks_arr[: count + 1].copy(), winners_arr[:count].copy()


def wsr_rates_powers(const double[:, ::1] a, const double[::1] mu, double lam):
    """Downlink rates and powers for all carriers at power price ``lam``."""
    cdef Py_ssize_t M = a.shape[0], K = a.shape[1], k, j, m, count
    R_arr = np.zeros((M, K), dtype=np.float64)
    p_arr = np.zeros((M, K), dtype=np.float64)
    cdef double[:, ::1] R = R_arr
    cdef double[:, ::1] p = p_arr
    cdef double* breaks = <double*> malloc((M + 1) * sizeof(double))
    cdef int64_t* winners = <int64_t*> malloc(M * sizeof(int64_t))
    cdef double* col = <double*> malloc(M * sizeof(double))
    if breaks == NULL or winners == NULL or col == NULL:
        free(breaks); free(winners); free(col)
        raise MemoryError()
    cdef double[::1] col_view = <double[:M]> col
    try:
        with nogil:
            for k in range(K):
                for m in range(M):
                    col[m] = a[m, k]
                count = _walk_envelope(col_view, mu, lam, breaks, winners)
                for j in range(count):
                    m = winners[j]
                    R[m, k] += log((a[m, k] + breaks[j + 1]) / (a[m, k] + breaks[j]))
                    p[m, k] += breaks[j + 1] - breaks[j]
    finally:
        free(breaks)
        free(winners)
        free(col)
    return R_arr, p_arr


cdef void _noise_floors(const double[:, ::1] A, const int64_t[:, ::1] order,
                        const int64_t[:, ::1] rank, const double[:, ::1] R,
                        Py_ssize_t m, double* out) noexcept nogil:
    cdef Py_ssize_t M = A.shape[0], K = A.shape[1], k, j, u, r
    cdef double suffix, inner, g, Ru
    for k in range(K):
        if not isfinite(A[m, k]):
            out[k] = INFINITY
            continue
        r = rank[k, m]
        suffix = 0.0
        for j in range(r + 1, M):
            suffix += R[order[k, j], k]
        inner = A[m, k]
        g = 0.0
        for j in range(r - 1, -1, -1):
            u = order[k, j]
            Ru = R[u, k]
            if Ru != 0.0:
                inner += A[u, k] * expm1(Ru) * exp(g)
            g += Ru
        out[k] = suffix + log(inner)


def effective_noise_floor(const double[:, ::1] A, const int64_t[:, ::1] order,
                          const int64_t[:, ::1] rank, const double[:, ::1] R, Py_ssize_t m):
    """Per-carrier noise floors of user m (see the fallback docstring)."""
    cdef Py_ssize_t K = A.shape[1]
    out_arr = np.empty(K, dtype=np.float64)
    cdef double[::1] out = out_arr
    with nogil:
        _noise_floors(A, order, rank, R, m, &out[0])
    return out_arr


cdef double _fill_to_target(double* n, Py_ssize_t K, double target, double* rates,
                            double* scratch) noexcept nogil:
    """Active-set water-filling; fills rates, returns the level."""
    cdef Py_ssize_t count = 0, j, jstar
    cdef double cum, level
    for j in range(K):
        if isfinite(n[j]):
            scratch[count] = n[j]
            count += 1
    qsort(scratch, count, sizeof(double), _cmp_double)
    cum = 0.0
    level = 0.0
    jstar = count - 1
    for j in range(count):
        cum += scratch[j]
        level = (target + cum) / (j + 1)
        if j + 1 == count or level <= scratch[j + 1]:
            jstar = j
            break
    for j in range(K):
        if isfinite(n[j]) and level > n[j]:
            rates[j] = level - n[j]
        else:
            rates[j] = 0.0
    return level


def waterfill_to_target(const double[::1] n, double target):
    """Exact active-set water-filling: level nu with sum [nu - n]+ = target."""
    cdef Py_ssize_t K = n.shape[0], j, count = 0
    for j in range(K):
        if isfinite(n[j]):
            count += 1
    if count == 0:
        raise ValueError("no usable carrier for a positive rate target")
    rates_arr = np.empty(K, dtype=np.float64)
    cdef double[::1] rates = rates_arr
    cdef double* scratch = <double*> malloc(K * sizeof(double))
    cdef double* floors = <double*> malloc(K * sizeof(double))
    if scratch == NULL or floors == NULL:
        free(scratch); free(floors)
        raise MemoryError()
    cdef double nu
    try:
        for j in range(K):
            floors[j] = n[j]
        with nogil:
            nu = _fill_to_target(floors, K, target, &rates[0], scratch)
    finally:
        free(scratch)
        free(floors)
    return float(nu), rates_arr


def minpower_sweep(const double[:, ::1] A, const int64_t[:, ::1] order,
                   const int64_t[:, ::1] rank, const double[::1] targets,
                   double[:, ::1] R, double[::1] levels):
    """One round-robin pass of rate water-filling, updating ``R`` in place."""
    cdef Py_ssize_t M = A.shape[0], K = A.shape[1], m, k
    cdef double* floors = <double*> malloc(K * sizeof(double))
    cdef double* rates = <double*> malloc(K * sizeof(double))
    cdef double* scratch = <double*> malloc(K * sizeof(double))
    if floors == NULL or rates == NULL or scratch == NULL:
        free(floors); free(rates); free(scratch)
        raise MemoryError()
    try:
        with nogil:
            for m in range(M):
                if targets[m] <= 0.0:
                    for k in range(K):
                        R[m, k] = 0.0
                    levels[m] = -INFINITY
                    continue
                _noise_floors(A, order, rank, R, m, floors)
                levels[m] = _fill_to_target(floors, K, targets[m], rates, scratch)
                for k in range(K):
                    R[m, k] = rates[k]
    finally:
        free(floors)
        free(rates)
        free(scratch)


def minrates_sweep(const double[:, ::1] A, const int64_t[:, ::1] order,
                   const int64_t[:, ::1] rank, const double[::1] mu,
                   const double[::1] targets, double lam,
                   double[:, ::1] R, double[::1] levels):
    """One pass of fixed-level water-filling with rate floors, in place."""
    cdef Py_ssize_t M = A.shape[0], K = A.shape[1], m, k
    cdef double base, total
    cdef double* floors = <double*> malloc(K * sizeof(double))
    cdef double* rates = <double*> malloc(K * sizeof(double))
    cdef double* scratch = <double*> malloc(K * sizeof(double))
    if floors == NULL or rates == NULL or scratch == NULL:
        free(floors); free(rates); free(scratch)
        raise MemoryError()
    try:
        with nogil:
            for m in range(M):
                _noise_floors(A, order, rank, R, m, floors)
                base = log(mu[m] / lam) if mu[m] > 0.0 else -INFINITY
                total = 0.0
                for k in range(K):
                    if isfinite(floors[k]) and base > floors[k]:
                        rates[k] = base - floors[k]
                        total += rates[k]
                    else:
                        rates[k] = 0.0
                levels[m] = base
                if targets[m] > 0.0 and total < targets[m]:
                    levels[m] = _fill_to_target(floors, K, targets[m], rates, scratch)
                for k in range(K):
                    R[m, k] = rates[k]
    finally:
        free(floors)
        free(rates)
        free(scratch)
