# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled grid scan of one provider's profit surface."""

from libc.math cimport log1p, INFINITY


def scan_profit_grid(const double[::1] prices, const double[::1] qos,
                     double base, double own_slope, double log_coeff,
                     double unit_cost, double cap_cost, double rt_bar):
    """Maximise (base + log_coeff*ln(1+s) - own_slope*p) * (p - unit_cost) - cap_cost/(rt_bar - s).

    Returns (best value, price index, qos index); ties keep the first point in
    qos-major order.
    """
    cdef Py_ssize_t np_ = prices.shape[0]
    cdef Py_ssize_t nq = qos.shape[0]
    cdef Py_ssize_t j, k, bi = 0, bj = 0
    cdef double best = -INFINITY
    cdef double s, attract, cost, p, v
    with nogil:
        for j in range(nq):
            s = qos[j]
            attract = base + log_coeff * log1p(s)
            cost = cap_cost / (rt_bar - s)
            for k in range(np_):
                p = prices[k]
                v = (attract - own_slope * p) * (p - unit_cost) - cost
                if v > best:
                    best = v
                    bi = k
                    bj = j
    return best, bi, bj
