"""numpy fallback for the grid scan kernel."""

import numpy as np

# rows of the (qos x price) surface evaluated per block
_BLOCK_CELLS = 1 << 20


def scan_profit_grid(prices, qos, base, own_slope, log_coeff, unit_cost, cap_cost, rt_bar):
    prices = np.ascontiguousarray(prices, dtype=float)
    qos = np.ascontiguousarray(qos, dtype=float)
    margin = prices - unit_cost
    own = own_slope * prices
    rows = max(1, _BLOCK_CELLS // max(1, prices.size))

    best, bi, bj = -np.inf, 0, 0
    for start in range(0, qos.size, rows):
        s = qos[start:start + rows]
        attract = base + log_coeff * np.log1p(s)
        cost = cap_cost / (rt_bar - s)
        surface = (attract[:, None] - own[None, :]) * margin[None, :] - cost[:, None]
        flat = int(np.argmax(surface))
        j, k = divmod(flat, prices.size)
        if surface[j, k] > best:
            best, bi, bj = float(surface[j, k]), k, start + j
    return best, bi, bj
