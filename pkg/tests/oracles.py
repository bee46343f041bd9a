"""Independent reference computations used to freeze derived values."""
from __future__ import annotations

import numpy as np


def kelly_grid(p, returns, lo=-1.0, hi=2.0, step=1e-4):
    """Brute-force maximizer of sum p log(1 + f r) over a grid of fractions f."""
    f = np.arange(lo, hi + step / 2, step)
    r = np.asarray(returns, dtype=float)
    wealth = 1 + np.outer(f, r)
    ok = (wealth > 0).all(axis=1)
    growth = np.full(f.shape, -np.inf)
    growth[ok] = np.log(wealth[ok]) @ np.asarray(p, dtype=float)
    return float(f[int(np.argmax(growth))])


def enumerate_value(payoff, q):
    """Risk-neutral value by direct enumeration."""
    return sum(a * b for a, b in zip(payoff, q))
