from fractions import Fraction as Fr

import numpy as np
import pytest

from finmkt.errors import NotMeasurable, NotPredictable, NotSelfFinancing, ValidationError
from finmkt.market import (
    Claim,
    Market,
    Strategy,
    benchmark,
    buy_and_hold,
    discount,
    is_normalized,
    nominal,
    normalize,
    strategy_from_units,
    value_process,
)

from helpers import binomial, binomial2, grid, space


def units_grid(market, per_t):
    """units[t] from a per-time dict {asset index: value} applied to every state."""
    out = [None]
    for t in range(1, market.T + 1):
        u = np.empty((market.n_assets, market.space.n), dtype=object)
        u[...] = Fr(0)
        for i, v in per_t.items():
            u[i] = v
        out.append(u)
    return out


def test_rescales_initial_prices():
    sp = space(("u", "d"), (Fr(1, 2), Fr(1, 2)))
    m = Market(["bond", "stock"], grid([[[100, 100], [100, 100]], [[5, 5], [10, Fr(5, 2)]]]), sp)
    assert list(m.scale) == [100, 5]
    assert list(m.prices[1, 1]) == [2, Fr(1, 2)]


def test_rejects_nonpositive_price():
    sp = space(("u", "d"), (Fr(1, 2), Fr(1, 2)))
    with pytest.raises(ValidationError, match="non-positive"):
        Market(["bond"], grid([[[1, 1], [1, 0]]]), sp)


def test_discount_examples():
    m = binomial()
    P = discount(m)
    assert list(P[1, 1]) == [2, Fr(1, 2)] and list(P[1, 0]) == [1, 1]
    Ps = discount(m.with_numeraire("stock"))
    assert list(Ps[1, 0]) == [Fr(1, 2), 2] and list(Ps[1, 1]) == [1, 1]


def test_value_process_examples():
    m = binomial()
    assert (value_process(buy_and_hold(m, "bond"), m).values == 1).all()
    V = value_process(buy_and_hold(m, "stock"), m).values
    assert list(V[1]) == [2, Fr(1, 2)]
    mix = strategy_from_units(m, m.evolution, units_grid(m, {1: Fr(1, 2)}))
    assert list(value_process(mix, m).values[1]) == [Fr(3, 2), Fr(3, 4)]


def test_value_process_detects_leaks():
    m = binomial2()
    H = buy_and_hold(m, "stock").holdings.copy()
    H[2, 0, :] = Fr(1)  # extra bond appears at t=1 without funding
    with pytest.raises(NotSelfFinancing) as err:
        value_process(Strategy(H, m.evolution), m)
    assert err.value.node[0] == 1


def test_value_process_detects_anticipation():
    m = binomial2()
    H = buy_and_hold(m, "stock").holdings.copy()
    H[1, 1, :] = np.array([Fr(1), Fr(1), Fr(2), Fr(2)], dtype=object)
    with pytest.raises(NotPredictable):
        value_process(Strategy(H, m.evolution), m)


def test_normalize_examples():
    # stock 1 -> (3/2, 1/2); two units financed by the bond give V = (0; 1, -1)
    m = binomial(u=Fr(3, 2))
    s = strategy_from_units(m, m.evolution, units_grid(m, {1: Fr(2)}), initial_value=0)
    assert list(value_process(s, m).values[1]) == [1, -1]
    n = normalize(s, m)
    V = value_process(n, m).values
    assert list(V[0]) == [1, 1] and list(V[1]) == [Fr(3, 2), Fr(1, 2)]
    assert is_normalized(n, m)
    assert (value_process(normalize(n, m), m).values == V).all()


def test_normalize_pure_numeraire_short():
    # zero gains: the smallest power of two that keeps values positive is a = 1
    m = binomial()
    short = strategy_from_units(m, m.evolution, units_grid(m, {}), initial_value=-1)
    assert (value_process(short, m).values == -1).all()
    assert (value_process(normalize(short, m), m).values == 1).all()


def test_normalize_larger_shift():
    m = binomial()
    s = strategy_from_units(m, m.evolution, units_grid(m, {1: Fr(4)}), initial_value=0)
    # gains (4, -2): a = 4 is the first power of two with a - 2 > 0
    V = value_process(normalize(s, m), m).values
    assert list(V[1]) == [2, Fr(1, 2)]


def test_benchmark_examples():
    V = np.array([[Fr(1), Fr(1)], [Fr(2), Fr(1, 2)]], dtype=object)
    W = np.array([[Fr(1), Fr(1)], [Fr(3, 2), Fr(3, 4)]], dtype=object)
    assert (benchmark(V, V) == 1).all()
    assert list(benchmark(V, W)[1]) == [Fr(4, 3), Fr(2, 3)]


def test_benchmark_numeraire_invariant():
    m = binomial()
    mix = strategy_from_units(m, m.evolution, units_grid(m, {1: Fr(1, 2)}))
    V = value_process(mix, m)
    W = value_process(buy_and_hold(m, "stock"), m)
    ms = m.with_numeraire("stock")
    mix_s = Strategy(mix.holdings, mix.filtration)
    Vs = value_process(mix_s, ms)
    Ws = value_process(buy_and_hold(ms, "stock"), ms)
    assert (benchmark(V, W) == benchmark(Vs, Ws)).all()
    assert (benchmark(nominal(V, m), nominal(W, m)) == benchmark(V, W)).all()


def test_claim_validation():
    m = binomial()
    Claim.for_market(m, [1, 0])
    with pytest.raises(ValidationError):
        Claim.for_market(m, [-1, 0])
    m2 = binomial2()
    Claim.for_market(m2, [1, 2, 3, 4])
    from helpers import insider

    with pytest.raises(NotMeasurable):
        Claim.for_market(insider(), [1, 0, 0, 0])
