"""Market builders shared by the test modules."""
from __future__ import annotations

import itertools
from fractions import Fraction as Fr

import numpy as np

from finmkt.market import Market
from finmkt.probspace import Filtration, FiniteProbSpace
from finmkt.sensitivity import Signal, enlarge


def space(ids, probs) -> FiniteProbSpace:
    return FiniteProbSpace(tuple(ids), np.array([Fr(p) for p in probs], dtype=object))


def grid(rows_per_asset):
    """time x asset x state grid from per-asset time x state rows."""
    return np.array(rows_per_asset, dtype=object).transpose(1, 0, 2)


def binomial(p=Fr(1, 2), u=2, d=Fr(1, 2)) -> Market:
    sp = space(("u", "d"), (p, 1 - p))
    return Market(["bond", "stock"], grid([[[1, 1], [1, 1]], [[1, 1], [u, d]]]), sp)


def binomial2(p=Fr(1, 2)) -> Market:
    """Two-period binomial u=2, d=1/2 on paths uu, ud, du, dd."""
    paths = ["uu", "ud", "du", "dd"]
    probs = [p * p, p * (1 - p), (1 - p) * p, (1 - p) * (1 - p)]
    f = {"u": Fr(2), "d": Fr(1, 2)}
    stock = [[Fr(1)] * 4, [f[s[0]] for s in paths], [f[s[0]] * f[s[1]] for s in paths]]
    return Market(["bond", "stock"], grid([[[1] * 4] * 3, stock]), space(paths, probs))


def trinomial(probs=(Fr(1, 3), Fr(1, 3), Fr(1, 3))) -> Market:
    sp = space(("u", "m", "d"), probs)
    return Market(["bond", "stock"], grid([[[1] * 3] * 2, [[1] * 3, [2, 1, Fr(1, 2)]]]), sp)


def insider(q=Fr(4, 5)) -> Market:
    """Binomial plus a time-0 signal with P(up | g) = P(down | b) = q."""
    sp = space(("ug", "dg", "ub", "db"), (q / 2, (1 - q) / 2, (1 - q) / 2, q / 2))
    m = Market(["bond", "stock"], grid([[[1] * 4] * 2, [[1] * 4, [2, Fr(1, 2), 2, Fr(1, 2)]]]), sp)
    return m.with_ambient(enlarge(m.evolution, [Signal("signal", ["g", "g", "b", "b"], 0)]))


def coin() -> Market:
    """Binomial enlarged by an independent fair coin revealed at time 0."""
    sp = space(("uh", "dh", "ut", "dt"), [Fr(1, 4)] * 4)
    m = Market(["bond", "stock"], grid([[[1] * 4] * 2, [[1] * 4, [2, Fr(1, 2), 2, Fr(1, 2)]]]), sp)
    return m.with_ambient(enlarge(m.evolution, [Signal("coin", ["h", "h", "t", "t"], 0)]))


def dominated() -> Market:
    sp = space(("u", "d"), (Fr(1, 2), Fr(1, 2)))
    return Market(["bond", "stock"], grid([[[1, 1], [1, 1]], [[1, 1], [2, Fr(5, 4)]]]), sp)


def numeraire_only() -> Market:
    sp = space(("u", "d"), (Fr(1, 2), Fr(1, 2)))
    return Market(["bond"], grid([[[1, 1], [1, 1]]]), sp)


# ---------------------------------------------------------------------------
# random markets

def _rand_frac(rng, lo=1, hi=9, den=4) -> Fr:
    return Fr(int(rng.integers(lo, hi + 1)), int(rng.integers(1, den + 1)))


def _probs(rng, m):
    w = [Fr(int(rng.integers(1, 6))) for _ in range(m)]
    s = sum(w)
    return [x / s for x in w]


def random_tree(rng, T, branches, max_leaves=64):
    """Children counts per node; returns list of leaf paths (tuples of child indices)."""
    paths = [()]
    for t in range(T):
        new = []
        for path in paths:
            lo, hi = branches
            hi = max(lo, min(hi, max_leaves // max(1, len(paths))))
            m = int(rng.integers(lo, hi + 1))
            new.extend(path + (c,) for c in range(m))
        paths = new
    return paths


def random_market(
    rng,
    T_max=3,
    n_risky=(1, 2),
    branches=(1, 3),
    arbitrage_free=True,
    max_leaves=48,
    rates=True,
) -> Market:
    """Random tree market; with ``arbitrage_free`` the prices satisfy a positive martingale condition."""
    T = int(rng.integers(1, T_max + 1))
    k = int(rng.integers(n_risky[0], n_risky[1] + 1))
    leaves = random_tree(rng, T, branches, max_leaves)
    n = len(leaves)
    # node -> (probabilities, martingale weights, bond rate)
    nodes = {}
    for t in range(T):
        for prefix in sorted({leaf[:t] for leaf in leaves}):
            m = len({leaf[t] for leaf in leaves if leaf[:t] == prefix})
            r = Fr(int(rng.integers(0, 3)), 10) if rates else Fr(0)
            nodes[prefix] = (_probs(rng, m), _probs(rng, m), r)
    prob = []
    for leaf in leaves:
        w = Fr(1)
        for t in range(T):
            w *= nodes[leaf[:t]][0][leaf[t]]
        prob.append(w)
    bond = np.empty((T + 1, n), dtype=object)
    disc = np.empty((k, T + 1, n), dtype=object)
    bond[0] = Fr(1)
    disc[:, 0] = Fr(1)
    for t in range(T):
        for prefix, (p, q, r) in nodes.items():
            if len(prefix) != t:
                continue
            idx = [s for s, leaf in enumerate(leaves) if leaf[:t] == prefix]
            m = len(p)
            for i in range(k):
                x = disc[i, t, idx[0]]
                z = [_rand_frac(rng) for _ in range(m)]
                if arbitrage_free or rng.random() < 0.5:
                    scale = x / sum(qc * zc for qc, zc in zip(q, z))
                    y = [scale * zc for zc in z]
                else:
                    y = [x * zc / 3 for zc in z]
                for s in idx:
                    disc[i, t + 1, s] = y[leaves[s][t]]
            for s in idx:
                bond[t + 1, s] = bond[t, s] * (1 + r)
    assets = ["bond"] + [f"s{i + 1}" for i in range(k)]
    prices = np.empty((T + 1, k + 1, n), dtype=object)
    prices[:, 0] = bond
    for i in range(k):
        prices[:, i + 1] = disc[i] * bond
    ids = ["".join(str(c) for c in leaf) or "o" for leaf in leaves]
    return Market(assets, prices, space(ids, prob))


def tree_filtration(market: Market) -> Filtration:
    """Filtration of path prefixes encoded in the state ids."""
    ids = market.space.atoms
    return Filtration.from_labels([[sid[:t] for sid in ids] for t in range(market.T + 1)])


def with_signal(market: Market, rng, informative: bool, reveal: int = 0, labels=("g", "b")) -> Market:
    """Double every state by a binary signal; informative signals depend on the first move."""
    sp = market.space
    ids, probs = [], []
    first_moves = sorted({market.evolution.block_of(1, s) for s in range(sp.n)}) if market.T else [0]
    if informative:
        acc = {b: Fr(int(rng.integers(1, 9)), 10) for b in first_moves}
        # make sure the signal actually discriminates
        if len(set(acc.values())) == 1:
            acc[first_moves[0]] = acc[first_moves[0]] + Fr(1, 10) if acc[first_moves[0]] < Fr(9, 10) else Fr(1, 10)
    else:
        a = Fr(int(rng.integers(1, 9)), 10)
        acc = {b: a for b in first_moves}
    cols = []
    for s in range(sp.n):
        a = acc[market.evolution.block_of(1, s)] if market.T else acc[0]
        for lab, w in zip(labels, (a, 1 - a)):
            ids.append(f"{sp.atoms[s]}{lab}")
            probs.append(sp.prob[s] * w)
            cols.append(s)
    prices = market.prices[:, :, cols] * market.scale[None, :, None]
    new = Market(market.assets, prices, space(ids, probs), numeraire=market.numeraire)
    sig = Signal("y", [lab for _ in range(sp.n) for lab in labels], reveal)
    return new.with_ambient(enlarge(new.evolution, [sig]))


def random_claim(market: Market, rng) -> np.ndarray:
    """Nonnegative payoff constant on terminal price-history blocks."""
    E = market.evolution
    vals = [Fr(int(rng.integers(0, 7)), int(rng.integers(1, 4))) for _ in E.blocks(E.T)]
    out = np.empty(market.space.n, dtype=object)
    for b, block in enumerate(E.blocks(E.T)):
        out[list(block)] = vals[b]
    return out


def all_subsets(n):
    return itertools.chain.from_iterable(itertools.combinations(range(n), r) for r in range(n + 1))
