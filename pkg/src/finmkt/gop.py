"""Growth-optimal portfolio, numéraire-portfolio checks, real-world valuation and replication."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath
import numpy as np

from .errors import ArbitrageUnboundedGrowth, NotReplicable, ValidationError
from .market import (
    Claim,
    Market,
    Node,
    Strategy,
    ValueProcess,
    discount,
    market_nodes,
    normalize,
    random_strategy,
    strategy_from_units,
    value_process,
)
from .noarb import EMPTY, Measure, find_emms, is_complete, rnp_from_measure
from .numeric import FLOAT_TOL, independent_rows, min_norm_solve, rank, solve, to_fraction
from .probspace import (
    Classification,
    Filtration,
    FiniteProbSpace,
    classify_process,
    conditional_expectation,
    expectation_on_partition,
)


@dataclass(frozen=True, eq=False)
class NodeGop:
    t: int
    block: int
    units: tuple  # risky units per unit of wealth (full asset vector, numéraire entry 0)
    fractions: tuple  # wealth fractions per asset
    growth: float  # expected log increment
    residual: float  # max |first-order condition|
    exact: bool
    redundant: bool  # gain matrix has dependent columns; min-norm holdings chosen
    complete: bool  # children spanned by the assets


@dataclass(frozen=True, eq=False)
class GopResult:
    strategy: Strategy
    value: ValueProcess  # discounted W, W_0 = 1
    nodes: tuple
    filtration: Filtration
    numeraire: int

    @property
    def W(self) -> np.ndarray:
        return self.value.values

    @property
    def exact(self) -> bool:
        return all(n.exact for n in self.nodes)

    @property
    def complete(self) -> bool:
        return all(n.complete for n in self.nodes)

    @property
    def tol(self):
        return 0 if self.exact and self.W.dtype == object else FLOAT_TOL

    def node(self, t: int, block: int) -> NodeGop:
        return next(n for n in self.nodes if n.t == t and n.block == block)

    def growth(self) -> dict:
        return {(n.t, n.block): n.growth for n in self.nodes}


# ---------------------------------------------------------------------------
# per-node log-optimal solve

def _foc(D: list[list[Fraction]], p: list[Fraction], u: list[Fraction]) -> list[Fraction] | None:
    """Gradient of sum p log(1 + D u), or None if some wealth is non-positive."""
    gross = [1 + sum(a * b for a, b in zip(row, u)) for row in D]
    if any(g <= 0 for g in gross):
        return None
    k = len(u)
    return [sum(p[c] * D[c][j] / gross[c] for c in range(len(D))) for j in range(k)]


def _newton(D: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Maximize sum p log(1 + D u) for D with independent columns (damped Newton)."""
    k = D.shape[1]
    u = np.zeros(k)

    def f(v):
        r = 1 + D @ v
        if np.any(r <= 0):
            return -np.inf
        return float(p @ np.log(r))

    fu = f(u)
    for _ in range(500):
        r = 1 + D @ u
        g = D.T @ (p / r)
        Hn = (D.T * (p / r**2)) @ D
        step = np.linalg.solve(Hn, g)
        dec = float(g @ step)
        if dec < 1e-26:
            break
        s = 1.0
        while s > 1e-20:
            cand = u + s * step
            fc = f(cand)
            if fc >= fu + 1e-4 * s * dec or (fc > -np.inf and s * dec < 1e-24):
                break
            s /= 2
        u, fu = cand, fc
    return u


def _reconstruct(u: np.ndarray, D: list[list[Fraction]], p: list[Fraction]) -> list[Fraction] | None:
    """Rational vector near ``u`` satisfying the first-order conditions exactly."""
    for bound in (10, 100, 1000, 10**4, 10**5, 10**6, 10**8, 10**10, 10**12):
        cand = [Fraction(float(v)).limit_denominator(bound) for v in u]
        g = _foc(D, p, cand)
        if g is not None and all(v == 0 for v in g):
            return cand
    return None


def _solve_node(nd: Node, risky: list[int], exact: bool, n_assets: int) -> NodeGop:
    G = nd.gains()
    D = [[to_fraction(G[c, i]) for i in risky] for c in range(nd.m)]
    p = [to_fraction(v) for v in nd.p]
    k = len(risky)
    y = [[to_fraction(v) for v in row] for row in nd.y]
    complete = rank(y) == nd.m
    redundant = k > 0 and rank(D) < k
    u: list
    node_exact = True
    if k == 0:
        u = []
    elif complete:
        # the optimal gross return on each child is p/q for the unique one-step EMM
        q = solve([list(col) for col in zip(*y)], [to_fraction(v) for v in nd.x])
        target = [p[c] / q[c] - 1 for c in range(nd.m)]
        u = min_norm_solve(D, target)
    else:
        cols = independent_rows([list(col) for col in zip(*D)])
        DJ = [[row[j] for j in cols] for row in D]
        uJ = _newton(np.array(DJ, dtype=float), np.array([float(v) for v in p]))
        rec = _reconstruct(uJ, DJ, p)
        if rec is None:
            node_exact = False
            rec = [Fraction(float(v)) for v in uJ]
        ret = [sum(a * b for a, b in zip(row, rec)) for row in DJ]
        u = min_norm_solve(D, ret) if redundant else [Fraction(0)] * k
        if not redundant:
            for j, v in zip(cols, rec):
                u[j] = v
    g = _foc(D, p, u) if k else []
    residual = max((abs(float(v)) for v in g), default=0.0)
    gross = [1 + sum(a * b for a, b in zip(row, u)) for row in D]
    growth = math.fsum(float(pc) * math.log(gc) for pc, gc in zip(p, gross))
    full_u = [Fraction(0)] * n_assets
    for i, v in zip(risky, u):
        full_u[i] = v
    fr = [full_u[i] * to_fraction(nd.x[i]) for i in range(n_assets)]
    num = next(i for i in range(n_assets) if i not in risky)
    fr[num] = 1 - sum(fr)
    if not exact:
        full_u = [float(v) for v in full_u]
        fr = [float(v) for v in fr]
    return NodeGop(nd.t, nd.block, tuple(full_u), tuple(fr), growth, residual, node_exact and exact, redundant, complete)


def compute_gop(market: Market, filtration: Filtration | None = None) -> GopResult:
    """Log-optimal strategy, node by node, predictable w.r.t. ``filtration`` (default: price evolution)."""
    F = filtration or market.evolution
    emms = find_emms(market, F)
    bad = emms.failing_node()
    if bad is not None:
        raise ArbitrageUnboundedGrowth(
            f"no equivalent martingale weights at node t={bad.t}, block {bad.block}: growth is unbounded",
            node=(bad.t, bad.block),
        )
    risky = [i for i in range(market.n_assets) if i != market.numeraire]
    P = discount(market)
    nodes = market_nodes(market, F, P)
    solved = [_solve_node(nd, risky, market.exact, market.n_assets) for nd in nodes]
    dtype = object if market.exact else float
    n = market.space.n
    W = np.empty(n, dtype=dtype)
    W[:] = Fraction(1) if market.exact else 1.0
    units = [None] + [np.zeros((market.n_assets, n), dtype=dtype) for _ in range(market.T)]
    if market.exact:
        for u in units[1:]:
            u[...] = Fraction(0)
    by_t: dict[int, list[tuple[Node, NodeGop]]] = {}
    for nd, ng in zip(nodes, solved):
        by_t.setdefault(nd.t, []).append((nd, ng))
    for t in range(market.T):
        W_next = W.copy()
        for nd, ng in by_t.get(t, []):
            idx = list(nd.states)
            w = W[idx[0]]
            for i in range(market.n_assets):
                units[t + 1][i, idx] = w * ng.units[i]
            for c, ks in enumerate(nd.child_states):
                gain = sum(ng.units[i] * (nd.y[c, i] - nd.x[i]) for i in risky)
                W_next[list(ks)] = w * (1 + gain)
        W = W_next
    strategy = strategy_from_units(market, F, units, initial_value=1)
    value = value_process(strategy, market, tol=0 if market.exact else FLOAT_TOL)
    if not all(v > 0 for v in value.values.ravel()):
        raise ValidationError("growth-optimal wealth is not strictly positive")
    return GopResult(strategy, value, tuple(solved), F, market.numeraire)


# ---------------------------------------------------------------------------
# numéraire-portfolio verification

def _wealth(candidate, market: Market) -> np.ndarray:
    if isinstance(candidate, GopResult):
        return candidate.W
    if isinstance(candidate, Strategy):
        return value_process(candidate, market).values
    if isinstance(candidate, ValueProcess):
        return candidate.values
    return np.asarray(candidate)


@dataclass(frozen=True, eq=False)
class StatLine:
    t: int
    block: int
    mean_excess: float  # E(Q_T/Q_t - 1 | I_t)
    mean_log: float  # E(log(Q_T/Q_t) | I_t)
    ok: bool


@dataclass(frozen=True, eq=False)
class NumeraireReport:
    assets: dict  # asset -> Classification of P_i / W
    strategies_checked: int
    strategies_ok: bool
    worst_strategy_defect: float
    statistics: tuple  # StatLine for every strategy, t and conditioning block

    @property
    def assets_ok(self) -> bool:
        return all(c.is_supermartingale for c in self.assets.values())

    @property
    def statistics_ok(self) -> bool:
        return all(s.ok for s in self.statistics)

    @property
    def passed(self) -> bool:
        return self.assets_ok and self.strategies_ok and self.statistics_ok

    def failing_assets(self) -> list[str]:
        return [a for a, c in self.assets.items() if not c.is_supermartingale]


def _mp(x):
    if isinstance(x, Fraction):
        return mpmath.mpf(x.numerator) / x.denominator
    return mpmath.mpf(float(x))


def ratio_stats(Q: np.ndarray, partitions, space: FiniteProbSpace, tol) -> list[StatLine]:
    """Conditional statistics of the ratio ``Q_T / Q_t`` on each block of ``partitions[t]``."""
    T = Q.shape[0] - 1
    prob = space.prob
    out = []
    for t in range(T + 1):
        R = Q[T] / Q[t]
        for b, block in enumerate(partitions[t]):
            idx = list(block)
            mass = sum(prob[idx])
            excess = sum(prob[s] * (R[s] - 1) for s in idx) / mass
            if all(R[s] == 1 for s in idx):
                mlog = mpmath.mpf(0)
            else:
                with mpmath.workdps(50):
                    mlog = mpmath.fsum(_mp(prob[s] / mass) * mpmath.log(_mp(R[s])) for s in idx)
            ok = excess <= tol and mlog <= tol
            out.append(StatLine(t, b, float(excess), float(mlog), bool(ok)))
    return out


def verify_numeraire_portfolio(
    candidate,
    market: Market,
    filtration: Filtration | None = None,
    partition=None,
    n_random: int = 20,
    seed: int = 0,
    tol=None,
) -> NumeraireReport:
    """Check that benchmarking by ``candidate`` makes assets and strategies supermartingales.

    ``partition`` is the conditioning information for the ratio statistics:
    a :class:`Filtration` (or list of per-time partitions) coarser than
    ``filtration``; defaults to ``filtration`` itself.
    """
    F = filtration or (candidate.filtration if isinstance(candidate, GopResult) else market.ambient)
    W = _wealth(candidate, market)
    if not all(v > 0 for v in W.ravel()):
        raise ValidationError("candidate wealth must be positive")
    if tol is None:
        tol = candidate.tol if isinstance(candidate, GopResult) else market.tol
    P = discount(market)
    space = market.space
    assets = {
        name: classify_process(P[:, i, :] / W, F, space, tol) for i, name in enumerate(market.assets)
    }
    if partition is None:
        parts = F.partitions
    elif isinstance(partition, Filtration):
        parts = partition.partitions
    else:
        parts = partition
    rng = np.random.default_rng(seed)
    ok = True
    worst = -math.inf
    stats: list[StatLine] = []
    E = market.evolution
    for _ in range(n_random):
        # holdings predictable w.r.t. the price history are admissible under any F containing it
        H = normalize(random_strategy(market, E, rng), market)
        V = value_process(H, market).values
        Qv = V / W
        cl = classify_process(Qv, F, space, tol)
        d = max((float(v) for v in cl.defects.ravel()), default=0.0)
        worst = max(worst, d)
        ok = ok and cl.is_supermartingale
        stats.extend(ratio_stats(Qv, parts, space, tol))
    for i in range(market.n_assets):
        stats.extend(ratio_stats(P[:, i, :] / W, parts, space, tol))
    return NumeraireReport(assets, n_random, ok, worst if n_random else 0.0, tuple(stats))


# ---------------------------------------------------------------------------
# pricing bounds and valuation

@dataclass(frozen=True, eq=False)
class BoundLine:
    asset: str
    t: int
    block: int
    price: object
    bound: object


@dataclass(frozen=True, eq=False)
class MinimalPriceReport:
    lines: tuple
    tol: object

    @property
    def holds(self) -> bool:
        return all(l.price >= l.bound - self.tol for l in self.lines)

    @property
    def tight(self) -> bool:
        return all(abs(l.price - l.bound) <= self.tol for l in self.lines)

    def violations(self) -> list[BoundLine]:
        return [l for l in self.lines if l.price < l.bound - self.tol]


def law_of_minimal_price_bound(
    market: Market,
    gop: GopResult,
    t: int = 0,
    T: int | None = None,
    filtration: Filtration | None = None,
) -> MinimalPriceReport:
    """Compare each discounted price with its benchmarked conditional mean ``E(P_T W_t / W_T | F_t)``."""
    F = filtration or gop.filtration
    T = market.T if T is None else T
    if not 0 <= t <= T <= market.T:
        raise ValidationError(f"need 0 <= t <= T <= {market.T}")
    P = discount(market)
    W = gop.W
    lines = []
    for i, name in enumerate(market.assets):
        rhs = conditional_expectation(P[T, i] * W[t] / W[T], t, F, market.space)
        for b, block in enumerate(F.blocks(t)):
            s = block[0]
            lines.append(BoundLine(name, t, b, P[t, i, s], rhs[s]))
    return MinimalPriceReport(tuple(lines), gop.tol)


@dataclass(frozen=True, eq=False)
class Valuation:
    discounted: np.ndarray  # (T+1, n) in units of the numéraire
    nominal: np.ndarray  # (T+1, n) in currency

    def at(self, t: int) -> np.ndarray:
        return self.discounted[t]


def _discounted_payoff(claim, market: Market) -> np.ndarray:
    payoff = claim.payoff if isinstance(claim, Claim) else np.asarray(claim)
    return payoff / market.numeraire_prices()[-1]


def real_world_value(
    claim,
    market: Market,
    gop: GopResult,
    t: int | None = None,
    filtration: Filtration | None = None,
    cross_check: bool = True,
):
    """Benchmarked conditional mean ``E_P(W_t / W_T * C / S^a_T | F_t)``.

    Returns the full :class:`Valuation` when ``t`` is None, else the
    discounted value at ``t``.  When every node of the GOP is spanned and
    ``filtration`` is the GOP's own, the result is cross-checked against the
    risk-neutral value under the unique martingale measure.
    """
    if isinstance(claim, Claim):
        pass
    else:
        claim = Claim.for_market(market, claim)
    F = filtration or gop.filtration
    X = _discounted_payoff(claim, market)
    W = gop.W
    T = market.T
    disc = np.empty((T + 1, market.space.n), dtype=W.dtype if X.dtype == object else float)
    for k in range(T + 1):
        disc[k] = conditional_expectation(X * W[k] / W[T], k, F, market.space)
    if cross_check and gop.complete and gop.exact and F == gop.filtration:
        emms = find_emms(market, F)
        if emms.representative is not None:
            rn = risk_neutral_value(claim, market, emms.representative, F).discounted
            tol = gop.tol
            for idx, v in np.ndenumerate(disc):
                if abs(v - rn[idx]) > (tol or 0) * max(1, abs(v)):
                    raise AssertionError(f"real-world and risk-neutral values differ at {idx}: {v} vs {rn[idx]}")
    val = Valuation(disc, disc * market.numeraire_prices())
    return val if t is None else val.at(t)


def risk_neutral_value(claim, market: Market, Q: Measure, filtration: Filtration | None = None) -> Valuation:
    """``S^a_t E_Q(C / S^a_T | F_t)``."""
    F = filtration or market.ambient
    X = _discounted_payoff(claim, market)
    qspace = Q.as_space()
    T = market.T
    disc = np.empty((T + 1, market.space.n), dtype=X.dtype)
    for k in range(T + 1):
        disc[k] = conditional_expectation(X, k, F, qspace)
    return Valuation(disc, disc * market.numeraire_prices())


# ---------------------------------------------------------------------------
# replication

@dataclass(frozen=True, eq=False)
class Replication:
    strategy: Strategy
    value: ValueProcess

    @property
    def initial(self):
        return self.value.values[0][0]


def replicate(
    claim, market: Market, Q: Measure | None = None, filtration: Filtration | None = None
) -> Replication:
    """Backward induction over the nodes of ``filtration`` (default: price evolution)."""
    if not isinstance(claim, Claim):
        claim = Claim.for_market(market, claim)
    F = filtration or market.evolution
    if not F.is_measurable(claim.payoff, F.T, market.tol):
        raise NotReplicable("claim is not measurable at the horizon", node=None)
    P = discount(market)
    n, N1, T = market.space.n, market.n_assets, market.T
    exact = market.exact
    dtype = object if exact else float
    V = np.empty((T + 1, n), dtype=dtype)
    V[T] = _discounted_payoff(claim, market)
    H = np.zeros((T + 1, N1, n), dtype=dtype)
    if exact:
        H[...] = Fraction(0)
    nodes = market_nodes(market, F, P)
    for nd in sorted(nodes, key=lambda x: -x.t):
        rhs = [V[nd.t + 1, ks[0]] for ks in nd.child_states]
        if exact:
            h = solve([list(r) for r in nd.y], rhs)
        else:
            A = np.array(nd.y, dtype=float)
            sol, *_ = np.linalg.lstsq(A, np.array(rhs, dtype=float), rcond=None)
            h = None if np.max(np.abs(A @ sol - rhs), initial=0) > FLOAT_TOL else list(sol)
        if h is None:
            raise NotReplicable(
                f"claim is not spanned by the assets at node t={nd.t}, block {nd.block}", node=(nd.t, nd.block)
            )
        idx = list(nd.states)
        for i in range(N1):
            H[nd.t + 1, i, idx] = h[i]
        V[nd.t, idx] = sum(h[i] * nd.x[i] for i in range(N1))
    if T >= 1:
        H[0] = H[1]
    strategy = Strategy(H, F)
    vp = value_process(strategy, market)
    for idx, v in np.ndenumerate(vp.values):
        if abs(v - V[idx]) > market.tol:
            raise AssertionError("replicating value process does not telescope")
    if Q is not None:
        rn = risk_neutral_value(claim, market, Q, F).discounted
        for idx, v in np.ndenumerate(vp.values):
            if abs(v - rn[idx]) > market.tol:
                raise AssertionError(f"replication value differs from the martingale value at {idx}")
    return Replication(strategy, vp)


# ---------------------------------------------------------------------------
# martingale hypothesis

@dataclass(frozen=True, eq=False)
class HypothesisWitness:
    asset: str
    t: int
    block: int
    current: object  # benchmarked price at the node
    conditional_mean: object  # E(next benchmarked price | F_t)


@dataclass(frozen=True, eq=False)
class HypothesisReport:
    positive: bool
    gop: GopResult
    classifications: dict
    witnesses: tuple
    complete: bool
    density_matches: bool | None  # Λ_t = 1 / W_t under the unique measure (complete case)
    pricing_kernel_holds: bool

    @property
    def verdict(self) -> str:
        return "sensitive-and-complete-consistent" if self.positive else "rejected"


def martingale_hypothesis_check(market: Market, F: Filtration | None = None) -> HypothesisReport:
    """Benchmark every asset by the price-history GOP and test the martingale property under P w.r.t. F."""
    F = F or market.ambient
    E = market.evolution
    gop = compute_gop(market, E)
    W = gop.W
    tol = gop.tol
    P = discount(market)
    space = market.space
    classes: dict[str, Classification] = {}
    witnesses = []
    for i, name in enumerate(market.assets):
        X = P[:, i, :] / W
        cl = classify_process(X, F, space, tol)
        classes[name] = cl
        if not cl.is_martingale:
            best = None
            for t in range(F.T):
                for b, block in enumerate(F.blocks(t)):
                    d = cl.defects[t][block[0]]
                    if abs(d) > tol and (best is None or abs(d) > abs(best[2])):
                        best = (t, b, d)
            t, b, d = best
            s = F.blocks(t)[b][0]
            witnesses.append(HypothesisWitness(name, t, b, X[t, s], X[t, s] + d))
    positive = not witnesses
    kernel = True
    T = market.T
    for i in range(market.n_assets):
        for t in range(T + 1):
            rhs = conditional_expectation(W[t] / W[T] * P[T, i], t, F, space)
            if any(abs(a - b) > tol for a, b in zip(P[t, i], rhs)):
                kernel = False
    comp = is_complete(market, E, F)
    density = None
    if comp.spans:
        emms = find_emms(market, F)
        if emms.representative is not None:
            rnp = rnp_from_measure(emms.representative, F, space)
            inv = 1 / W
            density = all(abs(a - b) <= tol for a, b in zip(rnp.levels.ravel(), inv.ravel()))
    return HypothesisReport(positive, gop, classes, tuple(witnesses), comp.complete, density, kernel)
