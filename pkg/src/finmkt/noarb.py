"""Martingale measures, arbitrage and dominance, density processes, completeness."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import lp
from .errors import NotEmm, NotEquivalent, NotSubfiltration, ValidationError
from .market import (
    Market,
    Node,
    Strategy,
    discount,
    market_nodes,
    strategy_from_units,
    value_process,
)
from .numeric import FLOAT_TOL, rank, solve, to_fraction
from .probspace import (
    Filtration,
    FiniteProbSpace,
    ImmersionResult,
    classify_process,
    conditional_expectation,
    is_immersed,
)

EMPTY = "empty"
UNIQUE = "unique"
MULTIPLE = "multiple"

# vertex enumeration above this many column subsets falls back to the LP optimum
_MAX_SUBSETS = 5000


@dataclass(frozen=True, eq=False)
class Measure:
    """Probability weights on the atoms of ``space``."""

    weights: np.ndarray
    space: FiniteProbSpace

    def __post_init__(self):
        w = np.array(self.weights, dtype=object if self.space.exact else float)
        if w.shape != (self.space.n,):
            raise ValidationError(f"measure has {w.shape} weights, space has {self.space.n} states")
        if any(v < 0 for v in w):
            raise ValidationError("measure weights must be nonnegative")
        total = sum(w)
        if abs(total - 1) > (0 if self.space.exact else 1e-12):
            raise ValidationError(f"measure weights sum to {total}, not 1")
        object.__setattr__(self, "weights", w)

    @property
    def equivalent(self) -> bool:
        return all(v > 0 for v in self.weights)

    def as_space(self) -> FiniteProbSpace:
        if not self.equivalent:
            raise NotEquivalent("measure has null states")
        return self.space.reweighted(self.weights)

    def __getitem__(self, atom):
        return self.weights[self.space.index(atom)]

    def as_dict(self) -> dict:
        return dict(zip(self.space.atoms, self.weights))


@dataclass(frozen=True, eq=False)
class NodeEmm:
    t: int
    block: int
    states: tuple
    status: str  # empty | unique | multiple
    absolutely_continuous: bool  # a nonnegative (possibly boundary) solution exists
    max_min_weight: Fraction | None
    rank: int
    n_children: int
    representative: tuple | None
    vertices: tuple = ()


@dataclass(frozen=True, eq=False)
class EmmSet:
    nodes: tuple
    filtration: Filtration
    representative: Measure | None

    @property
    def status(self) -> str:
        kinds = [n.status for n in self.nodes]
        if EMPTY in kinds:
            return EMPTY
        return MULTIPLE if MULTIPLE in kinds else UNIQUE

    @property
    def nonempty(self) -> bool:
        return self.status != EMPTY

    def failing_node(self) -> NodeEmm | None:
        return next((n for n in self.nodes if n.status == EMPTY), None)


def _fr_rows(a: np.ndarray) -> list[list[Fraction]]:
    return [[to_fraction(v) for v in row] for row in a]


def _node_vertices(A: list[list[Fraction]], b: list[Fraction], m: int) -> list[tuple]:
    """Vertices of ``{q >= 0 : A q = b}`` by basic solutions, or [] if too many subsets."""
    r = rank(A)
    if r == 0:
        return []
    subsets = 1
    for k in range(r):
        subsets = subsets * (m - k) // (k + 1)
    if subsets > _MAX_SUBSETS:
        return []
    found: dict[tuple, None] = {}
    for J in itertools.combinations(range(m), r):
        sub = [[row[j] for j in J] for row in A]
        if rank(sub) < r:
            continue
        x = solve(sub, b)
        if x is None or any(v < 0 for v in x):
            continue
        q = [Fraction(0)] * m
        for j, v in zip(J, x):
            q[j] = v
        found[tuple(q)] = None
    return list(found)


def _solve_node(node: Node, numeraire: int) -> NodeEmm:
    m = node.m
    # rows: one per asset (the numeraire row reads sum q = 1)
    A = [[to_fraction(node.y[c, i]) for c in range(m)] for i in range(node.y.shape[1])]
    b = [to_fraction(v) for v in node.x]
    rk = rank([list(r) for r in _fr_rows(node.y)])
    # maximize s subject to A q = b, q_c >= s, q >= 0, s <= 1
    c = [0] * m + [1]
    A_eq = [row + [0] for row in A]
    A_ub = []
    for j in range(m):
        r = [0] * (m + 1)
        r[j] = -1
        r[m] = 1
        A_ub.append(r)
    A_ub.append([0] * m + [1])
    b_ub = [0] * m + [1]
    res = lp.linprog(c, A_ub, b_ub, A_eq, b, maximize=True)
    base = dict(t=node.t, block=node.block, states=node.states, rank=rk, n_children=m)
    if res.status != lp.OPTIMAL:
        return NodeEmm(status=EMPTY, absolutely_continuous=False, max_min_weight=None, representative=None, **base)
    s = res.fun
    if s <= 0:
        return NodeEmm(status=EMPTY, absolutely_continuous=True, max_min_weight=s, representative=None, **base)
    if rk == m:
        q = tuple(solve(A, b))
        return NodeEmm(
            status=UNIQUE, absolutely_continuous=True, max_min_weight=s, representative=q, vertices=(q,), **base
        )
    verts = _node_vertices(A, b, m)
    if verts:
        rep = tuple(sum(v[j] for v in verts) / len(verts) for j in range(m))
    else:
        rep = tuple(res.x[:m])
    if any(v <= 0 for v in rep):
        rep = tuple(res.x[:m])
    return NodeEmm(
        status=MULTIPLE,
        absolutely_continuous=True,
        max_min_weight=s,
        representative=rep,
        vertices=tuple(verts),
        **base,
    )


def _assemble(nodes: list[NodeEmm], F: Filtration, space: FiniteProbSpace, exact: bool) -> Measure:
    """Global measure from node transitions; F_0 and within-leaf splits follow P."""
    p = [to_fraction(v) for v in space.prob]
    T = F.T
    trans: dict[tuple[int, int], Fraction] = {}
    for nd in nodes:
        for k, qk in zip(F.children(nd.t, nd.block), nd.representative):
            trans[(nd.t + 1, k)] = qk
    w = []
    for s in range(space.n):
        b0 = F.block_of(0, s)
        weight = sum(p[j] for j in F.blocks(0)[b0])
        for t in range(1, T + 1):
            weight *= trans[(t, F.block_of(t, s))]
        leaf = F.blocks(T)[F.block_of(T, s)]
        weight *= p[s] / sum(p[j] for j in leaf)
        w.append(weight)
    w = np.array(w, dtype=object)
    if not exact:
        w = np.array([float(v) for v in w])
        w = w / w.sum()
    return Measure(w, space)


def find_emms(market: Market, filtration: Filtration | None = None) -> EmmSet:
    """Per-node martingale transition systems, their classification and a representative."""
    F = filtration or market.ambient
    if not F.contains(market.evolution):
        raise NotSubfiltration("filtration does not contain the price evolution")
    nodes = [_solve_node(nd, market.numeraire) for nd in market_nodes(market, F)]
    rep = None
    if all(n.status != EMPTY for n in nodes):
        rep = _assemble(nodes, F, market.space, market.exact)
    return EmmSet(tuple(nodes), F, rep)


def is_emm(Q: Measure, market: Market, filtration: Filtration | None = None) -> bool:
    return emm_defects(Q, market, filtration) is None


def emm_defects(Q: Measure, market: Market, filtration: Filtration | None = None):
    """None when every discounted price is a Q-martingale, else (asset, t, state) of the first defect."""
    F = filtration or market.ambient
    if not Q.equivalent:
        return ("<null state>", None, None)
    P = discount(market)
    space = Q.as_space()
    for i in range(market.n_assets):
        cl = classify_process(P[:, i, :], F, space, market.tol)
        if not cl.is_martingale:
            for t in range(F.T):
                for b, block in enumerate(F.blocks(t)):
                    if abs(cl.defects[t][block[0]]) > market.tol:
                        return (market.assets[i], t, b)
    return None


# ---------------------------------------------------------------------------
# arbitrage and dominance

def _node_gain_lp(D: list[list[Fraction]], p: list[Fraction], shift: list[Fraction] | None) -> tuple | None:
    """Find h with ``D h - shift >= 0`` and ``sum p (D h - shift) >= 1``."""
    k = len(D[0]) if D else 0
    m = len(D)
    shift = shift or [Fraction(0)] * m
    if k == 0:
        return None
    A_ub = [[-v for v in row] for row in D]
    b_ub = [-s for s in shift]
    A_ub.append([-sum(p[c] * D[c][j] for c in range(m)) for j in range(k)])
    b_ub.append(-1 - sum(p[c] * shift[c] for c in range(m)))
    res = lp.linprog([0] * k, A_ub, b_ub, free=[True] * k)
    if res.status != lp.OPTIMAL:
        return None
    return res.x


def _risky(market: Market) -> list[int]:
    return [i for i in range(market.n_assets) if i != market.numeraire]


def _zero_units(market: Market):
    dtype = object if market.exact else float
    units = [None]
    for _ in range(market.T):
        u = np.zeros((market.n_assets, market.space.n), dtype=dtype)
        if market.exact:
            u[...] = Fraction(0)
        units.append(u)
    return units


def _cast(v, exact: bool):
    return v if exact else float(v)


def _node_search(market: Market, F: Filtration, asset: int | None) -> Strategy | None:
    risky = _risky(market)
    P = discount(market)
    for nd in market_nodes(market, F, P):
        G = nd.gains()
        D = [[to_fraction(G[c, i]) for i in risky] for c in range(nd.m)]
        p = [to_fraction(v) for v in nd.p]
        shift = None
        if asset is not None:
            shift = [to_fraction(G[c, asset]) for c in range(nd.m)]
        h = _node_gain_lp(D, p, shift)
        if h is None:
            continue
        units = _zero_units(market)
        if asset is not None:
            for t in range(1, market.T + 1):
                units[t][asset, :] = 1
            for i in risky:
                units[nd.t + 1][i, list(nd.states)] = 0
        for i, v in zip(risky, h):
            units[nd.t + 1][i, list(nd.states)] = _cast(v, market.exact)
        initial = 0 if asset is None else 1
        return strategy_from_units(market, F, units, initial_value=initial)
    return None


def _global_search(market: Market, F: Filtration, asset: int | None) -> Strategy | None:
    """Single LP over all predictable holdings (node x risky asset variables)."""
    risky = _risky(market)
    P = discount(market)
    nodes = list(F.nodes())
    col = {}
    for t, b in nodes:
        for i in risky:
            col[(t, b, i)] = len(col)
    k = len(col)
    if k == 0:
        return None
    n = market.space.n
    p = [to_fraction(v) for v in market.space.prob]
    A_ub, b_ub = [], []
    exp_row = [Fraction(0)] * k
    exp_shift = Fraction(0)
    for s in range(n):
        row = [Fraction(0)] * k
        for t in range(market.T):
            b = F.block_of(t, s)
            for i in risky:
                row[col[(t, b, i)]] += to_fraction(P[t + 1, i, s] - P[t, i, s])
        shift = Fraction(0)
        if asset is not None:
            shift = to_fraction(P[market.T, asset, s] - P[0, asset, s])
        A_ub.append([-v for v in row])
        b_ub.append(-shift)
        exp_row = [e + p[s] * v for e, v in zip(exp_row, row)]
        exp_shift += p[s] * shift
    A_ub.append([-v for v in exp_row])
    b_ub.append(-1 - exp_shift)
    res = lp.linprog([0] * k, A_ub, b_ub, free=[True] * k)
    if res.status != lp.OPTIMAL:
        return None
    units = _zero_units(market)
    for (t, b, i), j in col.items():
        units[t + 1][i, list(F.blocks(t)[b])] = _cast(res.x[j], market.exact)
    initial = 0 if asset is None else 1
    return strategy_from_units(market, F, units, initial_value=initial)


def find_arbitrage(market: Market, filtration: Filtration | None = None, method: str = "node") -> Strategy | None:
    """A self-financing strategy from zero wealth with nonnegative, not a.s. zero final gain.

    ``method="node"`` solves one small LP per node (an arbitrage exists iff
    some node admits a one-step arbitrage); ``"global"`` solves a single LP
    over all predictable holdings.
    """
    F = filtration or market.ambient
    if method == "node":
        return _node_search(market, F, None)
    if method == "global":
        return _global_search(market, F, None)
    raise ValueError(f"unknown method {method!r}")


def find_dominating(
    market: Market, asset: int | str, filtration: Filtration | None = None, method: str = "node"
) -> Strategy | None:
    """A strategy from the asset's initial value whose final value weakly beats holding it, strictly in mean."""
    F = filtration or market.ambient
    i = market.asset_index(asset)
    if method == "node":
        return _node_search(market, F, i)
    if method == "global":
        return _global_search(market, F, i)
    raise ValueError(f"unknown method {method!r}")


def gains(strategy: Strategy, market: Market) -> np.ndarray:
    """Final discounted gain per state."""
    V = value_process(strategy, market).values
    return V[-1] - V[0]


# ---------------------------------------------------------------------------
# density processes

@dataclass(frozen=True, eq=False)
class RNP:
    levels: np.ndarray  # (T+1, n)
    terminal: np.ndarray  # (n,)
    filtration: Filtration
    space: FiniteProbSpace
    scale: np.ndarray  # raw Λ_0 per state before normalization

    def ratio(self, t: int, T: int | None = None) -> np.ndarray:
        """``Λ_{t,T} = Λ_T / Λ_t``."""
        T = self.filtration.T if T is None else T
        return self.levels[T] / self.levels[t]

    def measure(self) -> Measure:
        return measure_from_density(self.terminal, self.space)


def measure_from_density(density, space: FiniteProbSpace) -> Measure:
    """``Q(A) = E_P(1_A Λ_∞)``."""
    d = np.array(density, dtype=object if space.exact else float)
    return Measure(d * space.prob, space)


def rnp_from_measure(Q: Measure, filtration: Filtration, space: FiniteProbSpace | None = None) -> RNP:
    space = space or Q.space
    if not Q.equivalent:
        raise NotEquivalent("measure is not equivalent to the reference measure")
    terminal = Q.weights / space.prob
    raw0 = conditional_expectation(terminal, 0, filtration, space)
    terminal = terminal / raw0
    T = filtration.T
    levels = np.empty((T + 1, space.n), dtype=terminal.dtype)
    for t in range(T + 1):
        levels[t] = conditional_expectation(terminal, t, filtration, space)
    return RNP(levels, terminal, filtration, space, raw0)


def bayes_conditional(X, Q: Measure, t: int, filtration: Filtration) -> np.ndarray:
    """``E_Q(X | F_t)``, computed directly and through the density ratio; both must agree."""
    space = Q.space
    X = np.asarray(X)
    qspace = Q.as_space()
    direct = conditional_expectation(X, t, filtration, qspace)
    rnp = rnp_from_measure(Q, filtration, space)
    T = filtration.T
    top = rnp.levels[T] if filtration.is_measurable(X, T, space.tol) else rnp.terminal
    via = conditional_expectation(top / rnp.levels[t] * X, t, filtration, space)
    tol = space.tol
    for s in range(space.n):
        if abs(direct[s] - via[s]) > (tol or 0) * max(1, abs(direct[s])):
            raise AssertionError(f"conditional expectations disagree at state {space.atoms[s]!r}: {direct[s]} vs {via[s]}")
    return direct


@dataclass(frozen=True)
class DeflatorLine:
    asset: str
    deflated_martingale: bool
    q_martingale: bool

    @property
    def agree(self) -> bool:
        return self.deflated_martingale == self.q_martingale


@dataclass(frozen=True)
class DeflatorReport:
    lines: tuple

    @property
    def all_pass(self) -> bool:
        return all(l.deflated_martingale and l.q_martingale for l in self.lines)

    @property
    def equivalence_holds(self) -> bool:
        return all(l.agree for l in self.lines)

    def failing(self) -> list[str]:
        return [l.asset for l in self.lines if not (l.deflated_martingale and l.q_martingale)]


def verify_deflator(rnp: RNP, market: Market, filtration: Filtration | None = None) -> DeflatorReport:
    F = filtration or rnp.filtration
    P = discount(market)
    space = rnp.space
    qspace = rnp.measure().as_space()
    tol = market.tol
    lines = []
    for i, name in enumerate(market.assets):
        lam_side = classify_process(rnp.levels * P[:, i, :], F, space, tol).is_martingale
        q_side = classify_process(P[:, i, :], F, qspace, tol).is_martingale
        lines.append(DeflatorLine(name, lam_side, q_side))
    return DeflatorReport(tuple(lines))


def change_numeraire_measure(
    Q: Measure, market: Market, b: int | str, filtration: Filtration | None = None
) -> Measure:
    """Measure for numéraire ``b`` given an EMM ``Q`` for the market's numéraire."""
    F = filtration or market.ambient
    if not is_emm(Q, market, F):
        raise NotEmm("measure is not an equivalent martingale measure for the current numéraire")
    bi = market.asset_index(b)
    S = market.prices
    gamma = S[-1, bi, :] / S[-1, market.numeraire, :]
    w = Q.weights * gamma
    if not market.exact:
        w = w / w.sum()
    out = Measure(w, Q.space)
    if not is_emm(out, market.with_numeraire(bi), F):
        raise NotEmm("transformed measure failed the martingale check")
    return out


# ---------------------------------------------------------------------------
# completeness

@dataclass(frozen=True, eq=False)
class CompletenessReport:
    complete: bool
    spans: bool
    failing_node: tuple | None  # (t, block) of an E-node without full span
    immersed: bool | None
    immersion: ImmersionResult | None
    q_is_emm: bool | None
    node_ranks: tuple = field(default=())


def is_complete(
    market: Market,
    E: Filtration | None = None,
    F: Filtration | None = None,
    Q: Measure | None = None,
) -> CompletenessReport:
    """Spanning at every E-node and Q-immersion of E in F."""
    E = E or market.evolution
    F = F or market.ambient
    if not F.contains(E):
        raise NotSubfiltration("E is not contained in F")
    ranks = []
    failing = None
    for nd in market_nodes(market, E):
        rk = rank(_fr_rows(nd.y))
        ranks.append(((nd.t, nd.block), rk, nd.m))
        if rk < nd.m and failing is None:
            failing = (nd.t, nd.block)
    spans = failing is None
    if Q is None:
        emms = find_emms(market, F)
        Q = emms.representative
    q_ok = None
    imm = None
    immersed = None
    if Q is not None and Q.equivalent:
        q_ok = is_emm(Q, market, F)
        imm = is_immersed(E, F, Q.as_space(), market.tol)
        immersed = imm.immersed
    complete = bool(spans and immersed)
    return CompletenessReport(complete, spans, failing, immersed, imm, q_ok, tuple(ranks))
