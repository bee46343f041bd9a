"""Price systems, numéraire discounting and self-financing strategies."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import (
    Degenerate,
    NotMeasurable,
    NotPredictable,
    NotSelfFinancing,
    NotSubfiltration,
    ValidationError,
)
from .numeric import FLOAT_TOL, is_exact, to_fraction
from .probspace import Filtration, FiniteProbSpace, natural_filtration


def _fractions(a: np.ndarray) -> np.ndarray:
    out = np.empty(a.shape, dtype=object)
    for idx, v in np.ndenumerate(a):
        out[idx] = to_fraction(v)
    return out


class Market:
    """Finite market: ``prices[t, i, s]`` for times ``0..T``, assets, states.

    Each asset is rescaled so that its time-0 price is 1; the original
    initial prices are kept in :attr:`scale`.
    """

    def __init__(
        self,
        assets: Sequence[str],
        prices,
        space: FiniteProbSpace,
        numeraire: int | str = 0,
        ambient: Filtration | None = None,
    ):
        prices = np.array(prices, dtype=object if space.exact else float)
        if space.exact:
            prices = _fractions(prices)
        if prices.ndim != 3:
            raise ValidationError("prices must be a time x asset x state grid")
        T1, N1, n = prices.shape
        if N1 != len(assets):
            raise ValidationError(f"{len(assets)} asset names but {N1} price rows")
        if n != space.n:
            raise ValidationError(f"price grid has {n} states, space has {space.n}")
        if len(set(assets)) != len(assets):
            raise ValidationError("duplicate asset names")
        for idx, v in np.ndenumerate(prices):
            if not v > 0:
                t, i, s = idx
                raise ValidationError(f"non-positive price {v} for {assets[i]!r} at t={t}, state {space.atoms[s]!r}")
        scale = prices[0, :, 0].copy()
        prices = prices / scale[None, :, None]
        self.assets = tuple(assets)
        self.prices = prices
        self.space = space
        self.scale = scale
        self.numeraire = self.asset_index(numeraire)
        self.evolution = natural_filtration(prices)
        if ambient is None:
            ambient = self.evolution
        if not ambient.contains(self.evolution):
            raise NotSubfiltration("ambient filtration does not contain the price evolution")
        self.ambient = ambient

    def asset_index(self, asset: int | str) -> int:
        if isinstance(asset, str):
            if asset not in self.assets:
                raise ValidationError(f"unknown asset {asset!r}")
            return self.assets.index(asset)
        if not 0 <= asset < len(self.assets):
            raise ValidationError(f"asset index {asset} out of range")
        return int(asset)

    @property
    def T(self) -> int:
        return self.prices.shape[0] - 1

    @property
    def n_assets(self) -> int:
        return self.prices.shape[1]

    @property
    def exact(self) -> bool:
        return self.space.exact

    @property
    def tol(self):
        override = self.__dict__.get("_tol")
        return self.space.tol if override is None else override

    def _rebuild(self, numeraire=None, ambient=None) -> "Market":
        m = object.__new__(Market)
        m.__dict__.update(self.__dict__)
        if numeraire is not None:
            m.numeraire = self.asset_index(numeraire)
        if ambient is not None:
            if not ambient.contains(self.evolution):
                raise NotSubfiltration("ambient filtration does not contain the price evolution")
            m.ambient = ambient
        return m

    def with_numeraire(self, asset: int | str) -> "Market":
        return self._rebuild(numeraire=asset)

    def with_ambient(self, ambient: Filtration) -> "Market":
        return self._rebuild(ambient=ambient)

    def with_tol(self, tol) -> "Market":
        """Copy comparing values with tolerance ``tol`` instead of the mode default."""
        m = self._rebuild()
        m._tol = tol
        return m

    def numeraire_prices(self) -> np.ndarray:
        return self.prices[:, self.numeraire, :]

    def __repr__(self):
        return f"Market(assets={self.assets}, T={self.T}, states={self.space.n}, numeraire={self.assets[self.numeraire]!r})"


def discount(market: Market) -> np.ndarray:
    """Discounted prices ``P[t, i, s] = S[t, i, s] / S[t, a, s]``."""
    S = market.prices
    return S / S[:, market.numeraire : market.numeraire + 1, :]


@dataclass(frozen=True, eq=False)
class Claim:
    """Nonnegative terminal payoff in currency units, E_∞-measurable."""

    payoff: np.ndarray
    name: str = "claim"

    @classmethod
    def for_market(cls, market: Market, payoff, name: str = "claim") -> "Claim":
        payoff = np.array(payoff, dtype=object if market.exact else float)
        if market.exact:
            payoff = _fractions(payoff)
        if payoff.shape != (market.space.n,):
            raise ValidationError(f"payoff has shape {payoff.shape}, expected ({market.space.n},)")
        for s, v in enumerate(payoff):
            if v < 0:
                raise ValidationError(f"claim {name!r} is negative in state {market.space.atoms[s]!r}")
        E = market.evolution
        if not E.is_measurable(payoff, E.T, market.tol):
            raise NotMeasurable(f"claim {name!r} is not determined by the price history")
        return cls(payoff, name)


@dataclass(frozen=True, eq=False)
class Strategy:
    """Holdings ``H[t, i, s]`` in asset units; ``H[t]`` is held over ``(t-1, t]``.

    ``H[0]`` is the initial portfolio.  Predictability: ``H[t]`` is measurable
    w.r.t. the time-``max(t-1, 0)`` partition of :attr:`filtration`.
    """

    holdings: np.ndarray
    filtration: Filtration

    def check_predictable(self, tol=0) -> None:
        H = self.holdings
        for t in range(H.shape[0]):
            k = max(t - 1, 0)
            for i in range(H.shape[1]):
                if not self.filtration.is_measurable(H[t, i], k, tol):
                    raise NotPredictable(f"holdings of asset {i} at t={t} are not F_{k}-measurable", node=(t, i))


@dataclass(frozen=True, eq=False)
class ValueProcess:
    values: np.ndarray  # (T+1, n) discounted values

    @property
    def initial(self):
        return self.values[0]

    def __getitem__(self, t):
        return self.values[t]


def _dot(H_t, P_t) -> np.ndarray:
    return (H_t * P_t).sum(axis=0)


def value_process(strategy: Strategy, market: Market, tol=None) -> ValueProcess:
    """Discounted value by telescoping gains; verifies self-financing."""
    if tol is None:
        tol = market.tol
    H = np.asarray(strategy.holdings)
    P = discount(market)
    if H.shape != P.shape:
        raise ValidationError(f"holdings shape {H.shape} does not match prices {P.shape}")
    if not strategy.filtration.contains(market.evolution):
        raise NotSubfiltration("strategy filtration does not contain the price evolution")
    strategy.check_predictable(tol)
    T = market.T
    V = np.empty((T + 1, market.space.n), dtype=P.dtype if H.dtype == object else float)
    V[0] = _dot(H[0], P[0])
    for t in range(1, T + 1):
        V[t] = V[t - 1] + _dot(H[t], P[t] - P[t - 1])
    for t in range(T):
        before = _dot(H[t], P[t])
        after = _dot(H[t + 1], P[t])
        for s in range(market.space.n):
            if abs(before[s] - after[s]) > tol:
                raise NotSelfFinancing(
                    f"rebalancing at t={t} in state {market.space.atoms[s]!r} changes value "
                    f"from {before[s]} to {after[s]}",
                    node=(t, s),
                )
    return ValueProcess(V)


def strategy_from_units(
    market: Market,
    filtration: Filtration,
    units,
    initial_value=1,
) -> Strategy:
    """Self-financing strategy from non-numéraire holdings.

    ``units[t]`` (shape ``(n_assets, n)``, ``t = 1..T``, index 0 unused) gives
    the holdings chosen at ``t-1``; the numéraire position absorbs the rest of
    the wealth.  ``initial_value`` may be a scalar or a per-state array.
    """
    P = discount(market)
    T, n = market.T, market.space.n
    a = market.numeraire
    exact = market.exact
    H = np.zeros((T + 1,) + P.shape[1:], dtype=object if exact else float)
    if exact:
        H[...] = Fraction(0)
    V = np.empty(n, dtype=H.dtype)
    V[:] = initial_value
    if exact:
        V = np.array([Fraction(v) for v in V], dtype=object)
    for t in range(1, T + 1):
        u = np.array(units[t], dtype=H.dtype)
        if exact:
            u = _fractions(u)
        u[a] = 0
        H[t] = u
        H[t, a] = V - _dot(u, P[t - 1])
        V = _dot(H[t], P[t])
    H[0] = H[1] if T >= 1 else H[0]
    if T == 0:
        H[0, a] = V
    return Strategy(H, filtration)


def buy_and_hold(market: Market, asset: int | str, filtration: Filtration | None = None) -> Strategy:
    i = market.asset_index(asset)
    H = np.zeros(market.prices.shape, dtype=object if market.exact else float)
    if market.exact:
        H[...] = Fraction(0)
    H[:, i, :] = 1
    return Strategy(H, filtration or market.evolution)


def normalize(strategy: Strategy, market: Market) -> Strategy:
    """Shift by ``a - V_0`` numéraire units and divide by ``a``.

    ``a`` is the smallest power of two (``a >= 1``) such that the resulting
    value process is strictly positive at every node.  The shifted process is
    ``(a + gains) / a`` and starts at 1.
    """
    V = value_process(strategy, market).values
    gains = V - V[0][None, :]
    floor = min(gains.ravel())
    if not all(np.isfinite(float(g)) for g in gains.ravel()):
        raise Degenerate("value process is not finite")
    a = 1
    while not a + floor > 0:
        a *= 2
        if a > 2**1100:
            raise Degenerate("no finite shift makes the value process positive")
    H = strategy.holdings.copy()
    H[:, market.numeraire, :] = H[:, market.numeraire, :] + (a - V[0])[None, :]
    if market.exact:
        H = H * Fraction(1, a)
    else:
        H = H / a
    return Strategy(H, strategy.filtration)


def is_normalized(strategy: Strategy, market: Market) -> bool:
    V = value_process(strategy, market).values
    tol = market.tol
    return all(abs(v - 1) <= tol for v in V[0]) and all(v > 0 for v in V.ravel())


def benchmark(V, W) -> np.ndarray:
    """Elementwise ratio ``V / W``; ``W`` must be positive everywhere."""
    V = V.values if isinstance(V, ValueProcess) else np.asarray(V)
    W = W.values if isinstance(W, ValueProcess) else np.asarray(W)
    if not all(w > 0 for w in W.ravel()):
        raise ValidationError("benchmark must be positive at every node")
    return V / W


def nominal(values, market: Market) -> np.ndarray:
    """Currency value ``S^a_t * V_t`` of a discounted ``(T+1, n)`` grid."""
    V = values.values if isinstance(values, ValueProcess) else np.asarray(values)
    return V * market.numeraire_prices()


def random_strategy(market: Market, filtration: Filtration, rng, max_units: int = 3, denominator: int = 4) -> Strategy:
    """Random predictable strategy with small rational unit holdings, value 1 at 0."""
    T, n, N1 = market.T, market.space.n, market.n_assets
    units = [None]
    for t in range(1, T + 1):
        u = np.empty((N1, n), dtype=object if market.exact else float)
        for b, block in enumerate(filtration.blocks(t - 1)):
            for i in range(N1):
                v = Fraction(int(rng.integers(-max_units * denominator, max_units * denominator + 1)), denominator)
                u[i, list(block)] = v if market.exact else float(v)
        units.append(u)
    return strategy_from_units(market, filtration, units, initial_value=1)


@dataclass(frozen=True, eq=False)
class Node:
    """One-step view of a non-terminal block: discounted prices and children."""

    t: int
    block: int
    states: tuple
    children: tuple  # indices of time-(t+1) blocks
    child_states: tuple
    x: np.ndarray  # (n_assets,) discounted prices at the node
    y: np.ndarray  # (m, n_assets) discounted prices at the children
    p: tuple  # conditional probabilities of the children

    @property
    def m(self) -> int:
        return len(self.children)

    def gains(self) -> np.ndarray:
        """(m, n_assets) one-step discounted gains per unit held."""
        return self.y - self.x[None, :]


def market_nodes(market: Market, filtration: Filtration | None = None, P=None) -> list[Node]:
    """All non-terminal nodes of ``filtration`` in time/block order."""
    F = filtration or market.ambient
    if P is None:
        P = discount(market)
    prob = market.space.prob
    out = []
    for t, b in F.nodes():
        block = F.blocks(t)[b]
        kids = F.children(t, b)
        kid_states = tuple(F.blocks(t + 1)[k] for k in kids)
        mass = sum(prob[list(block)])
        p = tuple(sum(prob[list(ks)]) / mass for ks in kid_states)
        x = P[t, :, block[0]]
        y = np.array([P[t + 1, :, ks[0]] for ks in kid_states], dtype=P.dtype)
        out.append(Node(t, b, block, tuple(kids), kid_states, x, y, p))
    return out
