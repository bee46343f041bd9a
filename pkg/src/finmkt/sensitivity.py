"""Information enlargements: sensitivity, efficiency and discount-factor compatibility."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotEmm, NotSubfiltration, ValidationError
from .market import Market, discount
from .noarb import Measure, emm_defects, find_emms, rnp_from_measure
from .probspace import (
    Filtration,
    ImmersionResult,
    conditional_expectation,
    expectation_on_partition,
    is_immersed,
    partition_from_labels,
    sigma_identity,
)


@dataclass(frozen=True, eq=False)
class Signal:
    """Extra information ``Y_t``; a 1-d grid is a time-constant signal."""

    name: str
    values: np.ndarray
    reveal_time: int = 0

    def at(self, t: int) -> np.ndarray:
        v = np.asarray(self.values, dtype=object)
        return v if v.ndim == 1 else v[t]


def enlarge(E: Filtration, signals) -> Filtration:
    """Refine ``E_t`` by the level sets of every signal value observed at times in ``[reveal, t]``."""
    signals = list(signals)
    parts = []
    for t in range(E.T + 1):
        keys = [[b] for b in E.labels[t]]
        for sig in signals:
            v = np.asarray(sig.values, dtype=object)
            if v.shape[-1] != E.n:
                raise ValidationError(f"signal {sig.name!r} is not defined on all {E.n} states")
            if v.ndim == 2 and v.shape[0] != E.T + 1:
                raise ValidationError(f"signal {sig.name!r} has {v.shape[0]} times, expected {E.T + 1}")
            for s_time in range(sig.reveal_time, t + 1):
                row = sig.at(s_time)
                for s in range(E.n):
                    keys[s].append(row[s])
        parts.append(partition_from_labels([tuple(k) for k in keys]))
    return Filtration(parts, E.n)


@dataclass(frozen=True, eq=False)
class SensitivityReport:
    sensitive: bool  # indicator test on terminal price-history atoms
    enlarged_side: bool  # indicator test on blocks of the enlarged filtration
    identity_holds: bool  # E_t = F_t ∩ E_∞ (necessary condition only)
    witness_ii: tuple | None
    witness_iii: tuple | None
    identity_witness: int | None

    @property
    def consistent(self) -> bool:
        """The two indicator tests must agree; a positive verdict also needs the identity."""
        return self.sensitive == self.enlarged_side and (self.identity_holds or not self.sensitive)


def _reverse_check(E: Filtration, F: Filtration, prob, tol):
    """``P(B | E_∞) = P(B | E_t)`` for every block ``B`` of ``F_t``."""
    terminal = E.partitions[E.T]
    for t in range(F.T + 1):
        for B in F.partitions[t]:
            ind = np.zeros(E.n, dtype=prob.dtype)
            ind[list(B)] = 1
            full = expectation_on_partition(ind, terminal, prob)
            now = expectation_on_partition(ind, E.partitions[t], prob)
            for s in range(E.n):
                if abs(full[s] - now[s]) > tol:
                    return (t, B, E.block_of(E.T, s), full[s], now[s])
    return None


def sensitivity_report(market: Market, F: Filtration | None = None, E: Filtration | None = None) -> SensitivityReport:
    F = F or market.ambient
    E = E or market.evolution
    if not F.contains(E) or F.T != E.T:
        raise NotSubfiltration("F does not contain the price evolution")
    space = market.space
    imm: ImmersionResult = is_immersed(E, F, space, market.tol)
    w3 = _reverse_check(E, F, space.prob, market.tol)
    holds, bad_t = sigma_identity(E, F)
    rep = SensitivityReport(imm.immersed, w3 is None, holds, imm.witness, w3, bad_t)
    if not rep.consistent:
        raise AssertionError("sensitivity tests disagree")
    return rep


@dataclass(frozen=True, eq=False)
class EfficiencyVerdict:
    efficient: bool
    emm_exists: bool
    sensitive: bool
    numeraire_invariant: bool


def efficiency_check(market: Market, F: Filtration | None = None) -> EfficiencyVerdict:
    F = F or market.ambient
    sens = sensitivity_report(market, F).sensitive
    verdicts = []
    for b in range(market.n_assets):
        verdicts.append(find_emms(market.with_numeraire(b), F).nonempty)
    exists = verdicts[market.numeraire]
    return EfficiencyVerdict(exists and sens, exists, sens, len(set(verdicts)) == 1)


@dataclass(frozen=True, eq=False)
class CompatLine:
    asset: str
    t: int
    u: int
    block: int
    price: object
    value: object


@dataclass(frozen=True, eq=False)
class SdfReport:
    downward: bool
    upward: bool
    downward_failures: tuple
    upward_failures: tuple


def _compat(P, lam_levels, cond: Filtration, assets, prob_space, tol) -> list[CompatLine]:
    bad = []
    T = P.shape[0] - 1
    for i, name in enumerate(assets):
        for t in range(T + 1):
            for u in range(t, T + 1):
                val = conditional_expectation(lam_levels[u] / lam_levels[t] * P[u, i], t, cond, prob_space)
                for b, block in enumerate(cond.blocks(t)):
                    s = block[0]
                    if abs(val[s] - P[t, i, s]) > tol:
                        bad.append(CompatLine(name, t, u, b, P[t, i, s], val[s]))
    return bad


def sdf_compatibility(
    market: Market,
    F: Filtration | None = None,
    Q_E: Measure | None = None,
    Q_F: Measure | None = None,
) -> SdfReport:
    """Apply F-based discount factors on E (downward) and E-based ones on F (upward)."""
    F = F or market.ambient
    E = market.evolution
    if Q_E is None:
        Q_E = find_emms(market, E).representative
    if Q_F is None:
        Q_F = find_emms(market, F).representative
    if Q_E is None or emm_defects(Q_E, market, E) is not None:
        raise NotEmm("Q_E is not an equivalent martingale measure for the price history")
    if Q_F is None or emm_defects(Q_F, market, F) is not None:
        raise NotEmm("Q_F is not an equivalent martingale measure for the enlarged filtration")
    P = discount(market)
    space = market.space
    lam_F = rnp_from_measure(Q_F, F, space).levels
    lam_E = rnp_from_measure(Q_E, E, space).levels
    down = _compat(P, lam_F, E, market.assets, space, market.tol)
    up = _compat(P, lam_E, F, market.assets, space, market.tol)
    return SdfReport(not down, not up, tuple(down), tuple(up))
