"""Finite filtered probability spaces.

States are indexed ``0..n-1``.  A filtration is a list of partitions of the
state set, one per time ``0..T``, each refining the previous one.  Random
variables are length-``n`` arrays and processes are ``(T+1, n)`` grids.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .errors import NonTrivialStart, NotAdapted, NotSubfiltration, ValidationError
from .numeric import FLOAT_TOL, default_tol, is_exact, to_fraction

MARTINGALE = "martingale"
SUPERMARTINGALE = "supermartingale"
SUBMARTINGALE = "submartingale"
NEITHER = "neither"


@dataclass(frozen=True, eq=False)
class FiniteProbSpace:
    atoms: tuple
    prob: np.ndarray

    def __post_init__(self):
        atoms = tuple(self.atoms)
        prob = np.asarray(self.prob, dtype=object if is_exact(self.prob) else float)
        if prob.dtype == object:
            prob = np.array([to_fraction(v) for v in prob] + [None], dtype=object)[:-1]
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "prob", prob)
        if len(atoms) != len(prob):
            raise ValidationError(f"{len(atoms)} atoms but {len(prob)} weights")
        if len(set(atoms)) != len(atoms):
            raise ValidationError("duplicate state identifiers")
        if len(atoms) == 0:
            raise ValidationError("empty state space")
        for a, p in zip(atoms, prob):
            if not p > 0:
                raise ValidationError(f"state {a!r} has non-positive probability {p}")
        total = sum(prob)
        if self.exact:
            if total != 1:
                raise ValidationError(f"probabilities sum to {total}, not 1")
        elif abs(total - 1) > 1e-12:
            raise ValidationError(f"probabilities sum to {total}, not 1")

    @property
    def n(self) -> int:
        return len(self.atoms)

    @property
    def exact(self) -> bool:
        return is_exact(self.prob)

    @property
    def tol(self):
        return 0 if self.exact else FLOAT_TOL

    def index(self, atom) -> int:
        return self.atoms.index(atom)

    def reweighted(self, weights) -> "FiniteProbSpace":
        """Same atoms under another (equivalent) measure."""
        return FiniteProbSpace(self.atoms, np.asarray(weights, dtype=self.prob.dtype))

    def expectation(self, X):
        return sum(self.prob * np.asarray(X))

    def mass(self, block: Iterable[int]):
        return sum(self.prob[list(block)])


def _canonical_partition(blocks: Iterable[Iterable[int]]) -> tuple[tuple[int, ...], ...]:
    out = [tuple(sorted(int(s) for s in b)) for b in blocks]
    out = [b for b in out if b]
    out.sort(key=lambda b: b[0])
    return tuple(out)


def partition_from_labels(labels: Sequence) -> tuple[tuple[int, ...], ...]:
    """Group state indices by equal label."""
    groups: dict = {}
    for s, lab in enumerate(labels):
        groups.setdefault(lab, []).append(s)
    return _canonical_partition(groups.values())


class Filtration:
    """Time-indexed refining partitions of ``{0, ..., n-1}``."""

    def __init__(self, partitions: Sequence[Iterable[Iterable[int]]], n: int | None = None):
        parts = tuple(_canonical_partition(p) for p in partitions)
        if not parts:
            raise ValidationError("a filtration needs at least one partition")
        if n is None:
            n = sum(len(b) for b in parts[0])
        self.n = n
        self.partitions = parts
        labels = []
        for t, part in enumerate(parts):
            lab = np.full(n, -1, dtype=int)
            for k, block in enumerate(part):
                for s in block:
                    if s < 0 or s >= n or lab[s] != -1:
                        raise ValidationError(f"partition at t={t} is not a partition of {n} states")
                    lab[s] = k
            if (lab < 0).any():
                raise ValidationError(f"partition at t={t} does not cover all states")
            labels.append(lab)
        self.labels = labels
        parents = []
        for t in range(1, len(parts)):
            par = []
            for block in parts[t]:
                owners = {int(labels[t - 1][s]) for s in block}
                if len(owners) != 1:
                    raise ValidationError(f"partition at t={t} does not refine t={t - 1}")
                par.append(owners.pop())
            parents.append(par)
        self._parents = parents

    @classmethod
    def from_labels(cls, labels: Sequence[Sequence]) -> "Filtration":
        return cls([partition_from_labels(row) for row in labels], n=len(labels[0]))

    @classmethod
    def trivial(cls, n: int, T: int) -> "Filtration":
        return cls([[range(n)]] * (T + 1), n=n)

    @property
    def T(self) -> int:
        return len(self.partitions) - 1

    def blocks(self, t: int) -> tuple[tuple[int, ...], ...]:
        return self.partitions[t]

    def block_of(self, t: int, state: int) -> int:
        return int(self.labels[t][state])

    def parent(self, t: int, b: int) -> int:
        """Index of the time-(t-1) block containing block ``b`` of time ``t``."""
        return self._parents[t - 1][b]

    def children(self, t: int, b: int) -> list[int]:
        """Indices of the time-(t+1) blocks inside block ``b`` of time ``t``."""
        return [k for k, p in enumerate(self._parents[t]) if p == b]

    def nodes(self):
        """All non-terminal ``(t, block)`` pairs in time order."""
        for t in range(self.T):
            for b in range(len(self.partitions[t])):
                yield t, b

    def is_measurable(self, X, t: int, tol=0) -> bool:
        X = np.asarray(X)
        for block in self.partitions[t]:
            ref = X[block[0]]
            for s in block[1:]:
                if abs(X[s] - ref) > tol:
                    return False
        return True

    def contains(self, other: "Filtration") -> bool:
        """True when every partition of ``other`` is coarser than ours (other ⊆ self)."""
        if other.n != self.n or other.T != self.T:
            return False
        for t in range(self.T + 1):
            for block in self.partitions[t]:
                if len({int(other.labels[t][s]) for s in block}) != 1:
                    return False
        return True

    def truncated(self, T: int) -> "Filtration":
        return Filtration(self.partitions[: T + 1], n=self.n)

    def __eq__(self, other):
        return isinstance(other, Filtration) and self.n == other.n and self.partitions == other.partitions

    def __hash__(self):
        return hash(self.partitions)

    def __repr__(self):
        return f"Filtration(T={self.T}, sizes={[len(p) for p in self.partitions]})"


@dataclass(frozen=True, eq=False)
class AdaptedProcess:
    values: np.ndarray
    filtration: Filtration
    tol: float = 0

    def __post_init__(self):
        values = np.asarray(self.values)
        object.__setattr__(self, "values", values)
        if values.shape != (self.filtration.T + 1, self.filtration.n):
            raise ValidationError(
                f"process grid has shape {values.shape}, expected {(self.filtration.T + 1, self.filtration.n)}"
            )
        for t in range(self.filtration.T + 1):
            if not self.filtration.is_measurable(values[t], t, self.tol):
                raise NotAdapted(f"value at t={t} is not constant on the time-{t} blocks")

    def at(self, t: int) -> np.ndarray:
        return self.values[t]


def conditional_expectation(X, t: int, filtration: Filtration, space: FiniteProbSpace) -> np.ndarray:
    """E(X | F_t) as a length-n array, constant on the time-t blocks."""
    X = np.asarray(X)
    return expectation_on_partition(X, filtration.partitions[t], space.prob)


def expectation_on_partition(X, partition, prob) -> np.ndarray:
    X = np.asarray(X)
    out = np.empty(len(X), dtype=object if (is_exact(X) and is_exact(prob)) else float)
    for block in partition:
        idx = list(block)
        w = prob[idx]
        out[idx] = sum(w * X[idx]) / sum(w)
    return out


@dataclass(frozen=True)
class Classification:
    kind: str
    defects: np.ndarray  # (T, n): E(X_{t+1} | F_t) - X_t

    @property
    def is_martingale(self) -> bool:
        return self.kind == MARTINGALE

    @property
    def is_supermartingale(self) -> bool:
        return self.kind in (MARTINGALE, SUPERMARTINGALE)

    @property
    def is_submartingale(self) -> bool:
        return self.kind in (MARTINGALE, SUBMARTINGALE)

    def worst(self, filtration: Filtration, sign: int = 1):
        """``(t, block, defect)`` with the largest ``sign * defect``, or None."""
        best = None
        for t in range(self.defects.shape[0]):
            for b, block in enumerate(filtration.blocks(t)):
                d = self.defects[t][block[0]]
                if best is None or sign * d > sign * best[2]:
                    best = (t, b, d)
        return best


def classify_process(X, filtration: Filtration, space: FiniteProbSpace, tol=None) -> Classification:
    """Label an adapted process as martingale / super / sub / neither."""
    values = X.values if isinstance(X, AdaptedProcess) else np.asarray(X)
    if tol is None:
        tol = default_tol(values, space.prob)
    AdaptedProcess(values, filtration, tol)
    T = filtration.T
    defects = np.empty((T, filtration.n), dtype=object if tol == 0 else float)
    for t in range(T):
        defects[t] = conditional_expectation(values[t + 1], t, filtration, space) - values[t]
    flat = list(defects.ravel())
    if all(abs(d) <= tol for d in flat):
        kind = MARTINGALE
    elif all(d <= tol for d in flat):
        kind = SUPERMARTINGALE
    elif all(d >= -tol for d in flat):
        kind = SUBMARTINGALE
    else:
        kind = NEITHER
    return Classification(kind, defects)


def natural_filtration(prices) -> Filtration:
    """Partition states by identical price history on ``[0, t]``.

    ``prices`` has shape ``(T+1, n_assets, n_states)``.
    """
    prices = np.asarray(prices)
    T1, _, n = prices.shape
    first = [tuple(prices[0, :, s]) for s in range(n)]
    if len(set(first)) != 1:
        raise NonTrivialStart("time-0 prices differ across states")
    labels = []
    for t in range(T1):
        labels.append([tuple(prices[: t + 1, :, s].ravel()) for s in range(n)])
    return Filtration.from_labels(labels)


def meet_partition(p1, p2, n: int) -> tuple[tuple[int, ...], ...]:
    """Finest partition coarser than both (atoms of the σ-algebra intersection)."""
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for part in (p1, p2):
        for block in part:
            r = find(block[0])
            for s in block[1:]:
                parent[find(s)] = r
    return partition_from_labels([find(s) for s in range(n)])


@dataclass(frozen=True)
class ImmersionResult:
    immersed: bool
    witness: tuple | None = None  # (t, E_inf atom, F_t block, P(A|F block), P(A|E block))
    identity_holds: bool = True  # E_t = F_t ∩ E_∞ for every t
    identity_witness: int | None = None  # first t where it fails

    def __bool__(self):
        return self.immersed


def _check_subfiltration(E: Filtration, F: Filtration) -> None:
    if E.n != F.n or E.T != F.T:
        raise NotSubfiltration("filtrations live on different spaces or horizons")
    if not F.contains(E):
        raise NotSubfiltration("F does not refine E at every time")


def sigma_identity(E: Filtration, F: Filtration) -> tuple[bool, int | None]:
    """Check ``E_t = F_t ∩ E_∞`` for all t; returns (holds, first failing t)."""
    terminal = E.partitions[E.T]
    for t in range(E.T + 1):
        if meet_partition(F.partitions[t], terminal, E.n) != E.partitions[t]:
            return False, t
    return True, None


def is_immersed(E: Filtration, F: Filtration, space: FiniteProbSpace, tol=None) -> ImmersionResult:
    """Test whether ``E`` is immersed in ``F`` under ``space``'s measure.

    Compares ``P(A | F_t)`` with ``P(A | E_t)`` for every atom ``A`` of the
    terminal E-partition; by linearity this covers every E_∞-measurable
    variable.
    """
    _check_subfiltration(E, F)
    if tol is None:
        tol = space.tol
    prob = space.prob
    witness = None
    for t in range(E.T + 1):
        for A in E.partitions[E.T]:
            ind = np.zeros(E.n, dtype=prob.dtype)
            ind[list(A)] = 1
            given_F = expectation_on_partition(ind, F.partitions[t], prob)
            given_E = expectation_on_partition(ind, E.partitions[t], prob)
            for fb, block in enumerate(F.partitions[t]):
                s = block[0]
                if abs(given_F[s] - given_E[s]) > tol:
                    witness = (t, A, block, given_F[s], given_E[s])
                    break
            if witness:
                break
        if witness:
            break
    holds, bad_t = sigma_identity(E, F)
    return ImmersionResult(witness is None, witness, holds, bad_t)
