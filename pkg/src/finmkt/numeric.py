"""Number handling and exact linear algebra over the rationals.

Grids are numpy arrays with ``dtype=object`` holding :class:`fractions.Fraction`
in rational mode, or ``float64`` arrays in float mode.  The linear algebra
helpers below always run on exact Fractions; float inputs are converted
losslessly first.
"""
from __future__ import annotations

import re
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

RATIONAL = "rational"
FLOAT = "float"
FLOAT_TOL = 1e-9

_RATIO = re.compile(r"^\s*([+-]?\d+)\s*/\s*(\d+)\s*$")


def parse_number(text, mode: str = RATIONAL):
    """Parse ``"p/q"``, a decimal string, an int or a float into the mode's type."""
    if isinstance(text, (Fraction, int)) and not isinstance(text, bool):
        value = Fraction(text)
    elif isinstance(text, float):
        value = Fraction(text) if mode == RATIONAL else text
    elif isinstance(text, str):
        m = _RATIO.match(text)
        if m:
            den = int(m.group(2))
            if den == 0:
                raise ValueError(f"zero denominator in {text!r}")
            value = Fraction(int(m.group(1)), den)
        else:
            value = Fraction(text.strip())
    else:
        raise TypeError(f"cannot parse number from {text!r}")
    if mode == FLOAT:
        return float(value)
    return value


def format_number(x) -> str:
    """Canonical text form: ``"p/q"`` / ``"p"`` for rationals, repr for floats."""
    if isinstance(x, (Fraction, int)) and not isinstance(x, bool):
        f = Fraction(x)
        return str(f.numerator) if f.denominator == 1 else f"{f.numerator}/{f.denominator}"
    return repr(float(x))


def to_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    return Fraction(float(x))


def is_exact(arr) -> bool:
    a = np.asarray(arr)
    return a.dtype == object


def as_grid(values, mode: str = RATIONAL) -> np.ndarray:
    """Build a grid array of the mode's number type from nested sequences."""
    a = np.asarray(values, dtype=object)
    if mode == RATIONAL:
        out = np.empty(a.shape, dtype=object)
        for idx, v in np.ndenumerate(a):
            out[idx] = parse_number(v, RATIONAL)
        return out
    return np.vectorize(lambda v: parse_number(v, FLOAT), otypes=[float])(a).astype(float)


def default_tol(*arrays) -> float:
    """Zero tolerance when every array is exact, else the float tolerance."""
    return 0 if all(is_exact(a) for a in arrays) else FLOAT_TOL


def like(value, exact: bool):
    return to_fraction(value) if exact else float(value)


# ---------------------------------------------------------------------------
# exact Gaussian elimination

def _frac_matrix(rows: Iterable[Sequence]) -> list[list[Fraction]]:
    return [[to_fraction(v) for v in row] for row in rows]


def rref(matrix: Sequence[Sequence]) -> tuple[list[list[Fraction]], list[int]]:
    """Reduced row echelon form and the pivot columns."""
    m = _frac_matrix(matrix)
    if not m:
        return [], []
    n_rows, n_cols = len(m), len(m[0])
    pivots: list[int] = []
    r = 0
    for c in range(n_cols):
        if r == n_rows:
            break
        piv = next((i for i in range(r, n_rows) if m[i][c] != 0), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        inv = 1 / m[r][c]
        m[r] = [v * inv for v in m[r]]
        for i in range(n_rows):
            if i != r and m[i][c] != 0:
                f = m[i][c]
                m[i] = [a - f * b for a, b in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
    return m, pivots


def rank(matrix: Sequence[Sequence]) -> int:
    if len(matrix) == 0 or len(matrix[0]) == 0:
        return 0
    return len(rref(matrix)[1])


def solve(A: Sequence[Sequence], b: Sequence) -> list[Fraction] | None:
    """One exact solution of ``A x = b`` (free variables set to 0), or None."""
    n_cols = len(A[0]) if len(A) else 0
    aug = [list(row) + [bi] for row, bi in zip(A, b)]
    red, pivots = rref(aug)
    if n_cols in pivots:
        return None
    x = [Fraction(0)] * n_cols
    for row, c in zip(red, pivots):
        x[c] = row[n_cols]
    return x


def nullspace(A: Sequence[Sequence]) -> list[list[Fraction]]:
    """Basis of ``{x : A x = 0}``."""
    n_cols = len(A[0])
    red, pivots = rref(A)
    free = [c for c in range(n_cols) if c not in pivots]
    basis = []
    for f in free:
        v = [Fraction(0)] * n_cols
        v[f] = Fraction(1)
        for row, c in zip(red, pivots):
            v[c] = -row[f]
        basis.append(v)
    return basis


def independent_rows(A: Sequence[Sequence]) -> list[int]:
    """Indices of a maximal set of linearly independent rows (greedy, in order)."""
    At = [list(col) for col in zip(*A)] if len(A) else []
    if not At:
        return []
    return rref(At)[1]


def min_norm_solve(A: Sequence[Sequence], b: Sequence) -> list[Fraction] | None:
    """Minimum-Euclidean-norm exact solution of a consistent system ``A x = b``."""
    if solve(A, b) is None:
        return None
    rows = independent_rows(A)
    if not rows:
        return [Fraction(0)] * (len(A[0]) if len(A) else 0)
    R = _frac_matrix(A[i] for i in rows)
    gram = [[sum(a * c for a, c in zip(ri, rj)) for rj in R] for ri in R]
    z = solve(gram, [to_fraction(b[i]) for i in rows])
    n_cols = len(R[0])
    return [sum(R[k][j] * z[k] for k in range(len(R))) for j in range(n_cols)]
