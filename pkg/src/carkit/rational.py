"""Exact rational linear algebra.

Everything here works on :class:`fractions.Fraction` values so that the
CAR characterizations (which are exact algebraic statements) are never
decided by a floating-point tolerance.  Sizes are tiny (a few dozen rows
at most), so plain lists and Gauss-Jordan elimination are fine.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction
from typing import Iterable, Optional, Sequence, Union

from carkit.errors import DimensionMismatch

RationalLike = Union[Fraction, int, str, Decimal, float]
Vector = tuple[Fraction, ...]


def to_fraction(value: RationalLike) -> Fraction:
    """Convert ``value`` to an exact Fraction.

    Strings may be ``"n/d"`` or decimal literals; Decimals expand exactly.
    Floats are converted by their exact binary value.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not probabilities")
    if isinstance(value, (int, Decimal)):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, float):
        return Fraction(value)
    raise TypeError(f"cannot interpret {value!r} as a rational")


def fraction_str(value: Fraction) -> str:
    return str(value)


def _vec(values: Iterable[RationalLike]) -> Vector:
    return tuple(to_fraction(v) for v in values)


@dataclass(frozen=True)
class RationalMatrix:
    """Dense row-major matrix of Fractions."""

    rows: int
    cols: int
    entries: tuple[Fraction, ...]

    def __post_init__(self) -> None:
        if self.rows <= 0 or self.cols <= 0:
            raise DimensionMismatch("matrix dimensions must be positive")
        if len(self.entries) != self.rows * self.cols:
            raise DimensionMismatch(
                f"expected {self.rows * self.cols} entries, got {len(self.entries)}"
            )

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[RationalLike]]) -> "RationalMatrix":
        if not rows:
            raise DimensionMismatch("matrix needs at least one row")
        width = len(rows[0])
        if any(len(r) != width for r in rows):
            raise DimensionMismatch("ragged rows")
        flat = tuple(to_fraction(v) for r in rows for v in r)
        return cls(len(rows), width, flat)

    @classmethod
    def identity(cls, n: int) -> "RationalMatrix":
        return cls.from_rows([[int(i == j) for j in range(n)] for i in range(n)])

    def __getitem__(self, ij: tuple[int, int]) -> Fraction:
        i, j = ij
        return self.entries[i * self.cols + j]

    def row(self, i: int) -> Vector:
        return self.entries[i * self.cols:(i + 1) * self.cols]

    def to_rows(self) -> list[Vector]:
        return [self.row(i) for i in range(self.rows)]

    def column(self, j: int) -> Vector:
        return tuple(self[i, j] for i in range(self.rows))

    def transpose(self) -> "RationalMatrix":
        return RationalMatrix.from_rows([self.column(j) for j in range(self.cols)])

    def select_rows(self, indices: Sequence[int]) -> "RationalMatrix":
        return RationalMatrix.from_rows([self.row(i) for i in indices])

    def apply(self, x: Sequence[RationalLike]) -> Vector:
        x = _vec(x)
        if len(x) != self.cols:
            raise DimensionMismatch(f"vector of length {len(x)} for {self.cols} columns")
        return tuple(sum((a * b for a, b in zip(self.row(i), x)), Fraction(0))
                     for i in range(self.rows))

    def rank(self) -> int:
        _, pivots = rref(self.to_rows())
        return len(pivots)

    def is_square(self) -> bool:
        return self.rows == self.cols


def rref(rows: Sequence[Sequence[Fraction]]) -> tuple[list[list[Fraction]], list[int]]:
    """Reduced row echelon form; returns (matrix, pivot columns)."""
    m = [list(r) for r in rows]
    if not m:
        return m, []
    n_rows, n_cols = len(m), len(m[0])
    pivots: list[int] = []
    r = 0
    for c in range(n_cols):
        pivot = next((i for i in range(r, n_rows) if m[i][c] != 0), None)
        if pivot is None:
            continue
        m[r], m[pivot] = m[pivot], m[r]
        p = m[r][c]
        m[r] = [v / p for v in m[r]]
        for i in range(n_rows):
            if i != r and m[i][c] != 0:
                f = m[i][c]
                m[i] = [a - f * b for a, b in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
        if r == n_rows:
            break
    return m, pivots


def nullspace(matrix: RationalMatrix) -> list[Vector]:
    """Basis of {x : A x = 0}, one vector per free column."""
    reduced, pivots = rref(matrix.to_rows())
    free = [c for c in range(matrix.cols) if c not in pivots]
    basis = []
    for f in free:
        x = [Fraction(0)] * matrix.cols
        x[f] = Fraction(1)
        for r, pc in enumerate(pivots):
            x[pc] = -reduced[r][f]
        basis.append(tuple(x))
    return basis


@dataclass(frozen=True)
class LinSolveResult:
    """Outcome of an exact linear solve.

    ``kind`` is ``"NoSolution"``, ``"Unique"`` or ``"Family"``.  For a family,
    ``solution`` is a particular solution and ``basis`` spans the nullspace.
    """

    kind: str
    solution: Optional[Vector] = None
    basis: tuple[Vector, ...] = field(default_factory=tuple)


def solve(a: RationalMatrix, b: Sequence[RationalLike]) -> LinSolveResult:
    b = _vec(b)
    if len(b) != a.rows:
        raise DimensionMismatch(f"right-hand side has length {len(b)}, matrix has {a.rows} rows")
    augmented = [list(a.row(i)) + [b[i]] for i in range(a.rows)]
    reduced, pivots = rref(augmented)
    if a.cols in pivots:
        return LinSolveResult("NoSolution")
    x = [Fraction(0)] * a.cols
    for r, pc in enumerate(pivots):
        x[pc] = reduced[r][a.cols]
    basis = tuple(nullspace(a))
    if basis:
        return LinSolveResult("Family", tuple(x), basis)
    return LinSolveResult("Unique", tuple(x))


def invert(a: RationalMatrix) -> RationalMatrix:
    from carkit.errors import SingularMatrix

    if not a.is_square():
        raise SingularMatrix("only square matrices can be inverted")
    n = a.rows
    augmented = [list(a.row(i)) + [Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    reduced, pivots = rref(augmented)
    if pivots[:n] != list(range(n)):
        raise SingularMatrix("matrix is singular")
    return RationalMatrix.from_rows([row[n:] for row in reduced])


# -- linear programming -----------------------------------------------------

def feasible_point(a_eq: Sequence[Sequence[RationalLike]],
                   b_eq: Sequence[RationalLike]) -> Optional[Vector]:
    """Find x >= 0 with ``a_eq @ x == b_eq`` by phase-1 simplex, or None.

    Bland's rule guarantees termination; all pivots are exact.
    """
    rows = [[to_fraction(v) for v in r] for r in a_eq]
    rhs = _vec(b_eq)
    if len(rows) != len(rhs):
        raise DimensionMismatch("constraint rows and right-hand side differ in length")
    if not rows:
        raise DimensionMismatch("need at least one equality constraint")
    n = len(rows[0])
    m = len(rows)
    for i in range(m):
        if rhs[i] < 0:
            rows[i] = [-v for v in rows[i]]
    rhs = tuple(abs(v) for v in rhs)

    # tableau columns: n originals, m artificials, then rhs
    tab = [rows[i] + [Fraction(int(i == k)) for k in range(m)] + [rhs[i]] for i in range(m)]
    basis = [n + i for i in range(m)]
    width = n + m
    # reduced costs of the phase-1 objective (minimize sum of artificials)
    cost = [Fraction(0)] * (width + 1)
    for i in range(m):
        for j in range(width + 1):
            cost[j] -= tab[i][j]
    for k in range(m):
        cost[n + k] += 1

    while True:
        entering = next((j for j in range(width) if cost[j] < 0), None)
        if entering is None:
            break
        best = None
        for i in range(m):
            if tab[i][entering] > 0:
                ratio = tab[i][width] / tab[i][entering]
                if best is None or ratio < best[0] or (ratio == best[0] and basis[i] < basis[best[1]]):
                    best = (ratio, i)
        if best is None:  # unbounded direction cannot happen in phase 1
            break
        _, leave = best
        p = tab[leave][entering]
        tab[leave] = [v / p for v in tab[leave]]
        for i in range(m):
            if i != leave and tab[i][entering] != 0:
                f = tab[i][entering]
                tab[i] = [x - f * y for x, y in zip(tab[i], tab[leave])]
        f = cost[entering]
        cost = [x - f * y for x, y in zip(cost, tab[leave])]
        basis[leave] = entering

    if cost[width] != 0:  # -(sum of artificials) at optimum
        return None
    x = [Fraction(0)] * n
    for i, bvar in enumerate(basis):
        if bvar < n:
            x[bvar] = tab[i][width]
    return tuple(x)


# -- dependence certificates ------------------------------------------------

@dataclass(frozen=True)
class DependenceCertificate:
    """Coefficients witnessing a dependence among a list of rows.

    ``kind`` is ``"LinearNotAffine"`` (the combination vanishes while the
    coefficients do not sum to zero), ``"AffineNonnegative"`` (coefficients
    sum to zero and the combination is >= 0 with a positive entry at
    ``column``), or ``"None"`` when no certificate of the requested kind
    exists.
    """

    kind: str
    coefficients: Optional[Vector] = None
    combination: Optional[Vector] = None
    column: Optional[int] = None

    def __bool__(self) -> bool:
        return self.kind != "None"

    def verify(self, rows: Sequence[Sequence[RationalLike]]) -> bool:
        """Re-check the certificate against ``rows`` with exact arithmetic."""
        if self.kind == "None":
            return True
        lam = self.coefficients
        vecs = [_vec(r) for r in rows]
        if lam is None or len(lam) != len(vecs):
            return False
        combo = _combine(lam, vecs)
        if self.kind == "LinearNotAffine":
            return any(lam) and sum(lam) != 0 and all(v == 0 for v in combo)
        if self.kind == "AffineNonnegative":
            j = self.column
            return (sum(lam) == 0 and all(v >= 0 for v in combo)
                    and j is not None and combo[j] > 0
                    and (self.combination is None or tuple(self.combination) == combo))
        return False


NO_CERTIFICATE = DependenceCertificate("None")


def _combine(lam: Sequence[Fraction], vecs: Sequence[Vector]) -> Vector:
    width = len(vecs[0])
    return tuple(sum((l * v[j] for l, v in zip(lam, vecs)), Fraction(0)) for j in range(width))


def affine_dependence(rows: Sequence[Sequence[RationalLike]]) -> DependenceCertificate:
    """Look for lambda with sum(lambda_i v_i) = 0 and sum(lambda_i) != 0.

    Such a lambda exists exactly when ``rows @ gamma = 1`` is inconsistent,
    so it is the certificate that some subset of the rows is linearly but
    not affinely dependent.  The returned coefficients are scaled to sum to 1.
    """
    vecs = [_vec(r) for r in rows]
    if not vecs:
        raise DimensionMismatch("need at least one row")
    # nullspace of the transpose: columns of V^T are the rows
    vt = RationalMatrix.from_rows([[v[j] for v in vecs] for j in range(len(vecs[0]))])
    for lam in nullspace(vt):
        total = sum(lam)
        if total != 0:
            scaled = tuple(l / total for l in lam)
            return DependenceCertificate("LinearNotAffine", scaled, _combine(scaled, vecs))
    # the nullspace basis spans every dependence; if all have zero sum, so does any combination
    return NO_CERTIFICATE


def nonneg_affine_combination(rows: Sequence[Sequence[RationalLike]],
                              j_star: int) -> DependenceCertificate:
    """Find an affine combination u of ``rows`` with u >= 0 and u[j_star] > 0.

    The strict inequality is encoded as ``u[j_star] >= 1``; the feasible set
    is a cone, so this loses nothing.
    """
    vecs = [_vec(r) for r in rows]
    if not vecs:
        raise DimensionMismatch("need at least one row")
    k, n = len(vecs), len(vecs[0])
    if not 0 <= j_star < n:
        raise IndexError(f"column {j_star} out of range for {n} columns")
    # variables: lambda+ (k), lambda- (k), slack s_j >= 0 (n)
    a_eq = [[Fraction(1)] * k + [Fraction(-1)] * k + [Fraction(0)] * n]
    b_eq = [Fraction(0)]
    for j in range(n):
        row = [v[j] for v in vecs] + [-v[j] for v in vecs]
        row += [Fraction(-1) if jj == j else Fraction(0) for jj in range(n)]
        a_eq.append(row)
        b_eq.append(Fraction(1) if j == j_star else Fraction(0))
    x = feasible_point(a_eq, b_eq)
    if x is None:
        return NO_CERTIFICATE
    lam = tuple(x[i] - x[k + i] for i in range(k))
    return DependenceCertificate("AffineNonnegative", lam, _combine(lam, vecs), j_star)
