"""
Exact rational linear algebra on small dense matrices.

Matrices are tuples of row tuples holding ``int`` or ``Fraction`` entries.
Everything here is exact; floating point never enters.
"""

from decimal import Decimal
from fractions import Fraction
from typing import Sequence, Union

Number = Union[int, Fraction]
Row = tuple[Fraction, ...]
Matrix = tuple[Row, ...]

RationalLike = Union[int, str, Fraction, Decimal, float]


def parse_rational(value: RationalLike) -> Fraction:
    """
    Convert user input into an exact Fraction.

    Accepts integers, "p/q" or decimal strings, Decimal and float. Floats are
    read through their shortest decimal representation, so 0.1 becomes 1/10.

    Raises:
        ValueError: If the value is not a finite rational number
    """
    if isinstance(value, bool):
        raise ValueError(f"Not a rational number: {value!r}")
    if isinstance(value, float):
        value = repr(value)
    if isinstance(value, str):
        value = value.strip()
    try:
        result = Fraction(value)
    except (ValueError, ZeroDivisionError, TypeError) as e:
        raise ValueError(f"Not a rational number: {value!r}") from e
    return result


def format_rational(value: Fraction) -> str:
    """Render a Fraction as "p/q" (or "p" for integers)."""
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def as_matrix(rows: Sequence[Sequence[RationalLike]]) -> Matrix:
    return tuple(tuple(Fraction(x) for x in row) for row in rows)


def identity(n: int) -> Matrix:
    return tuple(
        tuple(Fraction(1) if i == j else Fraction(0) for j in range(n)) for i in range(n)
    )


def transpose(a: Sequence[Sequence[Number]]) -> Matrix:
    if not a:
        return ()
    return tuple(tuple(Fraction(a[i][j]) for i in range(len(a))) for j in range(len(a[0])))


def mat_mul(a: Sequence[Sequence[Number]], b: Sequence[Sequence[Number]]) -> Matrix:
    if not a:
        return ()
    inner = len(b)
    cols = len(b[0]) if b else 0
    if len(a[0]) != inner:
        raise ValueError("Matrix shapes do not align")
    out = []
    for row in a:
        nz = [(k, row[k]) for k in range(inner) if row[k] != 0]
        out.append(
            tuple(Fraction(sum((v * b[k][j] for k, v in nz), 0)) for j in range(cols))
        )
    return tuple(out)


def mat_vec(a: Sequence[Sequence[Number]], x: Sequence[Number]) -> tuple[Fraction, ...]:
    return tuple(Fraction(sum((row[k] * x[k] for k in range(len(x))), 0)) for row in a)


def mat_sub(a: Sequence[Sequence[Number]], b: Sequence[Sequence[Number]]) -> Matrix:
    return tuple(
        tuple(Fraction(x) - Fraction(y) for x, y in zip(ra, rb)) for ra, rb in zip(a, b)
    )


def is_zero(a: Sequence[Sequence[Number]]) -> bool:
    return all(x == 0 for row in a for x in row)


def int_determinant(a: Sequence[Sequence[int]]) -> int:
    """Determinant of an integer matrix by fraction-free Bareiss elimination."""
    n = len(a)
    if n == 0:
        return 1
    m = [list(map(int, row)) for row in a]
    sign = 1
    prev = 1
    for k in range(n - 1):
        if m[k][k] == 0:
            for i in range(k + 1, n):
                if m[i][k] != 0:
                    m[k], m[i] = m[i], m[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) // prev
        prev = m[k][k]
    return sign * m[n - 1][n - 1]


def determinant(a: Sequence[Sequence[Number]]) -> Fraction:
    n = len(a)
    m = [[Fraction(x) for x in row] for row in a]
    det = Fraction(1)
    for c in range(n):
        pivot = next((r for r in range(c, n) if m[r][c] != 0), None)
        if pivot is None:
            return Fraction(0)
        if pivot != c:
            m[c], m[pivot] = m[pivot], m[c]
            det = -det
        det *= m[c][c]
        for r in range(c + 1, n):
            f = m[r][c] / m[c][c]
            if f:
                for k in range(c, n):
                    m[r][k] -= f * m[c][k]
    return det


def _row_reduce(m: list[list[Fraction]], n_cols: int) -> list[int]:
    """
    Reduce ``m`` in place to reduced row echelon form on its first ``n_cols``
    columns and return the pivot columns.
    """
    pivots = []
    piv_r = 0
    n_rows = len(m)
    for c in range(n_cols):
        r = next((i for i in range(piv_r, n_rows) if m[i][c] != 0), None)
        if r is None:
            continue
        m[piv_r], m[r] = m[r], m[piv_r]
        p = m[piv_r][c]
        m[piv_r] = [x / p for x in m[piv_r]]
        for i in range(n_rows):
            if i != piv_r and m[i][c] != 0:
                f = m[i][c]
                m[i] = [x - f * y for x, y in zip(m[i], m[piv_r])]
        pivots.append(c)
        piv_r += 1
        if piv_r == n_rows:
            break
    return pivots


def inverse(a: Sequence[Sequence[Number]]) -> Matrix:
    """
    Exact inverse by Gauss-Jordan elimination.

    Raises:
        ZeroDivisionError: If the matrix is singular
    """
    n = len(a)
    m = [[Fraction(x) for x in row] + list(identity(n)[i]) for i, row in enumerate(a)]
    pivots = _row_reduce(m, n)
    if len(pivots) < n:
        raise ZeroDivisionError("Matrix is singular")
    return tuple(tuple(row[n:]) for row in m)


def left_inverse(b: Sequence[Sequence[Number]]) -> Matrix:
    """
    Exact left inverse L (m×n) of a full column rank n×m matrix B, L·B = I.

    Raises:
        ValueError: If B does not have full column rank
    """
    n = len(b)
    m_cols = len(b[0]) if n else 0
    rows = [[Fraction(x) for x in b[i]] + list(identity(n)[i]) for i in range(n)]
    pivots = _row_reduce(rows, m_cols)
    if len(pivots) < m_cols:
        raise ValueError("Basis vectors are linearly dependent")
    return tuple(tuple(rows[i][m_cols:]) for i in range(m_cols))


def is_positive_definite(a: Sequence[Sequence[Number]]) -> bool:
    """Sylvester's criterion on the leading principal minors of a symmetric matrix."""
    n = len(a)
    if any(a[i][j] != a[j][i] for i in range(n) for j in range(n)):
        raise ValueError("Matrix is not symmetric")
    return all(determinant([row[:k] for row in a[:k]]) > 0 for k in range(1, n + 1))
