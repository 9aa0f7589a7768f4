"""Exact integer-lattice geometry: point sets, dilation matrices and digit sets."""

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Iterator, Sequence, Union

from multisub.errors import DigitSetError, DimensionError
from multisub.rational import Matrix, int_determinant, inverse, mat_mul

Point = tuple[int, ...]


def as_point(coords: Union[int, Iterable[int]]) -> Point:
    """Normalize an int or an iterable of ints to a lattice point tuple."""
    if isinstance(coords, int):
        return (coords,)
    point = tuple(coords)
    for x in point:
        if isinstance(x, bool) or int(x) != x:
            raise ValueError(f"Lattice coordinates must be integers: {point!r}")
    return tuple(int(x) for x in point)


def add(p: Point, q: Point) -> Point:
    return tuple(a + b for a, b in zip(p, q))


def sub(p: Point, q: Point) -> Point:
    return tuple(a - b for a, b in zip(p, q))


@dataclass(frozen=True)
class LatticeSet:
    """
    Finite set of integer points of a common dimension.

    Points are deduplicated and stored in lexicographic order; every matrix
    indexed by a LatticeSet uses this order.
    """

    points: tuple[Point, ...]
    dim: int

    @classmethod
    def of(cls, points: Iterable, dim: int | None = None) -> "LatticeSet":
        pts = sorted({as_point(p) for p in points})
        if dim is None:
            if not pts:
                raise DimensionError("Cannot infer the dimension of an empty set")
            dim = len(pts[0])
        if dim < 1:
            raise DimensionError("Lattice dimension must be at least 1")
        for p in pts:
            if len(p) != dim:
                raise DimensionError(f"Point {p} does not have dimension {dim}")
        return cls(points=tuple(pts), dim=dim)

    @classmethod
    def origin(cls, dim: int) -> "LatticeSet":
        return cls(points=((0,) * dim,), dim=dim)

    @cached_property
    def _members(self) -> frozenset:
        return frozenset(self.points)

    def __iter__(self) -> Iterator[Point]:
        return iter(self.points)

    def __len__(self) -> int:
        return len(self.points)

    def __contains__(self, point: object) -> bool:
        return point in self._members

    def index(self, point: Point) -> int:
        return self._index[point]

    @cached_property
    def _index(self) -> dict[Point, int]:
        return {p: i for i, p in enumerate(self.points)}

    def union(self, other: "LatticeSet") -> "LatticeSet":
        _check_dims(self, other)
        return LatticeSet.of(self._members | other._members, self.dim)

    def issubset(self, other: "LatticeSet") -> bool:
        return self._members <= other._members

    def negate(self) -> "LatticeSet":
        return LatticeSet.of((tuple(-x for x in p) for p in self.points), self.dim)

    def translate(self, shift: Point) -> "LatticeSet":
        return LatticeSet.of((add(p, shift) for p in self.points), self.dim)

    def norm2_max(self) -> float:
        """Largest Euclidean norm over the points (0.0 for the empty set)."""
        return max((sum(x * x for x in p) ** 0.5 for p in self.points), default=0.0)


def _check_dims(*sets: LatticeSet) -> None:
    dims = {s.dim for s in sets}
    if len(dims) > 1:
        raise DimensionError(f"Dimension mismatch: {sorted(dims)}")


@dataclass(frozen=True)
class IntMatrix:
    """Square integer matrix with cached exact determinant and inverse."""

    rows: tuple[tuple[int, ...], ...]

    @classmethod
    def of(cls, rows: Union[int, Sequence[Sequence[int]]]) -> "IntMatrix":
        if isinstance(rows, int):
            rows = [[rows]]
        normalized = tuple(as_point(row) for row in rows)
        n = len(normalized)
        if n == 0 or any(len(row) != n for row in normalized):
            raise DimensionError("Dilation matrices must be square and non-empty")
        return cls(rows=normalized)

    @classmethod
    def scalar(cls, value: int, dim: int) -> "IntMatrix":
        return cls.of([[value if i == j else 0 for j in range(dim)] for i in range(dim)])

    @property
    def dim(self) -> int:
        return len(self.rows)

    @cached_property
    def det(self) -> int:
        return int_determinant(self.rows)

    @cached_property
    def inverse(self) -> Matrix:
        return inverse(self.rows)

    @cached_property
    def adjugate(self) -> tuple[tuple[int, ...], ...]:
        """Integer adjugate, adj(M) = det(M) * M^-1."""
        return tuple(tuple(int(x * self.det) for x in row) for row in self.inverse)

    def __matmul__(self, other: "IntMatrix") -> "IntMatrix":
        if self.dim != other.dim:
            raise DimensionError("Dimension mismatch in matrix product")
        return IntMatrix.of([[int(x) for x in row] for row in mat_mul(self.rows, other.rows)])

    def apply(self, point: Point) -> Point:
        return tuple(sum(r * x for r, x in zip(row, point)) for row in self.rows)

    def apply_inverse(self, point: Point) -> tuple[Fraction, ...]:
        return tuple(sum((r * x for r, x in zip(row, point)), Fraction(0)) for row in self.inverse)

    def integral_preimage(self, point: Point) -> Point | None:
        """Return M^-1 x if it is an integer point, else None."""
        det = self.det
        adj_x = [sum(r * x for r, x in zip(row, point)) for row in self.adjugate]
        if any(v % det for v in adj_x):
            return None
        return tuple(v // det for v in adj_x)

    def coset_key(self, point: Point) -> Point:
        """A key equal for two points exactly when they agree modulo M Z^s."""
        d = abs(self.det)
        return tuple(sum(r * x for r, x in zip(row, point)) % d for row in self.adjugate)

    def as_lists(self) -> list[list[int]]:
        return [list(row) for row in self.rows]


def minkowski_sum(a: LatticeSet, b: LatticeSet) -> LatticeSet:
    """Return {x + y : x in a, y in b}."""
    _check_dims(a, b)
    return LatticeSet.of((add(x, y) for x in a for y in b), a.dim)


def image_lattice(m: IntMatrix, x: LatticeSet) -> LatticeSet:
    if m.dim != x.dim:
        raise DimensionError("Dimension mismatch between matrix and point set")
    return LatticeSet.of((m.apply(p) for p in x), x.dim)


def preimage_lattice(m: IntMatrix, x: LatticeSet) -> LatticeSet:
    """Return {alpha in Z^s : M alpha in X}, decided exactly."""
    if m.dim != x.dim:
        raise DimensionError("Dimension mismatch between matrix and point set")
    pre = (m.integral_preimage(p) for p in x)
    return LatticeSet.of((p for p in pre if p is not None), x.dim)


def digit_set(m: IntMatrix) -> LatticeSet:
    """
    Standard digit set D = Z^s ∩ M[0,1)^s.

    Enumerates the bounding box of the parallelepiped spanned by the columns
    of M and keeps points whose preimage lies in the half-open unit cube.

    Raises:
        DigitSetError: If |det M| < 2
    """
    det = m.det
    if abs(det) < 2:
        raise DigitSetError(f"|det M| = {abs(det)}: not expanding enough to carry digits")
    s = m.dim
    corners = [m.apply(v) for v in itertools.product((0, 1), repeat=s)]
    lo = [min(c[i] for c in corners) for i in range(s)]
    hi = [max(c[i] for c in corners) for i in range(s)]
    digits = []
    for x in itertools.product(*(range(lo[i], hi[i] + 1) for i in range(s))):
        y = m.apply_inverse(x)
        if all(0 <= t < 1 for t in y):
            digits.append(x)
    result = LatticeSet.of(digits, s)
    if len(result) != abs(det):
        raise DigitSetError(f"Found {len(result)} digits, expected |det M| = {abs(det)}")
    return result


def verify_digit_set(m: IntMatrix, digits: LatticeSet) -> bool:
    """True iff ``digits`` is a complete set of representatives of Z^s / M Z^s."""
    if m.dim != digits.dim or len(digits) != abs(m.det):
        return False
    keys = {m.coset_key(d) for d in digits}
    return len(keys) == len(digits)
