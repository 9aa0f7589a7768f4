"""
Scheme-set data model: masks, subdivision operators and their validation.

A subdivision operator S = (a, M) acts on sequences by
S c(alpha) = sum_beta a(alpha - M beta) c(beta). All coefficients are exact
rationals.
"""

import itertools
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from multisub.errors import (
    BudgetExceededError,
    DimensionError,
    DigitSetError,
    SchemeValidationError,
)
from multisub.lattice import (
    IntMatrix,
    LatticeSet,
    Point,
    add,
    as_point,
    digit_set,
    sub,
    verify_digit_set,
)
from multisub.rational import RationalLike, is_positive_definite, mat_mul, parse_rational, transpose

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Mask:
    """
    Finitely supported exact mask.

    Stored coefficients are nonzero, so the support is exactly the key set.
    ``shift`` records the translation applied by :meth:`normalized`.
    """

    coefficients: tuple[tuple[Point, Fraction], ...]
    dim: int
    shift: Point = ()

    @classmethod
    def of(cls, values: Mapping, dim: Optional[int] = None) -> "Mask":
        coeffs: dict[Point, Fraction] = {}
        for point, value in values.items():
            p = as_point(point)
            v = value if isinstance(value, Fraction) else parse_rational(value)
            if v != 0:
                coeffs[p] = coeffs.get(p, Fraction(0)) + v
        coeffs = {p: v for p, v in coeffs.items() if v != 0}
        if not coeffs:
            raise SchemeValidationError("Mask has no nonzero coefficients")
        dims = {len(p) for p in coeffs}
        if dim is None:
            dim = dims.pop() if len(dims) == 1 else 0
        if dims - {dim} or dim < 1:
            raise DimensionError("Mask points have inconsistent dimensions")
        return cls(coefficients=tuple(sorted(coeffs.items())), dim=dim, shift=(0,) * dim)

    @cached_property
    def values(self) -> dict[Point, Fraction]:
        return dict(self.coefficients)

    @cached_property
    def support(self) -> LatticeSet:
        return LatticeSet.of((p for p, _ in self.coefficients), self.dim)

    def __getitem__(self, point: Point) -> Fraction:
        return self.values.get(point, Fraction(0))

    @property
    def contains_origin(self) -> bool:
        return (0,) * self.dim in self.values

    def is_nonnegative(self) -> bool:
        return all(v >= 0 for _, v in self.coefficients)

    def normalized(self) -> "Mask":
        """
        Return a mask with 0 in its support.

        A mask missing the origin is translated so that its lexicographically
        smallest support point lands on 0; the translation is kept in ``shift``.
        """
        origin = (0,) * self.dim
        if origin in self.values:
            return self
        offset = self.coefficients[0][0]
        shifted = tuple((sub(p, offset), v) for p, v in self.coefficients)
        return Mask(coefficients=shifted, dim=self.dim, shift=add(self.shift or origin, offset))


@dataclass(frozen=True)
class SubdivisionOp:
    """One subdivision operator (mask, dilation, digit set)."""

    mask: Mask
    dilation: IntMatrix
    digits: LatticeSet
    label: str

    def __post_init__(self):
        if not (self.mask.dim == self.dilation.dim == self.digits.dim):
            raise DimensionError(f"Operator {self.label}: mask, dilation and digits disagree on dimension")
        if abs(self.dilation.det) < 2:
            raise DigitSetError(f"Operator {self.label}: |det M| must be at least 2")
        if not verify_digit_set(self.dilation, self.digits):
            raise DigitSetError(
                f"Operator {self.label}: digits are not a complete set of coset representatives"
            )

    @classmethod
    def build(
        cls,
        mask: Mapping | Mask,
        dilation,
        digits: Optional[Iterable] = None,
        label: str = "1",
        shift_mask: bool = True,
    ) -> "SubdivisionOp":
        """
        Convenience constructor taking plain Python data.

        Masks missing the origin are shifted (with a warning) unless
        ``shift_mask`` is False; the digit set defaults to the standard choice
        Z^s ∩ M[0,1)^s.
        """
        m = dilation if isinstance(dilation, IntMatrix) else IntMatrix.of(dilation)
        mk = mask if isinstance(mask, Mask) else Mask.of(mask, m.dim)
        normalized = mk.normalized() if shift_mask else mk
        if not shift_mask and not mk.contains_origin:
            logger.warning("Operator %s: mask support does not contain 0", label)
        if normalized is not mk:
            logger.warning(
                "Operator %s: mask shifted by %s so that 0 is in its support",
                label,
                normalized.shift,
            )
        d = digit_set(m) if digits is None else LatticeSet.of(digits, m.dim)
        return cls(mask=normalized, dilation=m, digits=d, label=label)

    @property
    def dim(self) -> int:
        return self.dilation.dim


@dataclass(frozen=True)
class SchemeSet:
    """Ordered finite set of subdivision operators S_1, ..., S_J."""

    ops: tuple[SubdivisionOp, ...]
    validation: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        if not self.ops:
            raise SchemeValidationError("A scheme set needs at least one operator")
        if len({op.dim for op in self.ops}) != 1:
            raise DimensionError("All operators must share one dimension")
        labels = [op.label for op in self.ops]
        if len(set(labels)) != len(labels):
            raise SchemeValidationError(f"Operator labels must be unique: {labels}")

    @classmethod
    def of(cls, ops: Iterable[SubdivisionOp]) -> "SchemeSet":
        return cls(ops=tuple(ops))

    @property
    def dim(self) -> int:
        return self.ops[0].dim

    def __len__(self) -> int:
        return len(self.ops)

    def __iter__(self):
        return iter(self.ops)

    def __getitem__(self, index: int) -> SubdivisionOp:
        return self.ops[index]

    def op_for_label(self, label: str) -> SubdivisionOp:
        for op in self.ops:
            if op.label == label:
                return op
        raise KeyError(label)


@dataclass(frozen=True)
class BoundedSequence:
    """
    Sequence equal to ``background`` plus a finitely supported deviation.

    ``values`` holds only the deviation; c(alpha) = background + values[alpha].
    """

    values: tuple[tuple[Point, Fraction], ...]
    dim: int
    background: Fraction = Fraction(0)

    @classmethod
    def of(cls, values: Mapping, dim: int, background: RationalLike = 0) -> "BoundedSequence":
        clean = {}
        for p, v in values.items():
            fv = v if isinstance(v, Fraction) else parse_rational(v)
            if fv != 0:
                clean[as_point(p)] = fv
        return cls(values=tuple(sorted(clean.items())), dim=dim, background=Fraction(background))

    @classmethod
    def delta(cls, dim: int) -> "BoundedSequence":
        return cls(values=(((0,) * dim, Fraction(1)),), dim=dim)

    @cached_property
    def as_dict(self) -> dict[Point, Fraction]:
        return dict(self.values)

    def __getitem__(self, point: Point) -> Fraction:
        return self.background + self.as_dict.get(point, Fraction(0))

    @property
    def support(self) -> LatticeSet:
        return LatticeSet.of((p for p, _ in self.values), self.dim)


class ExpansionVerdict(str, Enum):
    CERTIFIED_YES = "certified-yes"
    CERTIFIED_NO = "certified-no"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class SumRuleReport:
    passed: bool
    residuals: dict[Point, Fraction]


@dataclass(frozen=True)
class ExpansionReport:
    verdict: ExpansionVerdict
    depth: int
    witness: Optional[tuple[int, ...]] = None


@dataclass(frozen=True)
class AssumptionNReport:
    passed: dict[str, bool]
    norms: dict[str, float]

    @property
    def all_passed(self) -> bool:
        return all(self.passed.values())


def check_sum_rules(op: SubdivisionOp) -> SumRuleReport:
    """
    Check the sum rules of order one: every coset sum of the mask equals 1.

    Returns:
        SumRuleReport with the residual (coset sum minus one) per digit
    """
    by_key = {op.dilation.coset_key(d): d for d in op.digits}
    sums: dict[Point, Fraction] = {d: Fraction(0) for d in op.digits}
    for point, value in op.mask.coefficients:
        sums[by_key[op.dilation.coset_key(point)]] += value
    residuals = {d: s - 1 for d, s in sums.items()}
    return SumRuleReport(passed=all(r == 0 for r in residuals.values()), residuals=residuals)


def _norm_below_one(product: IntMatrix) -> bool:
    """Exact test of ||product^-1||_2 < 1, i.e. Q^T Q - I positive definite."""
    q = product.rows
    gram = mat_mul(transpose(q), q)
    shifted = [[gram[i][j] - (1 if i == j else 0) for j in range(len(q))] for i in range(len(q))]
    return is_positive_definite(shifted)


def _dilation_product(ops: Sequence[SubdivisionOp], word: Sequence[int]) -> IntMatrix:
    """M_{w_k} ... M_{w_1} for the word (w_1, ..., w_k)."""
    result = IntMatrix.scalar(1, ops[0].dim)
    for j in word:
        result = ops[j].dilation @ result
    return result


def check_jointly_expanding(scheme: SchemeSet, depth: int = 4) -> ExpansionReport:
    """
    Bracket the joint spectral radius of the inverse dilations against 1.

    certified-yes: for some k <= depth every product of k inverses has
    2-norm < 1 (decided exactly). certified-no: some product of inverses has
    spectral radius >= 1. Otherwise inconclusive.
    """
    if depth < 1:
        raise ValueError("depth must be at least 1")
    n_ops = len(scheme)
    for k in range(1, depth + 1):
        all_contractive = True
        for word in itertools.product(range(n_ops), repeat=k):
            q = _dilation_product(scheme.ops, word)
            eigs = np.linalg.eigvals(np.array(q.rows, dtype=float))
            # rho(Q^-1) >= 1 iff some eigenvalue of Q lies in the closed unit disc
            if np.min(np.abs(eigs)) <= 1 + 1e-12:
                return ExpansionReport(ExpansionVerdict.CERTIFIED_NO, k, tuple(word))
            if all_contractive and not _norm_below_one(q):
                all_contractive = False
        if all_contractive:
            return ExpansionReport(ExpansionVerdict.CERTIFIED_YES, k)
    return ExpansionReport(ExpansionVerdict.INCONCLUSIVE, depth)


def check_assumption_n(scheme: SchemeSet) -> AssumptionNReport:
    """Per-operator test of ||M_j^-1||_2 < 1 (exact), with the numeric norm for display."""
    passed = {}
    norms = {}
    for op in scheme:
        passed[op.label] = _norm_below_one(op.dilation)
        inv = np.array([[float(x) for x in row] for row in op.dilation.inverse])
        norms[op.label] = float(np.linalg.norm(inv, 2))
    return AssumptionNReport(passed=passed, norms=norms)


def apply_subdivision(op: SubdivisionOp, c: BoundedSequence) -> BoundedSequence:
    """
    Apply S c(alpha) = sum_beta a(alpha - M beta) c(beta) exactly.

    A nonzero background constant is carried through, which requires the
    sum rules (the image of a constant is then the same constant).
    """
    if c.dim != op.dim:
        raise DimensionError("Sequence and operator dimensions differ")
    if c.background != 0 and not check_sum_rules(op).passed:
        raise SchemeValidationError(
            "A constant background is only reproduced by masks satisfying the sum rules"
        )
    out: dict[Point, Fraction] = defaultdict(Fraction)
    for beta, value in c.values:
        base = op.dilation.apply(beta)
        for gamma, coeff in op.mask.coefficients:
            out[add(base, gamma)] += coeff * value
    return BoundedSequence.of(out, c.dim, c.background)


def compose(outer: SubdivisionOp, inner: SubdivisionOp, label: Optional[str] = None) -> SubdivisionOp:
    """
    Operator equal to applying ``inner`` first and ``outer`` second.

    The dilation is M_outer M_inner and the mask is
    b(delta) = sum_gamma a_outer(delta - M_outer gamma) a_inner(gamma).
    """
    if outer.dim != inner.dim:
        raise DimensionError("Cannot compose operators of different dimensions")
    coeffs: dict[Point, Fraction] = defaultdict(Fraction)
    for gamma, a_in in inner.mask.coefficients:
        base = outer.dilation.apply(gamma)
        for eta, a_out in outer.mask.coefficients:
            coeffs[add(base, eta)] += a_out * a_in
    dilation = outer.dilation @ inner.dilation
    return SubdivisionOp.build(
        Mask.of(coeffs, outer.dim),
        dilation,
        label=label or f"{inner.label}.{outer.label}",
        shift_mask=False,
    )


def compose_word(scheme: SchemeSet, word: Sequence[int]) -> SubdivisionOp:
    """Compose the operators of ``word`` (indices, first applied first)."""
    op = scheme[word[0]]
    for j in word[1:]:
        op = compose(scheme[j], op)
    return op


def power_scheme_set(scheme: SchemeSet, n: int, max_operators: int = 64) -> SchemeSet:
    """
    The scheme set S^n of all J^n n-fold compositions.

    The word (j_1, ..., j_n) applies S_{j_1} first; its dilation is
    M_{j_n} ... M_{j_1} and its label joins the operator labels with ".".

    Raises:
        BudgetExceededError: If J^n exceeds ``max_operators``
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if n == 1:
        return scheme
    count = len(scheme) ** n
    if count > max_operators:
        raise BudgetExceededError(f"S^{n} would have {count} operators (cap {max_operators})")
    ops = [compose_word(scheme, word) for word in itertools.product(range(len(scheme)), repeat=n)]
    return SchemeSet.of(ops)


def minimal_assumption_n_power(scheme: SchemeSet, max_n: int = 6) -> int:
    """
    Smallest n such that every product of n dilations satisfies Assumption N.

    Raises:
        BudgetExceededError: If no n <= max_n works
    """
    for n in range(1, max_n + 1):
        if all(
            _norm_below_one(_dilation_product(scheme.ops, word))
            for word in itertools.product(range(len(scheme)), repeat=n)
        ):
            return n
    raise BudgetExceededError(f"Assumption N fails for all powers up to {max_n}")
