import random
from decimal import Decimal
from fractions import Fraction

import pytest

from multisub.errors import DigitSetError, DimensionError
from multisub.lattice import (
    IntMatrix,
    LatticeSet,
    digit_set,
    image_lattice,
    minkowski_sum,
    preimage_lattice,
    verify_digit_set,
)
from multisub.rational import identity, is_positive_definite, mat_mul, parse_rational


def _random_matrix(rng: random.Random, lo: int = 2, hi: int = 12) -> IntMatrix:
    while True:
        m = IntMatrix.of([[rng.randint(-4, 4) for _ in range(2)] for _ in range(2)])
        if lo <= abs(m.det) <= hi:
            return m


def _random_set(rng: random.Random, dim: int, size: int) -> LatticeSet:
    return LatticeSet.of(
        [tuple(rng.randint(-5, 5) for _ in range(dim)) for _ in range(size)], dim
    )


class TestParseRational:
    def test_strings_and_decimals_are_exact(self):
        assert parse_rational("1/3") == Fraction(1, 3)
        assert parse_rational("0.1") == Fraction(1, 10)
        assert parse_rational(Decimal("0.25")) == Fraction(1, 4)
        assert parse_rational(0.1) == Fraction(1, 10)
        assert parse_rational(-2) == -2

    @pytest.mark.parametrize("bad", [True, "abc", "1/0", float("nan")])
    def test_rejects(self, bad):
        with pytest.raises(ValueError):
            parse_rational(bad)

    def test_positive_definite(self):
        assert is_positive_definite([[4, 1], [1, 2]])
        assert not is_positive_definite([[4, -4], [-4, 4]])
        with pytest.raises(ValueError):
            is_positive_definite([[1, 2], [0, 1]])


class TestLatticeSet:
    def test_sorted_and_deduplicated(self):
        s = LatticeSet.of([(1, 0), (0, 2), (1, 0)])
        assert s.points == ((0, 2), (1, 0))
        assert s.index((1, 0)) == 1

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            LatticeSet.of([(1, 0), (1,)])
        with pytest.raises(DimensionError):
            minkowski_sum(LatticeSet.of([(0,)]), LatticeSet.of([(0, 0)]))


class TestIntMatrix:
    def test_inverse_is_exact(self):
        m = IntMatrix.of([[-3, -4], [4, 4]])
        assert m.det == 4
        assert mat_mul(m.inverse, m.rows) == identity(2)

    def test_adjugate(self):
        m = IntMatrix.of([[1, 1], [1, -2]])
        assert m.adjugate == ((-2, -1), (-1, 1))

    def test_non_square(self):
        with pytest.raises(DimensionError):
            IntMatrix.of([[1, 2]])


class TestDigitSets:
    def test_binary(self):
        assert digit_set(IntMatrix.of(2)).points == ((0,), (1,))

    def test_ex_mult2_digit_sets(self):
        d1 = digit_set(IntMatrix.of([[1, 1], [1, -2]]))
        d2 = digit_set(IntMatrix.of([[2, -1], [1, -2]]))
        assert set(d1) == {(0, 0), (1, -1), (1, 0)}
        assert set(d2) == {(0, 0), (0, -1), (1, 0)}

    def test_custom_digit_sets(self):
        assert verify_digit_set(IntMatrix.of(-2), LatticeSet.of([(-1,), (0,)]))
        m = IntMatrix.of([[-3, -4], [4, 4]])
        assert verify_digit_set(m, LatticeSet.of([(-k, k) for k in range(4)]))
        assert not verify_digit_set(IntMatrix.of(2), LatticeSet.of([(0,), (2,)]))

    def test_dimension_mismatch_is_false(self):
        assert not verify_digit_set(IntMatrix.of(2), LatticeSet.of([(0, 0), (1, 0)]))

    def test_unimodular_refused(self):
        with pytest.raises(DigitSetError, match="not expanding enough"):
            digit_set(IntMatrix.of([[1, 1], [0, 1]]))

    def test_random_matrices(self):
        rng = random.Random(7)
        for _ in range(100):
            m = _random_matrix(rng)
            d = digit_set(m)
            assert len(d) == abs(m.det)
            assert (0, 0) in d
            assert verify_digit_set(m, d)


class TestSetOperations:
    def test_minkowski_commutative_and_associative(self):
        rng = random.Random(11)
        for _ in range(100):
            a, b, c = (_random_set(rng, 2, rng.randint(1, 5)) for _ in range(3))
            assert minkowski_sum(a, b) == minkowski_sum(b, a)
            assert minkowski_sum(minkowski_sum(a, b), c) == minkowski_sum(a, minkowski_sum(b, c))

    def test_preimage_of_image(self):
        rng = random.Random(13)
        for _ in range(100):
            m = _random_matrix(rng)
            x = _random_set(rng, 2, rng.randint(1, 8))
            assert preimage_lattice(m, image_lattice(m, x)) == x

    def test_preimage_of_origin(self):
        m = IntMatrix.of([[1, 1], [1, -2]])
        assert preimage_lattice(m, LatticeSet.of([(0, 0)])).points == ((0, 0),)

    def test_preimage_drops_non_integral_points(self):
        assert preimage_lattice(IntMatrix.of(2), LatticeSet.of([(1,), (2,), (4,)])).points == ((1,), (2,))
