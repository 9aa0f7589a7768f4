import logging
import random
from fractions import Fraction

import pytest

from multisub.errors import BudgetExceededError, DigitSetError, DimensionError, SchemeValidationError
from multisub.lattice import add
from multisub.scheme import (
    BoundedSequence,
    ExpansionVerdict,
    Mask,
    SchemeSet,
    SubdivisionOp,
    apply_subdivision,
    check_assumption_n,
    check_jointly_expanding,
    check_sum_rules,
    compose,
    minimal_assumption_n_power,
    power_scheme_set,
)


def _random_sequence(rng: random.Random, dim: int) -> BoundedSequence:
    values = {
        tuple(rng.randint(-3, 3) for _ in range(dim)): Fraction(rng.randint(-5, 5), rng.randint(1, 4))
        for _ in range(rng.randint(1, 5))
    }
    return BoundedSequence.of(values, dim)


class TestMask:
    def test_exact_values(self):
        mask = Mask.of({0: "0.1", 1: "9/10"}, 1)
        assert mask[(0,)] == Fraction(1, 10)
        assert mask[(5,)] == 0
        assert mask.support.points == ((0,), (1,))

    def test_zero_mask_rejected(self):
        with pytest.raises(SchemeValidationError):
            Mask.of({0: 0, 1: "0/3"}, 1)

    def test_shift_when_origin_missing(self, caplog):
        with caplog.at_level(logging.WARNING, logger="multisub.scheme"):
            op = SubdivisionOp.build({1: "1/2", 2: 1, 3: "1/2"}, 2)
        assert op.mask.shift == (1,)
        assert op.mask.support.points == ((0,), (1,), (2,))
        assert "shifted" in caplog.text

    def test_shift_can_be_disabled(self, caplog):
        with caplog.at_level(logging.WARNING, logger="multisub.scheme"):
            op = SubdivisionOp.build({1: "1/2", 2: 1, 3: "1/2"}, 2, shift_mask=False)
        assert not op.mask.contains_origin
        assert op.mask.shift == (0,)
        assert "does not contain 0" in caplog.text

    def test_unshifted_file_mask(self, ex_v0):
        assert not ex_v0[0].mask.contains_origin
        assert ex_v0[0].mask.shift == (0, 0)


class TestOperators:
    def test_default_digits(self, ex_mult2):
        assert set(ex_mult2[0].digits) == {(0, 0), (1, -1), (1, 0)}

    def test_bad_digits(self):
        with pytest.raises(DigitSetError):
            SubdivisionOp.build({0: 1, 1: 1}, 2, digits=[[0], [2]])

    def test_dimension_disagreement(self):
        with pytest.raises(DimensionError):
            SubdivisionOp.build({(0, 0): 1}, 2)

    def test_scheme_set_checks(self, haar):
        with pytest.raises(SchemeValidationError, match="unique"):
            SchemeSet.of([haar[0], haar[0]])
        with pytest.raises(DimensionError):
            SchemeSet.of([haar[0], SubdivisionOp.build({(0, 0): 1}, [[2, 0], [0, 2]], label="2")])
        with pytest.raises(SchemeValidationError):
            SchemeSet.of([])

    def test_op_for_label(self, ex_mult2):
        assert ex_mult2.op_for_label("2") is ex_mult2[1]
        with pytest.raises(KeyError):
            ex_mult2.op_for_label("3")


class TestSumRules:
    def test_passing(self, example_i, ex_mult2, ex_v0):
        for scheme in (example_i, ex_mult2, ex_v0):
            for op in scheme:
                assert check_sum_rules(op).passed

    def test_residuals(self):
        report = check_sum_rules(SubdivisionOp.build({0: 1, 1: "1/2"}, 2))
        assert not report.passed
        assert report.residuals == {(0,): 0, (1,): Fraction(-1, 2)}


class TestExpansion:
    def test_ex_mult2_needs_products(self, ex_mult2):
        report = check_jointly_expanding(ex_mult2)
        assert report.verdict == ExpansionVerdict.CERTIFIED_YES
        assert report.depth == 2

    def test_sqrt3(self, sqrt3):
        assert check_jointly_expanding(sqrt3, depth=1).verdict == ExpansionVerdict.INCONCLUSIVE
        assert check_jointly_expanding(sqrt3, depth=2).verdict == ExpansionVerdict.CERTIFIED_YES

    def test_unit_eigenvalue(self):
        op = SubdivisionOp.build({(0, 0): 1, (1, 0): 1}, [[2, 0], [0, 1]])
        report = check_jointly_expanding(SchemeSet.of([op]))
        assert report.verdict == ExpansionVerdict.CERTIFIED_NO
        assert report.witness == (0,)

    def test_depth_must_be_positive(self, haar):
        with pytest.raises(ValueError):
            check_jointly_expanding(haar, depth=0)


class TestAssumptionN:
    def test_ex_mult2(self, ex_mult2):
        report = check_assumption_n(ex_mult2)
        assert report.passed == {"1": True, "2": False}
        assert not report.all_passed
        assert report.norms["2"] == pytest.approx(1.0)

    def test_scalar_dilation(self, example_i):
        report = check_assumption_n(example_i)
        assert report.all_passed
        assert report.norms["1"] == pytest.approx(0.5)

    def test_minimal_power(self, ex_mult2, sqrt3, example_i):
        assert minimal_assumption_n_power(example_i) == 1
        assert minimal_assumption_n_power(ex_mult2) == 2
        assert minimal_assumption_n_power(sqrt3) == 2

    def test_minimal_power_budget(self):
        op = SubdivisionOp.build({(0, 0): 1, (1, 0): 1}, [[2, 0], [0, 1]])
        with pytest.raises(BudgetExceededError):
            minimal_assumption_n_power(SchemeSet.of([op]), max_n=3)


class TestSubdivision:
    def test_delta_gives_mask(self, example_i):
        out = apply_subdivision(example_i[0], BoundedSequence.delta(1))
        assert out.as_dict == example_i[0].mask.values

    def test_constant_reproduced(self, example_i):
        out = apply_subdivision(example_i[0], BoundedSequence.of({}, 1, background=3))
        assert out[(17,)] == 3
        assert out.values == ()

    def test_constant_refused_without_sum_rules(self):
        op = SubdivisionOp.build({0: 1, 1: "1/2"}, 2)
        with pytest.raises(SchemeValidationError):
            apply_subdivision(op, BoundedSequence.of({}, 1, background=1))

    def test_compose_matches_sequential_application(self, ex_mult2):
        rng = random.Random(5)
        for _ in range(100):
            outer, inner = rng.choice(ex_mult2.ops), rng.choice(ex_mult2.ops)
            c = _random_sequence(rng, 2)
            direct = apply_subdivision(compose(outer, inner), c)
            assert direct == apply_subdivision(outer, apply_subdivision(inner, c))

    def test_compose_keeps_sum_rules(self, ex_mult2, example_i, ex_v0):
        for scheme in (ex_mult2, example_i, ex_v0):
            for outer in scheme:
                for inner in scheme:
                    assert check_sum_rules(compose(outer, inner)).passed

    def test_compose_is_associative(self, ex_mult2):
        s1, s2 = ex_mult2[0], ex_mult2[1]
        for a, b, c in [(s1, s2, s1), (s2, s2, s1), (s1, s1, s2)]:
            left = compose(a, compose(b, c))
            right = compose(compose(a, b), c)
            assert left.dilation == right.dilation
            assert left.mask == right.mask

    def test_output_support_is_bounded(self, ex_mult2, sqrt3):
        rng = random.Random(11)
        for _ in range(100):
            op = rng.choice(ex_mult2.ops + sqrt3.ops)
            c = _random_sequence(rng, 2)
            allowed = {
                add(op.dilation.apply(beta), gamma) for beta, _ in c.values for gamma, _ in op.mask.coefficients
            }
            assert set(apply_subdivision(op, c).as_dict) <= allowed

    def test_power_set(self, ex_mult2):
        squared = power_scheme_set(ex_mult2, 2)
        assert [op.label for op in squared] == ["1.1", "1.2", "2.1", "2.2"]
        m1, m2 = ex_mult2[0].dilation, ex_mult2[1].dilation
        assert squared.op_for_label("1.2").dilation == m2 @ m1
        assert power_scheme_set(ex_mult2, 1) is ex_mult2

    def test_power_set_budget(self, ex_mult2):
        with pytest.raises(BudgetExceededError):
            power_scheme_set(ex_mult2, 7)
