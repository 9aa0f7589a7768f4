import random
from fractions import Fraction

import pytest

from multisub.errors import AssumptionNError, InvarianceError, OmegaConstructionError
from multisub.formats import omega_frame
from multisub.invariant_support import (
    OmegaPolicy,
    OmegaProvenance,
    _omega_step,
    column_sum_criterion,
    construct_omega_c,
    construct_omega_v,
    difference_space_report,
    join_components,
    omega_v_radius,
    select_omega,
    staircase,
    user_omega,
    verify_invariance,
)
from multisub.lattice import LatticeSet
from multisub.scheme import SchemeSet, SubdivisionOp


def _line(*xs: int) -> LatticeSet:
    return LatticeSet.of([(x,) for x in xs], 1)


def _random_scheme(rng: random.Random, nonnegative: bool = False) -> SchemeSet:
    """One or two univariate operators; nonnegative masks satisfy the sum rules."""
    ops = []
    for j in range(rng.randint(1, 2)):
        m = rng.choice([2, 3, -2, -3])
        mask = {}
        if nonnegative:
            for r in range(abs(m)):
                chosen = [p for p in range(r, 6, abs(m)) if rng.random() < 0.6] or [r]
                weights = [rng.randint(1, 4) for _ in chosen]
                for p, w in zip(chosen, weights):
                    mask[p] = Fraction(w, sum(weights))
        else:
            for p in range(rng.randint(1, 5)):
                mask[p] = Fraction(rng.randint(-3, 3) or 1, rng.randint(1, 3))
            mask[0] = Fraction(1)
        ops.append(SubdivisionOp.build(mask, m, label=str(j + 1)))
    return SchemeSet.of(ops)


class TestOmegaC:
    def test_example_i(self, example_i):
        omega = construct_omega_c(example_i)
        assert omega.points == _line(0, 1)
        assert omega.provenance == OmegaProvenance.ALGORITHMIC

    def test_example_ii(self, example_ii, golden):
        # M = -2, alpha = 1, beta = -2, d = 0: M alpha - beta + d = 0 and a(0) = 1/4 != 0,
        # so -2 enters together with 1.
        omega = construct_omega_c(example_ii)
        assert omega.points == _line(-2, -1, 0, 1)
        golden("omega_c_example_ii.csv", omega_frame(omega.points).to_csv(index=False).strip())

    def test_ex_mult1(self, ex_mult1):
        assert construct_omega_c(ex_mult1).points == _line(0, 3)

    def test_haar(self, haar):
        assert construct_omega_c(haar).points == _line(0)

    def test_ex_v0(self, ex_v0):
        omega = construct_omega_c(ex_v0)
        assert len(omega) == 34
        assert (-2, 1) in omega
        assert (-1, 1) not in omega

    def test_seeded(self, example_i):
        seed = _line(5)
        omega = construct_omega_c(example_i, seed=seed)
        assert seed.issubset(omega.points)
        assert omega.seeded_from == seed

    def test_not_expanding(self):
        op = SubdivisionOp.build({(0, 0): 1, (0, 1): 1}, [[2, 0], [0, 1]])
        with pytest.raises(OmegaConstructionError):
            construct_omega_c(SchemeSet.of([op]), max_rounds=20)

    def test_fixed_point_and_invariant(self):
        rng = random.Random(3)
        for _ in range(100):
            scheme = _random_scheme(rng)
            seed = _line(*rng.sample(range(-4, 5), rng.randint(1, 3)))
            omega = construct_omega_c(scheme, seed=seed)
            assert _omega_step(scheme, set(omega)) == set(omega)
            assert seed.issubset(omega.points)
            assert verify_invariance(scheme, omega.points).ok


class TestOmegaV:
    def test_radius(self, example_i, ex_mult1):
        assert omega_v_radius(example_i) == pytest.approx(6.0)
        assert omega_v_radius(ex_mult1) == pytest.approx(18.0)

    def test_ball(self, example_i):
        omega = construct_omega_v(example_i)
        assert omega.points == _line(*range(-6, 7))
        assert omega.provenance == OmegaProvenance.BALL

    def test_ball_is_invariant(self, ex_mult1):
        assert verify_invariance(ex_mult1, construct_omega_v(ex_mult1).points).ok

    def test_assumption_n_required(self, ex_mult2, ex_v0):
        with pytest.raises(AssumptionNError) as exc:
            construct_omega_v(ex_mult2)
        assert exc.value.witness == ["2"]
        with pytest.raises(AssumptionNError):
            construct_omega_v(ex_v0)


class TestInvariance:
    def test_leak_witness(self, example_i):
        report = verify_invariance(example_i, _line(0))
        assert not report.ok
        assert report.witnesses[0].alpha == (1,)
        assert report.column_sums_ok is False

    def test_column_sums_match_invariance(self):
        rng = random.Random(17)
        for _ in range(100):
            scheme = _random_scheme(rng, nonnegative=True)
            candidates = [construct_omega_c(scheme).points]
            candidates.append(_line(*rng.sample(range(-4, 7), rng.randint(1, 6))))
            for omega in candidates:
                assert column_sum_criterion(scheme, omega) == verify_invariance(scheme, omega).ok

    def test_no_cross_check_for_signed_masks(self):
        op = SubdivisionOp.build({0: "-1/16", 1: 0, 2: "9/16", 3: 1, 4: "9/16", 6: "-1/16"}, 2)
        report = verify_invariance(SchemeSet.of([op]), construct_omega_c(SchemeSet.of([op])).points)
        assert report.ok
        assert report.column_sums_ok is None

    def test_user_omega(self, example_i):
        assert user_omega(example_i, _line(0, 1)).provenance == OmegaProvenance.USER
        with pytest.raises(InvarianceError) as exc:
            user_omega(example_i, _line(0))
        assert exc.value.witness.beta == (0,)


class TestDifferenceSpace:
    def test_connected(self):
        report = difference_space_report(_line(-1, 0, 1))
        assert (report.dim_v, report.dim_vtilde, report.components) == (2, 2, 1)
        assert report.connected

    def test_ex_v0(self, ex_v0):
        report = difference_space_report(construct_omega_c(ex_v0).points)
        assert (report.dim_v, report.dim_vtilde, report.components) == (33, 32, 2)
        assert report.component_sets[0].points == ((-2, 1),)
        assert len(report.spanning_edges) == 32

    def test_empty(self):
        with pytest.raises(ValueError):
            difference_space_report(LatticeSet.of([], 1))

    def test_staircase(self):
        assert staircase((0, 0), (2, -1)) == [(0, 0), (1, 0), (2, 0), (2, -1)]

    def test_join_ex_v0(self, ex_v0):
        omega = construct_omega_c(ex_v0).points
        joined = join_components(difference_space_report(omega))
        assert set(joined) == set(omega) | {(-1, 1)}
        assert difference_space_report(joined).connected

    def test_join_ex_mult1(self, ex_mult1):
        joined = join_components(difference_space_report(_line(0, 3)))
        assert joined == _line(0, 1, 2, 3)


class TestSelectOmega:
    def test_connected_omega_c_kept(self, example_i):
        omega = select_omega(example_i)
        assert omega.provenance == OmegaProvenance.ALGORITHMIC
        assert omega.points == _line(0, 1)

    def test_enlarged(self, ex_mult1):
        omega = select_omega(ex_mult1, OmegaPolicy.AUTO)
        assert omega.provenance == OmegaProvenance.ENLARGED
        assert omega.points == _line(*range(-2, 6))
        assert omega.seeded_from == _line(0, 1, 2, 3)

    def test_explicit_policies(self, ex_mult1):
        assert select_omega(ex_mult1, "omega-c").points == _line(0, 3)
        assert select_omega(ex_mult1, "omega-v").provenance == OmegaProvenance.BALL

    def test_ball_fallback(self, ex_mult1):
        omega = select_omega(ex_mult1, join_retries=0)
        assert omega.provenance == OmegaProvenance.BALL
