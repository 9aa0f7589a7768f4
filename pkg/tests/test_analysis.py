import numpy as np
import pytest

from multisub.analysis import (
    OperatorSequence,
    Verdict,
    analyze_convergence,
    attractor_cover_check,
    attractor_points,
    blf_support,
    difference_decay,
    jsr_family,
    select_working_set,
    superset_distance,
    support_superset,
    tail_bound,
)
from multisub.cli.utils import parse_sequence
from multisub.config import MultisubConfig, OmegaConfig
from multisub.errors import SchemeValidationError, StageError
from multisub.invariant_support import OmegaProvenance
from multisub.jsr import word_value
from multisub.lattice import LatticeSet
from multisub.scheme import SchemeSet, SubdivisionOp
from multisub.services.logger import StageLogger, StageStatus

BLF_WORDS = [
    "1,2,2,1,2,2,2,2,1,2,2,2,2,2,2,1;2",
    "2,2,1,2,2,2,2,1,2,2,2,2,2,2,1;2",
    "2,1,2,2,2,2,1,2,2,2,2,2,2,1;2",
]


@pytest.fixture(scope="module")
def ex_mult2_report(ex_mult2):
    return analyze_convergence(ex_mult2)


class TestOperatorSequence:
    def test_periodic(self):
        seq = OperatorSequence.periodic([0, 1, 1])
        assert seq.take(7) == (0, 1, 1, 0, 1, 1, 0)

    def test_prefix(self):
        seq = OperatorSequence((0, 0), (1,))
        assert seq.take(4) == (0, 0, 1, 1)
        assert seq.take(2, start=1) == (0, 1)

    def test_shift_matches_offset(self):
        seq = OperatorSequence((0,), (1, 2))
        for r in range(1, 7):
            assert seq.shifted(r).take(5) == seq.take(5, start=r - 1)
        with pytest.raises(ValueError):
            seq.shifted(0)

    def test_validation(self):
        with pytest.raises(ValueError):
            OperatorSequence((0,), ())
        with pytest.raises(ValueError, match="out of range 1..2"):
            OperatorSequence.periodic([0, 2]).validate(2)

    def test_parsed_from_one_based_text(self):
        assert parse_sequence("1,2,2") == OperatorSequence((), (0, 1, 1))
        assert parse_sequence("1,1;2,1") == OperatorSequence((0, 0), (1, 0))


class TestConvergence:
    def test_example_i(self, example_i):
        report = analyze_convergence(example_i)
        assert report.verdict is Verdict.CONVERGENT
        assert report.power == 1
        assert report.jsr.upper == pytest.approx(0.5)
        assert report.certificate_word() == [{"digit": [0], "op_label": "1"}]
        stages = [e.stage for e in report.trail]
        assert stages[0] == "sum-rules"
        assert stages[-1] == "verdict"

    def test_ex_mult2(self, ex_mult2_report):
        report = ex_mult2_report
        assert report.verdict is Verdict.CONVERGENT
        assert report.power == 1
        assert report.assumptions["joint_expansion"] == "certified-yes"
        assert report.assumptions["assumption_n"] == {"1": True, "2": False}
        assert report.jsr.lower == pytest.approx(0.89707, abs=1e-4)
        assert report.jsr.upper < 1
        assert report.jsr.upper_certificate["method"] in ("polytope", "relaxed-polytope", "norm-products")
        # Three cyclic products of length two attain the lower bound.
        assert report.certificate_word() in [
            [{"digit": [0, 0], "op_label": "1"}, {"digit": [0, -1], "op_label": "2"}],
            [{"digit": [0, 0], "op_label": "1"}, {"digit": [0, 0], "op_label": "2"}],
            [{"digit": [1, -1], "op_label": "1"}, {"digit": [1, 0], "op_label": "2"}],
        ]
        family = jsr_family(report.family)
        assert word_value(family, report.jsr.lower_word) == pytest.approx(report.jsr.lower, rel=1e-12)

    def test_ex_mult2_letter_labels(self, ex_mult2_report):
        family = ex_mult2_report.family
        assert [t.label for t in family.transitions] == [
            "1:0,0",
            "1:1,-1",
            "1:1,0",
            "2:0,-1",
            "2:0,0",
            "2:1,0",
        ]
        numeric = jsr_family(family)
        first = family.index[(0, (0, 0))]
        assert word_value(numeric, (first, family.index[(1, (1, 0))])) == pytest.approx(2 / 3, abs=1e-3)

    def test_ex_mult1_not_convergent(self, ex_mult1):
        report = analyze_convergence(ex_mult1)
        assert report.verdict is Verdict.NOT_CONVERGENT
        assert report.omega.provenance is OmegaProvenance.ENLARGED
        assert report.jsr.lower >= 1 - 1e-12

    def test_haar(self, haar):
        report = analyze_convergence(haar)
        assert report.verdict is Verdict.CONVERGENT
        assert report.jsr.upper == 0.0
        assert report.difference_space.dim_v == 0

    def test_sum_rules_fail(self):
        scheme = SchemeSet.of([SubdivisionOp.build({0: 1, 1: "1/2"}, 2)])
        report = analyze_convergence(scheme)
        assert report.verdict is Verdict.NOT_CONVERGENT
        assert report.omega is None
        assert report.assumptions["sum_rules"] is False
        assert report.trail[-1].status is StageStatus.FAILED
        assert report.trail[-1].data == {"residuals/1/(1,)": "-1/2"}

    def test_not_expanding(self):
        op = SubdivisionOp.build({(0, 0): 1, (1, 0): 1}, [[2, 0], [0, 1]])
        with pytest.raises(StageError) as exc:
            analyze_convergence(SchemeSet.of([op]))
        assert exc.value.stage == "joint-expansion"
        assert exc.value.witness == (0,)

    def test_shared_trail(self, example_i):
        trail = StageLogger()
        analyze_convergence(example_i, trail=trail)
        assert trail.last("omega").data["size"] == 2

    def test_power_for_ball(self, ex_mult2):
        config = MultisubConfig(omega=OmegaConfig(policy="omega-v"))
        trail = StageLogger()
        working, power, omega = select_working_set(ex_mult2, config, trail)
        assert power == 2
        assert len(working) == 4
        assert omega.provenance is OmegaProvenance.BALL
        assert trail.last("power").data == {"n": 2}


class TestDecay:
    def test_example_i_halves(self, example_i, golden):
        table = difference_decay(example_i, OperatorSequence.periodic([0]), 12)
        assert [k for k, _ in table] == list(range(13))
        for k, m in table:
            assert m == pytest.approx(2.0**-k)
        golden("decay_example_i.txt", ",".join(f"{m:.10g}" for _, m in table[:5]))

    def test_ex_mult1_stalls(self, ex_mult1):
        table = difference_decay(ex_mult1, OperatorSequence.periodic([0]), 12)
        assert len(table) == 13
        assert all(m >= 1 - 1e-12 for _, m in table)

    @pytest.mark.parametrize("word", ["1,2", "2,1", "1,1;2,1"])
    def test_ex_mult2_rate_matches_bracket(self, ex_mult2, ex_mult2_report, word):
        table = difference_decay(ex_mult2, parse_sequence(word), 12)
        assert all(0 <= m <= 1 + 1e-12 for _, m in table)
        n, m = table[-1]
        assert n == 12
        assert ex_mult2_report.jsr.lower - 0.1 <= m ** (1 / n) <= ex_mult2_report.jsr.upper + 0.1

    def test_sum_rules_required(self):
        scheme = SchemeSet.of([SubdivisionOp.build({0: 1, 1: "1/2"}, 2)])
        with pytest.raises(SchemeValidationError):
            difference_decay(scheme, OperatorSequence.periodic([0]), 3)


class TestAttractor:
    def test_dyadic_points(self, example_i):
        cloud = attractor_points(example_i, OperatorSequence.periodic([0]), 10)
        assert len(cloud) == 1024
        assert cloud.points.min() == 0.0
        assert cloud.points.max() == pytest.approx(1 - 2.0**-10)
        assert not cloud.subsampled

    def test_subsampled(self, ex_mult2):
        cloud = attractor_points(ex_mult2, OperatorSequence.periodic([0, 1]), 12, budget=500, seed=3)
        assert cloud.subsampled
        assert len(cloud) <= 500
        again = attractor_points(ex_mult2, OperatorSequence.periodic([0, 1]), 12, budget=500, seed=3)
        assert cloud.digest() == again.digest()

    def test_order_matters(self, ex_mult2):
        a = attractor_points(ex_mult2, parse_sequence("1,2"), 4)
        b = attractor_points(ex_mult2, parse_sequence("2,1"), 4)
        assert len(a) == len(b) == 81
        assert a.digest() != b.digest()

    def test_depth_must_be_positive(self, example_i):
        with pytest.raises(ValueError):
            attractor_points(example_i, OperatorSequence.periodic([0]), 0)


class TestBasicLimitFunction:
    def test_hat_function(self, example_i):
        cloud = blf_support(example_i, OperatorSequence.periodic([0]), 6)
        assert cloud.points.min() == 0.0
        assert cloud.points.max() == pytest.approx(2 - 2.0**-5)
        assert np.max(cloud.values) == pytest.approx(1.0)

    def test_ex_mult2_supports(self, ex_mult2):
        digests = []
        for word in BLF_WORDS:
            sequence = parse_sequence(word)
            cloud = blf_support(ex_mult2, sequence, 9)
            assert cloud.digest() == blf_support(ex_mult2, sequence, 9).digest()
            digests.append(cloud.digest())
            distance, tail = superset_distance(ex_mult2, sequence, 9)
            assert distance <= 2 * tail
        assert len(set(digests)) == len(BLF_WORDS)

    def test_shifted_word(self, ex_mult2):
        sequence = parse_sequence("1,2")
        shifted = blf_support(ex_mult2, sequence, 5, r=2)
        direct = blf_support(ex_mult2, parse_sequence("2,1"), 5)
        assert shifted.digest() == direct.digest()


class TestSupportBounds:
    def test_tail_of_dyadic_scheme(self, example_i):
        assert tail_bound(example_i, OperatorSequence.periodic([0]), 3, [2.0]) == pytest.approx(0.25)

    def test_superset_contains_support(self, example_i):
        points, tail = support_superset(example_i, OperatorSequence.periodic([0]), 6)
        assert points.min() == 0.0
        assert points.max() == pytest.approx(2 - 2.0**-5)
        assert tail == pytest.approx(2.0 * 2.0**-6)

    def test_cover(self, example_i):
        report = attractor_cover_check(
            example_i, OperatorSequence.periodic([0]), 8, LatticeSet.of([(0,), (1,)])
        )
        assert report.holds
        assert report.total > 0
