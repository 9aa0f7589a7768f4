"""
End-to-end convergence analysis, the difference-decay oracle and rendering
of attractors and basic-limit-function supports.
"""

import hashlib
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from multisub.config import MultisubConfig
from multisub.errors import AssumptionNError, BudgetExceededError, SchemeValidationError, StageError
from multisub.invariant_support import (
    DifferenceSpaceReport,
    OmegaSet,
    difference_space_report,
    select_omega,
)
from multisub.jsr import JsrEstimate, MatrixFamily, certify_unit_eigenvalue, jsr_estimate
from multisub.lattice import LatticeSet
from multisub.scheme import (
    ExpansionVerdict,
    SchemeSet,
    SubdivisionOp,
    check_assumption_n,
    check_jointly_expanding,
    check_sum_rules,
    minimal_assumption_n_power,
    power_scheme_set,
)
from multisub.services.logger import StageEntry, StageLogger
from multisub.transition import (
    RestrictedFamily,
    build_transition_matrices,
    restrict_to_difference_space,
)

logger = logging.getLogger(__name__)


class Verdict(str, Enum):
    CONVERGENT = "convergent"
    NOT_CONVERGENT = "not-convergent"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class OperatorSequence:
    """
    Infinite operator word ``prefix`` followed by ``period`` repeated.

    Letters are 0-based operator indices.
    """

    prefix: tuple[int, ...]
    period: tuple[int, ...]

    def __post_init__(self):
        if not self.period:
            raise ValueError("The periodic part of an operator sequence must not be empty")

    @classmethod
    def periodic(cls, word: Sequence[int]) -> "OperatorSequence":
        return cls(prefix=(), period=tuple(word))

    def letter(self, k: int) -> int:
        if k < len(self.prefix):
            return self.prefix[k]
        return self.period[(k - len(self.prefix)) % len(self.period)]

    def take(self, n: int, start: int = 0) -> tuple[int, ...]:
        return tuple(self.letter(k) for k in range(start, start + n))

    def shifted(self, r: int) -> "OperatorSequence":
        """The word (j_r, j_{r+1}, ...) for a 1-based shift r."""
        if r < 1:
            raise ValueError("r must be at least 1")
        if r - 1 <= len(self.prefix):
            return OperatorSequence(self.prefix[r - 1 :], self.period)
        offset = (r - 1 - len(self.prefix)) % len(self.period)
        return OperatorSequence((), self.period[offset:] + self.period[:offset])

    def validate(self, n_ops: int) -> None:
        bad = [j for j in self.prefix + self.period if not 0 <= j < n_ops]
        if bad:
            raise ValueError(f"Operator indices {sorted(set(j + 1 for j in bad))} out of range 1..{n_ops}")


@dataclass(frozen=True)
class ConvergenceReport:
    """Verdict of the pipeline with everything it was derived from."""

    verdict: Verdict
    omega: Optional[OmegaSet]
    jsr: Optional[JsrEstimate]
    assumptions: dict
    power: int
    trail: tuple[StageEntry, ...]
    family: Optional[RestrictedFamily] = field(default=None, compare=False)
    difference_space: Optional[DifferenceSpaceReport] = field(default=None, compare=False)

    def certificate_word(self) -> list[dict]:
        """The lower-bound word as (digit, operator label) pairs."""
        if self.jsr is None or self.family is None:
            return []
        return word_letters(self.family, self.jsr.lower_word)


def word_letters(family: RestrictedFamily, word: Sequence[int]) -> list[dict]:
    """Family indices of a word as (digit, operator label) pairs."""
    return [
        {"digit": list(family.transitions[i].digit), "op_label": family.transitions[i].op_label}
        for i in word
    ]


def jsr_family(restricted: RestrictedFamily) -> MatrixFamily:
    """
    The restricted matrices in orthonormal coordinates of V_Omega.

    With B = Q R_B the thin QR factorization of the basis vectors, R_B R R_B^-1
    is the matrix of T on V_Omega in the basis Q. The exact matrices in the
    original basis are kept for duplicate detection and unit-eigenvalue checks.
    """
    family = MatrixFamily.from_rational(restricted.matrices, restricted.labels)
    if restricted.dim == 0:
        return family
    b = np.array([[float(x) for x in v] for v in restricted.basis]).T
    _, r = np.linalg.qr(b)
    return family.similar(np.linalg.inv(r))


def select_working_set(
    scheme: SchemeSet, config: MultisubConfig, trail: StageLogger
) -> tuple[SchemeSet, int, OmegaSet]:
    """select_omega, powering the scheme set only if the Omega_V fallback needs Assumption N."""
    omega_config = config.omega
    try:
        omega = select_omega(
            scheme,
            omega_config.policy,
            max_rounds=omega_config.max_rounds,
            join_retries=omega_config.join_retries,
            max_points=omega_config.max_points,
        )
        return scheme, 1, omega
    except AssumptionNError as e:
        trail.warning("assumption-n", str(e))
    try:
        n = minimal_assumption_n_power(scheme, config.scheme.max_power)
        powered = power_scheme_set(scheme, n, config.scheme.max_power_operators)
    except BudgetExceededError as e:
        raise AssumptionNError(f"No usable power of the scheme set: {e}") from e
    trail.info("power", f"Using S^{n} with {len(powered)} operators", n=n)
    omega = select_omega(
        powered,
        omega_config.policy,
        max_rounds=omega_config.max_rounds,
        join_retries=omega_config.join_retries,
        max_points=omega_config.max_points,
    )
    return powered, n, omega


def analyze_convergence(
    scheme: SchemeSet,
    config: Optional[MultisubConfig] = None,
    trail: Optional[StageLogger] = None,
) -> ConvergenceReport:
    """
    Decide convergence of the multiple subdivision scheme.

    Runs the sum-rule check, the joint-expansion check, the choice of Omega
    (powering the scheme set when Assumption N is needed), the transition
    matrices and their restriction, then brackets the joint spectral radius.

    Returns:
        ConvergenceReport; convergent iff upper < 1, not convergent iff
        lower >= 1 - tolerance

    Raises:
        StageError: If a stage refuses to continue (the stage name and a
            witness are attached)
    """
    config = config or MultisubConfig()
    trail = trail or StageLogger()
    assumptions: dict = {}

    failing = {}
    for op in scheme:
        report = check_sum_rules(op)
        if not report.passed:
            failing[op.label] = {str(d): str(r) for d, r in report.residuals.items() if r != 0}
    assumptions["sum_rules"] = not failing
    if failing:
        trail.failed("sum-rules", f"Coset sums differ from 1 for operators {sorted(failing)}", residuals=failing)
        return ConvergenceReport(Verdict.NOT_CONVERGENT, None, None, assumptions, 1, trail.entries)
    trail.passed("sum-rules", "Every coset sum equals 1")

    expansion = check_jointly_expanding(scheme, config.scheme.expansion_depth)
    assumptions["joint_expansion"] = expansion.verdict.value
    if expansion.verdict is ExpansionVerdict.CERTIFIED_NO:
        trail.failed("joint-expansion", f"Product along {expansion.witness} has an eigenvalue of modulus <= 1")
        raise StageError(
            "The dilations are not jointly expanding",
            witness=expansion.witness,
            stage="joint-expansion",
        )
    if expansion.verdict is ExpansionVerdict.CERTIFIED_YES:
        trail.passed("joint-expansion", f"All products of {expansion.depth} inverse dilations contract")
    else:
        trail.warning("joint-expansion", f"Undecided up to depth {expansion.depth}")

    n_report = check_assumption_n(scheme)
    assumptions["assumption_n"] = dict(n_report.passed)
    trail.info("assumption-n", "||M^-1||_2 per operator", norms=n_report.norms)

    working, power, omega = select_working_set(scheme, config, trail)
    trail.passed(
        "omega",
        f"{omega.provenance.value} set with {len(omega)} points",
        provenance=omega.provenance.value,
        size=len(omega),
    )

    transitions = build_transition_matrices(working, omega)
    trail.passed("invariance", f"{len(transitions)} transition matrices of size {len(omega)}")

    space = difference_space_report(omega.points)
    restricted = restrict_to_difference_space(transitions, space)
    trail.passed("difference-space", f"dim V = dim V~ = {space.dim_v}")

    estimate = jsr_estimate(jsr_family(restricted), config.jsr)

    if estimate.lower < 1.0 and estimate.lower >= 1.0 - 1e-6 and estimate.lower_word:
        if certify_unit_eigenvalue(restricted.matrices, estimate.lower_word):
            trail.info("unit-eigenvalue", f"Product along {estimate.lower_word} has eigenvalue +-1 exactly")
            estimate = JsrEstimate(
                lower=1.0,
                upper=max(estimate.upper, 1.0),
                lower_word=estimate.lower_word,
                status=estimate.status,
                upper_certificate=estimate.upper_certificate,
                depth=estimate.depth,
                vertices=estimate.vertices,
            )
    trail.info(
        "jsr",
        f"{estimate.lower:.10g} <= rho <= {estimate.upper:.10g} ({estimate.status.value})",
        lower=estimate.lower,
        upper=estimate.upper,
    )

    if estimate.upper < 1.0:
        verdict = Verdict.CONVERGENT
    elif estimate.lower >= 1.0 - config.analysis.verdict_tolerance:
        verdict = Verdict.NOT_CONVERGENT
    else:
        verdict = Verdict.INCONCLUSIVE
    trail.info("verdict", verdict.value)
    return ConvergenceReport(
        verdict=verdict,
        omega=omega,
        jsr=estimate,
        assumptions=assumptions,
        power=power,
        trail=trail.entries,
        family=restricted,
        difference_space=space,
    )


def _aggregate(points: np.ndarray, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sum values over equal rows; rows come back in lexicographic order."""
    if len(points) == 0:
        return points, values
    lo = points.min(axis=0)
    span = points.max(axis=0) - lo + 1
    if float(np.prod(span.astype(float))) < 2.0**62:
        strides = np.concatenate([np.cumprod(span[1:][::-1])[::-1], [1]]).astype(np.int64)
        keys = (points - lo) @ strides
        uniq, inverse = np.unique(keys, return_inverse=True)
        rows = np.empty((len(uniq), points.shape[1]), dtype=np.int64)
        rest = uniq.copy()
        for axis in range(points.shape[1]):
            rows[:, axis], rest = np.divmod(rest, strides[axis])
        rows += lo
    else:
        rows, inverse = np.unique(points, axis=0, return_inverse=True)
    sums = np.bincount(inverse.reshape(-1), weights=values, minlength=len(rows))
    return rows, sums


@dataclass(frozen=True)
class Cascade:
    """Floating-point subdivision data: integer points with values."""

    points: np.ndarray
    values: np.ndarray

    @classmethod
    def delta(cls, dim: int) -> "Cascade":
        return cls(np.zeros((1, dim), dtype=np.int64), np.ones(1))

    def refine(self, op: SubdivisionOp) -> "Cascade":
        """One step S c(alpha) = sum_beta a(alpha - M beta) c(beta)."""
        mask_points = np.array([p for p, _ in op.mask.coefficients], dtype=np.int64)
        mask_values = np.array([float(v) for _, v in op.mask.coefficients])
        m = np.array(op.dilation.rows, dtype=np.int64)
        base = self.points @ m.T
        new_points = (base[:, None, :] + mask_points[None, :, :]).reshape(-1, base.shape[1])
        new_values = (self.values[:, None] * mask_values[None, :]).reshape(-1)
        rows, sums = _aggregate(new_points, new_values)
        keep = sums != 0
        return Cascade(rows[keep], sums[keep])

    def max_difference(self) -> float:
        """max over axes l and points alpha of |c(alpha) - c(alpha - e_l)|."""
        best = 0.0
        dim = self.points.shape[1]
        for axis in range(dim):
            shift = np.zeros(dim, dtype=np.int64)
            shift[axis] = 1
            pts = np.concatenate([self.points, self.points + shift])
            vals = np.concatenate([self.values, -self.values])
            _, diffs = _aggregate(pts, vals)
            if len(diffs):
                best = max(best, float(np.max(np.abs(diffs))))
        return best


def _check_sum_rules_along(scheme: SchemeSet, letters: Sequence[int]) -> None:
    for j in sorted(set(letters)):
        if not check_sum_rules(scheme[j]).passed:
            raise SchemeValidationError(f"Operator {scheme[j].label} violates the sum rules")


def difference_decay(
    scheme: SchemeSet, sequence: OperatorSequence, n: int
) -> list[tuple[int, float]]:
    """
    (k, m_k) for k = 0..n with m_k = max |nabla_l (S_{j_k} ... S_{j_1} delta)|.

    The first letter of ``sequence`` is applied first; m_0 = 1.
    """
    sequence.validate(len(scheme))
    letters = sequence.take(n)
    _check_sum_rules_along(scheme, letters)
    cascade = Cascade.delta(scheme.dim)
    table = [(0, cascade.max_difference())]
    for k, j in enumerate(letters, start=1):
        cascade = cascade.refine(scheme[j])
        table.append((k, cascade.max_difference()))
        logger.debug("decay step %d: %d points, m = %.6g", k, len(cascade.values), table[-1][1])
    return table


@dataclass(frozen=True)
class PointCloud:
    """Points in parameter space, in canonical (lexicographic) order."""

    points: np.ndarray
    depth: int
    sequence: tuple[int, ...]
    values: Optional[np.ndarray] = None
    subsampled: bool = False

    def __len__(self) -> int:
        return len(self.points)

    def digest(self, decimals: int = 12) -> str:
        """sha256 of the points rounded to ``decimals`` and sorted."""
        rounded = np.round(self.points, decimals) + 0.0
        order = np.lexsort(rounded.T[::-1]) if len(rounded) else np.arange(0)
        return hashlib.sha256(np.ascontiguousarray(rounded[order]).tobytes()).hexdigest()


def _inverse_float(op: SubdivisionOp) -> np.ndarray:
    return np.array([[float(x) for x in row] for row in op.dilation.inverse])


def attractor_points(
    scheme: SchemeSet,
    sequence: OperatorSequence,
    n: int,
    budget: int = 1_000_000,
    seed: int = 0,
) -> PointCloud:
    """
    Truncated digit expansions sum_{r<=n} (M_{j_1}^-1 ... M_{j_r}^-1) d_r.

    All prod |D_{j_r}| expansions are returned when they fit in ``budget``;
    otherwise ``budget`` expansions are drawn with a seeded generator and the
    cloud is flagged ``subsampled``.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    sequence.validate(len(scheme))
    letters = sequence.take(n)
    s = scheme.dim
    total = 1
    for j in letters:
        total *= len(scheme[j].digits)
    product = np.eye(s)
    subsampled = total > budget
    rng = np.random.default_rng(seed)
    points = np.zeros((1 if not subsampled else budget, s))
    for j in letters:
        op = scheme[j]
        product = product @ _inverse_float(op)
        digits = np.array(op.digits.points, dtype=float) @ product.T
        if subsampled:
            points = points + digits[rng.integers(0, len(digits), size=budget)]
        else:
            points = (points[:, None, :] + digits[None, :, :]).reshape(-1, s)
    if subsampled:
        logger.warning("Attractor has %d expansions; sampled %d", total, budget)
    points = np.unique(points, axis=0)
    return PointCloud(points, n, letters, subsampled=subsampled)


def _integer_support(scheme: SchemeSet, letters: Sequence[int]) -> np.ndarray:
    """U_n with U_0 = {0} and U_k = M_{j_k} U_{k-1} + supp a_{j_k}."""
    pts = np.zeros((1, scheme.dim), dtype=np.int64)
    for j in letters:
        op = scheme[j]
        m = np.array(op.dilation.rows, dtype=np.int64)
        support = np.array(op.mask.support.points, dtype=np.int64)
        pts = ((pts @ m.T)[:, None, :] + support[None, :, :]).reshape(-1, scheme.dim)
        pts, _ = _aggregate(pts, np.zeros(len(pts)))
    return pts


def _parameter_map(scheme: SchemeSet, letters: Sequence[int]) -> np.ndarray:
    """M_{j_1}^-1 M_{j_2}^-1 ... M_{j_n}^-1 as a float matrix."""
    product = np.eye(scheme.dim)
    for j in letters:
        product = product @ _inverse_float(scheme[j])
    return product


def blf_support(
    scheme: SchemeSet,
    sequence: OperatorSequence,
    n: int,
    r: int = 1,
    budget: int = 1_000_000,
) -> PointCloud:
    """
    Support of S_{j_{r+n-1}} ... S_{j_r} delta in parameter space.

    Each support point alpha is mapped to M_{j_r}^-1 ... M_{j_{r+n-1}}^-1 alpha;
    the values of the sequence are carried along for rendering.

    Raises:
        BudgetExceededError: If the support grows beyond ``budget`` points
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    sequence.validate(len(scheme))
    letters = sequence.shifted(r).take(n)
    cascade = Cascade.delta(scheme.dim)
    for j in letters:
        cascade = cascade.refine(scheme[j])
        if len(cascade.values) > budget:
            raise BudgetExceededError(f"Support has {len(cascade.values)} points (budget {budget})")
    params = cascade.points.astype(float) @ _parameter_map(scheme, letters).T
    order = np.lexsort(np.round(params, 12).T[::-1])
    return PointCloud(params[order], n, letters, values=cascade.values[order])


def tail_bound(
    scheme: SchemeSet, sequence: OperatorSequence, n: int, radius: Sequence[float]
) -> float:
    """
    Bound on sum_{k>n} ||M_{j_1}^-1 ... M_{j_k}^-1||_2 * radius[j_k].

    Terms are summed explicitly up to t full periods past the prefix, where t
    is the smallest power making every rotation of the period product a 2-norm
    contraction q < 1; the rest is bounded geometrically by q. Returns inf if
    no t <= 64 works.
    """
    period = sequence.period
    rotations = []
    for phase in range(len(period)):
        rotations.append(_parameter_map(scheme, period[phase:] + period[:phase]))
    q, t = None, 0
    for t in range(1, 65):
        q_t = max(float(np.linalg.norm(np.linalg.matrix_power(c, t), 2)) for c in rotations)
        if q_t < 1:
            q = q_t
            break
    if q is None:
        return float("inf")
    stop = max(n, len(sequence.prefix)) + t * len(period)
    prod = _parameter_map(scheme, sequence.take(n))
    explicit = 0.0
    for k in range(n, stop):
        j = sequence.letter(k)
        prod = prod @ _inverse_float(scheme[j])
        explicit += float(np.linalg.norm(prod, 2)) * radius[j]
    return explicit / (1 - q)


def support_superset(
    scheme: SchemeSet, sequence: OperatorSequence, n: int, r: int = 1
) -> tuple[np.ndarray, float]:
    """
    Depth-n truncation of K_A for the word (j_r, j_{r+1}, ...) and its tail.

    Returns:
        (points, tail): the support of the basic limit function lies within
        distance ``tail`` of ``points``
    """
    sequence.validate(len(scheme))
    word = sequence.shifted(r)
    letters = word.take(n)
    points = _integer_support(scheme, letters).astype(float) @ _parameter_map(scheme, letters).T
    radius = [op.mask.support.norm2_max() for op in scheme]
    return points, tail_bound(scheme, word, n, radius)


@dataclass(frozen=True)
class CoverReport:
    covered: int
    total: int
    max_distance: float
    tolerance: float

    @property
    def holds(self) -> bool:
        return self.covered == self.total


def attractor_cover_check(
    scheme: SchemeSet,
    sequence: OperatorSequence,
    n: int,
    omega: LatticeSet,
    r: int = 1,
    budget: int = 1_000_000,
) -> CoverReport:
    """
    Test supp phi ⊆ Omega + K_D on depth-n approximations.

    A diagnostic only: the inclusion is not known to hold for every invariant
    Omega and nothing downstream relies on it.
    """
    word = sequence.shifted(r)
    cloud = blf_support(scheme, word, n, budget=budget)
    attractor = attractor_points(scheme, word, n, budget=budget)
    omega_pts = np.array(omega.points, dtype=float)
    cover = (omega_pts[:, None, :] + attractor.points[None, :, :]).reshape(-1, scheme.dim)
    radius_d = [op.digits.norm2_max() for op in scheme]
    radius_a = [op.mask.support.norm2_max() for op in scheme]
    tolerance = tail_bound(scheme, word, n, radius_d) + tail_bound(scheme, word, n, radius_a) + 1e-9
    distances, _ = cKDTree(cover).query(cloud.points)
    covered = int(np.sum(distances <= tolerance))
    max_distance = float(np.max(distances)) if len(distances) else 0.0
    return CoverReport(covered, len(cloud), max_distance, tolerance)


def superset_distance(
    scheme: SchemeSet,
    sequence: OperatorSequence,
    n: int,
    r: int = 1,
    budget: int = 1_000_000,
) -> tuple[float, float]:
    """
    Largest distance from a rendered support point to the truncated K_A set.

    Returns:
        (max_distance, tail): the rendering is consistent when
        max_distance <= 2 * tail
    """
    cloud = blf_support(scheme, sequence, n, r=r, budget=budget)
    points, tail = support_superset(scheme, sequence, n, r=r)
    distances, _ = cKDTree(points).query(cloud.points)
    return float(np.max(distances)) if len(distances) else 0.0, tail
