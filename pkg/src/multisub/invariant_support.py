"""
Finite index sets Omega on which every transition operator acts invariantly.

Two constructions are provided: the fixed-point iteration Omega_C, which is
small but may be disconnected, and the ball Omega_V, which is large but always
connected and requires ||M_j^-1||_2 < 1 for every operator.
"""

import itertools
import logging
import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Optional

from multisub.errors import (
    AssumptionNError,
    BudgetExceededError,
    InvarianceError,
    OmegaConstructionError,
)
from multisub.lattice import LatticeSet, Point, add, sub
from multisub.scheme import SchemeSet, check_assumption_n, check_sum_rules

logger = logging.getLogger(__name__)


class OmegaProvenance(str, Enum):
    ALGORITHMIC = "algorithmic"
    ENLARGED = "enlarged"
    BALL = "ball"
    USER = "user"


class OmegaPolicy(str, Enum):
    AUTO = "auto"
    OMEGA_C = "omega-c"
    OMEGA_V = "omega-v"


@dataclass(frozen=True)
class OmegaSet:
    points: LatticeSet
    provenance: OmegaProvenance
    seeded_from: LatticeSet

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def __contains__(self, point: object) -> bool:
        return point in self.points


@dataclass(frozen=True)
class DifferenceSpaceReport:
    """
    Dimensions of V_Omega (zero-sum vectors) and of its subspace spanned by
    differences of neighbouring impulses.

    ``spanning_edges`` holds (parent, child) pairs of a BFS spanning forest.
    """

    dim_v: int
    dim_vtilde: int
    components: int
    spanning_edges: tuple[tuple[Point, Point], ...]
    component_sets: tuple[LatticeSet, ...]
    omega: LatticeSet

    @property
    def connected(self) -> bool:
        return self.components == 1


@dataclass(frozen=True)
class InvarianceWitness:
    """a_j(M_j alpha - beta + d) != 0 with alpha outside and beta inside Omega."""

    op_label: str
    digit: Point
    alpha: Point
    beta: Point


@dataclass(frozen=True)
class InvarianceReport:
    ok: bool
    witnesses: tuple[InvarianceWitness, ...] = field(default_factory=tuple)
    column_sums_ok: Optional[bool] = None


def _omega_step(scheme: SchemeSet, omega: set[Point]) -> set[Point]:
    """One round of Omega <- Omega ∪ M_j^-1(supp a_j + Omega - D_j) ∩ Z^s, updated per j."""
    current = set(omega)
    for op in scheme:
        offsets = {sub(gamma, d) for gamma in op.mask.support for d in op.digits}
        candidates = {add(w, o) for w in current for o in offsets}
        for x in candidates:
            alpha = op.dilation.integral_preimage(x)
            if alpha is not None:
                current.add(alpha)
    return current


def construct_omega_c(
    scheme: SchemeSet,
    seed: Optional[LatticeSet] = None,
    max_rounds: int = 10_000,
) -> OmegaSet:
    """
    Smallest set reached from ``seed`` by the Omega_C fixed-point iteration.

    Args:
        scheme: Validated scheme set
        seed: Starting set (defaults to {0})
        max_rounds: Iteration cap

    Returns:
        OmegaSet with provenance ``algorithmic``

    Raises:
        OmegaConstructionError: If no fixed point is reached within ``max_rounds``
    """
    seed = seed if seed is not None else LatticeSet.origin(scheme.dim)
    omega = set(seed)
    for rounds in range(1, max_rounds + 1):
        updated = _omega_step(scheme, omega)
        if updated == omega:
            logger.debug("Omega_C reached a fixed point of %d points after %d rounds", len(omega), rounds)
            return OmegaSet(
                points=LatticeSet.of(omega, scheme.dim),
                provenance=OmegaProvenance.ALGORITHMIC,
                seeded_from=seed,
            )
        omega = updated
    raise OmegaConstructionError(
        f"No fixed point after {max_rounds} rounds; the dilations are probably not jointly expanding",
        witness=len(omega),
    )


def omega_v_radius(scheme: SchemeSet) -> float:
    """Radius (C_a + C_D) / (1 - C_M) of the Omega_V ball."""
    report = check_assumption_n(scheme)
    if not report.all_passed:
        failing = sorted(label for label, ok in report.passed.items() if not ok)
        raise AssumptionNError(
            f"||M^-1||_2 < 1 fails for operators {failing}; "
            "use power_scheme_set (S^n) before building Omega_V",
            witness=failing,
        )
    c_a = max(op.mask.support.norm2_max() for op in scheme)
    c_d = max(op.digits.norm2_max() for op in scheme)
    c_m = max(report.norms.values())
    return (c_a + c_d) / (1.0 - c_m)


def construct_omega_v(scheme: SchemeSet, max_points: int = 1_000_000) -> OmegaSet:
    """
    Integer points of the closed 2-norm ball of radius (C_a + C_D) / (1 - C_M).

    Raises:
        AssumptionNError: If some dilation has ||M^-1||_2 >= 1
        BudgetExceededError: If the ball holds more than ``max_points`` points
    """
    radius = omega_v_radius(scheme) * (1 + 1e-12)
    r = math.floor(radius)
    s = scheme.dim
    if (2 * r + 1) ** s > max_points * 4:
        raise BudgetExceededError(f"Omega_V box of radius {r} in dimension {s} is too large")
    bound = radius * radius
    points = [
        x for x in itertools.product(range(-r, r + 1), repeat=s) if sum(t * t for t in x) <= bound
    ]
    if len(points) > max_points:
        raise BudgetExceededError(f"Omega_V holds {len(points)} points (budget {max_points})")
    logger.info("Omega_V ball of radius %.6g holds %d points", radius, len(points))
    lattice = LatticeSet.of(points, s)
    return OmegaSet(points=lattice, provenance=OmegaProvenance.BALL, seeded_from=lattice)


def verify_invariance(scheme: SchemeSet, omega: LatticeSet) -> InvarianceReport:
    """
    Check that l(Omega) is invariant under every transition operator.

    Enumerates alpha = M_j^-1(gamma + beta - d) over gamma in supp a_j, beta in
    Omega and d in D_j; each integral alpha outside Omega is a witness. For
    nonnegative masks satisfying the sum rules the column-sum criterion is
    evaluated as a cross-check.
    """
    witnesses = set()
    for op in scheme:
        for d in op.digits:
            for beta in omega:
                for gamma in op.mask.support:
                    alpha = op.dilation.integral_preimage(sub(add(gamma, beta), d))
                    if alpha is not None and alpha not in omega:
                        witnesses.add(InvarianceWitness(op.label, d, alpha, beta))
    ordered = tuple(sorted(witnesses, key=lambda w: (w.op_label, w.digit, w.alpha, w.beta)))
    column_sums_ok = None
    if all(op.mask.is_nonnegative() and check_sum_rules(op).passed for op in scheme):
        column_sums_ok = column_sum_criterion(scheme, omega)
        if column_sums_ok != (not ordered):
            logger.error("Column-sum criterion disagrees with the direct invariance check")
    return InvarianceReport(ok=not ordered, witnesses=ordered, column_sums_ok=column_sums_ok)


def column_sum_criterion(scheme: SchemeSet, omega: LatticeSet) -> bool:
    """
    True iff every column of every T_{d,j} over ``omega`` sums to exactly 1.

    For nonnegative masks satisfying the sum rules this is equivalent to the
    invariance of l(Omega).
    """
    for op in scheme:
        for d in op.digits:
            for beta in omega:
                total = sum(
                    (op.mask[add(sub(op.dilation.apply(alpha), beta), d)] for alpha in omega),
                    Fraction(0),
                )
                if total != 1:
                    return False
    return True


def _neighbours(p: Point) -> list[Point]:
    out = []
    for axis in range(len(p)):
        for step in (-1, 1):
            q = list(p)
            q[axis] += step
            out.append(tuple(q))
    return sorted(out)


def difference_space_report(omega: LatticeSet) -> DifferenceSpaceReport:
    """
    Connected components of the l1-neighbour graph on ``omega``.

    dim V = |Omega| - 1 and dim V~ = |Omega| - components; the two agree exactly
    when the graph is connected.

    Raises:
        ValueError: If ``omega`` is empty
    """
    if len(omega) == 0:
        raise ValueError("Omega must not be empty")
    seen: set[Point] = set()
    edges: list[tuple[Point, Point]] = []
    components: list[LatticeSet] = []
    for root in omega:
        if root in seen:
            continue
        seen.add(root)
        queue = deque([root])
        members = [root]
        while queue:
            p = queue.popleft()
            for q in _neighbours(p):
                if q in omega and q not in seen:
                    seen.add(q)
                    edges.append((p, q))
                    members.append(q)
                    queue.append(q)
        components.append(LatticeSet.of(members, omega.dim))
    n = len(omega)
    return DifferenceSpaceReport(
        dim_v=n - 1,
        dim_vtilde=n - len(components),
        components=len(components),
        spanning_edges=tuple(edges),
        component_sets=tuple(components),
        omega=omega,
    )


def staircase(start: Point, end: Point) -> list[Point]:
    """Axis-monotone l1 path from ``start`` to ``end``, moving along axis 0 first."""
    path = [start]
    current = list(start)
    for axis in range(len(start)):
        step = 1 if end[axis] > current[axis] else -1
        while current[axis] != end[axis]:
            current[axis] += step
            path.append(tuple(current))
    return path


def join_components(report: DifferenceSpaceReport) -> LatticeSet:
    """
    Connect all components by staircases between closest point pairs.

    The component holding the lexicographically smallest point grows by
    repeatedly absorbing its nearest component; ties are broken by the
    lexicographic order of the (source, target) pair.
    """
    grown = set(report.component_sets[0])
    rest = [set(c) for c in report.component_sets[1:]]
    added = set(report.omega)
    while rest:
        _, p, q, idx = min(
            (sum(abs(t) for t in sub(p, q)), p, q, idx)
            for idx, comp in enumerate(rest)
            for p in sorted(grown)
            for q in sorted(comp)
        )
        path = staircase(p, q)
        added.update(path)
        grown.update(path)
        grown.update(rest.pop(idx))
    return LatticeSet.of(added, report.omega.dim)


def select_omega(
    scheme: SchemeSet,
    policy: OmegaPolicy | str = OmegaPolicy.AUTO,
    max_rounds: int = 10_000,
    join_retries: int = 4,
    max_points: int = 1_000_000,
) -> OmegaSet:
    """
    Pick an invariant Omega whose l1-neighbour graph is connected.

    ``auto`` returns Omega_C when it is connected; otherwise components are
    joined by staircases and Omega_C is rebuilt from the joined seed, up to
    ``join_retries`` times, before falling back to the Omega_V ball.
    ``omega-c`` returns Omega_C unconditionally and ``omega-v`` the ball.

    Raises:
        AssumptionNError: If the Omega_V fallback is needed but unavailable
    """
    policy = OmegaPolicy(policy)
    if policy is OmegaPolicy.OMEGA_V:
        return construct_omega_v(scheme, max_points=max_points)
    omega = construct_omega_c(scheme, max_rounds=max_rounds)
    if policy is OmegaPolicy.OMEGA_C:
        return omega
    report = difference_space_report(omega.points)
    if report.connected:
        return omega
    for attempt in range(1, join_retries + 1):
        logger.info(
            "Omega has %d components (attempt %d): joining and rebuilding", report.components, attempt
        )
        seed = join_components(report)
        rebuilt = construct_omega_c(scheme, seed=seed, max_rounds=max_rounds)
        report = difference_space_report(rebuilt.points)
        if report.connected:
            return OmegaSet(points=rebuilt.points, provenance=OmegaProvenance.ENLARGED, seeded_from=seed)
    logger.warning("Omega_C stays disconnected after %d joins; using the Omega_V ball", join_retries)
    return construct_omega_v(scheme, max_points=max_points)


def user_omega(scheme: SchemeSet, points: LatticeSet) -> OmegaSet:
    """Wrap a user-supplied set, refusing it unless it is invariant."""
    report = verify_invariance(scheme, points)
    if not report.ok:
        raise InvarianceError(
            f"{len(report.witnesses)} stencil leaks out of the supplied set",
            witness=report.witnesses[0],
        )
    return OmegaSet(points=points, provenance=OmegaProvenance.USER, seeded_from=points)
