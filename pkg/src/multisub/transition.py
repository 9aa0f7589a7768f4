"""
Transition matrices T_{d,j,Omega} and their restriction to V_Omega.

Rows are indexed by alpha and columns by beta, both in the canonical order of
Omega; entry (alpha, beta) is a_j(M_j alpha - beta + d).
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from multisub.errors import DisconnectedOmegaError, InvarianceError
from multisub.invariant_support import DifferenceSpaceReport, OmegaSet, verify_invariance
from multisub.lattice import LatticeSet, Point, add, sub
from multisub.rational import Matrix, is_zero, left_inverse, mat_mul, mat_sub, transpose
from multisub.scheme import SchemeSet, SubdivisionOp

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TransitionMatrix:
    entries: Matrix
    digit: Point
    op_label: str
    op_index: int
    omega: LatticeSet

    @property
    def label(self) -> str:
        return f"{self.op_label}:{','.join(map(str, self.digit))}"

    def column_sums(self) -> tuple[Fraction, ...]:
        n = len(self.entries)
        return tuple(sum((self.entries[i][j] for i in range(n)), Fraction(0)) for j in range(n))


@dataclass(frozen=True)
class RestrictedFamily:
    """
    Transition matrices restricted to V_Omega in a fixed basis.

    ``basis`` holds the basis vectors (coordinates over Omega); each restricted
    matrix R satisfies T B = B R with B the basis vectors as columns.
    """

    basis: tuple[tuple[Fraction, ...], ...]
    matrices: tuple[Matrix, ...]
    index: dict[tuple[int, Point], int]
    labels: tuple[str, ...]
    transitions: tuple[TransitionMatrix, ...]

    @property
    def dim(self) -> int:
        return len(self.basis)

    def __len__(self) -> int:
        return len(self.matrices)


def transition_matrix_over(op: SubdivisionOp, digit: Point, order: Sequence[Point]) -> Matrix:
    """Entries a(M alpha - beta + d) over an arbitrary point order."""
    images = [op.dilation.apply(alpha) for alpha in order]
    return tuple(
        tuple(op.mask[add(sub(m_alpha, beta), digit)] for beta in order) for m_alpha in images
    )


def build_transition_matrices(scheme: SchemeSet, omega: LatticeSet | OmegaSet) -> list[TransitionMatrix]:
    """
    One transition matrix per operator and digit, operators first.

    Raises:
        InvarianceError: If l(Omega) is not invariant under the transition operators
    """
    lattice = omega if isinstance(omega, LatticeSet) else omega.points
    report = verify_invariance(scheme, lattice)
    if not report.ok:
        raise InvarianceError(
            f"Omega is not invariant: {len(report.witnesses)} leaking stencil entries",
            witness=report.witnesses[0],
        )
    result = []
    for j, op in enumerate(scheme):
        for d in op.digits:
            entries = transition_matrix_over(op, d, lattice.points)
            result.append(TransitionMatrix(entries, d, op.label, j, lattice))
    logger.debug("Built %d transition matrices of size %d", len(result), len(lattice))
    return result


def spanning_tree_basis(report: DifferenceSpaceReport) -> tuple[tuple[Fraction, ...], ...]:
    """delta_child - delta_parent for each spanning-tree edge."""
    omega = report.omega
    basis = []
    for parent, child in report.spanning_edges:
        v = [Fraction(0)] * len(omega)
        v[omega.index(child)] = Fraction(1)
        v[omega.index(parent)] = Fraction(-1)
        basis.append(tuple(v))
    return tuple(basis)


def star_basis(n: int) -> tuple[tuple[Fraction, ...], ...]:
    """e_i - e_0 for i = 1, ..., n-1."""
    basis = []
    for i in range(1, n):
        v = [Fraction(0)] * n
        v[i] = Fraction(1)
        v[0] = Fraction(-1)
        basis.append(tuple(v))
    return tuple(basis)


def restrict_in_basis(
    transitions: Sequence[TransitionMatrix], basis: Sequence[Sequence[Fraction]]
) -> RestrictedFamily:
    """
    Restrict every transition matrix to the span of ``basis``.

    Computes R = L T B with L an exact left inverse of B and checks T B = B R.

    Raises:
        ValueError: If the basis vectors are dependent or do not sum to zero
        InvarianceError: If some T does not map the span into itself
    """
    basis = tuple(tuple(Fraction(x) for x in v) for v in basis)
    for v in basis:
        if sum(v) != 0:
            raise ValueError("Basis vectors must have zero coordinate sum")
    index = {(t.op_index, t.digit): i for i, t in enumerate(transitions)}
    labels = tuple(t.label for t in transitions)
    if not basis:
        return RestrictedFamily((), tuple(() for _ in transitions), index, labels, tuple(transitions))
    b = transpose(basis)
    left = left_inverse(b)
    matrices = []
    for t in transitions:
        tb = mat_mul(t.entries, b)
        r = mat_mul(left, tb)
        if not is_zero(mat_sub(mat_mul(b, r), tb)):
            raise InvarianceError(
                f"{t.label} does not map the difference space into itself", witness=t.label
            )
        matrices.append(r)
    return RestrictedFamily(basis, tuple(matrices), index, labels, tuple(transitions))


def restrict_to_difference_space(
    transitions: Sequence[TransitionMatrix], report: DifferenceSpaceReport
) -> RestrictedFamily:
    """
    Restrict to V_Omega in the spanning-tree basis.

    Raises:
        DisconnectedOmegaError: If the l1-neighbour graph of Omega is disconnected
    """
    if not report.connected:
        raise DisconnectedOmegaError(
            f"Omega splits into {report.components} components (dim V = {report.dim_v}, "
            f"dim V~ = {report.dim_vtilde}); enlarge it with select_omega",
            witness=[c.points for c in report.component_sets],
        )
    return restrict_in_basis(transitions, spanning_tree_basis(report))
