"""
multisub - convergence analysis of multiple subdivision schemes.

Subdivision operators may change both their mask and their dilation matrix
at every level. Convergence is decided by building transition matrices over
a computed invariant lattice set and bracketing the joint spectral radius of
their restrictions to the difference space.

Example:
    >>> from multisub import SchemeSet, SubdivisionOp, analyze_convergence
    >>> op = SubdivisionOp.build({0: "1/2", 1: 1, 2: "1/2"}, 2)
    >>> analyze_convergence(SchemeSet.of([op])).verdict.value
    'convergent'
"""

from multisub.analysis import (
    ConvergenceReport,
    OperatorSequence,
    PointCloud,
    Verdict,
    analyze_convergence,
    attractor_points,
    blf_support,
    difference_decay,
    support_superset,
)
from multisub.config import MultisubConfig, load_config
from multisub.formats import dump_scheme, load_scheme, parse_scheme
from multisub.invariant_support import construct_omega_c, construct_omega_v, difference_space_report, select_omega
from multisub.jsr import JsrEstimate, MatrixFamily, jsr_estimate
from multisub.lattice import IntMatrix, LatticeSet, digit_set
from multisub.scheme import Mask, SchemeSet, SubdivisionOp, power_scheme_set
from multisub.transition import build_transition_matrices, restrict_to_difference_space

__version__ = "0.1.0"

__all__ = [
    "ConvergenceReport",
    "IntMatrix",
    "JsrEstimate",
    "LatticeSet",
    "Mask",
    "MatrixFamily",
    "MultisubConfig",
    "OperatorSequence",
    "PointCloud",
    "SchemeSet",
    "SubdivisionOp",
    "Verdict",
    "analyze_convergence",
    "attractor_points",
    "blf_support",
    "build_transition_matrices",
    "construct_omega_c",
    "construct_omega_v",
    "difference_decay",
    "difference_space_report",
    "digit_set",
    "dump_scheme",
    "jsr_estimate",
    "load_config",
    "load_scheme",
    "parse_scheme",
    "power_scheme_set",
    "restrict_to_difference_space",
    "select_omega",
    "support_superset",
]
