"""
Joint spectral radius bracketing for finite matrix families.

Lower bounds come from spectral radii of cyclic products (one word per
rotation class, enumerated as Lyndon words). Upper bounds come from an
invariant polytope at the level of the best cyclic product, from a polytope
invariant at a slightly relaxed level, or from norms of products. Arithmetic
is double precision; the exact rational matrices are only used to detect
duplicates and by :func:`certify_unit_eigenvalue`.
"""

import logging
import math
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from functools import reduce
from typing import Iterator, Optional, Sequence

import numpy as np
from scipy.optimize import linprog

from multisub.config import JsrConfig
from multisub.rational import Matrix, determinant, identity, mat_mul, mat_sub

logger = logging.getLogger(__name__)

Word = tuple[int, ...]

_CHUNK = 512
_SEED_TOL = 1e-9
_MAX_SEEDS = 16


class JsrStatus(str, Enum):
    EXACT = "exact"
    EXACT_POLYTOPE = "exact-polytope"
    BRACKET = "bracket"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class MatrixFamily:
    """Non-empty family of equally sized square matrices."""

    matrices: tuple[np.ndarray, ...]
    labels: tuple[str, ...]
    exact: Optional[tuple[Matrix, ...]] = field(default=None, compare=False)

    def __post_init__(self):
        if not self.matrices:
            raise ValueError("A matrix family needs at least one matrix")
        shapes = {m.shape for m in self.matrices}
        if len(shapes) != 1:
            raise ValueError(f"Matrices have different shapes: {sorted(shapes)}")
        (shape,) = shapes
        if len(shape) != 2 or shape[0] != shape[1]:
            raise ValueError(f"Matrices must be square, got shape {shape}")
        if len(self.labels) != len(self.matrices):
            raise ValueError("One label per matrix is required")

    @classmethod
    def of(cls, matrices: Sequence, labels: Optional[Sequence[str]] = None) -> "MatrixFamily":
        arrays = tuple(np.atleast_2d(np.asarray(m, dtype=float)) for m in matrices)
        if arrays and all(a.size == 0 for a in arrays):
            arrays = tuple(np.zeros((0, 0)) for _ in arrays)
        labels = tuple(labels) if labels is not None else tuple(str(i) for i in range(len(arrays)))
        return cls(matrices=arrays, labels=labels)

    @classmethod
    def from_rational(cls, matrices: Sequence[Matrix], labels: Sequence[str]) -> "MatrixFamily":
        """Convert exact matrices once, keeping them for exact certificates."""
        arrays = []
        for m in matrices:
            n = len(m)
            arrays.append(np.array([[float(x) for x in row] for row in m], dtype=float).reshape(n, n))
        return cls(matrices=tuple(arrays), labels=tuple(labels), exact=tuple(matrices))

    @property
    def dim(self) -> int:
        return self.matrices[0].shape[0]

    def __len__(self) -> int:
        return len(self.matrices)

    def scaled(self, factor: float) -> "MatrixFamily":
        return MatrixFamily(tuple(m * factor for m in self.matrices), self.labels)

    def similar(self, basis: np.ndarray) -> "MatrixFamily":
        """The family P^-1 A P for an invertible ``basis`` P; exact matrices are kept."""
        inverse = np.linalg.inv(basis)
        return MatrixFamily(tuple(inverse @ m @ basis for m in self.matrices), self.labels, self.exact)


@dataclass(frozen=True)
class LowerBound:
    """
    Best cyclic product found.

    ``ties`` lists the words whose value is within a relative 1e-9 of ``value``,
    ``word`` first, then by length and lexicographically.
    """

    value: float
    word: Word
    ties: tuple[Word, ...] = ()


@dataclass(frozen=True)
class UpperBound:
    value: float
    depth: int
    exhausted: bool = False
    products: int = 0


@dataclass(frozen=True)
class RelaxedPolytope:
    """Outcome of a polytope search for the family divided by ``level``."""

    level: float
    vertices: int
    closed: bool
    tolerance: float

    @property
    def upper(self) -> float:
        return self.level * (1 + self.tolerance) if self.closed else float("inf")


@dataclass(frozen=True)
class JsrEstimate:
    """
    Bracket lower <= JSR <= upper.

    ``lower_word`` is a word whose product attains ``lower``; ``upper_certificate``
    records how ``upper`` was obtained.
    """

    lower: float
    upper: float
    lower_word: Word
    status: JsrStatus
    upper_certificate: dict = field(default_factory=dict)
    depth: Optional[int] = None
    vertices: Optional[int] = None

    @property
    def closed(self) -> bool:
        return self.status in (JsrStatus.EXACT, JsrStatus.EXACT_POLYTOPE)


def spectral_radius(matrix: np.ndarray) -> float:
    if matrix.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(matrix))))


def word_product(matrices: Sequence[np.ndarray], word: Sequence[int]) -> np.ndarray:
    """A_{w_1} A_{w_2} ... A_{w_k}, multiplied left to right."""
    return reduce(np.matmul, (matrices[i] for i in word))


def word_value(family: MatrixFamily, word: Sequence[int]) -> float:
    """rho(product(word)) ** (1 / len(word))."""
    return spectral_radius(word_product(family.matrices, word)) ** (1.0 / len(word))


def lyndon_words(alphabet: int, max_len: int) -> Iterator[Word]:
    """Lyndon words of length <= max_len in lexicographic order (Duval)."""
    if alphabet < 1 or max_len < 1:
        return
    w = [-1]
    while w:
        w[-1] += 1
        yield tuple(w)
        m = len(w)
        while len(w) < max_len:
            w.append(w[-m])
        while w and w[-1] == alphabet - 1:
            w.pop()


def lyndon_count(alphabet: int, length: int) -> int:
    """Number of Lyndon words of exactly ``length`` letters (necklace formula)."""
    total = 0
    for d in range(1, length + 1):
        if length % d == 0:
            total += _mobius(d) * alphabet ** (length // d)
    return total // length


def _mobius(n: int) -> int:
    result, p = 1, 2
    while p * p <= n:
        if n % p == 0:
            n //= p
            if n % p == 0:
                return 0
            result = -result
        p += 1
    return -result if n > 1 else result


def _better(value: float, word: Word, best: Optional[LowerBound], tol: float) -> bool:
    if best is None:
        return True
    if value > best.value * (1 + tol) + tol:
        return True
    if value >= best.value * (1 - tol) - tol:
        return (len(word), word) < (len(best.word), best.word)
    return False


def _chunk_leaders(family: MatrixFamily, words: Sequence[Word]) -> list[tuple[float, Word]]:
    """Words of the chunk whose value is within _SEED_TOL of the chunk maximum, in order."""
    values = [(word_value(family, word), word) for word in words]
    top = max(v for v, _ in values)
    return [(v, w) for v, w in values if v >= top * (1 - _SEED_TOL)]


def jsr_lower_bound(
    family: MatrixFamily,
    max_len: int = 6,
    threads: int = 1,
    tol: float = 1e-12,
    max_words: int = 2_000_000,
) -> LowerBound:
    """
    max over Lyndon words w with |w| <= max_len of rho(A_w) ** (1/|w|).

    Values within ``tol`` (relative) are ties, resolved towards the shorter and
    then the lexicographically smaller word. Chunks are fixed and reduced in
    order, so the result does not depend on ``threads``.

    The word length is reduced while more than ``max_words`` words would be
    enumerated.

    Raises:
        ValueError: If ``max_len`` < 1 or the family has dimension 0
    """
    if max_len < 1:
        raise ValueError("max_len must be at least 1")
    if family.dim == 0:
        raise ValueError("Lower bounds need matrices of positive dimension")
    while max_len > 1 and sum(lyndon_count(len(family), k) for k in range(1, max_len + 1)) > max_words:
        max_len -= 1
        logger.warning("Too many cyclic words; lower-bound word length reduced to %d", max_len)
    words = list(lyndon_words(len(family), max_len))
    chunks = [words[i : i + _CHUNK] for i in range(0, len(words), _CHUNK)]
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            partial = list(pool.map(lambda c: _chunk_leaders(family, c), chunks))
    else:
        partial = [_chunk_leaders(family, c) for c in chunks]

    leaders = [candidate for part in partial for candidate in part]
    top = max(v for v, _ in leaders)
    near = [(v, w) for v, w in leaders if v >= top * (1 - _SEED_TOL)]
    best = None
    for value, word in near:
        if _better(value, word, best, tol):
            best = LowerBound(value, word)
    others = sorted((w for _, w in near if w != best.word), key=lambda w: (len(w), w))
    ties = (best.word, *others)[:_MAX_SEEDS]
    logger.debug(
        "Lower bound %.12g from %d Lyndon words, word %s (%d near-ties)",
        best.value,
        len(words),
        best.word,
        len(near) - 1,
    )
    return LowerBound(best.value, best.word, ties)


def _norm(matrix: np.ndarray, norm: str) -> float:
    return float(np.linalg.norm(matrix, np.inf if norm == "inf" else 2))


def _search_depth(count: int, max_len: int, budget: int) -> int:
    """Largest k <= max_len with count + count^2 + ... + count^k <= budget."""
    total, k = 0, 0
    while k < max_len and total + count ** (k + 1) <= budget:
        k += 1
        total += count**k
    return k


def jsr_upper_bound(
    family: MatrixFamily,
    max_len: int = 8,
    norm: str = "inf",
    product_budget: int = 400_000,
    prune_below: float = 0.0,
) -> UpperBound:
    """
    Upper bound from the norms of the products of length <= max_len.

    A single depth-first pass forms each product once from its prefix and
    tracks two bounds:

    - the level bound, min over k of (max over |w| = k of ||A_w||) ** (1/k);
    - the prefix bound, max over |w| = K of min over i <= K of
      ||A_{w_1} ... A_{w_i}|| ** (1/i), with K the search depth.

    A prefix with some rate at most ``prune_below`` is not extended. It still
    bounds every extension in the prefix bound, but levels past it no longer
    count for the level bound. When the budget cannot cover all products up to
    ``max_len`` the depth is reduced and the result is flagged ``exhausted``.

    Raises:
        ValueError: If ``max_len`` < 1 or ``norm`` is unknown
    """
    if max_len < 1:
        raise ValueError("max_len must be at least 1")
    if norm not in ("inf", "2"):
        raise ValueError(f"Unknown norm {norm!r}")
    mats = family.matrices
    depth = _search_depth(len(mats), max_len, product_budget)
    exhausted = depth < max_len
    if exhausted:
        logger.info("Product budget %d covers products up to length %d", product_budget, depth)
    if depth == 0:
        return UpperBound(float("inf"), 0, exhausted=True, products=0)

    level_max = [0.0] * (depth + 1)
    complete = depth
    prefix_bound = 0.0
    products = 0
    stack = [(m, 1, math.inf) for m in reversed(mats)]
    while stack:
        product, length, path_min = stack.pop()
        products += 1
        size = _norm(product, norm)
        level_max[length] = max(level_max[length], size)
        path_min = min(path_min, size ** (1.0 / length))
        if length == depth or path_min <= prune_below:
            prefix_bound = max(prefix_bound, path_min)
            if length < depth:
                complete = min(complete, length)
        else:
            stack.extend((product @ m, length + 1, path_min) for m in reversed(mats))

    best, best_depth = prefix_bound, depth
    for k in range(1, complete + 1):
        value = level_max[k] ** (1.0 / k)
        if value < best:
            best, best_depth = value, k
    logger.debug("Norm products: %d products, bound %.12g at depth %d", products, best, best_depth)
    return UpperBound(best, best_depth, exhausted=exhausted, products=products)


def _gauge(vertices: list[np.ndarray], x: np.ndarray) -> float:
    """
    Minkowski functional of absconv(vertices) at x, via the LP
    min sum(t+ + t-) s.t. V (t+ - t-) = x, t >= 0. Infeasible gives inf.
    """
    v = np.column_stack(vertices)
    m = v.shape[1]
    res = linprog(
        np.ones(2 * m),
        A_eq=np.hstack([v, -v]),
        b_eq=x,
        bounds=(0, None),
        method="highs",
    )
    if res.status != 0:
        return float("inf")
    return float(res.fun)


def _complement_vertices(vertices: list[np.ndarray], n: int, scale: float) -> list[np.ndarray]:
    """Orthonormal basis of span(vertices)^perp, scaled, or [] if they span."""
    v = np.column_stack(vertices)
    u, s, _ = np.linalg.svd(v, full_matrices=True)
    rank = int(np.sum(s > 1e-10 * max(s[0], 1.0)))
    return [u[:, i] * scale for i in range(rank, n)]


def _leading_vector(family: MatrixFamily, word: Word) -> tuple[float, Optional[np.ndarray]]:
    """rho(A_word) and a unit real leading eigenvector, None if there is none."""
    eigvals, eigvecs = np.linalg.eig(word_product(family.matrices, word))
    lead = int(np.argmax(np.abs(eigvals)))
    rho = float(np.abs(eigvals[lead]))
    if rho == 0.0 or abs(eigvals[lead].imag) > 1e-9 * rho:
        return rho, None
    v = np.real(eigvecs[:, lead])
    return rho, v / np.linalg.norm(v)


def _grow(
    scaled: Sequence[np.ndarray],
    vertices: list[np.ndarray],
    max_vertices: int,
    tol: float,
    inner_l1: float = 0.0,
) -> bool:
    """
    Absorb images of vertices that leave (1 + tol) absconv(vertices).

    Images with l1 norm at most ``inner_l1`` are taken as inside without an LP.
    Returns True once every image of every vertex is inside, False when more
    than ``max_vertices`` vertices would be needed.
    """
    queue = deque(vertices)
    while queue:
        u = queue.popleft()
        for a in scaled:
            x = a @ u
            if np.linalg.norm(x) <= 1e-14 or np.abs(x).sum() <= inner_l1:
                continue
            if _gauge(vertices, x) > 1 + tol:
                vertices.append(x)
                queue.append(x)
                if len(vertices) > max_vertices:
                    return False
    return True


def jsr_polytope(
    family: MatrixFamily,
    word: Sequence[int],
    max_vertices: int = 200,
    lp_tol: float = 1e-8,
    seeds: Sequence[Sequence[int]] = (),
) -> JsrEstimate:
    """
    Try to certify rho(A_word) ** (1/|word|) as the JSR with an invariant polytope.

    The family is scaled by 1/rho_hat and a symmetric vertex set is grown from
    the leading eigenvector of the candidate product, together with those of
    the ``seeds`` words attaining the same value. If every image of every
    vertex falls inside the absolute convex hull the polytope norm is
    extremal and the status is ``exact-polytope``. Vertex sets that do not
    span are completed by small complement vertices. Otherwise the status is
    ``bracket`` with an infinite ``upper``.
    """
    word = tuple(word)
    n = family.dim
    rho, v0 = _leading_vector(family, word)
    rho_hat = rho ** (1.0 / len(word)) if rho > 0 else 0.0

    def fallback(reason: str, vertices: int = 0) -> JsrEstimate:
        logger.info("Polytope search for word %s gave up: %s", word, reason)
        return JsrEstimate(
            lower=rho_hat,
            upper=float("inf"),
            lower_word=word,
            status=JsrStatus.BRACKET,
            upper_certificate={"method": "polytope", "reason": reason},
            vertices=vertices or None,
        )

    if rho_hat == 0.0:
        return fallback("candidate product is nilpotent")
    if v0 is None:
        return fallback("leading eigenvalue is not real")

    vertices = [v0]
    for seed in seeds:
        seed = tuple(seed)
        if seed == word:
            continue
        rho_s, v = _leading_vector(family, seed)
        if v is None or rho_s ** (1.0 / len(seed)) < rho_hat * (1 - _SEED_TOL):
            continue
        if _gauge(vertices, v) > 1 + lp_tol:
            vertices.append(v)
    seeded = len(vertices)

    scaled = [m / rho_hat for m in family.matrices]
    if _grow(scaled, vertices, max_vertices, lp_tol):
        extra = _complement_vertices(vertices, n, 1e-3)
        if extra:
            vertices.extend(extra)
            closed = _grow(scaled, vertices, max_vertices, lp_tol)
        else:
            closed = True
        if closed:
            logger.debug("Invariant polytope with %d vertices for word %s", len(vertices), word)
            return JsrEstimate(
                lower=rho_hat,
                upper=rho_hat,
                lower_word=word,
                status=JsrStatus.EXACT_POLYTOPE,
                upper_certificate={"method": "polytope", "vertices": len(vertices), "seeds": seeded},
                vertices=len(vertices),
            )
    return fallback(f"more than {max_vertices} vertices", vertices=len(vertices))


def jsr_relaxed_polytope(
    family: MatrixFamily,
    level: float,
    seeds: Sequence[Sequence[int]] = (),
    max_vertices: int = 400,
    tol: float = 1e-6,
) -> RelaxedPolytope:
    """
    Try to show JSR <= level * (1 + tol) with a polytope invariant under A_i / level.

    The polytope starts as the unit cross-polytope plus the real leading
    eigenvectors of the ``seeds`` words, and images outside it are added as
    vertices. Once every image of every vertex is inside, the polytope norm
    gives ||A_i|| <= level * (1 + tol) for each i. For a level above the JSR
    the search always closes; ``max_vertices`` (cross-polytope included)
    bounds the work otherwise.

    Raises:
        ValueError: If ``level`` is not positive or the family has dimension 0
    """
    if level <= 0:
        raise ValueError("level must be positive")
    n = family.dim
    if n == 0:
        raise ValueError("Polytopes need matrices of positive dimension")
    eye = np.eye(n)
    vertices = [eye[:, i] for i in range(n)]
    for seed in seeds:
        _, v = _leading_vector(family, tuple(seed))
        if v is not None and np.abs(v).sum() > 1 and _gauge(vertices, v) > 1 + tol:
            vertices.append(v)
    scaled = [m / level for m in family.matrices]
    closed = n <= max_vertices and _grow(scaled, vertices, max_vertices, tol, inner_l1=1.0)
    logger.debug(
        "Relaxed polytope at level %.12g: %s with %d vertices",
        level,
        "closed" if closed else "open",
        len(vertices),
    )
    return RelaxedPolytope(level=level, vertices=len(vertices), closed=closed, tolerance=tol)


def _dedupe(family: MatrixFamily) -> list[int]:
    if family.exact is not None:
        items, same = family.exact, (lambda a, b: a == b)
    else:
        items, same = family.matrices, np.array_equal
    kept: list[int] = []
    for i, m in enumerate(items):
        if not any(same(m, items[j]) for j in kept):
            kept.append(i)
    return kept


def jsr_estimate(family: MatrixFamily, config: Optional[JsrConfig] = None) -> JsrEstimate:
    """
    Bracket the JSR: cyclic-product lower bound, then upper bounds.

    The invariant polytope at the lower-bound level closes the bracket when
    it exists. Otherwise the upper bound is the best of the relaxed polytope
    (levels lower * (1 + step), largest step first, stopping at the first
    level that does not close) and the pruned norm-product search.

    Families of 0x0 matrices have JSR 0 and singletons (after removing
    duplicate matrices) their spectral radius, both with status ``exact``.
    The returned bracket always satisfies lower <= upper.
    """
    config = config or JsrConfig()
    if family.dim == 0:
        return JsrEstimate(0.0, 0.0, (), JsrStatus.EXACT, {"method": "zero-dimension"})

    kept = _dedupe(family)
    if len(kept) == 1:
        rho = spectral_radius(family.matrices[kept[0]])
        return JsrEstimate(rho, rho, (kept[0],), JsrStatus.EXACT, {"method": "singleton"}, depth=1)

    lower = jsr_lower_bound(family, config.lower_max_len, threads=config.threads)
    if config.max_vertices > 0 and lower.value > 0:
        polytope = jsr_polytope(family, lower.word, config.max_vertices, config.lp_tolerance, lower.ties)
        if polytope.status is JsrStatus.EXACT_POLYTOPE:
            return JsrEstimate(
                lower=lower.value,
                upper=max(polytope.upper, lower.value),
                lower_word=lower.word,
                status=JsrStatus.EXACT_POLYTOPE,
                upper_certificate=polytope.upper_certificate,
                vertices=polytope.vertices,
            )

    relaxed = None
    if config.relax_max_vertices > 0 and lower.value > 0:
        for step in sorted(config.relax_steps, reverse=True):
            attempt = jsr_relaxed_polytope(
                family, lower.value * (1 + step), lower.ties, config.relax_max_vertices, config.relax_tolerance
            )
            if not attempt.closed:
                break
            relaxed = attempt

    norm_bound = jsr_upper_bound(
        family, config.upper_depth, config.norm, config.product_budget, prune_below=lower.value
    )
    upper = norm_bound.value
    certificate = {
        "method": "norm-products",
        "norm": config.norm,
        "depth": norm_bound.depth,
        "exhausted": norm_bound.exhausted,
    }
    vertices = None
    if relaxed is not None and relaxed.upper < upper:
        upper = relaxed.upper
        certificate = {
            "method": "relaxed-polytope",
            "level": relaxed.level,
            "tolerance": relaxed.tolerance,
            "vertices": relaxed.vertices,
        }
        vertices = relaxed.vertices
    status = JsrStatus.BRACKET if np.isfinite(upper) else JsrStatus.INCONCLUSIVE
    return JsrEstimate(
        lower=lower.value,
        upper=max(upper, lower.value),
        lower_word=lower.word,
        status=status,
        upper_certificate=certificate,
        depth=norm_bound.depth or None,
        vertices=vertices,
    )


def exact_word_product(matrices: Sequence[Matrix], word: Sequence[int]) -> Matrix:
    return reduce(mat_mul, (matrices[i] for i in word))


def certify_unit_eigenvalue(matrices: Sequence[Matrix], word: Sequence[int]) -> bool:
    """
    True iff the exact product along ``word`` has eigenvalue 1 or -1.

    A True answer proves rho(product) >= 1, hence a JSR lower bound of 1.
    """
    if not word or not matrices or len(matrices[0]) == 0:
        return False
    product = exact_word_product(matrices, word)
    eye = identity(len(product))
    if determinant(mat_sub(product, eye)) == 0:
        return True
    plus = tuple(tuple(p + e for p, e in zip(rp, re)) for rp, re in zip(product, eye))
    return determinant(plus) == 0
