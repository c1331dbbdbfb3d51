"""Complex linear algebra and distribution metrics shared by all simulation layers.

Transfer matrices act on column vectors of mode amplitudes.  A lossless
circuit is unitary; uniform loss scales the matrix below unity (sub-unitary).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Hashable, Iterable, Sequence

import numpy as np

from .errors import DimensionError, NormalizationError, OutcomeMismatchError

__all__ = [
    "ProbabilityDistribution",
    "as_complex_matrix",
    "haar_random_unitary",
    "is_submatrix_of_unitary",
    "is_subunitary",
    "is_unitary",
    "matrix_distance",
    "permanent",
    "statistical_fidelity",
]

#: Largest matrix order accepted by :func:`permanent` (cost doubles per row).
PERMANENT_MAX_ORDER = 20

#: Probability sums within this tolerance of one count as normalized.
NORMALIZATION_TOL = 1e-9


def as_complex_matrix(m: object) -> np.ndarray:
    """Coerce input to a 2-d complex array, rejecting non-finite entries."""
    arr = np.asarray(m, dtype=np.complex128)
    if arr.ndim != 2:
        raise DimensionError(f"expected a 2-d matrix, got ndim={arr.ndim}")
    if not np.all(np.isfinite(arr.real)) or not np.all(np.isfinite(arr.imag)):
        raise ValueError("matrix entries must be finite")
    return arr


def is_unitary(m: object, tol: float = 1e-10) -> bool:
    """Whether ``m`` is square and satisfies m†m = I within ``tol`` (max norm)."""
    arr = as_complex_matrix(m)
    if arr.shape[0] != arr.shape[1]:
        return False
    gram = arr.conj().T @ arr
    return bool(np.max(np.abs(gram - np.eye(arr.shape[0]))) <= tol)


def is_subunitary(m: object, tol: float = 1e-10) -> bool:
    """Whether every singular value of ``m`` is at most 1 + ``tol``.

    Sub-unitary matrices describe lossy but passive circuits: no output
    power can exceed the corresponding input power.
    """
    arr = as_complex_matrix(m)
    if arr.size == 0:
        return True
    smax = np.linalg.svd(arr, compute_uv=False)[0]
    return bool(smax <= 1.0 + tol)


def is_submatrix_of_unitary(m: object, tol: float = 1e-10) -> bool:
    """Alias predicate: a rectangular block of a unitary is sub-unitary."""
    return is_subunitary(m, tol=tol)


def _permanent_direct(a: np.ndarray) -> complex:
    """Sum over permutations; exact and O(n!), used for small orders."""
    n = a.shape[0]
    total = 0.0 + 0.0j
    for perm in itertools.permutations(range(n)):
        prod = 1.0 + 0.0j
        for i, j in enumerate(perm):
            prod *= a[i, j]
        total += prod
    return total


def _permanent_ryser(a: np.ndarray) -> complex:
    """Ryser inclusion-exclusion evaluated over vectorized subset blocks.

    perm(A) = (-1)^n sum_{S != {}} (-1)^{|S|} prod_i sum_{j in S} a_ij.
    Column subsets are enumerated in blocks so the n = 20 worst case stays
    within a bounded working set.
    """
    n = a.shape[0]
    cols = np.arange(n)
    at = np.ascontiguousarray(a.T)
    total = 0.0 + 0.0j
    block = 1 << min(n, 16)
    for start in range(1, 1 << n, block):
        stop = min(start + block, 1 << n)
        subsets = np.arange(start, stop, dtype=np.uint32)
        bits = ((subsets[:, None] >> cols) & 1).astype(np.float64)
        row_sums = bits @ at
        prods = np.prod(row_sums, axis=1)
        parity = 1.0 - 2.0 * (bits.sum(axis=1).astype(np.int64) % 2)
        total += np.sum(prods * parity)
    if n % 2:
        total = -total
    return complex(total)


def permanent(m: object) -> complex:
    """Permanent of a square complex matrix of order at most 20.

    Orders up to four are summed directly over permutations; larger ones
    use Ryser's formula.  The permanent of amplitude submatrices gives
    multi-photon transition amplitudes for indistinguishable photons.
    """
    arr = as_complex_matrix(m)
    n, ncols = arr.shape
    if n != ncols:
        raise DimensionError(f"permanent requires a square matrix, got {arr.shape}")
    if n == 0:
        raise DimensionError("permanent of an empty matrix is not defined here")
    if n > PERMANENT_MAX_ORDER:
        raise DimensionError(f"permanent limited to order {PERMANENT_MAX_ORDER}, got {n}")
    if n <= 4:
        return _permanent_direct(arr)
    return _permanent_ryser(arr)


def haar_random_unitary(n: int, seed: int) -> np.ndarray:
    """Draw an n x n unitary from the Haar measure, reproducibly.

    QR factorization of a complex Gaussian matrix, with the R diagonal
    phases folded back into Q so the distribution is exactly Haar.

    Args:
        n: matrix order, at least 1.
        seed: RNG seed; equal seeds give identical matrices.
    """
    if n < 1:
        raise DimensionError(f"unitary order must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def matrix_distance(a: object, b: object) -> float:
    """Global-phase-invariant distance between equal-shape matrices.

    Minimizes ||a - e^{i alpha} b||_F / sqrt(n) over the free phase alpha;
    the minimizing alpha is arg tr(b†a).  Zero iff the matrices agree up
    to one overall phase.
    """
    am = as_complex_matrix(a)
    bm = as_complex_matrix(b)
    if am.shape != bm.shape:
        raise DimensionError(f"shape mismatch: {am.shape} vs {bm.shape}")
    t = np.trace(bm.conj().T @ am)
    alpha = np.angle(t) if t != 0 else 0.0
    diff = am - np.exp(1j * alpha) * bm
    return float(np.linalg.norm(diff) / np.sqrt(am.shape[0]))


@dataclass(frozen=True, eq=False)
class ProbabilityDistribution:
    """Probabilities over a finite set of hashable outcome labels.

    Attributes:
        outcomes: outcome labels, unique within the distribution.
        probabilities: non-negative weights aligned with ``outcomes``.
        normalized: True when the weights are asserted to sum to one
            (within 1e-9); sub-unitary circuits legitimately produce
            distributions with deficit mass, flagged False.
    """

    outcomes: tuple
    probabilities: np.ndarray
    normalized: bool = True

    def __post_init__(self):
        probs = np.asarray(self.probabilities, dtype=float)
        object.__setattr__(self, "probabilities", probs)
        object.__setattr__(self, "outcomes", tuple(self.outcomes))
        if probs.ndim != 1 or len(self.outcomes) != probs.shape[0]:
            raise DimensionError("outcomes and probabilities must align 1:1")
        if len(set(self.outcomes)) != len(self.outcomes):
            raise ValueError("outcome labels must be unique")
        if not np.all(np.isfinite(probs)):
            raise ValueError("probabilities must be finite")
        if np.any(probs < -1e-14):
            raise ValueError("probabilities must be non-negative")
        probs.setflags(write=False)
        if self.normalized and abs(probs.sum() - 1.0) > NORMALIZATION_TOL:
            raise NormalizationError(
                f"probabilities sum to {probs.sum():.12g}, expected 1 within {NORMALIZATION_TOL}"
            )

    @classmethod
    def from_values(
        cls, outcomes: Iterable[Hashable], probabilities: Sequence[float]
    ) -> "ProbabilityDistribution":
        """Build a distribution, auto-detecting whether it is normalized."""
        probs = np.asarray(probabilities, dtype=float)
        normalized = bool(abs(probs.sum() - 1.0) <= NORMALIZATION_TOL)
        return cls(tuple(outcomes), probs, normalized=normalized)

    @property
    def total(self) -> float:
        return float(self.probabilities.sum())

    def probability(self, outcome: Hashable) -> float:
        try:
            idx = self.outcomes.index(outcome)
        except ValueError as exc:
            raise OutcomeMismatchError(f"unknown outcome {outcome!r}") from exc
        return float(self.probabilities[idx])

    def renormalized(self) -> "ProbabilityDistribution":
        """Rescale weights to unit total; errors on an all-zero distribution."""
        total = self.total
        if total <= 0.0:
            raise NormalizationError("cannot renormalize a zero-mass distribution")
        return ProbabilityDistribution(self.outcomes, self.probabilities / total, normalized=True)


def statistical_fidelity(p: ProbabilityDistribution, q: ProbabilityDistribution) -> float:
    """Bhattacharyya overlap sum_i sqrt(p_i q_i) between two distributions.

    Both inputs must be normalized and defined over the same outcome set;
    if the label orders differ, ``q`` is aligned to ``p`` by label.  The
    result lies in [0, 1] and equals 1 only for identical distributions.
    """
    for name, dist in (("p", p), ("q", q)):
        if abs(dist.total - 1.0) > NORMALIZATION_TOL:
            raise NormalizationError(f"{name} is not normalized (sum={dist.total:.12g})")
    if p.outcomes == q.outcomes:
        q_probs = q.probabilities
    else:
        if set(p.outcomes) != set(q.outcomes):
            raise OutcomeMismatchError("distributions are defined over different outcome sets")
        lookup = dict(zip(q.outcomes, q.probabilities))
        q_probs = np.array([lookup[o] for o in p.outcomes])
    overlap = float(np.sum(np.sqrt(np.clip(p.probabilities, 0.0, None) * np.clip(q_probs, 0.0, None))))
    return min(overlap, 1.0)
