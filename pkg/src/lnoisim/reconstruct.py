"""Recover an interferometer's transfer matrix from photon statistics.

Single-photon output probabilities fix only the moduli ``|u[i, k]|``; the
relative phases are constrained by two-photon interference between pairs
of input ports.  Neither kind of data changes under per-port input/output
phase factors, or under complex conjugation of the whole matrix, so a
matrix is recoverable only up to

    u  ->  D_out @ u @ D_in         (diagonal unimodular D)
    u  ->  conj(u)

:func:`canonical_form` picks one representative per equivalence class so
that estimates and references can be compared directly with
:func:`lnoisim.core.matrix_distance`.

The estimator parameterizes the unknown matrix by the internal and
external phases of a rectangular mesh and fits them to the measured
statistics with damped least squares from several random starting points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy.optimize import least_squares

from .core import as_complex_matrix
from .errors import ConvergenceError, CoverageError, DimensionError
from .mesh import MeshCell, MeshConfig, _ideal_cell_matrix, clements_layout, compose, wrap_phase
from .photons import TwoPhotonDistribution, two_photon_distribution

__all__ = [
    "MeasuredStatistics",
    "ReconstructionResult",
    "canonical_form",
    "canonical_phase_gauge",
    "reconstruct_unitary",
    "synthesize_statistics",
]

_PIVOT_TOL = 1e-9


def canonical_phase_gauge(u: np.ndarray, tol: float = _PIVOT_TOL) -> np.ndarray:
    """Fix the per-port phase freedom of ``u``.

    Columns are rotated so the first row is real and non-negative, then
    rows 1.. are rotated so the first column is real and non-negative.
    Entries with modulus below ``tol`` are left untouched (their phase is
    meaningless), which keeps the map well defined for matrices with
    structural zeros.
    """
    w = as_complex_matrix(u).copy()
    for j in range(w.shape[1]):
        pivot = w[0, j]
        if abs(pivot) > tol:
            w[:, j] *= np.conj(pivot) / abs(pivot)
    for i in range(1, w.shape[0]):
        pivot = w[i, 0]
        if abs(pivot) > tol:
            w[i, :] *= np.conj(pivot) / abs(pivot)
    return w


def canonical_form(u: np.ndarray, tol: float = _PIVOT_TOL) -> np.ndarray:
    """Representative of ``u`` modulo port phases and conjugation.

    After phase fixing, the matrix and its conjugate differ only in the
    signs of imaginary parts; the representative is the one whose first
    entry (row-major) with ``|imag| > tol`` has positive imaginary part.
    ``canonical_form(conj(u))`` therefore equals ``canonical_form(u)``.
    """
    w = canonical_phase_gauge(u, tol=tol)
    for value in w.ravel():
        if abs(value.imag) > tol:
            return np.conj(w) if value.imag < 0 else w
    return w


@dataclass(frozen=True, eq=False)
class MeasuredStatistics:
    """Photon-counting data that drives the reconstruction.

    Attributes:
        singles: array of shape (n, n); ``singles[i, k]`` is the
            probability that a photon entering port k exits port i.
        pairs: two-photon output distributions keyed by input pair
            ``(k, l)`` with ``k < l``.
    """

    singles: np.ndarray
    pairs: dict[tuple[int, int], TwoPhotonDistribution]

    def __post_init__(self):
        singles = np.asarray(self.singles, dtype=float)
        if singles.ndim != 2 or singles.shape[0] != singles.shape[1]:
            raise DimensionError("singles must be a square matrix")
        if np.any(singles < -1e-12) or not np.all(np.isfinite(singles)):
            raise ValueError("singles must be finite and non-negative")
        singles = singles.copy()
        singles.setflags(write=False)
        object.__setattr__(self, "singles", singles)
        n = singles.shape[0]
        pairs = {}
        for key, dist in self.pairs.items():
            k, l = (int(key[0]), int(key[1]))
            if not (0 <= k < l < n):
                raise ValueError(f"invalid input pair {key!r} for {n} modes")
            if dist.input_pair != (k, l):
                raise ValueError(
                    f"distribution stored under {key!r} was taken on pair {dist.input_pair}"
                )
            pairs[(k, l)] = dist
        object.__setattr__(self, "pairs", pairs)

    @property
    def n_modes(self) -> int:
        return int(self.singles.shape[0])

    def missing_pairs(self) -> list[tuple[int, int]]:
        n = self.n_modes
        return [(k, l) for k in range(n) for l in range(k + 1, n) if (k, l) not in self.pairs]

    def to_json_dict(self) -> dict:
        return {
            "singles": [[float(v) for v in row] for row in self.singles],
            "pairs": [d.to_json_dict() for _, d in sorted(self.pairs.items())],
        }

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "MeasuredStatistics":
        pairs = {}
        for entry in data["pairs"]:
            dist = TwoPhotonDistribution.from_json_dict(entry)
            pairs[dist.input_pair] = dist
        return cls(np.asarray(data["singles"], dtype=float), pairs)


def synthesize_statistics(
    u: np.ndarray, overlap: float = 1.0, collision_free_only: bool = True
) -> MeasuredStatistics:
    """Exact statistics a lossless interferometer ``u`` would produce."""
    mat = as_complex_matrix(u)
    if mat.shape[0] != mat.shape[1]:
        raise DimensionError("need a square transfer matrix")
    n = mat.shape[0]
    singles = np.abs(mat) ** 2
    pairs = {
        (k, l): two_photon_distribution(
            mat, (k, l), overlap=overlap, collision_free_only=collision_free_only
        )
        for k in range(n)
        for l in range(k + 1, n)
    }
    return MeasuredStatistics(singles, pairs)


@dataclass(frozen=True, eq=False)
class ReconstructionResult:
    """Outcome of a reconstruction run.

    Attributes:
        unitary: fitted matrix in :func:`canonical_form`.
        cost: sum of squared residuals at the best fit.
        converged: whether ``cost`` fell below the success threshold.
        n_restarts_used: random restarts consumed (early stop on success).
        config: mesh phases realizing the fitted matrix.
    """

    unitary: np.ndarray
    cost: float
    converged: bool
    n_restarts_used: int
    config: MeshConfig

    def __post_init__(self):
        mat = as_complex_matrix(self.unitary)
        mat.setflags(write=False)
        object.__setattr__(self, "unitary", mat)


def _mesh_unitary(phases: np.ndarray, layout, n: int) -> np.ndarray:
    """Compose the mesh for stacked phases [thetas..., phis...]; no output phases."""
    u = np.eye(n, dtype=complex)
    half = len(layout)
    for (a, b), theta, phi in zip(layout, phases[:half], phases[half:]):
        u[[a, b], :] = _ideal_cell_matrix(theta, phi) @ u[[a, b], :]
    return u


def _pair_probabilities(u: np.ndarray, k: int, l: int, x: float, iu, ju) -> np.ndarray:
    amp = np.outer(u[:, k], u[:, l])
    cross = amp[iu, ju]
    swapped = amp[ju, iu]
    indist = np.abs(cross + swapped) ** 2
    dist = np.abs(cross) ** 2 + np.abs(swapped) ** 2
    return x * indist + (1.0 - x) * dist


def reconstruct_unitary(
    measured: MeasuredStatistics,
    seed: int,
    overlap: float = 1.0,
    n_restarts: int = 12,
    success_cost: float = 1e-12,
) -> ReconstructionResult:
    """Fit a mesh to measured statistics and return its canonical unitary.

    The free parameters are one internal and one external phase per mesh
    cell; output phases are pinned to zero because no count statistic can
    see them.  Each restart draws uniform random phases (seeded) and runs
    Levenberg-Marquardt on the stacked residual vector

        [singles(model) - singles(data),
         collision-free pair probabilities(model) - (data)]

    stopping early once the squared-residual sum drops below
    ``success_cost``.

    Args:
        measured: singles plus two-photon data covering every input pair.
        seed: RNG seed for the restart sequence (results are deterministic
            for a fixed seed).
        overlap: pairwise wave-packet overlap assumed by the model.
        n_restarts: maximum number of random starts.
        success_cost: squared-residual threshold declaring convergence.

    Raises:
        CoverageError: if any input pair has no two-photon data.
        ConvergenceError: if no restart converges; the best attempt is
            attached as ``best_result``.
    """
    missing = measured.missing_pairs()
    if missing:
        raise CoverageError(f"no two-photon data for input pairs {missing}")
    if not 0.0 <= overlap <= 1.0:
        raise ValueError("overlap must lie in [0, 1]")
    if n_restarts < 1:
        raise ValueError("n_restarts must be at least 1")

    n = measured.n_modes
    layout = clements_layout(n)
    iu, ju = np.triu_indices(n, k=1)
    pair_keys = sorted(measured.pairs)
    pair_data = [
        np.array(
            [measured.pairs[key].probability((int(i), int(j))) for i, j in zip(iu, ju)]
        )
        for key in pair_keys
    ]
    singles_data = measured.singles
    x = float(overlap)

    def residuals(phases: np.ndarray) -> np.ndarray:
        u = _mesh_unitary(phases, layout, n)
        parts = [(np.abs(u) ** 2 - singles_data).ravel()]
        for key, data in zip(pair_keys, pair_data):
            parts.append(_pair_probabilities(u, key[0], key[1], x, iu, ju) - data)
        return np.concatenate(parts)

    rng = np.random.default_rng(seed)
    best_x = None
    best_cost = math.inf
    used = 0
    for _ in range(n_restarts):
        start = rng.uniform(0.0, 2.0 * math.pi, size=2 * len(layout))
        fit = least_squares(
            residuals,
            start,
            method="lm",
            jac="2-point",
            xtol=1e-14,
            ftol=1e-14,
            gtol=1e-14,
            max_nfev=5000,
        )
        used += 1
        cost = 2.0 * float(fit.cost)  # scipy reports half the squared-residual sum
        if cost < best_cost:
            best_cost = cost
            best_x = fit.x
        if best_cost <= success_cost:
            break

    half = len(layout)
    cells = [
        MeshCell(modes=pair, theta=wrap_phase(th), phi=wrap_phase(ph))
        for pair, th, ph in zip(layout, best_x[:half], best_x[half:])
    ]
    config = MeshConfig(n_modes=n, cells=cells, output_phases=np.zeros(n))
    result = ReconstructionResult(
        unitary=canonical_form(compose(config)),
        cost=best_cost,
        converged=best_cost <= success_cost,
        n_restarts_used=used,
        config=config,
    )
    if not result.converged:
        raise ConvergenceError(
            f"best of {used} restarts left squared-residual sum {best_cost:.3e} "
            f"above {success_cost:.3e}",
            best_result=result,
        )
    return result
