"""Single- and two-photon counting statistics behind a linear circuit.

Partial distinguishability is handled with the standard convex-combination
model: for a pairwise overlap ``x`` the two-photon pattern probabilities are
``x`` times the indistinguishable (permanent) term plus ``1 - x`` times the
distinguishable (classical) term.  For two photons in pure internal states
with squared overlap ``x`` this is exact.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import curve_fit

from .components import MZIParams, mzi_transfer
from .core import ProbabilityDistribution, as_complex_matrix, permanent
from .errors import DimensionError, FitError

__all__ = [
    "SourceModel",
    "TwoPhotonDistribution",
    "effective_pair_overlap",
    "fit_hom_visibility",
    "fringe_contrast_from_overlap",
    "hom_fringe",
    "nphoton_collision_free_distribution",
    "single_photon_distribution",
    "two_photon_distribution",
]


@dataclass(frozen=True)
class SourceModel:
    """Triggered single-photon source feeding the processor.

    Attributes:
        repetition_period_ns: pulse-to-pulse separation.
        indistinguishability: pairwise photon overlap in [0, 1].
        g2_zero: second-order autocorrelation at zero delay; the residual
            per-pulse two-photon emission probability is ``g2_zero / 2``
            and contributes only an accidental background, disabled by
            default in fringe analysis.
        end_to_end_efficiency: probability that a triggered photon arrives.
    """

    repetition_period_ns: float = 13.8
    indistinguishability: float = 0.945
    g2_zero: float = 0.005
    end_to_end_efficiency: float = 1.0

    def __post_init__(self):
        if not (self.repetition_period_ns > 0):
            raise ValueError("repetition_period_ns must be positive")
        if not (0.0 <= self.indistinguishability <= 1.0):
            raise ValueError("indistinguishability must lie in [0, 1]")
        if not (0.0 <= self.g2_zero < 1.0):
            raise ValueError("g2_zero must lie in [0, 1)")
        if not (0.0 < self.end_to_end_efficiency <= 1.0):
            raise ValueError("end_to_end_efficiency must lie in (0, 1]")

    @property
    def repetition_rate_mhz(self) -> float:
        return 1e3 / self.repetition_period_ns

    @property
    def two_photon_emission_probability(self) -> float:
        """Per-pulse accidental pair probability, g2(0) / 2."""
        return self.g2_zero / 2.0


def effective_pair_overlap(source: SourceModel, chip_penalty: float = 1.0) -> float:
    """Pairwise overlap after an extra on-chip distinguishability penalty."""
    if not (0.0 <= chip_penalty <= 1.0):
        raise ValueError("chip_penalty must lie in [0, 1]")
    return source.indistinguishability * chip_penalty


def single_photon_distribution(t: object, input_mode: int) -> ProbabilityDistribution:
    """Output-mode distribution |t[j, k]|^2 for one photon in mode ``k``.

    For sub-unitary ``t`` the weights sum below one and the result is
    flagged unnormalized; the deficit is the photon loss probability.
    """
    mat = as_complex_matrix(t)
    n_out, n_in = mat.shape
    if not (0 <= input_mode < n_in):
        raise DimensionError(f"input mode {input_mode} out of range for {n_in} inputs")
    probs = np.abs(mat[:, input_mode]) ** 2
    return ProbabilityDistribution.from_values(range(n_out), probs)


@dataclass(frozen=True, eq=False)
class TwoPhotonDistribution:
    """Unordered two-photon output patterns and their probabilities.

    Patterns are pairs ``(i, j)`` with ``i <= j``; ``i == j`` means both
    photons bunched into one mode.  ``collision_free_only`` marks
    distributions restricted to ``i < j`` (bunched mass dropped, so the
    total may fall below one even for a lossless circuit).
    """

    input_pair: tuple[int, int]
    patterns: tuple[tuple[int, int], ...]
    probabilities: np.ndarray
    collision_free_only: bool = False

    def __post_init__(self):
        k, l = self.input_pair
        if k >= l:
            raise ValueError("input_pair must be distinct modes (k < l)")
        probs = np.asarray(self.probabilities, dtype=float)
        if probs.shape != (len(self.patterns),):
            raise DimensionError("patterns and probabilities must align 1:1")
        if np.any(probs < -1e-14) or not np.all(np.isfinite(probs)):
            raise ValueError("probabilities must be finite and non-negative")
        probs = probs.copy()
        probs.setflags(write=False)
        object.__setattr__(self, "probabilities", probs)
        object.__setattr__(self, "patterns", tuple(tuple(p) for p in self.patterns))
        object.__setattr__(self, "input_pair", (int(k), int(l)))

    @property
    def total(self) -> float:
        return float(self.probabilities.sum())

    def probability(self, pattern: tuple[int, int]) -> float:
        key = tuple(sorted(pattern))
        try:
            idx = self.patterns.index(key)
        except ValueError:
            return 0.0
        return float(self.probabilities[idx])

    def collision_free(self) -> "TwoPhotonDistribution":
        """Restriction to patterns with the photons in different modes."""
        keep = [i for i, (a, b) in enumerate(self.patterns) if a != b]
        return TwoPhotonDistribution(
            self.input_pair,
            tuple(self.patterns[i] for i in keep),
            self.probabilities[keep],
            collision_free_only=True,
        )

    def to_distribution(self) -> ProbabilityDistribution:
        return ProbabilityDistribution.from_values(self.patterns, self.probabilities)

    def to_json_dict(self) -> dict:
        return {
            "input": list(self.input_pair),
            "outputs": [
                {"pattern": list(p), "p": float(v)}
                for p, v in zip(self.patterns, self.probabilities)
            ],
        }

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "TwoPhotonDistribution":
        patterns = tuple(tuple(entry["pattern"]) for entry in data["outputs"])
        probs = np.array([float(entry["p"]) for entry in data["outputs"]])
        collision_free = all(a != b for a, b in patterns)
        return cls(tuple(data["input"]), patterns, probs, collision_free_only=collision_free)


def two_photon_distribution(
    t: object,
    input_pair: tuple[int, int],
    overlap: float = 1.0,
    collision_free_only: bool = False,
) -> TwoPhotonDistribution:
    """Two-photon output statistics for one photon in each input of a pair.

    For outputs ``i < j`` the probability is
    ``x |perm(T)|^2 + (1 - x) (|t_ik t_jl|^2 + |t_il t_jk|^2)`` with
    ``T = [[t_ik, t_il], [t_jk, t_jl]]``; the bunched pattern ``(i, i)``
    carries ``(1 + x) |t_ik t_il|^2``.  For unitary ``t`` the full
    distribution sums to one for every overlap ``x``.

    Args:
        t: transfer matrix (square, possibly sub-unitary).
        input_pair: distinct input modes ``(k, l)`` with ``k < l``.
        overlap: pairwise indistinguishability ``x`` in [0, 1].
        collision_free_only: drop bunched patterns from the result.
    """
    mat = as_complex_matrix(t)
    n_out, n_in = mat.shape
    k, l = input_pair
    if not (0 <= k < n_in and 0 <= l < n_in):
        raise DimensionError(f"input pair {input_pair} out of range for {n_in} inputs")
    if k >= l:
        raise ValueError("input_pair must satisfy k < l")
    if not (0.0 <= overlap <= 1.0):
        raise ValueError("overlap must lie in [0, 1]")

    amp = np.outer(mat[:, k], mat[:, l])  # amp[i, j] = t_ik * t_jl
    indist = np.abs(amp + amp.T) ** 2
    dist = np.abs(amp) ** 2 + np.abs(amp.T) ** 2
    x = overlap

    patterns = []
    probs = []
    for i in range(n_out):
        start = i if not collision_free_only else i + 1
        for j in range(start, n_out):
            if i == j:
                p = (1.0 + x) * float(np.abs(amp[i, i]) ** 2)
            else:
                p = x * float(indist[i, j]) + (1.0 - x) * float(dist[i, j])
            patterns.append((i, j))
            probs.append(p)
    return TwoPhotonDistribution(
        (k, l), tuple(patterns), np.array(probs), collision_free_only=collision_free_only
    )


def hom_fringe(
    m: MZIParams,
    phases_rad: Sequence[float],
    overlap: float,
    accidental_floor: float = 0.0,
) -> np.ndarray:
    """Cross-port coincidence probability of an MZI versus internal phase.

    Two photons enter the two ports of the cell; the returned array is the
    probability of one photon in each output.  For an ideal cell this
    follows ``(1 - x + (1 + x) cos^2 phase) / 2``: maxima at multiples of
    pi and minima of ``(1 - x) / 2`` at odd multiples of pi/2.

    Args:
        m: MZI parameters (imbalance and loss shift the fringe shape).
        phases_rad: internal phases to evaluate.
        overlap: pairwise indistinguishability ``x``.
        accidental_floor: phase-independent background added to every
            point, e.g. ``SourceModel.two_photon_emission_probability``;
            zero (disabled) by default.
    """
    if accidental_floor < 0:
        raise ValueError("accidental_floor must be non-negative")
    out = np.empty(len(phases_rad))
    for idx, phase in enumerate(phases_rad):
        dist = two_photon_distribution(mzi_transfer(m, phase), (0, 1), overlap)
        out[idx] = dist.probability((0, 1)) + accidental_floor
    return out


def fringe_contrast_from_overlap(overlap: float) -> float:
    """Raw fringe contrast (max - min) / (max + min) = (1 + x) / (3 - x).

    A diagnostic only: the raw contrast understates the overlap because
    the coincidence maxima saturate at the classical level, so fits should
    use :func:`fit_hom_visibility` instead.
    """
    if not (0.0 <= overlap <= 1.0):
        raise ValueError("overlap must lie in [0, 1]")
    return (1.0 + overlap) / (3.0 - overlap)


def _fringe_model(phase, amplitude, visibility, scale, offset):
    shifted = scale * phase + offset
    return amplitude * (1.0 - visibility + (1.0 + visibility) * np.cos(shifted) ** 2) / 2.0


def fit_hom_visibility(
    phases_rad: Sequence[float],
    coincidences: Sequence[float],
    sigma: Sequence[float] | None = None,
) -> tuple[float, float]:
    """Least-squares fringe visibility from coincidence data.

    Fits ``A (1 - V + (1 + V) cos^2(s phase + d)) / 2`` with the amplitude
    ``A``, visibility ``V``, and a linear phase recalibration ``(s, d)``
    all free, so uncalibrated voltage-derived phases are tolerated.  The
    returned visibility estimates the pairwise overlap ``x`` directly.

    Args:
        phases_rad: nominal phases, at least 5 points spanning >= pi/2.
        coincidences: measured coincidence rates or counts (any scale).
        sigma: optional per-point uncertainties for weighting.

    Returns:
        ``(visibility, standard_error)`` from the fit covariance.

    Raises:
        FitError: for degenerate sampling or a failed fit.
    """
    phases = np.asarray(phases_rad, dtype=float)
    counts = np.asarray(coincidences, dtype=float)
    if phases.ndim != 1 or phases.shape != counts.shape:
        raise DimensionError("phases and coincidences must be matching 1-d arrays")
    if phases.size < 5:
        raise FitError(f"need at least 5 fringe points, got {phases.size}")
    if np.ptp(phases) < math.pi / 2.0 - 1e-12:
        raise FitError("fringe data must span at least half a period (pi/2)")
    top = float(counts.max())
    if top <= 0:
        raise FitError("coincidence data has no positive values")
    v0 = float(np.clip(1.0 - 2.0 * counts.min() / top, 0.0, 1.0))
    p0 = [top, v0, 1.0, 0.0]
    bounds = ([0.0, 0.0, 0.2, -math.pi], [np.inf, 1.2, 5.0, math.pi])
    try:
        popt, pcov = curve_fit(
            _fringe_model, phases, counts, p0=p0, sigma=sigma, bounds=bounds, maxfev=20000
        )
    except (RuntimeError, ValueError) as exc:
        raise FitError(f"fringe fit failed: {exc}") from exc
    visibility = float(popt[1])
    variance = float(pcov[1, 1])
    if not math.isfinite(variance) or variance < 0:
        raise FitError("fringe fit covariance is singular; data cannot constrain V")
    return visibility, math.sqrt(variance)


def nphoton_collision_free_distribution(
    t: object, input_modes: Sequence[int]
) -> ProbabilityDistribution:
    """Indistinguishable n-photon statistics over collision-free patterns.

    Each output pattern (one photon per listed mode) gets
    ``|perm(t[pattern, inputs])|^2``.  Bunched patterns are excluded, so
    the total is below one in general.
    """
    mat = as_complex_matrix(t)
    n_out = mat.shape[0]
    inputs = list(input_modes)
    if len(set(inputs)) != len(inputs):
        raise ValueError("input modes must be distinct")
    if any(not (0 <= m < mat.shape[1]) for m in inputs):
        raise DimensionError("input mode out of range")
    if len(inputs) > n_out:
        raise DimensionError("more photons than output modes for collision-free patterns")
    patterns = list(itertools.combinations(range(n_out), len(inputs)))
    probs = np.array(
        [abs(permanent(mat[np.ix_(pattern, inputs)])) ** 2 for pattern in patterns]
    )
    return ProbabilityDistribution.from_values(patterns, probs)
