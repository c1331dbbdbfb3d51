"""Physical models of the integrated building blocks.

Conventions used throughout:

* A directional coupler with cross-coupled power fraction ``r`` has the
  symmetric transfer matrix ``[[sqrt(1-r), i sqrt(r)], [i sqrt(r), sqrt(1-r)]]``;
  the balanced case is ``(1/sqrt 2) [[1, i], [i, 1]]``.
* An MZI applies its internal phase on the upper arm between the two
  couplers.  With ideal couplers the bar-port power transmission is
  ``sin^2(phase/2)``: zero phase is a full cross state, phase pi is bar.
* Finite extinction comes from coupler imbalance, not phase error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.signal import lfilter, lfilter_zi

from .errors import AliasingError, BandRangeError, DimensionError

__all__ = [
    "CouplerParams",
    "GratingSpectrum",
    "MZIParams",
    "PhaseShifterParams",
    "WaveguideLossParams",
    "coupler_efficiency_from_loopback",
    "coupler_matrix",
    "eom_response",
    "eom_s21_db",
    "eom_step_response",
    "estimate_mzi_loss_from_demux",
    "extinction_ratio_db",
    "grating_efficiency_db",
    "imbalance_for_bar_leakage",
    "imbalance_for_extinction",
    "mzi_transfer",
    "phase_from_voltage",
    "s21_crossing_ghz",
    "voltage_for_phase",
]

#: Reported in place of an unbounded extinction ratio (perfectly balanced couplers).
EXTINCTION_CAP_DB = 300.0


@dataclass(frozen=True)
class PhaseShifterParams:
    """Electro-optic phase shifter: voltage-to-phase map plus analog bandwidth.

    Attributes:
        v_pi_volts: voltage producing a pi phase shift.
        length_cm: electrode length; with v_pi gives the voltage-length product.
        phase_offset_rad: static phase at zero volts.
        f_3db_ghz: single-pole small-signal bandwidth; ``math.inf`` models an
            instantaneous shifter.
    """

    v_pi_volts: float = 4.5
    length_cm: float = 0.125
    phase_offset_rad: float = 0.0
    f_3db_ghz: float = 6.5

    def __post_init__(self):
        if not (self.v_pi_volts > 0):
            raise ValueError(f"v_pi_volts must be positive, got {self.v_pi_volts}")
        if not (self.length_cm > 0):
            raise ValueError(f"length_cm must be positive, got {self.length_cm}")
        if not (self.f_3db_ghz > 0):
            raise ValueError(f"f_3db_ghz must be positive, got {self.f_3db_ghz}")
        if not math.isfinite(self.phase_offset_rad):
            raise ValueError("phase_offset_rad must be finite")

    @property
    def voltage_length_product(self) -> float:
        """V*cm figure of merit for the electrode."""
        return self.v_pi_volts * self.length_cm


@dataclass(frozen=True)
class CouplerParams:
    """Directional coupler with a nominal split and a fabrication imbalance.

    ``splitting_ratio`` is the nominal cross-coupled power fraction and
    ``imbalance`` an additive deviation; their sum must stay in [0, 1].
    """

    splitting_ratio: float = 0.5
    imbalance: float = 0.0

    def __post_init__(self):
        r = self.effective_ratio
        if not (0.0 <= self.splitting_ratio <= 1.0):
            raise ValueError(f"splitting_ratio must lie in [0, 1], got {self.splitting_ratio}")
        if not (0.0 <= r <= 1.0):
            raise ValueError(f"effective ratio {r} outside [0, 1]")

    @property
    def effective_ratio(self) -> float:
        return self.splitting_ratio + self.imbalance


@dataclass(frozen=True)
class MZIParams:
    """A 2x2 Mach-Zehnder switch cell: two couplers around one phase shifter."""

    shifter: PhaseShifterParams = field(default_factory=PhaseShifterParams)
    coupler_in: CouplerParams = field(default_factory=CouplerParams)
    coupler_out: CouplerParams = field(default_factory=CouplerParams)
    insertion_loss_db: float = 0.0

    def __post_init__(self):
        if self.insertion_loss_db < 0:
            raise ValueError("insertion_loss_db is a positive magnitude")

    @classmethod
    def ideal(cls, shifter: PhaseShifterParams | None = None) -> "MZIParams":
        return cls(shifter=shifter or PhaseShifterParams())

    @classmethod
    def with_bar_leakage(
        cls, leakage: float, shifter: PhaseShifterParams | None = None, insertion_loss_db: float = 0.0
    ) -> "MZIParams":
        """Cell whose worst-port power leakage equals ``leakage`` (linear)."""
        delta = imbalance_for_bar_leakage(leakage)
        return cls(
            shifter=shifter or PhaseShifterParams(),
            coupler_in=CouplerParams(imbalance=delta),
            insertion_loss_db=insertion_loss_db,
        )

    @classmethod
    def with_extinction(
        cls, er_db: float, shifter: PhaseShifterParams | None = None, insertion_loss_db: float = 0.0
    ) -> "MZIParams":
        """Cell whose bar-port extinction ratio equals ``er_db``."""
        delta = imbalance_for_extinction(er_db)
        return cls(
            shifter=shifter or PhaseShifterParams(),
            coupler_in=CouplerParams(imbalance=delta),
            insertion_loss_db=insertion_loss_db,
        )


@dataclass(frozen=True)
class WaveguideLossParams:
    """Propagation loss expressed as dB/cm times a length."""

    db_per_cm: float
    length_cm: float

    def __post_init__(self):
        if self.db_per_cm < 0 or self.length_cm < 0:
            raise ValueError("waveguide loss parameters must be non-negative")

    @property
    def loss_db(self) -> float:
        return self.db_per_cm * self.length_cm


def phase_from_voltage(p: PhaseShifterParams, volts: float) -> float:
    """Linear electro-optic phase: offset + pi * V / V_pi."""
    return p.phase_offset_rad + math.pi * volts / p.v_pi_volts


def voltage_for_phase(p: PhaseShifterParams, phase_rad: float) -> float:
    """Smallest-|V| drive realizing ``phase_rad`` modulo 2 pi.

    The phase request is reduced to the representative in (-pi, pi] relative
    to the shifter's static offset, so a pi request returns +V_pi rather
    than -V_pi.
    """
    excess = phase_rad - p.phase_offset_rad
    wrapped = math.remainder(excess, 2.0 * math.pi)
    if wrapped == -math.pi:
        wrapped = math.pi
    return wrapped * p.v_pi_volts / math.pi


def coupler_matrix(c: CouplerParams) -> np.ndarray:
    """2x2 transfer matrix of a directional coupler."""
    r = c.effective_ratio
    t = math.sqrt(1.0 - r)
    k = math.sqrt(r)
    return np.array([[t, 1j * k], [1j * k, t]], dtype=np.complex128)


def mzi_transfer(m: MZIParams, phase_rad: float) -> np.ndarray:
    """Transfer matrix C_out . diag(e^{i phase}, 1) . C_in with uniform loss.

    Insertion loss scales amplitudes by 10^(-insertion_loss_db / 20).
    """
    inner = np.array([[np.exp(1j * phase_rad), 0.0], [0.0, 1.0]], dtype=np.complex128)
    mat = coupler_matrix(m.coupler_out) @ inner @ coupler_matrix(m.coupler_in)
    return 10.0 ** (-m.insertion_loss_db / 20.0) * mat


def _bar_power(m: MZIParams, phase_rad: float) -> float:
    return float(abs(mzi_transfer(m, phase_rad)[0, 0]) ** 2)


def extinction_ratio_db(m: MZIParams, n_sweep: int = 4096) -> float:
    """Bar-port extinction ratio 10 log10(max/min) over the internal phase.

    Found by a dense sweep refined with a bounded scalar minimizer.  A
    perfectly balanced cell has zero minimum leakage; the ratio is then
    reported as the cap ``EXTINCTION_CAP_DB``.
    """
    phases = np.linspace(0.0, 2.0 * math.pi, n_sweep, endpoint=False)
    powers = np.array([_bar_power(m, p) for p in phases])
    step = 2.0 * math.pi / n_sweep

    def refine(idx: int, sign: float) -> float:
        lo, hi = phases[idx] - step, phases[idx] + step
        res = minimize_scalar(
            lambda p: sign * _bar_power(m, p), bounds=(lo, hi), method="bounded",
            options={"xatol": 1e-12},
        )
        return sign * float(res.fun)

    p_min = refine(int(np.argmin(powers)), 1.0)
    p_max = refine(int(np.argmax(powers)), -1.0)
    if p_min <= 0.0 or 10.0 * math.log10(p_max / p_min) >= EXTINCTION_CAP_DB:
        return EXTINCTION_CAP_DB
    return 10.0 * math.log10(p_max / p_min)


def imbalance_for_bar_leakage(leakage: float) -> float:
    """Coupler imbalance whose MZI leaks ``leakage`` of the power off-port.

    One coupler detuned by delta against an ideal partner gives a minimum
    bar power of l = 1/2 - sqrt(1/4 - delta^2); inverting, delta =
    sqrt(l (1 - l)).  The same l is also the bar-state leakage into the
    cross port, so a single number calibrates both switch states.
    """
    if not (0.0 <= leakage < 0.5):
        raise ValueError(f"leakage must lie in [0, 0.5), got {leakage}")
    return math.sqrt(leakage * (1.0 - leakage))


def imbalance_for_extinction(er_db: float) -> float:
    """Coupler imbalance realizing a bar-port extinction ratio of ``er_db``."""
    if er_db <= 0:
        raise ValueError(f"extinction ratio must be positive dB, got {er_db}")
    leakage = 1.0 / (1.0 + 10.0 ** (er_db / 10.0))
    return imbalance_for_bar_leakage(leakage)


def _tustin_coefficients(f_3db_ghz: float, sample_rate_ghz: float) -> tuple[np.ndarray, np.ndarray]:
    # Bilinear transform prewarped so the half-power point lands exactly at f_3db.
    lam = math.tan(math.pi * f_3db_ghz / sample_rate_ghz)
    b = np.array([lam / (1.0 + lam), lam / (1.0 + lam)])
    a = np.array([1.0, (lam - 1.0) / (1.0 + lam)])
    return b, a


def eom_response(p: PhaseShifterParams, drive: Sequence[float], sample_rate_ghz: float) -> np.ndarray:
    """Filter a drive waveform through the shifter's single-pole response.

    The filter has exactly unit DC gain and its half-power point sits at
    ``f_3db_ghz``.  The initial state assumes the drive was held at its
    first sample forever, so constant drives pass through unchanged.

    Args:
        p: shifter parameters; ``f_3db_ghz = math.inf`` bypasses filtering.
        drive: waveform samples (volts), uniformly sampled.
        sample_rate_ghz: sample rate; must exceed twice the bandwidth.

    Raises:
        AliasingError: when ``sample_rate_ghz <= 2 * f_3db_ghz``.
    """
    x = np.asarray(drive, dtype=float)
    if x.ndim != 1:
        raise DimensionError("drive must be a 1-d waveform")
    if not math.isfinite(p.f_3db_ghz):
        return x.copy()
    if sample_rate_ghz <= 2.0 * p.f_3db_ghz:
        raise AliasingError(
            f"sample rate {sample_rate_ghz} GHz must exceed twice the bandwidth "
            f"{p.f_3db_ghz} GHz"
        )
    if x.size == 0:
        return x.copy()
    b, a = _tustin_coefficients(p.f_3db_ghz, sample_rate_ghz)
    zi = lfilter_zi(b, a) * x[0]
    y, _ = lfilter(b, a, x, zi=zi)
    return y


def eom_step_response(
    p: PhaseShifterParams, sample_rate_ghz: float, duration_ns: float
) -> tuple[np.ndarray, np.ndarray]:
    """Unit step into the shifter, with zero drive held before time zero.

    Returns (time_ns, response); the response settles exponentially toward
    one with time constant 1 / (2 pi f_3db).
    """
    n = int(round(duration_ns * sample_rate_ghz))
    t = np.arange(n) / sample_rate_ghz
    if not math.isfinite(p.f_3db_ghz):
        return t, np.ones(n)
    if sample_rate_ghz <= 2.0 * p.f_3db_ghz:
        raise AliasingError("sample rate must exceed twice the bandwidth")
    b, a = _tustin_coefficients(p.f_3db_ghz, sample_rate_ghz)
    y, _ = lfilter(b, a, np.ones(n), zi=np.zeros(1))
    return t, y


def _steady_state_gain(
    p: PhaseShifterParams, freq_ghz: float, sample_rate_ghz: float
) -> float:
    """Amplitude gain for a sinusoid, measured from a time-domain run."""
    tau_ns = 1.0 / (2.0 * math.pi * p.f_3db_ghz)
    settle_ns = 12.0 * tau_ns
    measure_periods = 40
    duration_ns = settle_ns + measure_periods / freq_ghz
    n = int(math.ceil(duration_ns * sample_rate_ghz)) + 1
    t = np.arange(n) / sample_rate_ghz
    x = np.sin(2.0 * math.pi * freq_ghz * t)
    y = eom_response(p, x, sample_rate_ghz)
    keep = t >= settle_ns
    ts, ys = t[keep], y[keep]
    design = np.column_stack(
        [np.sin(2.0 * math.pi * freq_ghz * ts), np.cos(2.0 * math.pi * freq_ghz * ts), np.ones_like(ts)]
    )
    coef, *_ = np.linalg.lstsq(design, ys, rcond=None)
    return float(np.hypot(coef[0], coef[1]))


def eom_s21_db(
    p: PhaseShifterParams, freqs_ghz: Iterable[float], sample_rate_ghz: float
) -> np.ndarray:
    """Small-signal power response (dB, 0 dB at DC) at the given frequencies.

    Each point is measured by driving the simulated shifter with a sinusoid
    and fitting the steady-state output amplitude.
    """
    out = []
    for f in freqs_ghz:
        if f <= 0:
            raise ValueError("probe frequencies must be positive")
        out.append(20.0 * math.log10(_steady_state_gain(p, f, sample_rate_ghz)))
    return np.array(out)


def s21_crossing_ghz(
    p: PhaseShifterParams,
    threshold_db: float = -3.0,
    sample_rate_ghz: float | None = None,
    n_points: int = 41,
) -> float:
    """Frequency where the simulated S21 magnitude crosses ``threshold_db``.

    Scans a geometric grid bracketing the nominal bandwidth and linearly
    interpolates the crossing in log-frequency.
    """
    fs = sample_rate_ghz if sample_rate_ghz is not None else 24.0 * p.f_3db_ghz
    freqs = np.geomspace(p.f_3db_ghz / 4.0, min(p.f_3db_ghz * 4.0, fs / 2.2), n_points)
    s21 = eom_s21_db(p, freqs, fs)
    below = np.nonzero(s21 <= threshold_db)[0]
    if below.size == 0 or below[0] == 0:
        raise ValueError("threshold not bracketed by the scan grid")
    hi = below[0]
    lo = hi - 1
    logf = np.log(freqs)
    frac = (threshold_db - s21[lo]) / (s21[hi] - s21[lo])
    return float(np.exp(logf[lo] + frac * (logf[hi] - logf[lo])))


@dataclass(frozen=True)
class GratingSpectrum:
    """Grating coupler efficiency versus wavelength.

    Either a parabola in dB around the peak (``samples`` is None) or a
    measured curve interpolated linearly in dB.  Wavelengths outside
    ``band_nm`` raise :class:`BandRangeError`.
    """

    center_wavelength_nm: float = 930.0
    peak_efficiency_db: float = -3.4
    bandwidth_1db_nm: float = 12.0
    band_nm: tuple[float, float] = (905.0, 955.0)
    samples: tuple[np.ndarray, np.ndarray] | None = None

    def __post_init__(self):
        if self.peak_efficiency_db > 0:
            raise ValueError("peak_efficiency_db cannot exceed 0 dB")
        if self.bandwidth_1db_nm <= 0:
            raise ValueError("bandwidth_1db_nm must be positive")
        lo, hi = self.band_nm
        if not (lo < self.center_wavelength_nm < hi):
            raise ValueError("center wavelength must sit inside the band")
        if self.samples is not None:
            wl, db = (np.asarray(v, dtype=float) for v in self.samples)
            if wl.ndim != 1 or wl.shape != db.shape or wl.size < 2:
                raise DimensionError("sampled spectrum needs matching 1-d arrays")
            order = np.argsort(wl)
            object.__setattr__(self, "samples", (wl[order], db[order]))

    @classmethod
    def from_csv(cls, path) -> "GratingSpectrum":
        """Load a sampled spectrum from comma-separated (wavelength_nm, efficiency_db).

        A header line is required; the band is the sampled range and the
        peak is taken from the data.
        """
        with open(path, "r", encoding="utf-8") as fh:
            first = fh.readline()
            try:
                float(first.split(",")[0])
            except ValueError:
                pass
            else:
                raise ValueError(f"{path}: missing header line")
            data = np.loadtxt(fh, delimiter=",")
        if data.ndim != 2 or data.shape[1] != 2:
            raise DimensionError(f"{path}: expected two columns")
        wl, db = data[:, 0], data[:, 1]
        peak_idx = int(np.argmax(db))
        return cls(
            center_wavelength_nm=float(wl[peak_idx]),
            peak_efficiency_db=float(db[peak_idx]),
            band_nm=(float(wl.min()), float(wl.max())),
            samples=(wl, db),
        )

    def efficiency_db(self, wavelength_nm: float) -> float:
        lo, hi = self.band_nm
        if not (lo <= wavelength_nm <= hi):
            raise BandRangeError(
                f"wavelength {wavelength_nm} nm outside modeled band [{lo}, {hi}] nm"
            )
        if self.samples is not None:
            wl, db = self.samples
            return float(np.interp(wavelength_nm, wl, db))
        detune = (wavelength_nm - self.center_wavelength_nm) / (self.bandwidth_1db_nm / 2.0)
        return self.peak_efficiency_db - detune * detune

    def efficiency(self, wavelength_nm: float) -> float:
        """Linear power efficiency at the given wavelength."""
        return 10.0 ** (self.efficiency_db(wavelength_nm) / 10.0)


def grating_efficiency_db(g: GratingSpectrum, wavelength_nm: float) -> float:
    """Functional spelling of :meth:`GratingSpectrum.efficiency_db`."""
    return g.efficiency_db(wavelength_nm)


def coupler_efficiency_from_loopback(
    total_transmission_db: float, waveguide_loss_db: float = 0.0
) -> float:
    """Per-coupler efficiency from a two-coupler loopback measurement.

    The loopback passes two nominally identical couplers plus a known
    stretch of waveguide; after adding the waveguide loss back, the
    remainder splits evenly: (total_db + waveguide_loss_db) / 2.
    """
    if total_transmission_db > 0:
        raise ValueError("loopback transmission must be expressed as dB <= 0")
    if waveguide_loss_db < 0:
        raise ValueError("waveguide_loss_db is a positive magnitude")
    return (total_transmission_db + waveguide_loss_db) / 2.0


def estimate_mzi_loss_from_demux(
    transmissions: Sequence[float],
    external_inputs: Iterable[int],
    internal_inputs: Iterable[int],
) -> float:
    """Per-MZI insertion loss from total transmissions of a switch tree.

    Light entering an external (spare second-layer) port crosses one MZI;
    light entering an internal (first-layer) port crosses two.  Averaging
    in dB and differencing cancels everything shared between the paths.

    Args:
        transmissions: per-input total linear output power, in (0, 1].
        external_inputs: indices of one-MZI inputs.
        internal_inputs: indices of two-MZI inputs.

    Returns:
        Per-MZI loss in positive dB.
    """
    ext = list(external_inputs)
    internal = list(internal_inputs)
    if not ext or not internal:
        raise ValueError("need at least one external and one internal input")
    if set(ext) & set(internal):
        raise ValueError("an input cannot be both external and internal")
    values = np.asarray(transmissions, dtype=float)
    for idx in (*ext, *internal):
        if not (0 <= idx < values.size):
            raise IndexError(f"input index {idx} out of range")
        if not (0.0 < values[idx] <= 1.0):
            raise ValueError(f"transmission at index {idx} must lie in (0, 1]")
    db = 10.0 * np.log10(values)
    return float(np.mean(db[ext]) - np.mean(db[internal]))
