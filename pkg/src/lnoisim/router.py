"""Time-domain simulation of a 1-to-4 MZI switch tree.

The tree has one first-layer switch (index 0) feeding two second-layer
switches (1: outputs 0 and 1, 2: outputs 2 and 3).  A photon train with
one photon per repetition period enters port 0 of the first switch; square
drive waveforms route consecutive photons to consecutive outputs.  Drive
channels pass through each shifter's analog low-pass response before the
phase is evaluated at the photon arrival instants (slot centers).

Drive levels use {0, V_pi}: zero volts is a full cross state, V_pi is bar.
The first-layer channel toggles every two slots (it selects the output
pair) and the shared second-layer channel toggles every slot (it selects
the output within the pair), giving a frame of four slots.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .components import MZIParams, eom_response, mzi_transfer, phase_from_voltage
from .errors import DimensionError, TimingError, TopologyError
from .photons import SourceModel

__all__ = [
    "PulseProgram",
    "SwitchMetrics",
    "TimeTrace",
    "default_pulse_program",
    "demux_input_transmissions",
    "simulate_demux",
    "switch_metrics",
]

PULSE_SCHEMA_VERSION = 1

#: Output pair fed by each switch: switch 1 -> outputs (0, 1), switch 2 -> (2, 3).
N_TREE_SWITCHES = 3
N_OUTPUTS = 4
SLOTS_PER_FRAME = 4

#: Default slot -> output assignment for the standard program.
IDENTITY_ASSIGNMENT = {0: 0, 1: 1, 2: 2, 3: 3}


@dataclass(frozen=True, eq=False)
class PulseProgram:
    """Drive waveforms on a shared uniform time grid.

    Attributes:
        t_ns: sample times, uniformly spaced and increasing.
        channels: waveform per channel name (volts), aligned with ``t_ns``.
        routing: channel name -> switch indices it drives.
    """

    t_ns: np.ndarray
    channels: dict[str, np.ndarray]
    routing: dict[str, tuple[int, ...]]

    def __post_init__(self):
        t = np.asarray(self.t_ns, dtype=float)
        if t.ndim != 1 or t.size < 2:
            raise DimensionError("time grid needs at least two samples")
        steps = np.diff(t)
        if np.any(steps <= 0) or not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-12):
            raise TimingError("time grid must be uniform and increasing")
        t = t.copy()
        t.setflags(write=False)
        object.__setattr__(self, "t_ns", t)
        channels = {}
        for name, wave in self.channels.items():
            arr = np.asarray(wave, dtype=float)
            if arr.shape != t.shape:
                raise DimensionError(f"channel {name!r} length does not match the grid")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"channel {name!r} has non-finite samples")
            arr = arr.copy()
            arr.setflags(write=False)
            channels[name] = arr
        object.__setattr__(self, "channels", channels)
        routing = {}
        driven: set[int] = set()
        for name, targets in self.routing.items():
            if name not in channels:
                raise ValueError(f"routing references unknown channel {name!r}")
            targets = tuple(int(s) for s in targets)
            for s in targets:
                if not (0 <= s < N_TREE_SWITCHES):
                    raise TopologyError(f"switch index {s} out of range")
                if s in driven:
                    raise TopologyError(f"switch {s} driven by more than one channel")
                driven.add(s)
            routing[name] = targets
        if driven != set(range(N_TREE_SWITCHES)):
            raise TopologyError("every switch in the tree must be driven by a channel")
        object.__setattr__(self, "routing", routing)

    @property
    def sample_rate_ghz(self) -> float:
        return 1.0 / float(self.t_ns[1] - self.t_ns[0])

    @property
    def duration_ns(self) -> float:
        return float(self.t_ns[-1] - self.t_ns[0])

    def channel_for_switch(self, switch: int) -> str:
        for name, targets in self.routing.items():
            if switch in targets:
                return name
        raise TopologyError(f"no channel drives switch {switch}")

    def shifted(self, offset_ns: float) -> "PulseProgram":
        """Same waveforms displaced in absolute time by ``offset_ns``."""
        return PulseProgram(self.t_ns + offset_ns, dict(self.channels), dict(self.routing))

    def to_json_dict(self) -> dict:
        return {
            "schema_version": PULSE_SCHEMA_VERSION,
            "channels": {
                name: {"t_ns": [float(t) for t in self.t_ns], "v": [float(v) for v in wave]}
                for name, wave in self.channels.items()
            },
            "routing": {name: list(targets) for name, targets in self.routing.items()},
        }

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "PulseProgram":
        version = data.get("schema_version")
        if version != PULSE_SCHEMA_VERSION:
            raise ValueError(f"unsupported pulse program schema_version {version!r}")
        channels_json = data["channels"]
        grids = [np.asarray(entry["t_ns"], dtype=float) for entry in channels_json.values()]
        if not grids:
            raise ValueError("pulse program has no channels")
        for grid in grids[1:]:
            if grid.shape != grids[0].shape or not np.allclose(grid, grids[0]):
                raise TimingError("all channels must share one time grid")
        channels = {
            name: np.asarray(entry["v"], dtype=float) for name, entry in channels_json.items()
        }
        routing = {name: tuple(v) for name, v in data["routing"].items()}
        return cls(grids[0], channels, routing)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "PulseProgram":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json_dict(json.load(fh))


def default_pulse_program(
    repetition_period_ns: float = 13.8,
    v_pi_volts: float = 4.5,
    n_frames: int = 1,
    samples_per_slot: int = 256,
    start_ns: float = 0.0,
) -> PulseProgram:
    """Square-wave program routing slot k of every frame to output k.

    Channel "A" drives the first-layer switch and toggles every two slots;
    channel "B" is fanned out to both second-layer switches and toggles
    every slot.  Levels are exactly {0, v_pi_volts}.

    The default grid density keeps the sample rate above twice the stock
    shifter bandwidth (6.5 GHz) so the drive can be low-pass filtered
    without aliasing.
    """
    if repetition_period_ns <= 0:
        raise ValueError("repetition_period_ns must be positive")
    if n_frames < 1 or samples_per_slot < 2:
        raise ValueError("need at least one frame and two samples per slot")
    n_samples = SLOTS_PER_FRAME * n_frames * samples_per_slot
    dt = repetition_period_ns / samples_per_slot
    t = start_ns + dt * np.arange(n_samples)
    slot = (np.arange(n_samples) // samples_per_slot) % SLOTS_PER_FRAME
    wave_a = np.where(slot < 2, v_pi_volts, 0.0)
    wave_b = np.where(slot % 2 == 0, v_pi_volts, 0.0)
    return PulseProgram(t, {"A": wave_a, "B": wave_b}, {"A": (0,), "B": (1, 2)})


@dataclass(frozen=True, eq=False)
class TimeTrace:
    """Per-output photon probabilities at each photon arrival instant."""

    times_ns: np.ndarray
    outputs: np.ndarray  # shape (n_events, N_OUTPUTS)
    repetition_period_ns: float
    frame_period_ns: float

    def __post_init__(self):
        times = np.asarray(self.times_ns, dtype=float)
        outs = np.asarray(self.outputs, dtype=float)
        if outs.shape != (times.size, N_OUTPUTS):
            raise DimensionError(f"outputs must be (n_events, {N_OUTPUTS})")
        times.setflags(write=False)
        outs.setflags(write=False)
        object.__setattr__(self, "times_ns", times)
        object.__setattr__(self, "outputs", outs)

    @property
    def n_events(self) -> int:
        return int(self.times_ns.size)

    def save_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["time_ns"] + [f"out{i}" for i in range(N_OUTPUTS)])
            for t, row in zip(self.times_ns, self.outputs):
                writer.writerow([repr(float(t))] + [repr(float(v)) for v in row])

    @classmethod
    def load_csv(cls, path, repetition_period_ns: float | None = None) -> "TimeTrace":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        if data.shape[1] != N_OUTPUTS + 1:
            raise DimensionError(f"expected {N_OUTPUTS + 1} columns in {path}")
        times = data[:, 0]
        period = repetition_period_ns
        if period is None:
            period = float(times[1] - times[0]) if times.size > 1 else 1.0
        return cls(times, data[:, 1:], period, SLOTS_PER_FRAME * period)


def _switch_phases(
    tree: Sequence[MZIParams], program: PulseProgram, photon_times: np.ndarray
) -> np.ndarray:
    """Filtered drive phases per switch at each photon instant, shape (3, n)."""
    phases = np.empty((N_TREE_SWITCHES, photon_times.size))
    fs = program.sample_rate_ghz
    filtered_cache: dict[tuple[str, float], np.ndarray] = {}
    for s in range(N_TREE_SWITCHES):
        name = program.channel_for_switch(s)
        shifter = tree[s].shifter
        key = (name, shifter.f_3db_ghz)
        if key not in filtered_cache:
            filtered_cache[key] = eom_response(shifter, program.channels[name], fs)
        volts = np.interp(photon_times, program.t_ns, filtered_cache[key])
        phases[s] = [phase_from_voltage(shifter, v) for v in volts]
    return phases


def simulate_demux(
    tree: Sequence[MZIParams],
    program: PulseProgram,
    source: SourceModel,
    n_frames: int,
    train_offset_ns: float = 0.0,
    phase_errors_rad: Sequence[float] = (0.0, 0.0, 0.0),
) -> TimeTrace:
    """Propagate a photon train through the actively switched tree.

    Photons arrive as instants at slot centers,
    ``t_k = train_offset_ns + (k + 1/2) T`` for ``k = 0 .. 4 n_frames - 1``
    with ``T`` the source repetition period.  Each switch's drive waveform
    is low-pass filtered by its shifter bandwidth, sampled at the photon
    instants, and converted to a phase (plus an optional static
    calibration error per switch).  The resulting per-output probabilities
    sum to one at every instant for a lossless tree.

    Raises:
        TimingError: when the program does not cover the photon train.
    """
    tree = list(tree)
    if len(tree) != N_TREE_SWITCHES:
        raise TopologyError(f"tree needs exactly {N_TREE_SWITCHES} switches")
    errors = tuple(float(e) for e in phase_errors_rad)
    if len(errors) != N_TREE_SWITCHES:
        raise DimensionError("phase_errors_rad needs one entry per switch")
    if n_frames < 1:
        raise ValueError("n_frames must be at least 1")
    period = source.repetition_period_ns
    frame = SLOTS_PER_FRAME * period
    times = train_offset_ns + period * (np.arange(SLOTS_PER_FRAME * n_frames) + 0.5)
    if times[0] < program.t_ns[0] - 1e-9 or times[-1] > program.t_ns[-1] + 1e-9:
        raise TimingError(
            f"photon train spans [{times[0]:.6g}, {times[-1]:.6g}] ns but the program "
            f"covers [{program.t_ns[0]:.6g}, {program.t_ns[-1]:.6g}] ns"
        )

    phases = _switch_phases(tree, program, times)
    outputs = np.empty((times.size, N_OUTPUTS))
    for idx in range(times.size):
        m0 = mzi_transfer(tree[0], phases[0, idx] + errors[0])
        m1 = mzi_transfer(tree[1], phases[1, idx] + errors[1])
        m2 = mzi_transfer(tree[2], phases[2, idx] + errors[2])
        upper, lower = m0[0, 0], m0[1, 0]
        outputs[idx, 0] = abs(m1[0, 0] * upper) ** 2
        outputs[idx, 1] = abs(m1[1, 0] * upper) ** 2
        outputs[idx, 2] = abs(m2[0, 0] * lower) ** 2
        outputs[idx, 3] = abs(m2[1, 0] * lower) ** 2
    return TimeTrace(times, outputs, period, frame)


@dataclass(frozen=True)
class SwitchMetrics:
    """Routing quality of a demultiplexer run."""

    average_probability: float
    per_slot_probability: tuple[float, float, float, float]
    suppression_db: float
    n_frames: int

    def to_json_dict(self) -> dict:
        suppression = self.suppression_db if math.isfinite(self.suppression_db) else None
        return {
            "average_probability": self.average_probability,
            "per_slot_probability": list(self.per_slot_probability),
            "suppression_db": suppression,
            "n_frames": self.n_frames,
        }


def switch_metrics(
    trace: TimeTrace, assignment: Mapping[int, int] | None = None
) -> SwitchMetrics:
    """Average probability of routing each slot to its assigned output.

    Per-event probabilities are normalized by the event's total output
    mass, so uniform tree loss does not masquerade as switching error.
    The unswitched residual is reported as ``10 log10(1 - p)``;
    perfect routing gives ``-inf``.

    Args:
        trace: simulated (or loaded) time trace.
        assignment: slot index (0-3) -> output index; defaults to identity.
    """
    chosen = dict(IDENTITY_ASSIGNMENT if assignment is None else assignment)
    if sorted(chosen) != list(range(SLOTS_PER_FRAME)):
        raise ValueError(f"assignment must cover slots 0..{SLOTS_PER_FRAME - 1}")
    if any(not (0 <= v < N_OUTPUTS) for v in chosen.values()):
        raise ValueError("assigned outputs out of range")
    if trace.n_events % SLOTS_PER_FRAME:
        raise DimensionError("trace length must be a whole number of frames")

    totals = trace.outputs.sum(axis=1)
    if np.any(totals <= 0):
        raise ValueError("trace contains events with zero total probability")
    slots = np.arange(trace.n_events) % SLOTS_PER_FRAME
    fractions = np.empty(trace.n_events)
    for k in range(trace.n_events):
        fractions[k] = trace.outputs[k, chosen[int(slots[k])]] / totals[k]
    per_slot = tuple(float(np.mean(fractions[slots == s])) for s in range(SLOTS_PER_FRAME))
    p = float(np.mean(fractions))
    residual = 1.0 - p
    suppression = 10.0 * math.log10(residual) if residual > 0 else -math.inf
    return SwitchMetrics(p, per_slot, suppression, trace.n_events // SLOTS_PER_FRAME)


def demux_input_transmissions(
    tree: Sequence[MZIParams], phases_rad: Sequence[float] = (0.5 * math.pi,) * 3
) -> tuple[np.ndarray, tuple[int, ...], tuple[int, ...]]:
    """Total output power for light injected into each tree input port.

    Port order: 0 and 1 are the two first-layer inputs (internal, two MZIs
    to any output); 2 and 3 are the spare second-layer inputs (external,
    one MZI).  Returns ``(transmissions, external_indices, internal_indices)``
    ready for :func:`lnoisim.components.estimate_mzi_loss_from_demux`.
    """
    tree = list(tree)
    if len(tree) != N_TREE_SWITCHES:
        raise TopologyError(f"tree needs exactly {N_TREE_SWITCHES} switches")
    m0, m1, m2 = (mzi_transfer(params, ph) for params, ph in zip(tree, phases_rad))
    branch1 = float(np.sum(np.abs(m1[:, 0]) ** 2))
    branch2 = float(np.sum(np.abs(m2[:, 0]) ** 2))
    internal = [
        float(abs(m0[0, c]) ** 2 * branch1 + abs(m0[1, c]) ** 2 * branch2) for c in (0, 1)
    ]
    external = [float(np.sum(np.abs(m[:, 1]) ** 2)) for m in (m1, m2)]
    return np.array(internal + external), (2, 3), (0, 1)
