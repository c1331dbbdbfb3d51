"""Rectangular meshes of 2x2 interferometer cells.

A mesh on ``n`` modes is an ordered sequence of ``n (n - 1) / 2`` cells on
adjacent mode pairs followed by one phase per output.  Each cell is an MZI
whose internal phase ``theta`` sets the splitting (``theta = pi`` is bar,
``theta = 0`` is cross) with an external phase ``phi`` applied to the upper
mode just before the cell.  Any unitary factors exactly through this
structure; :func:`decompose` computes the factorization by alternately
nulling matrix elements from the left and the right and then pushing the
residual diagonal to the outputs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .components import (
    MZIParams,
    PhaseShifterParams,
    mzi_transfer,
    voltage_for_phase,
)
from .core import as_complex_matrix, is_unitary
from .errors import ComplianceError, DimensionError, GaugeError, TopologyError

__all__ = [
    "MeshCell",
    "MeshConfig",
    "VoltageProgram",
    "all_bar_config",
    "all_cross_config",
    "clements_layout",
    "compose",
    "decompose",
    "gauge_input_phases",
    "modulator_layout",
    "phases_to_voltages",
]

MESH_SCHEMA_VERSION = 1

_TWO_PI = 2.0 * math.pi


def wrap_phase(value: float) -> float:
    """Canonical representative of a phase in [0, 2 pi)."""
    wrapped = float(value) % _TWO_PI
    if _TWO_PI - wrapped < 1e-12:
        wrapped = 0.0
    return abs(wrapped)


@dataclass(frozen=True)
class MeshCell:
    """One interferometer cell: adjacent mode pair plus (theta, phi)."""

    modes: tuple[int, int]
    theta: float
    phi: float = 0.0

    def __post_init__(self):
        i, j = self.modes
        if j != i + 1 or i < 0:
            raise TopologyError(f"cell must act on adjacent modes, got {self.modes}")
        if not (math.isfinite(self.theta) and math.isfinite(self.phi)):
            raise ValueError("cell phases must be finite")
        object.__setattr__(self, "modes", (int(i), int(j)))


@dataclass(frozen=True, eq=False)
class MeshConfig:
    """Complete phase configuration of a rectangular mesh."""

    n_modes: int
    cells: tuple[MeshCell, ...]
    output_phases: np.ndarray

    def __post_init__(self):
        if self.n_modes < 2:
            raise TopologyError(f"a mesh needs at least 2 modes, got {self.n_modes}")
        cells = tuple(self.cells)
        object.__setattr__(self, "cells", cells)
        expected = self.n_modes * (self.n_modes - 1) // 2
        if len(cells) != expected:
            raise TopologyError(
                f"{self.n_modes}-mode mesh requires {expected} cells, got {len(cells)}"
            )
        for cell in cells:
            if cell.modes[1] >= self.n_modes:
                raise TopologyError(f"cell {cell.modes} exceeds mode count {self.n_modes}")
        phases = np.asarray(self.output_phases, dtype=float)
        if phases.shape != (self.n_modes,):
            raise DimensionError(
                f"output_phases must have length {self.n_modes}, got {phases.shape}"
            )
        if not np.all(np.isfinite(phases)):
            raise ValueError("output phases must be finite")
        phases = phases.copy()
        phases.setflags(write=False)
        object.__setattr__(self, "output_phases", phases)

    @property
    def phase_count(self) -> int:
        """Number of independently drivable phases (see :func:`modulator_layout`)."""
        return len(modulator_layout(self))

    def canonicalized(self) -> "MeshConfig":
        """Same mesh with every phase wrapped into [0, 2 pi)."""
        cells = tuple(
            MeshCell(c.modes, wrap_phase(c.theta), wrap_phase(c.phi)) for c in self.cells
        )
        outputs = np.array([wrap_phase(p) for p in self.output_phases])
        return MeshConfig(self.n_modes, cells, outputs)

    def to_json_dict(self) -> dict:
        return {
            "schema_version": MESH_SCHEMA_VERSION,
            "n_modes": self.n_modes,
            "cells": [
                {"modes": list(c.modes), "theta": float(c.theta), "phi": float(c.phi)}
                for c in self.cells
            ],
            "output_phases": [float(p) for p in self.output_phases],
        }

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "MeshConfig":
        version = data.get("schema_version")
        if version != MESH_SCHEMA_VERSION:
            raise ValueError(f"unsupported mesh schema_version {version!r}")
        cells = tuple(
            MeshCell(tuple(entry["modes"]), float(entry["theta"]), float(entry.get("phi", 0.0)))
            for entry in data["cells"]
        )
        return cls(int(data["n_modes"]), cells, np.asarray(data["output_phases"], dtype=float))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "MeshConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json_dict(json.load(fh))


def clements_layout(n: int) -> list[tuple[int, int]]:
    """Mode pairs of the rectangular mesh in propagation order.

    Columns alternate between pairs starting at mode 0 and mode 1; the
    total count is n (n - 1) / 2.
    """
    pairs = []
    for col in range(n):
        for top in range(col % 2, n - 1, 2):
            pairs.append((top, top + 1))
    return pairs[: n * (n - 1) // 2]


def _ideal_cell_matrix(theta: float, phi: float) -> np.ndarray:
    # Equal to mzi_transfer(ideal, theta) @ diag(e^{i phi}, 1).
    half = 0.5 * theta
    s, c = math.sin(half), math.cos(half)
    pref = 1j * complex(math.cos(half), math.sin(half))
    eip = complex(math.cos(phi), math.sin(phi))
    return pref * np.array([[eip * s, c], [eip * c, -s]], dtype=np.complex128)


def _cell_matrix(cell: MeshCell, params: MZIParams | None) -> np.ndarray:
    if params is None:
        return _ideal_cell_matrix(cell.theta, cell.phi)
    block = mzi_transfer(params, cell.theta)
    block = block @ np.array(
        [[np.exp(1j * cell.phi), 0.0], [0.0, 1.0]], dtype=np.complex128
    )
    return block


def compose(
    config: MeshConfig,
    cell_params: MZIParams | Sequence[MZIParams] | None = None,
) -> np.ndarray:
    """Transfer matrix of the configured mesh.

    Cells multiply in list order (first cell hits the input first), then
    the output phases apply as a diagonal.  With ``cell_params`` each cell
    uses the given physical MZI model instead of the ideal one; a single
    ``MZIParams`` is broadcast to every cell.

    Args:
        config: mesh phases and layout.
        cell_params: None for ideal cells, one ``MZIParams`` for all cells,
            or one per cell.
    """
    n = config.n_modes
    if cell_params is None:
        per_cell: list[MZIParams | None] = [None] * len(config.cells)
    elif isinstance(cell_params, MZIParams):
        per_cell = [cell_params] * len(config.cells)
    else:
        per_cell = list(cell_params)
        if len(per_cell) != len(config.cells):
            raise DimensionError(
                f"need {len(config.cells)} cell params, got {len(per_cell)}"
            )
    u = np.eye(n, dtype=np.complex128)
    for cell, params in zip(config.cells, per_cell):
        i, j = cell.modes
        block = _cell_matrix(cell, params)
        u[[i, j], :] = block @ u[[i, j], :]
    u *= np.exp(1j * config.output_phases)[:, None]
    return u


def _null_with_right(u: np.ndarray, row: int, col: int) -> tuple[float, float]:
    """Phases (theta, phi) so that u @ T(theta, phi)^{-1} on columns
    (col, col+1) zeroes u[row, col]."""
    a, b = u[row, col], u[row, col + 1]
    if abs(a) < 1e-300:
        # Element already null (or the cell must go full bar); bar is canonical.
        return math.pi, 0.0
    ratio = -b / a
    theta = 2.0 * math.atan(abs(ratio))
    phi = -np.angle(ratio) if ratio != 0 else 0.0
    return theta, float(phi)


def _null_with_left(u: np.ndarray, row: int, col: int) -> tuple[float, float]:
    """Phases (theta, phi) so that T(theta, phi) @ u on rows (row-1, row)
    zeroes u[row, col]."""
    a, b = u[row - 1, col], u[row, col]
    if abs(b) < 1e-300:
        return math.pi, 0.0
    ratio = a / b
    theta = 2.0 * math.atan(abs(ratio))
    phi = -np.angle(ratio) if ratio != 0 else 0.0
    return theta, float(phi)


def decompose(u: object, tol: float = 1e-8) -> MeshConfig:
    """Factor a unitary into mesh phases (rectangular decomposition).

    The returned configuration reproduces ``u`` exactly through
    :func:`compose` with ideal cells, and all phases are canonical in
    [0, 2 pi).  Identity maps to all-bar cells with zero external and
    output phases.

    Raises:
        ValueError: when ``u`` is not unitary within ``tol``.
    """
    mat = as_complex_matrix(u)
    n, m = mat.shape
    if n != m:
        raise DimensionError(f"decompose requires a square matrix, got {mat.shape}")
    if n < 2:
        raise DimensionError("decompose requires at least 2 modes")
    if not is_unitary(mat, tol=tol):
        raise ValueError("matrix is not unitary within tolerance")

    work = mat.astype(np.complex128, copy=True)
    right_cells: list[MeshCell] = []
    left_ops: list[tuple[int, float, float]] = []  # (upper mode, theta, phi)

    for diag in range(1, n):
        if diag % 2 == 1:
            for j in range(diag):
                row, col = n - 1 - j, diag - 1 - j
                theta, phi = _null_with_right(work, row, col)
                tinv = _ideal_cell_matrix(theta, phi).conj().T
                work[:, [col, col + 1]] = work[:, [col, col + 1]] @ tinv
                work[row, col] = 0.0
                right_cells.append(MeshCell((col, col + 1), theta, phi))
        else:
            for j in range(1, diag + 1):
                row, col = n + j - diag - 1, j - 1
                theta, phi = _null_with_left(work, row, col)
                t = _ideal_cell_matrix(theta, phi)
                work[[row - 1, row], :] = t @ work[[row - 1, row], :]
                work[row, col] = 0.0
                left_ops.append((row - 1, theta, phi))

    diag_phases = np.diagonal(work).copy()
    # Push the diagonal through the left factors: T^{-1} D = D' T', which
    # keeps theta and rotates phi and the two diagonal entries.
    converted: list[MeshCell] = []
    for upper, theta, phi in reversed(left_ops):
        d1, d2 = diag_phases[upper], diag_phases[upper + 1]
        new_phi = float(np.angle(d1 / d2))
        e_mt = complex(math.cos(theta), -math.sin(theta))
        e_mp = complex(math.cos(phi), -math.sin(phi))
        diag_phases[upper] = -e_mt * e_mp * d2
        diag_phases[upper + 1] = -e_mt * d2
        converted.append(MeshCell((upper, upper + 1), theta, new_phi))

    cells = tuple(right_cells + converted)
    config = MeshConfig(n, cells, np.angle(diag_phases))
    return config.canonicalized()


def all_bar_config(n: int) -> MeshConfig:
    """Every cell in the bar state (theta = pi, phi = 0), zero output phases."""
    cells = tuple(MeshCell(pair, math.pi, 0.0) for pair in clements_layout(n))
    return MeshConfig(n, cells, np.zeros(n))


def all_cross_config(n: int) -> MeshConfig:
    """Every cell fully cross (theta = 0); light walks across the mesh."""
    cells = tuple(MeshCell(pair, 0.0, 0.0) for pair in clements_layout(n))
    return MeshConfig(n, cells, np.zeros(n))


def modulator_layout(config: MeshConfig) -> dict[str, tuple[int, str]]:
    """Drivable modulators of a mesh: name -> (cell index, role).

    Every cell carries an internal modulator.  A cell's external phase is
    drivable only when some earlier cell already touched its upper mode;
    otherwise that phase sits directly on a chip input, where it is pure
    gauge and no electrode exists.  For four modes this yields the device's
    ten modulators (six internal plus four external).
    """
    layout: dict[str, tuple[int, str]] = {}
    seen: set[int] = set()
    for idx, cell in enumerate(config.cells):
        layout[f"cell{idx}.theta"] = (idx, "internal")
        upper, lower = cell.modes
        if upper in seen:
            layout[f"cell{idx}.phi"] = (idx, "external")
        seen.update((upper, lower))
    return layout


def _gauge_cell_indices(config: MeshConfig) -> list[int]:
    drivable = {idx for idx, role in modulator_layout(config).values() if role == "external"}
    return [idx for idx in range(len(config.cells)) if idx not in drivable]


def gauge_input_phases(config: MeshConfig) -> tuple[MeshConfig, np.ndarray]:
    """Move undrivable external phases onto the chip inputs.

    Returns ``(reduced, input_phases)`` where the reduced configuration has
    zero external phase on every input-facing cell and
    ``compose(config) == compose(reduced) @ diag(exp(i input_phases))``.
    Input phases only ever multiply measured amplitudes by a global factor
    per input, so photon statistics are unchanged.
    """
    input_phases = np.zeros(config.n_modes)
    cells = list(config.cells)
    for idx in _gauge_cell_indices(config):
        cell = cells[idx]
        input_phases[cell.modes[0]] = wrap_phase(cell.phi)
        cells[idx] = MeshCell(cell.modes, cell.theta, 0.0)
    reduced = MeshConfig(config.n_modes, tuple(cells), config.output_phases)
    return reduced, input_phases


@dataclass(frozen=True)
class VoltageProgram:
    """Static drive voltages realizing a mesh configuration.

    Attributes:
        voltages: volts per modulator name.
        modulators: modulator name -> (cell index, "internal" | "external").
        compliance_volts: limit each |V| was checked against.
    """

    voltages: dict[str, float]
    modulators: dict[str, tuple[int, str]]
    compliance_volts: float

    def __post_init__(self):
        for name, volts in self.voltages.items():
            if not math.isfinite(volts):
                raise ValueError(f"voltage for {name} must be finite")
            if abs(volts) > self.compliance_volts:
                raise ComplianceError(
                    f"{name}: |{volts:.6g} V| exceeds compliance {self.compliance_volts} V"
                )
            if name not in self.modulators:
                raise ValueError(f"voltage for unknown modulator {name}")


def phases_to_voltages(
    config: MeshConfig,
    shifters: PhaseShifterParams | Mapping[str, PhaseShifterParams],
    compliance_volts: float = 10.0,
) -> VoltageProgram:
    """Convert mesh phases into per-modulator drive voltages.

    Every requested phase is reduced modulo 2 pi to the smallest-|V|
    representative for its shifter, so reapplying
    ``phase_from_voltage`` reproduces the phase up to whole turns.

    Args:
        config: mesh configuration; input-facing external phases must be
            zero (apply :func:`gauge_input_phases` first).
        shifters: one parameter set for all modulators, or one per
            modulator name.
        compliance_volts: electrical limit; violations raise
            :class:`ComplianceError`.

    Raises:
        GaugeError: when an undrivable input-facing phase is nonzero.
    """
    layout = modulator_layout(config)
    for idx in _gauge_cell_indices(config):
        residual = wrap_phase(config.cells[idx].phi)
        if min(residual, _TWO_PI - residual) > 1e-9:
            raise GaugeError(
                f"cell {idx} carries input-facing phase {residual:.6g} rad with no "
                "modulator; call gauge_input_phases() first"
            )
    voltages: dict[str, float] = {}
    for name, (idx, role) in layout.items():
        cell = config.cells[idx]
        phase = cell.theta if role == "internal" else cell.phi
        params = shifters if isinstance(shifters, PhaseShifterParams) else shifters[name]
        volts = voltage_for_phase(params, phase)
        if abs(volts) > compliance_volts:
            raise ComplianceError(
                f"{name}: phase {phase:.6g} rad needs {volts:.6g} V, beyond "
                f"compliance {compliance_volts} V"
            )
        voltages[name] = volts
    return VoltageProgram(voltages, layout, compliance_volts)
