"""Simulation toolkit for a fast electro-optic photonic processor.

The package models a small programmable interferometer driven by a pulsed
single-photon source: 2x2 switch cells with finite extinction, bandwidth
and drive electronics; rectangular mesh synthesis of arbitrary unitaries;
one- and two-photon counting statistics with partial distinguishability;
time-domain demultiplexing of a photon train; loss budgeting; and transfer
matrix reconstruction from measured statistics.
"""

from .budget import BudgetEntry, LossBudget, sweep_wavelength
from .components import (
    EXTINCTION_CAP_DB,
    CouplerParams,
    GratingSpectrum,
    MZIParams,
    PhaseShifterParams,
    WaveguideLossParams,
    coupler_efficiency_from_loopback,
    coupler_matrix,
    eom_response,
    eom_s21_db,
    eom_step_response,
    estimate_mzi_loss_from_demux,
    extinction_ratio_db,
    grating_efficiency_db,
    imbalance_for_bar_leakage,
    imbalance_for_extinction,
    mzi_transfer,
    phase_from_voltage,
    s21_crossing_ghz,
    voltage_for_phase,
)
from .core import (
    PERMANENT_MAX_ORDER,
    ProbabilityDistribution,
    as_complex_matrix,
    haar_random_unitary,
    is_subunitary,
    is_unitary,
    matrix_distance,
    permanent,
    statistical_fidelity,
)
from .errors import (
    AliasingError,
    BandRangeError,
    ComplianceError,
    ConfigError,
    ConvergenceError,
    CoverageError,
    DimensionError,
    FitError,
    GaugeError,
    LnoisimError,
    NormalizationError,
    OutcomeMismatchError,
    TimingError,
    TopologyError,
)
from .mesh import (
    MeshCell,
    MeshConfig,
    VoltageProgram,
    all_bar_config,
    all_cross_config,
    clements_layout,
    compose,
    decompose,
    gauge_input_phases,
    modulator_layout,
    phases_to_voltages,
    wrap_phase,
)
from .photons import (
    SourceModel,
    TwoPhotonDistribution,
    effective_pair_overlap,
    fit_hom_visibility,
    fringe_contrast_from_overlap,
    hom_fringe,
    nphoton_collision_free_distribution,
    single_photon_distribution,
    two_photon_distribution,
)
from .reconstruct import (
    MeasuredStatistics,
    ReconstructionResult,
    canonical_form,
    canonical_phase_gauge,
    reconstruct_unitary,
    synthesize_statistics,
)
from .router import (
    PulseProgram,
    SwitchMetrics,
    TimeTrace,
    default_pulse_program,
    demux_input_transmissions,
    simulate_demux,
    switch_metrics,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # core
    "PERMANENT_MAX_ORDER",
    "ProbabilityDistribution",
    "as_complex_matrix",
    "haar_random_unitary",
    "is_subunitary",
    "is_unitary",
    "matrix_distance",
    "permanent",
    "statistical_fidelity",
    # components
    "EXTINCTION_CAP_DB",
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
    # mesh
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
    "wrap_phase",
    # photons
    "SourceModel",
    "TwoPhotonDistribution",
    "effective_pair_overlap",
    "fit_hom_visibility",
    "fringe_contrast_from_overlap",
    "hom_fringe",
    "nphoton_collision_free_distribution",
    "single_photon_distribution",
    "two_photon_distribution",
    # router
    "PulseProgram",
    "SwitchMetrics",
    "TimeTrace",
    "default_pulse_program",
    "demux_input_transmissions",
    "simulate_demux",
    "switch_metrics",
    # budget
    "BudgetEntry",
    "LossBudget",
    "sweep_wavelength",
    # reconstruct
    "MeasuredStatistics",
    "ReconstructionResult",
    "canonical_form",
    "canonical_phase_gauge",
    "reconstruct_unitary",
    "synthesize_statistics",
    # errors
    "AliasingError",
    "BandRangeError",
    "ComplianceError",
    "ConfigError",
    "ConvergenceError",
    "CoverageError",
    "DimensionError",
    "FitError",
    "GaugeError",
    "LnoisimError",
    "NormalizationError",
    "OutcomeMismatchError",
    "TimingError",
    "TopologyError",
]
