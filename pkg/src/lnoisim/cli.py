"""Command-line front end for reproducible simulation runs.

Each subcommand reads one JSON config, writes its artifacts into an output
directory, and finishes with a ``manifest.json`` recording the tool
version, the config digest, the seed, and a SHA-256 per artifact.  Nothing
time-dependent is written, so a rerun with the same config and seed is
byte-identical.

Exit codes: 0 on success, 1 on a runtime failure (solver did not converge,
file missing, ...), 2 when the config fails validation.  Validation
collects every diagnostic before exiting so a bad config round-trips in
one attempt.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .budget import BudgetEntry, LossBudget, sweep_wavelength
from .components import GratingSpectrum, MZIParams, PhaseShifterParams, phase_from_voltage
from .core import matrix_distance
from .errors import ConfigError, LnoisimError
from .mesh import MeshConfig, compose, decompose, modulator_layout
from .photons import (
    SourceModel,
    fit_hom_visibility,
    fringe_contrast_from_overlap,
    hom_fringe,
    single_photon_distribution,
    two_photon_distribution,
)
from .reconstruct import (
    MeasuredStatistics,
    canonical_form,
    reconstruct_unitary,
    synthesize_statistics,
)
from .router import default_pulse_program, simulate_demux, switch_metrics

__all__ = ["main", "matrix_from_json_dict", "matrix_to_json_dict"]

CONFIG_SCHEMA_VERSION = 1
UNITARY_SCHEMA_VERSION = 1
MANIFEST_SCHEMA_VERSION = 1


# ---------------------------------------------------------------------------
# serialization helpers


def matrix_to_json_dict(u) -> dict:
    """JSON form of a complex matrix: separate real/imaginary parts."""
    mat = np.asarray(u, dtype=complex)
    return {
        "schema_version": UNITARY_SCHEMA_VERSION,
        "n": int(mat.shape[0]),
        "re": [[float(v.real) for v in row] for row in mat],
        "im": [[float(v.imag) for v in row] for row in mat],
    }


def matrix_from_json_dict(data) -> np.ndarray:
    re = np.asarray(data["re"], dtype=float)
    im = np.asarray(data["im"], dtype=float)
    if re.shape != im.shape or re.ndim != 2:
        raise ValueError("matrix 're' and 'im' must be matching 2-d arrays")
    return re + 1j * im


def _dump_json(obj) -> bytes:
    return (json.dumps(obj, indent=2, sort_keys=True) + "\n").encode("utf-8")


def _csv_bytes(header, rows) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(float(v)) for v in row])
    return buf.getvalue().encode("utf-8")


def _atomic_write(path: Path, data: bytes) -> None:
    fd, tmp = tempfile.mkstemp(dir=str(path.parent), prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


# ---------------------------------------------------------------------------
# config validation


def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _number(cfg, diags, key, default=None, minimum=None, maximum=None, required=False):
    if key not in cfg:
        if required:
            diags.append(f"missing required field {key!r}")
        return default
    value = cfg[key]
    if not _is_number(value):
        diags.append(f"field {key!r} must be a number")
        return default
    if minimum is not None and value < minimum:
        diags.append(f"field {key!r} must be >= {minimum}")
        return default
    if maximum is not None and value > maximum:
        diags.append(f"field {key!r} must be <= {maximum}")
        return default
    return float(value)


def _integer(cfg, diags, key, default=None, minimum=None, required=False):
    if key not in cfg:
        if required:
            diags.append(f"missing required field {key!r}")
        return default
    value = cfg[key]
    if not isinstance(value, int) or isinstance(value, bool):
        diags.append(f"field {key!r} must be an integer")
        return default
    if minimum is not None and value < minimum:
        diags.append(f"field {key!r} must be >= {minimum}")
        return default
    return value


def _boolean(cfg, diags, key, default=False):
    value = cfg.get(key, default)
    if not isinstance(value, bool):
        diags.append(f"field {key!r} must be true or false")
        return default
    return value


def _optional_number(cfg, diags, key, minimum=None, maximum=None):
    """A number, or null/absent meaning 'feature disabled'."""
    if cfg.get(key) is None:
        return None
    return _number(cfg, diags, key, minimum=minimum, maximum=maximum)


def _matrix_field(cfg, diags, key, required=False):
    if key not in cfg or cfg[key] is None:
        if required:
            diags.append(f"missing required field {key!r}")
        return None
    obj = cfg[key]
    if not isinstance(obj, dict) or "re" not in obj or "im" not in obj:
        diags.append(f"field {key!r} must be an object with 're' and 'im' arrays")
        return None
    try:
        return matrix_from_json_dict(obj)
    except (ValueError, TypeError) as exc:
        diags.append(f"field {key!r}: {exc}")
        return None


def _validate_common(cfg, experiment, diags) -> None:
    if not isinstance(cfg, dict):
        diags.append("config must be a JSON object")
        return
    version = cfg.get("schema_version")
    if version != CONFIG_SCHEMA_VERSION:
        diags.append(
            f"schema_version must be {CONFIG_SCHEMA_VERSION}, got {version!r}"
        )
    declared = cfg.get("experiment")
    if declared != experiment:
        diags.append(f"config experiment {declared!r} does not match command {experiment!r}")
    if "seed" in cfg and cfg["seed"] is not None:
        _integer(cfg, diags, "seed", minimum=0)


def _validate_hom_fringe(cfg, diags) -> None:
    _number(cfg, diags, "overlap", default=0.945, minimum=0.0, maximum=1.0)
    _number(cfg, diags, "v_pi_volts", default=4.5, minimum=1e-9)
    _number(cfg, diags, "voltage_start", default=0.0)
    _number(cfg, diags, "voltage_stop", default=9.0)
    _integer(cfg, diags, "n_points", default=41, minimum=5)
    _number(cfg, diags, "accidental_floor", default=0.0, minimum=0.0)
    _optional_number(cfg, diags, "extinction_db", minimum=0.1)
    _optional_number(cfg, diags, "poisson_mean_counts", minimum=1.0)
    start = cfg.get("voltage_start", 0.0)
    stop = cfg.get("voltage_stop", 9.0)
    if _is_number(start) and _is_number(stop) and not stop > start:
        diags.append("voltage_stop must exceed voltage_start")


def _validate_demux(cfg, diags) -> None:
    _integer(cfg, diags, "n_frames", default=10, minimum=1)
    _number(cfg, diags, "repetition_period_ns", default=13.8, minimum=1e-9)
    _number(cfg, diags, "v_pi_volts", default=4.5, minimum=1e-9)
    _optional_number(cfg, diags, "f_3db_ghz", minimum=1e-9)
    _integer(cfg, diags, "samples_per_slot", default=256, minimum=2)
    _optional_number(cfg, diags, "extinction_db", minimum=0.1)
    _optional_number(cfg, diags, "bar_leakage", minimum=0.0, maximum=0.499)
    _number(cfg, diags, "insertion_loss_db", default=0.0, minimum=0.0)
    _number(cfg, diags, "train_offset_ns", default=0.0, minimum=0.0)
    if cfg.get("extinction_db") is not None and cfg.get("bar_leakage") is not None:
        diags.append("give at most one of extinction_db and bar_leakage")
    errors = cfg.get("phase_errors_rad", [0.0, 0.0, 0.0])
    if not (isinstance(errors, list) and len(errors) == 3 and all(_is_number(v) for v in errors)):
        diags.append("field 'phase_errors_rad' must be a list of 3 numbers")


def _validate_distribution(cfg, diags) -> None:
    has_unitary = cfg.get("unitary") is not None
    has_mesh = cfg.get("mesh") is not None
    if has_unitary == has_mesh:
        diags.append("give exactly one of 'unitary' and 'mesh'")
    if has_unitary:
        _matrix_field(cfg, diags, "unitary")
    if has_mesh and not isinstance(cfg["mesh"], dict):
        diags.append("field 'mesh' must be a mesh configuration object")
    modes = cfg.get("input_modes")
    if not (
        isinstance(modes, list)
        and len(modes) in (1, 2)
        and all(isinstance(m, int) and not isinstance(m, bool) and m >= 0 for m in modes)
    ):
        diags.append("field 'input_modes' must be a list of 1 or 2 port indices")
    elif len(modes) == 2 and modes[0] == modes[1]:
        diags.append("two-photon input_modes must be distinct ports")
    _number(cfg, diags, "overlap", default=1.0, minimum=0.0, maximum=1.0)
    _boolean(cfg, diags, "collision_free_only", default=False)


def _validate_mesh_decompose(cfg, diags) -> None:
    _matrix_field(cfg, diags, "unitary", required=True)
    _number(cfg, diags, "tol", default=1e-8, minimum=0.0)


def _validate_mesh_compose(cfg, diags) -> None:
    if not isinstance(cfg.get("mesh"), dict):
        diags.append("missing required field 'mesh' (mesh configuration object)")


def _validate_reconstruct(cfg, diags) -> None:
    has_unitary = cfg.get("unitary") is not None
    has_stats = cfg.get("statistics") is not None
    if has_unitary == has_stats:
        diags.append("give exactly one of 'unitary' and 'statistics'")
    if has_unitary:
        _matrix_field(cfg, diags, "unitary")
    if has_stats and not isinstance(cfg["statistics"], dict):
        diags.append("field 'statistics' must be a measured-statistics object")
    _number(cfg, diags, "overlap", default=1.0, minimum=0.0, maximum=1.0)
    _integer(cfg, diags, "n_restarts", default=12, minimum=1)
    _boolean(cfg, diags, "collision_free_only", default=True)


def _validate_loss_budget(cfg, diags) -> None:
    entries = cfg.get("entries")
    if not (isinstance(entries, list) and entries):
        diags.append("field 'entries' must be a non-empty list")
        entries = []
    for idx, entry in enumerate(entries):
        if not isinstance(entry, dict) or not isinstance(entry.get("label"), str):
            diags.append(f"entries[{idx}] must be an object with a string 'label'")
            continue
        try:
            BudgetEntry.from_json_dict(entry)
        except (ValueError, TypeError) as exc:
            diags.append(f"entries[{idx}]: {exc}")
    sweep = cfg.get("sweep")
    if sweep is None:
        return
    if not isinstance(sweep, dict):
        diags.append("field 'sweep' must be an object")
        return
    wavelengths = sweep.get("wavelengths_nm")
    if not (
        isinstance(wavelengths, list)
        and len(wavelengths) >= 1
        and all(_is_number(v) for v in wavelengths)
    ):
        diags.append("sweep.wavelengths_nm must be a non-empty list of numbers")
    labels = sweep.get("coupler_labels")
    if not (isinstance(labels, list) and labels and all(isinstance(v, str) for v in labels)):
        diags.append("sweep.coupler_labels must be a non-empty list of entry labels")
    grating = sweep.get("grating", {})
    if not isinstance(grating, dict):
        diags.append("sweep.grating must be an object of grating parameters")


_VALIDATORS = {
    "hom-fringe": _validate_hom_fringe,
    "demux": _validate_demux,
    "distribution": _validate_distribution,
    "mesh-decompose": _validate_mesh_decompose,
    "mesh-compose": _validate_mesh_compose,
    "reconstruct": _validate_reconstruct,
    "loss-budget": _validate_loss_budget,
}


# ---------------------------------------------------------------------------
# experiment runners: config -> ({filename: bytes}, [summary lines])


def _run_hom_fringe(cfg, seed):
    overlap = cfg.get("overlap", 0.945)
    v_pi = cfg.get("v_pi_volts", 4.5)
    n_points = cfg.get("n_points", 41)
    mean_counts = cfg.get("poisson_mean_counts")
    if mean_counts is not None and seed is None:
        raise ConfigError(["seed is required when poisson_mean_counts is set"])
    shifter = PhaseShifterParams(v_pi_volts=v_pi)
    er = cfg.get("extinction_db")
    cell = MZIParams.ideal(shifter) if er is None else MZIParams.with_extinction(er, shifter)
    volts = np.linspace(cfg.get("voltage_start", 0.0), cfg.get("voltage_stop", 9.0), n_points)
    phases = np.array([phase_from_voltage(shifter, v) for v in volts])
    probs = hom_fringe(cell, phases, overlap, cfg.get("accidental_floor", 0.0))
    if mean_counts is None:
        values = probs
        sigma = None
    else:
        rng = np.random.default_rng(seed)
        values = rng.poisson(probs * mean_counts).astype(float)
        sigma = np.sqrt(np.maximum(values, 1.0))
    visibility, stderr = fit_hom_visibility(phases, values, sigma=sigma)
    top, bottom = float(values.max()), float(values.min())
    fit = {
        "visibility": visibility,
        "stderr": stderr,
        "raw_contrast": (top - bottom) / (top + bottom) if top + bottom > 0 else None,
        "expected_raw_contrast": fringe_contrast_from_overlap(overlap),
        "n_points": int(n_points),
    }
    outputs = {
        "fringe.csv": _csv_bytes(
            ["voltage_v", "phase_rad", "coincidence"], zip(volts, phases, values)
        ),
        "fit.json": _dump_json(fit),
    }
    lines = [f"visibility: {visibility:.6f} +/- {stderr:.6f}"]
    return outputs, lines


def _run_demux(cfg, seed):
    period = cfg.get("repetition_period_ns", 13.8)
    v_pi = cfg.get("v_pi_volts", 4.5)
    n_frames = cfg.get("n_frames", 10)
    f_3db = cfg.get("f_3db_ghz", 6.5)
    shifter = PhaseShifterParams(
        v_pi_volts=v_pi, f_3db_ghz=math.inf if f_3db is None else f_3db
    )
    loss = cfg.get("insertion_loss_db", 0.0)
    er = cfg.get("extinction_db")
    leak = cfg.get("bar_leakage")
    if er is not None:
        cell = MZIParams.with_extinction(er, shifter, insertion_loss_db=loss)
    elif leak is not None:
        cell = MZIParams.with_bar_leakage(leak, shifter, insertion_loss_db=loss)
    else:
        cell = MZIParams(shifter=shifter, insertion_loss_db=loss)
    program = default_pulse_program(
        repetition_period_ns=period,
        v_pi_volts=v_pi,
        n_frames=n_frames,
        samples_per_slot=cfg.get("samples_per_slot", 256),
    )
    source = SourceModel(repetition_period_ns=period)
    trace = simulate_demux(
        [cell, cell, cell],
        program,
        source,
        n_frames,
        train_offset_ns=cfg.get("train_offset_ns", 0.0),
        phase_errors_rad=cfg.get("phase_errors_rad", [0.0, 0.0, 0.0]),
    )
    metrics = switch_metrics(trace)
    outputs = {
        "trace.csv": _csv_bytes(
            ["time_ns", "out0", "out1", "out2", "out3"],
            (np.concatenate(([t], row)) for t, row in zip(trace.times_ns, trace.outputs)),
        ),
        "metrics.json": _dump_json(metrics.to_json_dict()),
    }
    lines = [
        f"average routing probability: {metrics.average_probability:.6f}",
        f"unswitched residual: {metrics.suppression_db:.2f} dB",
    ]
    return outputs, lines


def _unitary_from_config(cfg):
    if cfg.get("unitary") is not None:
        return matrix_from_json_dict(cfg["unitary"])
    return compose(MeshConfig.from_json_dict(cfg["mesh"]))


def _run_distribution(cfg, seed):
    u = _unitary_from_config(cfg)
    modes = cfg["input_modes"]
    if len(modes) == 1:
        dist = single_photon_distribution(u, modes[0])
        payload = {
            "input_modes": modes,
            "outputs": [
                {"port": int(o), "p": float(p)}
                for o, p in zip(dist.outcomes, dist.probabilities)
            ],
        }
        total = float(np.sum(dist.probabilities))
    else:
        pair = (min(modes), max(modes))
        dist = two_photon_distribution(
            u,
            pair,
            overlap=cfg.get("overlap", 1.0),
            collision_free_only=cfg.get("collision_free_only", False),
        )
        payload = dist.to_json_dict()
        total = dist.total
    outputs = {"distribution.json": _dump_json(payload)}
    return outputs, [f"total probability: {total:.9f}"]


def _run_mesh_decompose(cfg, seed):
    u = matrix_from_json_dict(cfg["unitary"])
    config = decompose(u, tol=cfg.get("tol", 1e-8))
    residual = matrix_distance(compose(config), u)
    report = {
        "recompose_distance": residual,
        "phase_count": config.phase_count,
        "n_cells": len(config.cells),
        "modulators": sorted(modulator_layout(config)),
    }
    outputs = {
        "mesh.json": _dump_json(config.to_json_dict()),
        "report.json": _dump_json(report),
    }
    return outputs, [f"recompose distance: {residual:.3e}"]


def _run_mesh_compose(cfg, seed):
    config = MeshConfig.from_json_dict(cfg["mesh"])
    u = compose(config)
    outputs = {"unitary.json": _dump_json(matrix_to_json_dict(u))}
    return outputs, [f"composed {config.n_modes}x{config.n_modes} transfer matrix"]


def _run_reconstruct(cfg, seed):
    if seed is None:
        raise ConfigError(["seed is required for reconstruction (random restarts)"])
    overlap = cfg.get("overlap", 1.0)
    reference = None
    if cfg.get("unitary") is not None:
        reference = matrix_from_json_dict(cfg["unitary"])
        stats = synthesize_statistics(
            reference, overlap=overlap, collision_free_only=cfg.get("collision_free_only", True)
        )
    else:
        stats = MeasuredStatistics.from_json_dict(cfg["statistics"])
    result = reconstruct_unitary(
        stats, seed=seed, overlap=overlap, n_restarts=cfg.get("n_restarts", 12)
    )
    report = {
        "cost": result.cost,
        "converged": result.converged,
        "n_restarts_used": result.n_restarts_used,
    }
    if reference is not None:
        report["distance_to_reference"] = matrix_distance(
            canonical_form(reference), result.unitary
        )
    outputs = {
        "reconstructed.json": _dump_json(matrix_to_json_dict(result.unitary)),
        "report.json": _dump_json(report),
    }
    lines = [f"fit cost: {result.cost:.3e} after {result.n_restarts_used} restart(s)"]
    if reference is not None:
        lines.append(f"distance to reference: {report['distance_to_reference']:.3e}")
    return outputs, lines


def _run_loss_budget(cfg, seed):
    budget = LossBudget(tuple(BudgetEntry.from_json_dict(e) for e in cfg["entries"]))
    payload = {
        "total_db": budget.total_db,
        "end_to_end_transmission": budget.end_to_end_transmission,
        "breakdown": budget.breakdown(),
    }
    outputs = {"budget.json": _dump_json(payload)}
    lines = [
        f"total loss: {budget.total_db:.3f} dB "
        f"(transmission {budget.end_to_end_transmission:.4e})"
    ]
    sweep = cfg.get("sweep")
    if sweep is not None:
        grating = GratingSpectrum(**sweep.get("grating", {}))
        wavelengths = [float(v) for v in sweep["wavelengths_nm"]]
        transmissions = sweep_wavelength(
            budget, grating, wavelengths, sweep["coupler_labels"]
        )
        outputs["sweep.csv"] = _csv_bytes(
            ["wavelength_nm", "transmission"], zip(wavelengths, transmissions)
        )
        lines.append(f"swept {len(wavelengths)} wavelengths")
    return outputs, lines


_RUNNERS = {
    "hom-fringe": _run_hom_fringe,
    "demux": _run_demux,
    "distribution": _run_distribution,
    "mesh-decompose": _run_mesh_decompose,
    "mesh-compose": _run_mesh_compose,
    "reconstruct": _run_reconstruct,
    "loss-budget": _run_loss_budget,
}


# ---------------------------------------------------------------------------
# driver


def _load_config(path: str) -> tuple[dict, str]:
    raw = Path(path).read_bytes()
    try:
        cfg = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"config is not valid JSON: {exc}"]) from exc
    if not isinstance(cfg, dict):
        raise ConfigError(["config must be a JSON object"])
    return cfg, hashlib.sha256(raw).hexdigest()


def _execute(experiment: str, args) -> int:
    cfg, digest = _load_config(args.config)
    diags: list[str] = []
    _validate_common(cfg, experiment, diags)
    if not diags or cfg.get("experiment") == experiment:
        _VALIDATORS[experiment](cfg, diags)
    if diags:
        raise ConfigError(diags)

    seed = args.seed if args.seed is not None else cfg.get("seed")
    outputs, lines = _RUNNERS[experiment](cfg, seed)

    outdir = Path(args.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    digests = {}
    for name, data in outputs.items():
        _atomic_write(outdir / name, data)
        digests[name] = hashlib.sha256(data).hexdigest()
    manifest = {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "tool": "lnoisim",
        "tool_version": __version__,
        "experiment": experiment,
        "config_sha256": digest,
        "seed": seed,
        "outputs": digests,
    }
    _atomic_write(outdir / "manifest.json", _dump_json(manifest))

    if not args.quiet:
        for line in lines:
            print(line)
        for name in [*outputs, "manifest.json"]:
            print(f"wrote {outdir / name}")
    return 0


def _execute_validate(args) -> int:
    cfg, _ = _load_config(args.config)
    experiment = cfg.get("experiment")
    diags: list[str] = []
    if experiment not in _VALIDATORS:
        diags.append(
            f"unknown experiment {experiment!r}; expected one of {sorted(_VALIDATORS)}"
        )
    else:
        _validate_common(cfg, experiment, diags)
        _VALIDATORS[experiment](cfg, diags)
    if diags:
        raise ConfigError(diags)
    if not args.quiet:
        print(f"config ok: {experiment}")
    return 0


def _add_common_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="path to the JSON run config")
    parser.add_argument(
        "--output-dir", default=".", help="directory for artifacts (default: cwd)"
    )
    parser.add_argument(
        "--seed", type=int, default=None, help="override the config's RNG seed"
    )
    parser.add_argument("--quiet", action="store_true", help="suppress the run summary")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lnoisim",
        description="Reproducible simulations of a fast switched photonic processor.",
    )
    parser.add_argument("--version", action="version", version=f"lnoisim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, text in [
        ("hom-fringe", "sweep an MZI phase and fit two-photon interference visibility"),
        ("demux", "route a pulsed photon train through the 1-to-4 switch tree"),
        ("distribution", "one- or two-photon output statistics of a transfer matrix"),
        ("reconstruct", "fit a transfer matrix to photon-counting statistics"),
        ("loss-budget", "total a chain of insertion losses"),
        ("validate", "check a config without running anything"),
    ]:
        p = sub.add_parser(name, help=text)
        _add_common_arguments(p)

    mesh = sub.add_parser("mesh", help="rectangular-mesh synthesis utilities")
    mesh_sub = mesh.add_subparsers(dest="mesh_command", required=True)
    for name, text in [
        ("decompose", "factor a unitary into per-cell phases"),
        ("compose", "multiply out a mesh configuration"),
    ]:
        p = mesh_sub.add_parser(name, help=text)
        _add_common_arguments(p)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "mesh":
        experiment = f"mesh-{args.mesh_command}"
    else:
        experiment = args.command
    try:
        if experiment == "validate":
            return _execute_validate(args)
        return _execute(experiment, args)
    except ConfigError as exc:
        for diag in exc.diagnostics:
            print(f"config error: {diag}", file=sys.stderr)
        return 2
    except LnoisimError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
