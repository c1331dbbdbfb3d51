import hashlib
import json
import subprocess

import numpy as np
import pytest

from lnoisim import compose, haar_random_unitary, matrix_distance
from lnoisim.cli import build_parser, main, matrix_from_json_dict, matrix_to_json_dict


def write_config(tmp_path, name, payload):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


def read_json(path):
    return json.loads(path.read_text())


def run(args):
    return main([*args, "--quiet"])


def test_parser_accepts_all_subcommands():
    parser = build_parser()
    for argv in (
        ["hom-fringe", "--config", "c.json"],
        ["demux", "--config", "c.json", "--seed", "3"],
        ["distribution", "--config", "c.json"],
        ["reconstruct", "--config", "c.json"],
        ["loss-budget", "--config", "c.json", "--output-dir", "out"],
        ["mesh", "decompose", "--config", "c.json"],
        ["mesh", "compose", "--config", "c.json"],
        ["validate", "--config", "c.json"],
    ):
        args = parser.parse_args(argv)
        assert args.config == "c.json"


def test_matrix_json_helpers_round_trip():
    u = haar_random_unitary(4, seed=11)
    again = matrix_from_json_dict(matrix_to_json_dict(u))
    assert np.array_equal(again, u)


def test_validate_accepts_good_config(tmp_path):
    cfg = write_config(
        tmp_path,
        "fringe.json",
        {"schema_version": 1, "experiment": "hom-fringe", "overlap": 0.945},
    )
    assert run(["validate", "--config", cfg]) == 0


def test_validate_collects_every_diagnostic(tmp_path, capsys):
    cfg = write_config(
        tmp_path,
        "bad.json",
        {
            "schema_version": 7,
            "experiment": "hom-fringe",
            "overlap": 1.5,
            "n_points": 2,
            "voltage_start": 5.0,
            "voltage_stop": 1.0,
        },
    )
    assert run(["validate", "--config", cfg]) == 2
    err = capsys.readouterr().err
    # one line per problem, all reported in a single pass
    assert err.count("config error:") >= 4
    assert "schema_version" in err
    assert "overlap" in err


def test_invalid_json_is_a_config_error(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    assert run(["validate", "--config", str(path)]) == 2
    assert "not valid JSON" in capsys.readouterr().err


def test_missing_config_file_exits_1(tmp_path, capsys):
    assert run(["validate", "--config", str(tmp_path / "nope.json")]) == 1
    assert "error" in capsys.readouterr().err


def test_experiment_command_mismatch(tmp_path, capsys):
    cfg = write_config(
        tmp_path, "c.json", {"schema_version": 1, "experiment": "demux"}
    )
    assert run(["hom-fringe", "--config", cfg]) == 2
    assert "does not match" in capsys.readouterr().err


def test_hom_fringe_outputs_and_manifest(tmp_path):
    cfg = write_config(
        tmp_path,
        "fringe.json",
        {
            "schema_version": 1,
            "experiment": "hom-fringe",
            "overlap": 0.945,
            "n_points": 21,
        },
    )
    out = tmp_path / "out"
    assert run(["hom-fringe", "--config", cfg, "--output-dir", str(out)]) == 0
    fit = read_json(out / "fit.json")
    assert fit["visibility"] == pytest.approx(0.945, abs=1e-6)
    assert (out / "fringe.csv").exists()

    manifest = read_json(out / "manifest.json")
    assert manifest["experiment"] == "hom-fringe"
    assert manifest["tool"] == "lnoisim"
    assert sorted(manifest["outputs"]) == ["fit.json", "fringe.csv"]
    for name, digest in manifest["outputs"].items():
        assert hashlib.sha256((out / name).read_bytes()).hexdigest() == digest


def test_reruns_are_byte_identical(tmp_path):
    cfg = write_config(
        tmp_path,
        "fringe.json",
        {
            "schema_version": 1,
            "experiment": "hom-fringe",
            "poisson_mean_counts": 800,
            "seed": 7,
            "n_points": 21,
        },
    )
    dirs = [tmp_path / "run1", tmp_path / "run2"]
    for d in dirs:
        assert run(["hom-fringe", "--config", cfg, "--output-dir", str(d)]) == 0
    names = sorted(p.name for p in dirs[0].iterdir())
    assert names == sorted(p.name for p in dirs[1].iterdir())
    for name in names:
        assert (dirs[0] / name).read_bytes() == (dirs[1] / name).read_bytes()


def test_poisson_fringe_requires_seed(tmp_path, capsys):
    cfg = write_config(
        tmp_path,
        "fringe.json",
        {"schema_version": 1, "experiment": "hom-fringe", "poisson_mean_counts": 500},
    )
    assert run(["hom-fringe", "--config", cfg]) == 2
    assert "seed" in capsys.readouterr().err


def test_demux_run_reports_clean_routing(tmp_path):
    cfg = write_config(
        tmp_path,
        "demux.json",
        {
            "schema_version": 1,
            "experiment": "demux",
            "n_frames": 3,
            "f_3db_ghz": None,
        },
    )
    out = tmp_path / "out"
    assert run(["demux", "--config", cfg, "--output-dir", str(out)]) == 0
    metrics = read_json(out / "metrics.json")
    assert metrics["average_probability"] == pytest.approx(1.0, abs=1e-9)
    assert metrics["suppression_db"] is None  # nothing leaked at all
    rows = (out / "trace.csv").read_text().strip().splitlines()
    assert rows[0] == "time_ns,out0,out1,out2,out3"
    assert len(rows) == 1 + 3 * 4


def test_demux_rejects_conflicting_extinction_settings(tmp_path, capsys):
    cfg = write_config(
        tmp_path,
        "demux.json",
        {
            "schema_version": 1,
            "experiment": "demux",
            "extinction_db": 21.0,
            "bar_leakage": 0.01,
        },
    )
    assert run(["demux", "--config", cfg]) == 2
    err = capsys.readouterr().err
    assert "extinction_db" in err and "bar_leakage" in err


def test_distribution_single_photon(tmp_path):
    u = haar_random_unitary(4, seed=21)
    cfg = write_config(
        tmp_path,
        "dist.json",
        {
            "schema_version": 1,
            "experiment": "distribution",
            "unitary": matrix_to_json_dict(u),
            "input_modes": [2],
        },
    )
    out = tmp_path / "out"
    assert run(["distribution", "--config", cfg, "--output-dir", str(out)]) == 0
    payload = read_json(out / "distribution.json")
    got = {entry["port"]: entry["p"] for entry in payload["outputs"]}
    for port in range(4):
        assert got[port] == pytest.approx(abs(u[port, 2]) ** 2, abs=1e-12)


def test_distribution_two_photon_from_mesh(tmp_path):
    # compose and sample in one pass: feed the mesh for the reversal
    # permutation and check the deterministic two-photon outcome
    mesh_cfg = read_json_mesh_for_reversal(tmp_path)
    cfg = write_config(
        tmp_path,
        "dist.json",
        {
            "schema_version": 1,
            "experiment": "distribution",
            "mesh": mesh_cfg,
            "input_modes": [0, 1],
            "overlap": 1.0,
        },
    )
    out = tmp_path / "out"
    assert run(["distribution", "--config", cfg, "--output-dir", str(out)]) == 0
    payload = read_json(out / "distribution.json")
    probs = {tuple(entry["pattern"]): entry["p"] for entry in payload["outputs"]}
    assert probs[(2, 3)] == pytest.approx(1.0, abs=1e-12)


def read_json_mesh_for_reversal(tmp_path):
    from lnoisim import all_cross_config

    return all_cross_config(4).to_json_dict()


def test_mesh_decompose_compose_round_trip(tmp_path):
    u = haar_random_unitary(4, seed=33)
    cfg1 = write_config(
        tmp_path,
        "dec.json",
        {
            "schema_version": 1,
            "experiment": "mesh-decompose",
            "unitary": matrix_to_json_dict(u),
        },
    )
    dec_out = tmp_path / "dec"
    assert run(["mesh", "decompose", "--config", cfg1, "--output-dir", str(dec_out)]) == 0
    report = read_json(dec_out / "report.json")
    assert report["recompose_distance"] < 1e-12
    assert report["phase_count"] == 10
    assert report["n_cells"] == 6

    cfg2 = write_config(
        tmp_path,
        "comp.json",
        {
            "schema_version": 1,
            "experiment": "mesh-compose",
            "mesh": read_json(dec_out / "mesh.json"),
        },
    )
    comp_out = tmp_path / "comp"
    assert run(["mesh", "compose", "--config", cfg2, "--output-dir", str(comp_out)]) == 0
    recovered = matrix_from_json_dict(read_json(comp_out / "unitary.json"))
    assert matrix_distance(recovered, u) < 1e-12


def test_reconstruct_requires_seed(tmp_path, capsys):
    cfg = write_config(
        tmp_path,
        "rec.json",
        {
            "schema_version": 1,
            "experiment": "reconstruct",
            "unitary": matrix_to_json_dict(haar_random_unitary(4, seed=1)),
        },
    )
    assert run(["reconstruct", "--config", cfg]) == 2
    assert "seed is required" in capsys.readouterr().err


def test_reconstruct_from_reference_unitary(tmp_path):
    cfg = write_config(
        tmp_path,
        "rec.json",
        {
            "schema_version": 1,
            "experiment": "reconstruct",
            "unitary": matrix_to_json_dict(haar_random_unitary(4, seed=13)),
            "seed": 0,
            "n_restarts": 4,
        },
    )
    out = tmp_path / "out"
    assert run(["reconstruct", "--config", cfg, "--output-dir", str(out)]) == 0
    report = read_json(out / "report.json")
    assert report["converged"] is True
    assert report["distance_to_reference"] < 1e-6
    assert read_json(out / "manifest.json")["seed"] == 0


def test_seed_flag_overrides_config(tmp_path):
    cfg = write_config(
        tmp_path,
        "fringe.json",
        {
            "schema_version": 1,
            "experiment": "hom-fringe",
            "poisson_mean_counts": 400,
            "seed": 1,
            "n_points": 21,
        },
    )
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    assert run(["hom-fringe", "--config", cfg, "--output-dir", str(out_a), "--seed", "2"]) == 0
    assert run(["hom-fringe", "--config", cfg, "--output-dir", str(out_b)]) == 0
    assert read_json(out_a / "manifest.json")["seed"] == 2
    assert (out_a / "fringe.csv").read_bytes() != (out_b / "fringe.csv").read_bytes()


def test_loss_budget_with_wavelength_sweep(tmp_path):
    cfg = write_config(
        tmp_path,
        "budget.json",
        {
            "schema_version": 1,
            "experiment": "loss-budget",
            "entries": [
                {"label": "coupler_in", "loss_db": 3.4},
                {"label": "chip", "db_per_cm": 0.3, "length_cm": 2.0},
                {"label": "coupler_out", "loss_db": 3.4},
            ],
            "sweep": {
                "wavelengths_nm": [924.0, 930.0, 936.0],
                "coupler_labels": ["coupler_in", "coupler_out"],
                "grating": {},
            },
        },
    )
    out = tmp_path / "out"
    assert run(["loss-budget", "--config", cfg, "--output-dir", str(out)]) == 0
    budget = read_json(out / "budget.json")
    assert budget["total_db"] == pytest.approx(7.4, abs=1e-12)
    rows = (out / "sweep.csv").read_text().strip().splitlines()
    assert rows[0] == "wavelength_nm,transmission"
    assert len(rows) == 4
    # the center wavelength transmits best
    transmissions = [float(r.split(",")[1]) for r in rows[1:]]
    assert transmissions[1] == max(transmissions)


def test_console_script_runs(tmp_path):
    cfg = write_config(
        tmp_path,
        "fringe.json",
        {"schema_version": 1, "experiment": "hom-fringe", "n_points": 21},
    )
    out = tmp_path / "out"
    proc = subprocess.run(
        ["lnoisim", "hom-fringe", "--config", cfg, "--output-dir", str(out)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert "visibility" in proc.stdout
    assert (out / "manifest.json").exists()


def test_compose_output_matches_library(tmp_path):
    from lnoisim import MeshConfig

    mesh_dict = read_json_mesh_for_reversal(tmp_path)
    cfg = write_config(
        tmp_path,
        "comp.json",
        {"schema_version": 1, "experiment": "mesh-compose", "mesh": mesh_dict},
    )
    out = tmp_path / "out"
    assert run(["mesh", "compose", "--config", cfg, "--output-dir", str(out)]) == 0
    u_cli = matrix_from_json_dict(read_json(out / "unitary.json"))
    u_lib = compose(MeshConfig.from_json_dict(mesh_dict))
    assert np.array_equal(u_cli, u_lib)
