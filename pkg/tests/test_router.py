import math

import numpy as np
import pytest

from lnoisim import (
    DimensionError,
    MZIParams,
    PhaseShifterParams,
    PulseProgram,
    SourceModel,
    TimeTrace,
    TimingError,
    TopologyError,
    default_pulse_program,
    demux_input_transmissions,
    estimate_mzi_loss_from_demux,
    simulate_demux,
    switch_metrics,
)

WIDE = PhaseShifterParams(f_3db_ghz=math.inf)


def make_tree(cell=None):
    cell = cell if cell is not None else MZIParams.ideal(WIDE)
    return [cell, cell, cell]


def test_default_program_structure():
    prog = default_pulse_program(n_frames=2, samples_per_slot=8)
    assert set(prog.channels) == {"A", "B"}
    assert prog.routing == {"A": (0,), "B": (1, 2)}
    assert prog.sample_rate_ghz == pytest.approx(8 / 13.8)
    a, b = prog.channels["A"], prog.channels["B"]
    assert set(np.unique(a)) == {0.0, 4.5}
    # A holds for two slots (selects the output pair), B toggles every slot
    slot = lambda w, k: w[k * 8 : (k + 1) * 8]
    for k, want in enumerate([4.5, 4.5, 0.0, 0.0, 4.5, 4.5, 0.0, 0.0]):
        assert np.all(slot(a, k) == want)
    for k, want in enumerate([4.5, 0.0, 4.5, 0.0, 4.5, 0.0, 4.5, 0.0]):
        assert np.all(slot(b, k) == want)


def test_program_validation():
    t = np.linspace(0, 10, 11)
    v = np.zeros(11)
    with pytest.raises(TimingError):
        PulseProgram(np.array([0.0, 1.0, 3.0]), {"A": np.zeros(3)}, {"A": (0, 1, 2)})
    with pytest.raises(DimensionError):
        PulseProgram(t, {"A": np.zeros(5)}, {"A": (0, 1, 2)})
    with pytest.raises(ValueError):
        PulseProgram(t, {"A": v}, {"B": (0, 1, 2)})  # unknown channel
    with pytest.raises(TopologyError):
        PulseProgram(t, {"A": v, "B": v}, {"A": (0, 1), "B": (1, 2)})  # double-driven
    with pytest.raises(TopologyError):
        PulseProgram(t, {"A": v}, {"A": (0, 1)})  # switch 2 undriven


def test_program_json_round_trip(tmp_path):
    prog = default_pulse_program(n_frames=1, samples_per_slot=4)
    path = tmp_path / "prog.json"
    prog.save(path)
    loaded = PulseProgram.load(path)
    assert np.array_equal(loaded.t_ns, prog.t_ns)
    for name in prog.channels:
        assert np.array_equal(loaded.channels[name], prog.channels[name])
    assert loaded.routing == prog.routing


def test_ideal_routing_is_perfect():
    prog = default_pulse_program(n_frames=4)
    trace = simulate_demux(make_tree(), prog, SourceModel(), 4)
    metrics = switch_metrics(trace)
    assert metrics.average_probability == pytest.approx(1.0, abs=1e-12)
    assert metrics.suppression_db == -math.inf
    assert metrics.n_frames == 4
    # probability is conserved at every event
    assert np.allclose(trace.outputs.sum(axis=1), 1.0, atol=1e-12)


def test_slot_to_output_assignment():
    prog = default_pulse_program(n_frames=2)
    trace = simulate_demux(make_tree(), prog, SourceModel(), 2)
    # slot k of every frame lands on output k
    for k in range(8):
        assert trace.outputs[k, k % 4] == pytest.approx(1.0, abs=1e-12)


def test_leaky_cells_give_expected_residual():
    leak = 10 ** (-2.1)
    tree = make_tree(MZIParams.with_bar_leakage(leak, WIDE))
    prog = default_pulse_program(n_frames=3)
    trace = simulate_demux(tree, prog, SourceModel(), 3)
    metrics = switch_metrics(trace)
    assert metrics.average_probability == pytest.approx((1 - leak) ** 2, abs=1e-12)
    assert np.allclose(trace.outputs.sum(axis=1), 1.0, atol=1e-12)  # leak, not loss


def test_uniform_loss_does_not_fake_crosstalk():
    lossless = make_tree(MZIParams.with_bar_leakage(1e-3, WIDE))
    lossy_cell = MZIParams.with_bar_leakage(1e-3, WIDE, insertion_loss_db=0.8)
    lossy = make_tree(lossy_cell)
    prog = default_pulse_program(n_frames=2)
    m0 = switch_metrics(simulate_demux(lossless, prog, SourceModel(), 2))
    m1 = switch_metrics(simulate_demux(lossy, prog, SourceModel(), 2))
    assert m1.average_probability == pytest.approx(m0.average_probability, abs=1e-12)


def test_phase_errors_degrade_routing():
    prog = default_pulse_program(n_frames=2)
    clean = switch_metrics(simulate_demux(make_tree(), prog, SourceModel(), 2))
    perturbed = switch_metrics(
        simulate_demux(
            make_tree(), prog, SourceModel(), 2, phase_errors_rad=(0.05, -0.03, 0.04)
        )
    )
    assert perturbed.average_probability < clean.average_probability
    assert perturbed.average_probability > 0.995  # still small errors


def test_finite_bandwidth_barely_moves_slot_centers():
    # 6.5 GHz settles ~500x faster than the 13.8 ns slot
    prog = default_pulse_program(n_frames=2)
    tree = make_tree(MZIParams.ideal(PhaseShifterParams()))
    metrics = switch_metrics(simulate_demux(tree, prog, SourceModel(), 2))
    assert metrics.average_probability == pytest.approx(1.0, abs=1e-9)


def test_program_must_cover_train():
    prog = default_pulse_program(n_frames=1)
    with pytest.raises(TimingError):
        simulate_demux(make_tree(), prog, SourceModel(), 2)
    with pytest.raises(TimingError):
        simulate_demux(make_tree(), prog, SourceModel(), 1, train_offset_ns=30.0)


def test_simulate_validation():
    prog = default_pulse_program(n_frames=1)
    with pytest.raises(TopologyError):
        simulate_demux(make_tree()[:2], prog, SourceModel(), 1)
    with pytest.raises(DimensionError):
        simulate_demux(make_tree(), prog, SourceModel(), 1, phase_errors_rad=(0.0,))


def test_metrics_validation():
    prog = default_pulse_program(n_frames=1)
    trace = simulate_demux(make_tree(), prog, SourceModel(), 1)
    with pytest.raises(ValueError):
        switch_metrics(trace, {0: 0, 1: 1, 2: 2})  # slot 3 unassigned
    with pytest.raises(ValueError):
        switch_metrics(trace, {0: 0, 1: 1, 2: 2, 3: 9})
    custom = switch_metrics(trace, {0: 1, 1: 0, 2: 3, 3: 2})
    assert custom.average_probability == pytest.approx(0.0, abs=1e-12)


def test_trace_csv_round_trip(tmp_path):
    prog = default_pulse_program(n_frames=2)
    trace = simulate_demux(make_tree(MZIParams.with_bar_leakage(0.01, WIDE)), prog, SourceModel(), 2)
    path = tmp_path / "trace.csv"
    trace.save_csv(path)
    loaded = TimeTrace.load_csv(path, repetition_period_ns=13.8)
    assert np.array_equal(loaded.times_ns, trace.times_ns)
    assert np.array_equal(loaded.outputs, trace.outputs)


def test_synthetic_trace_suppression_value():
    # a flat 0.962 routing probability corresponds to -14.2 dB residual
    times = (np.arange(8) + 0.5) * 13.8
    outputs = np.full((8, 4), (1 - 0.962) / 3)
    for k in range(8):
        outputs[k, k % 4] = 0.962
    trace = TimeTrace(times, outputs, 13.8, 55.2)
    metrics = switch_metrics(trace)
    assert metrics.average_probability == pytest.approx(0.962)
    assert metrics.suppression_db == pytest.approx(10 * math.log10(0.038), abs=1e-9)
    assert metrics.suppression_db == pytest.approx(-14.2, abs=0.05)


def test_input_transmissions_and_loss_recovery():
    for per_cell_db in (0.2, 0.8, 1.2):
        cell = MZIParams.with_bar_leakage(10 ** (-2.1), WIDE, insertion_loss_db=per_cell_db)
        transmissions, external, internal = demux_input_transmissions([cell] * 3)
        est = estimate_mzi_loss_from_demux(transmissions, external, internal)
        assert est == pytest.approx(per_cell_db, abs=1e-9)
    # lossless tree transmits everything from every port
    t0, _, _ = demux_input_transmissions(make_tree())
    assert np.allclose(t0, 1.0, atol=1e-12)
