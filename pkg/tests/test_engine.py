"""Alternating-measurement rewinding loop and its statistics."""
import numpy as np
import pytest

from src.quantum.statevector import Rng
from src.rewinding.amplifier import spectrum_instance, spread_instance
from src.rewinding.engine import (
    check_spread,
    epsilon_sweep,
    expected_iterations,
    halting_profile,
    rewind_statistics,
    rewind_until_success,
    uniform_probe_superposition,
)
from src.utils.errors import SpreadPreconditionError


@pytest.mark.parametrize("p,expected", [(0.5, 2.0), (0.25, 3.0), (0.125, 5.0), (1.0, 1.0)])
def test_expected_iterations(p, expected):
    assert expected_iterations(p) == pytest.approx(expected)


def test_certain_success_halts_immediately():
    inst = spectrum_instance([1.0, 0.3], Rng(0))
    transcript = rewind_until_success(inst, inst.probe_state(0), 10, Rng(1))
    assert transcript.halted
    assert transcript.iterations == 1
    assert transcript.restore_history == []
    assert transcript.target_fidelity == pytest.approx(1.0)


def test_unhalted_run_reports_budget():
    inst = spectrum_instance([1e-8, 0.5])
    transcript = rewind_until_success(inst, inst.probe_state(0), 3, Rng(2))
    assert not transcript.halted
    assert transcript.iterations == 3
    assert transcript.outcome_history == [0, 0, 0]
    assert len(transcript.restore_history) == 2


def test_invalid_max_iter():
    inst = spectrum_instance([0.5, 0.5])
    with pytest.raises(ValueError):
        rewind_until_success(inst, inst.probe_state(0), 0, Rng(0))


def test_eigenvector_inputs_reach_target_exactly():
    inst = spread_instance(1, 0.25, 0.0, Rng(0).spawn(0))
    inputs = [inst.probe_state(j) for j in range(2)]
    result = rewind_statistics(inst, inputs, 0.0, 0.25, 1500, Rng(0).spawn(1), max_iter=500)
    assert result["halted_rate"] == 1.0
    assert result["fidelity_min"] >= 1 - 1e-9
    assert result["expected_iters"] == pytest.approx(3.0)
    assert result["naive_expected_iters"] == pytest.approx(4.0)
    assert abs(result["mean_iters"] - 3.0) <= 0.3
    assert all("outcome_history" not in row for row in result["rows"])


def test_spread_precondition():
    inst = spread_instance(1, 0.25, 0.1, Rng(1))
    spectrum = check_spread(inst, 0.25, 0.1)
    np.testing.assert_allclose(sorted(spectrum), [0.15, 0.35], atol=1e-10)
    with pytest.raises(SpreadPreconditionError):
        check_spread(inst, 0.25, 0.01)


def test_superposition_fidelity_improves_as_spread_shrinks():
    q = 0.3
    sweep = epsilon_sweep(lambda eps: spread_instance(2, q, eps, Rng(4)), q, [0.1, 0.01, 0.001], 60, Rng(5), 500)
    losses = [point["mean_one_minus_fidelity"] for point in sweep]
    assert losses[0] >= losses[1] >= losses[2]
    assert sweep[-1]["fidelity_median"] >= 1 - 10 * 0.001


def test_uniform_probe_superposition_is_normalized():
    inst = spread_instance(2, 0.3, 0.05, Rng(1))
    state = uniform_probe_superposition(inst)
    assert np.linalg.norm(state.amps) == pytest.approx(1.0)
    assert state.layout == inst.system_layout


def test_halting_profile_geometric_tail():
    rng = np.random.default_rng(0)
    iterations = rng.geometric(0.4, size=5000)
    profile = halting_profile(iterations, 10)
    assert profile["fitted_rate"] == pytest.approx(0.4, abs=0.05)
    assert profile["tail"][0] == pytest.approx(0.6, abs=0.03)
    assert halting_profile([1, 1, 1], 5)["fitted_rate"] == 1.0


def test_input_without_success_component_runs_out():
    inst = spectrum_instance([0.0, 0.5])
    transcript = rewind_until_success(inst, inst.probe_state(0), 5, Rng(0))
    assert not transcript.halted
    assert transcript.iterations == 5
    assert transcript.outcome_history == [0] * 5
    assert transcript.target_fidelity == 0.0


@pytest.mark.parametrize("q,horizon", [(0.5, 6), (0.125, 12)])
def test_mean_iterations_and_halting_rate(q, horizon):
    inst = spread_instance(1, q, 0.0, Rng(6).spawn(0))
    inputs = [inst.probe_state(j) for j in range(2)]
    result = rewind_statistics(inst, inputs, 0.0, q, 2000, Rng(6).spawn(1), max_iter=1000)
    assert result["halted_rate"] == 1.0
    assert abs(result["mean_iters"] - expected_iterations(q)) <= 0.1 * expected_iterations(q)
    profile = halting_profile([row["iterations"] for row in result["rows"]], horizon)
    assert profile["fitted_rate"] >= q / 2
    assert profile["fitted_rate"] == pytest.approx(2 * q * (1 - q), abs=0.1)
