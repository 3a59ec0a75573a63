"""Layouts, states, projectors, measurement and seeded randomness."""
import numpy as np
import pytest

from src.quantum.statevector import (
    Projector,
    RegisterLayout,
    Rng,
    StateVector,
    embed,
    fidelity,
    haar_state,
    marginal_distribution,
    measure,
    measure_segments,
    segment_values,
    swap_test,
    tensor_power,
)
from src.utils.errors import LayoutMismatchError, MeasurementError, QubitBudgetError

S2 = 1.0 / np.sqrt(2.0)


def test_layout_offsets_and_widths():
    layout = RegisterLayout.of(("a", 2), ("b", 1), ("c", 3))
    assert layout.total_qubits == 6
    assert layout.offset("a") == 0
    assert layout.offset("c") == 3
    assert layout.width("b") == 1
    assert layout.sub(["c", "a"]).names == ("c", "a")
    assert layout.without(["b"]).names == ("a", "c")


def test_layout_rejects_duplicates_and_budget():
    with pytest.raises(LayoutMismatchError):
        RegisterLayout.of(("a", 1), ("a", 2))
    with pytest.raises(QubitBudgetError):
        RegisterLayout.of(("q", 25))


def test_segment_values_msb_first():
    layout = RegisterLayout.of(("a", 2), ("b", 1))
    values = segment_values(layout, ("a",))
    np.testing.assert_array_equal(values, [0, 0, 1, 1, 2, 2, 3, 3])
    swapped = segment_values(layout, ("b", "a"))
    # index 5 = a=2, b=1 -> (1 << 2) | 2
    assert swapped[5] == 6


def test_basis_state_index():
    layout = RegisterLayout.of(("a", 2), ("b", 1))
    state = StateVector.basis(layout, {"a": 2, "b": 1})
    assert state.amps[5] == 1.0
    with pytest.raises(LayoutMismatchError):
        StateVector.basis(layout, {"b": 2})


def test_unnormalized_state_rejected():
    layout = RegisterLayout.of(("q", 1))
    with pytest.raises(ValueError):
        StateVector(layout=layout, amps=[1.0, 1.0])
    state = StateVector.from_amplitudes(layout, [1.0, 1.0], normalize=True)
    np.testing.assert_allclose(state.amps, [S2, S2])


def test_amplitudes_are_read_only():
    state = StateVector.zeros(RegisterLayout.of(("q", 1)))
    with pytest.raises(ValueError):
        state.amps[0] = 0.0


def test_embed_places_segments():
    small = StateVector.basis(RegisterLayout.of(("b", 1)), {"b": 1})
    big = embed(small, RegisterLayout.of(("a", 2), ("b", 1)))
    assert fidelity(big, StateVector.basis(big.layout, {"b": 1})) == pytest.approx(1.0)


def test_tensor_power_layout():
    plus = StateVector.from_amplitudes(RegisterLayout.of(("q", 1)), [1, 1], normalize=True)
    copies = tensor_power(plus, 3, ["c0", "c1", "c2"])
    assert copies.layout.names == ("c0", "c1", "c2")
    np.testing.assert_allclose(np.abs(copies.amps), 2 ** -1.5)


def test_projector_rank_and_complement():
    layout = RegisterLayout.of(("a", 2), ("f", 1))
    proj = Projector.on_value("f", 1)
    assert proj.rank(layout) == 4
    assert proj.complement(layout).accepted == frozenset({0})
    dense = proj.to_dense(layout)
    np.testing.assert_allclose(dense @ dense, dense)


def test_measure_forced_outcome():
    layout = RegisterLayout.of(("f", 1))
    plus = StateVector.from_amplitudes(layout, [1, 1], normalize=True)
    outcome, post, prob = measure(Projector.on_value("f", 1), plus, Rng(0), force=1)
    assert outcome == 1
    assert prob == pytest.approx(0.5)
    np.testing.assert_allclose(post.amps, [0, 1])


def test_measure_zero_branch_raises():
    zero = StateVector.zeros(RegisterLayout.of(("f", 1)))
    with pytest.raises(MeasurementError):
        measure(Projector.on_value("f", 1), zero, Rng(0), force=1)


def test_marginal_and_segment_measurement():
    layout = RegisterLayout.of(("a", 1), ("b", 1))
    bell = StateVector.from_amplitudes(layout, [1, 0, 0, 1], normalize=True)
    np.testing.assert_allclose(marginal_distribution(bell, ["a"]), [0.5, 0.5])
    value, post, prob = measure_segments(bell, ["a"], Rng(3))
    assert prob == pytest.approx(0.5)
    # measuring a collapses b to the same value
    np.testing.assert_allclose(marginal_distribution(post, ["b"])[value], 1.0)


def test_rng_substreams_are_reproducible():
    assert Rng(5).spawn(3).random() == Rng(5).spawn(3).random()
    assert Rng(5).spawn(3).random() != Rng(5).spawn(4).random()
    assert Rng(5).spawn(1).spawn(2).random() == Rng(5, (1, 2)).random()
    with pytest.raises(ValueError):
        Rng(-1)


def test_rng_choice_respects_support():
    rng = Rng(11)
    draws = {rng.choice(np.array([0.0, 0.3, 0.0, 0.7])) for _ in range(200)}
    assert draws <= {1, 3}


def test_haar_state_normalized_and_seeded():
    a = haar_state(3, Rng(1))
    b = haar_state(3, Rng(1))
    assert np.linalg.norm(a.amps) == pytest.approx(1.0)
    assert fidelity(a, b) == pytest.approx(1.0)


def test_swap_test_probability():
    layout = RegisterLayout.of(("q", 1))
    zero = StateVector.basis(layout, {"q": 0})
    one = StateVector.basis(layout, {"q": 1})
    assert swap_test(zero, one, Rng(0))[1] == pytest.approx(0.5)
    assert swap_test(zero, zero, Rng(0)) == (1, pytest.approx(1.0))


def test_haar_first_moment():
    n = 3
    overlaps = [abs(haar_state(n, Rng(11).spawn(i)).amps[0]) ** 2 for i in range(2000)]
    assert np.mean(overlaps) == pytest.approx(2 ** -n, abs=0.01)


def test_swap_test_acceptance_frequency():
    layout = RegisterLayout.of(("q", 1))
    zero = StateVector.basis(layout, {"q": 0})
    plus = StateVector(layout=layout, amps=[S2, S2])
    rng = Rng(3)
    accepts = sum(swap_test(zero, plus, rng)[0] for _ in range(10_000))
    assert accepts / 10_000 == pytest.approx(0.75, abs=0.02)


def test_as_register_joins_segments():
    layout = RegisterLayout.of(("x", 2), ("y", 1))
    state = StateVector.basis(layout, {"x": 2, "y": 1})
    joined = state.as_register()
    assert joined.layout.segments == (("q", 3),)
    np.testing.assert_array_equal(joined.amps, state.amps)
    with pytest.raises(LayoutMismatchError):
        state.relabel(RegisterLayout.of(("q", 3)))
