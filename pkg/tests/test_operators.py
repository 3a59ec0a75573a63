"""Structured unitaries acting on register layouts."""
import numpy as np
import pytest

from src.quantum.operators import (
    HADAMARD,
    ComposedOp,
    ControlledOp,
    DenseOp,
    HadamardLayer,
    IdentityOp,
    PermutationOp,
    all_zero_flip,
    apply,
    haar_unitary,
    swap_test_circuit,
    unitarity_error,
    xor_constant,
)
from src.quantum.statevector import RegisterLayout, Rng, StateVector, fidelity, haar_state
from src.utils.errors import LayoutMismatchError, NonUnitaryError, QubitBudgetError


def test_hadamard_layer_matches_kron():
    layout = RegisterLayout.of(("a", 1), ("b", 1))
    dense = HadamardLayer(layout).to_dense()
    np.testing.assert_allclose(dense, np.kron(HADAMARD, HADAMARD), atol=1e-12)


def test_hadamard_on_one_segment_of_many():
    layout = RegisterLayout.of(("a", 1), ("b", 2))
    out = apply(HadamardLayer(layout.sub(["b"])), StateVector.zeros(layout))
    expected = np.zeros(8)
    expected[:4] = 0.5
    np.testing.assert_allclose(out.amps, expected, atol=1e-12)


def test_dense_op_checks_unitarity():
    with pytest.raises(NonUnitaryError):
        DenseOp(RegisterLayout.of(("q", 1)), np.array([[1.0, 1.0], [0.0, 1.0]]))
    with pytest.raises(LayoutMismatchError):
        DenseOp(RegisterLayout.of(("q", 2)), np.eye(2))


def test_permutation_op_rejects_non_permutation():
    with pytest.raises(NonUnitaryError):
        PermutationOp(RegisterLayout.of(("q", 1)), np.array([0, 0]))


def test_xor_constant_inside_larger_layout():
    layout = RegisterLayout.of(("a", 1), ("b", 1))
    out = apply(xor_constant(layout.sub(["b"]), 1), StateVector.basis(layout, {"a": 1}))
    assert fidelity(out, StateVector.basis(layout, {"a": 1, "b": 1})) == pytest.approx(1.0)


def test_controlled_op_is_cnot():
    control = RegisterLayout.of(("c", 1))
    target = RegisterLayout.of(("t", 1))
    cnot = ControlledOp(control, {1: xor_constant(target, 1)})
    expected = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]])
    np.testing.assert_allclose(cnot.to_dense(), expected)


def test_controlled_op_cannot_target_control():
    control = RegisterLayout.of(("c", 1))
    with pytest.raises(LayoutMismatchError):
        ControlledOp(control, {1: xor_constant(control, 1)})


def test_composed_adjoint_is_inverse():
    layout = RegisterLayout.of(("a", 1), ("b", 2))
    u = ComposedOp([
        HadamardLayer(layout.sub(["a"])),
        haar_unitary(2, Rng(4), name="b"),
        ControlledOp(layout.sub(["a"]), {1: xor_constant(layout.sub(["b"]), 3)}),
    ])
    product = u.then(u.adjoint()).to_dense(layout)
    np.testing.assert_allclose(product, np.eye(8), atol=1e-10)


def test_composed_applies_first_op_first():
    layout = RegisterLayout.of(("q", 1))
    # X then H on |0> gives |->; H then X gives |+>
    minus = apply(ComposedOp([xor_constant(layout, 1), HadamardLayer(layout)]), StateVector.zeros(layout))
    np.testing.assert_allclose(minus.amps, [2 ** -0.5, -(2 ** -0.5)], atol=1e-12)


def test_all_zero_flip():
    controls = RegisterLayout.of(("c", 2))
    op = all_zero_flip(controls, "f")
    layout = op.space
    hit = apply(op, StateVector.basis(layout, {"c": 0}))
    miss = apply(op, StateVector.basis(layout, {"c": 2}))
    assert fidelity(hit, StateVector.basis(layout, {"c": 0, "f": 1})) == pytest.approx(1.0)
    assert fidelity(miss, StateVector.basis(layout, {"c": 2})) == pytest.approx(1.0)


def test_haar_unitary_is_unitary():
    assert unitarity_error(haar_unitary(3, Rng(9)).matrix) < 1e-10


def test_apply_checks_layout():
    op = xor_constant(RegisterLayout.of(("missing", 1)), 1)
    with pytest.raises(LayoutMismatchError):
        apply(op, StateVector.zeros(RegisterLayout.of(("q", 1))))


def test_dense_materialization_budget():
    with pytest.raises(QubitBudgetError):
        IdentityOp(RegisterLayout.of(("q", 13))).to_dense()


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_swap_test_circuit_matches_formula(seed):
    a = haar_state(2, Rng(seed).spawn(0))
    b = haar_state(2, Rng(seed).spawn(1))
    assert swap_test_circuit(a, b) == pytest.approx(0.5 * (1.0 + fidelity(a, b)), abs=1e-10)
