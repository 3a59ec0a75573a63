"""Classical functions, PRF families, XOR oracles and keyed unitary families."""
import numpy as np
import pytest
from scipy.linalg import block_diag

from src.quantum.operators import ComposedOp, apply, unitarity_error
from src.quantum.oracles import (
    ClassicalFunction,
    PrfFamily,
    controlled_keyed_adjoint,
    haar_family,
    lift_to_oracle,
    sample_random_function,
    tagged_prf,
    toy_prf,
    unitary_family,
)
from src.quantum.statevector import RegisterLayout, Rng, StateVector, fidelity, tensor_power
from src.utils.errors import DomainTooLargeError, NonUnitaryError
from src.utils.stats import chi_square_uniform


def test_classical_function_validates_table():
    f = ClassicalFunction(in_bits=1, out_bits=2, table=[3, 0])
    assert f(0) == 3
    assert f.range_set() == frozenset({0, 3})
    with pytest.raises(ValueError):
        ClassicalFunction(in_bits=1, out_bits=2, table=[4, 0])
    with pytest.raises(ValueError):
        ClassicalFunction(in_bits=2, out_bits=2, table=[0, 1])


def test_hex_rows_format():
    f = ClassicalFunction(in_bits=2, out_bits=5, table=[0, 17, 31, 2])
    text = f.to_hex_rows()
    assert text.splitlines() == ["2 5", "00", "11", "1f", "02"]
    assert ClassicalFunction.from_hex_rows(text).same_as(f)


def test_with_values_reprograms_copy():
    f = ClassicalFunction(in_bits=1, out_bits=1, table=[0, 0])
    g = f.with_values({1: 1})
    assert f(1) == 0 and g(1) == 1


def test_random_function_domain_limit():
    with pytest.raises(DomainTooLargeError):
        sample_random_function(21, 1, Rng(0))
    f = sample_random_function(4, 3, Rng(0))
    assert f.table.shape == (16,)
    assert sample_random_function(4, 3, Rng(0)).same_as(f)


def test_toy_prf_is_deterministic_per_seed():
    a = toy_prf(3, master_seed=7)
    b = toy_prf(3, master_seed=7)
    assert a.out_bits == 9
    assert a.function(2).same_as(b.function(2))
    assert not toy_prf(3, master_seed=8).function(2).same_as(a.function(2))
    with pytest.raises(DomainTooLargeError):
        toy_prf(7)


def test_tagged_prf_ranges_are_disjoint():
    prf = tagged_prf(2)
    ranges = [prf.function(k).range_set() for k in range(prf.num_keys)]
    for i in range(4):
        for j in range(i + 1, 4):
            assert not ranges[i] & ranges[j]


def test_prf_family_key_range():
    prf = PrfFamily.from_tables(1, 1, [[0, 1], [1, 0]])
    assert prf.eval(1, 0) == 1
    with pytest.raises(ValueError):
        prf.function(2)


def test_lift_to_oracle_xors_output():
    f = ClassicalFunction(in_bits=1, out_bits=2, table=[3, 0])
    oracle = lift_to_oracle(f)
    out = apply(oracle, StateVector.basis(oracle.space, {"x": 0, "y": 1}))
    assert fidelity(out, StateVector.basis(oracle.space, {"x": 0, "y": 2})) == pytest.approx(1.0)
    dense = oracle.to_dense()
    np.testing.assert_allclose(dense @ dense, np.eye(8))


def test_haar_family_members_are_cached_and_seeded():
    family = haar_family(2, 2, master_seed=0)
    assert family.unitary(1) is family.unitary(1)
    again = haar_family(2, 2, master_seed=0)
    np.testing.assert_allclose(family.unitary(3), again.unitary(3))
    assert np.linalg.norm(family.state(1).amps) == pytest.approx(1.0)


def test_unitary_family_rejects_non_unitary_member():
    family = unitary_family([np.eye(2), np.array([[1.0, 1.0], [0.0, 1.0]])])
    family.unitary(0)
    with pytest.raises(NonUnitaryError):
        family.unitary(1)


@pytest.mark.parametrize("key", [0, 1])
def test_controlled_keyed_adjoint_uncomputes_copies(key):
    family = haar_family(1, 1, master_seed=3)
    op = controlled_keyed_adjoint(family, 2)
    copies = tensor_power(family.state(key), 2, ["prs0", "prs1"])
    state = copies.tensor(StateVector.basis(RegisterLayout.of(("sk", 1)), {"sk": key}))
    out = apply(op, state)
    assert fidelity(out, StateVector.basis(state.layout, {"sk": key})) == pytest.approx(1.0)


def test_random_function_values_are_uniform():
    f = sample_random_function(10, 3, Rng(21))
    _, _, uniform = chi_square_uniform(np.bincount(f.table, minlength=8))
    assert uniform


def test_controlled_keyed_adjoint_dense_form():
    family = haar_family(1, 2, master_seed=8)
    dense = controlled_keyed_adjoint(family, 1).to_dense()
    assert unitarity_error(dense) <= 1e-10
    expected = block_diag(family.unitary(0).conj().T, family.unitary(1).conj().T)
    np.testing.assert_allclose(dense, expected, atol=1e-12)


def test_single_key_adjoint_has_no_key_register():
    u = haar_family(0, 1, master_seed=2).unitary(0)
    family = unitary_family([u])
    op = controlled_keyed_adjoint(family, 2)
    assert isinstance(op, ComposedOp)
    assert op.space.names == ("prs0", "prs1")
    out = apply(op, tensor_power(family.state(0), 2, ["prs0", "prs1"]))
    assert fidelity(out, StateVector.basis(out.layout)) == pytest.approx(1.0)
