"""
Unitary operators over register layouts.

Operators name the segments they act on and are applied by index arithmetic
on the segment-shaped amplitude tensor, so structured operators (XOR oracles,
key-controlled blocks, Hadamard layers) never materialize 2^n x 2^n matrices.
`act` works on a block of column vectors, which is also how operators are
materialized densely for small layouts.
"""

from abc import ABC, abstractmethod
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from config import config as settings
from src.quantum.statevector import RegisterLayout, Rng, StateVector
from src.utils.errors import LayoutMismatchError, NonUnitaryError, QubitBudgetError

HADAMARD = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=np.complex128) / np.sqrt(2.0)


def unitarity_error(matrix: np.ndarray) -> float:
    """max |U†U − I|."""
    dim = matrix.shape[0]
    return float(np.max(np.abs(matrix.conj().T @ matrix - np.eye(dim))))


class UnitaryOp(ABC):
    """A unitary acting on the named segments in `space`."""

    def __init__(self, space: RegisterLayout):
        self.space = space

    @property
    def targets(self) -> Tuple[str, ...]:
        return self.space.names

    @abstractmethod
    def act(self, layout: RegisterLayout, block: np.ndarray) -> np.ndarray:
        """Apply to every column of `block` (shape (layout.dim, B))."""

    @abstractmethod
    def adjoint(self) -> "UnitaryOp":
        """U†."""

    def check_layout(self, layout: RegisterLayout) -> None:
        if not layout.contains(self.space):
            raise LayoutMismatchError(
                f"Operator targets {self.space.segments} not all present in layout {layout.segments}"
            )

    def to_dense(self, layout: Optional[RegisterLayout] = None) -> np.ndarray:
        """Full matrix on `layout` (defaults to the operator's own space)."""
        layout = layout or self.space
        if layout.total_qubits > settings.DENSE_MAX_QUBITS:
            raise QubitBudgetError(
                f"Dense materialization limited to {settings.DENSE_MAX_QUBITS} qubits, layout has {layout.total_qubits}"
            )
        self.check_layout(layout)
        return self.act(layout, np.eye(layout.dim, dtype=np.complex128))

    def then(self, other: "UnitaryOp") -> "ComposedOp":
        """self followed by other."""
        return ComposedOp([self, other])


def _to_front(layout: RegisterLayout, block: np.ndarray, names: Sequence[str]):
    tensor = block.reshape(layout.dims + (-1,))
    axes = [layout.index_of(name) for name in names]
    moved = np.moveaxis(tensor, axes, list(range(len(axes))))
    front = moved.shape[:len(axes)]
    return moved.reshape(int(np.prod(front)), -1), moved.shape, axes


def _from_front(flat: np.ndarray, shape, axes, layout: RegisterLayout) -> np.ndarray:
    moved = flat.reshape(shape)
    return np.moveaxis(moved, list(range(len(axes))), axes).reshape(layout.dim, -1)


class DenseOp(UnitaryOp):
    """Explicit matrix on the concatenation of its target segments."""

    def __init__(self, space: RegisterLayout, matrix: np.ndarray, check: bool = True):
        super().__init__(space)
        matrix = np.asarray(matrix, dtype=np.complex128)
        if matrix.shape != (space.dim, space.dim):
            raise LayoutMismatchError(f"Matrix shape {matrix.shape} does not match {space.dim}-dim space")
        if check:
            err = unitarity_error(matrix)
            if err > settings.TOLERANCES["unitarity"]:
                raise NonUnitaryError(f"Operator on {space.names} is not unitary (error {err:.2e})")
        self.matrix = matrix

    def act(self, layout, block):
        flat, shape, axes = _to_front(layout, block, self.targets)
        return _from_front(self.matrix @ flat, shape, axes, layout)

    def adjoint(self):
        return DenseOp(self.space, self.matrix.conj().T, check=False)


class PermutationOp(UnitaryOp):
    """Basis permutation: local basis state i ↦ table[i]."""

    def __init__(self, space: RegisterLayout, table: np.ndarray):
        super().__init__(space)
        table = np.asarray(table, dtype=np.int64)
        if table.shape != (space.dim,) or not np.array_equal(np.sort(table), np.arange(space.dim)):
            raise NonUnitaryError(f"Table on {space.names} is not a permutation")
        self.table = table

    def act(self, layout, block):
        flat, shape, axes = _to_front(layout, block, self.targets)
        out = np.empty_like(flat)
        out[self.table] = flat
        return _from_front(out, shape, axes, layout)

    def adjoint(self):
        return PermutationOp(self.space, np.argsort(self.table))


class HadamardLayer(UnitaryOp):
    """H on every qubit of the target segments."""

    def act(self, layout, block):
        n = layout.total_qubits
        tensor = block.reshape((2,) * n + (-1,))
        for name in self.targets:
            start = layout.offset(name)
            for axis in range(start, start + layout.width(name)):
                tensor = np.moveaxis(np.tensordot(HADAMARD, tensor, axes=([1], [axis])), 0, axis)
        return tensor.reshape(layout.dim, -1)

    def adjoint(self):
        return self


class IdentityOp(UnitaryOp):
    def act(self, layout, block):
        return block.copy()

    def adjoint(self):
        return self


class ControlledOp(UnitaryOp):
    """
    Block-diagonal in the control segment: control value k applies
    `branches[k]` to the remaining segments, identity for unlisted values.
    """

    def __init__(self, control: RegisterLayout, branches: Mapping[int, UnitaryOp]):
        if len(control.segments) != 1:
            raise LayoutMismatchError("ControlledOp takes exactly one control segment")
        segments: List[Tuple[str, int]] = list(control.segments)
        for op in branches.values():
            for seg in op.space.segments:
                if seg[0] == control.names[0]:
                    raise LayoutMismatchError("Branch operators may not act on the control segment")
                if seg not in segments:
                    segments.append(seg)
        super().__init__(RegisterLayout.of(*segments))
        self.control = control
        self.branches: Dict[int, UnitaryOp] = {int(k): op for k, op in branches.items()}
        for key in self.branches:
            if not 0 <= key < control.dim:
                raise LayoutMismatchError(f"Control value {key} out of range for {control.segments}")

    def act(self, layout, block):
        name = self.control.names[0]
        axis = layout.index_of(name)
        tensor = np.moveaxis(block.reshape(layout.dims + (-1,)), axis, 0)
        out = tensor.copy()
        sub_layout = layout.without([name])
        for key, op in self.branches.items():
            piece = tensor[key].reshape(sub_layout.dim, -1)
            out[key] = op.act(sub_layout, piece).reshape(tensor[key].shape)
        return np.moveaxis(out, 0, axis).reshape(layout.dim, -1)

    def adjoint(self):
        return ControlledOp(self.control, {k: op.adjoint() for k, op in self.branches.items()})


class ComposedOp(UnitaryOp):
    """Sequential composition; `ops[0]` is applied first."""

    def __init__(self, ops: Sequence[UnitaryOp]):
        flat: List[UnitaryOp] = []
        for op in ops:
            flat.extend(op.ops if isinstance(op, ComposedOp) else [op])
        segments: List[Tuple[str, int]] = []
        for op in flat:
            for seg in op.space.segments:
                if seg not in segments:
                    segments.append(seg)
        super().__init__(RegisterLayout.of(*segments))
        self.ops = flat

    def act(self, layout, block):
        for op in self.ops:
            block = op.act(layout, block)
        return block

    def adjoint(self):
        return ComposedOp([op.adjoint() for op in reversed(self.ops)])


def apply(u: UnitaryOp, s: StateVector) -> StateVector:
    """u·s on the state's layout."""
    u.check_layout(s.layout)
    out = u.act(s.layout, s.amps.reshape(-1, 1))[:, 0]
    return StateVector(layout=s.layout, amps=out)


def apply_raw(u: UnitaryOp, layout: RegisterLayout, amps: np.ndarray) -> np.ndarray:
    """u applied to an unnormalized amplitude vector."""
    u.check_layout(layout)
    return u.act(layout, np.asarray(amps, dtype=np.complex128).reshape(-1, 1))[:, 0]


def xor_constant(space: RegisterLayout, value: int) -> PermutationOp:
    """|v⟩ ↦ |v ⊕ value⟩ on the concatenated segments."""
    return PermutationOp(space, np.arange(space.dim, dtype=np.int64) ^ int(value))


def all_zero_flip(controls: RegisterLayout, flag: str) -> PermutationOp:
    """Flip the one-qubit `flag` iff every control segment is all-zero."""
    space = controls.concat(RegisterLayout.of((flag, 1)))
    table = np.arange(space.dim, dtype=np.int64)
    table[0], table[1] = 1, 0
    return PermutationOp(space, table)


def haar_unitary(n: int, rng: Rng, name: str = "q") -> DenseOp:
    """Haar-random unitary: QR of a Ginibre matrix with phase-corrected diagonal."""
    if n > settings.DENSE_MAX_QUBITS:
        raise QubitBudgetError(f"Dense Haar unitary limited to {settings.DENSE_MAX_QUBITS} qubits")
    dim = 2 ** n
    ginibre = (rng.normal((dim, dim)) + 1j * rng.normal((dim, dim))) / np.sqrt(2.0)
    q, r = np.linalg.qr(ginibre)
    diag = np.diagonal(r)
    q = q * (diag / np.abs(diag))
    return DenseOp(RegisterLayout.of((name, n)), q)


def controlled_swap(control: str, left: RegisterLayout, right: RegisterLayout) -> PermutationOp:
    """Swap two equally shaped registers when the one-qubit `control` is 1."""
    if tuple(w for _, w in left.segments) != tuple(w for _, w in right.segments):
        raise LayoutMismatchError("Swapped registers must have identical shapes")
    width = left.total_qubits
    space = RegisterLayout.of((control, 1)).concat(left).concat(right)
    idx = np.arange(space.dim, dtype=np.int64)
    c = idx >> (2 * width)
    a = (idx >> width) & ((1 << width) - 1)
    b = idx & ((1 << width) - 1)
    swapped = (c << (2 * width)) | (b << width) | a
    return PermutationOp(space, np.where(c == 1, swapped, idx))


def swap_test_circuit(a: StateVector, b: StateVector) -> float:
    """
    Exact accept probability of the ancilla–H–CSWAP–H circuit.

    Registers of `a` and `b` are relabelled "a.<name>" / "b.<name>".
    """
    if a.layout != b.layout:
        raise LayoutMismatchError(f"Layouts differ: {a.layout.names} vs {b.layout.names}")
    left = RegisterLayout.of(*[(f"a.{name}", w) for name, w in a.layout.segments])
    right = RegisterLayout.of(*[(f"b.{name}", w) for name, w in b.layout.segments])
    ancilla = StateVector.zeros(RegisterLayout.of(("swap_anc", 1)))
    state = ancilla.tensor(a.relabel(left)).tensor(b.relabel(right))
    circuit = ComposedOp([
        HadamardLayer(RegisterLayout.of(("swap_anc", 1))),
        controlled_swap("swap_anc", left, right),
        HadamardLayer(RegisterLayout.of(("swap_anc", 1))),
    ])
    out = apply(circuit, state)
    anc_zero = (np.arange(out.layout.dim) >> (left.total_qubits + right.total_qubits)) == 0
    return float(np.sum(np.abs(out.amps[anc_zero]) ** 2))
