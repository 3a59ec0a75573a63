"""
Amplifier instances: a unitary U on H ⊗ ancilla, the success projector Π1 on
a flag qubit, and optionally an orthonormal probe set spanning the part of H
the experiment cares about. The ancilla always starts in |0⟩.
"""

from typing import Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from src.quantum.operators import ComposedOp, ControlledOp, DenseOp, UnitaryOp, apply, haar_unitary
from src.quantum.statevector import Projector, RegisterLayout, Rng, StateVector, embed
from src.utils.errors import LayoutMismatchError, MeasurementError


class AmplifierInstance(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    unitary: UnitaryOp
    layout: RegisterLayout
    system: Tuple[str, ...]
    ancilla: Tuple[str, ...]
    flag: Projector
    probe: Optional[np.ndarray] = None
    name: str = "instance"

    @model_validator(mode="after")
    def _check_instance(self) -> "AmplifierInstance":
        if set(self.system) & set(self.ancilla):
            raise LayoutMismatchError("System and ancilla segments overlap")
        if set(self.system) | set(self.ancilla) != set(self.layout.names):
            raise LayoutMismatchError(f"System and ancilla must cover the layout {self.layout.names}")
        if not self.layout.contains(self.unitary.space):
            raise LayoutMismatchError(f"Unitary acts outside the layout: {self.unitary.space.names}")
        if not set(self.flag.targets) <= set(self.ancilla):
            raise LayoutMismatchError("The flag must live on the ancilla")
        if self.probe is not None and self.probe.shape[0] != self.system_layout.dim:
            raise LayoutMismatchError("Probe vectors must live in H")
        return self

    @property
    def system_layout(self) -> RegisterLayout:
        return self.layout.sub(self.system)

    @property
    def ancilla_layout(self) -> RegisterLayout:
        return self.layout.sub(self.ancilla)

    @property
    def ancilla_zero(self) -> Projector:
        return Projector.all_zero(self.ancilla)

    def prepare(self, state: StateVector) -> StateVector:
        """state ⊗ |0⟩_ancilla on the full layout."""
        if state.layout != self.system_layout:
            raise LayoutMismatchError(f"Input layout {state.layout.names} is not H = {self.system}")
        return embed(state, self.layout)

    def success_target(self, state: StateVector) -> Optional[StateVector]:
        """Normalized Π1 U (state ⊗ |0⟩), or None when that branch vanishes."""
        evolved = apply(self.unitary, self.prepare(state))
        branch = self.flag.apply(evolved)
        norm = float(np.linalg.norm(branch))
        if norm < 1e-12:
            return None
        return StateVector(layout=self.layout, amps=branch / norm)

    def target_state(self, state: StateVector) -> StateVector:
        target = self.success_target(state)
        if target is None:
            raise MeasurementError("The input has no success component")
        return target

    def probe_state(self, index: int) -> StateVector:
        if self.probe is None:
            raise LayoutMismatchError(f"Instance '{self.name}' has no probe set")
        return StateVector.from_amplitudes(self.system_layout, self.probe[:, index], normalize=True)


def _flag_layout(anc_qubits: int) -> RegisterLayout:
    segments = [("flag", 1)]
    if anc_qubits > 1:
        segments.append(("work", anc_qubits - 1))
    return RegisterLayout.of(*segments)


def random_instance(h_qubits: int, anc_qubits: int, rng: Rng) -> AmplifierInstance:
    """Haar-random U on h_qubits of H plus anc_qubits of ancilla (flag first)."""
    layout = RegisterLayout.of(("sys", h_qubits)).concat(_flag_layout(anc_qubits))
    u = DenseOp(layout, haar_unitary(layout.total_qubits, rng).matrix, check=False)
    return AmplifierInstance(
        unitary=u,
        layout=layout,
        system=("sys",),
        ancilla=tuple(n for n in layout.names if n != "sys"),
        flag=Projector.on_value("flag", 1),
        name=f"haar(h={h_qubits}, anc={anc_qubits})",
    )


def _rotation(p: float) -> np.ndarray:
    c, s = np.sqrt(1.0 - p), np.sqrt(p)
    return np.array([[c, -s], [s, c]], dtype=np.complex128)


def spectrum_instance(probabilities: Sequence[float], rng: Optional[Rng] = None) -> AmplifierInstance:
    """
    Instance whose success operator is P = W diag(p) W† exactly.

    U = (W ⊗ I) R (W† ⊗ I) where R rotates the flag by sin²θ_j = p_j on basis
    state |j⟩ of H. W is Haar-random when `rng` is given, identity otherwise;
    the probe set is W's columns, i.e. the eigenvectors of P.
    """
    probs = np.asarray(probabilities, dtype=float)
    h_qubits = int(np.log2(probs.size))
    if 2 ** h_qubits != probs.size:
        raise ValueError("Number of eigenvalues must be a power of two")
    if np.any(probs < 0.0) or np.any(probs > 1.0):
        raise ValueError("Eigenvalues must lie in [0, 1]")
    sys = RegisterLayout.of(("sys", h_qubits))
    flag = RegisterLayout.of(("flag", 1))
    rotations = ControlledOp(sys, {j: DenseOp(flag, _rotation(p), check=False) for j, p in enumerate(probs)})
    if rng is None:
        w = np.eye(sys.dim, dtype=np.complex128)
        unitary: UnitaryOp = rotations
    else:
        w = haar_unitary(h_qubits, rng, name="sys").matrix
        basis = DenseOp(sys, w, check=False)
        unitary = ComposedOp([basis.adjoint(), rotations, basis])
    return AmplifierInstance(
        unitary=unitary,
        layout=sys.concat(flag),
        system=("sys",),
        ancilla=("flag",),
        flag=Projector.on_value("flag", 1),
        probe=w,
        name=f"spectrum({', '.join(f'{p:.4g}' for p in probs)})",
    )


def spread_instance(h_qubits: int, q: float, eps: float, rng: Rng) -> AmplifierInstance:
    """Eigenvalues spread evenly over [q − ε, q + ε] in a Haar-random eigenbasis."""
    dim = 2 ** h_qubits
    offsets = np.linspace(-1.0, 1.0, dim) if dim > 1 else np.zeros(1)
    return spectrum_instance(np.clip(q + eps * offsets, 0.0, 1.0), rng)
