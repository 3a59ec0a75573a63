"""
Dense statevector primitives.

Register layouts, immutable state vectors, computational-basis projectors,
projective measurement, exact marginals, Haar-random states, fidelity and the
SWAP test. Qubit 0 is the most significant bit of the amplitude index, and
segments are laid out in the order the layout lists them.
"""

from functools import lru_cache
from typing import Dict, FrozenSet, Iterable, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from config import config as settings
from src.utils.errors import LayoutMismatchError, MeasurementError, QubitBudgetError


class RegisterLayout(BaseModel):
    """
    Ordered list of named qubit segments.

    The layout fixes how a flat amplitude index splits into segment values:
    the first segment occupies the most significant bits.
    """
    model_config = ConfigDict(frozen=True)

    segments: Tuple[Tuple[str, int], ...]

    @model_validator(mode="after")
    def _check_segments(self) -> "RegisterLayout":
        names = [name for name, _ in self.segments]
        if len(set(names)) != len(names):
            raise LayoutMismatchError(f"Duplicate segment names in layout: {names}")
        if any(width < 1 for _, width in self.segments):
            raise LayoutMismatchError(f"Segment widths must be positive: {self.segments}")
        if self.total_qubits > settings.MAX_QUBITS:
            raise QubitBudgetError(
                f"Layout needs {self.total_qubits} qubits, budget is {settings.MAX_QUBITS}"
            )
        return self

    @classmethod
    def of(cls, *segments: Tuple[str, int]) -> "RegisterLayout":
        return cls(segments=tuple((str(name), int(width)) for name, width in segments))

    @property
    def total_qubits(self) -> int:
        return sum(width for _, width in self.segments)

    @property
    def names(self) -> Tuple[str, ...]:
        return tuple(name for name, _ in self.segments)

    @property
    def dims(self) -> Tuple[int, ...]:
        return tuple(2 ** width for _, width in self.segments)

    @property
    def dim(self) -> int:
        return 2 ** self.total_qubits

    def has(self, name: str) -> bool:
        return name in self.names

    def index_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise LayoutMismatchError(f"Segment '{name}' not in layout {self.names}") from None

    def width(self, name: str) -> int:
        return self.segments[self.index_of(name)][1]

    def offset(self, name: str) -> int:
        """Qubit offset of a segment, counted from the most significant qubit."""
        idx = self.index_of(name)
        return sum(width for _, width in self.segments[:idx])

    def sub(self, names: Sequence[str]) -> "RegisterLayout":
        return RegisterLayout.of(*[(name, self.width(name)) for name in names])

    def without(self, names: Iterable[str]) -> "RegisterLayout":
        dropped = set(names)
        return RegisterLayout.of(*[seg for seg in self.segments if seg[0] not in dropped])

    def concat(self, other: "RegisterLayout") -> "RegisterLayout":
        return RegisterLayout.of(*(self.segments + other.segments))

    def contains(self, other: "RegisterLayout") -> bool:
        """True when every segment of `other` appears here with the same width."""
        return all(self.has(name) and self.width(name) == width for name, width in other.segments)


@lru_cache(maxsize=256)
def segment_values(layout: RegisterLayout, names: Tuple[str, ...]) -> np.ndarray:
    """Concatenated value of `names` for every flat index of `layout`."""
    n = layout.total_qubits
    idx = np.arange(layout.dim, dtype=np.int64)
    values = np.zeros(layout.dim, dtype=np.int64)
    for name in names:
        width = layout.width(name)
        shift = n - layout.offset(name) - width
        values = (values << width) | ((idx >> shift) & ((1 << width) - 1))
    values.flags.writeable = False
    return values


class StateVector(BaseModel):
    """Normalized, immutable pure state over a register layout."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    layout: RegisterLayout
    amps: np.ndarray

    @field_validator("amps", mode="before")
    @classmethod
    def _freeze_amps(cls, value):
        arr = np.array(value, dtype=np.complex128).reshape(-1)
        arr.flags.writeable = False
        return arr

    @model_validator(mode="after")
    def _check_norm(self) -> "StateVector":
        if self.amps.shape != (self.layout.dim,):
            raise LayoutMismatchError(
                f"Expected {self.layout.dim} amplitudes for {self.layout.names}, got {self.amps.shape[0]}"
            )
        norm = float(np.linalg.norm(self.amps))
        if abs(norm - 1.0) > settings.TOLERANCES["norm"]:
            raise ValueError(f"State is not normalized (norm {norm:.12f})")
        return self

    @classmethod
    def from_amplitudes(cls, layout: RegisterLayout, amps: np.ndarray, normalize: bool = False) -> "StateVector":
        arr = np.asarray(amps, dtype=np.complex128).reshape(-1)
        if normalize:
            norm = np.linalg.norm(arr)
            if norm < settings.TOLERANCES["branch_norm_floor"]:
                raise MeasurementError("Cannot normalize a (numerically) zero vector")
            arr = arr / norm
        return cls(layout=layout, amps=arr)

    @classmethod
    def basis(cls, layout: RegisterLayout, values: Optional[Dict[str, int]] = None) -> "StateVector":
        """Computational basis state; unlisted segments are |0⟩."""
        values = values or {}
        index = 0
        for name, width in layout.segments:
            value = int(values.get(name, 0))
            if not 0 <= value < 2 ** width:
                raise LayoutMismatchError(f"Value {value} does not fit segment '{name}' of width {width}")
            index = (index << width) | value
        amps = np.zeros(layout.dim, dtype=np.complex128)
        amps[index] = 1.0
        return cls(layout=layout, amps=amps)

    @classmethod
    def zeros(cls, layout: RegisterLayout) -> "StateVector":
        return cls.basis(layout)

    def tensor(self, other: "StateVector") -> "StateVector":
        return StateVector(layout=self.layout.concat(other.layout), amps=np.kron(self.amps, other.amps))

    def inner(self, other: "StateVector") -> complex:
        """⟨self|other⟩."""
        _require_same_layout(self, other)
        return complex(np.vdot(self.amps, other.amps))

    def relabel(self, layout: RegisterLayout) -> "StateVector":
        """Same amplitudes under a layout with identical segment widths."""
        if tuple(w for _, w in layout.segments) != tuple(w for _, w in self.layout.segments):
            raise LayoutMismatchError(f"Cannot relabel {self.layout.names} as {layout.names}")
        return StateVector(layout=layout, amps=self.amps)

    def as_register(self, name: str = "q") -> "StateVector":
        """Same amplitudes on one segment spanning all qubits."""
        return StateVector(layout=RegisterLayout.of((name, self.layout.total_qubits)), amps=self.amps)

    def segment_tensor(self) -> np.ndarray:
        """Amplitudes reshaped with one axis per segment."""
        return self.amps.reshape(self.layout.dims)


def tensor_power(state: StateVector, copies: int, names: Sequence[str]) -> StateVector:
    """`copies` copies of a single-segment state, one segment per name."""
    if len(names) != copies:
        raise LayoutMismatchError("Need one segment name per copy")
    width = state.layout.total_qubits
    amps = np.ones(1, dtype=np.complex128)
    for _ in range(copies):
        amps = np.kron(amps, state.amps)
    return StateVector(layout=RegisterLayout.of(*[(name, width) for name in names]), amps=amps)


def embed(state: StateVector, layout: RegisterLayout) -> StateVector:
    """Place `state` into a larger layout; extra segments start in |0⟩."""
    if not layout.contains(state.layout):
        raise LayoutMismatchError(f"{state.layout.names} does not fit into {layout.names}")
    tensor = state.segment_tensor()
    full = np.zeros(layout.dims, dtype=np.complex128)
    index = []
    src_axes = []
    for name in layout.names:
        if state.layout.has(name):
            index.append(slice(None))
            src_axes.append(state.layout.index_of(name))
        else:
            index.append(0)
    full[tuple(index)] = np.transpose(tensor, src_axes)
    return StateVector(layout=layout, amps=full.reshape(-1))


class Projector(BaseModel):
    """
    Computational-basis projector onto accepted values of some segments.

    `accepted` lists values of the concatenation of `targets` (first target
    most significant); the projector acts as identity elsewhere.
    """
    model_config = ConfigDict(frozen=True)

    targets: Tuple[str, ...]
    accepted: FrozenSet[int]

    @classmethod
    def on_value(cls, segment: str, value: int) -> "Projector":
        return cls(targets=(segment,), accepted=frozenset({int(value)}))

    @classmethod
    def all_zero(cls, segments: Sequence[str]) -> "Projector":
        return cls(targets=tuple(segments), accepted=frozenset({0}))

    def mask(self, layout: RegisterLayout) -> np.ndarray:
        return _projector_mask(self, layout)

    def width(self, layout: RegisterLayout) -> int:
        return sum(layout.width(name) for name in self.targets)

    def complement(self, layout: RegisterLayout) -> "Projector":
        everything = frozenset(range(2 ** self.width(layout)))
        return Projector(targets=self.targets, accepted=everything - self.accepted)

    def rank(self, layout: RegisterLayout) -> int:
        return len(self.accepted) * 2 ** (layout.total_qubits - self.width(layout))

    def apply(self, state: StateVector) -> np.ndarray:
        """Unnormalized Π|s⟩ as a raw amplitude array."""
        return np.where(self.mask(state.layout), state.amps, 0.0)

    def to_dense(self, layout: RegisterLayout) -> np.ndarray:
        if layout.total_qubits > settings.DENSE_MAX_QUBITS:
            raise QubitBudgetError("Dense projector materialization limited to small layouts")
        return np.diag(self.mask(layout).astype(np.complex128))


@lru_cache(maxsize=256)
def _projector_mask(projector: Projector, layout: RegisterLayout) -> np.ndarray:
    values = segment_values(layout, projector.targets)
    mask = np.isin(values, np.fromiter(projector.accepted, dtype=np.int64, count=len(projector.accepted)))
    mask.flags.writeable = False
    return mask


class Rng:
    """
    Explicit, seedable random stream (PCG64).

    Trials draw from `spawn(index)` substreams so results do not depend on
    the order trials run in.
    """

    ALGORITHM = "PCG64"

    def __init__(self, seed: int, spawn_key: Tuple[int, ...] = ()):
        if not 0 <= int(seed) < 2 ** 64:
            raise ValueError(f"Seed must be a 64-bit unsigned integer, got {seed}")
        self._seed = int(seed)
        self._spawn_key = tuple(int(k) for k in spawn_key)
        sequence = np.random.SeedSequence(self._seed, spawn_key=self._spawn_key)
        self.generator = np.random.Generator(np.random.PCG64(sequence))

    @property
    def seed(self) -> int:
        return self._seed

    @property
    def algorithm(self) -> str:
        return self.ALGORITHM

    def spawn(self, index: int) -> "Rng":
        """Child stream for a sub-task, derived from (seed, key path, index)."""
        return Rng(self._seed, self._spawn_key + (int(index),))

    def random(self) -> float:
        return float(self.generator.random())

    def bit(self) -> int:
        return int(self.generator.integers(0, 2))

    def integers(self, low: int, high: Optional[int] = None, size=None):
        return self.generator.integers(low, high, size=size)

    def normal(self, size) -> np.ndarray:
        return self.generator.normal(size=size)

    def choice(self, probabilities: np.ndarray) -> int:
        """Index sampled from a (possibly slightly unnormalized) distribution."""
        probs = np.clip(np.asarray(probabilities, dtype=float), 0.0, None)
        cumulative = np.cumsum(probs)
        u = self.random() * cumulative[-1]
        return int(min(np.searchsorted(cumulative, u, side="right"), probs.size - 1))


def measure(projector: Projector, state: StateVector, rng: Rng, force: Optional[int] = None) -> Tuple[int, StateVector, float]:
    """
    Two-outcome projective measurement {Π, I − Π}.

    Outcome 1 means the state landed in Π. `prob` is the exact probability of
    the observed branch. `force` pins the outcome (used to post-select).
    """
    mask = projector.mask(state.layout)
    weights = np.abs(state.amps) ** 2
    p_one = float(weights[mask].sum())
    p_zero = float(weights[~mask].sum())
    if force is None:
        outcome = int(rng.random() < p_one)
    else:
        outcome = int(force)
    prob = p_one if outcome == 1 else p_zero
    if prob < settings.TOLERANCES["branch_norm_floor"]:
        raise MeasurementError(f"Outcome {outcome} has probability {prob:.3e}")
    branch = np.where(mask if outcome == 1 else ~mask, state.amps, 0.0)
    post = StateVector(layout=state.layout, amps=branch / np.sqrt(prob))
    return outcome, post, prob


def marginal_distribution(state: StateVector, segments: Sequence[str]) -> np.ndarray:
    """Exact outcome distribution of measuring `segments` in the computational basis."""
    names = tuple(segments)
    width = sum(state.layout.width(name) for name in names)
    values = segment_values(state.layout, names)
    return np.bincount(values, weights=np.abs(state.amps) ** 2, minlength=2 ** width)


def measure_segments(state: StateVector, segments: Sequence[str], rng: Rng) -> Tuple[int, StateVector, float]:
    """Computational-basis measurement of `segments`: (value, post-state, probability)."""
    names = tuple(segments)
    dist = marginal_distribution(state, names)
    value = rng.choice(dist)
    prob = float(dist[value])
    mask = segment_values(state.layout, names) == value
    post = StateVector(layout=state.layout, amps=np.where(mask, state.amps, 0.0) / np.sqrt(prob))
    return value, post, prob


def fidelity(a: StateVector, b: StateVector) -> float:
    """|⟨a|b⟩|² for pure states."""
    _require_same_layout(a, b)
    return float(min(1.0, abs(np.vdot(a.amps, b.amps)) ** 2))


def swap_test(a: StateVector, b: StateVector, rng: Rng) -> Tuple[int, float]:
    """
    SWAP test between two states of the same layout.

    The accept probability (1 + |⟨a|b⟩|²)/2 is exact; the accept bit is
    sampled from it.
    """
    accept_prob = 0.5 * (1.0 + fidelity(a, b))
    return int(rng.random() < accept_prob), accept_prob


def haar_state(n: int, rng: Rng, name: str = "q") -> StateVector:
    """Haar-random n-qubit state (normalized complex Gaussian vector)."""
    if n > settings.MAX_QUBITS:
        raise QubitBudgetError(f"{n} qubits exceeds budget {settings.MAX_QUBITS}")
    dim = 2 ** n
    vec = rng.normal(dim) + 1j * rng.normal(dim)
    return StateVector.from_amplitudes(RegisterLayout.of((name, n)), vec, normalize=True)


def _require_same_layout(a: StateVector, b: StateVector) -> None:
    if a.layout != b.layout:
        raise LayoutMismatchError(f"Layouts differ: {a.layout.names} vs {b.layout.names}")
