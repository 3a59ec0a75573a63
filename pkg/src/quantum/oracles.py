"""
Classical keyed functions and their quantum oracles.

Toy PRFs are per-key tables filled from a seeded PRG under a master seed.
They carry no computational security at these sizes; experiments use them
for correctness, probabilities and attack mechanics. Tables lift to XOR
oracles |x⟩|y⟩ ↦ |x⟩|y ⊕ f(x)⟩, and keyed unitary families lift to
key-controlled blocks.
"""

from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from config import config as settings
from src.quantum.operators import (
    ComposedOp,
    ControlledOp,
    DenseOp,
    HadamardLayer,
    PermutationOp,
    UnitaryOp,
    haar_unitary,
    unitarity_error,
)
from src.quantum.statevector import RegisterLayout, Rng, StateVector
from src.utils.errors import DomainTooLargeError, NonUnitaryError, QubitBudgetError


class ClassicalFunction(BaseModel):
    """f: {0,1}^in_bits → {0,1}^out_bits as a full table."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    in_bits: int
    out_bits: int
    table: np.ndarray

    @field_validator("table", mode="before")
    @classmethod
    def _freeze_table(cls, value):
        arr = np.array(value, dtype=np.int64).reshape(-1)
        arr.flags.writeable = False
        return arr

    @model_validator(mode="after")
    def _check_table(self) -> "ClassicalFunction":
        if self.table.shape != (2 ** self.in_bits,):
            raise ValueError(f"Table needs {2 ** self.in_bits} entries, got {self.table.shape[0]}")
        if self.table.size and (self.table.min() < 0 or self.table.max() >= 2 ** self.out_bits):
            raise ValueError(f"Table entries must lie in [0, 2^{self.out_bits})")
        return self

    def __call__(self, x: int) -> int:
        return int(self.table[x])

    def range_set(self) -> frozenset:
        return frozenset(int(v) for v in np.unique(self.table))

    def same_as(self, other: "ClassicalFunction") -> bool:
        return (self.in_bits, self.out_bits) == (other.in_bits, other.out_bits) and bool(
            np.array_equal(self.table, other.table)
        )

    def with_values(self, updates: Dict[int, int]) -> "ClassicalFunction":
        """Copy with some points reprogrammed."""
        table = self.table.copy()
        for x, y in updates.items():
            table[int(x)] = int(y)
        return ClassicalFunction(in_bits=self.in_bits, out_bits=self.out_bits, table=table)

    def to_hex_rows(self) -> str:
        """One zero-padded hex output per line, preceded by an `in_bits out_bits` header."""
        digits = max(1, (self.out_bits + 3) // 4)
        rows = [f"{self.in_bits} {self.out_bits}"] + [f"{int(v):0{digits}x}" for v in self.table]
        return "\n".join(rows) + "\n"

    @classmethod
    def from_hex_rows(cls, text: str) -> "ClassicalFunction":
        lines = [line.strip() for line in text.strip().splitlines() if line.strip()]
        in_bits, out_bits = (int(tok) for tok in lines[0].split())
        return cls(in_bits=in_bits, out_bits=out_bits, table=[int(line, 16) for line in lines[1:]])


def sample_random_function(in_bits: int, out_bits: int, rng: Rng) -> ClassicalFunction:
    """Truly random function: every table entry i.i.d. uniform."""
    if in_bits > settings.RANDOM_FUNCTION_MAX_BITS:
        raise DomainTooLargeError(
            f"Domain of {in_bits} bits exceeds the {settings.RANDOM_FUNCTION_MAX_BITS}-bit table limit"
        )
    table = rng.integers(0, 2 ** out_bits, size=2 ** in_bits)
    return ClassicalFunction(in_bits=in_bits, out_bits=out_bits, table=table)


class PrfFamily:
    """
    Keyed function family: key ↦ ClassicalFunction, deterministic per key.

    The generator is called at most once per key; tables are cached.
    """

    def __init__(self, key_bits: int, in_bits: int, out_bits: int,
                 generator: Callable[[int], ClassicalFunction], name: str = "prf"):
        self.key_bits = key_bits
        self.in_bits = in_bits
        self.out_bits = out_bits
        self.name = name
        self._generator = generator
        self._cache: Dict[int, ClassicalFunction] = {}

    @property
    def num_keys(self) -> int:
        return 2 ** self.key_bits

    def function(self, key: int) -> ClassicalFunction:
        key = int(key)
        if not 0 <= key < self.num_keys:
            raise ValueError(f"Key {key} outside {self.key_bits}-bit key space")
        if key not in self._cache:
            fn = self._generator(key)
            if (fn.in_bits, fn.out_bits) != (self.in_bits, self.out_bits):
                raise ValueError(f"Generator returned a {fn.in_bits}->{fn.out_bits} function for key {key}")
            self._cache[key] = fn
        return self._cache[key]

    def eval(self, key: int, x: int) -> int:
        return self.function(key)(x)

    @classmethod
    def from_tables(cls, in_bits: int, out_bits: int, tables: Sequence[Sequence[int]], name: str = "tables") -> "PrfFamily":
        """Family with explicitly listed tables (len(tables) must be a power of two)."""
        key_bits = int(np.log2(len(tables)))
        if 2 ** key_bits != len(tables):
            raise ValueError("Number of tables must be a power of two")
        functions = [ClassicalFunction(in_bits=in_bits, out_bits=out_bits, table=t) for t in tables]
        return cls(key_bits, in_bits, out_bits, lambda k: functions[k], name=name)


def toy_prf(lam: int, out_bits: Optional[int] = None, master_seed: int = 0) -> PrfFamily:
    """
    PRF {0,1}^λ × {0,1}^λ → {0,1}^ℓ_out with ℓ_out = 3λ by default.

    Each key's table comes from a PRG seeded with (master_seed, key).
    """
    if lam > settings.PRF_MAX_KEY_BITS:
        raise DomainTooLargeError(f"Toy PRF supports λ ≤ {settings.PRF_MAX_KEY_BITS}, got {lam}")
    out_bits = 3 * lam if out_bits is None else out_bits

    def generator(key: int) -> ClassicalFunction:
        prg = np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(master_seed), key])))
        table = prg.integers(0, 2 ** out_bits, size=2 ** lam)
        return ClassicalFunction(in_bits=lam, out_bits=out_bits, table=table)

    return PrfFamily(lam, lam, out_bits, generator, name=f"toy_prf(seed={master_seed})")


def tagged_prf(lam: int, out_bits: Optional[int] = None) -> PrfFamily:
    """
    Injective family with pairwise disjoint ranges: f_k(x) = k·2^λ + x.

    Needs ℓ_out ≥ 2λ; used where perfect correctness is the expected outcome.
    """
    out_bits = 2 * lam if out_bits is None else out_bits
    if out_bits < 2 * lam:
        raise ValueError("tagged_prf needs out_bits ≥ 2λ for disjoint ranges")

    def generator(key: int) -> ClassicalFunction:
        table = (key << lam) + np.arange(2 ** lam, dtype=np.int64)
        return ClassicalFunction(in_bits=lam, out_bits=out_bits, table=table)

    return PrfFamily(lam, lam, out_bits, generator, name="tagged")


def lift_to_oracle(f: ClassicalFunction, x_name: str = "x", y_name: str = "y") -> PermutationOp:
    """U_f |x⟩|y⟩ = |x⟩|y ⊕ f(x)⟩ as a permutation on segments (x, y)."""
    space = RegisterLayout.of((x_name, f.in_bits), (y_name, f.out_bits))
    idx = np.arange(space.dim, dtype=np.int64)
    x = idx >> f.out_bits
    y = idx & ((1 << f.out_bits) - 1)
    return PermutationOp(space, (x << f.out_bits) | (y ^ f.table[x]))


class KeyedUnitaryFamily:
    """
    Key ↦ n-qubit unitary U_k; |ψ_k⟩ = U_k|0⟩ is the family's keyed state.

    Members are produced lazily by `factory` and cached per key.
    """

    def __init__(self, key_bits: int, state_qubits: int, factory: Callable[[int], np.ndarray], name: str = "family"):
        if state_qubits > settings.DENSE_MAX_QUBITS:
            raise QubitBudgetError(f"Keyed unitaries limited to {settings.DENSE_MAX_QUBITS} qubits")
        self.key_bits = key_bits
        self.state_qubits = state_qubits
        self.name = name
        self._factory = factory
        self._cache: Dict[int, np.ndarray] = {}

    @property
    def num_keys(self) -> int:
        return 2 ** self.key_bits

    @property
    def keys(self) -> range:
        return range(self.num_keys)

    def unitary(self, key: int) -> np.ndarray:
        key = int(key)
        if not 0 <= key < self.num_keys:
            raise ValueError(f"Key {key} outside {self.key_bits}-bit key space")
        if key not in self._cache:
            matrix = np.asarray(self._factory(key), dtype=np.complex128)
            dim = 2 ** self.state_qubits
            if matrix.shape != (dim, dim):
                raise ValueError(f"Member {key} has shape {matrix.shape}, expected {(dim, dim)}")
            err = unitarity_error(matrix)
            if err > settings.TOLERANCES["unitarity"]:
                raise NonUnitaryError(f"Member {key} of {self.name} is not unitary (error {err:.2e})")
            self._cache[key] = matrix
        return self._cache[key]

    def state(self, key: int, name: str = "q") -> StateVector:
        """|ψ_k⟩ = U_k|0⟩."""
        layout = RegisterLayout.of((name, self.state_qubits))
        return StateVector(layout=layout, amps=self.unitary(key)[:, 0])

    def op(self, key: int, name: str = "q") -> DenseOp:
        return DenseOp(RegisterLayout.of((name, self.state_qubits)), self.unitary(key), check=False)


def haar_family(key_bits: int, state_qubits: int, master_seed: int) -> KeyedUnitaryFamily:
    """Independent Haar members per key under a master seed."""
    def factory(key: int) -> np.ndarray:
        return haar_unitary(state_qubits, Rng(master_seed, (key,))).matrix

    return KeyedUnitaryFamily(key_bits, state_qubits, factory, name=f"haar(seed={master_seed})")


def unitary_family(matrices: Sequence[np.ndarray], name: str = "explicit") -> KeyedUnitaryFamily:
    """Family from an explicit list of members (length a power of two)."""
    key_bits = int(np.log2(len(matrices)))
    if 2 ** key_bits != len(matrices):
        raise ValueError("Number of members must be a power of two")
    state_qubits = int(np.log2(np.asarray(matrices[0]).shape[0]))
    return KeyedUnitaryFamily(key_bits, state_qubits, lambda k: matrices[k], name=name)


def state_preparation_family(prf: PrfFamily) -> KeyedUnitaryFamily:
    """
    Keyed family whose member k prepares Σ_x |x, PRF_k(x)⟩ from |0⟩:
    a Hadamard layer on x followed by the PRF's XOR oracle.
    """
    space = RegisterLayout.of(("x", prf.in_bits), ("y", prf.out_bits))

    def factory(key: int) -> np.ndarray:
        prep = ComposedOp([HadamardLayer(space.sub(["x"])), lift_to_oracle(prf.function(key))])
        return prep.to_dense(space)

    return KeyedUnitaryFamily(prf.key_bits, prf.in_bits + prf.out_bits, factory, name=f"prep[{prf.name}]")


def controlled_keyed_adjoint(family: KeyedUnitaryFamily, m: int,
                             copy_names: Optional[Sequence[str]] = None,
                             key_name: str = "sk") -> UnitaryOp:
    """
    Σ_k |k⟩⟨k| ⊗ (U_k†)^{⊗m}: key value k inverts every copy register.

    A one-key family has no key register; the result is the plain (U_0†)^{⊗m}.
    """
    copy_names = list(copy_names or [f"prs{i}" for i in range(m)])
    if len(copy_names) != m:
        raise ValueError("Need one register name per copy")
    total = m * family.state_qubits + family.key_bits
    if total > settings.MAX_QUBITS:
        raise QubitBudgetError(f"Controlled adjoint needs {total} qubits, budget is {settings.MAX_QUBITS}")
    branches: Dict[int, UnitaryOp] = {}
    for key in family.keys:
        inverse = family.unitary(key).conj().T
        copies: List[UnitaryOp] = [
            DenseOp(RegisterLayout.of((name, family.state_qubits)), inverse, check=False) for name in copy_names
        ]
        branches[key] = ComposedOp(copies)
    if family.key_bits == 0:
        return branches[0]
    return ControlledOp(RegisterLayout.of((key_name, family.key_bits)), branches)
