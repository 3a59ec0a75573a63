"""
Quantum public-key encryption from PRFs.

Gen samples two PRF keys and prepares |pk_b⟩ = 2^{-λ/2} Σ_x |x, PRF_{k_b}(x)⟩.
Enc measures the selected component in the computational basis and outputs
the classical outcome (x, y). Dec checks k0 first, then k1, and returns None
(⊥) when neither matches. Public-key components are single-use: measuring
one consumes it.
"""

from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, PrivateAttr, model_validator
from tqdm import tqdm

from config import config as settings
from src.quantum.operators import ComposedOp, HadamardLayer, apply
from src.quantum.oracles import PrfFamily, lift_to_oracle, toy_prf
from src.quantum.statevector import RegisterLayout, Rng, StateVector, measure_segments, swap_test
from src.utils.errors import KeyConsumedError, QubitBudgetError
from src.utils.stats import rate_summary


class SchemeParams(BaseModel):
    """λ, ℓ_out and the PRF family the scheme is instantiated with."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    lam: int
    out_bits: int
    prf: PrfFamily
    distinct_keys: bool = False

    @model_validator(mode="after")
    def _check_params(self) -> "SchemeParams":
        if self.lam < 1:
            raise ValueError("λ must be at least 1")
        if (self.prf.key_bits, self.prf.in_bits, self.prf.out_bits) != (self.lam, self.lam, self.out_bits):
            raise ValueError(
                f"PRF shape ({self.prf.key_bits}, {self.prf.in_bits}, {self.prf.out_bits}) "
                f"does not match λ={self.lam}, ℓ_out={self.out_bits}"
            )
        # Components are separate states and are never simulated jointly.
        if self.pk_qubits > settings.MAX_QUBITS:
            raise QubitBudgetError(
                f"A public-key component needs {self.pk_qubits} qubits, budget is {settings.MAX_QUBITS}"
            )
        return self

    @classmethod
    def toy(cls, lam: int, out_bits: Optional[int] = None, master_seed: int = 0,
            distinct_keys: bool = False) -> "SchemeParams":
        """Parameters over the seeded toy PRF (ℓ_out defaults to 3λ)."""
        prf = toy_prf(lam, out_bits, master_seed)
        return cls(lam=lam, out_bits=prf.out_bits, prf=prf, distinct_keys=distinct_keys)

    @property
    def pk_qubits(self) -> int:
        return self.lam + self.out_bits

    @property
    def component_layout(self) -> RegisterLayout:
        return RegisterLayout.of(("x", self.lam), ("y", self.out_bits))


class SecretKey(BaseModel):
    model_config = ConfigDict(frozen=True)

    k0: int
    k1: int


class Ciphertext(BaseModel):
    """Classical ciphertext (x, y); any pair is syntactically valid."""
    model_config = ConfigDict(frozen=True)

    x: int
    y: int


class PublicKey(BaseModel):
    """
    One copy of |pk0⟩ ⊗ |pk1⟩.

    `consume(b)` hands out component b exactly once; a second call raises
    KeyConsumedError.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True)

    pk0: StateVector
    pk1: StateVector
    _consumed: List[bool] = PrivateAttr(default_factory=lambda: [False, False])

    def component(self, b: int) -> StateVector:
        return self.pk0 if b == 0 else self.pk1

    def is_consumed(self, b: int) -> bool:
        return self._consumed[b]

    def consume(self, b: int) -> StateVector:
        if b not in (0, 1):
            raise ValueError(f"Public-key component must be 0 or 1, got {b}")
        if self._consumed[b]:
            raise KeyConsumedError(f"Public-key component pk{b} was already measured")
        self._consumed[b] = True
        return self.component(b)


def prepare_component(params: SchemeParams, key: int) -> StateVector:
    """2^{-λ/2} Σ_x |x⟩|PRF_key(x)⟩ as a StateVector over (x, y)."""
    layout = params.component_layout
    table = params.prf.function(key).table
    x = np.arange(2 ** params.lam, dtype=np.int64)
    amps = np.zeros(layout.dim, dtype=np.complex128)
    amps[(x << params.out_bits) | table] = 2.0 ** (-params.lam / 2)
    return StateVector(layout=layout, amps=amps)


def preparation_circuit(params: SchemeParams, key: int) -> ComposedOp:
    """Hadamards on x followed by the XOR oracle of PRF_key; maps |0⟩ to |pk⟩."""
    layout = params.component_layout
    return ComposedOp([HadamardLayer(layout.sub(["x"])), lift_to_oracle(params.prf.function(key))])


def prepare_component_by_circuit(params: SchemeParams, key: int) -> StateVector:
    return apply(preparation_circuit(params, key), StateVector.zeros(params.component_layout))


def sample_secret_key(params: SchemeParams, rng: Rng) -> SecretKey:
    k0 = int(rng.integers(0, 2 ** params.lam))
    k1 = int(rng.integers(0, 2 ** params.lam))
    while params.distinct_keys and k1 == k0:
        k1 = int(rng.integers(0, 2 ** params.lam))
    return SecretKey(k0=k0, k1=k1)


def fresh_public_key(params: SchemeParams, sk: SecretKey) -> PublicKey:
    """Another copy of the public key belonging to `sk`."""
    return PublicKey(pk0=prepare_component(params, sk.k0), pk1=prepare_component(params, sk.k1))


def gen(params: SchemeParams, rng: Rng) -> Tuple[PublicKey, SecretKey]:
    sk = sample_secret_key(params, rng)
    return fresh_public_key(params, sk), sk


def enc(pk: PublicKey, pt: int, rng: Rng) -> Ciphertext:
    """Measure |pk_pt⟩ in the computational basis; the outcome is the ciphertext."""
    state = pk.consume(pt)
    out_bits = state.layout.width("y")
    value, _, _ = measure_segments(state, ("x", "y"), rng)
    return Ciphertext(x=value >> out_bits, y=value & ((1 << out_bits) - 1))


def dec(params: SchemeParams, sk: SecretKey, ct: Ciphertext) -> Optional[int]:
    """0 if PRF_k0(x) = y, else 1 if PRF_k1(x) = y, else None."""
    if not (0 <= ct.x < 2 ** params.lam and 0 <= ct.y < 2 ** params.out_bits):
        return None
    if params.prf.eval(sk.k0, ct.x) == ct.y:
        return 0
    if params.prf.eval(sk.k1, ct.x) == ct.y:
        return 1
    return None


def collision_fraction(params: SchemeParams, sk: SecretKey) -> float:
    """Fraction of x whose PRF_k0(x) lies in the range of PRF_k1 (exact table scan)."""
    f0 = params.prf.function(sk.k0).table
    f1 = params.prf.function(sk.k1).table
    return float(np.isin(f0, f1).mean())


def correctness_experiment(params: SchemeParams, trials: int, rng: Rng, debug: bool = False) -> Dict:
    """
    Pr[dec(enc(pt)) = pt] over fresh key pairs and both plaintexts.

    Each trial draws a key pair from its own substream, encrypts 0 and 1
    under two components of one public key, and scans the PRF tables for
    range collisions.

    Returns:
        Dictionary with metrics and per-trial rows
    """
    if trials < 1:
        raise ValueError("correctness_experiment needs at least one trial")

    print(f"Running correctness experiment: λ={params.lam}, ℓ_out={params.out_bits}, {trials} trials...")
    rows = []
    successes = 0
    for t in tqdm(range(trials), desc="correctness", disable=not settings.SHOW_PROGRESS):
        trial_rng = rng.spawn(t)
        pk, sk = gen(params, trial_rng)
        fraction = collision_fraction(params, sk)
        for pt in (0, 1):
            ct = enc(pk, pt, trial_rng)
            decrypted = dec(params, sk, ct)
            ok = decrypted == pt
            successes += int(ok)
            rows.append({
                "trial": t, "pt": pt, "k0": sk.k0, "k1": sk.k1, "x": ct.x, "y": ct.y,
                "decrypted": -1 if decrypted is None else decrypted, "ok": ok,
                "collision_fraction": fraction,
            })
            if debug:
                print(f"  trial {t} pt={pt} ct=({ct.x}, {ct.y}) dec={decrypted}")

    attempts = 2 * trials
    summary = rate_summary(successes, attempts)
    fractions = [row["collision_fraction"] for row in rows[::2]]
    return {
        "success_rate": summary["rate"],
        "success_sigma": summary["sigma"],
        "success_interval": [summary["lower"], summary["upper"]],
        "successes": successes,
        "attempts": attempts,
        "collision_fraction": float(np.mean(fractions)),
        "union_bound": 2.0 ** (-params.lam),
        "rows": rows,
    }


def pk_consistency_check(pk_a: PublicKey, pk_b: PublicKey, rng: Rng) -> Tuple[bool, List[float]]:
    """
    SWAP-test two public-key copies component by component.

    Both copies are spent. Honest copies of the same key pass with
    probability 1.
    """
    accepts = []
    probs = []
    for b in (0, 1):
        accept, prob = swap_test(pk_a.consume(b), pk_b.consume(b), rng)
        accepts.append(accept)
        probs.append(prob)
    return all(accepts), probs
