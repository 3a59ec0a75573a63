"""
Empirical one-way-to-hiding checker.

An oracle algorithm alternates its own unitaries with rounds of parallel XOR
queries to H on `width` (x_j, y_j) register pairs and finally outputs the bit
b. For oracles G, H that differ exactly on S the checker computes, exactly
per sampled (H, G, S, z):

    P_left  = Pr[b = 1 running with H]
    P_right = Pr[b = 1 running with G]
    P_guess = Pr[T ∩ S ≠ ∅], T = query inputs measured just before a
              uniformly chosen round i ∈ [d] of a run with H

and averages them over trials. Both |P_left − P_right| ≤ 2d√P_guess and
|√P_left − √P_right| ≤ 2d√P_guess are checked on the averages (with
statistical slack) and on every trial (exactly).
"""

import math
from abc import ABC, abstractmethod
from typing import Any, Dict, FrozenSet, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from tqdm import tqdm

from config import config as settings
from src.quantum.operators import (
    ComposedOp,
    DenseOp,
    HadamardLayer,
    PermutationOp,
    UnitaryOp,
    apply,
    haar_unitary,
    xor_constant,
)
from src.quantum.oracles import ClassicalFunction, lift_to_oracle, sample_random_function
from src.quantum.statevector import RegisterLayout, Rng, StateVector, marginal_distribution, segment_values
from src.utils.errors import DomainTooLargeError
from src.utils.stats import standard_error

OUTPUT = "b"


class O2hInstance(BaseModel):
    """One draw of (H, G, S, z) with G = H outside S."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    h: ClassicalFunction
    g: ClassicalFunction
    s: FrozenSet[int]
    z: Dict[str, Any] = Field(default_factory=dict)


def reprogram(h: ClassicalFunction, points: Sequence[int], rng: Rng) -> ClassicalFunction:
    """G: equal to H except on `points`, where G(x) = H(x) ⊕ δ for a random nonzero δ."""
    updates = {}
    for x in points:
        delta = int(rng.integers(1, 2 ** h.out_bits))
        updates[int(x)] = h(int(x)) ^ delta
    return h.with_values(updates)


def _parity_into(layout: RegisterLayout, sources: Sequence[str], target: str = OUTPUT) -> PermutationOp:
    """b ⊕= XOR of the low bits of `sources`."""
    space = layout.sub(list(sources) + [target])
    idx = np.arange(space.dim, dtype=np.int64)
    parity = np.zeros(space.dim, dtype=np.int64)
    for name in sources:
        parity ^= segment_values(space, (name,)) & 1
    return PermutationOp(space, idx ^ parity)


def _diffusion(space: RegisterLayout) -> DenseOp:
    """2|u⟩⟨u| − I with |u⟩ the uniform superposition."""
    dim = space.dim
    return DenseOp(space, np.full((dim, dim), 2.0 / dim) - np.eye(dim), check=False)


class OracleAlgorithm(ABC):
    """
    Query algorithm with `depth` rounds of `width` parallel queries.

    round_unitary(r, z) runs before query round r for r < depth; round
    `depth` is the final unitary before b is measured.
    """

    name = "algorithm"

    def __init__(self, domain_bits: int, range_bits: int, depth: int, width: int = 1, seed: int = 0):
        if domain_bits > settings.O2H_MAX_DOMAIN_BITS:
            raise DomainTooLargeError(
                f"O2H simulation supports at most {settings.O2H_MAX_DOMAIN_BITS} domain bits, got {domain_bits}"
            )
        if depth < 1 or width < 1:
            raise ValueError("depth and width must be positive")
        self.domain_bits = domain_bits
        self.range_bits = range_bits
        self.depth = depth
        self.width = width
        self.seed = seed
        segments = []
        for j in range(width):
            segments += [(f"x{j}", domain_bits), (f"y{j}", range_bits)]
        self.layout = RegisterLayout.of(*segments, (OUTPUT, 1))

    @property
    def x_names(self) -> List[str]:
        return [f"x{j}" for j in range(self.width)]

    @property
    def y_names(self) -> List[str]:
        return [f"y{j}" for j in range(self.width)]

    def query_op(self, f: ClassicalFunction) -> UnitaryOp:
        return ComposedOp([lift_to_oracle(f, x, y) for x, y in zip(self.x_names, self.y_names)])

    def initial_state(self, z: Dict[str, Any]) -> StateVector:
        return StateVector.zeros(self.layout)

    @abstractmethod
    def round_unitary(self, r: int, z: Dict[str, Any]) -> UnitaryOp:
        """Unitary applied before query round r (r = depth: final unitary)."""

    def sample_instance(self, rng: Rng, set_size: int = 1) -> O2hInstance:
        """Random H, a uniformly random S of `set_size` points, G reprogrammed on S."""
        h = sample_random_function(self.domain_bits, self.range_bits, rng)
        points = rng.generator.choice(2 ** self.domain_bits, size=set_size, replace=False) if set_size else []
        g = reprogram(h, points, rng)
        return O2hInstance(h=h, g=g, s=frozenset(int(x) for x in points), z=self.sample_z(rng))

    def sample_z(self, rng: Rng) -> Dict[str, Any]:
        return {}


def output_probability(alg: OracleAlgorithm, f: ClassicalFunction, z: Dict[str, Any]) -> float:
    """Pr[b = 1] after running `alg` with oracle f."""
    state = alg.initial_state(z)
    query = alg.query_op(f)
    for r in range(alg.depth):
        state = apply(query, apply(alg.round_unitary(r, z), state))
    state = apply(alg.round_unitary(alg.depth, z), state)
    return float(marginal_distribution(state, [OUTPUT])[1])


def _hit_mask(alg: OracleAlgorithm, s: FrozenSet[int]) -> np.ndarray:
    marked = np.fromiter(s, dtype=np.int64, count=len(s))
    mask = np.zeros(alg.layout.dim, dtype=bool)
    for name in alg.x_names:
        mask |= np.isin(segment_values(alg.layout, (name,)), marked)
    return mask


def round_hit_probabilities(alg: OracleAlgorithm, f: ClassicalFunction, s: FrozenSet[int],
                            z: Dict[str, Any]) -> np.ndarray:
    """Pr[some query input of round i lies in S], for each round of `alg`."""
    mask = _hit_mask(alg, s)
    state = alg.initial_state(z)
    query = alg.query_op(f)
    hits = np.zeros(alg.depth)
    for r in range(alg.depth):
        state = apply(alg.round_unitary(r, z), state)
        hits[r] = float(np.sum(np.abs(state.amps[mask]) ** 2))
        state = apply(query, state)
    return hits


def guess_probability(alg: OracleAlgorithm, f: ClassicalFunction, s: FrozenSet[int],
                      z: Dict[str, Any], depth: Optional[int] = None) -> float:
    """
    P_guess with B choosing i uniformly from [depth]; rounds beyond the
    algorithm's own depth make no queries and never hit.
    """
    depth = alg.depth if depth is None else depth
    if not s:
        return 0.0
    return float(np.sum(round_hit_probabilities(alg, f, s, z)[:depth]) / depth)


# ---------------------------------------------------------------------------
# Algorithm families


class UniformQueryAlgorithm(OracleAlgorithm):
    """Queries the uniform superposition every round; outputs the parity of the answers."""

    name = "uniform-query"

    def round_unitary(self, r, z):
        if r < self.depth:
            return HadamardLayer(self.layout.sub(self.x_names))
        return ComposedOp([HadamardLayer(self.layout.sub(self.x_names)), _parity_into(self.layout, self.y_names)])


class HaarWalkAlgorithm(OracleAlgorithm):
    """Haar-random unitaries on each (x_j, y_j) pair between queries."""

    name = "haar-walk"

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        pair_qubits = self.domain_bits + self.range_bits
        self._rounds = []
        for r in range(self.depth + 1):
            ops = []
            for j, (x, y) in enumerate(zip(self.x_names, self.y_names)):
                u = haar_unitary(pair_qubits, Rng(self.seed, (r, j))).matrix
                ops.append(DenseOp(self.layout.sub([x, y]), u, check=False))
            self._rounds.append(ComposedOp(ops))
        self._final = ComposedOp([self._rounds[-1], _parity_into(self.layout, [self.x_names[0]])])

    def round_unitary(self, r, z):
        return self._rounds[r] if r < self.depth else self._final


class KnownPointAlgorithm(OracleAlgorithm):
    """
    Classical queries: the point s ∈ S in one round, a point t ∉ S in all
    others. Exactly one round hits, so P_guess = 1/d.
    """

    name = "known-point"

    def sample_instance(self, rng, set_size=1):
        h = sample_random_function(self.domain_bits, self.range_bits, rng)
        s = int(rng.integers(0, 2 ** self.domain_bits))
        t = (s + int(rng.integers(1, 2 ** self.domain_bits))) % 2 ** self.domain_bits
        z = {"s": s, "t": t, "round": int(rng.integers(0, self.depth))}
        return O2hInstance(h=h, g=reprogram(h, [s], rng), s=frozenset({s}), z=z)

    def _point(self, r, z) -> int:
        return z["s"] if r == z["round"] else z["t"]

    def round_unitary(self, r, z):
        x = self.layout.sub([self.x_names[0]])
        if r < self.depth:
            previous = self._point(r - 1, z) if r > 0 else 0
            return xor_constant(x, previous ^ self._point(r, z))
        return _parity_into(self.layout, [self.y_names[0]])


class PhaseKickbackAlgorithm(OracleAlgorithm):
    """Grover-style walk: answers in |−⟩ turn queries into phases, diffusion in between."""

    name = "phase-kickback"

    def round_unitary(self, r, z):
        x = self.layout.sub(self.x_names)
        y = self.layout.sub(self.y_names)
        if r == 0:
            return ComposedOp([
                HadamardLayer(x),
                xor_constant(y, 2 ** y.total_qubits - 1),
                HadamardLayer(y),
            ])
        diffusion = ComposedOp([_diffusion(self.layout.sub([name])) for name in self.x_names])
        if r < self.depth:
            return diffusion
        return ComposedOp([diffusion, _parity_into(self.layout, [self.x_names[0]])])


class PkSimulationAlgorithm(OracleAlgorithm):
    """
    One round of parallel queries: `copies` uniform superpositions (preparing
    public-key copies) and `queries` classical points chosen in z, with H
    reprogrammed at a single uniform point. Expected P_guess is
    1 − (1 − 2^-λ)^(copies + queries).
    """

    name = "pk-simulation"

    def __init__(self, domain_bits: int, range_bits: int, copies: int = 2, queries: int = 2, seed: int = 0):
        super().__init__(domain_bits, range_bits, depth=1, width=copies + queries, seed=seed)
        self.copies = copies
        self.queries = queries

    def sample_z(self, rng):
        return {"classical": [int(v) for v in rng.integers(0, 2 ** self.domain_bits, size=self.queries)]}

    def round_unitary(self, r, z):
        if r == 0:
            ops: List[UnitaryOp] = [HadamardLayer(self.layout.sub(self.x_names[:self.copies]))]
            for name, value in zip(self.x_names[self.copies:], z["classical"]):
                ops.append(xor_constant(self.layout.sub([name]), value))
            return ComposedOp(ops)
        return _parity_into(self.layout, self.y_names)

    def expected_guess_probability(self) -> float:
        return 1.0 - (1.0 - 2.0 ** (-self.domain_bits)) ** (self.copies + self.queries)

    def union_bound(self) -> float:
        return (self.copies + self.queries) / 2 ** self.domain_bits


FAMILIES = {
    cls.name: cls
    for cls in (UniformQueryAlgorithm, HaarWalkAlgorithm, KnownPointAlgorithm, PhaseKickbackAlgorithm, PkSimulationAlgorithm)
}


def build_family(name: str, domain_bits: int, range_bits: int, depth: int, seed: int = 0,
                 copies: int = 2, queries: int = 2) -> OracleAlgorithm:
    if name not in FAMILIES:
        raise ValueError(f"Unknown O2H family '{name}'. Known: {sorted(FAMILIES)}")
    if name == PkSimulationAlgorithm.name:
        return PkSimulationAlgorithm(domain_bits, range_bits, copies=copies, queries=queries, seed=seed)
    return FAMILIES[name](domain_bits, range_bits, depth, seed=seed)


def o2h_experiment(domain_bits: int, adversary: OracleAlgorithm, depth: int, trials: int, rng: Rng,
                   set_size: int = 1, slack_sigmas: float = 4.0, debug: bool = False) -> Dict:
    """
    Monte Carlo over (H, G, S, z) of the exact per-trial probabilities.

    Returns:
        Dictionary with P_left, P_right, P_guess, both bounds, their verdicts
        and per-trial violation counts
    """
    if adversary.domain_bits != domain_bits:
        raise ValueError(f"Adversary works on {adversary.domain_bits} domain bits, not {domain_bits}")
    if depth < adversary.depth:
        raise ValueError(f"Declared depth {depth} is below the algorithm's query depth {adversary.depth}")

    lefts, rights, guesses = [], [], []
    sampled_left = sampled_right = sampled_guess = 0
    violations = sqrt_violations = 0
    rows = []
    for t in tqdm(range(trials), desc=adversary.name, disable=not settings.SHOW_PROGRESS):
        trial_rng = rng.spawn(t)
        inst = adversary.sample_instance(trial_rng, set_size) if set_size else _no_difference(adversary, trial_rng)
        left = output_probability(adversary, inst.h, inst.z)
        right = output_probability(adversary, inst.g, inst.z)
        guess = guess_probability(adversary, inst.h, inst.s, inst.z, depth)

        bound = 2 * depth * math.sqrt(guess)
        violations += int(abs(left - right) > bound + 1e-12)
        sqrt_violations += int(abs(math.sqrt(left) - math.sqrt(right)) > bound + 1e-12)
        sampled_left += int(trial_rng.random() < left)
        sampled_right += int(trial_rng.random() < right)
        sampled_guess += int(trial_rng.random() < guess)

        lefts.append(left)
        rights.append(right)
        guesses.append(guess)
        rows.append({"family": adversary.name, "trial": t, "p_left": left, "p_right": right, "p_guess": guess})
        if debug:
            print(f"  {adversary.name} trial {t}: left={left:.6f} right={right:.6f} guess={guess:.6f}")

    p_left, p_right, p_guess = float(np.mean(lefts)), float(np.mean(rights)), float(np.mean(guesses))
    diff_se = standard_error(np.asarray(lefts) - np.asarray(rights))
    bound = 2 * depth * math.sqrt(p_guess)
    slack = slack_sigmas * diff_se
    sqrt_slack = slack_sigmas * (
        standard_error(lefts) / (2 * math.sqrt(max(p_left, 1e-12)))
        + standard_error(rights) / (2 * math.sqrt(max(p_right, 1e-12)))
    )
    return {
        "family": adversary.name,
        "P_left": p_left,
        "P_right": p_right,
        "P_guess": p_guess,
        "bound": bound,
        "slack": slack,
        "bound_holds": abs(p_left - p_right) <= bound + slack,
        "sqrt_bound_holds": abs(math.sqrt(p_left) - math.sqrt(p_right)) <= bound + sqrt_slack,
        "violations": violations,
        "sqrt_violations": sqrt_violations,
        "sampled_P_left": sampled_left / trials,
        "sampled_P_right": sampled_right / trials,
        "sampled_P_guess": sampled_guess / trials,
        "rows": rows,
    }


def _no_difference(adversary: OracleAlgorithm, rng: Rng) -> O2hInstance:
    """S = ∅, G = H."""
    inst = adversary.sample_instance(rng, set_size=1)
    return O2hInstance(h=inst.h, g=inst.h, s=frozenset(), z=inst.z)
