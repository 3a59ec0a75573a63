"""
Generic key-guessing attack on keyed-state families.

Registers are ordered (prs0 .. prs{m-1}, sk, out). The attack unitary is

    U_PRS = U_check ∘ U_invert ∘ U_init

where U_init puts the key register in uniform superposition, U_invert applies
(U_sk†)^{⊗m} controlled on the key register, and U_check flips `out` iff every
copy register is all-zero. get_sk rewinds U_PRS until `out` reads 1, undoes
U_invert and measures the key; distinguish compares |ψ_s̃k⟩ with fresh
challenge copies by SWAP tests.
"""

from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator
from tqdm import tqdm

from config import config as settings
from src.quantum.operators import ComposedOp, HadamardLayer, IdentityOp, UnitaryOp, all_zero_flip, apply
from src.quantum.oracles import KeyedUnitaryFamily, controlled_keyed_adjoint
from src.quantum.statevector import (
    Projector,
    RegisterLayout,
    Rng,
    StateVector,
    embed,
    fidelity,
    haar_state,
    marginal_distribution,
    measure_segments,
    swap_test,
    tensor_power,
)
from src.rewinding.amplifier import AmplifierInstance
from src.rewinding.engine import rewind_until_success
from src.utils.data_models import AttackResult
from src.utils.errors import LayoutMismatchError, QubitBudgetError
from src.utils.stats import binomial_sigma, rate_summary

KEY = "sk"
OUT = "out"


class PrsInstance(BaseModel):
    """A keyed-state family with the copy counts used by get_sk and distinguish."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    family: KeyedUnitaryFamily
    m: int
    m_dist: int = 1

    @model_validator(mode="after")
    def _check_budget(self) -> "PrsInstance":
        if self.m < 1 or self.m_dist < 1:
            raise ValueError("Copy counts must be positive")
        if self.total_qubits > settings.MAX_QUBITS:
            raise QubitBudgetError(
                f"m·n + λ_key + 1 = {self.total_qubits} qubits exceeds budget {settings.MAX_QUBITS}"
            )
        return self

    @property
    def n(self) -> int:
        return self.family.state_qubits

    @property
    def key_bits(self) -> int:
        return self.family.key_bits

    @property
    def total_qubits(self) -> int:
        return self.m * self.n + self.key_bits + 1

    @property
    def copy_names(self) -> List[str]:
        return [f"prs{i}" for i in range(self.m)]

    @property
    def prs_layout(self) -> RegisterLayout:
        return RegisterLayout.of(*[(name, self.n) for name in self.copy_names])

    @property
    def ancilla_names(self) -> Tuple[str, ...]:
        """(sk, out), or just out for a one-key family."""
        return (KEY, OUT) if self.key_bits > 0 else (OUT,)

    @property
    def layout(self) -> RegisterLayout:
        widths = {KEY: self.key_bits, OUT: 1}
        return self.prs_layout.concat(RegisterLayout.of(*[(name, widths[name]) for name in self.ancilla_names]))


def build_u_init(inst: PrsInstance) -> UnitaryOp:
    """Hadamard layer on the key register (identity without one)."""
    if inst.key_bits == 0:
        return IdentityOp(RegisterLayout.of((OUT, 1)))
    return HadamardLayer(RegisterLayout.of((KEY, inst.key_bits)))


def build_u_invert(inst: PrsInstance) -> UnitaryOp:
    return controlled_keyed_adjoint(inst.family, inst.m, inst.copy_names, KEY)


def build_u_check(inst: PrsInstance) -> UnitaryOp:
    """Flip `out` iff all copy registers are zero."""
    return all_zero_flip(inst.prs_layout, OUT)


def build_u_prs(inst: PrsInstance) -> ComposedOp:
    return ComposedOp([build_u_init(inst), build_u_invert(inst), build_u_check(inst)])


def amplifier_instance(inst: PrsInstance) -> AmplifierInstance:
    """U_PRS as a rewinding instance: H = copy registers, ancilla = (sk, out)."""
    return AmplifierInstance(
        unitary=build_u_prs(inst),
        layout=inst.layout,
        system=tuple(inst.copy_names),
        ancilla=inst.ancilla_names,
        flag=Projector.on_value(OUT, 1),
        name=f"prs(n={inst.n}, m={inst.m}, keys={inst.family.num_keys})",
    )


def challenge_copies(inst: PrsInstance, state: StateVector, copies: Optional[int] = None) -> StateVector:
    """ψ^{⊗copies} on registers prs0.. (m copies by default)."""
    copies = inst.m if copies is None else copies
    if state.layout.total_qubits != inst.n:
        raise LayoutMismatchError(f"Challenge has {state.layout.total_qubits} qubits, family states have {inst.n}")
    single = state.as_register()
    return tensor_power(single, copies, [f"prs{i}" for i in range(copies)])


def _as_prs_input(inst: PrsInstance, challenge: StateVector) -> StateVector:
    qubits = challenge.layout.total_qubits
    if qubits == inst.n:
        return challenge_copies(inst, challenge)
    if qubits == inst.m * inst.n:
        return challenge.relabel(inst.prs_layout)
    raise LayoutMismatchError(f"Challenge of {qubits} qubits is neither one copy nor {inst.m} copies")


def _success_branch(inst: PrsInstance, challenge: StateVector) -> np.ndarray:
    full = embed(_as_prs_input(inst, challenge), inst.layout)
    evolved = apply(build_u_prs(inst), full)
    return Projector.on_value(OUT, 1).apply(evolved)


def success_prob_exact(inst: PrsInstance, challenge: StateVector) -> float:
    """
    p(ψ) = ‖Π1 U_PRS (ψ^{⊗m} ⊗ |0⟩_sk ⊗ |0⟩_out)‖² by exact evolution.

    `challenge` is either one n-qubit copy (tensored m times) or an m·n-qubit
    state on the copy registers.
    """
    branch = _success_branch(inst, challenge)
    return float(np.sum(np.abs(branch) ** 2))


def success_prob_closed_form(inst: PrsInstance, challenge: StateVector) -> float:
    """E_sk |⟨ψ_sk|ψ⟩|^{2m} for a single-copy challenge ψ."""
    if challenge.layout.total_qubits != inst.n:
        raise LayoutMismatchError("Closed form needs a single n-qubit challenge copy")
    overlaps = np.array([
        abs(np.vdot(inst.family.unitary(k)[:, 0], challenge.amps)) ** 2 for k in inst.family.keys
    ])
    return float(np.mean(overlaps ** inst.m))


def theory_candidates(inst: PrsInstance) -> Dict[str, float]:
    return {"2^-mn": 2.0 ** (-inst.m * inst.n), "2^-2mn": 2.0 ** (-2 * inst.m * inst.n)}


def key_distribution_on_success(inst: PrsInstance, challenge: StateVector) -> np.ndarray:
    """Exact key-register distribution of the normalized out = 1 branch."""
    branch = _success_branch(inst, challenge)
    weight = float(np.sum(np.abs(branch) ** 2))
    if weight < settings.TOLERANCES["branch_norm_floor"]:
        return np.zeros(inst.family.num_keys)
    if inst.key_bits == 0:
        return np.ones(1)
    state = StateVector(layout=inst.layout, amps=branch / np.sqrt(weight))
    return marginal_distribution(state, [KEY])


def target_state(inst: PrsInstance, key: int) -> StateVector:
    """|0⟩^{⊗mn}|key⟩|1⟩."""
    values = {KEY: key, OUT: 1} if inst.key_bits > 0 else {OUT: 1}
    return StateVector.basis(inst.layout, values)


def get_sk(inst: PrsInstance, challenge: StateVector, max_iter: int, rng: Rng,
           planted_key: Optional[int] = None) -> AttackResult:
    """
    Rewind U_PRS on the challenge copies until out = 1, revert U_invert and
    measure the key register.

    With `planted_key` the fidelity of the success state against
    |0⟩^{⊗mn}|sk*⟩|1⟩ is recorded.
    """
    transcript = rewind_until_success(amplifier_instance(inst), _as_prs_input(inst, challenge), max_iter, rng)
    if not transcript.halted:
        return AttackResult(recovered_key=None, transcript=transcript)

    target_fid = None
    if planted_key is not None:
        target_fid = fidelity(transcript.final_state, target_state(inst, planted_key))
    if inst.key_bits == 0:
        return AttackResult(recovered_key=0, transcript=transcript, final_state_fidelity_vs_target=target_fid)
    reverted = apply(build_u_invert(inst).adjoint(), transcript.final_state)
    key, _, _ = measure_segments(reverted, [KEY], rng)
    return AttackResult(recovered_key=key, transcript=transcript, final_state_fidelity_vs_target=target_fid)


def distinguish(inst: PrsInstance, recovered_key: int, fresh_copies: List[StateVector], rng: Rng,
                tau: float = 0.9) -> Dict:
    """
    SWAP-test |ψ_s̃k⟩ against each fresh challenge copy; "pseudorandom" iff the
    accept count reaches τ·m_dist.
    """
    candidate = inst.family.state(recovered_key)
    accepts = 0
    probs = []
    for copy in fresh_copies:
        accept, prob = swap_test(candidate, copy.as_register(), rng)
        accepts += accept
        probs.append(prob)
    verdict = "pseudorandom" if accepts >= tau * len(fresh_copies) else "haar"
    return {"verdict": verdict, "swap_accepts": accepts, "accept_probs": probs}


def attack(inst: PrsInstance, challenge: StateVector, fresh_copies: List[StateVector], max_iter: int, rng: Rng,
           tau: float = 0.9, planted_key: Optional[int] = None) -> AttackResult:
    """get_sk followed by distinguish; an unhalted run answers "haar" without SWAP tests."""
    result = get_sk(inst, challenge, max_iter, rng, planted_key=planted_key)
    if result.recovered_key is None:
        return result.model_copy(update={"verdict": "haar", "swap_accepts": 0})
    outcome = distinguish(inst, result.recovered_key, fresh_copies, rng, tau)
    return result.model_copy(update={"verdict": outcome["verdict"], "swap_accepts": outcome["swap_accepts"]})


def prs_impossibility_experiment(inst: PrsInstance, trials: int, rng: Rng, max_iter: int = 2000,
                                 tau: float = 0.9, control: bool = False, debug: bool = False) -> Dict:
    """
    Distinguish a planted-key family state from a Haar state with 2m copies.

    Each trial flips a coin: heads draws sk* and hands over |ψ_sk*⟩, tails a
    Haar-random state. get_sk runs on the first m copies in both arms and
    distinguish on the remaining m_dist. The control arm runs the identical
    pipeline but discards the recovered key and guesses.

    Returns:
        Dictionary with advantage metrics and per-trial rows
    """
    print(f"Running PRS attack: n={inst.n}, m={inst.m}, m_dist={inst.m_dist}, "
          f"keys={inst.family.num_keys}, {trials} trials...")
    correct = control_correct = planted_trials = recovered_planted = 0
    iterations = []
    rows = []
    for t in tqdm(range(trials), desc="prs-attack", disable=not settings.SHOW_PROGRESS):
        trial_rng = rng.spawn(t)
        is_prs = trial_rng.bit()
        planted = int(trial_rng.integers(0, inst.family.num_keys)) if is_prs else None
        state = inst.family.state(planted) if is_prs else haar_state(inst.n, trial_rng)

        result = attack(inst, state, [state] * inst.m_dist, max_iter, trial_rng, tau, planted_key=planted)
        iterations.append(result.transcript.iterations)
        verdict, accepts = result.verdict, result.swap_accepts

        ok = (verdict == "pseudorandom") == bool(is_prs)
        correct += int(ok)
        control_guess = trial_rng.bit()
        control_correct += int(control_guess == is_prs)
        if is_prs:
            planted_trials += 1
            recovered_planted += int(result.recovered_key == planted)
        rows.append({
            "trial": t, "is_prs": is_prs, "planted_key": -1 if planted is None else planted,
            "recovered_key": -1 if result.recovered_key is None else result.recovered_key,
            "iterations": result.transcript.iterations, "halted": result.transcript.halted,
            "verdict": verdict, "swap_accepts": accepts, "correct": ok,
            "fidelity_vs_target": result.final_state_fidelity_vs_target,
        })
        if debug:
            print(f"  trial {t}: prs={is_prs} planted={planted} recovered={result.recovered_key} "
                  f"iters={result.transcript.iterations} verdict={verdict}")

    summary = rate_summary(correct, trials)
    control_summary = rate_summary(control_correct, trials)
    metrics = {
        "advantage": summary["rate"] - 0.5,
        "advantage_lower": summary["lower"] - 0.5,
        "advantage_upper": summary["upper"] - 0.5,
        "correct_rate": summary["rate"],
        "recovery_rate": recovered_planted / planted_trials if planted_trials else float("nan"),
        "mean_iterations": float(np.mean(iterations)),
        "control_advantage": control_summary["rate"] - 0.5,
        "control_sigma": binomial_sigma(0.5, trials),
    }
    if control:
        metrics["advantage"] = metrics["control_advantage"]
    return {**metrics, "rows": rows}


def final_state_sweep(family: KeyedUnitaryFamily, planted_key: int, m_values: List[int]) -> List[Dict]:
    """
    Exact out = 1 branch for ψ_sk*^{⊗m} at each m: key argmax and the fidelity
    against |0⟩^{⊗mn}|sk*⟩|1⟩.
    """
    sweep = []
    challenge = family.state(planted_key)
    for m in m_values:
        inst = PrsInstance(family=family, m=m)
        dist = key_distribution_on_success(inst, challenge)
        sweep.append({
            "m": m,
            "argmax_key": int(np.argmax(dist)),
            "planted_key": planted_key,
            "fidelity": float(dist[planted_key]),
            "one_minus_fidelity": float(1.0 - dist[planted_key]),
            "p_exact": success_prob_exact(inst, challenge),
        })
    return sweep
