"""
Unbounded rewinding by alternating measurements.

Apply U and measure {Π1, I − Π1}. On success the loop halts with the
renormalized flag-1 state. On failure it applies U†, measures whether the
ancilla is back in |0⟩, reapplies U and measures the flag again, for as many
rounds as it takes.
"""

from typing import Callable, Dict, List, Sequence, Union

import numpy as np
from tqdm import tqdm

from config import config as settings
from src.quantum.operators import apply
from src.quantum.statevector import Rng, StateVector, fidelity, measure
from src.rewinding.amplifier import AmplifierInstance
from src.rewinding.spectral import build_P, probe_spectrum
from src.utils.data_models import RewindTranscript
from src.utils.errors import SpreadPreconditionError
from src.utils.stats import standard_error


def expected_iterations(p: float) -> float:
    """
    Exact mean number of flag measurements for an eigenvector input with
    success probability p.

    The first attempt succeeds with p; every later attempt starts from the
    flag-0 branch and succeeds with 2p(1 − p), which gives 1 + 1/(2p).
    """
    if p >= 1.0:
        return 1.0
    if p <= 0.0:
        return float("inf")
    return 1.0 + 1.0 / (2.0 * p)


def rewind_until_success(inst: AmplifierInstance, state: StateVector, max_iter: int, rng: Rng) -> RewindTranscript:
    """
    Run the rewind loop on `state` ∈ H (ancilla appended as |0⟩).

    The transcript is not halted when max_iter flag measurements all fail;
    its final state is then the last flag-0 state.
    """
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    u, u_dag = inst.unitary, inst.unitary.adjoint()
    restore = inst.ancilla_zero
    target = inst.success_target(state)

    current = apply(u, inst.prepare(state))
    outcomes: List[int] = []
    restores: List[int] = []
    while True:
        outcome, current, _ = measure(inst.flag, current, rng)
        outcomes.append(outcome)
        if outcome == 1:
            return RewindTranscript(
                iterations=len(outcomes),
                outcome_history=outcomes,
                restore_history=restores,
                final_state=current,
                target_fidelity=0.0 if target is None else fidelity(current, target),
                halted=True,
            )
        if len(outcomes) >= max_iter:
            return RewindTranscript(
                iterations=len(outcomes),
                outcome_history=outcomes,
                restore_history=restores,
                final_state=current,
                target_fidelity=0.0 if target is None else fidelity(current, target),
                halted=False,
            )
        restored, current, _ = measure(restore, apply(u_dag, current), rng)
        restores.append(restored)
        current = apply(u, current)


def check_spread(inst: AmplifierInstance, q: float, eps: float) -> np.ndarray:
    """
    Eigenvalues of P on the probe subspace, after verifying they all lie
    within ε of q.

    Raises:
        SpreadPreconditionError: some eigenvalue is further than ε from q
    """
    spectrum = probe_spectrum(inst, build_P(inst))
    worst = float(np.max(np.abs(spectrum - q)))
    if worst > eps + settings.TOLERANCES["spectrum"]:
        raise SpreadPreconditionError(
            f"Probe eigenvalues deviate from q={q} by {worst:.3e} > ε={eps:.3e}"
        )
    return spectrum


InputFamily = Union[Sequence[StateVector], Callable[[Rng], StateVector]]


def rewind_statistics(inst: AmplifierInstance, inputs: InputFamily, eps: float, q: float,
                      trials: int, rng: Rng, max_iter: int = 500, debug: bool = False) -> Dict:
    """
    Aggregate rewind transcripts over `trials` runs.

    `inputs` is either a list of states cycled through by trial index or a
    callable drawing an input from the trial's stream.

    Returns:
        Dictionary with iteration and fidelity statistics plus per-trial rows
    """
    spectrum = check_spread(inst, q, eps)

    iterations, fidelities, rows = [], [], []
    halted_count = 0
    for t in tqdm(range(trials), desc="rewind", disable=not settings.SHOW_PROGRESS):
        trial_rng = rng.spawn(t)
        state = inputs(trial_rng) if callable(inputs) else inputs[t % len(inputs)]
        transcript = rewind_until_success(inst, state, max_iter, trial_rng)
        iterations.append(transcript.iterations)
        halted_count += int(transcript.halted)
        if transcript.halted:
            fidelities.append(transcript.target_fidelity)
        rows.append({"trial": t, **transcript.to_json_dict()})
        if debug:
            print(f"  trial {t}: {transcript.iterations} iterations, fidelity {transcript.target_fidelity:.12f}")

    fid = np.asarray(fidelities) if fidelities else np.array([np.nan])
    return {
        "mean_iters": float(np.mean(iterations)),
        "mean_iters_sigma": standard_error(iterations),
        "expected_iters": expected_iterations(q),
        "naive_expected_iters": 1.0 / q if q > 0 else float("inf"),
        "halted_rate": halted_count / trials,
        "fidelity_min": float(np.min(fid)),
        "fidelity_median": float(np.median(fid)),
        "one_minus_fidelity_max": float(1.0 - np.min(fid)),
        "probe_spectrum": [float(v) for v in spectrum],
        "rows": [{k: v for k, v in row.items() if not k.endswith("history")} for row in rows],
    }


def uniform_probe_superposition(inst: AmplifierInstance) -> StateVector:
    """Equal-weight superposition of the probe vectors."""
    if inst.probe is None:
        raise SpreadPreconditionError(f"Instance '{inst.name}' has no probe set")
    return StateVector.from_amplitudes(inst.system_layout, inst.probe.sum(axis=1), normalize=True)


def epsilon_sweep(build, q: float, eps_grid: Sequence[float], trials: int, rng: Rng,
                  max_iter: int = 500) -> List[Dict[str, float]]:
    """
    Fidelity of superposition inputs as the eigenvalue spread shrinks.

    `build(eps)` returns an instance with eigenvalues within eps of q; every
    grid point reuses the same trial streams.
    """
    sweep = []
    for eps in eps_grid:
        inst = build(eps)
        stats = rewind_statistics(inst, [uniform_probe_superposition(inst)], eps, q, trials, rng, max_iter)
        sweep.append({
            "eps": float(eps),
            "fidelity_median": stats["fidelity_median"],
            "fidelity_min": stats["fidelity_min"],
            "mean_one_minus_fidelity": float(np.mean([1.0 - row["target_fidelity"] for row in stats["rows"]])),
        })
    return sweep


def halting_profile(iterations: Sequence[int], horizon: int) -> Dict[str, float]:
    """
    Empirical tail Pr[no success within K] for K = 1..horizon and the fitted
    per-attempt success rate q' of a geometric tail.
    """
    iters = np.asarray(iterations)
    ks = np.arange(1, horizon + 1)
    tail = np.array([(iters > k).mean() for k in ks])
    positive = tail > 0
    if positive.sum() >= 2:
        slope = np.polyfit(ks[positive], np.log(tail[positive]), 1)[0]
        fitted = float(1.0 - np.exp(slope))
    else:
        fitted = 1.0
    return {"fitted_rate": fitted, "tail": [float(v) for v in tail]}
