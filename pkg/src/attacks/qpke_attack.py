"""
Key recovery against the toy QPKE scheme.

A public-key component is the keyed state U_k|0⟩ with U_k = (PRF_k oracle) ∘
(H^λ ⊗ I), so the key-guessing attack applies unchanged: run get_sk on m
copies of |pk0⟩, then answer a CPA challenge by checking PRF_k̃0(x) = y.
"""

from typing import Dict

import numpy as np
from tqdm import tqdm

from config import config as settings
from src.attacks.prs_attack import PrsInstance, get_sk, success_prob_exact
from src.qpke.scheme import SchemeParams, enc, fresh_public_key, sample_secret_key
from src.quantum.oracles import state_preparation_family
from src.quantum.statevector import Rng, StateVector
from src.utils.stats import rate_summary


def attack_instance(params: SchemeParams, m: int) -> PrsInstance:
    """The scheme's component preparation as an m-copy keyed-state instance."""
    return PrsInstance(family=state_preparation_family(params.prf), m=m)


def qpke_attack(params: SchemeParams, m: int, max_iter: int, rng: Rng, trials: int = 1,
                debug: bool = False) -> Dict:
    """
    Recover k0 from m copies of |pk0⟩ and decrypt a fresh challenge with it.

    The guess is 0 iff PRF_k̃0(x) = y; a run that does not halt guesses at
    random. The exact success eigenvalue p of each planted key is reported
    next to q = 1/2^m.

    Returns:
        Dictionary with recovery and decryption rates plus per-trial rows
    """
    inst = attack_instance(params, m)
    print(f"Running QPKE attack: λ={params.lam}, ℓ_out={params.out_bits}, m={m}, "
          f"{inst.total_qubits} qubits, {trials} trials...")

    p_by_key: Dict[int, float] = {}
    recovered = equivalent = decrypted = halted = 0
    rows = []
    for t in tqdm(range(trials), desc="qpke-attack", disable=not settings.SHOW_PROGRESS):
        trial_rng = rng.spawn(t)
        sk = sample_secret_key(params, trial_rng)
        copies = [fresh_public_key(params, sk).consume(0) for _ in range(m)]
        pk0 = copies[0].as_register()
        if sk.k0 not in p_by_key:
            p_by_key[sk.k0] = success_prob_exact(inst, pk0)

        result = get_sk(inst, _stack(inst, copies), max_iter, trial_rng, planted_key=sk.k0)

        b = trial_rng.bit()
        ct = enc(fresh_public_key(params, sk), b, trial_rng)
        if result.recovered_key is None:
            guess = trial_rng.bit()
        else:
            halted += 1
            guess = 0 if params.prf.eval(result.recovered_key, ct.x) == ct.y else 1
            recovered += int(result.recovered_key == sk.k0)
            equivalent += int(params.prf.function(result.recovered_key).same_as(params.prf.function(sk.k0)))
        decrypted += int(guess == b)

        rows.append({
            "trial": t, "k0": sk.k0, "k1": sk.k1,
            "recovered_key": -1 if result.recovered_key is None else result.recovered_key,
            "iterations": result.transcript.iterations, "b": b, "guess": guess, "ok": guess == b,
            "p_exact": p_by_key[sk.k0],
        })
        if debug:
            print(f"  trial {t}: k0={sk.k0} recovered={result.recovered_key} b={b} guess={guess}")

    decrypt = rate_summary(decrypted, trials)
    p_values = np.array([row["p_exact"] for row in rows])
    q = 2.0 ** (-m)
    return {
        "key_recovery_rate": recovered / trials,
        "equivalent_key_rate": equivalent / trials,
        "decrypt_success_rate": decrypt["rate"],
        "decrypt_interval": [decrypt["lower"], decrypt["upper"]],
        "halted_rate": halted / trials,
        "p_exact_mean": float(p_values.mean()),
        "p_exact_min": float(p_values.min()),
        "p_exact_max": float(p_values.max()),
        "q": q,
        "p_minus_q": float(p_values.mean() - q),
        "qubits": inst.total_qubits,
        "rows": rows,
    }


def _stack(inst: PrsInstance, copies) -> StateVector:
    """Tensor the consumed component copies onto registers prs0..prs{m-1}."""
    amps = np.ones(1, dtype=np.complex128)
    for copy in copies:
        amps = np.kron(amps, copy.amps)
    return StateVector(layout=inst.prs_layout, amps=amps)
