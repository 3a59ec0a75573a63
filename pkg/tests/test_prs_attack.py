"""Key-guessing attack on keyed-state families."""
import numpy as np
import pytest

from src.attacks.prs_attack import (
    PrsInstance,
    amplifier_instance,
    attack,
    build_u_check,
    build_u_init,
    build_u_invert,
    build_u_prs,
    challenge_copies,
    distinguish,
    final_state_sweep,
    get_sk,
    key_distribution_on_success,
    prs_impossibility_experiment,
    success_prob_closed_form,
    success_prob_exact,
    target_state,
    theory_candidates,
)
from src.quantum.operators import ControlledOp, apply
from src.quantum.oracles import haar_family, unitary_family
from src.quantum.statevector import RegisterLayout, Rng, StateVector, fidelity, haar_state
from src.rewinding.spectral import build_P, expectation
from src.utils.errors import LayoutMismatchError, QubitBudgetError


@pytest.fixture
def family():
    return haar_family(2, 2, master_seed=0)


def test_layout_and_budget(family):
    inst = PrsInstance(family=family, m=3)
    assert inst.layout.names == ("prs0", "prs1", "prs2", "sk", "out")
    assert inst.total_qubits == 3 * 2 + 2 + 1
    with pytest.raises(QubitBudgetError):
        PrsInstance(family=haar_family(4, 6, master_seed=0), m=4)


@pytest.mark.parametrize("m", [1, 2, 3])
def test_three_success_probability_paths_agree(family, m):
    inst = PrsInstance(family=family, m=m)
    for challenge in (family.state(1), haar_state(2, Rng(m))):
        exact = success_prob_exact(inst, challenge)
        closed = success_prob_closed_form(inst, challenge)
        operator = expectation(build_P(amplifier_instance(inst)), challenge_copies(inst, challenge))
        assert exact == pytest.approx(closed, abs=1e-10)
        assert exact == pytest.approx(operator, abs=1e-10)


def test_planted_key_success_at_least_one_over_keys(family):
    inst = PrsInstance(family=family, m=2)
    assert success_prob_exact(inst, family.state(2)) >= 1 / family.num_keys - 1e-12


def test_theory_candidates(family):
    inst = PrsInstance(family=family, m=2)
    assert theory_candidates(inst) == {"2^-mn": 2 ** -4, "2^-2mn": 2 ** -8}


def test_key_distribution_peaks_at_planted_key(family):
    for m in (1, 2, 3):
        inst = PrsInstance(family=family, m=m)
        dist = key_distribution_on_success(inst, family.state(3))
        assert dist.sum() == pytest.approx(1.0)
        assert int(np.argmax(dist)) == 3


def test_final_state_converges_with_more_copies(family):
    sweep = final_state_sweep(family, planted_key=0, m_values=[1, 2, 3, 4])
    assert all(point["argmax_key"] == 0 for point in sweep)
    losses = [point["one_minus_fidelity"] for point in sweep]
    assert all(b < a for a, b in zip(losses, losses[1:]))


def test_get_sk_halts_and_records_fidelity(family):
    inst = PrsInstance(family=family, m=3)
    result = get_sk(inst, family.state(1), 500, Rng(4), planted_key=1)
    assert result.transcript.halted
    assert 0 <= result.recovered_key < family.num_keys
    assert 0.0 <= result.final_state_fidelity_vs_target <= 1.0


def test_get_sk_accepts_stacked_copies(family):
    inst = PrsInstance(family=family, m=2)
    stacked = challenge_copies(inst, family.state(0))
    result = get_sk(inst, stacked, 500, Rng(1))
    assert result.transcript.halted
    with pytest.raises(LayoutMismatchError):
        get_sk(inst, haar_state(3, Rng(0)), 10, Rng(0))


def test_target_state_layout(family):
    inst = PrsInstance(family=family, m=2)
    target = target_state(inst, 2)
    assert target.layout == inst.layout
    assert build_u_prs(inst).space.total_qubits == inst.total_qubits


def test_distinguish_accepts_true_key(family):
    inst = PrsInstance(family=family, m=2, m_dist=4)
    outcome = distinguish(inst, 1, [family.state(1)] * 4, Rng(0))
    assert outcome["verdict"] == "pseudorandom"
    assert outcome["swap_accepts"] == 4
    assert outcome["accept_probs"] == [pytest.approx(1.0)] * 4


def test_attack_beats_guessing(family):
    inst = PrsInstance(family=family, m=3, m_dist=3)
    result = prs_impossibility_experiment(inst, 80, Rng(2), max_iter=500)
    assert result["advantage"] > 0.1
    assert result["recovery_rate"] > 0.5
    assert len(result["rows"]) == 80


def test_control_arm_reports_guessing_advantage(family):
    inst = PrsInstance(family=family, m=2, m_dist=2)
    result = prs_impossibility_experiment(inst, 40, Rng(3), max_iter=500, control=True)
    assert result["advantage"] == result["control_advantage"]
    assert abs(result["control_advantage"]) <= 4 * result["control_sigma"]


def test_u_prs_is_composition_of_parts():
    inst = PrsInstance(family=haar_family(1, 2, master_seed=5), m=1)
    layout = inst.layout
    parts = [build_u_init(inst), build_u_invert(inst), build_u_check(inst)]
    expected = parts[2].to_dense(layout) @ parts[1].to_dense(layout) @ parts[0].to_dense(layout)
    np.testing.assert_allclose(build_u_prs(inst).to_dense(layout), expected, atol=1e-10)


def test_u_check_flips_out_only_on_all_zero_copies(family):
    inst = PrsInstance(family=family, m=2)
    check = build_u_check(inst)
    dense = check.to_dense(inst.layout)
    np.testing.assert_allclose(dense @ dense, np.eye(inst.layout.dim), atol=1e-12)

    zero = StateVector.basis(inst.layout, {"sk": 3})
    flipped = apply(check, zero)
    assert fidelity(flipped, StateVector.basis(inst.layout, {"sk": 3, "out": 1})) == pytest.approx(1.0)
    for values in ({"prs0": 1}, {"prs1": 2, "sk": 1}, {"prs0": 3, "prs1": 3, "out": 1}):
        state = StateVector.basis(inst.layout, values)
        assert fidelity(apply(check, state), state) == pytest.approx(1.0)


def test_distinguish_rejects_haar_challenges():
    inst = PrsInstance(family=haar_family(3, 3, master_seed=1), m=1, m_dist=8)
    haar_verdicts = 0
    for t in range(500):
        trial = Rng(12).spawn(t)
        challenge = haar_state(3, trial)
        outcome = distinguish(inst, t % 8, [challenge] * 8, trial, tau=0.9)
        haar_verdicts += int(outcome["verdict"] == "haar")
    assert haar_verdicts / 500 >= 0.85


def test_attack_fills_verdict_and_swap_accepts(family):
    inst = PrsInstance(family=family, m=3, m_dist=3)
    result = attack(inst, family.state(2), [family.state(2)] * 3, 500, Rng(8), planted_key=2)
    assert result.transcript.halted
    assert result.verdict in ("pseudorandom", "haar")
    assert 0 <= result.swap_accepts <= 3
    if result.recovered_key == 2:
        assert result.verdict == "pseudorandom" and result.swap_accepts == 3


def test_attack_without_halt_answers_haar():
    inst = PrsInstance(family=unitary_family([np.eye(2)]), m=1, m_dist=2)
    orthogonal = StateVector.basis(RegisterLayout.of(("q", 1)), {"q": 1})
    result = attack(inst, orthogonal, [orthogonal] * 2, 4, Rng(3))
    assert not result.transcript.halted
    assert result.transcript.target_fidelity == 0.0
    assert result.recovered_key is None
    assert (result.verdict, result.swap_accepts) == ("haar", 0)


@pytest.fixture
def single_key():
    return unitary_family([haar_family(0, 2, master_seed=6).unitary(0)])


def test_single_key_layout_drops_key_register(single_key):
    inst = PrsInstance(family=single_key, m=2)
    assert inst.layout.names == ("prs0", "prs1", "out")
    assert not isinstance(build_u_invert(inst), ControlledOp)
    assert "sk" not in build_u_prs(inst).space.names


@pytest.mark.parametrize("m", [1, 2])
def test_single_key_success_is_certain(single_key, m):
    inst = PrsInstance(family=single_key, m=m)
    assert success_prob_exact(inst, single_key.state(0)) == pytest.approx(1.0)
    assert success_prob_closed_form(inst, single_key.state(0)) == pytest.approx(1.0)
    np.testing.assert_allclose(key_distribution_on_success(inst, single_key.state(0)), [1.0])


def test_single_key_get_sk_returns_the_key(single_key):
    inst = PrsInstance(family=single_key, m=2)
    result = get_sk(inst, single_key.state(0), 10, Rng(0), planted_key=0)
    assert result.recovered_key == 0
    assert result.transcript.iterations == 1
    assert result.final_state_fidelity_vs_target == pytest.approx(1.0)
    assert target_state(inst, 0).layout == inst.layout


def test_single_key_advantage(single_key):
    inst = PrsInstance(family=single_key, m=2, m_dist=4)
    result = prs_impossibility_experiment(inst, 60, Rng(4), max_iter=500)
    assert result["recovery_rate"] == 1.0
    assert result["advantage"] > 0.25
    assert all(row["verdict"] == "pseudorandom" for row in result["rows"] if row["is_prs"])


@pytest.mark.slow
def test_get_sk_recovers_planted_key():
    family = haar_family(3, 3, master_seed=0)
    inst = PrsInstance(family=family, m=3)
    exact = np.mean([key_distribution_on_success(inst, family.state(k))[k] for k in family.keys])
    assert exact >= 0.9
    recovered = 0
    for t in range(200):
        planted = t % 8
        result = get_sk(inst, family.state(planted), 2000, Rng(30).spawn(t), planted_key=planted)
        assert result.transcript.halted
        recovered += int(result.recovered_key == planted)
    rate = recovered / 200
    assert rate >= exact - 4 * np.sqrt(exact * (1 - exact) / 200)
