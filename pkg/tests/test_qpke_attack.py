"""Key recovery from public-key copies and challenge decryption."""
import pytest

from src.attacks.prs_attack import success_prob_exact
from src.attacks.qpke_attack import attack_instance, qpke_attack
from src.qpke.scheme import SchemeParams, SecretKey, fresh_public_key
from src.quantum.statevector import Rng


@pytest.fixture
def params():
    return SchemeParams.toy(2, 2, master_seed=0, distinct_keys=True)


def test_attack_instance_size(params):
    inst = attack_instance(params, 2)
    assert inst.n == 4
    assert inst.key_bits == 2
    assert inst.total_qubits == 11


def test_attack_decrypts_challenges(params):
    result = qpke_attack(params, 2, 2000, Rng(1), trials=60)
    assert result["halted_rate"] == 1.0
    assert result["decrypt_success_rate"] > 0.6
    assert result["equivalent_key_rate"] >= result["key_recovery_rate"]
    assert result["qubits"] == 11
    assert result["q"] == pytest.approx(0.25)
    assert result["p_exact_min"] >= 1 / 4 - 1e-12
    low, high = result["decrypt_interval"]
    assert low <= result["decrypt_success_rate"] <= high


def test_attack_is_reproducible(params):
    a = qpke_attack(params, 1, 500, Rng(7), trials=5)
    b = qpke_attack(params, 1, 500, Rng(7), trials=5)
    assert a["rows"] == b["rows"]


@pytest.mark.slow
def test_default_attack_rate():
    params = SchemeParams.toy(2, 2, master_seed=0, distinct_keys=True)
    result = qpke_attack(params, 2, 2000, Rng(0), trials=200)
    assert result["decrypt_success_rate"] > 0.75


def test_public_key_component_is_a_family_state(params):
    inst = attack_instance(params, 2)
    component = fresh_public_key(params, SecretKey(k0=1, k1=2)).consume(0)
    assert success_prob_exact(inst, component) == pytest.approx(
        success_prob_exact(inst, inst.family.state(1)), abs=1e-12
    )


def test_recovered_planted_key_decrypts_zero_challenges(params):
    result = qpke_attack(params, 2, 2000, Rng(5), trials=30)
    hits = [row for row in result["rows"] if row["recovered_key"] == row["k0"]]
    assert hits
    assert all(row["guess"] == 0 for row in hits if row["b"] == 0)
    assert result["key_recovery_rate"] == len(hits) / 30
