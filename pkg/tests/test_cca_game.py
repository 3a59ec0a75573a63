"""Decryption oracle, two-phase adversaries and the CCA experiment."""
import pytest

from src.qpke.cca_game import (
    ADVERSARIES,
    ChallengeQueryAdversary,
    DecryptionOracle,
    MaulingAdversary,
    RandomGuessAdversary,
    ReencryptingAdversary,
    cca_game,
    cca_smoke,
)
from src.qpke.scheme import Ciphertext, SchemeParams, SecretKey
from src.quantum.oracles import tagged_prf
from src.quantum.statevector import Rng
from src.utils.errors import QueryBudgetExceededError


@pytest.fixture
def tagged():
    return SchemeParams(lam=2, out_bits=5, prf=tagged_prf(2, 5), distinct_keys=True)


def test_oracle_refuses_only_the_challenge(tagged):
    sk = SecretKey(k0=0, k1=1)
    oracle = DecryptionOracle(tagged, sk)
    challenge = Ciphertext(x=2, y=tagged.prf.eval(1, 2))
    assert oracle(challenge) == 1
    oracle.set_challenge(challenge)
    assert oracle(challenge) is None
    assert oracle.queries[-1].refused
    assert oracle.queries[-1].phase == "post"
    other = Ciphertext(x=2, y=tagged.prf.eval(0, 2))
    assert oracle(other) == 0
    assert [q.phase for q in oracle.queries] == ["pre", "post", "post"]


def test_oracle_query_budget(tagged):
    oracle = DecryptionOracle(tagged, SecretKey(k0=0, k1=1), budget=1)
    oracle(Ciphertext(x=0, y=0))
    with pytest.raises(QueryBudgetExceededError):
        oracle(Ciphertext(x=0, y=0))


def test_game_hands_out_requested_copies(tagged):
    class Counting(RandomGuessAdversary):
        seen = None

        def pre_challenge(self, public_keys, oracle, rng):
            Counting.seen = len(public_keys)

    cca_game(tagged, Counting(), 3, Rng(0))
    assert Counting.seen == 3
    cca_game(tagged, Counting(), 0, Rng(0))
    assert Counting.seen == 0


def test_game_is_reproducible(tagged):
    a = cca_game(tagged, RandomGuessAdversary(), 2, Rng(12))
    b = cca_game(tagged, RandomGuessAdversary(), 2, Rng(12))
    assert a["transcript"] == b["transcript"]


def test_reencryption_decrypts_to_sent_bit(tagged):
    adversary = ReencryptingAdversary()
    cca_game(tagged, adversary, 4, Rng(3))
    assert len(adversary.checks) == 4
    assert all(check["answer"] == check["sent"] for check in adversary.checks)


def test_challenge_query_is_refused(tagged):
    adversary = ChallengeQueryAdversary()
    game = cca_game(tagged, adversary, 1, Rng(5))
    assert adversary.answers == [None]
    assert game["transcript"].queries[-1].refused


def test_mauled_challenge_is_answered(tagged):
    adversary = MaulingAdversary()
    game = cca_game(tagged, adversary, 1, Rng(6))
    last = game["transcript"].queries[-1]
    assert not last.refused
    assert last.y == game["transcript"].challenge_y ^ 1


def test_budget_enforced_inside_game(tagged):
    with pytest.raises(QueryBudgetExceededError):
        cca_game(tagged, ReencryptingAdversary(), 3, Rng(0), query_budget=2)


def test_registry_names():
    assert set(ADVERSARIES) == {"random-guess", "reencrypting", "challenge-query", "mauling"}


def test_smoke_run_passes_checks():
    params = SchemeParams.toy(3, master_seed=1)
    result = cca_smoke(params, 2, 400, Rng(2), query_budget=8)
    assert abs(result["win_rate"] - 0.5) <= 4 * result["win_sigma"]
    assert result["reencrypt_answers_correct"]
    assert result["challenge_refused"]
    assert result["mauled_answered"]
    assert len(result["rows"]) == 400
