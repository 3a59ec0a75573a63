"""
CCA experiment harness for the QPKE scheme.

The challenger generates a key, hands the adversary n public-key copies and a
classical decryption oracle, encrypts a uniform bit b under a further copy,
and after the challenge refuses (answers ⊥ to) exactly the challenge
ciphertext. The harness checks the mechanics of the game; it does not and
cannot establish security.
"""

from abc import ABC, abstractmethod
from typing import Dict, List, Optional

from tqdm import tqdm

from config import config as settings
from src.qpke.scheme import Ciphertext, PublicKey, SchemeParams, SecretKey, dec, enc, fresh_public_key, gen
from src.quantum.statevector import Rng
from src.utils.data_models import CcaTranscript, DecryptionQuery
from src.utils.errors import QueryBudgetExceededError
from src.utils.stats import binomial_sigma, binomial_tail, chi_square_uniform, rate_summary


class DecryptionOracle:
    """Classical Dec(sk, ·) with a query budget; refuses the challenge once it is set."""

    def __init__(self, params: SchemeParams, sk: SecretKey, budget: Optional[int] = None):
        self._params = params
        self._sk = sk
        self.budget = budget
        self.challenge: Optional[Ciphertext] = None
        self.queries: List[DecryptionQuery] = []

    @property
    def phase(self) -> str:
        return "pre" if self.challenge is None else "post"

    def set_challenge(self, ct: Ciphertext) -> None:
        self.challenge = ct

    def __call__(self, ct: Ciphertext) -> Optional[int]:
        if self.budget is not None and len(self.queries) >= self.budget:
            raise QueryBudgetExceededError(f"Adversary exceeded {self.budget} decryption queries")
        refused = self.challenge is not None and ct == self.challenge
        answer = None if refused else dec(self._params, self._sk, ct)
        self.queries.append(DecryptionQuery(phase=self.phase, x=ct.x, y=ct.y, answer=answer, refused=refused))
        return answer


class CcaAdversary(ABC):
    """Two-phase adversary: sees the public keys first, then the challenge."""

    name = "adversary"

    @abstractmethod
    def pre_challenge(self, public_keys: List[PublicKey], oracle: DecryptionOracle, rng: Rng) -> None:
        """Phase 0: public-key copies and oracle access."""

    @abstractmethod
    def guess(self, challenge: Ciphertext, oracle: DecryptionOracle, rng: Rng) -> int:
        """Phase 1: output a guess for b."""


class RandomGuessAdversary(CcaAdversary):
    name = "random-guess"

    def pre_challenge(self, public_keys, oracle, rng):
        pass

    def guess(self, challenge, oracle, rng):
        return rng.bit()


class ReencryptingAdversary(CcaAdversary):
    """Encrypts a known bit under a spare copy and asks the oracle to decrypt it."""

    name = "reencrypting"

    def __init__(self):
        self.checks: List[Dict[str, Optional[int]]] = []

    def pre_challenge(self, public_keys, oracle, rng):
        for pk in public_keys:
            bit = rng.bit()
            ct = enc(pk, bit, rng)
            self.checks.append({"sent": bit, "x": ct.x, "y": ct.y, "answer": oracle(ct)})

    def guess(self, challenge, oracle, rng):
        return rng.bit()


class ChallengeQueryAdversary(CcaAdversary):
    """Asks the oracle to decrypt the challenge itself."""

    name = "challenge-query"

    def __init__(self):
        self.answers: List[Optional[int]] = []

    def pre_challenge(self, public_keys, oracle, rng):
        pass

    def guess(self, challenge, oracle, rng):
        answer = oracle(challenge)
        self.answers.append(answer)
        return rng.bit() if answer is None else answer


class MaulingAdversary(CcaAdversary):
    """
    Flips the low bit of the challenge's y and queries the result.

    The mauled ciphertext is not the challenge, so the oracle must answer it;
    the answer is ⊥ unless the flip lands on a PRF value at x.
    """

    name = "mauling"

    def __init__(self):
        self.answers: List[Optional[int]] = []

    def pre_challenge(self, public_keys, oracle, rng):
        pass

    def guess(self, challenge, oracle, rng):
        answer = oracle(Ciphertext(x=challenge.x, y=challenge.y ^ 1))
        self.answers.append(answer)
        # A hit means the mauled value belongs to the other key.
        return rng.bit() if answer is None else 1 - answer


ADVERSARIES = {
    cls.name: cls for cls in (RandomGuessAdversary, ReencryptingAdversary, ChallengeQueryAdversary, MaulingAdversary)
}


def cca_game(params: SchemeParams, adversary: CcaAdversary, n_copies: int, rng: Rng,
             query_budget: Optional[int] = None) -> Dict:
    """
    One run of the CCA experiment.

    Returns:
        {"win": bool, "transcript": CcaTranscript, "secret_key": SecretKey}

    Raises:
        QueryBudgetExceededError: the adversary made more oracle queries than allowed
    """
    if n_copies < 0:
        raise ValueError("n_copies must be non-negative")
    challenger_rng, adversary_rng = rng.spawn(0), rng.spawn(1)

    first_pk, sk = gen(params, challenger_rng)
    public_keys = [first_pk] + [fresh_public_key(params, sk) for _ in range(n_copies - 1)] if n_copies else []
    oracle = DecryptionOracle(params, sk, query_budget)

    adversary.pre_challenge(public_keys, oracle, adversary_rng)

    b = challenger_rng.bit()
    challenge = enc(fresh_public_key(params, sk), b, challenger_rng)
    oracle.set_challenge(challenge)
    guess = int(adversary.guess(challenge, oracle, adversary_rng))

    transcript = CcaTranscript(
        adversary=adversary.name,
        n_copies=n_copies,
        b=b,
        challenge_x=challenge.x,
        challenge_y=challenge.y,
        guess=guess,
        win=guess == b,
        queries=list(oracle.queries),
    )
    return {"win": guess == b, "transcript": transcript, "secret_key": sk}


def _explained(params: SchemeParams, sk: SecretKey, check: Dict) -> bool:
    """The oracle's answer is the sent bit, or 0 because PRF_k0 collides at x."""
    if check["answer"] == check["sent"]:
        return True
    return check["sent"] == 1 and check["answer"] == 0 and params.prf.eval(sk.k0, check["x"]) == check["y"]


def cca_smoke(params: SchemeParams, n_copies: int, trials: int, rng: Rng,
              query_budget: Optional[int] = None, debug: bool = False) -> Dict:
    """
    Guessing win rate over `trials` games plus scripted checks of the oracle.

    Scripted runs confirm that re-encrypted ciphertexts decrypt to the sent
    bit, that the challenge itself is refused, and that mauled challenges are
    answered rather than refused.
    """
    print(f"Running CCA smoke test: λ={params.lam}, {n_copies} copies, {trials} games...")
    wins = 0
    rows = []
    for t in tqdm(range(trials), desc="cca", disable=not settings.SHOW_PROGRESS):
        result = cca_game(params, RandomGuessAdversary(), n_copies, rng.spawn(t), query_budget)
        wins += int(result["win"])
        rows.append({"game": t, "b": result["transcript"].b, "guess": result["transcript"].guess,
                     "win": result["win"]})

    scripted_runs = max(1, min(trials, 100))
    reencrypt_ok = refusal_ok = mauling_answered = True
    for t in range(scripted_runs):
        base = rng.spawn(trials + t)
        reencrypting = ReencryptingAdversary()
        game = cca_game(params, reencrypting, n_copies, base.spawn(0), query_budget)
        reencrypt_ok &= all(
            _explained(params, game["secret_key"], check) for check in reencrypting.checks
        )

        asking = ChallengeQueryAdversary()
        game = cca_game(params, asking, n_copies, base.spawn(1), query_budget)
        refusal_ok &= asking.answers == [None] and game["transcript"].queries[-1].refused

        mauling = MaulingAdversary()
        game = cca_game(params, mauling, n_copies, base.spawn(2), query_budget)
        mauling_answered &= not game["transcript"].queries[-1].refused
        if debug:
            print(f"  scripted {t}: reencrypt={reencrypting.checks} challenge={asking.answers} maul={mauling.answers}")

    summary = rate_summary(wins, trials)
    ones = sum(row["b"] for row in rows)
    chi2, chi2_critical, _ = chi_square_uniform([trials - ones, ones])
    return {
        "win_rate": summary["rate"],
        "win_interval": [summary["lower"], summary["upper"]],
        "win_sigma": binomial_sigma(0.5, trials),
        "win_tail_probability": binomial_tail(wins, trials, 0.5),
        "challenge_bit_chi2": chi2,
        "challenge_bit_chi2_critical": chi2_critical,
        "reencrypt_answers_correct": reencrypt_ok,
        "challenge_refused": refusal_ok,
        "mauled_answered": mauling_answered,
        "scripted_runs": scripted_runs,
        "rows": rows,
    }
