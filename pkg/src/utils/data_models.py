"""
Data Models for the QPKE rewinding simulator.

Records that leave a module boundary: rewind transcripts, spectral
decompositions, attack results, CCA transcripts, and the experiment
config/report pair the CLI reads and writes.
"""

from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from config.config import SCHEMA_VERSION
from src.quantum.statevector import RegisterLayout, StateVector


class RewindTranscript(BaseModel):
    """
    One run of the alternating-measurement rewind loop.

    `outcome_history` holds the flag outcomes (1 = success) and
    `restore_history` the ancilla-zero outcomes between them.
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    iterations: int
    outcome_history: List[int]
    restore_history: List[int] = Field(default_factory=list)
    final_state: StateVector
    target_fidelity: float
    halted: bool

    @model_validator(mode="after")
    def _check_halt(self) -> "RewindTranscript":
        if self.iterations < 1 or len(self.outcome_history) != self.iterations:
            raise ValueError("Transcript needs one flag outcome per iteration")
        if self.halted and self.outcome_history[-1] != 1:
            raise ValueError("A halted transcript must end in a success outcome")
        return self

    def to_json_dict(self) -> Dict[str, Any]:
        return {
            "iterations": self.iterations,
            "outcome_history": list(self.outcome_history),
            "restore_history": list(self.restore_history),
            "target_fidelity": self.target_fidelity,
            "one_minus_fidelity": 1.0 - self.target_fidelity,
            "halted": self.halted,
        }


class SpectralDecomposition(BaseModel):
    """
    Eigenvectors ψ_i of the success operator P with p_i = ⟨ψ_i|P|ψ_i⟩ and the
    branch states φ0_i, φ1_i of U(ψ_i ⊗ |0⟩).

    Branches are None where they are undefined (p_i at 0 or 1).
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    eigenvalues: np.ndarray
    eigenvectors: List[StateVector]
    branches0: List[Optional[StateVector]]
    branches1: List[Optional[StateVector]]
    degenerate: List[bool]

    # Columns U(ψ_i ⊗ |0⟩) on the full layout, used for reconstruction checks
    images: np.ndarray
    full_layout: RegisterLayout
    eigen_residual: float

    @property
    def size(self) -> int:
        return len(self.eigenvectors)

    def branch_matrix(self) -> np.ndarray:
        """Non-degenerate flag-0 and flag-1 branches as columns."""
        columns = [s.amps for s, bad in zip(self.branches0, self.degenerate) if not bad]
        columns += [s.amps for s, bad in zip(self.branches1, self.degenerate) if not bad]
        if not columns:
            return np.zeros((self.full_layout.dim, 0), dtype=np.complex128)
        return np.stack(columns, axis=1)

    def gram_residual(self) -> float:
        """max |G − I| over the Gram matrix of all non-degenerate branches."""
        basis = self.branch_matrix()
        if basis.shape[1] == 0:
            return 0.0
        gram = basis.conj().T @ basis
        return float(np.max(np.abs(gram - np.eye(basis.shape[1]))))

    def reconstruction_residual(self) -> float:
        """max_i ‖U(ψ_i ⊗ 0) − (√p_i φ1_i + √(1−p_i) φ0_i)‖."""
        worst = 0.0
        for i in range(self.size):
            p = float(self.eigenvalues[i])
            rebuilt = np.zeros(self.full_layout.dim, dtype=np.complex128)
            if self.branches1[i] is not None:
                rebuilt += np.sqrt(p) * self.branches1[i].amps
            if self.branches0[i] is not None:
                rebuilt += np.sqrt(1.0 - p) * self.branches0[i].amps
            worst = max(worst, float(np.linalg.norm(self.images[:, i] - rebuilt)))
        return worst


class AttackResult(BaseModel):
    """Outcome of one key-guessing run (and optionally its SWAP-test verdict)."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    recovered_key: Optional[int] = None
    transcript: RewindTranscript
    final_state_fidelity_vs_target: Optional[float] = None
    verdict: Optional[str] = None
    swap_accepts: Optional[int] = None

    @model_validator(mode="after")
    def _check_recovery(self) -> "AttackResult":
        if self.recovered_key is not None and not self.transcript.halted:
            raise ValueError("A key can only be recovered from a halted transcript")
        if self.verdict is not None and self.verdict not in ("pseudorandom", "haar"):
            raise ValueError(f"Unknown verdict '{self.verdict}'")
        return self


class DecryptionQuery(BaseModel):
    """One classical query to the CCA decryption oracle."""
    model_config = ConfigDict(frozen=True)

    phase: str  # "pre" or "post" challenge
    x: int
    y: int
    answer: Optional[int] = None
    refused: bool = False


class CcaTranscript(BaseModel):
    model_config = ConfigDict(frozen=True)

    adversary: str
    n_copies: int
    b: int
    challenge_x: int
    challenge_y: int
    guess: int
    win: bool
    queries: List[DecryptionQuery] = Field(default_factory=list)


class ExperimentConfig(BaseModel):
    """A validated experiment request: name, flat parameters, seed and outputs."""
    model_config = ConfigDict(frozen=True)

    experiment: str
    params: Dict[str, Any]
    seed: int = 0
    out_path: Optional[str] = None
    csv_path: Optional[str] = None
    debug: bool = False


class ExperimentReport(BaseModel):
    """
    Result of one experiment run.

    `metrics`, `intervals` and `checks` are deterministic given the config;
    only `wall_time` varies between identical runs.
    """
    schema_version: str = SCHEMA_VERSION
    experiment: str
    params: Dict[str, Any]
    seed: int
    trials: int
    metrics: Dict[str, Any]
    intervals: Dict[str, List[float]] = Field(default_factory=dict)
    checks: Dict[str, bool] = Field(default_factory=dict)
    passed: bool
    wall_time: float = 0.0

    # Per-trial rows for CSV export; not part of the JSON report
    rows: List[Dict[str, Any]] = Field(default_factory=list, exclude=True)

    def to_json_dict(self) -> Dict[str, Any]:
        return self.model_dump()
