"""
Configuration settings for the QPKE rewinding simulator.

This file centralizes all configuration parameters, budgets, tolerances and
experiment defaults used throughout the application, so every experiment is
reproducible from a seed and a flat parameter map.
"""

import os
from pathlib import Path
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

# Base directories
BASE_DIR = Path(__file__).resolve().parent.parent
DATA_DIR = BASE_DIR / "data"
REPORTS_DIR = DATA_DIR / "reports"

# Qubit budgets
# Dense amplitudes only; every in-scope experiment fits under 24 qubits.
MAX_QUBITS = int(os.getenv("QPKE_SIM_MAX_QUBITS", "24"))
DENSE_MAX_QUBITS = 12          # full 2^n x 2^n materialization (tests, small oracles)
SPECTRAL_MAX_DIM = 2 ** 10     # dimension of H for dense eigenanalysis of P
RANDOM_FUNCTION_MAX_BITS = 20
PRF_MAX_KEY_BITS = 6
O2H_MAX_DOMAIN_BITS = 10

# Numerical tolerances, one per invariant
TOLERANCES = {
    "norm": 1e-10,
    "unitarity": 1e-10,
    "hermiticity": 1e-10,
    "spectrum": 1e-10,
    "eigen_residual": 1e-8,
    "branch_norm_floor": 1e-12,
    "degenerate_eigenvalue": 1e-9,
}

# Console output
SHOW_PROGRESS = os.getenv("QPKE_SIM_PROGRESS", "1") == "1"

# Report schema
SCHEMA_VERSION = "1.0"

# Exit codes for CI
EXIT_CODES = {
    "pass": 0,
    "fail": 1,
    "usage": 2,
    "budget": 3,
}

# Experiment registry
# Each experiment maps to exactly one module operation. Defaults are the
# desk-scale configurations of the acceptance runs; flags override them.
EXPERIMENT_CONFIG = {
    "qpke-correctness": {
        "description": "Decryption success rate and exact PRF range-collision fraction over fresh keys",
        "defaults": {"lam": 4, "l_out": 12, "trials": 2000, "distinct_keys": False},
        "required": ["lam", "trials"],
    },
    "cca-smoke": {
        "description": "CCA game mechanics: challenge refusal, re-encryption answers, guessing win rate",
        "defaults": {"lam": 3, "l_out": 9, "copies": 2, "trials": 10000, "queries": 8},
        "required": ["lam", "trials"],
    },
    "o2h-check": {
        "description": "One-way-to-hiding inequality across oracle-algorithm families",
        "defaults": {"domain_bits": 3, "range_bits": 1, "depth": 2, "trials": 200,
                     "copies": 2, "queries": 2, "set_size": 1, "family": "all"},
        "required": ["domain_bits", "trials"],
    },
    "rewind-bench": {
        "description": "Alternating-measurement rewinding: mean iterations and output fidelity",
        "defaults": {"h_qubits": 2, "q": 0.25, "eps": 0.0, "trials": 2000, "max_iter": 500},
        "required": ["q", "trials"],
    },
    "prs-success-prob": {
        "description": "Exact success probability of U_PRS by two independent paths vs 2^-mn and 2^-2mn",
        "defaults": {"n_max": 4, "m_max": 2, "keys": 16, "trials": 1},
        "required": ["keys"],
    },
    "prs-attack": {
        "description": "End-to-end key-guessing attack on a Haar keyed-state family (get_sk + distinguish)",
        "defaults": {"n": 3, "m": 3, "m_dist": 3, "keys": 8, "trials": 400,
                     "max_iter": 2000, "tau": 0.9, "control": False},
        "required": ["n", "m", "keys", "trials"],
    },
    "qpke-attack": {
        "description": "Key recovery from m public-key copies and challenge decryption",
        "defaults": {"lam": 2, "l_out": 2, "m": 2, "trials": 200, "max_iter": 2000,
                     "distinct_keys": True},
        "required": ["lam", "m", "trials"],
    },
    "basis-check": {
        "description": "Orthonormal branch basis induced by the eigenvectors of the success operator",
        "defaults": {"h_min": 2, "h_max": 4, "anc_qubits": 1, "trials": 20},
        "required": ["h_max", "trials"],
    },
}

# Acceptance thresholds per experiment
# A report passes when every declared check holds.
ACCEPTANCE = {
    "qpke-correctness": {"sigmas": 4.0, "collision_factor": 2.0},
    "cca-smoke": {"sigmas": 4.0},
    "o2h-check": {"slack_sigmas": 4.0},
    "rewind-bench": {"relative_tolerance": 0.10, "fidelity_floor": 1 - 1e-9, "eps_factor": 10.0},
    "prs-success-prob": {"path_agreement": 1e-10},
    "prs-attack": {"min_advantage": 0.25, "min_lower_bound": 0.15, "control_sigmas": 4.0},
    "qpke-attack": {"min_decrypt_rate": 0.75},
    "basis-check": {"gram": 1e-8, "reconstruction": 1e-8, "spectrum": 1e-10},
}

# Wilson score interval confidence
CONFIDENCE_Z = 1.959963984540054
