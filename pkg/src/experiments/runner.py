"""
Experiment runner.

Parses a flat experiment configuration (defaults < key=value file < flags),
validates it against the experiment's qubit budget before anything is
allocated, dispatches to the module operation, checks the acceptance
thresholds and writes the JSON report (and optional per-trial CSV).

Exit codes: 0 pass, 1 fail, 2 usage error, 3 qubit budget exceeded.
"""

import argparse
import math
import time
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from config import config as settings
from config.config import ACCEPTANCE, EXIT_CODES, EXPERIMENT_CONFIG
from src.attacks.prs_attack import (
    PrsInstance,
    amplifier_instance,
    challenge_copies,
    final_state_sweep,
    prs_impossibility_experiment,
    success_prob_closed_form,
    success_prob_exact,
    theory_candidates,
)
from src.attacks.qpke_attack import qpke_attack
from src.qpke.cca_game import cca_smoke
from src.qpke.o2h import FAMILIES, PkSimulationAlgorithm, build_family, o2h_experiment
from src.qpke.scheme import SchemeParams, correctness_experiment
from src.quantum.oracles import haar_family
from src.quantum.statevector import Rng, haar_state
from src.rewinding.amplifier import random_instance, spread_instance
from src.rewinding.engine import epsilon_sweep, halting_profile, rewind_statistics, uniform_probe_superposition
from src.rewinding.spectral import basis_check, build_P, expectation
from src.utils.data_models import ExperimentConfig, ExperimentReport
from src.utils.errors import ConfigError, QubitBudgetError, SimulationError
from src.utils.report_writer import save_report, save_rows_csv
from src.utils.stats import binomial_sigma

RUN_FLAGS = ("experiment", "seed", "out", "csv", "config", "list", "debug")


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that reports usage errors as ConfigError."""

    def error(self, message):
        raise ConfigError(message)


def _param_types() -> Dict[str, type]:
    types: Dict[str, type] = {}
    for entry in EXPERIMENT_CONFIG.values():
        for name, value in entry["defaults"].items():
            types.setdefault(name, type(value))
    return types


def _to_bool(text: str) -> bool:
    lowered = str(text).strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"Expected a boolean, got '{text}'")


def _cast(name: str, value: Any, kind: type) -> Any:
    if value is None or value == "":
        return None
    try:
        if kind is bool:
            return value if isinstance(value, bool) else _to_bool(value)
        if kind is int:
            if isinstance(value, float) and not value.is_integer():
                raise ValueError(value)
            return int(value)
        if kind is float:
            return float(value)
        return str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"Parameter '{name}' expects {kind.__name__}, got '{value}'") from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(description="QPKE rewinding simulator: reproducible experiments")
    parser.add_argument("--experiment", type=str, default=None,
                        help=f"Experiment to run: {', '.join(EXPERIMENT_CONFIG)}")
    parser.add_argument("--seed", type=int, default=None, help="64-bit seed (default 0)")
    parser.add_argument("--out", type=str, default=None,
                        help="JSON report path (default data/reports/<experiment>_<seed>.json)")
    parser.add_argument("--csv", type=str, default=None, help="Write per-trial rows to this CSV file")
    parser.add_argument("--config", type=str, default=None, help="Flat key=value file; flags override it")
    parser.add_argument("--list", action="store_true", help="List experiments and exit")
    parser.add_argument("--debug", action="store_true", help="Print per-trial detail")
    for name, kind in sorted(_param_types().items()):
        defaults = {exp: entry["defaults"][name] for exp, entry in EXPERIMENT_CONFIG.items() if name in entry["defaults"]}
        shown = ", ".join(f"{exp}={value}" for exp, value in defaults.items())
        parser.add_argument(f"--{name}", dest=name, type=str, default=None, help=f"({kind.__name__}) defaults: {shown}")
    return parser


def read_config_file(path: str) -> Dict[str, str]:
    """Flat key=value lines; blank lines and '#' comments are ignored."""
    values: Dict[str, str] = {}
    try:
        with open(path, "r") as f:
            lines = f.readlines()
    except OSError as e:
        raise ConfigError(f"Cannot read config file {path}: {str(e)}") from None
    for number, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{number}: expected key=value, got '{line}'")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


def parse_config(argv: Sequence[str], config_file: Optional[str] = None) -> ExperimentConfig:
    """
    Build a validated ExperimentConfig.

    Precedence: experiment defaults < config file < command-line flags.

    Raises:
        ConfigError: unknown flag or key, type mismatch, missing parameter
        QubitBudgetError: parameters exceed the qubit budget
    """
    args = build_parser().parse_args(list(argv))
    file_values = read_config_file(args.config or config_file) if (args.config or config_file) else {}

    experiment = args.experiment or file_values.pop("experiment", None)
    file_values.pop("experiment", None)
    if experiment is None:
        raise ConfigError("No experiment given (use --experiment NAME or --list)")
    if experiment not in EXPERIMENT_CONFIG:
        raise ConfigError(f"Unknown experiment '{experiment}'. Known: {', '.join(EXPERIMENT_CONFIG)}")

    types = _param_types()
    entry = EXPERIMENT_CONFIG[experiment]
    params: Dict[str, Any] = dict(entry["defaults"])

    run_values = {key: file_values.pop(key) for key in ("seed", "out", "csv", "debug") if key in file_values}
    for key, value in file_values.items():
        if key not in entry["defaults"]:
            raise ConfigError(f"Parameter '{key}' does not apply to {experiment}")
        params[key] = _cast(key, value, types[key])
    for key in types:
        flag_value = getattr(args, key, None)
        if flag_value is None:
            continue
        if key not in entry["defaults"]:
            raise ConfigError(f"Flag --{key} does not apply to {experiment}")
        params[key] = _cast(key, flag_value, types[key])

    for key in entry["required"]:
        if params.get(key) is None:
            raise ConfigError(f"Missing required parameter '{key}' for {experiment}")

    seed = args.seed if args.seed is not None else _cast("seed", run_values.get("seed", 0), int)
    if not 0 <= seed < 2 ** 64:
        raise ConfigError(f"Seed must be a 64-bit unsigned integer, got {seed}")

    validate_params(experiment, params)
    return ExperimentConfig(
        experiment=experiment,
        params=params,
        seed=seed,
        out_path=args.out or run_values.get("out"),
        csv_path=args.csv or run_values.get("csv"),
        debug=args.debug or _to_bool(run_values.get("debug", "false")),
    )


def _key_bits(keys: int) -> int:
    bits = int(round(math.log2(keys))) if keys > 0 else -1
    if bits < 0 or 2 ** bits != keys:
        raise ConfigError(f"keys must be a power of two, got {keys}")
    return bits


def _budget(experiment: str, needed: int, limit: int = None) -> None:
    limit = settings.MAX_QUBITS if limit is None else limit
    if needed > limit:
        raise QubitBudgetError(f"{experiment} needs {needed} qubits, budget is {limit}")


def validate_params(experiment: str, params: Dict[str, Any]) -> None:
    """Range and qubit-budget checks, run before any state is allocated."""
    if params.get("trials") is not None and params["trials"] < 1:
        raise ConfigError("trials must be at least 1")
    if params.get("max_iter") is not None and params["max_iter"] < 1:
        raise ConfigError("max_iter must be at least 1")

    if experiment in ("qpke-correctness", "cca-smoke", "qpke-attack"):
        lam = params["lam"]
        if not 1 <= lam <= settings.PRF_MAX_KEY_BITS:
            raise ConfigError(f"lam must be in [1, {settings.PRF_MAX_KEY_BITS}], got {lam}")
        l_out = params["l_out"]
        if l_out < 1:
            raise ConfigError(f"l_out must be at least 1, got {l_out}")
        if experiment == "qpke-attack":
            _budget(experiment, params["m"] * (lam + l_out) + lam + 1)
            _budget(experiment, lam + l_out, settings.DENSE_MAX_QUBITS)
        else:
            _budget(experiment, lam + l_out)
    elif experiment == "o2h-check":
        if params["domain_bits"] > settings.O2H_MAX_DOMAIN_BITS:
            raise ConfigError(f"domain_bits above {settings.O2H_MAX_DOMAIN_BITS}")
        family = params["family"]
        if family != "all" and family not in FAMILIES:
            raise ConfigError(f"Unknown O2H family '{family}'. Known: all, {', '.join(FAMILIES)}")
        pair = params["domain_bits"] + params["range_bits"]
        _budget(experiment, pair + 1)
        if family in ("all", PkSimulationAlgorithm.name):
            _budget(experiment, (params["copies"] + params["queries"]) * pair + 1)
    elif experiment == "rewind-bench":
        if not 0.0 < params["q"] <= 1.0:
            raise ConfigError(f"q must lie in (0, 1], got {params['q']}")
        if params["eps"] < 0.0:
            raise ConfigError("eps must be non-negative")
        _budget(experiment, params["h_qubits"] + 1, settings.DENSE_MAX_QUBITS)
    elif experiment == "prs-success-prob":
        key_bits = _key_bits(params["keys"])
        _budget(experiment, params["n_max"] * params["m_max"] + key_bits + 1)
        if 2 ** (params["n_max"] * params["m_max"]) > settings.SPECTRAL_MAX_DIM:
            raise QubitBudgetError("n_max·m_max copy qubits exceed the dense spectral limit")
    elif experiment == "prs-attack":
        key_bits = _key_bits(params["keys"])
        if not 0.0 < params["tau"] <= 1.0:
            raise ConfigError(f"tau must lie in (0, 1], got {params['tau']}")
        _budget(experiment, params["m"] * params["n"] + key_bits + 1)
    elif experiment == "basis-check":
        _budget(experiment, params["h_max"] + params["anc_qubits"], settings.DENSE_MAX_QUBITS)


# ---------------------------------------------------------------------------
# Experiments: each returns (trials, metrics, intervals, checks, rows)

Outcome = Tuple[int, Dict[str, Any], Dict[str, List[float]], Dict[str, bool], List[Dict[str, Any]]]


def _qpke_correctness(params, seed, debug) -> Outcome:
    scheme = SchemeParams.toy(params["lam"], params["l_out"], master_seed=seed,
                              distinct_keys=params["distinct_keys"])
    result = correctness_experiment(scheme, params["trials"], Rng(seed), debug=debug)
    thresholds = ACCEPTANCE["qpke-correctness"]
    expected = 1.0 - 2.0 ** (-scheme.lam)
    sigma = binomial_sigma(expected, result["attempts"])
    rows = result.pop("rows")
    interval = result.pop("success_interval")
    checks = {
        "success_rate": result["success_rate"] >= expected - thresholds["sigmas"] * sigma,
        "collision_fraction": result["collision_fraction"] <= thresholds["collision_factor"] * 2.0 ** (-scheme.lam),
    }
    return params["trials"], result, {"success_rate": interval}, checks, rows


def _cca_smoke(params, seed, debug) -> Outcome:
    scheme = SchemeParams.toy(params["lam"], params["l_out"], master_seed=seed)
    result = cca_smoke(scheme, params["copies"], params["trials"], Rng(seed),
                       query_budget=params["queries"], debug=debug)
    rows = result.pop("rows")
    interval = result.pop("win_interval")
    sigmas = ACCEPTANCE["cca-smoke"]["sigmas"]
    checks = {
        "guessing_win_rate": abs(result["win_rate"] - 0.5) <= sigmas * result["win_sigma"],
        "reencrypt_answers_correct": result["reencrypt_answers_correct"],
        "challenge_refused": result["challenge_refused"],
        "mauled_answered": result["mauled_answered"],
    }
    return params["trials"], result, {"win_rate": interval}, checks, rows


def _o2h_check(params, seed, debug) -> Outcome:
    names = list(FAMILIES) if params["family"] == "all" else [params["family"]]
    metrics: Dict[str, Any] = {}
    checks: Dict[str, bool] = {}
    rows: List[Dict[str, Any]] = []
    slack = ACCEPTANCE["o2h-check"]["slack_sigmas"]
    for index, name in enumerate(names):
        alg = build_family(name, params["domain_bits"], params["range_bits"], params["depth"], seed=seed,
                           copies=params["copies"], queries=params["queries"])
        print(f"O2H family {name}: depth {alg.depth}, width {alg.width}, {alg.layout.total_qubits} qubits")
        result = o2h_experiment(params["domain_bits"], alg, alg.depth, params["trials"], Rng(seed).spawn(index),
                                set_size=params["set_size"], slack_sigmas=slack, debug=debug)
        rows += result.pop("rows")
        result.pop("family")
        for key, value in result.items():
            metrics[f"{name}.{key}"] = value
        checks[f"{name}.bound"] = result["bound_holds"]
        checks[f"{name}.sqrt_bound"] = result["sqrt_bound_holds"]
        checks[f"{name}.per_trial"] = result["violations"] == 0 and result["sqrt_violations"] == 0
        if isinstance(alg, PkSimulationAlgorithm):
            guesses = [row["p_guess"] for row in rows if row["family"] == name]
            se = float(np.std(guesses, ddof=1) / math.sqrt(len(guesses))) if len(guesses) > 1 else 0.0
            metrics[f"{name}.union_bound"] = alg.union_bound()
            metrics[f"{name}.expected_P_guess"] = alg.expected_guess_probability()
            checks[f"{name}.union_bound"] = result["P_guess"] <= alg.union_bound() + slack * se
    return params["trials"], metrics, {}, checks, rows


def _rewind_bench(params, seed, debug) -> Outcome:
    q, eps, h = params["q"], params["eps"], params["h_qubits"]
    inst = spread_instance(h, q, eps, Rng(seed).spawn(0))
    if eps == 0.0:
        inputs = [inst.probe_state(j) for j in range(inst.system_layout.dim)]
    else:
        inputs = [uniform_probe_superposition(inst)]
    print(f"Running rewind bench: q={q}, ε={eps}, dim H={inst.system_layout.dim}, {params['trials']} trials...")
    result = rewind_statistics(inst, inputs, eps, q, params["trials"], Rng(seed).spawn(1),
                               max_iter=params["max_iter"], debug=debug)
    rows = result.pop("rows")
    profile = halting_profile([row["iterations"] for row in rows], horizon=min(params["max_iter"], 50))
    result["fitted_rate"] = profile["fitted_rate"]

    thresholds = ACCEPTANCE["rewind-bench"]
    checks = {"halting_rate": result["fitted_rate"] >= q / 2.0}
    if eps == 0.0:
        checks["mean_iterations"] = (
            abs(result["mean_iters"] - result["expected_iters"]) <= thresholds["relative_tolerance"] * result["expected_iters"]
        )
        checks["fidelity"] = result["fidelity_min"] >= thresholds["fidelity_floor"]
    else:
        checks["fidelity"] = result["fidelity_median"] >= 1.0 - thresholds["eps_factor"] * eps
        grid = [eps, eps / 10.0, eps / 100.0]
        sweep = epsilon_sweep(lambda e: spread_instance(h, q, e, Rng(seed).spawn(0)), q, grid,
                              max(1, params["trials"] // 4), Rng(seed).spawn(2), params["max_iter"])
        result["sweep"] = sweep
        losses = [point["mean_one_minus_fidelity"] for point in sweep]
        checks["sweep_monotone"] = all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))
    return params["trials"], result, {}, checks, rows


def _prs_success_prob(params, seed, debug) -> Outcome:
    key_bits = _key_bits(params["keys"])
    agreement = ACCEPTANCE["prs-success-prob"]["path_agreement"]
    rows = []
    worst = 0.0
    for n in range(1, params["n_max"] + 1):
        family = haar_family(key_bits, n, master_seed=seed)
        for m in range(1, params["m_max"] + 1):
            inst = PrsInstance(family=family, m=m)
            p_op = build_P(amplifier_instance(inst))
            challenges = {"planted": family.state(0), "haar": haar_state(n, Rng(seed).spawn(n).spawn(m))}
            for label, challenge in challenges.items():
                evolved = success_prob_exact(inst, challenge)
                operator = expectation(p_op, challenge_copies(inst, challenge))
                closed = success_prob_closed_form(inst, challenge)
                worst = max(worst, abs(evolved - operator), abs(evolved - closed))
                row = {"n": n, "m": m, "keys": params["keys"], "challenge": label,
                       "p_evolution": evolved, "p_operator": operator, "p_closed_form": closed}
                row.update(theory_candidates(inst))
                rows.append(row)
                if debug:
                    print(f"  n={n} m={m} {label}: p={evolved:.12f} ⟨ψ|P|ψ⟩={operator:.12f}")
    metrics = {"max_path_disagreement": worst, "table": rows}
    checks = {"paths_agree": worst <= agreement}
    return len(rows), metrics, {}, checks, rows


def _prs_attack(params, seed, debug) -> Outcome:
    key_bits = _key_bits(params["keys"])
    family = haar_family(key_bits, params["n"], master_seed=seed)
    inst = PrsInstance(family=family, m=params["m"], m_dist=params["m_dist"])
    result = prs_impossibility_experiment(inst, params["trials"], Rng(seed).spawn(1), max_iter=params["max_iter"],
                                          tau=params["tau"], control=params["control"], debug=debug)
    rows = result.pop("rows")
    sweep = final_state_sweep(family, planted_key=0, m_values=list(range(1, params["m"] + 1)))
    result["final_state_sweep"] = sweep
    result["p_theory_candidates"] = theory_candidates(inst)

    thresholds = ACCEPTANCE["prs-attack"]
    losses = [point["one_minus_fidelity"] for point in sweep]
    checks = {
        "final_state_argmax": all(point["argmax_key"] == point["planted_key"] for point in sweep if point["m"] >= 2),
        "final_state_monotone": all(b <= a + 1e-12 for a, b in zip(losses, losses[1:])),
        "control_arm": abs(result["control_advantage"]) <= thresholds["control_sigmas"] * result["control_sigma"],
    }
    if not params["control"]:
        checks["advantage"] = result["advantage"] >= thresholds["min_advantage"]
        checks["advantage_lower_bound"] = result["advantage_lower"] > thresholds["min_lower_bound"]
    intervals = {"advantage": [result["advantage_lower"], result["advantage_upper"]]}
    return params["trials"], result, intervals, checks, rows


def _qpke_attack(params, seed, debug) -> Outcome:
    scheme = SchemeParams.toy(params["lam"], params["l_out"], master_seed=seed,
                              distinct_keys=params["distinct_keys"])
    result = qpke_attack(scheme, params["m"], params["max_iter"], Rng(seed), trials=params["trials"], debug=debug)
    rows = result.pop("rows")
    interval = result.pop("decrypt_interval")
    checks = {"decrypt_success_rate": result["decrypt_success_rate"] > ACCEPTANCE["qpke-attack"]["min_decrypt_rate"]}
    return params["trials"], result, {"decrypt_success_rate": interval}, checks, rows


def _basis_check(params, seed, debug) -> Outcome:
    thresholds = ACCEPTANCE["basis-check"]
    rows = []
    for h in range(params["h_min"], params["h_max"] + 1):
        for t in range(params["trials"]):
            inst = random_instance(h, params["anc_qubits"], Rng(seed).spawn(h).spawn(t))
            gram, recon, eig, (low, high) = basis_check(inst)
            rows.append({"h_qubits": h, "instance": t, "gram_residual": gram, "reconstruction_residual": recon,
                         "eigen_residual": eig, "p_min": low, "p_max": high})
            if debug:
                print(f"  h={h} #{t}: gram={gram:.2e} recon={recon:.2e} spectrum=[{low:.3e}, {high:.3e}]")
    metrics = {
        "max_gram_residual": max(row["gram_residual"] for row in rows),
        "max_reconstruction_residual": max(row["reconstruction_residual"] for row in rows),
        "max_eigen_residual": max(row["eigen_residual"] for row in rows),
        "min_eigenvalue": min(row["p_min"] for row in rows),
        "max_eigenvalue": max(row["p_max"] for row in rows),
        "instances": len(rows),
    }
    checks = {
        "gram": metrics["max_gram_residual"] <= thresholds["gram"],
        "reconstruction": metrics["max_reconstruction_residual"] <= thresholds["reconstruction"],
        "spectrum": metrics["min_eigenvalue"] >= -thresholds["spectrum"]
        and metrics["max_eigenvalue"] <= 1.0 + thresholds["spectrum"],
    }
    return params["trials"], metrics, {}, checks, rows


EXPERIMENTS: Dict[str, Callable[[Dict[str, Any], int, bool], Outcome]] = {
    "qpke-correctness": _qpke_correctness,
    "cca-smoke": _cca_smoke,
    "o2h-check": _o2h_check,
    "rewind-bench": _rewind_bench,
    "prs-success-prob": _prs_success_prob,
    "prs-attack": _prs_attack,
    "qpke-attack": _qpke_attack,
    "basis-check": _basis_check,
}


def run(config: ExperimentConfig, write: bool = True) -> ExperimentReport:
    """
    Dispatch the configured experiment and build its report.

    With `write` the JSON report is saved (and the CSV when configured).
    """
    start = time.perf_counter()
    trials, metrics, intervals, checks, rows = EXPERIMENTS[config.experiment](
        dict(config.params), config.seed, config.debug
    )
    checks = {key: bool(value) for key, value in checks.items()}
    report = ExperimentReport(
        experiment=config.experiment,
        params=dict(config.params),
        seed=config.seed,
        trials=trials,
        metrics=metrics,
        intervals=intervals,
        checks=checks,
        passed=all(checks.values()),
        wall_time=time.perf_counter() - start,
        rows=rows,
    )
    if write:
        path = save_report(report, config.out_path)
        print(f"Report written to {path}")
        if config.csv_path:
            print(f"Per-trial rows written to {save_rows_csv(rows, config.csv_path)}")
    return report


def list_experiments() -> List[str]:
    return [f"{name:18s} {entry['description']}" for name, entry in EXPERIMENT_CONFIG.items()]


def print_summary(report: ExperimentReport) -> None:
    print(f"\n===== {report.experiment.upper()} (seed {report.seed}) =====")
    for key, value in report.metrics.items():
        if isinstance(value, float):
            print(f"{key}: {value:.6g}")
        elif isinstance(value, (int, bool, str)):
            print(f"{key}: {value}")
    print("\n===== CHECKS =====")
    for key, ok in report.checks.items():
        print(f"{'PASS' if ok else 'FAIL'}  {key}")
    print(f"\nOverall: {'PASS' if report.passed else 'FAIL'} ({report.wall_time:.2f}s)")


def cli(argv: Sequence[str]) -> int:
    """Command-line entry: returns the process exit code."""
    if "--list" in argv:
        print("\n".join(list_experiments()))
        return EXIT_CODES["pass"]
    try:
        config = parse_config(argv)
        report = run(config)
    except ConfigError as e:
        print(f"Usage error: {str(e)}")
        return EXIT_CODES["usage"]
    except QubitBudgetError as e:
        print(f"Qubit budget exceeded: {str(e)}")
        return EXIT_CODES["budget"]
    except SimulationError as e:
        print(f"Simulation error: {str(e)}")
        return EXIT_CODES["fail"]
    print_summary(report)
    return EXIT_CODES["pass"] if report.passed else EXIT_CODES["fail"]
