"""
QPKE Rewinding Simulator
Main entry point for the application

Runs reproducible experiments on quantum public-key encryption from PRFs:
correctness and CCA mechanics of the scheme, the one-way-to-hiding bound,
unbounded rewinding by alternating measurements, and the key-guessing attack
on keyed pseudorandom state families.
"""

import sys

from config.config import DATA_DIR, REPORTS_DIR
from src.experiments.runner import cli
from src.utils.report_writer import list_reports, summarize_reports


def init_project():
    """
    Initialize project directories.

    Creates the data and report directories used by the experiment runner.
    """
    for data_dir in [DATA_DIR, REPORTS_DIR]:
        data_dir.mkdir(parents=True, exist_ok=True)

    print("Project initialized successfully!")
    print(f"Data directory: {DATA_DIR}")


def show_project_status():
    """
    Display current project status.

    Shows saved reports per experiment and which ones passed their checks.
    """
    summary = summarize_reports()

    print("\n===== PROJECT STATUS =====")
    print(f"Reports saved: {summary['total_reports']}")
    print(f"Reports passing: {summary['passed']}")

    if summary["by_experiment"]:
        print("\n===== EXPERIMENTS =====")
        for experiment, status in summary["by_experiment"].items():
            print(f"{experiment}:")
            print(f"  Runs: {status['runs']}")
            print(f"  Passed: {int(status['passed'])}")
            print(f"  Mean wall time: {status['mean_wall_time']:.2f}s")

        print("\n===== LATEST REPORTS =====")
        print(list_reports().tail(10).to_string(index=False))

    print("\n===== NEXT STEPS =====")
    if summary["total_reports"] == 0:
        print("1. List experiments (run python main.py --list)")
        print("2. Run one (run python main.py --experiment qpke-correctness --seed 1)")
    else:
        print("1. Export per-trial rows with --csv FILE for any experiment")


if __name__ == "__main__":
    args = sys.argv[1:]
    if not args or args == ["--status"]:
        init_project()
        show_project_status()
        sys.exit(0)
    init_project()
    sys.exit(cli(args))
