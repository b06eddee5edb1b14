#!/usr/bin/env python
"""
Test runner for hp-nitsche-coupling

Usage:
    python scripts/run_tests.py                 # Fast suite, stop at first failure
    python scripts/run_tests.py --slow          # Also run the full convergence sweeps
    python scripts/run_tests.py --only-slow     # Only the convergence sweeps
    python scripts/run_tests.py --threads 4     # Pin BLAS threads for the run
    python scripts/run_tests.py --full -k bem   # Keep going, extra args go to pytest
"""

import argparse
import os
import subprocess
import sys
from pathlib import Path

PROJECT_ROOT = Path(__file__).resolve().parent.parent


def build_command(options: argparse.Namespace, extra: list) -> list:
    command = [sys.executable, "-m", "pytest", str(PROJECT_ROOT / "tests")]
    if not options.full:
        command.append("-x")
    if options.only_slow:
        command.extend(["-m", "slow"])
    elif not options.slow:
        command.extend(["-m", "not slow"])
    return command + extra


def build_env(options: argparse.Namespace) -> dict:
    env = os.environ.copy()
    src = str(PROJECT_ROOT / "src")
    env["PYTHONPATH"] = os.pathsep.join(p for p in (src, env.get("PYTHONPATH")) if p)
    if options.threads is not None:
        env["HPNC_NUM_THREADS"] = str(options.threads)
    return env


def main() -> int:
    parser = argparse.ArgumentParser(description="Run the hp-nitsche-coupling tests")
    parser.add_argument("--slow", action="store_true", help="include tests marked slow")
    parser.add_argument("--only-slow", action="store_true", help="run only tests marked slow")
    parser.add_argument("--full", action="store_true", help="do not stop at the first failure")
    parser.add_argument("--threads", type=int, help="value for HPNC_NUM_THREADS")
    options, extra = parser.parse_known_args()

    try:
        import pytest
    except ImportError:
        print("Error: pytest is not installed. Install the dev group with: poetry install --with dev")
        return 1

    command = build_command(options, extra)
    env = build_env(options)
    print(f"pytest {pytest.__version__}, PYTHONPATH={env['PYTHONPATH']}")
    if options.threads is not None:
        print(f"HPNC_NUM_THREADS={options.threads}")
    print(" ".join(command[2:]))

    try:
        result = subprocess.run(command, env=env, cwd=str(PROJECT_ROOT), check=False)
    except (OSError, subprocess.SubprocessError) as e:
        print(f"Error running pytest: {e}")
        return 1

    print("All tests passed" if result.returncode == 0 else f"pytest exited with {result.returncode}")
    return result.returncode


if __name__ == "__main__":
    sys.exit(main())
