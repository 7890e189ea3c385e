#!/usr/bin/env python3
"""
Determinism check: identical config and seed give byte-identical series.csv,
serially and across worker processes.

Usage:
    python scripts/verify_determinism.py [--problem configs/linear_canonical.json]

Exit Codes:
    0: all runs identical
    1: outputs differ
"""
import argparse
import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

from src.harness.commands import ExperimentConfig, cmd_run  # noqa: E402
from src.harness.console import ConsoleReporter  # noqa: E402
from src.harness.manifest import sha256_of_file  # noqa: E402


def run_once(base: dict, out: Path, threads: int) -> str:
    cfg = ExperimentConfig.model_validate({**base, "out": out, "threads": threads})
    cmd_run(cfg, ConsoleReporter(quiet=True))
    return sha256_of_file(out / "series.csv")


def main() -> int:
    p = argparse.ArgumentParser(description="Check that ensemble runs are reproducible.")
    p.add_argument("--problem", default="configs/linear_canonical.json")
    p.add_argument("--kmax", type=int, default=20_000)
    p.add_argument("--trials", type=int, default=8)
    p.add_argument("--seed", type=int, default=7)
    args = p.parse_args()

    base = {
        "problem": args.problem,
        "k_max": args.kmax,
        "trials": args.trials,
        "seed": args.seed,
        "checkpoints": 60,
    }
    print("=" * 70)
    print("DETERMINISM CHECK")
    print("=" * 70)
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        digests = {
            "serial (1st)": run_once(base, tmp / "a", threads=1),
            "serial (2nd)": run_once(base, tmp / "b", threads=1),
            "parallel (2 workers)": run_once(base, tmp / "c", threads=2),
        }
    for label, digest in digests.items():
        print(f"  {label:<22} {digest}")

    if len(set(digests.values())) == 1:
        print("\nPASS: series.csv is byte-identical across runs")
        return 0
    print("\nFAIL: series.csv differs between runs")
    return 1


if __name__ == "__main__":
    sys.exit(main())
