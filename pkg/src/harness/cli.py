"""
Command-line interface.

Usage:
    python main.py run --problem configs/linear_canonical.json --trials 200 --kmax 1000000
    python main.py verify-lemmas --config configs/experiment_lemmas.json
    python main.py mixing --problem configs/two_state_chain.json

Exit codes: 0 success, 1 checks failed or crash, 2 simulation aborted
(partial output written), 3 configuration or capability error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from pydantic import ValidationError

from src.core.errors import ProblemConfigError, TTSAError
from src.core.config import Config
from src.core.logger import log_crash, set_console_level, set_run_context, setup_logger
from src.core.run_events import EventComponent, EventPhase, RunEventLog, log_phase
from src.harness.commands import COMMANDS, ExperimentConfig
from src.harness.console import ConsoleReporter

logger = setup_logger("cli")

# flag dest -> ExperimentConfig field
FLAG_FIELDS = {
    "problem": "problem",
    "seed": "seed",
    "out": "out",
    "threads": "threads",
    "alpha0": "alpha0",
    "beta0": "beta0",
    "kmax": "k_max",
    "trials": "trials",
    "checkpoints": "checkpoints",
    "negative_control": "negative_control",
    "mixing_horizon": "mixing_horizon",
}


def _global_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", type=Path, help="experiment config (JSON)")
    p.add_argument("--problem", type=Path, help="problem config (JSON)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--threads", type=int, help="worker processes for the trial ensemble")
    p.add_argument("--alpha0", type=float)
    p.add_argument("--beta0", type=float)
    p.add_argument("--kmax", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--checkpoints", type=int, help="approximate number of log-spaced checkpoints")
    p.add_argument("--negative-control", action="store_true", default=None)
    p.add_argument("--mixing-horizon", type=int)
    p.add_argument("--quiet", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    parent = _global_flags()
    parser = argparse.ArgumentParser(
        prog="markov-ttsa",
        description="Two-time-scale stochastic approximation under Markovian noise.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[parent], help="simulate an ensemble and export series")
    sub.add_parser("rate-certify", parents=[parent], help="run and check the fitted rate and bound")
    sub.add_parser("verify-lemmas", parents=[parent], help="check the lemma inequalities")
    sub.add_parser("demo-pr", parents=[parent], help="Polyak-Ruppert averaging demonstration")
    sub.add_parser("mixing", parents=[parent], help="mixing-time and bias diagnostics")
    return parser


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    """Flag > experiment config file > environment defaults."""
    data: dict = {}
    if args.config is not None:
        try:
            data = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except FileNotFoundError as e:
            raise ProblemConfigError(f"experiment config not found: {args.config}", field="config") from e
        except json.JSONDecodeError as e:
            raise ProblemConfigError(f"experiment config is not valid JSON: {e}", field="config") from e
    for dest, name in FLAG_FIELDS.items():
        value = getattr(args, dest, None)
        if value is not None:
            data[name] = value
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        field = ".".join(str(p) for p in first["loc"])
        raise ProblemConfigError(f"invalid experiment config: {field}: {first['msg']}", field=field) from e


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    console = ConsoleReporter(quiet=args.quiet)
    set_console_level("WARNING" if args.quiet else Config.LOG_LEVEL)
    try:
        cfg = resolve_config(args)
        set_run_context(args.command, RunEventLog.start_session(cfg.out))
        log_phase(EventPhase.SETUP, EventComponent.HARNESS, "start", command=args.command)
        _, code = COMMANDS[args.command](cfg, console)
        log_phase(EventPhase.EXPORT, EventComponent.HARNESS, "done", exit_code=code)
        return code
    except TTSAError as e:
        logger.error(f"{args.command} failed: {e}")
        print(json.dumps(e.to_dict(), default=str), file=sys.stderr)
        return e.exit_code
    except Exception as e:
        path = log_crash(e, context=f"command={args.command}")
        console.error(f"unexpected error: {type(e).__name__}: {e} (report: {path})")
        return 1


if __name__ == "__main__":
    sys.exit(main())
