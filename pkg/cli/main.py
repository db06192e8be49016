"""
Command-line front end.

    python main.py check --servers 3 --max-term 2 --max-log-len 1 --max-config-version 2
    python main.py induction --mode exhaustive --servers 2 --max-term 2
    python main.py simulate --steps 200 --seed 7
    python main.py replay trace.json
    python main.py invariants
    python main.py history

Exit codes: 0 nothing found, 1 violation or CTI found, 2 usage or input
error, 3 state budget exhausted before the check completed.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from app.config import DEFAULT_MAX_STATES, DEFAULT_THREADS, EXHAUSTIVE_BUDGET, RECORD_RUNS, logger
from app.errors import MalformedInput, MrrError
from app.invariants import CONJUNCTS, INVARIANT_NAMES, resolve_conjuncts
from app.protocol import ACTION_ORDER
from app.services.ledger_service import LedgerService
from app.services.run_service import EXIT_OK, EXIT_USAGE, RunConfig, RunOutcome, RunService

_ACTION_NAMES = {kind.value: kind for kind in ACTION_ORDER}


def _csv(value: str) -> List[str]:
    return [part.strip() for part in value.split(",") if part.strip()]


def _servers(value: str) -> List[str]:
    if value.isdigit():
        count = int(value)
        if count < 1:
            raise argparse.ArgumentTypeError("at least one server is needed")
        return [f"n{i}" for i in range(1, count + 1)]
    names = _csv(value)
    if not names:
        raise argparse.ArgumentTypeError("empty server list")
    return names


def _actions(value: str) -> List[str]:
    names = _csv(value)
    for name in names:
        if name not in _ACTION_NAMES:
            raise argparse.ArgumentTypeError(f"unknown action {name!r}")
    return names


def _add_bounds(p: argparse.ArgumentParser, servers: str = "3", max_term: int = 2) -> None:
    p.add_argument("--servers", type=_servers, default=_servers(servers), help="server count or comma-separated ids")
    p.add_argument("--max-term", type=int, default=max_term)
    p.add_argument("--max-log-len", type=int, default=1)
    p.add_argument("--max-config-version", type=int, default=2)
    p.add_argument("--threads", type=int, default=DEFAULT_THREADS, help="worker threads (env MRR_THREADS)")
    p.add_argument("--disable-reconfig-guards", action="store_true", help="drop Reconfig's quorum guards")
    p.add_argument("--send-config-updates-term", action="store_true", help="SendConfig also raises the receiver's term")
    p.add_argument("--init-members", default=None, help="initial member set (comma-separated) or 'all'")
    p.add_argument("-o", "--output", default=None, help="write the JSON report here instead of stdout")
    p.add_argument("--record", action="store_true", help="record the run in the ledger (env MRR_RECORD_RUNS)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mrr", description="MongoRaftReconfig model checker and CTI engine")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="breadth-first reachability check")
    _add_bounds(p)
    p.add_argument("--invariants", type=_csv, default=list(INVARIANT_NAMES), help="names or groups, comma-separated")
    p.add_argument("--max-states", type=int, default=DEFAULT_MAX_STATES)
    p.add_argument("--stop-at-first", action="store_true")

    p = sub.add_parser("induction", help="initiation and consecution checks of the inductive invariant")
    _add_bounds(p, servers="2")
    p.add_argument("--mode", choices=("sample", "exhaustive", "initiation"), default="sample")
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--candidate", type=_csv, default=None, help="hypothesis conjuncts (default: all twenty)")
    p.add_argument("--conjuncts", type=_csv, default=None, help="goal conjuncts (default: the candidate)")
    p.add_argument("--drop-conjunct", action="append", default=[], help="remove a conjunct from the candidate")
    p.add_argument("--actions", type=_actions, default=list(_ACTION_NAMES), help="action kinds to check")
    p.add_argument("--budget", type=int, default=EXHAUSTIVE_BUDGET, help="exhaustive state-space ceiling")
    p.add_argument("--cti-limit", type=int, default=20, help="CTI records written to the report")
    p.add_argument("--matrix", action="store_true", help="print the goal matrix table to stdout")

    p = sub.add_parser("simulate", help="seeded random walk")
    _add_bounds(p)
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--invariants", type=_csv, default=list(INVARIANT_NAMES))

    p = sub.add_parser("replay", help="re-validate a trace file")
    p.add_argument("trace")
    p.add_argument("--invariants", type=_csv, default=list(INVARIANT_NAMES))
    p.add_argument("--disable-reconfig-guards", action="store_true")
    p.add_argument("--send-config-updates-term", action="store_true")
    p.add_argument("-o", "--output", default=None)
    p.add_argument("--record", action="store_true")

    sub.add_parser("invariants", help="list the invariant catalog")

    p = sub.add_parser("history", help="list recorded runs")
    p.add_argument("--limit", type=int, default=20)
    return parser


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    values = {"command": args.command}
    if hasattr(args, "servers"):
        values.update(
            servers=args.servers,
            max_term=args.max_term,
            max_log_len=args.max_log_len,
            max_config_version=args.max_config_version,
            threads=args.threads,
        )
        if args.init_members == "all":
            values["all_init_members"] = True
        elif args.init_members:
            values["init_members"] = _csv(args.init_members)
    if hasattr(args, "disable_reconfig_guards"):
        values["disable_reconfig_guards"] = args.disable_reconfig_guards
        values["send_config_updates_term"] = args.send_config_updates_term
    if hasattr(args, "invariants"):
        values["invariants"] = args.invariants
    if args.command == "check":
        values.update(max_states=args.max_states, stop_at_first=args.stop_at_first)
    elif args.command == "simulate":
        values.update(steps=args.steps, seed=args.seed)
    elif args.command == "replay":
        values["trace"] = args.trace
    elif args.command == "induction":
        candidate = resolve_conjuncts(args.candidate) if args.candidate else list(CONJUNCTS)
        dropped = set(resolve_conjuncts(args.drop_conjunct)) if args.drop_conjunct else set()
        candidate = [c for c in candidate if c not in dropped]
        goals = resolve_conjuncts(args.conjuncts) if args.conjuncts else candidate
        values.update(
            mode=args.mode,
            samples=args.samples,
            seed=args.seed,
            candidate=candidate,
            goals=goals,
            actions=args.actions,
            budget=args.budget,
            cti_limit=args.cti_limit,
        )
    return RunConfig.build(**values)


def _emit(outcome: RunOutcome, output: Optional[str], matrix: bool = False) -> None:
    if outcome.report is None:
        sys.stdout.write(outcome.text or "")
        return
    rendered = outcome.render()
    if output:
        try:
            Path(output).write_text(rendered, encoding="utf-8")
        except OSError as e:
            raise MalformedInput(f"cannot write report file {output!r}: {e.strerror}") from e
        logger.info("Report written to %s.", output)
    if matrix and outcome.text:
        sys.stdout.write(outcome.text)
    elif not output:
        sys.stdout.write(rendered)


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE

    try:
        if args.command == "history":
            ledger = LedgerService()
            sys.stdout.write(ledger.render(ledger.recent(args.limit)))
            return EXIT_OK

        cfg = _config_from_args(args)
        outcome = RunService().execute(cfg)
        _emit(outcome, getattr(args, "output", None), getattr(args, "matrix", False))
    except MrrError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE

    if getattr(args, "record", False) or (RECORD_RUNS and args.command != "invariants"):
        try:
            LedgerService().record(cfg, outcome)
        except Exception as e:
            logger.warning("Could not record the run: %s", e)
    return outcome.exit_code


if __name__ == "__main__":
    sys.exit(run())
