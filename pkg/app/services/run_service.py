from __future__ import annotations

from dataclasses import dataclass
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from pydantic.alias_generators import to_camel

from app.codec import bounds_to_dict, dump_json, load_trace, trace_to_dict
from app.config import DEFAULT_MAX_STATES, DEFAULT_THREADS, EXHAUSTIVE_BUDGET, TOOL_VERSION, logger
from app.errors import MalformedInput
from app.explorer import CheckOptions, bfs_check, random_walk, replay_trace
from app.induction import (
    check_consecution_exhaustive,
    check_consecution_sampled,
    check_initiation,
    goal_matrix_render,
)
from app.invariants import CONJUNCTS, INVARIANT_NAMES, INVARIANTS, resolve_conjuncts, resolve_invariants
from app.protocol import ACTION_ORDER, ActionKind, ModelBounds, ProtocolVariant

EXIT_OK = 0
EXIT_FOUND = 1
EXIT_USAGE = 2
EXIT_INCOMPLETE = 3


class RunConfig(BaseModel):
    """Everything that determines a run; embedded verbatim in its report."""

    model_config = ConfigDict(alias_generator=to_camel, populate_by_name=True, frozen=True, extra="forbid")

    command: Literal["check", "induction", "simulate", "replay", "invariants"]
    servers: List[str] = Field(default_factory=lambda: ["n1", "n2", "n3"])
    max_term: int = 2
    max_log_len: int = 1
    max_config_version: int = 2
    invariants: List[str] = Field(default_factory=lambda: list(INVARIANT_NAMES))
    mode: Literal["sample", "exhaustive", "initiation"] = "sample"
    candidate: List[str] = Field(default_factory=lambda: list(CONJUNCTS))
    goals: List[str] = Field(default_factory=lambda: list(CONJUNCTS))
    actions: List[str] = Field(default_factory=lambda: [kind.value for kind in ACTION_ORDER])
    samples: int = Field(10_000, ge=1)
    seed: int = Field(0, ge=0)
    steps: int = Field(100, ge=0)
    max_states: int = Field(DEFAULT_MAX_STATES, ge=1)
    stop_at_first: bool = False
    budget: int = Field(EXHAUSTIVE_BUDGET, ge=0)
    threads: int = Field(DEFAULT_THREADS, ge=1)
    disable_reconfig_guards: bool = False
    send_config_updates_term: bool = False
    init_members: Optional[List[str]] = None
    all_init_members: bool = False
    trace: Optional[str] = None
    cti_limit: int = Field(20, ge=0)

    @model_validator(mode="after")
    def all_member_sets_need_initiation(self) -> "RunConfig":
        if self.all_init_members and (self.command, self.mode) != ("induction", "initiation"):
            raise ValueError("initial member set 'all' is only valid for induction in initiation mode")
        return self

    @classmethod
    def build(cls, **values) -> "RunConfig":
        try:
            return cls(**values)
        except ValidationError as e:
            first = e.errors()[0]
            where = ".".join(str(part) for part in first["loc"])
            raise MalformedInput(f"{where}: {first['msg']}" if where else first["msg"]) from e

    def bounds(self) -> ModelBounds:
        return ModelBounds.of(self.servers, self.max_term, self.max_log_len, self.max_config_version)

    def variant(self) -> ProtocolVariant:
        return ProtocolVariant(
            reconfig_guards=not self.disable_reconfig_guards,
            send_config_updates_term=self.send_config_updates_term,
        )

    def to_dict(self) -> dict:
        return self.model_dump(mode="json", by_alias=True)


@dataclass
class RunOutcome:
    exit_code: int
    verdict: str
    report: Optional[dict] = None
    text: Optional[str] = None
    states: int = 0
    findings: int = 0
    wall_time_ms: int = 0

    def render(self) -> str:
        return self.text if self.report is None else dump_json(self.report)


def _envelope(cfg: RunConfig, result: dict, wall_time_ms: int, bounds: Optional[ModelBounds] = None) -> dict:
    # wallTimeMs is the only field that differs between identical runs
    report = {"toolVersion": TOOL_VERSION, "command": cfg.command, "config": cfg.to_dict()}
    if bounds is not None:
        report["bounds"] = bounds_to_dict(bounds)
    report["result"] = result
    report["wallTimeMs"] = wall_time_ms
    return report


class RunService:
    """Runs one configured command and turns its outcome into a report and an exit code."""

    def execute(self, cfg: RunConfig) -> RunOutcome:
        handler = getattr(self, f"_run_{cfg.command}")
        logger.info("Running %s.", cfg.command)
        return handler(cfg)

    def _run_check(self, cfg: RunConfig) -> RunOutcome:
        names = resolve_invariants(cfg.invariants)
        opts = CheckOptions(
            max_states=cfg.max_states,
            stop_at_first=cfg.stop_at_first,
            threads=cfg.threads,
            variant=cfg.variant(),
            init_members=frozenset(cfg.init_members) if cfg.init_members else None,
        )
        bounds = cfg.bounds()
        report = bfs_check(bounds, names, opts)
        result = {"invariants": list(report.invariants), **report.result_dict()}
        if report.violations:
            code, verdict = EXIT_FOUND, "violation"
        elif not report.complete:
            code, verdict = EXIT_INCOMPLETE, "incomplete"
        else:
            code, verdict = EXIT_OK, "ok"
        return RunOutcome(
            code,
            verdict,
            _envelope(cfg, result, report.wall_time_ms, bounds),
            states=report.states_visited,
            findings=len(report.violations),
            wall_time_ms=report.wall_time_ms,
        )

    def _run_simulate(self, cfg: RunConfig) -> RunOutcome:
        names = resolve_invariants(cfg.invariants)
        bounds = cfg.bounds()
        report, trace = random_walk(
            bounds,
            cfg.steps,
            cfg.seed,
            names,
            variant=cfg.variant(),
            init_members=frozenset(cfg.init_members) if cfg.init_members else None,
        )
        result = {
            "invariants": list(report.invariants),
            "seed": cfg.seed,
            "stepsTaken": len(trace),
            "deadlocked": bool(report.deadlocks),
            "statesVisited": report.states_visited,
            "violated": [v.invariant for v in report.violations],
            "trace": trace_to_dict(trace),
        }
        code, verdict = (EXIT_FOUND, "violation") if report.violations else (EXIT_OK, "ok")
        return RunOutcome(
            code,
            verdict,
            _envelope(cfg, result, report.wall_time_ms, bounds),
            states=report.states_visited,
            findings=len(report.violations),
            wall_time_ms=report.wall_time_ms,
        )

    def _run_replay(self, cfg: RunConfig) -> RunOutcome:
        if not cfg.trace:
            raise MalformedInput("replay needs a trace file")
        trace = load_trace(cfg.trace)
        names = resolve_invariants(cfg.invariants)
        replay = replay_trace(trace, names, cfg.variant())
        result = {"trace": cfg.trace, "invariants": names, **replay.result_dict()}
        code, verdict = (EXIT_FOUND, "violation") if replay.violations else (EXIT_OK, "ok")
        return RunOutcome(
            code,
            verdict,
            _envelope(cfg, result, 0, trace.bounds),
            states=replay.steps + 1,
            findings=len(replay.violations),
        )

    def _run_induction(self, cfg: RunConfig) -> RunOutcome:
        bounds = cfg.bounds()
        if cfg.mode == "initiation":
            initiation = check_initiation(bounds, cfg.init_members, all_member_sets=cfg.all_init_members)
            code, verdict = (EXIT_OK, "ok") if initiation.ok else (EXIT_FOUND, "cti")
            result = {"mode": "initiation", **initiation.result_dict()}
            return RunOutcome(code, verdict, _envelope(cfg, result, 0, bounds), findings=int(not initiation.ok))

        candidate = resolve_conjuncts(cfg.candidate)
        goals = resolve_conjuncts(cfg.goals)
        actions = [ActionKind(a) for a in cfg.actions]
        if cfg.mode == "exhaustive":
            run = check_consecution_exhaustive(
                bounds, goals, actions, candidate=candidate, budget=cfg.budget, threads=cfg.threads, variant=cfg.variant()
            )
        else:
            run = check_consecution_sampled(
                bounds, cfg.samples, cfg.seed, goals, actions, candidate=candidate, threads=cfg.threads, variant=cfg.variant()
            )
        code, verdict = (EXIT_FOUND, "cti") if run.ctis else (EXIT_OK, "ok")
        return RunOutcome(
            code,
            verdict,
            _envelope(cfg, run.result_dict(cfg.cti_limit), run.wall_time_ms, bounds),
            text=goal_matrix_render(run.matrix),
            states=run.accepted,
            findings=len(run.ctis),
            wall_time_ms=run.wall_time_ms,
        )

    def _run_invariants(self, cfg: RunConfig) -> RunOutcome:
        width = max(len(d.name) for d in INVARIANTS)
        lines = []
        for i, d in enumerate(INVARIANTS, start=1):
            lines.append(f"{i:>2}. {d.name:<{width}}  [{d.group or '-'}]  {d.summary}")
        return RunOutcome(EXIT_OK, "ok", text="\n".join(lines) + "\n")
