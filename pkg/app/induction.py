"""
Counterexample-to-induction engine.

A candidate invariant is a set of conjuncts. Consecution is checked goal by
goal: for every state satisfying the candidate (and the goal itself) and
every enabled transition of a selected action kind, the goal must still hold
afterwards. Results are kept per (action kind, conjunct) in an 8 x 20 goal
matrix.

Two drivers produce the pre-states: seeded random sampling, and exhaustive
enumeration of every bounded TypeOK state satisfying the candidate.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace
from enum import Enum
from itertools import product
from math import comb
from typing import Dict, FrozenSet, Iterable, Iterator, List, Optional, Sequence, Tuple

from app.codec import action_to_dict, canonical_key, dump_json, state_to_dict
from app.config import DEFAULT_THREADS, EXHAUSTIVE_BUDGET, logger
from app.errors import BudgetExceeded, MalformedInput
from app.helper import derive_rng, elapsed_ms, parallel_map, started_at
from app.invariants import (
    COMMIT_CONJUNCTS,
    CONJUNCTS,
    LOCAL_CONJUNCTS,
    TYPE_OK,
    eval_invariant,
    holds_all,
    invariant_order,
)
from app.protocol import (
    ACTION_ORDER,
    DEFAULT_VARIANT,
    ActionInstance,
    ActionKind,
    CommitRecord,
    ModelBounds,
    ProtocolVariant,
    ReplicaSetState,
    Role,
    ServerId,
    ServerState,
    enumerate_transitions,
    initial_state,
    nonempty_subsets,
    sorted_servers,
)

SAMPLE_CHUNK = 256


# --- Goal matrix ---


class CellStatus(str, Enum):
    PASS = "pass"
    CTI = "cti"
    NOT_EXERCISED = "not-exercised"


@dataclass
class GoalCell:
    checked: int = 0
    ctis: int = 0

    @property
    def status(self) -> CellStatus:
        if self.ctis:
            return CellStatus.CTI
        return CellStatus.PASS if self.checked else CellStatus.NOT_EXERCISED


class GoalMatrix:
    """One cell per (action kind, conjunct): 8 x 20 = 160 cells."""

    def __init__(self):
        self.cells: Dict[Tuple[ActionKind, str], GoalCell] = {
            (kind, conjunct): GoalCell() for kind in ACTION_ORDER for conjunct in CONJUNCTS
        }

    def __len__(self) -> int:
        return len(self.cells)

    def cell(self, kind: ActionKind, conjunct: str) -> GoalCell:
        return self.cells[(ActionKind(kind), conjunct)]

    def record(self, kind: ActionKind, conjunct: str, held: bool) -> None:
        cell = self.cells[(kind, conjunct)]
        cell.checked += 1
        if not held:
            cell.ctis += 1

    def merge(self, other: "GoalMatrix") -> None:
        for key, cell in other.cells.items():
            mine = self.cells[key]
            mine.checked += cell.checked
            mine.ctis += cell.ctis

    def count(self, status: CellStatus) -> int:
        return sum(1 for cell in self.cells.values() if cell.status is status)

    def to_dict(self) -> dict:
        return {
            "actions": [kind.value for kind in ACTION_ORDER],
            "conjuncts": list(CONJUNCTS),
            "summary": {
                "pass": self.count(CellStatus.PASS),
                "cti": self.count(CellStatus.CTI),
                "notExercised": self.count(CellStatus.NOT_EXERCISED),
            },
            "rows": [
                {
                    "action": kind.value,
                    "cells": [
                        {
                            "conjunct": conjunct,
                            "status": self.cells[(kind, conjunct)].status.value,
                            "checked": self.cells[(kind, conjunct)].checked,
                            "ctis": self.cells[(kind, conjunct)].ctis,
                        }
                        for conjunct in CONJUNCTS
                    ],
                }
                for kind in ACTION_ORDER
            ],
        }


_SYMBOLS = {CellStatus.PASS: ".", CellStatus.CTI: "X", CellStatus.NOT_EXERCISED: "-"}


def goal_matrix_render(matrix: GoalMatrix, fmt: str = "text") -> str:
    """Render the matrix as a text table (rows: actions, columns: conjuncts) or as JSON."""
    if fmt == "json":
        return dump_json(matrix.to_dict())
    if fmt != "text":
        raise MalformedInput(f"unknown matrix format: {fmt!r}")

    width = max(len(kind.value) for kind in ACTION_ORDER)
    lines = [
        f"Goal matrix ({len(ACTION_ORDER)} actions x {len(CONJUNCTS)} conjuncts): "
        f"{matrix.count(CellStatus.PASS)} pass, {matrix.count(CellStatus.CTI)} cti, "
        f"{matrix.count(CellStatus.NOT_EXERCISED)} not exercised",
        " " * width + "".join(f"{i:>3}" for i in range(1, len(CONJUNCTS) + 1)),
    ]
    for kind in ACTION_ORDER:
        row = "".join(f"{_SYMBOLS[matrix.cells[(kind, c)].status]:>3}" for c in CONJUNCTS)
        lines.append(f"{kind.value:<{width}}{row}")
    lines.append("")
    lines.append("  . pass   X cti   - not exercised")
    lines.extend(f"{i:>3} {name}" for i, name in enumerate(CONJUNCTS, start=1))
    return "\n".join(lines) + "\n"


# --- Results ---


@dataclass(frozen=True)
class CtiRecord:
    pre_state: ReplicaSetState
    action: ActionInstance
    post_state: ReplicaSetState
    violated: str

    @property
    def goal(self) -> Tuple[ActionKind, str]:
        return (self.action.kind, self.violated)

    def sort_key(self) -> tuple:
        return (
            ACTION_ORDER.index(self.action.kind),
            invariant_order(self.violated),
            canonical_key(self.pre_state),
            self.action.sort_key(),
        )

    def to_dict(self) -> dict:
        return {
            "goal": {"action": self.action.kind.value, "conjunct": self.violated},
            "violated": self.violated,
            "action": action_to_dict(self.action),
            "preState": state_to_dict(self.pre_state),
            "postState": state_to_dict(self.post_state),
        }


@dataclass
class ConsecutionResult:
    mode: str
    candidate: Tuple[str, ...]
    goals: Tuple[str, ...]
    actions: Tuple[ActionKind, ...]
    matrix: GoalMatrix = field(default_factory=GoalMatrix)
    ctis: List[CtiRecord] = field(default_factory=list)
    drawn: int = 0
    accepted: int = 0
    space_estimate: Optional[int] = None
    wall_time_ms: int = 0

    @property
    def discarded(self) -> int:
        return self.drawn - self.accepted

    @property
    def acceptance_permille(self) -> int:
        return self.accepted * 1000 // self.drawn if self.drawn else 0

    @property
    def ok(self) -> bool:
        return not self.ctis

    def cti_goals(self) -> FrozenSet[Tuple[ActionKind, str]]:
        return frozenset(c.goal for c in self.ctis)

    def result_dict(self, cti_limit: Optional[int] = None) -> dict:
        shown = self.ctis if cti_limit is None else self.ctis[:cti_limit]
        out = {
            "mode": self.mode,
            "candidate": list(self.candidate),
            "goals": list(self.goals),
            "actions": [kind.value for kind in self.actions],
            "drawn": self.drawn,
            "accepted": self.accepted,
            "discarded": self.discarded,
            "acceptanceRatePermille": self.acceptance_permille,
        }
        if self.space_estimate is not None:
            out["spaceEstimate"] = self.space_estimate
        out["matrix"] = self.matrix.to_dict()
        out["ctiCount"] = len(self.ctis)
        out["ctis"] = [c.to_dict() for c in shown]
        return out


@dataclass
class _Partial:
    drawn: int = 0
    accepted: int = 0
    matrix: GoalMatrix = field(default_factory=GoalMatrix)
    ctis: List[CtiRecord] = field(default_factory=list)


def _normalise(
    conjuncts: Iterable[str], actions: Iterable[ActionKind], candidate: Optional[Iterable[str]]
) -> Tuple[Tuple[str, ...], Tuple[str, ...], Tuple[ActionKind, ...]]:
    goals = sorted(set(conjuncts), key=invariant_order)
    unknown = [g for g in goals if g not in CONJUNCTS]
    if unknown:
        raise MalformedInput(f"not conjuncts of the inductive invariant: {unknown}")
    hypothesis = set(goals if candidate is None else candidate) | {TYPE_OK}
    if any(h not in CONJUNCTS for h in hypothesis):
        raise MalformedInput(f"candidate contains non-conjuncts: {sorted(hypothesis - set(CONJUNCTS))}")
    kinds = tuple(kind for kind in ACTION_ORDER if kind in {ActionKind(a) for a in actions})
    return tuple(sorted(hypothesis, key=invariant_order)), tuple(goals), kinds


def _check_state(
    state: ReplicaSetState,
    bounds: ModelBounds,
    goals: Sequence[str],
    actions: Sequence[ActionKind],
    variant: ProtocolVariant,
    out: _Partial,
) -> None:
    # a goal is checked relative to the candidate plus the goal itself
    held = [g for g in goals if eval_invariant(g, state, bounds)]
    if not held:
        return
    for action, post in enumerate_transitions(state, bounds, variant):
        if action.kind not in actions:
            continue
        for goal in held:
            ok = eval_invariant(goal, post, bounds)
            out.matrix.record(action.kind, goal, ok)
            if not ok:
                out.ctis.append(CtiRecord(state, action, post, goal))


def _finish(result: ConsecutionResult, partials: Iterable[_Partial], started: float) -> ConsecutionResult:
    seen = set()
    for part in partials:
        result.drawn += part.drawn
        result.accepted += part.accepted
        result.matrix.merge(part.matrix)
        for cti in part.ctis:
            key = (canonical_key(cti.pre_state), cti.action, cti.violated)
            if key not in seen:
                seen.add(key)
                result.ctis.append(cti)
    result.ctis.sort(key=CtiRecord.sort_key)
    result.wall_time_ms = elapsed_ms(started)
    if result.accepted == 0:
        logger.warning("No state satisfied the candidate; the %s run is vacuous.", result.mode)
    logger.info(
        "Consecution (%s): %d drawn, %d accepted, %d CTI(s), %d/%d goals pass.",
        result.mode,
        result.drawn,
        result.accepted,
        len(result.ctis),
        result.matrix.count(CellStatus.PASS),
        len(result.matrix),
    )
    return result


# --- Initiation ---


@dataclass
class InitiationResult:
    bounds: ModelBounds
    # one entry per initial member set checked
    checks: List[Tuple[FrozenSet[ServerId], Dict[str, bool]]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(all(verdicts.values()) for _, verdicts in self.checks)

    def result_dict(self) -> dict:
        return {
            "initialConfigs": [
                {
                    "members": sorted_servers(members),
                    "pass": all(verdicts.values()),
                    "conjuncts": [{"conjunct": name, "holds": verdicts[name]} for name in CONJUNCTS],
                }
                for members, verdicts in self.checks
            ]
        }


def check_initiation(
    bounds: ModelBounds,
    members: Optional[Iterable[ServerId]] = None,
    all_member_sets: bool = False,
) -> InitiationResult:
    """Evaluate every conjunct on the initial state (or on one per non-empty initial member set)."""
    result = InitiationResult(bounds)
    if all_member_sets:
        member_sets = list(nonempty_subsets(bounds.servers))
    else:
        member_sets = [frozenset(bounds.servers if members is None else members)]
    for config in member_sets:
        state = initial_state(bounds, config)
        result.checks.append((config, {name: eval_invariant(name, state, bounds) for name in CONJUNCTS}))
    return result


# --- Random states ---


def _random_subset(servers: Sequence[ServerId], rng: random.Random) -> FrozenSet[ServerId]:
    return frozenset(s for s in servers if rng.random() < 0.5)


def _uniform_state(bounds: ModelBounds, rng: random.Random) -> ReplicaSetState:
    T, L, V = bounds.max_term, bounds.max_log_len, bounds.max_config_version
    nodes = []
    for _ in bounds.servers:
        log = tuple(rng.randint(0, T) for _ in range(rng.randint(0, L)))
        nodes.append(
            ServerState(
                log=log,
                term=rng.randint(0, T),
                role=rng.choice((Role.PRIMARY, Role.SECONDARY)),
                config=_random_subset(bounds.servers, rng),
                config_version=rng.randint(0, V),
                config_term=rng.randint(0, T),
            )
        )
    pairs = [CommitRecord(i, t) for i in range(L + 1) for t in range(T + 1)]
    committed = frozenset(c for c in pairs if rng.random() < 0.5)
    return ReplicaSetState(bounds.servers, tuple(nodes), committed)


def _biased_state(bounds: ModelBounds, rng: random.Random) -> ReplicaSetState:
    T, L, V = bounds.max_term, bounds.max_log_len, bounds.max_config_version
    servers = bounds.servers
    configs = [
        (frozenset(rng.sample(servers, rng.randint(1, len(servers)))), rng.randint(1, V), rng.randint(0, T))
        for _ in range(rng.randint(1, 2))
    ]
    nodes = []
    for _ in servers:
        term = rng.randint(0, T)
        members, version, config_term = rng.choice(configs)
        primary = rng.random() < 0.25
        if primary:
            config_term = term
        else:
            config_term = min(config_term, term)
        top = term if primary else rng.randint(0, term)
        log = tuple(sorted(rng.randint(0, top) for _ in range(rng.randint(0, L))))
        nodes.append(
            ServerState(
                log=log,
                term=term,
                role=Role.PRIMARY if primary else Role.SECONDARY,
                config=members,
                config_version=version,
                config_term=config_term,
            )
        )
    held = sorted({CommitRecord(i, x) for node in nodes for i, x in enumerate(node.log, start=1)})
    committed = frozenset(c for c in held if rng.random() < 0.3)
    return ReplicaSetState(servers, tuple(nodes), committed)


def _perturb(state: ReplicaSetState, bounds: ModelBounds, rng: random.Random) -> ReplicaSetState:
    T, L, V = bounds.max_term, bounds.max_log_len, bounds.max_config_version
    server = rng.choice(state.ids)
    node = state.node(server)
    what = rng.randrange(7)
    if what == 0:
        node = replace(node, log=tuple(rng.randint(0, T) for _ in range(rng.randint(0, L))))
    elif what == 1:
        node = replace(node, term=rng.randint(0, T))
    elif what == 2:
        node = replace(node, role=Role.SECONDARY if node.is_primary else Role.PRIMARY)
    elif what == 3:
        node = replace(node, config=_random_subset(state.ids, rng))
    elif what == 4:
        node = replace(node, config_version=rng.randint(0, V))
    elif what == 5:
        node = replace(node, config_term=rng.randint(0, T))
    else:
        record = CommitRecord(rng.randint(0, L), rng.randint(0, T))
        return ReplicaSetState(state.ids, state.nodes, state.committed ^ {record})
    return state.with_nodes({server: node})


def _walk_state(bounds: ModelBounds, rng: random.Random, variant: ProtocolVariant) -> ReplicaSetState:
    state = initial_state(bounds)
    length = rng.randint(0, 2 * (bounds.max_term + bounds.max_log_len + bounds.max_config_version))
    for _ in range(length):
        transitions = enumerate_transitions(state, bounds, variant)
        if not transitions:
            break
        state = transitions[rng.randrange(len(transitions))][1]
    if rng.random() < 0.5:
        state = _perturb(state, bounds, rng)
    return state


def draw_state(bounds: ModelBounds, rng: random.Random, variant: ProtocolVariant = DEFAULT_VARIANT) -> ReplicaSetState:
    """
    One bounded TypeOK state. Mixes uniform draws (every TypeOK state has
    non-zero probability), structurally biased draws, and perturbed random
    walks from the initial state.
    """
    mode = rng.random()
    if mode < 0.2:
        return _uniform_state(bounds, rng)
    if mode < 0.6:
        return _biased_state(bounds, rng)
    return _walk_state(bounds, rng, variant)


def random_state(bounds: ModelBounds, seed: int) -> ReplicaSetState:
    return draw_state(bounds, random.Random(seed))


# --- Consecution: sampling ---


def check_consecution_sampled(
    bounds: ModelBounds,
    samples: int,
    seed: int,
    conjuncts: Iterable[str] = CONJUNCTS,
    actions: Iterable[ActionKind] = ACTION_ORDER,
    candidate: Optional[Iterable[str]] = None,
    threads: int = DEFAULT_THREADS,
    variant: ProtocolVariant = DEFAULT_VARIANT,
) -> ConsecutionResult:
    """
    Draw `samples` states, keep those satisfying the candidate, and check
    every goal across every enabled transition of the selected kinds.
    Sample i is drawn from its own generator derived from (seed, i), so the
    result is the same for any thread count.
    """
    if samples < 1:
        raise MalformedInput("samples must be at least 1")
    hypothesis, goals, kinds = _normalise(conjuncts, actions, candidate)
    started = started_at()

    def run_chunk(start: int) -> _Partial:
        part = _Partial()
        for i in range(start, min(start + SAMPLE_CHUNK, samples)):
            state = draw_state(bounds, derive_rng(seed, i), variant)
            part.drawn += 1
            if holds_all(hypothesis, state, bounds):
                part.accepted += 1
                _check_state(state, bounds, goals, kinds, variant, part)
        logger.debug("Sample chunk at %d: %d/%d accepted.", start, part.accepted, part.drawn)
        return part

    chunks = list(range(0, samples, SAMPLE_CHUNK))
    result = ConsecutionResult("sample", hypothesis, goals, kinds)
    return _finish(result, parallel_map(run_chunk, chunks, threads), started)


# --- Consecution: exhaustive enumeration ---


def _server_profiles(bounds: ModelBounds, local_checks: Sequence) -> List[ServerState]:
    T, L, V = bounds.max_term, bounds.max_log_len, bounds.max_config_version
    terms = range(T + 1)
    logs = [log for n in range(L + 1) for log in product(terms, repeat=n)]
    configs = [frozenset()] + list(nonempty_subsets(bounds.servers))
    profiles = []
    for log, term, role, config, version, config_term in product(
        logs, terms, (Role.SECONDARY, Role.PRIMARY), configs, range(V + 1), terms
    ):
        node = ServerState(tuple(log), term, role, config, version, config_term)
        if all(check(node) for check in local_checks):
            profiles.append(node)
    return profiles


def _commit_universe_size(bounds: ModelBounds, hypothesis: Sequence[str]) -> int:
    if {"CommittedEntryIndexesAreNonZero", "CommittedTermMatchesEntry"} & set(hypothesis):
        return bounds.max_log_len * (bounds.max_term + 1)
    return (bounds.max_log_len + 1) * (bounds.max_term + 1)


def _commit_universe(bounds: ModelBounds, nodes: Sequence[ServerState], hypothesis: Sequence[str]) -> List[CommitRecord]:
    if "CommittedTermMatchesEntry" in hypothesis:
        return sorted({CommitRecord(i, x) for node in nodes for i, x in enumerate(node.log, start=1)})
    low = 1 if "CommittedEntryIndexesAreNonZero" in hypothesis else 0
    return [CommitRecord(i, t) for i in range(low, bounds.max_log_len + 1) for t in range(bounds.max_term + 1)]


def _subsets(items: Sequence[CommitRecord]) -> Iterator[FrozenSet[CommitRecord]]:
    n = len(items)
    for mask in range(1 << n):
        yield frozenset(items[i] for i in range(n) if mask >> i & 1)


def _hypothesis_parts(candidate: Iterable[str]):
    hypothesis = sorted(set(candidate) | {TYPE_OK}, key=invariant_order)
    local_checks = [LOCAL_CONJUNCTS[c] for c in hypothesis if c in LOCAL_CONJUNCTS]
    commit_free = [
        c for c in hypothesis if c not in LOCAL_CONJUNCTS and c not in COMMIT_CONJUNCTS and c != TYPE_OK
    ]
    with_commits = [c for c in hypothesis if c in COMMIT_CONJUNCTS]
    return hypothesis, local_checks, commit_free, with_commits


def _profile_count(bounds: ModelBounds, hypothesis: Sequence[str]) -> int:
    """len(_server_profiles(...)) for the local conjuncts in `hypothesis`, counted without building any."""
    T, L, V = bounds.max_term, bounds.max_log_len, bounds.max_config_version
    active = set(hypothesis)
    monotone = "TermsOfEntriesGrowMonotonically" in active

    def logs(top: int) -> int:
        # sequences of length <= L over 0..top; non-decreasing ones are multisets
        if monotone:
            return sum(comb(n + top, n) for n in range(L + 1))
        return sum((top + 1) ** n for n in range(L + 1))

    per_term = 0
    for term in range(T + 1):
        per_term += logs(T) * (T + 1)
        primary_top = term if "PrimaryTermAtLeastAsLargeAsLogTerms" in active else T
        primary_config_terms = 1 if "PrimaryConfigTermEqualToCurrentTerm" in active else T + 1
        per_term += logs(primary_top) * primary_config_terms
    configs = 2 ** len(bounds.servers) - (1 if "ConfigsNonEmpty" in active else 0)
    return per_term * configs * (V + 1)


def _space_estimate(bounds: ModelBounds, hypothesis: Sequence[str]) -> int:
    return _profile_count(bounds, hypothesis) ** len(bounds.servers) * 2 ** _commit_universe_size(bounds, hypothesis)


def exhaustive_space_estimate(bounds: ModelBounds, candidate: Iterable[str]) -> int:
    """Upper bound on the states the exhaustive check would construct for `candidate`."""
    hypothesis, _, _, _ = _hypothesis_parts(candidate)
    return _space_estimate(bounds, hypothesis)


def _candidate_states(
    bounds: ModelBounds,
    candidate: Iterable[str],
    profiles: Sequence[ServerState],
    heads: Sequence[ServerState],
) -> Iterator[Tuple[int, Optional[ReplicaSetState]]]:
    # Yields (states constructed since the last yield, accepted state or None at the end).
    # Pruning only drops states failing the candidate.
    hypothesis, _, commit_free, with_commits = _hypothesis_parts(candidate)
    constructed = 0
    for head in heads:
        for tail in product(profiles, repeat=len(bounds.servers) - 1):
            nodes = (head,) + tail
            base = ReplicaSetState(bounds.servers, nodes, frozenset())
            constructed += 1
            if not holds_all(commit_free, base):
                continue
            for committed in _subsets(_commit_universe(bounds, nodes, hypothesis)):
                if committed:
                    constructed += 1
                    state = ReplicaSetState(bounds.servers, nodes, committed)
                else:
                    state = base
                if holds_all(with_commits, state):
                    yield constructed, state
                    constructed = 0
    if constructed:
        yield constructed, None


def enumerate_candidate_states(bounds: ModelBounds, candidate: Iterable[str]) -> Iterator[ReplicaSetState]:
    """
    Every bounded TypeOK state satisfying `candidate`, in lexicographic order
    of server profiles, then committed subsets.
    """
    _, local_checks, _, _ = _hypothesis_parts(candidate)
    profiles = _server_profiles(bounds, local_checks)
    for _, state in _candidate_states(bounds, candidate, profiles, profiles):
        if state is not None:
            yield state


def check_consecution_exhaustive(
    bounds: ModelBounds,
    conjuncts: Iterable[str] = CONJUNCTS,
    actions: Iterable[ActionKind] = ACTION_ORDER,
    candidate: Optional[Iterable[str]] = None,
    budget: int = EXHAUSTIVE_BUDGET,
    threads: int = DEFAULT_THREADS,
    variant: ProtocolVariant = DEFAULT_VARIANT,
) -> ConsecutionResult:
    """
    Check every goal from every bounded TypeOK state satisfying the candidate.

    Raises BudgetExceeded, before any enumeration, when the space estimate is
    larger than `budget`. Work is split by the first server's profile.
    """
    hypothesis, goals, kinds = _normalise(conjuncts, actions, candidate)
    estimate = _space_estimate(bounds, hypothesis)
    if estimate > budget:
        raise BudgetExceeded(estimate, budget)
    _, local_checks, _, _ = _hypothesis_parts(hypothesis)
    profiles = _server_profiles(bounds, local_checks)
    logger.info("Exhaustive consecution over at most %d states.", estimate)
    started = started_at()

    def run_head(head: ServerState) -> _Partial:
        part = _Partial()
        for constructed, state in _candidate_states(bounds, hypothesis, profiles, [head]):
            part.drawn += constructed
            if state is not None:
                part.accepted += 1
                _check_state(state, bounds, goals, kinds, variant, part)
        return part

    result = ConsecutionResult("exhaustive", hypothesis, goals, kinds, space_estimate=estimate)
    return _finish(result, parallel_map(run_head, profiles, threads), started)
