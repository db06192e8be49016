"""
Bounded explicit-state exploration.

bfs_check walks the reachable space level by level from the initial state,
checking the selected invariants on every state it discovers and rebuilding
shortest traces from predecessor links. random_walk is the seeded
long-run complement, replay_trace re-validates a recorded behavior.
"""

from __future__ import annotations

import random
from array import array
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Tuple

from app.codec import Trace, TraceStep, canonical_key, trace_to_dict
from app.config import DEFAULT_MAX_STATES, DEFAULT_THREADS, logger
from app.errors import MalformedInput, TraceReplayError
from app.helper import elapsed_ms, parallel_map, started_at
from app.invariants import invariant_order, resolve_invariants, violated_invariants
from app.protocol import (
    DEFAULT_VARIANT,
    ActionInstance,
    CommitRecord,
    ModelBounds,
    ProtocolVariant,
    ReplicaSetState,
    ServerId,
    ServerState,
    apply,
    enumerate_transitions,
    initial_state,
    successors,
    type_ok,
    why_not_enabled,
)

__all__ = [
    "CheckOptions",
    "CheckReport",
    "ReplayReport",
    "Trace",
    "TraceStep",
    "Violation",
    "bfs_check",
    "canonical_key",
    "random_walk",
    "replay_trace",
]


# frontier states expanded per batch; bounds the successor lists held at once
EXPAND_CHUNK = 4096


@dataclass(frozen=True)
class CheckOptions:
    max_states: int = DEFAULT_MAX_STATES
    stop_at_first: bool = False
    threads: int = DEFAULT_THREADS
    variant: ProtocolVariant = DEFAULT_VARIANT
    init_members: Optional[FrozenSet[ServerId]] = None


@dataclass(frozen=True)
class Violation:
    invariant: str
    trace: Trace

    def to_dict(self) -> dict:
        return {"invariant": self.invariant, "depth": len(self.trace), "trace": trace_to_dict(self.trace)}


@dataclass
class CheckReport:
    bounds: ModelBounds
    invariants: Tuple[str, ...]
    states_visited: int = 0
    transitions_explored: int = 0
    diameter: int = 0
    deadlocks: int = 0
    violations: List[Violation] = field(default_factory=list)
    complete: bool = True
    # every reported number is independent of thread scheduling
    deterministic: bool = True
    wall_time_ms: int = 0

    @property
    def ok(self) -> bool:
        return not self.violations

    def result_dict(self) -> dict:
        return {
            "complete": self.complete,
            "deterministic": self.deterministic,
            "statesVisited": self.states_visited,
            "transitionsExplored": self.transitions_explored,
            "diameter": self.diameter,
            "deadlocks": self.deadlocks,
            "violations": [v.to_dict() for v in self.violations],
        }


class _StateStore:
    """
    Visited set and predecessor links for one BFS run.

    Server records and committed sets are interned to small ids, and a state
    is stored as those ids packed into a single int. Predecessors and the
    action taken are kept in arrays indexed by discovery number.
    """

    _ID_BITS = 32

    def __init__(self, ids: Tuple[ServerId, ...]):
        self.ids = ids
        self._node_ids: Dict[ServerState, int] = {}
        self._nodes: List[ServerState] = []
        self._commit_ids: Dict[FrozenSet[CommitRecord], int] = {}
        self._commits: List[FrozenSet[CommitRecord]] = []
        self._numbers: Dict[int, int] = {}
        self._keys: List[int] = []
        self._parents = array("q")
        self._actions: List[Optional[ActionInstance]] = []

    def __len__(self) -> int:
        return len(self._keys)

    def key(self, state: ReplicaSetState) -> int:
        key = self._intern(self._commit_ids, self._commits, state.committed)
        for node in state.nodes:
            key = (key << self._ID_BITS) | self._intern(self._node_ids, self._nodes, node)
        return key

    @staticmethod
    def _intern(ids: dict, values: list, value) -> int:
        found = ids.get(value)
        if found is None:
            found = ids[value] = len(values)
            values.append(value)
        return found

    def __contains__(self, key: int) -> bool:
        return key in self._numbers

    def add(self, key: int, parent: int = -1, action: Optional[ActionInstance] = None) -> int:
        number = self._numbers[key] = len(self._keys)
        self._keys.append(key)
        self._parents.append(parent)
        self._actions.append(action)
        return number

    def state(self, number: int) -> ReplicaSetState:
        key = self._keys[number]
        mask = (1 << self._ID_BITS) - 1
        nodes = []
        for _ in self.ids:
            nodes.append(self._nodes[key & mask])
            key >>= self._ID_BITS
        nodes.reverse()
        return ReplicaSetState(self.ids, tuple(nodes), self._commits[key])

    def trace(self, number: int, bounds: ModelBounds) -> Trace:
        steps = []
        while self._parents[number] >= 0:
            steps.append(TraceStep(self._actions[number], self.state(number)))
            number = self._parents[number]
        steps.reverse()
        return Trace(bounds=bounds, init=self.state(number), steps=tuple(steps))


def bfs_check(
    bounds: ModelBounds,
    invariants: Iterable[str],
    opts: Optional[CheckOptions] = None,
) -> CheckReport:
    """
    Level-synchronous BFS over the reachable states at `bounds`.

    With stop_at_first the search ends after the first level containing a
    violation and reports every violation of that level, ordered by invariant
    then canonical key. Otherwise the earliest violation of each invariant is
    kept and the search runs to exhaustion or to the max_states budget.
    """
    opts = opts or CheckOptions()
    names = resolve_invariants(invariants)
    if opts.threads < 1:
        raise MalformedInput("threads must be at least 1")
    started = started_at()

    init = initial_state(bounds, opts.init_members)
    store = _StateStore(bounds.servers)
    store.add(store.key(init))
    report = CheckReport(bounds=bounds, invariants=tuple(names))

    found: Dict[str, int] = {}
    level_hits: List[Tuple[str, int, ReplicaSetState]] = [
        (name, 0, init) for name in violated_invariants(names, init, bounds)
    ]
    frontier: List[Tuple[int, ReplicaSetState]] = [(0, init)]
    depth = 0

    def expand(item: Tuple[int, ReplicaSetState]):
        return successors(item[1], bounds, opts.variant)

    def check(item: Tuple[int, ReplicaSetState]) -> List[str]:
        return violated_invariants(names, item[1], bounds)

    while True:
        for name, number, _ in level_hits:
            found.setdefault(name, number)
        if level_hits and opts.stop_at_first:
            break
        if not frontier:
            break

        next_frontier: List[Tuple[int, ReplicaSetState]] = []
        for start in range(0, len(frontier), EXPAND_CHUNK):
            chunk = frontier[start : start + EXPAND_CHUNK]
            for (number, _), transitions in zip(chunk, parallel_map(expand, chunk, opts.threads)):
                if not transitions:
                    report.deadlocks += 1
                report.transitions_explored += len(transitions)
                for action, nxt in transitions:
                    key = store.key(nxt)
                    if key in store:
                        continue
                    if len(store) >= opts.max_states:
                        report.complete = False
                        break
                    added = store.add(key, number, action)
                    # frontier states share the interned server records
                    next_frontier.append((added, store.state(added)))
                if not report.complete:
                    break
            if not report.complete:
                break

        if not next_frontier:
            frontier = next_frontier
            level_hits = []
            if report.complete:
                break
        else:
            depth += 1
            verdicts = parallel_map(check, next_frontier, opts.threads)
            level_hits = [(name, number, s) for (number, s), bad in zip(next_frontier, verdicts) for name in bad]
            if opts.stop_at_first:
                level_hits.sort(key=lambda hit: (invariant_order(hit[0]), canonical_key(hit[2])))
            logger.info("BFS level %d: %d new states, %d total.", depth, len(next_frontier), len(store))
            frontier = next_frontier

        if not report.complete:
            for name, number, _ in level_hits:
                found.setdefault(name, number)
            logger.warning("State budget of %d reached; exploration is incomplete.", opts.max_states)
            break

    if opts.stop_at_first and level_hits:
        hits = [(name, number) for name, number, _ in level_hits]
    else:
        hits = sorted(found.items(), key=lambda hit: invariant_order(hit[0]))
    report.violations = [Violation(name, store.trace(number, bounds)) for name, number in hits]
    report.states_visited = len(store)
    report.diameter = depth
    report.wall_time_ms = elapsed_ms(started)
    logger.info(
        "BFS done: %d states, %d transitions, diameter %d, %d violation(s).",
        report.states_visited,
        report.transitions_explored,
        report.diameter,
        len(report.violations),
    )
    return report


def random_walk(
    bounds: ModelBounds,
    steps: int,
    seed: int,
    invariants: Iterable[str],
    variant: ProtocolVariant = DEFAULT_VARIANT,
    init_members: Optional[FrozenSet[ServerId]] = None,
) -> Tuple[CheckReport, Trace]:
    """
    Seeded random behavior from the initial state. Stops at the first state
    violating a selected invariant, at a deadlock, or after `steps` actions.
    """
    if steps < 0:
        raise MalformedInput("steps must be non-negative")
    names = resolve_invariants(invariants)
    started = started_at()
    rng = random.Random(seed)

    init = state = initial_state(bounds, init_members)
    report = CheckReport(bounds=bounds, invariants=tuple(names))
    seen = {state}
    taken: List[TraceStep] = []
    bad = violated_invariants(names, state, bounds)

    while not bad and len(taken) < steps:
        transitions = enumerate_transitions(state, bounds, variant)
        report.transitions_explored += len(transitions)
        if not transitions:
            report.deadlocks = 1
            logger.debug("Random walk deadlocked after %d steps.", len(taken))
            break
        action, state = transitions[rng.randrange(len(transitions))]
        taken.append(TraceStep(action, state))
        seen.add(state)
        bad = violated_invariants(names, state, bounds)

    trace = Trace(bounds=bounds, init=init, steps=tuple(taken), seed=seed)
    report.violations = [Violation(name, trace) for name in bad]
    report.states_visited = len(seen)
    report.diameter = len(taken)
    report.wall_time_ms = elapsed_ms(started)
    return report, trace


@dataclass
class ReplayReport:
    steps: int
    violations: List[Tuple[int, str]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def result_dict(self) -> dict:
        return {
            "steps": self.steps,
            "violations": [{"step": step, "invariant": name} for step, name in self.violations],
        }


def replay_trace(
    trace: Trace,
    invariants: Iterable[str] = (),
    variant: ProtocolVariant = DEFAULT_VARIANT,
) -> ReplayReport:
    """
    Re-validate every step of `trace` and evaluate `invariants` on each state.

    Raises TraceReplayError naming the first step whose action is not enabled
    or whose recorded state differs from the computed successor. Step 0 is the
    initial state.
    """
    names = resolve_invariants(invariants)
    bounds = trace.bounds
    if not type_ok(trace.init, bounds):
        raise TraceReplayError(0, "initial state is not TypeOK under the trace bounds")

    report = ReplayReport(steps=len(trace))
    state = trace.init
    report.violations.extend((0, name) for name in violated_invariants(names, state, bounds))
    for i, step in enumerate(trace.steps, start=1):
        try:
            reason = why_not_enabled(state, step.action, bounds, variant)
        except MalformedInput as e:
            raise TraceReplayError(i, str(e)) from e
        if reason is not None:
            raise TraceReplayError(i, f"{step.action.describe()} is not enabled ({reason})")
        state = apply(state, step.action, bounds, variant)
        if state != step.state:
            raise TraceReplayError(i, "recorded state differs from the successor of the previous state")
        report.violations.extend((i, name) for name in violated_invariants(names, state, bounds))
    return report
