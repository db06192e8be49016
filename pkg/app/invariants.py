"""
Named state predicates: TypeOK, the twenty conjuncts of the inductive
invariant, their conjunction (MRRInd) and the two top-level safety properties.

Every predicate is evaluated on a single state. Only TypeOK reads the bounds.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from typing import Callable, Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple

from app.errors import MalformedInput, MrrError, UnknownInvariant
from app.protocol import (
    ModelBounds,
    ReplicaSetState,
    ServerId,
    ServerState,
    every_quorum_meets,
    log_has,
    quorums_overlap,
    type_ok,
)

Predicate = Callable[[ReplicaSetState], bool]


@dataclass(frozen=True)
class InvariantDef:
    name: str
    group: Optional[str]
    summary: str
    predicate: Optional[Predicate]


# --- Active configurations ---


def config_disabled(state: ReplicaSetState, s: ServerId) -> bool:
    """Every quorum of config[s] contains a server holding a strictly newer config."""
    node = state.node(s)
    # (term, version) order is is_newer_config
    stamp = (node.config_term, node.config_version)
    newer = [n for n, other in state.items() if (other.config_term, other.config_version) > stamp]
    return every_quorum_meets(node.config, newer)


@lru_cache(maxsize=256)
def _active_ids(state: ReplicaSetState) -> FrozenSet[ServerId]:
    return frozenset(s for s in state.ids if not config_disabled(state, s))


def active_config_set(state: ReplicaSetState) -> Set[ServerId]:
    return set(_active_ids(state))


def _max_config_term(state: ReplicaSetState) -> int:
    return max(node.config_term for node in state.nodes)


def _primaries(state: ReplicaSetState) -> List[ServerState]:
    return [node for node in state.nodes if node.is_primary]


# --- Per-server conjuncts ---
# These only look at one server record; the exhaustive enumerator prunes with them.


def _local_primary_config_term(node: ServerState) -> bool:
    return not node.is_primary or node.config_term == node.term


def _local_primary_term_bounds_log(node: ServerState) -> bool:
    return not node.is_primary or all(x <= node.term for x in node.log)


def _local_monotone_log(node: ServerState) -> bool:
    return all(a <= b for a, b in zip(node.log, node.log[1:]))


def _local_config_non_empty(node: ServerState) -> bool:
    return bool(node.config)


def _all_servers(local: Callable[[ServerState], bool]) -> Predicate:
    return lambda state: all(local(node) for node in state.nodes)


# --- E1: election safety ---


def election_safety(state: ReplicaSetState) -> bool:
    terms = [p.term for p in _primaries(state)]
    return len(terms) == len(set(terms))


def config_version_and_term_unique(state: ReplicaSetState) -> bool:
    seen: Dict[Tuple[int, int], FrozenSet[ServerId]] = {}
    for node in state.nodes:
        key = (node.config_version, node.config_term)
        if seen.setdefault(key, node.config) != node.config:
            return False
    return True


def primary_in_term_contains_newest_config_of_term(state: ReplicaSetState) -> bool:
    for p in _primaries(state):
        for node in state.nodes:
            if node.config_term == p.term and node.config_version > p.config_version:
                return False
    return True


def active_configs_overlap(state: ReplicaSetState) -> bool:
    active = sorted(_active_ids(state))
    for s, t in combinations(active, 2):
        if not quorums_overlap(state.node(s).config, state.node(t).config):
            return False
    return True


def active_configs_safe_at_terms(state: ReplicaSetState) -> bool:
    # Quantified over config terms; the largest config term is the binding one.
    newest = _max_config_term(state)
    current = [n for n, node in state.items() if node.term >= newest]
    return all(every_quorum_meets(state.node(s).config, current) for s in _active_ids(state))


# --- L1 / L2: logs ---


def log_entry_in_term_implies_config_in_term(state: ReplicaSetState) -> bool:
    newest = _max_config_term(state)
    return all(x <= newest for node in state.nodes for x in node.log)


def primary_has_entries_it_created(state: ReplicaSetState) -> bool:
    for p in _primaries(state):
        for node in state.nodes:
            for i, x in enumerate(node.log, start=1):
                if x == p.term and not log_has(p.log, i, x):
                    return False
    return True


def log_matching(state: ReplicaSetState) -> bool:
    for a, b in combinations(state.nodes, 2):
        # indexes where the logs agree must form a prefix
        diverged = False
        for x, y in zip(a.log, b.log):
            if x != y:
                diverged = True
            elif diverged:
                return False
    return True


def uniform_log_entries_in_term(state: ReplicaSetState) -> bool:
    for s in state.nodes:
        for i, x in enumerate(s.log, start=1):
            for t in state.nodes:
                for j in range(i, len(t.log) + 1):
                    if t.log[j - 1] == x and t.log[i - 1] != x:
                        return False
    return True


# --- C1 / C2: committed entries ---


def committed_entry_indexes_are_non_zero(state: ReplicaSetState) -> bool:
    return all(c.index >= 1 for c in state.committed)


def committed_term_matches_entry(state: ReplicaSetState) -> bool:
    return all(any(log_has(node.log, c.index, c.term) for node in state.nodes) for c in state.committed)


def leader_completeness(state: ReplicaSetState) -> bool:
    for p in _primaries(state):
        for c in state.committed:
            if c.term < p.term and not log_has(p.log, c.index, c.term):
                return False
    return True


def logs_later_than_committed_must_have_committed(state: ReplicaSetState) -> bool:
    for node in state.nodes:
        for c in state.committed:
            if any(x > c.term for x in node.log) and not log_has(node.log, c.index, c.term):
                return False
    return True


def active_configs_overlap_with_committed_entry(state: ReplicaSetState) -> bool:
    if not state.committed:
        return True
    active = _active_ids(state)
    for c in state.committed:
        holders = [n for n, node in state.items() if log_has(node.log, c.index, c.term)]
        if not all(every_quorum_meets(state.node(s).config, holders) for s in active):
            return False
    return True


def newer_configs_disable_commits_in_older_term(state: ReplicaSetState) -> bool:
    newest = _max_config_term(state)
    for p in _primaries(state):
        if p.term < newest:
            ahead = [n for n, node in state.items() if node.term > p.term]
            if not every_quorum_meets(p.config, ahead):
                return False
    return True


# --- Safety ---


def state_machine_safety(state: ReplicaSetState) -> bool:
    terms_at: Dict[int, int] = {}
    for c in state.committed:
        if terms_at.setdefault(c.index, c.term) != c.term:
            return False
    return True


# --- Registry ---

TYPE_OK = "TypeOK"
MRR_IND = "MRRInd"
STATE_MACHINE_SAFETY = "StateMachineSafety"

_CONJUNCT_DEFS: Tuple[InvariantDef, ...] = (
    InvariantDef(TYPE_OK, "T", "state variables are well typed (and within bounds when bounds are given)", None),
    InvariantDef("ElectionSafety", "E1", "no two primaries share a term", election_safety),
    InvariantDef(
        "PrimaryConfigTermEqualToCurrentTerm",
        "E1",
        "a primary's config term equals its current term",
        _all_servers(_local_primary_config_term),
    ),
    InvariantDef(
        "ConfigVersionAndTermUnique",
        "E1",
        "equal (version, term) stamps carry equal member sets",
        config_version_and_term_unique,
    ),
    InvariantDef(
        "PrimaryInTermContainsNewestConfigOfTerm",
        "E1",
        "a primary holds the highest config version of its term",
        primary_in_term_contains_newest_config_of_term,
    ),
    InvariantDef(
        "ActiveConfigsOverlap", "E1", "quorums of any two active configs intersect", active_configs_overlap
    ),
    InvariantDef(
        "ActiveConfigsSafeAtTerms",
        "E1",
        "every quorum of an active config holds a term at least every config term",
        active_configs_safe_at_terms,
    ),
    InvariantDef(
        "LogEntryInTermImpliesConfigInTerm",
        "L1",
        "no log entry is newer than the newest config term",
        log_entry_in_term_implies_config_in_term,
    ),
    InvariantDef(
        "PrimaryHasEntriesItCreated",
        "L1",
        "every entry of a primary's term is in the primary's log at the same index",
        primary_has_entries_it_created,
    ),
    InvariantDef("LogMatching", "L1", "logs agreeing at an index agree on the whole prefix", log_matching),
    InvariantDef(
        "PrimaryTermAtLeastAsLargeAsLogTerms",
        "L2",
        "a primary's log holds no entry newer than its term",
        _all_servers(_local_primary_term_bounds_log),
    ),
    InvariantDef(
        "TermsOfEntriesGrowMonotonically",
        "L2",
        "each log is non-decreasing",
        _all_servers(_local_monotone_log),
    ),
    InvariantDef(
        "UniformLogEntriesInTerm",
        "L2",
        "a term's first entry sits at the same index in every log containing it later",
        uniform_log_entries_in_term,
    ),
    InvariantDef(
        "CommittedEntryIndexesAreNonZero",
        "C1",
        "committed indexes are at least 1",
        committed_entry_indexes_are_non_zero,
    ),
    InvariantDef(
        "CommittedTermMatchesEntry",
        "C1",
        "every committed pair is in some server's log",
        committed_term_matches_entry,
    ),
    InvariantDef(
        "LeaderCompleteness",
        "C2",
        "a primary holds every entry committed in an earlier term",
        leader_completeness,
    ),
    InvariantDef(
        "LogsLaterThanCommittedMustHaveCommitted",
        "C2",
        "a log with an entry newer than a committed pair holds that pair",
        logs_later_than_committed_must_have_committed,
    ),
    InvariantDef(
        "ActiveConfigsOverlapWithCommittedEntry",
        "C2",
        "every quorum of an active config holds every committed pair",
        active_configs_overlap_with_committed_entry,
    ),
    InvariantDef(
        "NewerConfigsDisableCommitsInOlderTerm",
        "C2",
        "a primary behind the newest config term has no quorum in its own term",
        newer_configs_disable_commits_in_older_term,
    ),
    InvariantDef("ConfigsNonEmpty", "N", "every config has a member", _all_servers(_local_config_non_empty)),
)

CONJUNCTS: Tuple[str, ...] = tuple(d.name for d in _CONJUNCT_DEFS)

INVARIANTS: Tuple[InvariantDef, ...] = _CONJUNCT_DEFS + (
    InvariantDef(
        STATE_MACHINE_SAFETY, None, "no two different terms are committed at one index", state_machine_safety
    ),
    InvariantDef(MRR_IND, None, "conjunction of the twenty conjuncts", None),
)

INVARIANT_NAMES: Tuple[str, ...] = tuple(d.name for d in INVARIANTS)
_BY_NAME: Dict[str, InvariantDef] = {d.name: d for d in INVARIANTS}
_ORDER: Dict[str, int] = {name: i for i, name in enumerate(INVARIANT_NAMES)}

GROUPS: Dict[str, Tuple[str, ...]] = {}
for _d in _CONJUNCT_DEFS:
    GROUPS.setdefault(_d.group, ())
    GROUPS[_d.group] += (_d.name,)

# Conjuncts decided by one server record at a time
LOCAL_CONJUNCTS: Dict[str, Callable[[ServerState], bool]] = {
    "PrimaryConfigTermEqualToCurrentTerm": _local_primary_config_term,
    "PrimaryTermAtLeastAsLargeAsLogTerms": _local_primary_term_bounds_log,
    "TermsOfEntriesGrowMonotonically": _local_monotone_log,
    "ConfigsNonEmpty": _local_config_non_empty,
}

# Conjuncts that read the committed set; all of them hold vacuously when it is empty
COMMIT_CONJUNCTS: FrozenSet[str] = frozenset(GROUPS["C1"]) | {
    "LeaderCompleteness",
    "LogsLaterThanCommittedMustHaveCommitted",
    "ActiveConfigsOverlapWithCommittedEntry",
}


def invariant_order(name: str) -> int:
    return _ORDER[name]


def get_invariant(name: str) -> InvariantDef:
    try:
        return _BY_NAME[name]
    except KeyError:
        raise UnknownInvariant(name) from None


def eval_invariant(name: str, state: ReplicaSetState, bounds: Optional[ModelBounds] = None) -> bool:
    """
    Evaluate one named invariant. Lookups that fall outside the state's domain
    (possible on states that are not TypeOK) count as predicate failure.
    """
    definition = get_invariant(name)
    if name == TYPE_OK:
        return type_ok(state, bounds)
    if name == MRR_IND:
        return all(eval_invariant(c, state, bounds) for c in CONJUNCTS)
    try:
        return bool(definition.predicate(state))
    except (MrrError, AttributeError, TypeError, KeyError, IndexError, ValueError):
        return False


def eval_all(state: ReplicaSetState, bounds: Optional[ModelBounds] = None) -> Dict[str, bool]:
    return {name: eval_invariant(name, state, bounds) for name in INVARIANT_NAMES}


def first_violated(
    names: Iterable[str], state: ReplicaSetState, bounds: Optional[ModelBounds] = None
) -> Optional[str]:
    for name in names:
        if not eval_invariant(name, state, bounds):
            return name
    return None


def holds_all(names: Iterable[str], state: ReplicaSetState, bounds: Optional[ModelBounds] = None) -> bool:
    return first_violated(names, state, bounds) is None


def violated_invariants(
    names: Sequence[str], state: ReplicaSetState, bounds: Optional[ModelBounds] = None
) -> List[str]:
    """
    The members of `names` that `state` violates, in the order given. Each
    conjunct is evaluated once even when MRRInd is selected alongside it.
    """
    verdicts: Dict[str, bool] = {}

    def holds(name: str) -> bool:
        if name not in verdicts:
            if name == MRR_IND:
                verdicts[name] = all([holds(c) for c in CONJUNCTS])
            else:
                verdicts[name] = eval_invariant(name, state, bounds)
        return verdicts[name]

    return [name for name in names if not holds(name)]


def _split_tokens(tokens: Iterable[str]) -> List[str]:
    if isinstance(tokens, str):
        tokens = [tokens]
    out = []
    for token in tokens:
        out.extend(part.strip() for part in token.split(","))
    return [t for t in out if t]


def resolve_invariants(tokens: Iterable[str]) -> List[str]:
    """
    Expand a user selection (names, group labels T/E1/L1/L2/C1/C2/N,
    comma-separated or not) into invariant names in catalog order.
    """
    selected = set()
    for token in _split_tokens(tokens):
        if token in GROUPS:
            selected.update(GROUPS[token])
        else:
            selected.add(get_invariant(token).name)
    return sorted(selected, key=invariant_order)


def resolve_conjuncts(tokens: Iterable[str]) -> List[str]:
    """Like resolve_invariants, restricted to conjuncts; MRRInd expands to all twenty."""
    selected = set()
    for name in resolve_invariants(tokens):
        if name == MRR_IND:
            selected.update(CONJUNCTS)
        elif name not in CONJUNCTS:
            raise MalformedInput(f"{name!r} is not a conjunct of {MRR_IND}")
        else:
            selected.add(name)
    return sorted(selected, key=invariant_order)
