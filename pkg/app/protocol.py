"""
MongoRaftReconfig protocol semantics.

Pure, value-level model of the replica set: state representation, quorum and
config-ordering math, guards and effects of the eight protocol actions, and
transition enumeration under finite bounds. Every function here is
side-effect free, so values can be shared freely between threads.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import lru_cache
from typing import Callable, Dict, FrozenSet, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from app.errors import ActionNotEnabled, MalformedInput

ServerId = str

_SERVER_PATTERN = re.compile(r"^(.*?)(\d+)$")


def server_order(server: ServerId) -> Tuple[str, int, str]:
    """Total order on server ids: numeric suffixes compare as numbers (n2 < n10)."""
    match = _SERVER_PATTERN.match(server)
    if match:
        return (match.group(1), int(match.group(2)), server)
    return (server, -1, server)


def sorted_servers(servers: Iterable[ServerId]) -> List[ServerId]:
    return sorted(servers, key=server_order)


# --- Domain types ---


class Role(str, Enum):
    PRIMARY = "Primary"
    SECONDARY = "Secondary"


class ActionKind(str, Enum):
    # Declaration order is the order of the next-state relation and of every report.
    CLIENT_REQUEST = "ClientRequest"
    GET_ENTRIES = "GetEntries"
    ROLLBACK_ENTRIES = "RollbackEntries"
    COMMIT_ENTRY = "CommitEntry"
    SEND_CONFIG = "SendConfig"
    RECONFIG = "Reconfig"
    BECOME_LEADER = "BecomeLeader"
    UPDATE_TERMS = "UpdateTerms"


ACTION_ORDER: Tuple[ActionKind, ...] = tuple(ActionKind)
_KIND_INDEX = {kind: i for i, kind in enumerate(ACTION_ORDER)}

_PAIR_KINDS = frozenset(
    {ActionKind.GET_ENTRIES, ActionKind.ROLLBACK_ENTRIES, ActionKind.SEND_CONFIG, ActionKind.UPDATE_TERMS}
)
_QUORUM_KINDS = frozenset({ActionKind.COMMIT_ENTRY, ActionKind.BECOME_LEADER})


class ModelBounds(BaseModel):
    """Finite scope of a checking run."""

    model_config = ConfigDict(frozen=True)

    servers: Tuple[ServerId, ...] = Field(..., min_length=1)
    max_term: int = Field(..., ge=1)
    max_log_len: int = Field(..., ge=0)
    max_config_version: int = Field(..., ge=1)

    @field_validator("servers")
    @classmethod
    def canonical_servers(cls, value: Tuple[ServerId, ...]) -> Tuple[ServerId, ...]:
        if any(not s or not s.strip() for s in value):
            raise ValueError("server ids must be non-empty")
        if len(set(value)) != len(value):
            raise ValueError("server ids must be unique")
        return tuple(sorted_servers(value))

    @classmethod
    def of(
        cls,
        servers: Union[int, Sequence[ServerId]],
        max_term: int,
        max_log_len: int,
        max_config_version: int,
    ) -> "ModelBounds":
        """Build bounds, accepting a server count (n1..nN) or explicit ids."""
        if isinstance(servers, int):
            servers = tuple(f"n{i}" for i in range(1, servers + 1))
        try:
            return cls(
                servers=tuple(servers),
                max_term=max_term,
                max_log_len=max_log_len,
                max_config_version=max_config_version,
            )
        except ValidationError as e:
            raise MalformedInput(f"invalid bounds: {e.errors()[0]['msg']}") from e


@dataclass(frozen=True)
class ConfigStamp:
    version: int
    term: int


@dataclass(frozen=True, order=True)
class CommitRecord:
    index: int
    term: int


@dataclass(frozen=True)
class ServerState:
    log: Tuple[int, ...] = ()
    term: int = 0
    role: Role = Role.SECONDARY
    config: FrozenSet[ServerId] = frozenset()
    config_version: int = 1
    config_term: int = 0
    _hash: Optional[int] = field(default=None, init=False, repr=False, compare=False)

    def __hash__(self) -> int:
        # computed on first use
        if self._hash is None:
            fields = (self.log, self.term, self.role, self.config, self.config_version, self.config_term)
            object.__setattr__(self, "_hash", hash(fields))
        return self._hash

    @property
    def stamp(self) -> ConfigStamp:
        return ConfigStamp(self.config_version, self.config_term)

    @property
    def is_primary(self) -> bool:
        return self.role is Role.PRIMARY


@lru_cache(maxsize=None)
def _server_index(ids: Tuple[ServerId, ...]) -> Dict[ServerId, int]:
    return {s: i for i, s in enumerate(ids)}


@dataclass(frozen=True)
class ReplicaSetState:
    """
    Full protocol state. Per-server variables are stored as one record per
    server, in server order; `committed` is the global set of commit records.
    """

    ids: Tuple[ServerId, ...]
    nodes: Tuple[ServerState, ...]
    committed: FrozenSet[CommitRecord] = frozenset()
    _index: Dict[ServerId, int] = field(default=None, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        if len(self.ids) != len(self.nodes):
            raise MalformedInput("server ids and server states differ in length")
        object.__setattr__(self, "_index", _server_index(self.ids))

    @classmethod
    def from_servers(
        cls, servers: Dict[ServerId, ServerState], committed: Iterable[CommitRecord] = ()
    ) -> "ReplicaSetState":
        ids = tuple(sorted_servers(servers))
        return cls(ids, tuple(servers[s] for s in ids), frozenset(committed))

    def node(self, server: ServerId) -> ServerState:
        try:
            return self.nodes[self._index[server]]
        except KeyError:
            raise MalformedInput(f"unknown server: {server!r}") from None

    def has_server(self, server: ServerId) -> bool:
        return server in self._index

    def items(self) -> Iterator[Tuple[ServerId, ServerState]]:
        return zip(self.ids, self.nodes)

    def with_nodes(self, changes: Dict[ServerId, ServerState]) -> "ReplicaSetState":
        nodes = list(self.nodes)
        for server, node in changes.items():
            nodes[self._index[server]] = node
        return ReplicaSetState(self.ids, tuple(nodes), self.committed)

    def with_committed(self, record: CommitRecord) -> "ReplicaSetState":
        return ReplicaSetState(self.ids, self.nodes, self.committed | {record})


@dataclass(frozen=True)
class ActionInstance:
    """One parametrised protocol action: `s` always, plus `t`, a quorum or a member set by kind."""

    kind: ActionKind
    s: ServerId
    t: Optional[ServerId] = None
    quorum: Optional[FrozenSet[ServerId]] = None
    members: Optional[FrozenSet[ServerId]] = None

    def __post_init__(self):
        if not isinstance(self.kind, ActionKind):
            try:
                object.__setattr__(self, "kind", ActionKind(self.kind))
            except ValueError:
                raise MalformedInput(f"unknown action kind: {self.kind!r}") from None
        if self.quorum is not None:
            object.__setattr__(self, "quorum", frozenset(self.quorum))
        if self.members is not None:
            object.__setattr__(self, "members", frozenset(self.members))

        kind = self.kind
        wants_t = kind in _PAIR_KINDS
        wants_q = kind in _QUORUM_KINDS
        wants_m = kind is ActionKind.RECONFIG
        if not self.s:
            raise MalformedInput(f"{kind.value}: missing argument s")
        if wants_t != (self.t is not None):
            raise MalformedInput(f"{kind.value}: argument t {'missing' if wants_t else 'not allowed'}")
        if wants_q != (self.quorum is not None):
            raise MalformedInput(f"{kind.value}: argument Q {'missing' if wants_q else 'not allowed'}")
        if wants_m != (self.members is not None):
            raise MalformedInput(f"{kind.value}: argument m {'missing' if wants_m else 'not allowed'}")
        if wants_q and not self.quorum:
            raise MalformedInput(f"{kind.value}: Q must be non-empty")
        if wants_m and not self.members:
            raise MalformedInput(f"{kind.value}: m must be non-empty")

    def servers_named(self) -> FrozenSet[ServerId]:
        named = {self.s}
        if self.t is not None:
            named.add(self.t)
        return frozenset(named | (self.quorum or frozenset()) | (self.members or frozenset()))

    def sort_key(self) -> tuple:
        def set_key(values):
            return tuple(server_order(v) for v in sorted_servers(values or ()))

        return (
            _KIND_INDEX[self.kind],
            server_order(self.s),
            server_order(self.t) if self.t is not None else ("", -2, ""),
            set_key(self.quorum),
            set_key(self.members),
        )

    def describe(self) -> str:
        args = [self.s]
        if self.t is not None:
            args.append(self.t)
        for group in (self.quorum, self.members):
            if group is not None:
                args.append("{" + ", ".join(sorted_servers(group)) + "}")
        return f"{self.kind.value}({', '.join(args)})"


@dataclass(frozen=True)
class ProtocolVariant:
    """
    Switches for guard mutations and open-question variants.

    reconfig_guards: the config-quorum, term-quorum and oplog-commitment
        checks on Reconfig (off reproduces the unsafe reconfiguration class).
    send_config_updates_term: SendConfig also raises the receiver's term to
        the config term it installs.
    """

    reconfig_guards: bool = True
    send_config_updates_term: bool = False


DEFAULT_VARIANT = ProtocolVariant()


# --- Quorum and ordering math ---


@lru_cache(maxsize=None)
def _quorums(members: FrozenSet[ServerId]) -> Tuple[FrozenSet[ServerId], ...]:
    ordered = sorted_servers(members)
    n = len(ordered)
    found = []
    # binary-counter order over the sorted members
    for mask in range(1, 1 << n):
        q = frozenset(ordered[i] for i in range(n) if mask >> i & 1)
        if 2 * len(q) > n:
            found.append(q)
    return tuple(found)


def majority_quorums(members: Iterable[ServerId]) -> Tuple[FrozenSet[ServerId], ...]:
    """Every subset q of `members` with 2|q| > |members|, in binary-counter order."""
    members = frozenset(members)
    if not members:
        raise MalformedInput("empty config")
    return _quorums(members)


def is_quorum(q: FrozenSet[ServerId], members: FrozenSet[ServerId]) -> bool:
    return bool(members) and q <= members and 2 * len(q) > len(members)


def has_quorum_within(members: FrozenSet[ServerId], holders: Iterable[ServerId]) -> bool:
    """Some quorum of `members` consists only of `holders`."""
    return bool(members) and 2 * len(members.intersection(holders)) > len(members)


def every_quorum_meets(members: FrozenSet[ServerId], holders: Iterable[ServerId]) -> bool:
    """
    Every quorum of `members` contains at least one of `holders`.

    Equivalent to: the non-holders of `members` do not form a quorum.
    Vacuously true for an empty member set.
    """
    return 2 * len(members.difference(holders)) <= len(members)


@lru_cache(maxsize=None)
def quorums_overlap(a: FrozenSet[ServerId], b: FrozenSet[ServerId]) -> bool:
    """Every quorum of `a` intersects every quorum of `b`."""
    if not a or not b:
        return True
    return all(qa & qb for qa in _quorums(a) for qb in _quorums(b))


def is_newer_config(a: ConfigStamp, b: ConfigStamp) -> bool:
    return a.term > b.term or (a.term == b.term and a.version > b.version)


def is_newer_or_equal_config(a: ConfigStamp, b: ConfigStamp) -> bool:
    return a == b or is_newer_config(a, b)


def last_term(log: Sequence[int]) -> int:
    return log[-1] if log else 0


def log_has(log: Sequence[int], index: int, term: int) -> bool:
    return 1 <= index <= len(log) and log[index - 1] == term


def in_log(index: int, term: int, state: ReplicaSetState, s: ServerId) -> bool:
    return log_has(state.node(s).log, index, term)


def _log_recent_enough(candidate: Sequence[int], voter: Sequence[int]) -> bool:
    lc, lv = last_term(candidate), last_term(voter)
    return lc > lv or (lc == lv and len(candidate) >= len(voter))


# --- Guards ---
# A guard returns None when enabled, otherwise a short reason.

Guard = Callable[[ReplicaSetState, ActionInstance, ProtocolVariant], Optional[str]]
Effect = Callable[[ReplicaSetState, ActionInstance, ProtocolVariant], ReplicaSetState]


def _guard_client_request(state, a, variant):
    if not state.node(a.s).is_primary:
        return "not primary"
    return None


def _guard_get_entries(state, a, variant):
    if a.s == a.t:
        return "s = t"
    puller, source = state.node(a.s), state.node(a.t)
    if puller.is_primary:
        return "primary does not pull entries"
    k = len(puller.log)
    if len(source.log) <= k:
        return "source has no newer entry"
    if k and source.log[k - 1] != puller.log[k - 1]:
        return "last entry does not match"
    return None


def _guard_rollback_entries(state, a, variant):
    if a.s == a.t:
        return "s = t"
    node, other = state.node(a.s), state.node(a.t)
    if node.is_primary:
        return "primary does not roll back"
    k = len(node.log)
    if k == 0:
        return "empty log"
    if last_term(node.log) >= last_term(other.log):
        return "last term not older"
    if k <= len(other.log) and other.log[k - 1] == node.log[k - 1]:
        return "log is a prefix of the other log"
    return None


def _guard_commit_entry(state, a, variant):
    primary = state.node(a.s)
    if not primary.is_primary:
        return "not primary"
    if not is_quorum(a.quorum, primary.config):
        return "Q is not a quorum of the config"
    ind = len(primary.log)
    if ind == 0:
        return "empty log"
    if primary.log[-1] != primary.term:
        return "last entry not from the current term"
    for n in a.quorum:
        member = state.node(n)
        if member.term != primary.term or not log_has(member.log, ind, primary.term):
            return "entry not immediately committed in Q"
    if CommitRecord(ind, primary.term) in state.committed:
        return "already committed"
    return None


def _guard_send_config(state, a, variant):
    if a.s == a.t:
        return "s = t"
    receiver = state.node(a.t)
    if receiver.is_primary:
        return "receiver is primary"
    if not is_newer_config(state.node(a.s).stamp, receiver.stamp):
        return "config not newer"
    return None


def _guard_reconfig(state, a, variant):
    primary = state.node(a.s)
    if not primary.is_primary:
        return "not primary"
    config = primary.config
    if not config:
        return "empty config"
    if a.s not in a.members:
        return "s not in m"
    if a.members == config:
        return "m equals the current config"
    if not quorums_overlap(config, a.members):
        return "quorums of m do not overlap the current config"
    if variant.reconfig_guards:
        same_stamp = [n for n in config if state.node(n).stamp == primary.stamp]
        if not has_quorum_within(config, same_stamp):
            return "current config not installed on a quorum"
        same_term = [n for n in config if state.node(n).term == primary.term]
        if not has_quorum_within(config, same_term):
            return "current term not propagated to a quorum"
        durable = [
            n
            for n in config
            if all(log_has(state.node(n).log, c.index, c.term) for c in state.committed)
        ]
        if not has_quorum_within(config, durable):
            return "committed entries not durable in a quorum"
    return None


def _guard_become_leader(state, a, variant):
    candidate = state.node(a.s)
    if a.s not in a.quorum:
        return "s not in Q"
    if not is_quorum(a.quorum, candidate.config):
        return "Q is not a quorum of the config"
    new_term = candidate.term + 1
    for v in a.quorum:
        voter = state.node(v)
        if voter.term >= new_term:
            return f"{v} already in term {voter.term}"
        if not is_newer_or_equal_config(candidate.stamp, voter.stamp):
            return f"{v} has a newer config"
        if not _log_recent_enough(candidate.log, voter.log):
            return f"{v} has a more recent log"
    return None


def _guard_update_terms(state, a, variant):
    if a.s == a.t:
        return "s = t"
    if state.node(a.s).term <= state.node(a.t).term:
        return "term not newer"
    return None


# --- Effects ---


def _effect_client_request(state, a, variant):
    node = state.node(a.s)
    return state.with_nodes({a.s: replace(node, log=node.log + (node.term,))})


def _effect_get_entries(state, a, variant):
    puller, source = state.node(a.s), state.node(a.t)
    entry = source.log[len(puller.log)]
    return state.with_nodes({a.s: replace(puller, log=puller.log + (entry,))})


def _effect_rollback_entries(state, a, variant):
    node = state.node(a.s)
    return state.with_nodes({a.s: replace(node, log=node.log[:-1])})


def _effect_commit_entry(state, a, variant):
    primary = state.node(a.s)
    return state.with_committed(CommitRecord(len(primary.log), primary.term))


def _effect_send_config(state, a, variant):
    sender, receiver = state.node(a.s), state.node(a.t)
    updated = replace(
        receiver,
        config=sender.config,
        config_version=sender.config_version,
        config_term=sender.config_term,
    )
    if variant.send_config_updates_term:
        updated = replace(updated, term=max(receiver.term, sender.config_term))
    return state.with_nodes({a.t: updated})


def _effect_reconfig(state, a, variant):
    primary = state.node(a.s)
    updated = replace(
        primary,
        config=a.members,
        config_version=primary.config_version + 1,
        config_term=primary.term,
    )
    return state.with_nodes({a.s: updated})


def _effect_become_leader(state, a, variant):
    new_term = state.node(a.s).term + 1
    changes = {}
    for v in a.quorum:
        voter = state.node(v)
        if v == a.s:
            changes[v] = replace(voter, term=new_term, role=Role.PRIMARY, config_term=new_term)
        else:
            changes[v] = replace(voter, term=new_term, role=Role.SECONDARY)
    return state.with_nodes(changes)


def _effect_update_terms(state, a, variant):
    source, target = state.node(a.s), state.node(a.t)
    return state.with_nodes({a.t: replace(target, term=source.term, role=Role.SECONDARY)})


_ACTIONS: Dict[ActionKind, Tuple[Guard, Effect]] = {
    ActionKind.CLIENT_REQUEST: (_guard_client_request, _effect_client_request),
    ActionKind.GET_ENTRIES: (_guard_get_entries, _effect_get_entries),
    ActionKind.ROLLBACK_ENTRIES: (_guard_rollback_entries, _effect_rollback_entries),
    ActionKind.COMMIT_ENTRY: (_guard_commit_entry, _effect_commit_entry),
    ActionKind.SEND_CONFIG: (_guard_send_config, _effect_send_config),
    ActionKind.RECONFIG: (_guard_reconfig, _effect_reconfig),
    ActionKind.BECOME_LEADER: (_guard_become_leader, _effect_become_leader),
    ActionKind.UPDATE_TERMS: (_guard_update_terms, _effect_update_terms),
}


def _bound_reason(state: ReplicaSetState, a: ActionInstance, bounds: ModelBounds) -> Optional[str]:
    node = state.node(a.s)
    if a.kind is ActionKind.BECOME_LEADER and node.term + 1 > bounds.max_term:
        return "term bound reached"
    if a.kind is ActionKind.CLIENT_REQUEST and len(node.log) >= bounds.max_log_len:
        return "log length bound reached"
    if a.kind is ActionKind.RECONFIG and node.config_version + 1 > bounds.max_config_version:
        return "config version bound reached"
    return None


def _check_arguments(state: ReplicaSetState, a: ActionInstance) -> None:
    unknown = [s for s in a.servers_named() if not state.has_server(s)]
    if unknown:
        raise MalformedInput(f"{a.describe()}: unknown servers {sorted_servers(unknown)}")


def why_not_enabled(
    state: ReplicaSetState,
    action: ActionInstance,
    bounds: Optional[ModelBounds] = None,
    variant: ProtocolVariant = DEFAULT_VARIANT,
) -> Optional[str]:
    """Reason the action is disabled, or None when it is enabled."""
    _check_arguments(state, action)
    guard, _ = _ACTIONS[action.kind]
    reason = guard(state, action, variant)
    if reason is None and bounds is not None:
        reason = _bound_reason(state, action, bounds)
    return reason


def is_enabled(
    state: ReplicaSetState,
    action: ActionInstance,
    bounds: Optional[ModelBounds] = None,
    variant: ProtocolVariant = DEFAULT_VARIANT,
) -> bool:
    return why_not_enabled(state, action, bounds, variant) is None


def apply(
    state: ReplicaSetState,
    action: ActionInstance,
    bounds: Optional[ModelBounds] = None,
    variant: ProtocolVariant = DEFAULT_VARIANT,
) -> ReplicaSetState:
    """Successor of `state` under `action`; raises ActionNotEnabled when the guard is false."""
    reason = why_not_enabled(state, action, bounds, variant)
    if reason is not None:
        raise ActionNotEnabled(action.describe(), reason)
    _, effect = _ACTIONS[action.kind]
    return effect(state, action, variant)


# --- The eight actions ---


def client_request(state: ReplicaSetState, s: ServerId) -> ReplicaSetState:
    return apply(state, ActionInstance(ActionKind.CLIENT_REQUEST, s))


def get_entries(state: ReplicaSetState, s: ServerId, t: ServerId) -> ReplicaSetState:
    """`s` pulls the entry following its last one from `t`."""
    return apply(state, ActionInstance(ActionKind.GET_ENTRIES, s, t=t))


def rollback_entries(state: ReplicaSetState, s: ServerId, t: ServerId) -> ReplicaSetState:
    return apply(state, ActionInstance(ActionKind.ROLLBACK_ENTRIES, s, t=t))


def commit_entry(state: ReplicaSetState, s: ServerId, quorum: Iterable[ServerId]) -> ReplicaSetState:
    return apply(state, ActionInstance(ActionKind.COMMIT_ENTRY, s, quorum=frozenset(quorum)))


def send_config(state: ReplicaSetState, s: ServerId, t: ServerId, variant: ProtocolVariant = DEFAULT_VARIANT) -> ReplicaSetState:
    return apply(state, ActionInstance(ActionKind.SEND_CONFIG, s, t=t), variant=variant)


def reconfig(
    state: ReplicaSetState, s: ServerId, members: Iterable[ServerId], variant: ProtocolVariant = DEFAULT_VARIANT
) -> ReplicaSetState:
    return apply(state, ActionInstance(ActionKind.RECONFIG, s, members=frozenset(members)), variant=variant)


def become_leader(state: ReplicaSetState, s: ServerId, quorum: Iterable[ServerId]) -> ReplicaSetState:
    return apply(state, ActionInstance(ActionKind.BECOME_LEADER, s, quorum=frozenset(quorum)))


def update_terms(state: ReplicaSetState, s: ServerId, t: ServerId) -> ReplicaSetState:
    return apply(state, ActionInstance(ActionKind.UPDATE_TERMS, s, t=t))


# --- Typing, initial state and enumeration ---


def _is_nat(value) -> bool:
    return isinstance(value, int) and not isinstance(value, bool) and value >= 0


def type_ok(state: ReplicaSetState, bounds: Optional[ModelBounds] = None) -> bool:
    """
    Structural well-typedness of a state; with bounds, also the finite scope
    (server set, numeric ceilings, log lengths, committed pairs).
    """
    ids = set(state.ids)
    if len(ids) != len(state.ids) or not ids:
        return False
    if bounds is not None and tuple(state.ids) != bounds.servers:
        return False
    for node in state.nodes:
        if not isinstance(node.role, Role):
            return False
        if not isinstance(node.config, frozenset) or not node.config <= ids:
            return False
        if not all(_is_nat(x) for x in (node.term, node.config_version, node.config_term)):
            return False
        if not all(_is_nat(x) for x in node.log):
            return False
        if bounds is not None:
            if len(node.log) > bounds.max_log_len or any(x > bounds.max_term for x in node.log):
                return False
            if node.term > bounds.max_term or node.config_term > bounds.max_term:
                return False
            if node.config_version > bounds.max_config_version:
                return False
    for c in state.committed:
        if not isinstance(c, CommitRecord) or not (_is_nat(c.index) and _is_nat(c.term)):
            return False
        if bounds is not None and (c.index > bounds.max_log_len or c.term > bounds.max_term):
            return False
    return True


def initial_state(bounds: ModelBounds, members: Optional[Iterable[ServerId]] = None) -> ReplicaSetState:
    """Uniform bootstrap: empty logs, term 0, all secondaries, config `members`@(v1,t0)."""
    config = frozenset(bounds.servers if members is None else members)
    if not config:
        raise MalformedInput("empty config")
    if not config <= set(bounds.servers):
        raise MalformedInput(f"initial members {sorted_servers(config)} not within the server set")
    node = ServerState(log=(), term=0, role=Role.SECONDARY, config=config, config_version=1, config_term=0)
    return ReplicaSetState(bounds.servers, tuple(node for _ in bounds.servers), frozenset())


def nonempty_subsets(servers: Sequence[ServerId]) -> Iterator[FrozenSet[ServerId]]:
    """Non-empty subsets of `servers` in binary-counter order."""
    n = len(servers)
    for mask in range(1, 1 << n):
        yield frozenset(servers[i] for i in range(n) if mask >> i & 1)


@lru_cache(maxsize=4096)
def _candidate_actions(
    ids: Tuple[ServerId, ...], configs: Tuple[FrozenSet[ServerId], ...]
) -> Tuple[Tuple[ActionInstance, Guard, Effect], ...]:
    """Every action instance worth a guard check, given each server's config."""
    subsets = list(nonempty_subsets(ids))
    out = []
    for kind in ACTION_ORDER:
        guard, effect = _ACTIONS[kind]
        for s, config in zip(ids, configs):
            if kind is ActionKind.CLIENT_REQUEST:
                actions = [ActionInstance(kind, s)]
            elif kind in _PAIR_KINDS:
                actions = [ActionInstance(kind, s, t=t) for t in ids if t != s]
            elif kind in _QUORUM_KINDS:
                actions = [ActionInstance(kind, s, quorum=q) for q in _quorums(config)] if config else []
            else:
                actions = [ActionInstance(kind, s, members=m) for m in subsets]
            out.extend((a, guard, effect) for a in actions)
    return tuple(out)


def successors(
    state: ReplicaSetState,
    bounds: ModelBounds,
    variant: ProtocolVariant = DEFAULT_VARIANT,
) -> List[Tuple[ActionInstance, ReplicaSetState]]:
    """enumerate_transitions without the TypeOK check, for states already known to be in scope."""
    candidates = _candidate_actions(state.ids, tuple(node.config for node in state.nodes))
    transitions = []
    for action, guard, effect in candidates:
        if guard(state, action, variant) is None and _bound_reason(state, action, bounds) is None:
            transitions.append((action, effect(state, action, variant)))
    return transitions


def enumerate_transitions(
    state: ReplicaSetState,
    bounds: ModelBounds,
    variant: ProtocolVariant = DEFAULT_VARIANT,
) -> List[Tuple[ActionInstance, ReplicaSetState]]:
    """
    Every enabled action instance with its successor, in kind order then
    argument order (servers sorted, sets in binary-counter order).
    """
    if not type_ok(state, bounds):
        raise MalformedInput("state does not satisfy TypeOK under the given bounds")
    return successors(state, bounds, variant)
