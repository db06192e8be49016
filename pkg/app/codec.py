"""
JSON wire formats for states, actions, bounds and traces.

Output is built from plain dicts with a fixed key order: servers sorted by id,
sets as sorted arrays, no floats. Input is validated with pydantic documents
and any validation failure is raised as MalformedInput naming the offending
location.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, List, Literal, Optional, Tuple, Type, TypeVar

from pydantic import BaseModel, ConfigDict, NonNegativeInt, ValidationError

from app.config import TOOL_VERSION
from app.errors import MalformedInput
from app.protocol import (
    ActionInstance,
    CommitRecord,
    ModelBounds,
    ReplicaSetState,
    Role,
    ServerState,
    sorted_servers,
)

TRACE_FORMAT_VERSION = 1


@dataclass(frozen=True)
class TraceStep:
    action: ActionInstance
    state: ReplicaSetState


@dataclass(frozen=True)
class Trace:
    """A finite behavior: an initial state and the actions taken from it."""

    bounds: ModelBounds
    init: ReplicaSetState
    steps: Tuple[TraceStep, ...] = ()
    seed: Optional[int] = None
    tool_version: str = field(default=TOOL_VERSION)

    @property
    def last_state(self) -> ReplicaSetState:
        return self.steps[-1].state if self.steps else self.init

    def __len__(self) -> int:
        return len(self.steps)


# --- Writing ---


def state_to_dict(state: ReplicaSetState) -> dict:
    servers = []
    for server_id in sorted_servers(state.ids):
        node = state.node(server_id)
        servers.append(
            {
                "id": server_id,
                "log": list(node.log),
                "term": node.term,
                "role": node.role.value,
                "config": sorted_servers(node.config),
                "configVersion": node.config_version,
                "configTerm": node.config_term,
            }
        )
    committed = [[c.index, c.term] for c in sorted(state.committed)]
    return {"servers": servers, "committed": committed}


def action_to_dict(action: ActionInstance) -> dict:
    out = {"kind": action.kind.value, "s": action.s}
    if action.t is not None:
        out["t"] = action.t
    if action.quorum is not None:
        out["Q"] = sorted_servers(action.quorum)
    if action.members is not None:
        out["m"] = sorted_servers(action.members)
    return out


def bounds_to_dict(bounds: ModelBounds) -> dict:
    return {
        "servers": list(bounds.servers),
        "maxTerm": bounds.max_term,
        "maxLogLen": bounds.max_log_len,
        "maxConfigVersion": bounds.max_config_version,
    }


def trace_to_dict(trace: Trace) -> dict:
    return {
        "version": TRACE_FORMAT_VERSION,
        "toolVersion": trace.tool_version,
        "bounds": bounds_to_dict(trace.bounds),
        "seed": trace.seed,
        "init": state_to_dict(trace.init),
        "steps": [{"action": action_to_dict(s.action), "state": state_to_dict(s.state)} for s in trace.steps],
    }


def dump_json(obj: Any) -> str:
    """Pretty, byte-stable rendering used for files and stdout."""
    return json.dumps(obj, indent=2, ensure_ascii=False) + "\n"


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False)


def canonical_key(state: ReplicaSetState) -> bytes:
    """Compact canonical serialization of a state; equal keys iff equal states."""
    return canonical_json(state_to_dict(state)).encode("utf-8")


# --- Reading ---


class _Doc(BaseModel):
    model_config = ConfigDict(strict=True, extra="forbid", frozen=True)


class ServerDoc(_Doc):
    id: str
    log: List[NonNegativeInt]
    term: NonNegativeInt
    role: Literal["Primary", "Secondary"]
    config: List[str]
    configVersion: NonNegativeInt
    configTerm: NonNegativeInt


class StateDoc(_Doc):
    servers: List[ServerDoc]
    committed: List[Tuple[NonNegativeInt, NonNegativeInt]] = []

    def to_state(self) -> ReplicaSetState:
        ids = [s.id for s in self.servers]
        if len(set(ids)) != len(ids):
            raise MalformedInput(f"duplicate server id in state: {ids}")
        if not ids:
            raise MalformedInput("state has no servers")
        servers = {
            s.id: ServerState(
                log=tuple(s.log),
                term=s.term,
                role=Role(s.role),
                config=frozenset(s.config),
                config_version=s.configVersion,
                config_term=s.configTerm,
            )
            for s in self.servers
        }
        return ReplicaSetState.from_servers(servers, (CommitRecord(i, t) for i, t in self.committed))


class ActionDoc(_Doc):
    kind: str
    s: str
    t: Optional[str] = None
    Q: Optional[List[str]] = None
    m: Optional[List[str]] = None

    def to_action(self) -> ActionInstance:
        return ActionInstance(
            self.kind,
            self.s,
            t=self.t,
            quorum=frozenset(self.Q) if self.Q is not None else None,
            members=frozenset(self.m) if self.m is not None else None,
        )


class BoundsDoc(_Doc):
    servers: List[str]
    maxTerm: int
    maxLogLen: int
    maxConfigVersion: int

    def to_bounds(self) -> ModelBounds:
        return ModelBounds.of(self.servers, self.maxTerm, self.maxLogLen, self.maxConfigVersion)


class TraceStepDoc(_Doc):
    action: ActionDoc
    state: StateDoc


class TraceDoc(_Doc):
    version: Literal[1]
    toolVersion: Optional[str] = None
    bounds: BoundsDoc
    seed: Optional[NonNegativeInt] = None
    init: StateDoc
    steps: List[TraceStepDoc] = []

    def to_trace(self) -> Trace:
        steps = []
        for i, step in enumerate(self.steps, start=1):
            try:
                steps.append(TraceStep(step.action.to_action(), step.state.to_state()))
            except MalformedInput as e:
                raise MalformedInput(f"trace step {i}: {e}") from e
        return Trace(
            bounds=self.bounds.to_bounds(),
            init=self.init.to_state(),
            steps=tuple(steps),
            seed=self.seed,
            tool_version=self.toolVersion or TOOL_VERSION,
        )


D = TypeVar("D", bound=_Doc)


def _validate(doc_type: Type[D], text: str) -> D:
    try:
        return doc_type.model_validate_json(text)
    except ValidationError as e:
        first = e.errors()[0]
        where = ".".join(str(part) for part in first["loc"]) or "<document>"
        raise MalformedInput(f"{where}: {first['msg']}") from e


def parse_state(text: str) -> ReplicaSetState:
    return _validate(StateDoc, text).to_state()


def parse_action(text: str) -> ActionInstance:
    return _validate(ActionDoc, text).to_action()


def parse_bounds(text: str) -> ModelBounds:
    return _validate(BoundsDoc, text).to_bounds()


def parse_trace(text: str) -> Trace:
    return _validate(TraceDoc, text).to_trace()


def load_trace(path: str) -> Trace:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise MalformedInput(f"cannot read trace file {path!r}: {e.strerror}") from e
    return parse_trace(text)
