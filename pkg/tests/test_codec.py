import json

import pytest

from app.codec import (
    Trace,
    TraceStep,
    action_to_dict,
    canonical_key,
    dump_json,
    load_trace,
    parse_action,
    parse_bounds,
    parse_state,
    parse_trace,
    state_to_dict,
    trace_to_dict,
)
from app.errors import MalformedInput
from app.protocol import ActionInstance, ModelBounds, become_leader, initial_state
from tests.builders import P, node, state

BOUNDS = ModelBounds.of(2, 2, 1, 2)


def _sample_state():
    return state(
        node(log=[1], term=1, role=P, config=["n2", "n1"], version=2, cterm=1),
        node(log=[1], term=1, config=["n1", "n2"], version=2, cterm=1),
        committed=[(1, 1)],
    )


def test_state_format():
    assert state_to_dict(_sample_state()) == {
        "servers": [
            {
                "id": "n1",
                "log": [1],
                "term": 1,
                "role": "Primary",
                "config": ["n1", "n2"],
                "configVersion": 2,
                "configTerm": 1,
            },
            {
                "id": "n2",
                "log": [1],
                "term": 1,
                "role": "Secondary",
                "config": ["n1", "n2"],
                "configVersion": 2,
                "configTerm": 1,
            },
        ],
        "committed": [[1, 1]],
    }


def test_action_format():
    a = ActionInstance("BecomeLeader", "n1", quorum={"n2", "n1"})
    assert action_to_dict(a) == {"kind": "BecomeLeader", "s": "n1", "Q": ["n1", "n2"]}
    assert action_to_dict(ActionInstance("GetEntries", "n2", t="n1")) == {"kind": "GetEntries", "s": "n2", "t": "n1"}
    assert action_to_dict(ActionInstance("Reconfig", "n1", members={"n1"})) == {"kind": "Reconfig", "s": "n1", "m": ["n1"]}


def test_state_round_trip():
    s = _sample_state()
    text = dump_json(state_to_dict(s))
    assert parse_state(text) == s
    assert dump_json(state_to_dict(parse_state(text))) == text


def test_action_round_trip():
    a = ActionInstance("CommitEntry", "n1", quorum={"n1", "n2"})
    assert parse_action(json.dumps(action_to_dict(a))) == a


def test_bounds_parse():
    text = '{"servers": ["n2", "n1"], "maxTerm": 2, "maxLogLen": 1, "maxConfigVersion": 2}'
    assert parse_bounds(text) == BOUNDS


def test_canonical_key_ignores_input_order():
    a = parse_state(
        '{"servers": [{"id": "n2", "log": [], "term": 0, "role": "Secondary", "config": ["n2", "n1"],'
        ' "configVersion": 1, "configTerm": 0}, {"id": "n1", "log": [], "term": 0, "role": "Secondary",'
        ' "config": ["n1", "n2"], "configVersion": 1, "configTerm": 0}], "committed": [[1, 1], [0, 1]]}'
    )
    b = state(node(config=["n1", "n2"]), node(config=["n1", "n2"]), committed=[(0, 1), (1, 1)])
    assert a == b
    assert canonical_key(a) == canonical_key(b)
    assert canonical_key(b) != canonical_key(state(node(config=["n1", "n2"]), node(config=["n1", "n2"])))


@pytest.mark.parametrize(
    "text, where",
    [
        ('{"servers": [{"id": "n1", "log": [], "term": 0, "role": "Leader", "config": ["n1"],'
         ' "configVersion": 1, "configTerm": 0}]}', "servers.0.role"),
        ('{"servers": [{"id": "n1", "log": [-1], "term": 0, "role": "Primary", "config": ["n1"],'
         ' "configVersion": 1, "configTerm": 0}]}', "servers.0.log.0"),
        ('{"servers": [{"id": "n1", "log": [], "term": 0, "role": "Primary", "config": ["n1"],'
         ' "configVersion": 1, "configTerm": 0, "vote": "n1"}]}', "servers.0.vote"),
        ('{"servers": [{"id": "n1", "log": [], "term": 0, "role": "Primary", "config": ["n1"],'
         ' "configVersion": 1}]}', "servers.0.configTerm"),
    ],
)
def test_malformed_state_names_location(text, where):
    with pytest.raises(MalformedInput, match=where.replace(".", r"\.")):
        parse_state(text)


def test_malformed_json():
    with pytest.raises(MalformedInput):
        parse_state("{not json")
    with pytest.raises(MalformedInput, match="duplicate"):
        parse_state(
            '{"servers": [{"id": "n1", "log": [], "term": 0, "role": "Primary", "config": ["n1"],'
            ' "configVersion": 1, "configTerm": 0}, {"id": "n1", "log": [], "term": 0,'
            ' "role": "Primary", "config": ["n1"], "configVersion": 1, "configTerm": 0}]}'
        )


def test_malformed_action():
    with pytest.raises(MalformedInput):
        parse_action('{"kind": "CommitEntry", "s": "n1"}')
    with pytest.raises(MalformedInput):
        parse_action('{"kind": "Elect", "s": "n1"}')


def test_trace_round_trip(tmp_path):
    init = initial_state(BOUNDS)
    action = ActionInstance("BecomeLeader", "n1", quorum={"n1", "n2"})
    trace = Trace(bounds=BOUNDS, init=init, steps=(TraceStep(action, become_leader(init, "n1", {"n1", "n2"})),), seed=3)
    text = dump_json(trace_to_dict(trace))
    parsed = parse_trace(text)
    assert parsed == trace
    assert len(parsed) == 1
    assert parsed.last_state.node("n1").is_primary

    path = tmp_path / "trace.json"
    path.write_text(text, encoding="utf-8")
    assert load_trace(str(path)) == trace


def test_trace_version_is_checked():
    doc = trace_to_dict(Trace(bounds=BOUNDS, init=initial_state(BOUNDS)))
    doc["version"] = 2
    with pytest.raises(MalformedInput, match="version"):
        parse_trace(json.dumps(doc))


def test_missing_trace_file(tmp_path):
    with pytest.raises(MalformedInput, match="cannot read"):
        load_trace(str(tmp_path / "absent.json"))
