import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from app.errors import ActionNotEnabled, MalformedInput
from app.protocol import (
    ACTION_ORDER,
    ActionInstance,
    ActionKind,
    CommitRecord,
    ConfigStamp,
    ModelBounds,
    ProtocolVariant,
    apply,
    become_leader,
    client_request,
    commit_entry,
    enumerate_transitions,
    every_quorum_meets,
    get_entries,
    has_quorum_within,
    initial_state,
    in_log,
    is_enabled,
    is_newer_config,
    is_newer_or_equal_config,
    last_term,
    majority_quorums,
    nonempty_subsets,
    quorums_overlap,
    reconfig,
    rollback_entries,
    send_config,
    type_ok,
    update_terms,
)
from tests.builders import P, S, bounded_states, node, state

SMALL = ModelBounds.of(2, max_term=2, max_log_len=1, max_config_version=2)
THREE = ModelBounds.of(3, max_term=2, max_log_len=2, max_config_version=3)


def _all_candidates(bounds):
    # every well-formed argument combination, quorums and member sets included
    ids = bounds.servers
    subsets = list(nonempty_subsets(ids))
    for kind in ACTION_ORDER:
        for s in ids:
            if kind is ActionKind.CLIENT_REQUEST:
                yield ActionInstance(kind, s)
            elif kind in (ActionKind.COMMIT_ENTRY, ActionKind.BECOME_LEADER):
                for q in subsets:
                    yield ActionInstance(kind, s, quorum=q)
            elif kind is ActionKind.RECONFIG:
                for m in subsets:
                    yield ActionInstance(kind, s, members=m)
            else:
                for t in ids:
                    yield ActionInstance(kind, s, t=t)


def _elected_three():
    """n1 primary in term 1, elected by n1 and n2; n3 still at term 0."""
    return become_leader(initial_state(ModelBounds.of(3, 2, 2, 3)), "n1", {"n1", "n2"})


# --- Quorum and config math ---


def test_majority_quorums_of_three():
    quorums = majority_quorums({"n1", "n2", "n3"})
    assert set(quorums) == {
        frozenset({"n1", "n2"}),
        frozenset({"n1", "n3"}),
        frozenset({"n2", "n3"}),
        frozenset({"n1", "n2", "n3"}),
    }
    assert quorums[0] == frozenset({"n1", "n2"})


def test_majority_quorums_small_sets():
    assert majority_quorums({"n1"}) == (frozenset({"n1"}),)
    assert len(majority_quorums({"n1", "n2", "n3", "n4"})) == 5
    with pytest.raises(MalformedInput):
        majority_quorums(set())


def test_quorums_overlap():
    full = frozenset({"n1", "n2", "n3"})
    assert quorums_overlap(full, frozenset({"n1", "n2"}))
    assert not quorums_overlap(full, frozenset({"n1"}))
    assert not quorums_overlap(frozenset({"n1", "n2"}), frozenset({"n3", "n4"}))
    assert quorums_overlap(frozenset({"n1", "n2"}), frozenset({"n1"}))


@given(
    members=st.frozensets(st.sampled_from(["n1", "n2", "n3", "n4"]), min_size=1),
    holders=st.frozensets(st.sampled_from(["n1", "n2", "n3", "n4"])),
)
def test_quorum_shortcuts_agree_with_enumeration(members, holders):
    quorums = majority_quorums(members)
    assert every_quorum_meets(members, holders) == all(q & holders for q in quorums)
    assert has_quorum_within(members, holders) == any(q <= holders for q in quorums)


def test_config_ordering_is_term_first():
    assert is_newer_config(ConfigStamp(1, 2), ConfigStamp(5, 1))
    assert is_newer_config(ConfigStamp(2, 1), ConfigStamp(1, 1))
    assert not is_newer_config(ConfigStamp(1, 1), ConfigStamp(1, 1))
    assert is_newer_or_equal_config(ConfigStamp(1, 1), ConfigStamp(1, 1))
    assert not is_newer_or_equal_config(ConfigStamp(3, 0), ConfigStamp(1, 1))


def test_log_lookups():
    assert last_term(()) == 0
    assert last_term((1, 1, 3)) == 3
    s = state(node(log=(1, 1, 2)), node())
    assert in_log(3, 2, s, "n1")
    assert not in_log(3, 1, s, "n1")
    assert not in_log(0, 1, s, "n1")
    assert not in_log(1, 1, s, "n2")


# --- Initial state ---


def test_initial_state():
    init = initial_state(ModelBounds.of(3, 1, 1, 1))
    assert init.ids == ("n1", "n2", "n3")
    assert not init.committed
    for _, n in init.items():
        assert n == node(config=("n1", "n2", "n3"), version=1, cterm=0)
    assert type_ok(init, ModelBounds.of(3, 1, 1, 1))


def test_initial_state_members_must_be_servers():
    bounds = ModelBounds.of(2, 1, 1, 1)
    assert initial_state(bounds, {"n1"}).node("n2").config == frozenset({"n1"})
    with pytest.raises(MalformedInput):
        initial_state(bounds, {"n9"})
    with pytest.raises(MalformedInput):
        initial_state(bounds, set())


def test_only_election_is_enabled_initially(one_server):
    transitions = enumerate_transitions(initial_state(one_server), one_server)
    assert [a.describe() for a, _ in transitions] == ["BecomeLeader(n1, {n1})"]


# --- Actions ---


def test_become_leader():
    s = _elected_three()
    assert s.node("n1") == node(term=1, role=P, cterm=1)
    assert s.node("n2") == node(term=1, role=S)
    assert s.node("n3") == node(term=0, role=S)


def test_become_leader_needs_a_quorum_of_its_config():
    with pytest.raises(ActionNotEnabled):
        become_leader(_elected_three(), "n3", {"n3"})
    # n2 already voted in term 1
    with pytest.raises(ActionNotEnabled):
        become_leader(_elected_three(), "n3", {"n2", "n3"})


def test_become_leader_refused_by_more_recent_log():
    s = state(node(log=[1], term=1), node(term=1), node(term=1))
    with pytest.raises(ActionNotEnabled, match="more recent log"):
        become_leader(s, "n2", {"n1", "n2"})
    assert become_leader(s, "n1", {"n1", "n2"}).node("n1").is_primary


def test_client_request_appends_current_term():
    s = client_request(_elected_three(), "n1")
    assert s.node("n1").log == (1,)
    with pytest.raises(ActionNotEnabled, match="not primary"):
        client_request(s, "n2")


def test_get_entries_pulls_next_entry():
    s = get_entries(client_request(_elected_three(), "n1"), "n2", "n1")
    assert s.node("n2").log == (1,)
    with pytest.raises(ActionNotEnabled, match="no newer entry"):
        get_entries(s, "n2", "n1")


def test_primary_does_not_pull_entries():
    s = state(node(term=2, role=P, cterm=2), node(log=[1], term=1))
    with pytest.raises(ActionNotEnabled, match="primary does not pull"):
        get_entries(s, "n1", "n2")


def test_get_entries_requires_matching_last_entry():
    s = state(node(log=[1], term=1), node(log=[2, 2], term=2))
    assert not is_enabled(s, ActionInstance("GetEntries", "n1", t="n2"))


def test_rollback_needs_divergence():
    diverged = state(node(log=[2], term=2), node(log=[1], term=1))
    assert rollback_entries(diverged, "n2", "n1").node("n2").log == ()
    prefix = state(node(log=[1, 2], term=2), node(log=[1], term=1))
    with pytest.raises(ActionNotEnabled, match="prefix"):
        rollback_entries(prefix, "n2", "n1")


def test_primary_does_not_roll_back():
    s = state(node(log=[2], term=2), node(log=[1], term=1, role=P, cterm=1))
    with pytest.raises(ActionNotEnabled, match="primary does not roll back"):
        rollback_entries(s, "n2", "n1")


def test_commit_entry():
    s = get_entries(client_request(_elected_three(), "n1"), "n2", "n1")
    with pytest.raises(ActionNotEnabled):
        commit_entry(s, "n1", {"n1", "n3"})
    committed = commit_entry(s, "n1", {"n1", "n2"})
    assert committed.committed == frozenset({CommitRecord(1, 1)})
    assert committed.nodes == s.nodes
    with pytest.raises(ActionNotEnabled, match="already committed"):
        commit_entry(committed, "n1", {"n1", "n2"})


def test_send_config_installs_newer_config():
    s = send_config(_elected_three(), "n1", "n3")
    assert s.node("n3").stamp == ConfigStamp(1, 1)
    assert s.node("n3").term == 0
    with pytest.raises(ActionNotEnabled, match="not newer"):
        send_config(s, "n1", "n3")


def test_send_config_term_variant():
    variant = ProtocolVariant(send_config_updates_term=True)
    s = send_config(_elected_three(), "n1", "n3", variant=variant)
    assert s.node("n3").term == 1


def test_reconfig_requires_config_installed_on_a_quorum():
    s = _elected_three()
    # only n1 carries the (1, 1) stamp so far
    with pytest.raises(ActionNotEnabled, match="not installed"):
        reconfig(s, "n1", {"n1", "n2"})
    s = reconfig(send_config(s, "n1", "n2"), "n1", {"n1", "n2"})
    assert s.node("n1").config == frozenset({"n1", "n2"})
    assert s.node("n1").stamp == ConfigStamp(2, 1)


def test_reconfig_requires_term_on_a_quorum():
    s = state(
        node(term=2, role=P, cterm=2, version=1),
        node(term=1, cterm=2, version=1),
        node(term=1, cterm=2, version=1),
    )
    with pytest.raises(ActionNotEnabled, match="current term"):
        reconfig(s, "n1", {"n1", "n2"})


def test_reconfig_requires_committed_entries_on_a_quorum():
    s = state(
        node(log=[1], term=1, role=P, cterm=1),
        node(term=1, cterm=1),
        node(term=1, cterm=1),
        committed=[(1, 1)],
    )
    with pytest.raises(ActionNotEnabled, match="durable"):
        reconfig(s, "n1", {"n1", "n2"})


def test_reconfig_never_drops_quorum_overlap():
    s = send_config(_elected_three(), "n1", "n2")
    with pytest.raises(ActionNotEnabled, match="overlap"):
        reconfig(s, "n1", {"n1"})
    unguarded = ProtocolVariant(reconfig_guards=False)
    with pytest.raises(ActionNotEnabled, match="overlap"):
        reconfig(s, "n1", {"n1"}, variant=unguarded)


def test_reconfig_without_guards_skips_installation_check():
    unguarded = ProtocolVariant(reconfig_guards=False)
    s = reconfig(_elected_three(), "n1", {"n1", "n2"}, variant=unguarded)
    assert s.node("n1").stamp == ConfigStamp(2, 1)


def test_update_terms_steps_down():
    s = state(node(term=1, role=P, cterm=1), node(term=2))
    after = update_terms(s, "n2", "n1")
    assert after.node("n1").term == 2
    assert after.node("n1").role is S
    with pytest.raises(ActionNotEnabled):
        update_terms(after, "n2", "n1")


def test_bounds_prune_enabled_actions(one_server):
    s = state(node(log=[1], term=1, role=P, config=["n1"], cterm=1))
    action = ActionInstance("ClientRequest", "n1")
    assert is_enabled(s, action)
    assert not is_enabled(s, action, one_server)


# --- Malformed input ---


def test_unknown_server_is_malformed():
    with pytest.raises(MalformedInput, match="unknown servers"):
        apply(_elected_three(), ActionInstance("UpdateTerms", "n1", t="n9"))


def test_action_arguments_are_checked():
    with pytest.raises(MalformedInput):
        ActionInstance("CommitEntry", "n1")
    with pytest.raises(MalformedInput):
        ActionInstance("ClientRequest", "n1", t="n2")
    with pytest.raises(MalformedInput):
        ActionInstance("Elect", "n1")


def test_enumeration_rejects_out_of_bounds_states(one_server):
    s = state(node(term=5, config=["n1"]))
    with pytest.raises(MalformedInput):
        enumerate_transitions(s, one_server)


def test_bounds_validation():
    with pytest.raises(MalformedInput):
        ModelBounds.of(2, max_term=0, max_log_len=1, max_config_version=1)
    with pytest.raises(MalformedInput):
        ModelBounds.of(["n1", "n1"], 1, 1, 1)
    assert ModelBounds.of(["n10", "n2"], 1, 1, 1).servers == ("n2", "n10")


# --- Properties over arbitrary bounded states ---


@settings(max_examples=200, deadline=None)
@given(bounded_states(SMALL))
def test_enumeration_matches_brute_force(s):
    expected = {}
    for action in _all_candidates(SMALL):
        if is_enabled(s, action, SMALL):
            expected[action] = apply(s, action, SMALL)
    transitions = enumerate_transitions(s, SMALL)
    assert dict(transitions) == expected
    assert len(transitions) == len(expected)
    keys = [a.sort_key() for a, _ in transitions]
    assert keys == sorted(keys)


@settings(max_examples=150, deadline=None)
@given(bounded_states(THREE))
def test_transitions_touch_only_named_servers(s):
    for action, post in enumerate_transitions(s, THREE):
        changed = {sid for sid in s.ids if s.node(sid) != post.node(sid)}
        if action.kind is ActionKind.BECOME_LEADER:
            assert changed <= action.quorum
        elif action.kind in (ActionKind.SEND_CONFIG, ActionKind.UPDATE_TERMS):
            assert changed <= {action.t}
        elif action.kind is ActionKind.COMMIT_ENTRY:
            assert not changed
            assert len(post.committed - s.committed) == 1
        else:
            assert changed <= {action.s}
        if action.kind is not ActionKind.COMMIT_ENTRY:
            assert post.committed == s.committed


_VARIABLES = ("log", "term", "role", "config", "config_version", "config_term")
_WRITES = {
    ActionKind.CLIENT_REQUEST: {"log"},
    ActionKind.GET_ENTRIES: {"log"},
    ActionKind.ROLLBACK_ENTRIES: {"log"},
    ActionKind.COMMIT_ENTRY: set(),
    ActionKind.SEND_CONFIG: {"config", "config_version", "config_term"},
    ActionKind.RECONFIG: {"config", "config_version", "config_term"},
    ActionKind.BECOME_LEADER: {"term", "role", "config_term"},
    ActionKind.UPDATE_TERMS: {"term", "role"},
}


@settings(max_examples=150, deadline=None)
@given(bounded_states(THREE))
def test_actions_write_only_their_variables(s):
    for action, post in enumerate_transitions(s, THREE):
        for sid in s.ids:
            before, after = s.node(sid), post.node(sid)
            changed = {v for v in _VARIABLES if getattr(before, v) != getattr(after, v)}
            assert changed <= _WRITES[action.kind], action.describe()
            if action.kind is ActionKind.BECOME_LEADER and sid != action.s:
                assert "config_term" not in changed


@settings(max_examples=150, deadline=None)
@given(bounded_states(THREE))
def test_only_rollback_shortens_a_log(s):
    for action, post in enumerate_transitions(s, THREE):
        for sid in s.ids:
            before, after = s.node(sid).log, post.node(sid).log
            if action.kind is ActionKind.ROLLBACK_ENTRIES and sid == action.s:
                assert after == before[:-1]
            else:
                assert after[: len(before)] == before


@settings(max_examples=150, deadline=None)
@given(bounded_states(THREE))
def test_terms_and_commits_never_decrease(s):
    for variant in (ProtocolVariant(), ProtocolVariant(send_config_updates_term=True)):
        for _, post in enumerate_transitions(s, THREE, variant):
            assert post.committed >= s.committed
            for before, after in zip(s.nodes, post.nodes):
                assert after.term >= before.term


@settings(max_examples=100, deadline=None)
@given(bounded_states(SMALL))
def test_successors_stay_within_bounds(s):
    for _, post in enumerate_transitions(s, SMALL):
        assert type_ok(post, SMALL)
