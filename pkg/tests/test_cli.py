import json

import pytest

from app.codec import dump_json
from app.db import get_engine
from app.errors import MalformedInput
from app.persistence.models import RunRecord
from app.services.ledger_service import LedgerService
from app.services.run_service import RunConfig, RunOutcome
from cli.main import run

ONE_SERVER = ["--servers", "1", "--max-term", "1", "--max-log-len", "1", "--max-config-version", "1"]
MUTATION = [
    "--servers", "3", "--max-term", "1", "--max-log-len", "0", "--max-config-version", "3",
    "--disable-reconfig-guards", "--stop-at-first",
]


def _report(capsys):
    return json.loads(capsys.readouterr().out)


def test_invariants_listing(capsys):
    assert run(["invariants"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 22
    assert "TypeOK" in lines[0]
    assert "MRRInd" in lines[-1]


def test_check_report(capsys):
    assert run(["check", *ONE_SERVER]) == 0
    report = _report(capsys)
    assert report["command"] == "check"
    assert report["bounds"] == {"servers": ["n1"], "maxTerm": 1, "maxLogLen": 1, "maxConfigVersion": 1}
    assert report["config"]["maxTerm"] == 1
    assert report["result"]["statesVisited"] == 4
    assert report["result"]["diameter"] == 3
    assert report["result"]["violations"] == []


def test_reports_are_identical_apart_from_wall_time(capsys):
    run(["check", *ONE_SERVER])
    first = _report(capsys)
    run(["check", *ONE_SERVER, "--threads", "2"])
    second = _report(capsys)
    for report in (first, second):
        report.pop("wallTimeMs")
        report["config"].pop("threads")
    assert first == second


def test_incomplete_check(capsys):
    assert run(["check", *ONE_SERVER, "--max-states", "2"]) == 3
    assert _report(capsys)["result"]["complete"] is False


def test_usage_errors(capsys):
    assert run(["check", "--invariants", "Nope"]) == 2
    assert "unknown invariant" in capsys.readouterr().err
    assert run(["check", "--no-such-flag"]) == 2
    assert run([]) == 2
    assert run(["induction", "--actions", "Elect"]) == 2


def test_mutation_check_and_replay(tmp_path, capsys):
    out = tmp_path / "report.json"
    assert run(["check", *MUTATION, "-o", str(out)]) == 1
    report = json.loads(out.read_text(encoding="utf-8"))
    violation = report["result"]["violations"][0]
    assert violation["invariant"] == "ActiveConfigsOverlap"
    assert violation["depth"] == 3

    trace = tmp_path / "trace.json"
    trace.write_text(json.dumps(violation["trace"]), encoding="utf-8")
    capsys.readouterr()
    assert run(["replay", str(trace), "--disable-reconfig-guards"]) == 1
    replayed = _report(capsys)
    assert {"step": 3, "invariant": "ActiveConfigsOverlap"} in replayed["result"]["violations"]

    assert run(["replay", str(trace)]) == 2
    assert "trace step 2" in capsys.readouterr().err


def test_replay_missing_file(tmp_path, capsys):
    assert run(["replay", str(tmp_path / "none.json")]) == 2
    assert "cannot read" in capsys.readouterr().err


def test_simulate(capsys):
    assert run(["simulate", *ONE_SERVER, "--steps", "10", "--seed", "4"]) == 0
    result = _report(capsys)["result"]
    assert result["stepsTaken"] == 3
    assert result["deadlocked"] is True
    assert len(result["trace"]["steps"]) == 3


def test_induction_initiation(capsys):
    assert run(["induction", "--mode", "initiation", "--servers", "3", "--init-members", "all"]) == 0
    assert len(_report(capsys)["result"]["initialConfigs"]) == 7


def test_induction_exhaustive_cti(capsys):
    args = [
        "induction", "--mode", "exhaustive", "--servers", "1", "--max-term", "2", "--max-log-len", "1",
        "--max-config-version", "1", "--candidate", "TypeOK", "--conjuncts", "LeaderCompleteness",
    ]
    assert run(args) == 1
    result = _report(capsys)["result"]
    assert result["spaceEstimate"] == 18432
    assert result["ctiCount"] > 0
    assert result["ctis"][0]["goal"]["conjunct"] == "LeaderCompleteness"

    assert run([*args, "--matrix"]) == 1
    assert capsys.readouterr().out.startswith("Goal matrix")


def test_induction_budget(capsys):
    args = ["induction", "--mode", "exhaustive", "--servers", "3", "--max-term", "3", "--max-log-len", "2"]
    assert run([*args, "--max-config-version", "3"]) == 2
    assert "exceeds" in capsys.readouterr().err


def test_induction_sampled_drop_conjunct(capsys):
    args = ["induction", "--samples", "10000", "--seed", "42", "--drop-conjunct", "ElectionSafety"]
    assert run(args) == 1
    result = _report(capsys)["result"]
    assert "ElectionSafety" not in result["candidate"]
    assert result["drawn"] == 10000
    assert result["ctiCount"] > 0


def test_run_config_validation():
    with pytest.raises(MalformedInput, match="samples"):
        RunConfig.build(command="induction", samples=0)
    with pytest.raises(MalformedInput):
        RunConfig.build(command="check", unknown=1)
    assert RunConfig.build(command="check").to_dict()["maxConfigVersion"] == 2


def test_ledger_records_runs(tmp_path):
    ledger = LedgerService(f"sqlite:///{tmp_path / 'ledger.db'}")
    row = ledger.record(RunConfig.build(command="check"), RunOutcome(0, "ok", states=4))
    assert row.id is not None
    rows = ledger.recent()
    assert [r.command for r in rows] == ["check"]
    assert rows[0].states == 4
    assert "check" in ledger.render(rows)
    assert ledger.render([]) == "No recorded runs.\n"


def test_history_command(tmp_path, monkeypatch, capsys):
    monkeypatch.setattr("app.db.DATABASE_URL", f"sqlite:///{tmp_path / 'history.db'}")
    get_engine.cache_clear()
    try:
        assert run(["check", *ONE_SERVER, "--record"]) == 0
        capsys.readouterr()
        assert run(["history"]) == 0
        out = capsys.readouterr().out
    finally:
        get_engine.cache_clear()
    assert "check" in out
    assert "ok" in out


def test_unwritable_output_is_a_usage_error(tmp_path, capsys):
    target = tmp_path / "missing" / "report.json"
    assert run(["check", *ONE_SERVER, "-o", str(target)]) == 2
    assert "cannot write report file" in capsys.readouterr().err
    assert not target.exists()


@pytest.mark.parametrize("command", ["check", "simulate"])
def test_all_member_sets_only_for_initiation(command, capsys):
    assert run([command, *ONE_SERVER, "--init-members", "all"]) == 2
    assert "initiation" in capsys.readouterr().err
    assert run(["induction", "--mode", "sample", "--samples", "10", "--init-members", "all"]) == 2


def test_report_and_config_round_trip(tmp_path):
    out = tmp_path / "report.json"
    assert run(["check", *ONE_SERVER, "--stop-at-first", "-o", str(out)]) == 0
    text = out.read_text(encoding="utf-8")
    report = json.loads(text)
    assert dump_json(report) == text
    assert RunConfig.build(**report["config"]).to_dict() == report["config"]

    cfg = RunConfig.build(
        command="induction", mode="exhaustive", servers=["a", "b"], candidate=["ElectionSafety"], init_members=["a"]
    )
    assert RunConfig.build(**cfg.to_dict()) == cfg


def test_run_records_carry_an_aware_timestamp():
    row = RunRecord(command="check", config_json="{}")
    assert row.created_at.tzinfo is not None
