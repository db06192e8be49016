from __future__ import annotations

from typing import List, Optional

from sqlmodel import select

from app.codec import canonical_json
from app.config import TOOL_VERSION, logger
from app.db import init_db, session_scope
from app.persistence.models import RunRecord
from app.services.run_service import RunConfig, RunOutcome


class LedgerService:
    """Keeps a history of runs in the run ledger database."""

    def __init__(self, url: Optional[str] = None):
        self.url = url
        init_db(url)

    def record(self, cfg: RunConfig, outcome: RunOutcome) -> RunRecord:
        with session_scope(self.url) as session:
            row = RunRecord(
                command=cfg.command,
                config_json=canonical_json(cfg.to_dict()),
                verdict=outcome.verdict,
                exit_code=outcome.exit_code,
                states=outcome.states,
                findings=outcome.findings,
                wall_time_ms=outcome.wall_time_ms,
                tool_version=TOOL_VERSION,
            )
            session.add(row)
            session.commit()
            session.refresh(row)
            logger.debug("Recorded run %d (%s).", row.id, row.command)
            return row

    def recent(self, limit: int = 20) -> List[RunRecord]:
        with session_scope(self.url) as session:
            rows = session.exec(select(RunRecord).order_by(RunRecord.id.desc()).limit(limit)).all()
            return list(rows)

    def render(self, rows: List[RunRecord]) -> str:
        if not rows:
            return "No recorded runs.\n"
        lines = [f"{'id':>4}  {'when':<19}  {'command':<10}  {'verdict':<10}  {'exit':>4}  {'states':>9}  {'found':>5}"]
        for r in rows:
            lines.append(
                f"{r.id:>4}  {r.created_at:%Y-%m-%d %H:%M:%S}  {r.command:<10}  {r.verdict:<10}  "
                f"{r.exit_code:>4}  {r.states:>9}  {r.findings:>5}"
            )
        return "\n".join(lines) + "\n"
