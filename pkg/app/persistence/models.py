from __future__ import annotations

from datetime import datetime, timezone
from typing import Optional

from sqlmodel import Field, SQLModel


class RunRecord(SQLModel, table=True):
    """One recorded CLI run."""
    id: Optional[int] = Field(default=None, primary_key=True)
    command: str = Field(index=True)  # check|induction|simulate|replay
    config_json: str
    verdict: str = Field(default="", index=True)  # ok|violation|cti|incomplete|error
    exit_code: int = 0
    states: int = 0  # states visited, or accepted samples for induction
    findings: int = 0  # violations or CTIs
    wall_time_ms: int = 0
    tool_version: str = Field(default="")
    created_at: datetime = Field(default_factory=lambda: datetime.now(timezone.utc), index=True)
