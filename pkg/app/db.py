from __future__ import annotations

import os
from contextlib import contextmanager
from functools import lru_cache
from typing import Iterator, Optional

from sqlmodel import Session, SQLModel, create_engine

from app.config import DATABASE_URL


def _db_url(url: Optional[str] = None) -> str:
    # Default local sqlite file under workspace data/
    url = url or DATABASE_URL
    if url:
        return url
    os.makedirs("data", exist_ok=True)
    return "sqlite:///data/mrr.db"


@lru_cache(maxsize=None)
def get_engine(url: Optional[str] = None):
    return create_engine(_db_url(url), echo=False)


def init_db(url: Optional[str] = None) -> None:
    # registers the table classes on SQLModel.metadata
    from app.persistence import models  # noqa: F401

    SQLModel.metadata.create_all(get_engine(url))


@contextmanager
def session_scope(url: Optional[str] = None) -> Iterator[Session]:
    with Session(get_engine(url)) as session:
        yield session
