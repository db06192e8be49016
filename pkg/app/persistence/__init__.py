"""Persistence (SQLModel/DB) package."""

