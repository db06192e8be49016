from __future__ import annotations


class MrrError(Exception):
    """Base class for every error raised by the checker."""


class MalformedInput(MrrError, ValueError):
    """Input that does not describe a valid state, action, bounds or file."""


class UnknownInvariant(MalformedInput):
    def __init__(self, name: str):
        super().__init__(f"unknown invariant: {name!r}")
        self.name = name


class ActionNotEnabled(MrrError):
    """The action's guard is false in the given state."""

    def __init__(self, action: str, reason: str = ""):
        message = f"not enabled: {action}"
        if reason:
            message += f" ({reason})"
        super().__init__(message)
        self.action = action
        self.reason = reason


class BudgetExceeded(MrrError):
    def __init__(self, estimate: int, budget: int):
        super().__init__(
            f"state space estimate {estimate} exceeds the exhaustive budget {budget}"
        )
        self.estimate = estimate
        self.budget = budget


class TraceReplayError(MalformedInput):
    def __init__(self, step: int, reason: str):
        super().__init__(f"trace step {step}: {reason}")
        self.step = step
        self.reason = reason
