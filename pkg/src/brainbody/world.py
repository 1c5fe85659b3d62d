"""Types shared by the simulators and the planning loop."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Protocol

from .grammar import TranslationResult


class SceneError(ValueError):
    """A scene file violates a world invariant."""


@dataclass(frozen=True)
class ExecError:
    code: str
    message: str

    def to_dict(self) -> dict[str, str]:
        return {"code": self.code, "message": self.message}

    @classmethod
    def from_dict(cls, data: dict[str, str]) -> ExecError:
        return cls(data["code"], data["message"])


@dataclass(frozen=True)
class Perception:
    state_summary: str
    last_error: ExecError | None = None


@dataclass(frozen=True)
class StepOutcome:
    error: ExecError | None = None
    delta: frozenset = frozenset()

    @property
    def ok(self) -> bool:
        return self.error is None


class Environment(Protocol):
    """What the planning loop needs from a simulator handle."""

    kind: str

    def parse(self, text: str) -> TranslationResult: ...

    def execute(self, step: Any) -> StepOutcome: ...

    def perceive(self) -> Perception: ...

    def snapshot(self) -> dict: ...

    def command_help(self) -> str: ...
