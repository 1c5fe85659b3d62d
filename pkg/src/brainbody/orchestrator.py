"""Planner/translator loop with environment feedback.

A planning model (the "brain") writes a numbered natural-language plan; a
translation model (the "body") turns each step into one action primitive or
``[Pass]``; the environment executes it. Any failure (execution error,
unparseable command, unparseable plan) is fed back to the planner, which
writes a full revised plan that runs from its first step against the current,
never rolled back, environment state. At most ``K`` such revisions happen.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

from . import resources
from .grammar import PASS, ParseError
from .llm import LLMError, Message, PromptMessages, Session
from .world import Environment, ExecError

logger = logging.getLogger(__name__)

HOUSEHOLD = "HOUSEHOLD"
TABLETOP = "TABLETOP"

COMPLETED = "Completed"
BUDGET_EXHAUSTED = "FeedbackBudgetExhausted"
OSCILLATION = "OscillationDetected"
BACKEND_ERROR = "BackendError"


class PlanParseError(ValueError):
    def __init__(self, completion: str):
        self.completion = completion
        super().__init__("no numbered steps found in planner output")


# ---- data ---------------------------------------------------------------------


@dataclass
class TaskSpec:
    id: str
    description: str
    kind: str = HOUSEHOLD
    scene: Any = None
    ground_truth: str | None = None
    relevant_objects: list[str] | None = None
    goal: Any = None


@dataclass(frozen=True)
class PlanStep:
    index: int
    text: str
    rationale: str | None = None

    def render(self) -> str:
        line = f"{self.index}. {self.text}"
        return f"{line} // {self.rationale}" if self.rationale else line


@dataclass(frozen=True)
class Plan:
    steps: tuple[PlanStep, ...]
    revision: int = 0

    def render(self) -> str:
        return "\n".join(s.render() for s in self.steps)

    def normalized(self) -> str:
        """Plan text reduced for oscillation comparison (no rationale, case, punctuation)."""
        return "\n".join(" ".join(re.sub(r"[^a-z0-9]+", " ", s.text.lower()).split()) for s in self.steps)

    def to_dict(self) -> dict:
        return {
            "revision": self.revision,
            "steps": [{"index": s.index, "text": s.text, "rationale": s.rationale} for s in self.steps],
        }

    @classmethod
    def from_dict(cls, data: dict) -> Plan:
        return cls(tuple(PlanStep(s["index"], s["text"], s.get("rationale")) for s in data["steps"]), data["revision"])


@dataclass(frozen=True)
class Feedback:
    perception_summary: str
    failed_step: str
    error: str
    revision_request: str


@dataclass(frozen=True)
class LoopConfig:
    max_feedback_loops: int = 3
    oscillation_guard: bool = True
    strict_replay: bool = False

    def __post_init__(self) -> None:
        if self.max_feedback_loops < 0:
            raise ValueError("max_feedback_loops must be >= 0")


@dataclass(frozen=True)
class Attempt:
    revision: int
    step_index: int
    step_text: str
    completion: str
    command: str | None
    outcome: str  # ok | pass | exec_error | parse_error
    error_code: str | None = None
    error_message: str | None = None

    @property
    def concrete(self) -> bool:
        return self.outcome != "pass"

    def to_dict(self) -> dict:
        return {
            "revision": self.revision,
            "step_index": self.step_index,
            "step_text": self.step_text,
            "completion": self.completion,
            "command": self.command,
            "outcome": self.outcome,
            "error_code": self.error_code,
            "error_message": self.error_message,
        }

    @classmethod
    def from_dict(cls, d: dict) -> Attempt:
        return cls(**{k: d.get(k) for k in cls.__dataclass_fields__})


@dataclass(frozen=True)
class FailureEvent:
    revision: int
    kind: str  # exec_error | parse_error | plan_parse_error
    message: str

    def to_dict(self) -> dict:
        return {"revision": self.revision, "kind": self.kind, "message": self.message}


@dataclass
class EpisodeTrace:
    task_id: str
    plans: list[Plan] = field(default_factory=list)
    attempts: list[Attempt] = field(default_factory=list)
    failures: list[FailureEvent] = field(default_factory=list)
    final_state: dict = field(default_factory=dict)
    final_summary: str = ""
    status: str = COMPLETED
    detail: str = ""
    brain_calls: int = 0
    body_calls: int = 0

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "status": self.status,
            "detail": self.detail,
            "plans": [p.to_dict() for p in self.plans],
            "attempts": [a.to_dict() for a in self.attempts],
            "failures": [f.to_dict() for f in self.failures],
            "final_state": self.final_state,
            "final_summary": self.final_summary,
            "brain_calls": self.brain_calls,
            "body_calls": self.body_calls,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, ensure_ascii=False) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> EpisodeTrace:
        return cls(
            task_id=d["task_id"],
            plans=[Plan.from_dict(p) for p in d.get("plans", ())],
            attempts=[Attempt.from_dict(a) for a in d.get("attempts", ())],
            failures=[FailureEvent(**f) for f in d.get("failures", ())],
            final_state=d.get("final_state", {}),
            final_summary=d.get("final_summary", ""),
            status=d["status"],
            detail=d.get("detail", ""),
            brain_calls=d.get("brain_calls", 0),
            body_calls=d.get("body_calls", 0),
        )

    @classmethod
    def from_json(cls, text: str) -> EpisodeTrace:
        return cls.from_dict(json.loads(text))


# ---- prompts ------------------------------------------------------------------

_PLACEHOLDER_RE = re.compile(r"\{([a-z_]+)\}")


def fill_template(template: str, **values: str) -> str:
    """Substitute ``{name}`` placeholders; unknown names are left untouched."""
    return _PLACEHOLDER_RE.sub(lambda m: values.get(m.group(1), m.group(0)), template)


def _read_json(path: Path) -> list:
    return json.loads(path.read_text(encoding="utf-8"))


@dataclass
class PromptKit:
    """Prompt templates and exemplar pools for one environment kind."""

    templates: dict[str, str]
    planning_exemplars: list[tuple[str, str]]
    feedback_exemplars: list[tuple[str, str]]
    body_exemplars: list[tuple[str, str]]

    @classmethod
    def load(cls, kind: str, prompt_dir: Path | None = None, exemplar_dir: Path | None = None) -> PromptKit:
        prompt_dir = prompt_dir or resources.path("prompts")
        exemplar_dir = exemplar_dir or resources.path("exemplars")
        templates = {p.stem: p.read_text(encoding="utf-8") for p in sorted(prompt_dir.glob("*.txt"))}
        prefix = kind.lower()

        def pairs(name: str, a: str, b: str) -> list[tuple[str, str]]:
            return [(d[a], d[b]) for d in _read_json(exemplar_dir / f"{prefix}_{name}.json")]

        return cls(
            templates=templates,
            planning_exemplars=pairs("planning", "task", "plan"),
            feedback_exemplars=pairs("feedback", "error", "revised_plan"),
            body_exemplars=pairs("body", "step", "command"),
        )

    def master(self, kind: str) -> str:
        return fill_template(self.templates["brain_master"], environment=self.templates[f"environment_{kind.lower()}"]).strip()


def _format_plan_exemplars(exemplars: Sequence[tuple[str, str]]) -> str:
    return "\n\n".join(f"Task: {task}\nPlan:\n{plan.strip()}" for task, plan in exemplars)


def build_planning_prompt(task: TaskSpec, perception, exemplars: Sequence[tuple[str, str]], kit: PromptKit) -> PromptMessages:
    if not exemplars:
        raise ValueError("planning prompt needs at least one exemplar")
    user = fill_template(
        kit.templates["planning"],
        exemplars=_format_plan_exemplars(exemplars),
        task=task.description,
        state=perception.state_summary,
    ).strip()
    return PromptMessages.of(kit.master(task.kind), ("user", user))


def build_feedback_prompt(
    task: TaskSpec, prior_plan: Plan, feedback: Feedback | None, exemplars: Sequence[tuple[str, str]], kit: PromptKit
) -> PromptMessages:
    if feedback is None:
        raise ValueError("feedback prompt needs feedback")
    shots = "\n\n".join(f"Error: {err}\nRevised plan:\n{plan.strip()}" for err, plan in exemplars)
    user = fill_template(
        kit.templates["feedback"],
        exemplars=shots,
        task=task.description,
        prior_plan=prior_plan.render(),
        failed_step=feedback.failed_step,
        error=feedback.error,
        state=feedback.perception_summary,
        revision_request=feedback.revision_request,
    ).strip()
    return PromptMessages.of(kit.master(task.kind), ("user", user))


def build_translation_prompt(step: PlanStep, catalog, exemplars: Sequence[tuple[str, str]], kit: PromptKit) -> PromptMessages:
    system = fill_template(kit.templates["body_master"], commands=catalog.describe()).strip()
    shots = "\n\n".join(f"Step: {s}\nCommand: {c}" for s, c in exemplars)
    user = fill_template(kit.templates["body_step"], exemplars=shots, step=step.text).strip()
    return PromptMessages.of(system, ("user", user))


# ---- plan parsing / translation -----------------------------------------------

_STEP_LINE_RE = re.compile(r"^\s*(?:[-*]\s*)?(?:step\s*)?(\d+)\s*[.):]\s*(.*\S)\s*$", re.I)


def parse_plan(completion: str, revision: int = 0) -> Plan:
    """Extract numbered steps; other lines (explanations) are ignored.

    Accepts ``1.``, ``1)`` and ``Step 1:`` prefixes. Text after ``//`` becomes
    the step rationale. Steps are renumbered contiguously from 1.
    """
    steps = []
    for line in completion.splitlines():
        m = _STEP_LINE_RE.match(line)
        if m is None:
            continue
        body, _, rationale = m.group(2).partition("//")
        body = body.strip()
        if not body:
            continue
        steps.append(PlanStep(len(steps) + 1, body, rationale.strip() or None))
    if not steps:
        raise PlanParseError(completion)
    return Plan(tuple(steps), revision)


def plan(brain: Session, prompt: PromptMessages, revision: int = 0) -> Plan:
    return parse_plan(brain.complete(prompt), revision)


def translate(body: Session, step: PlanStep, catalog, exemplars: Sequence[tuple[str, str]], kit: PromptKit):
    """One Body completion for one step -> ``(completion, parsed result)``.

    ``catalog`` is anything with ``parse(text)`` and ``describe()``; parse
    failures propagate as :class:`ParseError`.
    """
    completion = body.complete(build_translation_prompt(step, catalog, exemplars, kit))
    return completion, catalog.parse(completion.strip())


# ---- the loop -----------------------------------------------------------------


class _Catalog:
    """Adapter exposing an environment's grammar as a catalog."""

    def __init__(self, env: Environment):
        self.env = env

    def parse(self, text: str):
        return self.env.parse(text)

    def describe(self) -> str:
        return self.env.command_help()


def run_episode(
    task: TaskSpec,
    env: Environment,
    brain: Session,
    body: Session,
    config: LoopConfig | None = None,
    kit: PromptKit | None = None,
) -> EpisodeTrace:
    config = config or LoopConfig()
    kit = kit or PromptKit.load(task.kind)
    catalog = _Catalog(env)
    trace = EpisodeTrace(task_id=task.id)
    loops_used = 0
    seen: dict[str, int] = {}

    def finish(status: str, detail: str = "") -> EpisodeTrace:
        trace.status = status
        trace.detail = detail
        trace.final_state = env.snapshot()
        trace.final_summary = env.perceive().state_summary
        trace.brain_calls = len(brain.exchanges)
        trace.body_calls = len(body.exchanges)
        return trace

    def ask(prompt: PromptMessages) -> Plan | PlanParseError:
        try:
            return plan(brain, prompt, revision=len(trace.plans))
        except PlanParseError as exc:
            return exc

    prompt = build_planning_prompt(task, env.perceive(), kit.planning_exemplars, kit)
    try:
        result = ask(prompt)
    except LLMError as exc:
        return finish(BACKEND_ERROR, f"planner: {exc}")

    while True:
        failure: tuple[str, str, str] | None = None  # (kind, failed step, message)
        if isinstance(result, PlanParseError):
            failure = ("plan_parse_error", "(no plan)", "The previous answer contained no numbered plan steps.")
        else:
            current = result
            key = current.normalized()
            if config.oscillation_guard and key in seen:
                trace.plans.append(current)
                return finish(OSCILLATION, f"revision {current.revision} repeats revision {seen[key]}")
            seen.setdefault(key, current.revision)
            trace.plans.append(current)
            for step in current.steps:
                try:
                    completion, command = translate(body, step, catalog, kit.body_exemplars, kit)
                except ParseError as exc:
                    msg = f"Could not translate step '{step.text}' into a command: {exc}"
                    trace.attempts.append(
                        Attempt(current.revision, step.index, step.text, exc.text, None, "parse_error", exc.reason.value, msg)
                    )
                    failure = ("parse_error", f"{step.index}. {step.text}", msg)
                    break
                except LLMError as exc:
                    return finish(BACKEND_ERROR, f"translator: {exc}")
                if command is PASS:
                    trace.attempts.append(Attempt(current.revision, step.index, step.text, completion, PASS.render(), "pass"))
                    continue
                outcome = env.execute(command)
                err: ExecError | None = outcome.error
                trace.attempts.append(
                    Attempt(
                        current.revision,
                        step.index,
                        step.text,
                        completion,
                        command.render(),
                        "ok" if err is None else "exec_error",
                        err.code if err else None,
                        err.message if err else None,
                    )
                )
                if err is not None:
                    failure = ("exec_error", command.render(), err.message)
                    break
            if failure is None:
                return finish(COMPLETED)

        kind, failed_step, message = failure
        trace.failures.append(FailureEvent(len(trace.plans) - 1, kind, message))
        if loops_used >= config.max_feedback_loops:
            return finish(BUDGET_EXHAUSTED, f"{kind} after {loops_used} feedback loop(s): {message}")
        loops_used += 1
        perception = env.perceive()
        if isinstance(result, PlanParseError):
            reminder = kit.templates["format_reminder"].strip()
            prompt = PromptMessages(prompt.messages + (Message("assistant", result.completion), Message("user", reminder)))
        else:
            fb = Feedback(
                perception_summary=perception.state_summary,
                failed_step=failed_step,
                error=message,
                revision_request=kit.templates["revision_request"].strip(),
            )
            prompt = build_feedback_prompt(task, result, fb, kit.feedback_exemplars, kit)
        logger.debug("task %s: feedback loop %d after %s", task.id, loops_used, kind)
        try:
            result = ask(prompt)
        except LLMError as exc:
            return finish(BACKEND_ERROR, f"planner: {exc}")

