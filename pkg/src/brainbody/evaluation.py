"""Dataset loading, plan-quality metrics, suite runs and report emission.

Metrics per episode:

* EXEC  - executed-without-error commands / concrete commands attempted,
          pooled over every plan revision; ``[Pass]`` steps are excluded.
* GCR   - ``1 - unsatisfied / total`` goal conditions, where the goal
          conditions are the state diff produced by running the reference
          script on a fresh copy of the scene.
* SR    - 1 iff every goal condition is satisfied.
* CSR   - SR restricted to conditions touching the task's relevant objects.

For tabletop tasks the goal predicate's conjuncts play the role of goal
conditions (GCR is the fraction that hold; SR == CSR == all hold).
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol, Sequence, Union

from . import resources
from .grammar import ActionCatalog, ActionStep, ScriptParseError, parse_script
from .household import (
    AGENT,
    Condition,
    HouseholdEnv,
    WorldState,
    check_conditions,
    default_catalog,
    load_scene,
    parse_ref,
    state_diff,
)
from .llm import HttpConfig, ScriptedConfig, Session, open_session, record
from .orchestrator import HOUSEHOLD, TABLETOP, EpisodeTrace, LoopConfig, PromptKit, TaskSpec, run_episode
from .tabletop import TabletopState, TabletopTask, TabletopEnv, load_tabletop_task

logger = logging.getLogger(__name__)

SPLITS = ("TRAIN", "VALIDATION", "TEST")
METRICS = ("csr", "gcr", "exec", "sr")


class SchemaError(ValueError):
    pass


class DatasetError(RuntimeError):
    pass


class MissingAnnotation(ValueError):
    pass


@dataclass(frozen=True)
class TaskTuple:
    id: str
    description: str
    plan: str
    script: str
    split: str
    relevant_objects: tuple[str, ...] = ()
    scene: str = "home"

    def to_task_spec(self, scene_dir: Path | None = None) -> TaskSpec:
        scene = (scene_dir or resources.path("scenes")) / f"{self.scene}.json"
        return TaskSpec(
            id=self.id,
            description=self.description,
            kind=HOUSEHOLD,
            scene=scene,
            ground_truth=self.script,
            relevant_objects=list(self.relevant_objects),
        )

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "description": self.description,
            "plan": self.plan,
            "script": self.script,
            "split": self.split,
            "relevant_objects": list(self.relevant_objects),
            "scene": self.scene,
        }


def load_dataset(path: str | Path, catalog: ActionCatalog | None = None) -> list[TaskTuple]:
    """Read a JSON Lines dataset; every reference script must parse."""
    catalog = catalog or default_catalog()
    out = []
    ids = set()
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            data = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"line {lineno}: invalid JSON ({exc.msg})") from exc
        for key in ("id", "description", "plan", "script", "split"):
            if not isinstance(data.get(key), str):
                raise SchemaError(f"line {lineno}: field '{key}' missing or not a string")
        if data["split"] not in SPLITS:
            raise SchemaError(f"line {lineno}: field 'split' must be one of {SPLITS}")
        if data["id"] in ids:
            raise SchemaError(f"line {lineno}: field 'id' duplicates {data['id']!r}")
        ids.add(data["id"])
        try:
            parse_script(data["script"], catalog)
        except ScriptParseError as exc:
            raise SchemaError(f"line {lineno}: field 'script': {exc}") from exc
        relevant = data.get("relevant_objects", [])
        if not isinstance(relevant, list):
            raise SchemaError(f"line {lineno}: field 'relevant_objects' must be a list")
        for ref in relevant:
            try:
                parse_ref(ref)
            except (ValueError, TypeError) as exc:
                raise SchemaError(f"line {lineno}: field 'relevant_objects': {exc}") from exc
        if data["split"] == "TEST" and not relevant:
            raise SchemaError(f"line {lineno}: field 'relevant_objects' must be non-empty for TEST tasks")
        out.append(
            TaskTuple(
                id=data["id"],
                description=data["description"],
                plan=data["plan"],
                script=data["script"],
                split=data["split"],
                relevant_objects=tuple(relevant),
                scene=data.get("scene", "home"),
            )
        )
    return out


# ---- metrics -----------------------------------------------------------------


def exec_score(trace: EpisodeTrace) -> float:
    concrete = [a for a in trace.attempts if a.concrete]
    if not concrete:
        return 1.0
    return sum(a.outcome == "ok" for a in concrete) / len(concrete)


def reference_final_state(tup: TaskTuple, scene: HouseholdEnv) -> WorldState:
    """Run the reference script on a fresh copy of ``scene``."""
    env = scene.fresh()
    for lineno, step in enumerate(parse_script(tup.script, env.catalog), start=1):
        if not isinstance(step, ActionStep):
            continue
        outcome = env.execute(step)
        if not outcome.ok:
            raise DatasetError(f"task {tup.id}: reference step {lineno} fails: {outcome.error.message}")
    return env.state


def goal_conditions(tup: TaskTuple, scene: HouseholdEnv) -> frozenset[Condition]:
    return state_diff(scene.initial_state, reference_final_state(tup, scene))


def _final_world(trace: EpisodeTrace) -> WorldState:
    return WorldState.from_dict(trace.final_state)


def gcr_from_conditions(final: WorldState, tgc: frozenset[Condition]) -> float:
    if not tgc:
        return 1.0
    _, unsat = check_conditions(final, tgc)
    return 1.0 - len(unsat) / len(tgc)


def gcr(trace: EpisodeTrace, tup: TaskTuple, scene: HouseholdEnv) -> float:
    return gcr_from_conditions(_final_world(trace), goal_conditions(tup, scene))


def _touches(cond: Condition, relevant: set[str]) -> bool:
    return cond.subject in relevant or (bool(cond.object) and cond.object in relevant)


def sr_csr_from_conditions(final: WorldState, tgc: frozenset[Condition], relevant: Sequence[str] | None) -> tuple[int, int]:
    _, unsat = check_conditions(final, tgc)
    sr = int(not unsat)
    if not relevant:
        raise MissingAnnotation("CSR needs relevant_objects")
    rel = {parse_ref(r).render() if r != AGENT else AGENT for r in relevant}
    csr = int(not any(_touches(c, rel) for c in unsat))
    return sr, csr


def sr_and_csr(trace: EpisodeTrace, tup: TaskTuple, scene: HouseholdEnv) -> tuple[int, int]:
    return sr_csr_from_conditions(_final_world(trace), goal_conditions(tup, scene), tup.relevant_objects)


@dataclass(frozen=True)
class EpisodeScores:
    task_id: str
    run: int
    exec: float
    gcr: float
    sr: int
    csr: int
    status: str

    def get(self, metric: str) -> float:
        return float(getattr(self, metric))


def score_household(trace: EpisodeTrace, tgc: frozenset[Condition], relevant: Sequence[str], run: int = 0) -> EpisodeScores:
    final = _final_world(trace)
    g = gcr_from_conditions(final, tgc)
    sr, csr = sr_csr_from_conditions(final, tgc, relevant)
    return EpisodeScores(trace.task_id, run, exec_score(trace), g, sr, csr, trace.status)


def score_tabletop(trace: EpisodeTrace, task: TabletopTask, run: int = 0) -> EpisodeScores:
    final = TabletopState.from_dict(trace.final_state)
    frac = task.goal.fraction(final)
    ok = int(task.goal.holds(final))
    return EpisodeScores(trace.task_id, run, exec_score(trace), frac, ok, ok, trace.status)


# ---- reports -------------------------------------------------------------------


def _mean_std(values: Sequence[float]) -> tuple[float, float]:
    if not values:
        return 0.0, 0.0
    mean = math.fsum(values) / len(values)
    return mean, statistics.pstdev(values, mu=mean) if len(values) > 1 else 0.0


@dataclass
class MetricsReport:
    scores: list[EpisodeScores]
    config: dict = field(default_factory=dict)

    @property
    def task_ids(self) -> list[str]:
        seen: list[str] = []
        for s in self.scores:
            if s.task_id not in seen:
                seen.append(s.task_id)
        return seen

    @property
    def runs(self) -> list[int]:
        return sorted({s.run for s in self.scores})

    def per_task(self, task_id: str, metric: str) -> tuple[float, float]:
        return _mean_std([s.get(metric) for s in self.scores if s.task_id == task_id])

    def run_means(self, metric: str) -> list[float]:
        out = []
        for r in self.runs:
            vals = [s.get(metric) for s in self.scores if s.run == r]
            out.append(math.fsum(vals) / len(vals))
        return out

    def aggregate(self, metric: str) -> tuple[float, float]:
        """Mean and population std, over runs, of the per-run task average."""
        return _mean_std(self.run_means(metric))

    @property
    def backend_errors(self) -> int:
        return sum(s.status == "BackendError" for s in self.scores)

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "aggregate": {m: dict(zip(("mean", "std"), self.aggregate(m))) for m in METRICS},
            "per_task": {
                t: {m: dict(zip(("mean", "std"), self.per_task(t, m))) for m in METRICS} for t in self.task_ids
            },
            "episodes": [s.__dict__ for s in self.scores],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["task", *METRICS])
        for t in self.task_ids:
            w.writerow([t, *(f"{self.per_task(t, m)[0]:.4f}" for m in METRICS)])
        w.writerow(["mean", *(f"{self.aggregate(m)[0]:.4f}" for m in METRICS)])
        return buf.getvalue()

    def to_table(self) -> str:
        width = max([len("Task"), *(len(t) for t in self.task_ids)])
        header = f"{'Task':<{width}}  {'CSR':>6}  {'GCR':>6}  {'EXEC':>6}  {'SR':>6}"
        lines = [header, "-" * len(header)]
        for t in self.task_ids:
            vals = "  ".join(f"{self.per_task(t, m)[0]:>6.2f}" for m in METRICS)
            lines.append(f"{t:<{width}}  {vals}")
        lines.append("-" * len(header))
        for m in METRICS:
            mean, std = self.aggregate(m)
            lines.append(f"{m.upper():>4}: {mean:.4f} +/- {std:.4f}")
        cfg = ", ".join(f"{k}={v}" for k, v in sorted(self.config.items()))
        if cfg:
            lines.append(f"config: {cfg}")
        return "\n".join(lines) + "\n"


# ---- sessions for suites -------------------------------------------------------


class SessionFactory(Protocol):
    def open(self, task_id: str, run: int) -> tuple[Session, Session]: ...

    def close(self, task_id: str, run: int, brain: Session, body: Session) -> None: ...


class ScriptedSessions:
    """Replays ``<task>.brain.jsonl`` / ``<task>.body.jsonl`` from a directory.

    Per-run transcripts (``<task>.run<r>.brain.jsonl``) take precedence when
    present, so recorded live runs replay run-for-run.
    """

    def __init__(self, transcripts_dir: str | Path, strict: bool = False):
        self.dir = Path(transcripts_dir)
        self.strict = strict

    def paths(self, task_id: str, run: int) -> tuple[Path, Path]:
        per_run = (self.dir / f"{task_id}.run{run}.brain.jsonl", self.dir / f"{task_id}.run{run}.body.jsonl")
        if per_run[0].is_file() and per_run[1].is_file():
            return per_run
        return self.dir / f"{task_id}.brain.jsonl", self.dir / f"{task_id}.body.jsonl"

    def missing(self, task_ids: Sequence[str]) -> list[str]:
        return [t for t in task_ids if not all(p.is_file() for p in self.paths(t, 0))]

    def open(self, task_id: str, run: int) -> tuple[Session, Session]:
        brain_p, body_p = self.paths(task_id, run)
        return (
            open_session(ScriptedConfig(brain_p, strict=self.strict)),
            open_session(ScriptedConfig(body_p, strict=self.strict)),
        )

    def close(self, task_id: str, run: int, brain: Session, body: Session) -> None:
        pass


class LiveSessions:
    """Opens HTTP sessions; with ``record_dir`` set, writes per-run transcripts."""

    def __init__(self, brain: HttpConfig, body: HttpConfig | None = None, record_dir: str | Path | None = None):
        self.brain = brain
        self.body = body or brain
        self.record_dir = Path(record_dir) if record_dir else None

    def open(self, task_id: str, run: int) -> tuple[Session, Session]:
        return open_session(self.brain), open_session(self.body)

    def close(self, task_id: str, run: int, brain: Session, body: Session) -> None:
        if self.record_dir is not None:
            record(brain, self.record_dir / f"{task_id}.run{run}.brain.jsonl")
            record(body, self.record_dir / f"{task_id}.run{run}.body.jsonl")


SuiteTask = Union[TaskTuple, TabletopTask]


@dataclass
class SuiteConfig:
    tasks: Sequence[SuiteTask]
    sessions: SessionFactory
    k: int = 3
    temperature: float = 0.5
    runs: int = 5
    jobs: int = 1
    scene_dir: Path | None = None
    tabletop_dir: Path | None = None
    catalog: ActionCatalog | None = None
    oscillation_guard: bool = True
    backend: str = "scripted"
    on_trace: Callable[[EpisodeTrace, int], None] | None = None


def _run_one(cfg: SuiteConfig, task: SuiteTask, run: int, prepared: dict) -> tuple[EpisodeTrace, EpisodeScores]:
    loop = LoopConfig(max_feedback_loops=cfg.k, oscillation_guard=cfg.oscillation_guard)
    brain, body = cfg.sessions.open(task.id if isinstance(task, TaskTuple) else task.task_id, run)
    if isinstance(task, TaskTuple):
        scene_env, tgc = prepared[task.id]
        spec = task.to_task_spec(cfg.scene_dir)
        trace = run_episode(spec, scene_env.fresh(), brain, body, loop, prepared["kit:household"])
        scores = score_household(trace, tgc, task.relevant_objects, run)
    else:
        spec = TaskSpec(id=task.task_id, description=task.description, kind=TABLETOP, goal=task.goal)
        env = TabletopEnv(task.initial.copy(), task.goal, task.task_id)
        trace = run_episode(spec, env, brain, body, loop, prepared["kit:tabletop"])
        scores = score_tabletop(trace, task, run)
    cfg.sessions.close(trace.task_id, run, brain, body)
    return trace, scores


def run_suite(cfg: SuiteConfig) -> tuple[MetricsReport, list[tuple[int, EpisodeTrace]]]:
    """Run every task ``cfg.runs`` times; returns the report and all traces.

    Backend failures end up as BackendError episodes rather than exceptions.
    """
    catalog = cfg.catalog or default_catalog()
    scene_dir = cfg.scene_dir or resources.path("scenes")
    prepared: dict = {}
    scene_cache: dict[str, HouseholdEnv] = {}
    for task in cfg.tasks:
        if isinstance(task, TaskTuple):
            if task.scene not in scene_cache:
                scene_cache[task.scene] = load_scene(scene_dir / f"{task.scene}.json", catalog)
            env = scene_cache[task.scene]
            prepared[task.id] = (env, goal_conditions(task, env))
            prepared.setdefault("kit:household", PromptKit.load(HOUSEHOLD))
        else:
            prepared.setdefault("kit:tabletop", PromptKit.load(TABLETOP))
    jobs = [(run, task) for run in range(cfg.runs) for task in cfg.tasks]
    if cfg.jobs > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(lambda rt: _run_one(cfg, rt[1], rt[0], prepared), jobs))
    else:
        results = [_run_one(cfg, task, run, prepared) for run, task in jobs]
    traces = []
    scores = []
    for (run, _), (trace, sc) in zip(jobs, results):
        traces.append((run, trace))
        scores.append(sc)
        if cfg.on_trace is not None:
            cfg.on_trace(trace, run)
    config = {"backend": cfg.backend, "k": cfg.k, "temperature": cfg.temperature, "runs": cfg.runs}
    return MetricsReport(scores, config), traces


def is_non_decreasing(values: Sequence[float], tol: float = 1e-12) -> bool:
    return all(b >= a - tol for a, b in zip(values, values[1:]))


def ablation_csv(rows: Sequence[tuple[int, MetricsReport]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "task", *METRICS])
    for k, rep in rows:
        for t in rep.task_ids:
            w.writerow([k, t, *(f"{rep.per_task(t, m)[0]:.4f}" for m in METRICS)])
        w.writerow([k, "mean", *(f"{rep.aggregate(m)[0]:.4f}" for m in METRICS)])
    return buf.getvalue()


def monotonicity_summary(rows: Sequence[tuple[int, MetricsReport]]) -> str:
    parts = []
    for m in ("sr", "gcr", "exec", "csr"):
        series = [rep.aggregate(m)[0] for _, rep in rows]
        parts.append(f"{m.upper()} {'yes' if is_non_decreasing(series) else 'NO'}")
    ks = ",".join(str(k) for k, _ in rows)
    return f"non-decreasing over K={ks}: " + ", ".join(parts)


def load_tabletop_tasks(directory: str | Path | None = None) -> list[TabletopTask]:
    directory = Path(directory) if directory else resources.path("tabletop")
    return [load_tabletop_task(p) for p in sorted(directory.glob("*.json"))]
