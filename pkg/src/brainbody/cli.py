"""Command-line entry point: ``brainbody run | ablate | replay-trace``.

Exit codes: 0 success, 1 one or more episodes hit a backend failure,
2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import resources
from .evaluation import (
    DatasetError,
    LiveSessions,
    MetricsReport,
    SchemaError,
    ScriptedSessions,
    SuiteConfig,
    TaskTuple,
    ablation_csv,
    load_dataset,
    load_tabletop_tasks,
    monotonicity_summary,
    run_suite,
)
from .llm import ConfigError, HttpConfig, LLMError, config_from_dict
from .orchestrator import OSCILLATION, EpisodeTrace
from .world import SceneError

logger = logging.getLogger("brainbody")

EXIT_OK, EXIT_BACKEND, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _nonneg_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {value}")
    return value


def _pos_int(text: str) -> int:
    value = _nonneg_int(text)
    if value == 0:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def _temperature(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not 0.0 <= value <= 2.0:
        raise argparse.ArgumentTypeError(f"must be in [0, 2], got {value}")
    return value


def _add_suite_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--env", choices=("household", "tabletop"), default="household")
    p.add_argument("--dataset", type=Path, help="household dataset (JSON Lines); defaults to the bundled one")
    p.add_argument("--split", choices=("TRAIN", "VALIDATION", "TEST"), default="TEST")
    p.add_argument("--tasks", help="comma-separated task ids to keep")
    p.add_argument("--scenes", type=Path, help="directory of household scene files or tabletop scenarios")
    p.add_argument("--backend", default="scripted", help="'scripted', 'http' or a JSON backend config file")
    p.add_argument("--mode", choices=("replay", "live", "record"), help="default: replay for scripted, live for http")
    p.add_argument("--transcripts", type=Path, help="transcript directory for replay or record")
    p.add_argument("--strict", action="store_true", help="replay: require requests to match the recording")
    p.add_argument("--endpoint", help="http: chat-completions URL")
    p.add_argument("--model", help="http: model name")
    p.add_argument("--auth-env", default="OPENAI_API_KEY", help="http: variable holding the API key ('' for none)")
    p.add_argument("--runs", type=_pos_int, default=5)
    p.add_argument("--temperature", type=_temperature, default=0.5)
    p.add_argument("--jobs", type=_pos_int, default=1)
    p.add_argument("--no-oscillation-guard", action="store_true")
    p.add_argument("--out", type=Path, help="output directory for reports and traces")
    p.add_argument("--force", action="store_true", help="allow writing into a non-empty --out")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="brainbody", description="LLM planner/translator loop with execution feedback")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a task suite and report metrics")
    _add_suite_args(run)
    run.add_argument("--k", type=_nonneg_int, default=3, help="feedback loop budget")

    ab = sub.add_parser("ablate", help="sweep the feedback budget")
    _add_suite_args(ab)
    ab.add_argument("--k", type=_nonneg_int, nargs="+", default=[0, 1, 2, 3])

    rt = sub.add_parser("replay-trace", help="explain a saved episode trace")
    rt.add_argument("trace", type=Path)
    return parser


# ---- suite assembly -------------------------------------------------------------


def _tasks(args) -> list:
    if args.env == "tabletop":
        directory = args.scenes or resources.path("tabletop")
        if not directory.is_dir():
            raise UsageError(f"scenario directory not found: {directory}")
        tasks = load_tabletop_tasks(directory)
        ids = [t.task_id for t in tasks]
    else:
        path = args.dataset or resources.path("dataset.jsonl")
        if not path.is_file():
            raise UsageError(f"dataset not found: {path}")
        tasks = [t for t in load_dataset(path) if t.split == args.split]
        ids = [t.id for t in tasks]
    if args.tasks:
        keep = [s.strip() for s in args.tasks.split(",") if s.strip()]
        unknown = sorted(set(keep) - set(ids))
        if unknown:
            raise UsageError(f"unknown task id(s): {', '.join(unknown)}")
        tasks = [t for t, i in zip(tasks, ids) if i in keep]
    if not tasks:
        raise UsageError("no tasks selected")
    return tasks


def _task_id(task) -> str:
    return task.id if isinstance(task, TaskTuple) else task.task_id


def _http_config(args) -> HttpConfig:
    if args.backend == "http":
        if not args.endpoint or not args.model:
            raise UsageError("--backend http needs --endpoint and --model")
        cfg = HttpConfig(args.endpoint, args.model, auth_env=args.auth_env or None, temperature=args.temperature)
    else:
        path = Path(args.backend)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise UsageError(f"--backend must be 'scripted', 'http' or a config file; {path} not found") from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"{path}: invalid JSON: {exc}") from None
        data.setdefault("temperature", args.temperature)
        cfg = config_from_dict(data)
        if not isinstance(cfg, HttpConfig):
            raise UsageError(f"{path}: only http backend configs are accepted here")
    cfg.validate()
    return cfg


def _sessions(args, tasks):
    scripted = args.backend == "scripted"
    mode = args.mode or ("replay" if scripted else "live")
    if mode == "replay":
        if not scripted:
            raise UsageError("--mode replay requires --backend scripted")
        directory = args.transcripts or resources.path("transcripts", args.env)
        sessions = ScriptedSessions(directory, strict=args.strict)
        missing = sessions.missing([_task_id(t) for t in tasks])
        if missing:
            brain, _ = sessions.paths(missing[0], 0)
            raise UsageError(f"missing transcript for task {missing[0]}: {brain}")
        return sessions, "scripted"
    if scripted:
        raise UsageError(f"--mode {mode} needs an http backend")
    cfg = _http_config(args)
    record_dir = None
    if mode == "record":
        record_dir = args.transcripts or (args.out / "transcripts" if args.out else None)
        if record_dir is None:
            raise UsageError("--mode record needs --transcripts or --out")
    return LiveSessions(cfg, record_dir=record_dir), f"http:{cfg.model}"


def _prepare_out(args) -> Path | None:
    out = args.out
    if out is None:
        return None
    if out.exists() and any(out.iterdir()) and not args.force:
        raise UsageError(f"output directory {out} is not empty (use --force)")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _suite(args, tasks, sessions, backend: str, k: int, out: Path | None) -> MetricsReport:
    def on_trace(trace: EpisodeTrace, run: int) -> None:
        if out is not None:
            d = out / f"k{k}" / "traces" if args.command == "ablate" else out / "traces"
            d.mkdir(parents=True, exist_ok=True)
            (d / f"{trace.task_id}.run{run}.json").write_text(trace.to_json(), encoding="utf-8")

    cfg = SuiteConfig(
        tasks=tasks,
        sessions=sessions,
        k=k,
        temperature=args.temperature,
        runs=args.runs,
        jobs=args.jobs,
        scene_dir=args.scenes if args.env == "household" else None,
        oscillation_guard=not args.no_oscillation_guard,
        backend=backend,
        on_trace=on_trace,
    )
    report, _ = run_suite(cfg)
    return report


def cmd_run(args) -> int:
    tasks = _tasks(args)
    sessions, backend = _sessions(args, tasks)
    out = _prepare_out(args)
    report = _suite(args, tasks, sessions, backend, args.k, out)
    sys.stdout.write(report.to_table())
    if out is not None:
        (out / "report.json").write_text(report.to_json(), encoding="utf-8")
        (out / "report.csv").write_text(report.to_csv(), encoding="utf-8")
    if report.backend_errors:
        print(f"{report.backend_errors} episode(s) ended with a backend error", file=sys.stderr)
        return EXIT_BACKEND
    return EXIT_OK


def cmd_ablate(args) -> int:
    ks = sorted(set(args.k))
    if len(ks) < 2:
        raise UsageError("ablate needs at least two distinct --k values")
    if args.out is None:
        raise UsageError("ablate needs --out")
    tasks = _tasks(args)
    sessions, backend = _sessions(args, tasks)
    out = _prepare_out(args)
    rows = []
    errors = 0
    for k in ks:
        report = _suite(args, tasks, sessions, backend, k, out)
        (out / f"report_k{k}.json").write_text(report.to_json(), encoding="utf-8")
        rows.append((k, report))
        errors += report.backend_errors
        means = ", ".join(f"{m}={report.aggregate(m)[0]:.4f}" for m in ("sr", "gcr", "exec", "csr"))
        print(f"K={k}: {means}")
    (out / "ablation.csv").write_text(ablation_csv(rows), encoding="utf-8")
    print(monotonicity_summary(rows))
    if errors:
        print(f"{errors} episode(s) ended with a backend error", file=sys.stderr)
        return EXIT_BACKEND
    return EXIT_OK


def explain_trace(trace: EpisodeTrace) -> str:
    lines = [f"task: {trace.task_id}", f"status: {trace.status}"]
    if trace.detail:
        lines.append(f"detail: {trace.detail}")
    for p in trace.plans:
        attempts = [a for a in trace.attempts if a.revision == p.revision]
        lines.append(f"revision {p.revision}: {len(p.steps)} step(s), {len(attempts)} translated")
        for a in attempts:
            mark = {"ok": "ok", "pass": "pass"}.get(a.outcome, a.error_code or a.outcome)
            lines.append(f"  {a.step_index}. {a.step_text} -> {a.command or a.completion!r} [{mark}]")
    for f in trace.failures:
        lines.append(f"failure in revision {f.revision} ({f.kind}): {f.message}")
    if trace.status == OSCILLATION and trace.plans:
        last = trace.plans[-1]
        match = next((p.revision for p in trace.plans[:-1] if p.normalized() == last.normalized()), None)
        if match is not None:
            lines.append(
                f"oscillation: revision {last.revision} has the same normalized plan text as revision {match}"
            )
    lines.append(f"brain calls: {trace.brain_calls}, body calls: {trace.body_calls}")
    return "\n".join(lines) + "\n"


def cmd_replay_trace(args) -> int:
    try:
        raw = args.trace.read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read trace {args.trace}: {exc}") from None
    try:
        trace = EpisodeTrace.from_json(raw)
    except json.JSONDecodeError as exc:
        offset = len(raw[: exc.pos].encode("utf-8"))
        raise UsageError(f"{args.trace}: malformed trace at byte offset {offset}: {exc.msg}") from None
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"{args.trace}: not an episode trace ({exc})") from None
    sys.stdout.write(explain_trace(trace))
    return EXIT_OK


COMMANDS = {"run": cmd_run, "ablate": cmd_ablate, "replay-trace": cmd_replay_trace}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError, SchemaError, SceneError, DatasetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except LLMError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND


if __name__ == "__main__":
    sys.exit(main())
