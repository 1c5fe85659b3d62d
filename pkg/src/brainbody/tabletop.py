"""Grid tabletop world for pick-and-place tasks with a hidden reachability mask.

Cells are ``(col, row)``; col grows left to right, row grows top to bottom in
the printed grid. Some cells may be outside the arm's workspace. That mask is
never shown in the perception text, so the only way a planner learns about it
is from ``Unreachable`` errors.
"""

from __future__ import annotations

import copy
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

from .grammar import PASS, ObjectRef, ParseError, ParseErrorReason, TranslationResult, parse_object_args
from .world import ExecError, Perception, SceneError, StepOutcome

Cell = tuple[int, int]
IN_GRIPPER = "IN_GRIPPER"

SHAPES = ("CUBE", "CYLINDER")
SPECTRAL_ORDER = ("red", "orange", "yellow", "green", "blue", "indigo", "violet")
DEFAULT_COLOR_GROUPS = {"reddish": ("red", "orange", "pink")}
REGIONS = ("LEFT_HALF", "RIGHT_HALF", "CENTER_BAND")
DIFFICULTIES = ("Easy", "Medium", "Hard")

UNREACHABLE = "Unreachable"
GRIPPER_FULL = "GripperFull"
GRIPPER_EMPTY = "GripperEmpty"
CELL_OCCUPIED = "CellOccupied"
UNKNOWN_OBJECT = "UnknownObject"


# ---- commands ---------------------------------------------------------------


@dataclass(frozen=True)
class Pick:
    object: ObjectRef

    def render(self) -> str:
        return f"[PICK] {self.object.render()}"


@dataclass(frozen=True)
class Place:
    cell: Cell

    def render(self) -> str:
        return f"[PLACE] ({self.cell[0]},{self.cell[1]})"


@dataclass(frozen=True)
class Home:
    def render(self) -> str:
        return "[HOME]"


ArmCommand = Union[Pick, Place, Home]

_CMD_RE = re.compile(r"\s*\[([A-Za-z][A-Za-z0-9_]*)\](.*?)\s*\Z", re.S)
_CELL_RE = re.compile(r"\s*\(\s*(\d+)\s*,\s*(\d+)\s*\)\s*\Z")
_PASS_RE = re.compile(r"\s*\[pass\]\s*\Z", re.I)


def parse_arm_command(text: str) -> TranslationResult | ArmCommand:
    """``[PICK] <cube> (3)``, ``[PLACE] (4,2)``, ``[HOME]`` or ``[Pass]``."""
    if _PASS_RE.match(text):
        return PASS
    m = _CMD_RE.match(text)
    if m is None:
        raise ParseError(ParseErrorReason.MALFORMED, text)
    verb, rest = m.group(1).upper(), m.group(2)
    if verb == "PICK":
        if not re.fullmatch(r"(?:\s*<[^<>]*>\s*\([^()]*\))*\s*", rest):
            raise ParseError(ParseErrorReason.MALFORMED, text)
        args = parse_object_args(rest, text)
        if len(args) != 1:
            raise ParseError(ParseErrorReason.ARITY_MISMATCH, text, f"PICK takes 1 object, got {len(args)}")
        return Pick(args[0])
    if verb == "PLACE":
        cm = _CELL_RE.match(rest)
        if cm is None:
            reason = ParseErrorReason.ARITY_MISMATCH if not rest.strip() else ParseErrorReason.MALFORMED
            raise ParseError(reason, text, "PLACE takes one cell (col,row)")
        return Place((int(cm.group(1)), int(cm.group(2))))
    if verb == "HOME":
        if rest.strip():
            raise ParseError(ParseErrorReason.ARITY_MISMATCH, text, "HOME takes no arguments")
        return Home()
    raise ParseError(ParseErrorReason.UNKNOWN_VERB, text, f"verb {verb} not in catalog")


class ArmCommandSet:
    """Catalog stand-in for the arm: gives the planning loop ``parse``/``describe``."""

    def parse(self, text: str):
        return parse_arm_command(text)

    def describe(self) -> str:
        return "[PICK] <object> (id)\n[PLACE] (col,row)\n[HOME]"


ARM_COMMANDS = ArmCommandSet()


# ---- state ------------------------------------------------------------------


@dataclass(frozen=True)
class TabletopObject:
    name: str
    id: int
    shape: str
    color: str

    @property
    def ref(self) -> ObjectRef:
        return ObjectRef(self.name, self.id)

    def label(self) -> str:
        return f"{self.color} {self.shape.lower()} ({self.id})"


@dataclass
class TabletopState:
    width: int
    height: int
    objects: dict[int, TabletopObject]
    cells: dict[int, Cell | str]
    reachable_cells: frozenset[Cell]
    gripper: int | None = None

    def copy(self) -> TabletopState:
        return copy.deepcopy(self)

    def in_grid(self, cell: Cell) -> bool:
        return 0 <= cell[0] < self.width and 0 <= cell[1] < self.height

    def occupant(self, cell: Cell) -> int | None:
        for oid, c in self.cells.items():
            if c == cell:
                return oid
        return None

    def validate(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise SceneError("grid must be non-empty")
        seen: dict[Cell, int] = {}
        in_gripper = [oid for oid, c in self.cells.items() if c == IN_GRIPPER]
        if len(in_gripper) > 1:
            raise SceneError("more than one object in the gripper")
        if (in_gripper[0] if in_gripper else None) != self.gripper:
            raise SceneError("gripper field disagrees with object locations")
        for oid, c in sorted(self.cells.items()):
            if c == IN_GRIPPER:
                continue
            if not self.in_grid(c):
                raise SceneError(f"object {oid} at {c} is outside the grid")
            if c in seen:
                raise SceneError(f"objects {seen[c]} and {oid} share cell {c}")
            seen[c] = oid
        for c in self.reachable_cells:
            if not self.in_grid(c):
                raise SceneError(f"reachable cell {c} is outside the grid")

    def summary(self) -> str:
        lines = [f"GRID {self.width}x{self.height}: col 0..{self.width - 1} left to right, row 0..{self.height - 1} top to bottom"]
        placed = []
        for oid, obj in self.objects.items():
            c = self.cells[oid]
            if c != IN_GRIPPER:
                placed.append(f"OBJ {obj.label()} at ({c[0]},{c[1]})")
        lines.extend(sorted(placed))
        if self.gripper is None:
            lines.append("GRIPPER empty")
        else:
            lines.append(f"GRIPPER holds {self.objects[self.gripper].label()}")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "grid": [self.width, self.height],
            "objects": [
                {
                    "name": o.name,
                    "id": o.id,
                    "shape": o.shape,
                    "color": o.color,
                    "cell": self.cells[oid] if self.cells[oid] == IN_GRIPPER else list(self.cells[oid]),
                }
                for oid, o in sorted(self.objects.items())
            ],
            "reachable_cells": sorted([list(c) for c in self.reachable_cells]),
            "gripper": self.gripper,
        }

    @classmethod
    def from_dict(cls, data: dict) -> TabletopState:
        try:
            width, height = (int(v) for v in data.get("grid", (9, 5)))
            objects: dict[int, TabletopObject] = {}
            cells: dict[int, Cell | str] = {}
            for spec in data.get("objects", ()):
                obj = TabletopObject(spec["name"], int(spec["id"]), spec["shape"].upper(), spec["color"].lower())
                ObjectRef(obj.name, obj.id)
                if obj.id in objects:
                    raise SceneError(f"duplicate object id {obj.id}")
                if obj.shape not in SHAPES:
                    raise SceneError(f"object {obj.id}: unknown shape {obj.shape}")
                objects[obj.id] = obj
                raw = spec["cell"]
                cells[obj.id] = IN_GRIPPER if raw == IN_GRIPPER else (int(raw[0]), int(raw[1]))
            all_cells = {(c, r) for c in range(width) for r in range(height)}
            if "reachable_cells" in data:
                reachable = frozenset((int(c), int(r)) for c, r in data["reachable_cells"])
            else:
                reachable = frozenset(all_cells - {(int(c), int(r)) for c, r in data.get("unreachable_cells", ())})
            grip = [oid for oid, c in cells.items() if c == IN_GRIPPER]
        except SceneError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise SceneError(f"malformed tabletop spec: {exc}") from exc
        state = cls(width, height, objects, cells, reachable, grip[0] if len(grip) == 1 else None)
        if len(grip) > 1:
            raise SceneError("more than one object in the gripper")
        state.validate()
        return state


# ---- goals ------------------------------------------------------------------


@dataclass(frozen=True)
class ObjectFilter:
    shape: str | None = None
    colors: frozenset[str] | None = None

    @classmethod
    def from_dict(cls, data: dict, groups: dict[str, tuple[str, ...]]) -> ObjectFilter:
        shape = data.get("shape")
        colors = set(c.lower() for c in data.get("colors", ()))
        if "color_group" in data:
            group = data["color_group"]
            if group not in groups:
                raise SceneError(f"unknown color group {group!r}")
            colors |= set(groups[group])
        return cls(shape.upper() if shape else None, frozenset(colors) if colors else None)

    def matches(self, obj: TabletopObject) -> bool:
        if self.shape is not None and obj.shape != self.shape:
            return False
        return self.colors is None or obj.color in self.colors

    def select(self, state: TabletopState) -> list[int]:
        return sorted(oid for oid, o in state.objects.items() if self.matches(o))


def in_region(state: TabletopState, cell: Cell | str, region: str) -> bool:
    if cell == IN_GRIPPER:
        return False
    col, row = cell
    if region == "LEFT_HALF":
        return col < state.width // 2
    if region == "RIGHT_HALF":
        return col >= state.width - state.width // 2
    if region == "CENTER_BAND":
        return row == state.height // 2
    raise ValueError(f"unknown region {region!r}")


def _placed_cells(state: TabletopState, ids: list[int]) -> list[Cell] | None:
    cells = [state.cells[i] for i in ids]
    if any(c == IN_GRIPPER for c in cells):
        return None
    return cells  # type: ignore[return-value]


@dataclass(frozen=True)
class InRegion:
    filter: ObjectFilter
    region: str

    def holds(self, state: TabletopState) -> bool:
        return all(in_region(state, state.cells[i], self.region) for i in self.filter.select(state))


@dataclass(frozen=True)
class PatternMatch:
    filter: ObjectFilter
    offsets: frozenset[Cell]

    def holds(self, state: TabletopState) -> bool:
        cells = _placed_cells(state, self.filter.select(state))
        if cells is None or len(cells) != len(self.offsets):
            return False
        target = set(cells)
        anchor = min(self.offsets)
        for c in target:
            dx, dy = c[0] - anchor[0], c[1] - anchor[1]
            if {(ox + dx, oy + dy) for ox, oy in self.offsets} == target:
                return True
        return False


@dataclass(frozen=True)
class OrderedAlong:
    filter: ObjectFilter
    axis: str = "x"

    def holds(self, state: TabletopState) -> bool:
        ids = self.filter.select(state)
        cells = _placed_cells(state, ids)
        if cells is None:
            return False
        k = 0 if self.axis == "x" else 1
        ranked = sorted((c[k], SPECTRAL_ORDER.index(state.objects[i].color)) for i, c in zip(ids, cells))
        coords = [p for p, _ in ranked]
        ranks = [r for _, r in ranked]
        return len(set(coords)) == len(coords) and all(a < b for a, b in zip(ranks, ranks[1:]))


@dataclass(frozen=True)
class CountInRegion:
    filter: ObjectFilter
    region: str
    count: int

    def holds(self, state: TabletopState) -> bool:
        n = sum(in_region(state, state.cells[i], self.region) for i in self.filter.select(state))
        return n == self.count


@dataclass(frozen=True)
class Segregated:
    shape: str
    region: str

    def holds(self, state: TabletopState) -> bool:
        for oid, obj in state.objects.items():
            inside = in_region(state, state.cells[oid], self.region)
            if obj.shape == self.shape and not inside:
                return False
            if obj.shape != self.shape and inside:
                return False
        return True


Conjunct = Union[InRegion, PatternMatch, OrderedAlong, CountInRegion, Segregated]


@dataclass(frozen=True)
class GoalPredicate:
    conjuncts: tuple[Conjunct, ...]

    def holds(self, state: TabletopState) -> bool:
        return all(c.holds(state) for c in self.conjuncts)

    def fraction(self, state: TabletopState) -> float:
        if not self.conjuncts:
            return 1.0
        return sum(c.holds(state) for c in self.conjuncts) / len(self.conjuncts)

    @classmethod
    def from_dict(cls, data: dict, state: TabletopState, groups: dict | None = None) -> GoalPredicate:
        groups = {**DEFAULT_COLOR_GROUPS, **(groups or {})}
        raw = data.get("all", [data]) if isinstance(data, dict) else data
        conjuncts: list[Conjunct] = []
        for item in raw:
            kind = item.get("type")
            fil = ObjectFilter.from_dict(item.get("filter", {}), groups)
            region = item.get("region")
            if region is not None and region not in REGIONS:
                raise SceneError(f"unknown region {region!r}")
            if kind == "InRegion":
                conj: Conjunct = InRegion(fil, region)
            elif kind == "PatternMatch":
                conj = PatternMatch(fil, frozenset((int(a), int(b)) for a, b in item["offsets"]))
            elif kind == "OrderedAlong":
                conj = OrderedAlong(fil, item.get("axis", "x"))
                bad = [state.objects[i].color for i in fil.select(state) if state.objects[i].color not in SPECTRAL_ORDER]
                if bad:
                    raise SceneError(f"OrderedAlong: colors {bad} are not in the spectral order")
            elif kind == "CountInRegion":
                conj = CountInRegion(fil, region, int(item["count"]))
            elif kind == "Segregated":
                conj = Segregated(item["shape"].upper(), region)
                fil = ObjectFilter(shape=conj.shape)
            else:
                raise SceneError(f"unknown goal type {kind!r}")
            if not fil.select(state):
                raise SceneError(f"goal {kind}: filter matches no object")
            conjuncts.append(conj)
        return cls(tuple(conjuncts))


# ---- environment ------------------------------------------------------------


@dataclass
class TabletopTask:
    task_id: str
    description: str
    difficulty: str
    unreachable: bool
    goal: GoalPredicate
    initial: TabletopState
    reference_commands: list[str] = field(default_factory=list)
    naive_commands: list[str] = field(default_factory=list)


class TabletopEnv:
    """Single-owner simulator handle. Not safe for concurrent use."""

    kind = "TABLETOP"

    def __init__(self, state: TabletopState, goal: GoalPredicate | None = None, name: str = ""):
        self.name = name
        self.initial_state = state.copy()
        self.state = state
        self.goal = goal
        self._last_error: ExecError | None = None

    def parse(self, text: str):
        return parse_arm_command(text)

    def command_help(self) -> str:
        return ARM_COMMANDS.describe()

    def _fail(self, code: str, cmd: ArmCommand, reason: str) -> StepOutcome:
        err = ExecError(code, f"Cannot execute '{cmd.render()}': {reason}. [{code}]")
        self._last_error = err
        return StepOutcome(error=err)

    def _lookup(self, ref: ObjectRef) -> int | None:
        obj = self.state.objects.get(ref.instance_id)
        if obj is None or obj.name != ref.name:
            return None
        return obj.id

    def execute(self, cmd: ArmCommand) -> StepOutcome:
        st = self.state
        if isinstance(cmd, Pick):
            oid = self._lookup(cmd.object)
            if oid is None:
                return self._fail(UNKNOWN_OBJECT, cmd, f"{cmd.object.render()} does not exist")
            if st.gripper is not None:
                return self._fail(GRIPPER_FULL, cmd, f"the gripper already holds {st.objects[st.gripper].label()}")
            cell = st.cells[oid]
            if cell not in st.reachable_cells:
                return self._fail(UNREACHABLE, cmd, f"{st.objects[oid].label()} at ({cell[0]},{cell[1]}) is outside the arm's workspace")
            new = st.copy()
            new.cells[oid] = IN_GRIPPER
            new.gripper = oid
        elif isinstance(cmd, Place):
            if st.gripper is None:
                return self._fail(GRIPPER_EMPTY, cmd, "the gripper is empty")
            cell = cmd.cell
            if cell not in st.reachable_cells:
                return self._fail(UNREACHABLE, cmd, f"cell ({cell[0]},{cell[1]}) is outside the arm's workspace")
            occ = st.occupant(cell)
            if occ is not None:
                return self._fail(CELL_OCCUPIED, cmd, f"cell ({cell[0]},{cell[1]}) is occupied by {st.objects[occ].label()}")
            new = st.copy()
            new.cells[new.gripper] = cell
            new.gripper = None
        elif isinstance(cmd, Home):
            return StepOutcome()
        else:
            raise TypeError(f"not an arm command: {cmd!r}")
        new.validate()
        self.state = new
        return StepOutcome()

    def perceive(self) -> Perception:
        err, self._last_error = self._last_error, None
        return Perception(self.state.summary(), err)

    def snapshot(self) -> dict:
        return self.state.to_dict()

    def check_goal(self, goal: GoalPredicate | None = None) -> bool:
        goal = goal or self.goal
        if goal is None:
            raise ValueError("no goal predicate given")
        return goal.holds(self.state)

    def fresh(self) -> TabletopEnv:
        return TabletopEnv(self.initial_state.copy(), self.goal, self.name)


def load_tabletop_task(spec: str | Path | dict) -> TabletopTask:
    if isinstance(spec, dict):
        data = spec
    else:
        try:
            data = json.loads(Path(spec).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise SceneError(f"{spec}: invalid JSON: {exc}") from exc
    state = TabletopState.from_dict(data)
    goal = GoalPredicate.from_dict(data.get("goal", {"all": []}), state, data.get("color_groups"))
    difficulty = data.get("difficulty", "Easy")
    if difficulty not in DIFFICULTIES:
        raise SceneError(f"unknown difficulty {difficulty!r}")
    return TabletopTask(
        task_id=data.get("task_id", ""),
        description=data.get("description", ""),
        difficulty=difficulty,
        unreachable=bool(data.get("unreachable", False)),
        goal=goal,
        initial=state,
        reference_commands=list(data.get("reference_commands", ())),
        naive_commands=list(data.get("naive_commands", ())),
    )


def load_tabletop(spec: str | Path | dict) -> TabletopEnv:
    task = load_tabletop_task(spec)
    return TabletopEnv(task.initial.copy(), task.goal, name=task.task_id)
