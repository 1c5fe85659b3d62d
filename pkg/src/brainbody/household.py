"""Deterministic household simulator.

Objects carry class properties and binary states; spatial layout is reduced
to INSIDE / ONTOP / CLOSE_TO relations plus a HOLDS relation for the agent's
hands. Verb semantics come from the action catalog: each precondition name
maps to a check (and the error code it raises), each effect name to a state
update.
"""

from __future__ import annotations

import copy
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Union

from .grammar import ActionCatalog, ActionStep, ConditionTemplate, ObjectRef, ParseError, ParseErrorReason, TranslationResult, parse_step
from .world import ExecError, Perception, SceneError, StepOutcome

AGENT = "AGENT"
Subject = Union[ObjectRef, str]

PROPERTIES = frozenset({"SWITCHABLE", "OPENABLE", "GRABBABLE", "CONTAINER", "SURFACE", "SITTABLE"})
STATES = frozenset({"ON", "OFF", "OPEN", "CLOSED"})
RELATIONS = frozenset({"INSIDE", "ONTOP", "CLOSE_TO", "HOLDS"})
POSTURES = frozenset({"STANDING", "SITTING"})
_COUNTERPART = {"ON": "OFF", "OFF": "ON", "OPEN": "CLOSED", "CLOSED": "OPEN"}
_STATE_OWNER = {"ON": "SWITCHABLE", "OFF": "SWITCHABLE", "OPEN": "OPENABLE", "CLOSED": "OPENABLE"}

# error codes
NOT_CLOSE_ENOUGH = "NotCloseEnough"
CONTAINER_CLOSED = "ContainerClosed"
HANDS_FULL = "HandsFull"
HANDS_EMPTY = "HandsEmpty"
WRONG_STATE_TRANSITION = "WrongStateTransition"
MISSING_PROPERTY = "MissingProperty"
UNKNOWN_OBJECT = "UnknownObject"

_REF_RE = re.compile(r"\s*<([a-z][a-z0-9_]*)>\s*\((\d+)\)\s*\Z")


class UniverseMismatch(ValueError):
    pass


class UnknownObjectError(KeyError):
    pass


def parse_ref(text: str) -> Subject:
    if text.strip() == AGENT:
        return AGENT
    m = _REF_RE.match(text)
    if m is None:
        raise ValueError(f"not an object reference: {text!r}")
    return ObjectRef(m.group(1), int(m.group(2)))


def render_subject(s: Subject) -> str:
    return AGENT if s == AGENT else s.render()


def _subject_key(s: Subject) -> tuple:
    return ("", -1) if s == AGENT else (s.name, s.instance_id)


@dataclass(frozen=True)
class RelationTriple:
    subject: Subject
    relation: str
    object: ObjectRef

    @classmethod
    def make(cls, subject: Subject, relation: str, obj: ObjectRef) -> RelationTriple:
        """Build a triple in normalized form (CLOSE_TO endpoints sorted)."""
        if relation not in RELATIONS:
            raise ValueError(f"unknown relation {relation!r}")
        if relation == "HOLDS" and subject != AGENT:
            raise ValueError("HOLDS requires the agent as subject")
        if relation != "HOLDS" and subject == AGENT:
            raise ValueError(f"{relation} cannot have the agent as subject")
        if relation == "CLOSE_TO" and _subject_key(obj) < _subject_key(subject):
            subject, obj = obj, subject
        return cls(subject, relation, obj)

    def sort_key(self) -> tuple:
        return (_subject_key(self.subject), self.relation, _subject_key(self.object))

    def render(self) -> str:
        return f"REL {render_subject(self.subject)} {self.relation} {self.object.render()}"


@dataclass(frozen=True, order=True)
class Condition:
    """An atomic goal condition: an object state or a relation, possibly negated."""

    kind: str  # "STATE" or "REL"
    subject: str
    predicate: str
    object: str = ""
    positive: bool = True

    @property
    def atom(self) -> Condition:
        return Condition(self.kind, self.subject, self.predicate, self.object, True)

    def negate(self) -> Condition:
        return Condition(self.kind, self.subject, self.predicate, self.object, not self.positive)

    def refs(self) -> list[Subject]:
        out = [parse_ref(self.subject)]
        if self.object:
            out.append(parse_ref(self.object))
        return out

    def render(self) -> str:
        if self.kind == "STATE":
            body = f"STATE {self.subject}: {self.predicate}"
        else:
            body = f"REL {self.subject} {self.predicate} {self.object}"
        return body if self.positive else f"NOT {body}"

    def __str__(self) -> str:
        return self.render()


ConditionSet = frozenset


@dataclass
class AgentState:
    location_anchor: ObjectRef | None = None
    right_hand: ObjectRef | None = None
    left_hand: ObjectRef | None = None
    posture: str = "STANDING"

    def held(self) -> list[ObjectRef]:
        return [h for h in (self.right_hand, self.left_hand) if h is not None]


@dataclass
class WorldState:
    objects: dict[ObjectRef, frozenset[str]] = field(default_factory=dict)
    states: dict[ObjectRef, set[str]] = field(default_factory=dict)
    relations: set[RelationTriple] = field(default_factory=set)
    agent: AgentState = field(default_factory=AgentState)

    def copy(self) -> WorldState:
        return copy.deepcopy(self)

    # ---- queries -------------------------------------------------------

    def placement(self, obj: ObjectRef) -> RelationTriple | None:
        for rel in self.relations:
            if rel.subject == obj and rel.relation in ("INSIDE", "ONTOP"):
                return rel
        return None

    def is_held(self, obj: ObjectRef) -> bool:
        return obj in self.agent.held()

    def root(self, obj: ObjectRef) -> ObjectRef:
        seen = {obj}
        cur = obj
        while (rel := self.placement(cur)) is not None:
            cur = rel.object
            if cur in seen:
                break
            seen.add(cur)
        return cur

    def is_within(self, obj: ObjectRef, container: ObjectRef) -> bool:
        """True if ``obj`` is ``container`` or sits (transitively) inside/on it."""
        cur: ObjectRef | None = obj
        seen = set()
        while cur is not None and cur not in seen:
            if cur == container:
                return True
            seen.add(cur)
            rel = self.placement(cur)
            cur = rel.object if rel else None
        return False

    def closed_container_around(self, obj: ObjectRef) -> ObjectRef | None:
        cur = obj
        seen = {obj}
        while (rel := self.placement(cur)) is not None:
            cur = rel.object
            if rel.relation == "INSIDE" and "OPENABLE" in self.objects[cur] and "CLOSED" in self.states.get(cur, ()):
                return cur
            if cur in seen:
                break
            seen.add(cur)
        return None

    def is_near(self, obj: ObjectRef) -> bool:
        if self.is_held(self.root(obj)):
            return True
        anchor = self.agent.location_anchor
        if anchor is None:
            return False
        a, b = self.root(anchor), self.root(obj)
        if a == b:
            return True
        return RelationTriple.make(a, "CLOSE_TO", b) in self.relations

    # ---- conditions ----------------------------------------------------

    def atoms(self) -> set[Condition]:
        out = set()
        for obj, sts in self.states.items():
            for s in sts:
                out.add(Condition("STATE", obj.render(), s))
        for rel in self.relations:
            out.add(Condition("REL", render_subject(rel.subject), rel.relation, rel.object.render()))
        return out

    def holds(self, cond: Condition) -> bool:
        if cond.kind == "STATE":
            present = cond.predicate in self.states.get(parse_ref(cond.subject), ())
        else:
            try:
                rel = RelationTriple.make(parse_ref(cond.subject), cond.predicate, parse_ref(cond.object))
            except ValueError:
                present = False
            else:
                present = rel in self.relations
        return present == cond.positive

    # ---- (de)serialization ----------------------------------------------

    def summary(self) -> str:
        lines = []
        for obj in sorted(self.objects):
            props = ", ".join(sorted(self.objects[obj]))
            lines.append(f"OBJ {obj.render()}: {props}" if props else f"OBJ {obj.render()}")
        for obj in sorted(self.states):
            for s in sorted(self.states[obj]):
                lines.append(f"STATE {obj.render()}: {s}")
        for rel in sorted(self.relations, key=RelationTriple.sort_key):
            lines.append(rel.render())
        ag = self.agent
        anchor = ag.location_anchor.render() if ag.location_anchor else "nowhere"
        hands = ", ".join(h.render() for h in ag.held())
        lines.append(f"AGENT at {anchor}, hands: [{hands}], posture: {ag.posture}")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        ag = self.agent
        return {
            "objects": [
                {
                    "name": o.name,
                    "id": o.instance_id,
                    "properties": sorted(self.objects[o]),
                    "states": sorted(self.states.get(o, ())),
                }
                for o in sorted(self.objects)
            ],
            "relations": [
                [render_subject(r.subject), r.relation, r.object.render()]
                for r in sorted(self.relations, key=RelationTriple.sort_key)
            ],
            "agent": {
                "anchor": ag.location_anchor.render() if ag.location_anchor else None,
                "right_hand": ag.right_hand.render() if ag.right_hand else None,
                "left_hand": ag.left_hand.render() if ag.left_hand else None,
                "posture": ag.posture,
            },
        }

    @classmethod
    def from_dict(cls, data: dict) -> WorldState:
        """Build and validate a state; raises :class:`SceneError`."""
        state = cls()
        try:
            for spec in data.get("objects", ()):
                ref = ObjectRef(spec["name"], int(spec["id"]))
                if ref in state.objects:
                    raise SceneError(f"duplicate object {ref.render()}")
                props = frozenset(spec.get("properties", ()))
                if not props <= PROPERTIES:
                    raise SceneError(f"{ref.render()}: unknown properties {sorted(props - PROPERTIES)}")
                sts = set(spec.get("states", ()))
                if not sts <= STATES:
                    raise SceneError(f"{ref.render()}: unknown states {sorted(sts - STATES)}")
                state.objects[ref] = props
                if sts:
                    state.states[ref] = sts
            hands = set()
            agent = data.get("agent") or {}
            for rel in data.get("relations", ()):
                if isinstance(rel, dict):
                    subj, name, obj = rel["subject"], rel["relation"], rel["object"]
                else:
                    subj, name, obj = rel
                # HOLDS is derived from the hands, not stored independently
                if name == "HOLDS":
                    hands.add(parse_ref(obj))
                    continue
                state.relations.add(RelationTriple.make(parse_ref(subj), name, parse_ref(obj)))
            state.agent = AgentState(
                location_anchor=parse_ref(agent["anchor"]) if agent.get("anchor") else None,
                right_hand=parse_ref(agent["right_hand"]) if agent.get("right_hand") else None,
                left_hand=parse_ref(agent["left_hand"]) if agent.get("left_hand") else None,
                posture=agent.get("posture", "STANDING"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, SceneError):
                raise
            raise SceneError(f"malformed scene: {exc}") from exc
        for h in state.agent.held():
            state.relations.add(RelationTriple.make(AGENT, "HOLDS", h))
        if hands and hands != set(state.agent.held()):
            raise SceneError("HOLDS relations disagree with the agent's hands")
        state.validate()
        return state

    def validate(self) -> None:
        for obj, props in self.objects.items():
            sts = self.states.get(obj, set())
            for s in sts:
                if _STATE_OWNER[s] not in props:
                    raise SceneError(f"{obj.render()} has state {s} but is not {_STATE_OWNER[s]}")
            if "OPENABLE" in props and len(sts & {"OPEN", "CLOSED"}) != 1:
                raise SceneError(f"{obj.render()} is OPENABLE and needs exactly one of OPEN/CLOSED")
            if "SWITCHABLE" in props and len(sts & {"ON", "OFF"}) != 1:
                raise SceneError(f"{obj.render()} is SWITCHABLE and needs exactly one of ON/OFF")
        for obj in self.states:
            if obj not in self.objects:
                raise SceneError(f"state for nonexistent object {obj.render()}")
        placements: dict[ObjectRef, list[RelationTriple]] = {}
        for rel in sorted(self.relations, key=RelationTriple.sort_key):
            for end in (rel.subject, rel.object):
                if end != AGENT and end not in self.objects:
                    raise SceneError(f"relation '{rel.render()}' references nonexistent object {end.render()}")
            if rel.relation in ("INSIDE", "ONTOP"):
                if rel.subject == rel.object:
                    raise SceneError(f"{rel.subject.render()} cannot be placed in/on itself")
                placements.setdefault(rel.subject, []).append(rel)
        for obj, rels in placements.items():
            if len(rels) > 1:
                kinds = {r.relation for r in rels}
                what = "INSIDE more than one container" if kinds == {"INSIDE"} else "placed in more than one location"
                raise SceneError(f"{obj.render()} is {what}")
        for obj in placements:
            if self.root(obj) == obj or self.placement(self.root(obj)) is not None:
                raise SceneError(f"placement cycle through {obj.render()}")
        ag = self.agent
        if ag.posture not in POSTURES:
            raise SceneError(f"unknown posture {ag.posture!r}")
        if ag.location_anchor is not None and ag.location_anchor not in self.objects:
            raise SceneError(f"agent anchor {ag.location_anchor.render()} does not exist")
        held = ag.held()
        if len(set(held)) != len(held):
            raise SceneError("both hands hold the same object")
        for h in held:
            if h not in self.objects:
                raise SceneError(f"agent holds nonexistent object {h.render()}")
            if h in placements:
                raise SceneError(f"held object {h.render()} is also placed somewhere")


# ---- precondition checks ---------------------------------------------------
# Each returns None when satisfied, else (error code, reason text).


def _pre_has_property(state: WorldState, obj: ObjectRef, prop: str):
    if prop not in state.objects[obj]:
        return MISSING_PROPERTY, f"{obj.render()} is not {prop}"
    return None


def _pre_close_to(state: WorldState, obj: ObjectRef):
    if not state.is_near(obj):
        return NOT_CLOSE_ENOUGH, f"the agent is not close to {obj.render()}"
    return None


def _pre_accessible(state: WorldState, obj: ObjectRef):
    container = state.closed_container_around(obj)
    if container is not None:
        return CONTAINER_CLOSED, f"{obj.render()} is inside {container.render()}, which is closed"
    return None


def _pre_receptacle_open(state: WorldState, obj: ObjectRef):
    if "OPENABLE" in state.objects[obj] and "CLOSED" in state.states.get(obj, ()):
        return CONTAINER_CLOSED, f"{obj.render()} is closed"
    return _pre_accessible(state, obj)


def _pre_hand_free(state: WorldState):
    if len(state.agent.held()) >= 2:
        return HANDS_FULL, "both hands are full"
    return None


def _pre_holding(state: WorldState, obj: ObjectRef):
    if not state.is_held(obj):
        return HANDS_EMPTY, f"the agent is not holding {obj.render()}"
    return None


def _pre_not_holding(state: WorldState, obj: ObjectRef):
    if state.is_held(obj):
        return WRONG_STATE_TRANSITION, f"the agent is already holding {obj.render()}"
    return None


def _pre_state(state: WorldState, obj: ObjectRef, value: str):
    if value not in state.states.get(obj, ()):
        current = ", ".join(sorted(state.states.get(obj, ()))) or "no state"
        return WRONG_STATE_TRANSITION, f"{obj.render()} is {current}, expected {value}"
    return None


def _pre_posture(state: WorldState, value: str):
    if state.agent.posture != value:
        return WRONG_STATE_TRANSITION, f"the agent is {state.agent.posture}, expected {value}"
    return None


def _pre_not_within(state: WorldState, target: ObjectRef, obj: ObjectRef):
    if state.is_within(target, obj):
        return WRONG_STATE_TRANSITION, f"{target.render()} is {obj.render()} or is located in/on it"
    return None


PRECONDITIONS = {
    "has_property": _pre_has_property,
    "close_to": _pre_close_to,
    "accessible": _pre_accessible,
    "receptacle_open": _pre_receptacle_open,
    "hand_free": _pre_hand_free,
    "holding": _pre_holding,
    "not_holding": _pre_not_holding,
    "state": _pre_state,
    "posture": _pre_posture,
    "not_within": _pre_not_within,
}


# ---- effects ---------------------------------------------------------------


def _release(state: WorldState, obj: ObjectRef) -> None:
    ag = state.agent
    if ag.right_hand == obj:
        ag.right_hand = None
    elif ag.left_hand == obj:
        ag.left_hand = None
    state.relations.discard(RelationTriple.make(AGENT, "HOLDS", obj))


def _eff_walk_to(state: WorldState, obj: ObjectRef) -> None:
    state.agent.posture = "STANDING"
    if not state.is_held(obj):
        state.agent.location_anchor = obj


def _eff_grab(state: WorldState, obj: ObjectRef) -> None:
    ag = state.agent
    if ag.location_anchor == obj:
        rel = state.placement(obj)
        if rel is not None:
            ag.location_anchor = state.root(rel.object)
    rel = state.placement(obj)
    if rel is not None:
        state.relations.discard(rel)
    if ag.right_hand is None:
        ag.right_hand = obj
    else:
        ag.left_hand = obj
    state.relations.add(RelationTriple.make(AGENT, "HOLDS", obj))


def _eff_set_state(state: WorldState, obj: ObjectRef, value: str) -> None:
    sts = state.states.setdefault(obj, set())
    sts.discard(_COUNTERPART[value])
    sts.add(value)


def _eff_put(state: WorldState, obj: ObjectRef, target: ObjectRef, relation: str) -> None:
    _release(state, obj)
    state.relations.add(RelationTriple.make(obj, relation, target))


def _eff_put_inside(state: WorldState, obj: ObjectRef, target: ObjectRef) -> None:
    _eff_put(state, obj, target, "INSIDE")


def _eff_put_ontop(state: WorldState, obj: ObjectRef, target: ObjectRef) -> None:
    _eff_put(state, obj, target, "ONTOP")


def _eff_set_posture(state: WorldState, value: str) -> None:
    state.agent.posture = value


EFFECTS = {
    "walk_to": _eff_walk_to,
    "grab": _eff_grab,
    "set_state": _eff_set_state,
    "put_inside": _eff_put_inside,
    "put_ontop": _eff_put_ontop,
    "set_posture": _eff_set_posture,
}

_CONSTANTS = PROPERTIES | STATES | POSTURES


def _bind(tmpl: ConditionTemplate, args: tuple[ObjectRef, ...]) -> list:
    out = []
    for a in tmpl.args:
        if re.fullmatch(r"a\d+", a):
            out.append(args[int(a[1:])])
        else:
            out.append(a)
    return out


def check_catalog(catalog: ActionCatalog) -> None:
    """Reject catalogs naming preconditions/effects this simulator lacks."""
    for spec in catalog.entries.values():
        for tmpl in spec.preconditions:
            if tmpl.name not in PRECONDITIONS:
                raise SceneError(f"{spec.verb}: unknown precondition {tmpl.name!r}")
        for tmpl in spec.effects:
            if tmpl.name not in EFFECTS:
                raise SceneError(f"{spec.verb}: unknown effect {tmpl.name!r}")
        for tmpl in (*spec.preconditions, *spec.effects):
            for a in tmpl.args:
                if not re.fullmatch(r"a\d+", a) and a not in _CONSTANTS:
                    raise SceneError(f"{spec.verb}: unknown constant {a!r} in '{tmpl}'")


def state_diff(before: WorldState, after: WorldState) -> frozenset[Condition]:
    """Conditions gained (positive) and lost (negated) going from ``before`` to ``after``."""
    if set(before.objects) != set(after.objects):
        raise UniverseMismatch("states range over different objects")
    a, b = before.atoms(), after.atoms()
    return frozenset(b - a) | frozenset(c.negate() for c in a - b)


def check_conditions(state: WorldState, conds: Iterable[Condition]) -> tuple[frozenset, frozenset]:
    """Split ``conds`` into (satisfied, unsatisfied) against ``state``."""
    sat, unsat = set(), set()
    for c in conds:
        for ref in c.refs():
            if ref != AGENT and ref not in state.objects:
                raise UnknownObjectError(f"condition '{c}' names unknown object {render_subject(ref)}")
        (sat if state.holds(c) else unsat).add(c)
    return frozenset(sat), frozenset(unsat)


class HouseholdEnv:
    """Single-owner simulator handle. Not safe for concurrent use."""

    kind = "HOUSEHOLD"

    def __init__(self, state: WorldState, catalog: ActionCatalog, name: str = ""):
        check_catalog(catalog)
        self.name = name
        self.catalog = catalog
        self.initial_state = state.copy()
        self.state = state
        self._last_error: ExecError | None = None

    def parse(self, text: str) -> TranslationResult:
        return parse_step(text, self.catalog)

    def command_help(self) -> str:
        return self.catalog.describe()

    def execute(self, step: ActionStep) -> StepOutcome:
        rendered = step.render()
        spec = self.catalog.entries.get(step.verb)
        if spec is None or len(step.args) != spec.arity:
            reason = ParseErrorReason.UNKNOWN_VERB if spec is None else ParseErrorReason.ARITY_MISMATCH
            raise ParseError(reason, rendered)
        for arg in step.args:
            if arg not in self.state.objects:
                return self._fail(UNKNOWN_OBJECT, rendered, f"{arg.render()} does not exist in the scene")
        for tmpl in spec.preconditions:
            verdict = PRECONDITIONS[tmpl.name](self.state, *_bind(tmpl, step.args))
            if verdict is not None:
                return self._fail(verdict[0], rendered, verdict[1])
        new = self.state.copy()
        for tmpl in spec.effects:
            EFFECTS[tmpl.name](new, *_bind(tmpl, step.args))
        new.validate()
        delta = state_diff(self.state, new)
        self.state = new
        return StepOutcome(delta=delta)

    def _fail(self, code: str, rendered: str, reason: str) -> StepOutcome:
        err = ExecError(code, f"Cannot execute '{rendered}': {reason}. [{code}]")
        self._last_error = err
        return StepOutcome(error=err)

    def perceive(self) -> Perception:
        err, self._last_error = self._last_error, None
        return Perception(self.state.summary(), err)

    def snapshot(self) -> dict:
        return self.state.to_dict()

    def fresh(self) -> HouseholdEnv:
        return HouseholdEnv(self.initial_state.copy(), self.catalog, self.name)


def default_catalog() -> ActionCatalog:
    from . import resources

    return ActionCatalog.load(resources.path("catalog.yaml"))


def load_scene(spec: str | Path | dict, catalog: ActionCatalog | None = None) -> HouseholdEnv:
    """Load a scene from a JSON file path or an already-parsed mapping."""
    if isinstance(spec, dict):
        data = spec
    else:
        try:
            data = json.loads(Path(spec).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise SceneError(f"{spec}: invalid JSON: {exc}") from exc
    state = WorldState.from_dict(data)
    return HouseholdEnv(state, catalog or default_catalog(), name=data.get("name", ""))
