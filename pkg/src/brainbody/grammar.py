"""Action-primitive command language.

Commands look like ``[VERB] <name> (id) <name> (id)``; a step the Body model
cannot map to an action is written ``[Pass]``. The verb table (arity,
preconditions, effects) lives in a YAML catalog file so simulators can stay
data-driven.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Union

import yaml

MAX_ARITY = 2

_NAME_RE = re.compile(r"[a-z][a-z0-9_]*\Z")
_VERB_RE = re.compile(r"[A-Za-z][A-Za-z0-9_]*\Z")
_STEP_RE = re.compile(r"\s*\[([^\[\]]*)\]((?:\s*<[^<>]*>\s*\([^()]*\))*)\s*\Z", re.S)
_ARG_RE = re.compile(r"\s*<([^<>]*)>\s*\(([^()]*)\)")
_PASS_RE = re.compile(r"\s*\[pass\]\s*\Z", re.I)
_SLOT_RE = re.compile(r"a(\d+)\Z")


class ParseErrorReason(str, enum.Enum):
    UNKNOWN_VERB = "UnknownVerb"
    ARITY_MISMATCH = "ArityMismatch"
    MALFORMED = "Malformed"


class ParseError(ValueError):
    """A command string that is not a valid action primitive."""

    def __init__(self, reason: ParseErrorReason, text: str, detail: str = "", line: int | None = None):
        self.reason = reason
        self.text = text
        self.detail = detail
        self.line = line
        where = f"line {line}: " if line is not None else ""
        msg = f"{where}{reason.value}: {text.strip()!r}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class ScriptParseError(ValueError):
    """One or more lines of a command script failed to parse."""

    def __init__(self, errors: list[ParseError]):
        self.errors = errors
        super().__init__("; ".join(str(e) for e in errors))


class CatalogError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class ObjectRef:
    name: str
    instance_id: int

    def __post_init__(self) -> None:
        if not _NAME_RE.match(self.name):
            raise ValueError(f"object name must be a lowercase identifier, got {self.name!r}")
        if self.instance_id < 0:
            raise ValueError(f"instance id must be non-negative, got {self.instance_id}")

    def render(self) -> str:
        return f"<{self.name}> ({self.instance_id})"

    def __str__(self) -> str:
        return self.render()


@dataclass(frozen=True)
class ActionStep:
    verb: str
    args: tuple[ObjectRef, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "verb", self.verb.upper())
        object.__setattr__(self, "args", tuple(self.args))

    def render(self) -> str:
        return " ".join([f"[{self.verb}]", *(a.render() for a in self.args)])

    def __str__(self) -> str:
        return self.render()


class PassToken:
    """Singleton marker for a step with no executable counterpart."""

    _instance: PassToken | None = None

    def __new__(cls) -> PassToken:
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def render(self) -> str:
        return "[Pass]"

    def __repr__(self) -> str:
        return "PassToken()"

    def __str__(self) -> str:
        return self.render()

    def __reduce__(self):
        return (PassToken, ())


PASS = PassToken()

TranslationResult = Union[ActionStep, PassToken]


@dataclass(frozen=True)
class ConditionTemplate:
    """A named precondition or effect applied to argument slots / constants.

    ``"close_to a0"`` parses to ``ConditionTemplate("close_to", ("a0",))``.
    """

    name: str
    args: tuple[str, ...] = ()

    @classmethod
    def parse(cls, text: str) -> ConditionTemplate:
        parts = text.split()
        if not parts:
            raise CatalogError("empty condition template")
        return cls(parts[0], tuple(parts[1:]))

    @property
    def slots(self) -> tuple[int, ...]:
        return tuple(int(m.group(1)) for a in self.args if (m := _SLOT_RE.match(a)))

    def __str__(self) -> str:
        return " ".join((self.name, *self.args))


@dataclass(frozen=True)
class VerbSpec:
    verb: str
    arity: int
    preconditions: tuple[ConditionTemplate, ...] = ()
    effects: tuple[ConditionTemplate, ...] = ()


@dataclass(frozen=True)
class ActionCatalog:
    entries: dict[str, VerbSpec] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for verb, spec in self.entries.items():
            if verb != spec.verb or verb != verb.upper():
                raise CatalogError(f"catalog key {verb!r} must be the uppercase verb name")
            if not 0 <= spec.arity <= MAX_ARITY:
                raise CatalogError(f"{verb}: arity {spec.arity} outside 0..{MAX_ARITY}")
            for tmpl in (*spec.preconditions, *spec.effects):
                bad = [s for s in tmpl.slots if s >= spec.arity]
                if bad:
                    raise CatalogError(f"{verb}: template '{tmpl}' references undeclared slot a{bad[0]}")

    @classmethod
    def from_mapping(cls, data: dict) -> ActionCatalog:
        verbs = data.get("verbs")
        if not isinstance(verbs, dict):
            raise CatalogError("catalog needs a top-level 'verbs' mapping")
        entries = {}
        for raw_verb, body in verbs.items():
            verb = str(raw_verb).upper()
            if verb in entries:
                raise CatalogError(f"duplicate verb {verb}")
            if not _VERB_RE.match(verb):
                raise CatalogError(f"invalid verb name {raw_verb!r}")
            body = body or {}
            try:
                arity = int(body["arity"])
            except (KeyError, TypeError, ValueError) as exc:
                raise CatalogError(f"{verb}: missing or invalid arity") from exc
            entries[verb] = VerbSpec(
                verb=verb,
                arity=arity,
                preconditions=tuple(ConditionTemplate.parse(t) for t in body.get("preconditions") or ()),
                effects=tuple(ConditionTemplate.parse(t) for t in body.get("effects") or ()),
            )
        return cls(entries)

    @classmethod
    def load(cls, path: str | Path) -> ActionCatalog:
        with open(path, encoding="utf-8") as fh:
            return cls.from_mapping(yaml.safe_load(fh) or {})

    @property
    def verbs(self) -> list[str]:
        return sorted(self.entries)

    def __contains__(self, verb: str) -> bool:
        return verb.upper() in self.entries

    def __getitem__(self, verb: str) -> VerbSpec:
        return self.entries[verb.upper()]

    def parse(self, text: str) -> TranslationResult:
        return parse_step(text, self)

    def describe(self) -> str:
        """One line per verb, e.g. ``[PUTBACK] <obj> (id) <obj> (id)``."""
        lines = []
        for verb in self.verbs:
            lines.append(" ".join([f"[{verb}]", *["<object> (id)"] * self.entries[verb].arity]))
        return "\n".join(lines)


def parse_object_args(blob: str, text: str) -> tuple[ObjectRef, ...]:
    args = []
    for name, ident in _ARG_RE.findall(blob):
        ident = ident.strip()
        if not ident.isdigit() or not ident.isascii():
            raise ParseError(ParseErrorReason.MALFORMED, text, f"bad instance id {ident!r}")
        if not _NAME_RE.match(name):
            raise ParseError(ParseErrorReason.MALFORMED, text, f"bad object name {name!r}")
        args.append(ObjectRef(name, int(ident)))
    return tuple(args)


def parse_step(text: str, catalog: ActionCatalog) -> TranslationResult:
    """Parse one command line into an :class:`ActionStep` or :data:`PASS`.

    Raises :class:`ParseError` for anything else; never raises other exceptions
    for string input.
    """
    if _PASS_RE.match(text):
        return PASS
    m = _STEP_RE.match(text)
    if m is None:
        raise ParseError(ParseErrorReason.MALFORMED, text)
    raw_verb, blob = m.group(1).strip(), m.group(2)
    if not _VERB_RE.match(raw_verb):
        raise ParseError(ParseErrorReason.MALFORMED, text, f"bad verb {raw_verb!r}")
    verb = raw_verb.upper()
    args = parse_object_args(blob, text)
    if verb not in catalog.entries:
        raise ParseError(ParseErrorReason.UNKNOWN_VERB, text, f"verb {verb} not in catalog")
    arity = catalog.entries[verb].arity
    if len(args) != arity:
        raise ParseError(ParseErrorReason.ARITY_MISMATCH, text, f"{verb} takes {arity} argument(s), got {len(args)}")
    return ActionStep(verb, args)


def render_step(step: TranslationResult) -> str:
    return step.render()


def parse_script(text: str, catalog: ActionCatalog) -> list[TranslationResult]:
    """Parse a multi-line script, one command per non-empty line.

    All bad lines are reported together in a :class:`ScriptParseError`, each
    carrying its 1-based line number.
    """
    results: list[TranslationResult] = []
    errors: list[ParseError] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            results.append(parse_step(line, catalog))
        except ParseError as exc:
            errors.append(ParseError(exc.reason, exc.text, exc.detail, line=lineno))
    if errors:
        raise ScriptParseError(errors)
    return results


def render_script(steps: Iterable[TranslationResult]) -> str:
    return "".join(s.render() + "\n" for s in steps)
