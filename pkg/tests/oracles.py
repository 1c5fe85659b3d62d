"""Independent reference computations from rendered state summaries only."""

from __future__ import annotations

import re

_REF = re.compile(r"<[a-z][a-z0-9_]*> \(\d+\)|AGENT")


def atoms(summary: str) -> set[str]:
    return {line for line in summary.splitlines() if line.startswith(("STATE ", "REL "))}


def goal_conditions(initial: str, reference: str) -> list[tuple[str, bool]]:
    """(atom line, must hold) pairs: gained atoms must hold, lost atoms must not."""
    a, b = atoms(initial), atoms(reference)
    return sorted([(x, True) for x in b - a] + [(x, False) for x in a - b])


def unsatisfied(conds, final: str) -> list[tuple[str, bool]]:
    have = atoms(final)
    return [(x, want) for x, want in conds if (x in have) != want]


def gcr(initial: str, reference: str, final: str) -> float:
    conds = goal_conditions(initial, reference)
    if not conds:
        return 1.0
    return 1.0 - len(unsatisfied(conds, final)) / len(conds)


def csr(initial: str, reference: str, final: str, relevant: set[str]) -> int:
    bad = unsatisfied(goal_conditions(initial, reference), final)
    return int(not any(set(_REF.findall(x)) & relevant for x, _ in bad))
