"""Regenerate the data shipped in src/brainbody/data.

    python scripts/build_fixtures.py

Writes the synthetic dataset, exemplar files, tabletop scenarios and the
scripted Brain/Body transcripts. Transcripts are produced by running the real
loop against small authoring backends and recording the sessions, so every
recorded request is the exact prompt the loop builds (strict replay works).
"""

from __future__ import annotations

import json
import re
from pathlib import Path

from brainbody import resources
from brainbody.grammar import ActionStep, parse_script
from brainbody.household import default_catalog, load_scene
from brainbody.llm import PromptMessages, Session, record
from brainbody.orchestrator import HOUSEHOLD, TABLETOP, LoopConfig, PromptKit, TaskSpec, run_episode
from brainbody.tabletop import TabletopEnv, load_tabletop_task

DATA = resources.DATA_DIR
SCENE = DATA / "scenes" / "home.json"

MULTI = {"salmon", "sink", "faucet"}


def ref(name: str, i: int = 1) -> str:
    return f"<{name}> ({i})"


def say(name: str, i: int) -> str:
    return f"{name} ({i})" if name in MULTI else name


PHRASES = {
    "WALK": "Walk to the {0}",
    "FIND": "Find the {0}",
    "GRAB": "Grab the {0}",
    "OPEN": "Open the {0}",
    "CLOSE": "Close the {0}",
    "SWITCHON": "Switch on the {0}",
    "SWITCHOFF": "Switch off the {0}",
    "PUTBACK": "Put the {0} in the {1}",
    "PUTON": "Put the {0} on the {1}",
    "SIT": "Sit on the {0}",
    "STANDUP": "Stand up",
    "DRINK": "Drink the {0}",
}


def phrase(step: ActionStep) -> str:
    return PHRASES[step.verb].format(*(say(a.name, a.instance_id) for a in step.args))


def cmds(*lines: str) -> str:
    return "\n".join(lines) + "\n"


# ---- dataset -----------------------------------------------------------------


def train_val_candidates() -> list[tuple[str, str]]:
    out: list[tuple[str, str]] = []
    loose = [
        ("salmon", 2, "kitchencounter"),
        ("breadslice", 1, "kitchencounter"),
        ("cupcake", 1, "kitchentable"),
        ("apple", 1, "kitchentable"),
        ("mug", 1, "kitchentable"),
        ("plate", 1, "kitchentable"),
        ("book", 1, "coffeetable"),
        ("remotecontrol", 1, "coffeetable"),
        ("toothbrush", 1, "bathroomcounter"),
        ("towel", 1, "bathroomcounter"),
        ("pillow", 1, "bed"),
        ("coffeepot", 1, "kitchencounter"),
    ]
    for name, i, _ in loose:
        r = ref(name, i)
        out.append(
            (
                f"Put the {say(name, i)} in the fridge",
                cmds(f"[WALK] {r}", f"[GRAB] {r}", "[WALK] <fridge> (1)", "[OPEN] <fridge> (1)",
                     f"[PUTBACK] {r} <fridge> (1)", "[CLOSE] <fridge> (1)"),
            )
        )
    for name, i, home in loose:
        r = ref(name, i)
        for surf in ("kitchentable", "coffeetable", "desk"):
            if surf == home:
                continue
            out.append(
                (
                    f"Put the {say(name, i)} on the {surf}",
                    cmds(f"[WALK] {r}", f"[GRAB] {r}", f"[WALK] <{surf}> (1)", f"[PUTON] {r} <{surf}> (1)"),
                )
            )
    for name, i in (("tablelamp", 1), ("computer", 1), ("stove", 1), ("faucet", 1), ("tv", 1)):
        r = ref(name, i)
        out.append((f"Turn on the {say(name, i)}", cmds(f"[WALK] {r}", f"[SWITCHON] {r}")))
    for name in ("closet", "dishwasher", "washingmachine", "kitchencabinet", "garbagecan"):
        r = ref(name)
        out.append((f"Open the {name}", cmds(f"[WALK] {r}", f"[OPEN] {r}")))
    for name in ("cereal", "bowl", "milk", "salmon"):
        container = "kitchencabinet" if name in ("cereal", "bowl") else "fridge"
        c = ref(container)
        r = ref(name)
        out.append(
            (
                f"Take the {say(name, 1)} out of the {container} and put it on the kitchentable",
                cmds(f"[WALK] {c}", f"[OPEN] {c}", f"[GRAB] {r}", f"[CLOSE] {c}",
                     "[WALK] <kitchentable> (1)", f"[PUTON] {r} <kitchentable> (1)"),
            )
        )
    out.append(("Drink milk", cmds("[WALK] <fridge> (1)", "[OPEN] <fridge> (1)", "[GRAB] <milk> (1)",
                                   "[CLOSE] <fridge> (1)", "[DRINK] <milk> (1)")))
    out.append(("Sit on the bed and read a book", cmds("[WALK] <coffeetable> (1)", "[GRAB] <book> (1)",
                                                       "[WALK] <bed> (1)", "[SIT] <bed> (1)")))
    out.append(("Find the towel", cmds("[FIND] <towel> (1)", "[GRAB] <towel> (1)")))
    out.append(("Sit on a chair with the book and then stand up",
                cmds("[WALK] <book> (1)", "[GRAB] <book> (1)", "[WALK] <chair> (1)", "[SIT] <chair> (1)", "[STANDUP]")))
    out.append(("Put the shirt in the washing machine",
                cmds("[WALK] <closet> (1)", "[OPEN] <closet> (1)", "[GRAB] <clothesshirt> (1)", "[CLOSE] <closet> (1)",
                     "[WALK] <washingmachine> (1)", "[OPEN] <washingmachine> (1)",
                     "[PUTBACK] <clothesshirt> (1) <washingmachine> (1)", "[CLOSE] <washingmachine> (1)",
                     "[SWITCHON] <washingmachine> (1)")))
    return out


TEST_TASKS = [
    ("bring_coffeepot_cupcake", "Bring coffeepot and cupcake to coffee table",
     cmds("[WALK] <coffeepot> (1)", "[GRAB] <coffeepot> (1)", "[WALK] <cupcake> (1)", "[GRAB] <cupcake> (1)",
          "[WALK] <coffeetable> (1)", "[PUTON] <coffeepot> (1) <coffeetable> (1)",
          "[PUTON] <cupcake> (1) <coffeetable> (1)"),
     ["<coffeepot> (1)", "<cupcake> (1)", "<coffeetable> (1)"]),
    ("brush_teeth", "Brush teeth",
     cmds("[WALK] <bathroomcounter> (1)", "[GRAB] <toothbrush> (1)", "[GRAB] <toothpaste> (1)",
          "[WALK] <faucet> (2)", "[SWITCHON] <faucet> (2)"),
     ["<toothbrush> (1)", "<toothpaste> (1)", "<faucet> (2)"]),
    ("eat_chips_on_sofa", "Eat chips on the sofa",
     cmds("[WALK] <kitchencabinet> (1)", "[OPEN] <kitchencabinet> (1)", "[GRAB] <chips> (1)",
          "[CLOSE] <kitchencabinet> (1)", "[WALK] <sofa> (1)", "[SIT] <sofa> (1)"),
     ["<chips> (1)", "<sofa> (1)"]),
    ("make_toast", "Make toast",
     cmds("[WALK] <breadslice> (1)", "[GRAB] <breadslice> (1)", "[WALK] <toaster> (1)",
          "[PUTBACK] <breadslice> (1) <toaster> (1)", "[SWITCHON] <toaster> (1)"),
     ["<breadslice> (1)", "<toaster> (1)"]),
    ("microwave_salmon", "Microwave Salmon",
     cmds("[WALK] <fridge> (1)", "[OPEN] <fridge> (1)", "[GRAB] <salmon> (1)", "[CLOSE] <fridge> (1)",
          "[WALK] <microwave> (1)", "[OPEN] <microwave> (1)", "[PUTBACK] <salmon> (1) <microwave> (1)",
          "[CLOSE] <microwave> (1)", "[SWITCHON] <microwave> (1)"),
     ["<salmon> (1)", "<microwave> (1)", "<fridge> (1)"]),
    ("put_salmon_in_fridge", "Put salmon in the fridge",
     cmds("[WALK] <salmon> (2)", "[GRAB] <salmon> (2)", "[WALK] <fridge> (1)", "[OPEN] <fridge> (1)",
          "[PUTBACK] <salmon> (2) <fridge> (1)", "[CLOSE] <fridge> (1)"),
     ["<salmon> (2)", "<fridge> (1)"]),
    ("throw_away_apple", "Throw away apple",
     cmds("[WALK] <apple> (1)", "[GRAB] <apple> (1)", "[WALK] <garbagecan> (1)", "[OPEN] <garbagecan> (1)",
          "[PUTBACK] <apple> (1) <garbagecan> (1)", "[CLOSE] <garbagecan> (1)"),
     ["<apple> (1)", "<garbagecan> (1)"]),
    ("turn_off_light", "Turn off light",
     cmds("[WALK] <light> (1)", "[SWITCHOFF] <light> (1)"),
     ["<light> (1)"]),
    ("wash_plate", "Wash the plate",
     cmds("[WALK] <plate> (1)", "[GRAB] <plate> (1)", "[WALK] <sink> (1)", "[PUTBACK] <plate> (1) <sink> (1)",
          "[SWITCHON] <faucet> (1)"),
     ["<plate> (1)", "<sink> (1)", "<faucet> (1)"]),
    ("watch_tv", "Watch TV",
     cmds("[WALK] <remotecontrol> (1)", "[GRAB] <remotecontrol> (1)", "[WALK] <tv> (1)", "[SWITCHON] <tv> (1)",
          "[WALK] <sofa> (1)", "[SIT] <sofa> (1)"),
     ["<tv> (1)", "<sofa> (1)"]),
]

EXTRA_PLAN_STEPS = {"eat_chips_on_sofa": "Eat the chips", "brush_teeth": "Brush the teeth", "watch_tv": "Watch the tv"}


def plan_text(script: str, extra: str | None = None) -> str:
    steps = [phrase(s) for s in parse_script(script, default_catalog()) if isinstance(s, ActionStep)]
    if extra:
        steps.append(extra)
    return "\n".join(f"{i}. {s}" for i, s in enumerate(steps, start=1))


def slug(text: str) -> str:
    return re.sub(r"[^a-z0-9]+", "_", text.lower()).strip("_")


def build_dataset() -> list[dict]:
    env = load_scene(SCENE)
    rows = []
    cands = train_val_candidates()
    assert len(cands) >= 60, len(cands)
    for n, (desc, script) in enumerate(cands[:60]):
        rows.append(
            {
                "id": f"{'train' if n < 35 else 'val'}_{slug(desc)}",
                "description": desc,
                "plan": plan_text(script),
                "script": script,
                "split": "TRAIN" if n < 35 else "VALIDATION",
                "relevant_objects": [],
                "scene": "home",
            }
        )
    for tid, desc, script, relevant in TEST_TASKS:
        rows.append(
            {
                "id": tid,
                "description": desc,
                "plan": plan_text(script, EXTRA_PLAN_STEPS.get(tid)),
                "script": script,
                "split": "TEST",
                "relevant_objects": relevant,
                "scene": "home",
            }
        )
    # every reference script must run cleanly and change something
    for row in rows:
        e = env.fresh()
        for step in parse_script(row["script"], e.catalog):
            out = e.execute(step)
            assert out.ok, (row["id"], step.render(), out.error)
        assert e.state.atoms() != env.initial_state.atoms(), row["id"]
    with open(DATA / "dataset.jsonl", "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    return rows


# ---- exemplars -----------------------------------------------------------------


def build_exemplars(rows: list[dict]) -> None:
    ex = DATA / "exemplars"
    train = [r for r in rows if r["split"] == "TRAIN"]
    picks = [r for r in train if r["description"] in (
        "Put the salmon (2) in the fridge", "Put the book on the kitchentable", "Turn on the tablelamp")]
    planning = [{"task": r["description"], "plan": r["plan"]} for r in picks]
    body = []
    seen = set()
    catalog = default_catalog()
    for r in train:
        for step in parse_script(r["script"], catalog):
            if step.verb not in seen:
                seen.add(step.verb)
                body.append({"step": phrase(step), "command": step.render()})
    body.append({"step": "Enjoy the snack", "command": "[Pass]"})
    feedback = [
        {
            "error": "Cannot execute '[GRAB] <milk> (1)': <milk> (1) is inside <fridge> (1), which is closed. [ContainerClosed]",
            "revised_plan": "1. Open the fridge // the milk is inside the closed fridge\n2. Grab the milk\n3. Close the fridge",
        },
        {
            "error": "Cannot execute '[GRAB] <book> (1)': the agent is not close to <book> (1). [NotCloseEnough]",
            "revised_plan": "1. Walk to the book // the agent must be next to an object to use it\n2. Grab the book",
        },
        {
            "error": "Cannot execute '[OPEN] <closet> (1)': both hands are full. [HandsFull]",
            "revised_plan": "1. Put the book on the desk // free a hand first\n2. Walk to the closet\n3. Open the closet",
        },
    ]
    dump(ex / "household_planning.json", planning)
    dump(ex / "household_body.json", body)
    dump(ex / "household_feedback.json", feedback)

    dump(ex / "tabletop_planning.json", [
        {"task": "Move the cylinders to the left side of the environment only.",
         "plan": "1. Pick the green cylinder (1)\n2. Place the green cylinder at (1,1)\n"
                 "3. Pick the blue cylinder (2)\n4. Place the blue cylinder at (1,3)\n5. Return to the home position"},
    ])
    dump(ex / "tabletop_body.json", [
        {"step": "Pick the green cylinder (1)", "command": "[PICK] <cylinder> (1)"},
        {"step": "Place the green cylinder at (1,1)", "command": "[PLACE] (1,1)"},
        {"step": "Pick the red cube (4)", "command": "[PICK] <cube> (4)"},
        {"step": "Return to the home position", "command": "[HOME]"},
        {"step": "Check that the shape looks right", "command": "[Pass]"},
    ])
    dump(ex / "tabletop_feedback.json", [
        {"error": "Cannot execute '[PLACE] (2,2)': cell (2,2) is outside the arm's workspace. [Unreachable]",
         "revised_plan": "1. Place the held cube at (2,3) // (2,2) cannot be reached, use a nearby free cell\n"
                         "2. Return to the home position"},
        {"error": "Cannot execute '[PICK] <cube> (3)': red cube (3) at (8,4) is outside the arm's workspace. [Unreachable]",
         "revised_plan": "1. Pick the blue cube (2) // work around the cube that cannot be reached\n"
                         "2. Place the blue cube at (6,1)\n3. Return to the home position"},
    ])


def dump(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


# ---- tabletop scenarios ----------------------------------------------------------


def cube(i, color, cell):
    return {"name": "cube", "id": i, "shape": "CUBE", "color": color, "cell": list(cell)}


def cylinder(i, color, cell):
    return {"name": "cylinder", "id": i, "shape": "CYLINDER", "color": color, "cell": list(cell)}


def moves(*pairs) -> list[str]:
    out = []
    for obj, cell in pairs:
        out += [obj, f"[PLACE] ({cell[0]},{cell[1]})"]
    return out + ["[HOME]"]


TABLE_IV = [
    {
        "task_id": "tt1_right_side",
        "description": "Move the cubes to the right side of the environment only.",
        "unreachable": False, "difficulty": "Easy",
        "objects": [cube(1, "red", (1, 1)), cube(2, "green", (2, 3)), cube(3, "blue", (0, 4))],
        "unreachable_cells": [],
        "goal": {"all": [{"type": "InRegion", "filter": {"shape": "CUBE"}, "region": "RIGHT_HALF"}]},
        "reference_commands": moves(("[PICK] <cube> (1)", (6, 1)), ("[PICK] <cube> (2)", (6, 2)), ("[PICK] <cube> (3)", (6, 3))),
    },
    {
        "task_id": "tt2_letter_l",
        "description": "Use the cubes to form the shape of the capital letter 'L'. The shape consists of a "
                       "horizontal and a vertical line intersecting at a right angle.",
        "unreachable": False, "difficulty": "Medium",
        "objects": [cube(1, "red", (0, 0)), cube(2, "orange", (8, 0)), cube(3, "yellow", (0, 4)),
                    cube(4, "green", (8, 4)), cube(5, "blue", (4, 0))],
        "unreachable_cells": [],
        "goal": {"all": [{"type": "PatternMatch", "filter": {"shape": "CUBE"},
                          "offsets": [[0, 0], [0, 1], [0, 2], [1, 2], [2, 2]]}]},
        "reference_commands": moves(("[PICK] <cube> (1)", (2, 1)), ("[PICK] <cube> (2)", (2, 2)), ("[PICK] <cube> (3)", (2, 3)),
                                    ("[PICK] <cube> (4)", (3, 3)), ("[PICK] <cube> (5)", (4, 3))),
    },
    {
        "task_id": "tt3_spectrum_line",
        "description": "Arrange cubes in a horizontal line in the center of the work space, ordering them from "
                       "left to right based on their color in sequence of the visible spectrum.",
        "unreachable": True, "difficulty": "Medium",
        "objects": [cube(1, "blue", (0, 0)), cube(2, "red", (8, 4)), cube(3, "green", (3, 4)), cube(4, "yellow", (6, 0))],
        "unreachable_cells": [[1, 2], [2, 2], [3, 2]],
        "goal": {"all": [{"type": "InRegion", "filter": {"shape": "CUBE"}, "region": "CENTER_BAND"},
                         {"type": "OrderedAlong", "filter": {"shape": "CUBE"}, "axis": "x"}]},
        "reference_commands": moves(("[PICK] <cube> (2)", (4, 2)), ("[PICK] <cube> (4)", (5, 2)), ("[PICK] <cube> (3)", (6, 2)),
                                    ("[PICK] <cube> (1)", (7, 2))),
        "naive_commands": moves(("[PICK] <cube> (2)", (2, 2)), ("[PICK] <cube> (4)", (3, 2)), ("[PICK] <cube> (3)", (4, 2)),
                                ("[PICK] <cube> (1)", (5, 2))),
    },
    {
        "task_id": "tt4_one_each_side",
        "description": "Arrange objects in the scene such that left and right side of the environment has exactly "
                       "one cube and one cylinder. Each object needs to be assigned a unique location.",
        "unreachable": True, "difficulty": "Medium",
        "objects": [cube(1, "red", (0, 1)), cube(2, "blue", (1, 3)), cylinder(3, "green", (2, 1)), cylinder(4, "yellow", (3, 3))],
        "unreachable_cells": [[5, 1], [6, 1], [5, 3]],
        "goal": {"all": [
            {"type": "CountInRegion", "filter": {"shape": "CUBE"}, "region": "LEFT_HALF", "count": 1},
            {"type": "CountInRegion", "filter": {"shape": "CYLINDER"}, "region": "LEFT_HALF", "count": 1},
            {"type": "CountInRegion", "filter": {"shape": "CUBE"}, "region": "RIGHT_HALF", "count": 1},
            {"type": "CountInRegion", "filter": {"shape": "CYLINDER"}, "region": "RIGHT_HALF", "count": 1},
        ]},
        "reference_commands": moves(("[PICK] <cube> (2)", (6, 3)), ("[PICK] <cylinder> (4)", (7, 3))),
        "naive_commands": moves(("[PICK] <cube> (2)", (5, 1)), ("[PICK] <cylinder> (4)", (6, 1))),
    },
    {
        "task_id": "tt5_reddish_triangle",
        "description": "Create a triangle in the right part of the working space using reddish cubes.",
        "unreachable": True, "difficulty": "Hard",
        "objects": [cube(1, "red", (0, 0)), cube(2, "orange", (1, 0)), cube(3, "pink", (2, 0)),
                    cube(4, "blue", (0, 4)), cube(5, "green", (8, 4))],
        "unreachable_cells": [[6, 1], [5, 2], [7, 2], [8, 4]],
        "goal": {"all": [
            {"type": "PatternMatch", "filter": {"shape": "CUBE", "color_group": "reddish"},
             "offsets": [[0, 0], [-1, 1], [1, 1]]},
            {"type": "InRegion", "filter": {"shape": "CUBE", "color_group": "reddish"}, "region": "RIGHT_HALF"},
        ]},
        "reference_commands": moves(("[PICK] <cube> (1)", (6, 2)), ("[PICK] <cube> (2)", (5, 3)), ("[PICK] <cube> (3)", (7, 3))),
        "naive_commands": moves(("[PICK] <cube> (1)", (6, 1)), ("[PICK] <cube> (2)", (5, 2)), ("[PICK] <cube> (3)", (7, 2))),
    },
    {
        "task_id": "tt6_plus_sign",
        "description": "Create a plus sign in the working place using the cubes.",
        "unreachable": True, "difficulty": "Hard",
        "objects": [cube(1, "red", (0, 0)), cube(2, "orange", (1, 0)), cube(3, "yellow", (0, 4)),
                    cube(4, "green", (1, 4)), cube(5, "blue", (8, 0))],
        "unreachable_cells": [[4, 1], [3, 2]],
        "goal": {"all": [{"type": "PatternMatch", "filter": {"shape": "CUBE"},
                          "offsets": [[0, 0], [0, 1], [0, -1], [1, 0], [-1, 0]]}]},
        "reference_commands": moves(("[PICK] <cube> (1)", (6, 2)), ("[PICK] <cube> (2)", (6, 1)), ("[PICK] <cube> (3)", (6, 3)),
                                    ("[PICK] <cube> (4)", (5, 2)), ("[PICK] <cube> (5)", (7, 2))),
        "naive_commands": moves(("[PICK] <cube> (1)", (4, 2)), ("[PICK] <cube> (2)", (4, 1)), ("[PICK] <cube> (3)", (4, 3)),
                                ("[PICK] <cube> (4)", (3, 2)), ("[PICK] <cube> (5)", (5, 2))),
    },
    {
        "task_id": "tt7_segregate_shapes",
        "description": "Segregate objects based on geometric shapes into left and right part of work space. "
                       "Objects of different shapes should not be on the same part of work space.",
        "unreachable": True, "difficulty": "Hard",
        "objects": [cube(1, "red", (1, 1)), cube(2, "blue", (6, 3)), cube(3, "green", (2, 4)),
                    cylinder(4, "yellow", (0, 3)), cylinder(5, "orange", (7, 1)), cylinder(6, "violet", (8, 0))],
        "unreachable_cells": [[8, 0], [0, 0], [1, 0]],
        "goal": {"all": [{"type": "Segregated", "shape": "CUBE", "region": "LEFT_HALF"},
                         {"type": "Segregated", "shape": "CYLINDER", "region": "RIGHT_HALF"}]},
        "reference_commands": moves(("[PICK] <cube> (2)", (2, 2)), ("[PICK] <cylinder> (4)", (6, 2))),
        "naive_commands": moves(("[PICK] <cube> (2)", (0, 0)), ("[PICK] <cylinder> (4)", (6, 2)),
                                ("[PICK] <cylinder> (6)", (7, 2))),
    },
]


def build_tabletop() -> None:
    out = DATA / "tabletop"
    for spec in TABLE_IV:
        spec = {"grid": [9, 5], **spec}
        spec.setdefault("naive_commands", list(spec["reference_commands"]))
        dump(out / f"{spec['task_id']}.json", spec)


# ---- transcripts ------------------------------------------------------------------


class PlanBackend:
    """Authoring brain: returns the given completions in order."""

    backend_id = "scripted"

    def __init__(self, completions: list[str]):
        self.completions = list(completions)

    def complete(self, messages: PromptMessages):
        return self.completions.pop(0), 0.0


class MappingBackend:
    """Authoring body: looks up the live step text in a table."""

    backend_id = "scripted"

    def __init__(self, table: dict[str, str]):
        self.table = table

    def complete(self, messages: PromptMessages):
        step = re.findall(r"^Step: (.*)$", messages[-1].text, re.M)[-1]
        return self.table[step], 0.0


def numbered(*steps: str) -> str:
    return "\n".join(f"{i}. {s}" for i, s in enumerate(steps, start=1))


# Each entry: list of planner completions (one per revision) and the body table.
HOUSEHOLD_SCRIPTS = {
    "bring_coffeepot_cupcake": (
        [numbered("Walk to the kitchencounter", "Grab the coffeepot", "Walk to the coffeetable",
                  "Grab the cupcake // both items go to the coffee table"),
         "The cupcake is on the kitchen table, not near the coffee table.\n"
         + numbered("Put the coffeepot on the coffeetable // it is already in hand", "Walk to the kitchentable",
                    "Grab the cupcake", "Walk back to the coffeetable", "Put the cupcake on the coffeetable")],
        {"Walk to the kitchencounter": "[WALK] <kitchencounter> (1)", "Grab the coffeepot": "[GRAB] <coffeepot> (1)",
         "Walk to the coffeetable": "[WALK] <coffeetable> (1)", "Grab the cupcake": "[GRAB] <cupcake> (1)",
         "Put the coffeepot on the coffeetable": "[PUTON] <coffeepot> (1) <coffeetable> (1)",
         "Walk to the kitchentable": "[WALK] <kitchentable> (1)", "Walk back to the coffeetable": "[WALK] <coffeetable> (1)",
         "Put the cupcake on the coffeetable": "[PUTON] <cupcake> (1) <coffeetable> (1)"},
    ),
    "brush_teeth": (
        [numbered("Walk to the bathroomcounter", "Grab the toothbrush", "Grab the toothpaste",
                  "Walk to the faucet (2)", "Switch on the faucet (2)", "Brush the teeth // no command for brushing")],
        {"Walk to the bathroomcounter": "[WALK] <bathroomcounter> (1)", "Grab the toothbrush": "[GRAB] <toothbrush> (1)",
         "Grab the toothpaste": "[GRAB] <toothpaste> (1)", "Walk to the faucet (2)": "[WALK] <faucet> (2)",
         "Switch on the faucet (2)": "[SWITCHON] <faucet> (2)", "Brush the teeth": "[Pass]"},
    ),
    "eat_chips_on_sofa": (
        [numbered("Walk to the kitchencabinet", "Open the kitchencabinet", "Take the chips"),
         numbered("Grab the chips // the cabinet is already open", "Close the kitchencabinet", "Walk to the sofa",
                  "Sit on the sofa", "Eat the chips")],
        {"Walk to the kitchencabinet": "[WALK] <kitchencabinet> (1)", "Open the kitchencabinet": "[OPEN] <kitchencabinet> (1)",
         "Take the chips": "grab chips", "Grab the chips": "[GRAB] <chips> (1)",
         "Close the kitchencabinet": "[CLOSE] <kitchencabinet> (1)", "Walk to the sofa": "[WALK] <sofa> (1)",
         "Sit on the sofa": "[SIT] <sofa> (1)", "Eat the chips": "[Pass]"},
    ),
    "make_toast": (
        [numbered("Walk to the kitchentable", "Grab the breadslice"),
         numbered("Walk to the breadslice // it is on the kitchen counter", "Grab the breadslice",
                  "Put the breadslice in the toaster", "Turn on the toaster"),
         numbered("Switch on the toaster // the bread is already inside")],
        {"Walk to the kitchentable": "[WALK] <kitchentable> (1)", "Grab the breadslice": "[GRAB] <breadslice> (1)",
         "Walk to the breadslice": "[WALK] <breadslice> (1)",
         "Put the breadslice in the toaster": "[PUTBACK] <breadslice> (1) <toaster> (1)",
         "Turn on the toaster": "[TURNON] <toaster> (1)", "Switch on the toaster": "[SWITCHON] <toaster> (1)"},
    ),
    "microwave_salmon": (
        [numbered("Walk to the fridge", "Grab the salmon (1)", "Walk to the microwave", "Open the microwave",
                  "Put the salmon (1) in the microwave", "Close the microwave", "Switch on the microwave"),
         numbered("Open the fridge // the salmon is inside the closed fridge", "Grab the salmon (1)",
                  "Close the fridge", "Walk to the microwave", "Open the microwave",
                  "Put the salmon (1) in the microwave", "Close the microwave", "Switch on the microwave")],
        {"Walk to the fridge": "[WALK] <fridge> (1)", "Grab the salmon (1)": "[GRAB] <salmon> (1)",
         "Open the fridge": "[OPEN] <fridge> (1)", "Close the fridge": "[CLOSE] <fridge> (1)",
         "Walk to the microwave": "[WALK] <microwave> (1)", "Open the microwave": "[OPEN] <microwave> (1)",
         "Put the salmon (1) in the microwave": "[PUTBACK] <salmon> (1) <microwave> (1)",
         "Close the microwave": "[CLOSE] <microwave> (1)", "Switch on the microwave": "[SWITCHON] <microwave> (1)"},
    ),
    "put_salmon_in_fridge": (
        [numbered("Walk to the kitchencounter", "Grab the salmon (2) // the salmon on the counter",
                  "Walk to the fridge", "Open the fridge", "Put the salmon (2) in the fridge", "Close the fridge")],
        {"Walk to the kitchencounter": "[WALK] <kitchencounter> (1)", "Grab the salmon (2)": "[GRAB] <salmon> (2)",
         "Walk to the fridge": "[WALK] <fridge> (1)", "Open the fridge": "[OPEN] <fridge> (1)",
         "Put the salmon (2) in the fridge": "[PUTBACK] <salmon> (2) <fridge> (1)", "Close the fridge": "[CLOSE] <fridge> (1)"},
    ),
    "throw_away_apple": (
        ["Sure! The robot should go to the table, take the apple and drop it in the garbage can.",
         numbered("Walk to the apple", "Grab the apple", "Walk to the garbagecan", "Open the garbagecan",
                  "Put the apple in the garbagecan", "Close the garbagecan")],
        {"Walk to the apple": "[WALK] <apple> (1)", "Grab the apple": "[GRAB] <apple> (1)",
         "Walk to the garbagecan": "[WALK] <garbagecan> (1)", "Open the garbagecan": "[OPEN] <garbagecan> (1)",
         "Put the apple in the garbagecan": "[PUTBACK] <apple> (1) <garbagecan> (1)",
         "Close the garbagecan": "[CLOSE] <garbagecan> (1)"},
    ),
    "turn_off_light": (
        [numbered("Walk to the light", "Switch off the light")],
        {"Walk to the light": "[WALK] <light> (1)", "Switch off the light": "[SWITCHOFF] <light> (1)"},
    ),
    "wash_plate": (
        [numbered("Walk to the sink (1)", "Turn on the water"),
         numbered("Walk to the kitchentable", "Grab the plate", "Walk to the sink (1)", "Put the plate in the sink (1)",
                  "Wash the plate"),
         numbered("Walk to the kitchentable", "Grab the plate.", "Walk to the sink (1)",
                  "Put the plate in the sink (1) // try again", "Wash the plate!")],
        {"Walk to the sink (1)": "[WALK] <sink> (1)", "Turn on the water": "[SWITCHON] <sink> (1)",
         "Walk to the kitchentable": "[WALK] <kitchentable> (1)", "Grab the plate": "[GRAB] <plate> (1)",
         "Put the plate in the sink (1)": "[PUTBACK] <plate> (1) <sink> (1)", "Wash the plate": "[WASH] <plate> (1)"},
    ),
    "watch_tv": (
        [numbered("Walk to the tv", "Switch on the tv", "Grab the remotecontrol"),
         numbered("Walk to the coffeetable // the remote is on the coffee table", "Grab the remotecontrol",
                  "Sit on the couch"),
         numbered("Walk to the sofa", "Sit on the sofa", "Switch on the tv"),
         numbered("Watch the tv // the tv is already on and the agent is seated")],
        {"Walk to the tv": "[WALK] <tv> (1)", "Switch on the tv": "[SWITCHON] <tv> (1)",
         "Grab the remotecontrol": "[GRAB] <remotecontrol> (1)", "Walk to the coffeetable": "[WALK] <coffeetable> (1)",
         "Sit on the couch": "[SIT] <couch> (1)", "Walk to the sofa": "[WALK] <sofa> (1)",
         "Sit on the sofa": "[SIT] <sofa> (1)", "Watch the tv": "[Pass]"},
    ),
}

OSCILLATION_SCRIPT = (
    "put_milk_on_table",
    "Put the milk on the kitchentable",
    [numbered("Walk to the fridge", "Grab the milk", "Walk to the kitchentable", "Put the milk on the kitchentable"),
     numbered("Walk to the fridge", "Grab the milk", "Walk to the kitchentable",
              "Put the milk on the kitchentable // retrying"),
     numbered("Open the fridge", "Grab the milk")],
    {"Walk to the fridge": "[WALK] <fridge> (1)", "Grab the milk": "[GRAB] <milk> (1)",
     "Walk to the kitchentable": "[WALK] <kitchentable> (1)",
     "Put the milk on the kitchentable": "[PUTON] <milk> (1) <kitchentable> (1)", "Open the fridge": "[OPEN] <fridge> (1)"},
)

PLUS_SCRIPT = (
    [numbered("Pick the red cube (1)", "Place the red cube at the center (4,2)", "Pick the orange cube (2)",
              "Place the orange cube above the center at (4,1)", "Pick the yellow cube (3)",
              "Place the yellow cube below the center at (4,3)", "Pick the green cube (4)",
              "Place the green cube left of the center at (3,2)", "Pick the blue cube (5)",
              "Place the blue cube right of the center at (5,2)", "Return to the home position"),
     "Cell (4,1) cannot be reached, so the plus is rebuilt around (6,2) on the right side.\n"
     + numbered("Place the orange cube at (6,1) // it is still in the gripper", "Pick the red cube (1)",
                "Place the red cube at (6,2)", "Pick the yellow cube (3)", "Place the yellow cube at (6,3)",
                "Pick the green cube (4)", "Place the green cube at (5,2)", "Pick the blue cube (5)",
                "Place the blue cube at (7,2)", "Return to the home position")],
    {"Pick the red cube (1)": "[PICK] <cube> (1)", "Place the red cube at the center (4,2)": "[PLACE] (4,2)",
     "Pick the orange cube (2)": "[PICK] <cube> (2)", "Place the orange cube above the center at (4,1)": "[PLACE] (4,1)",
     "Pick the yellow cube (3)": "[PICK] <cube> (3)", "Place the yellow cube below the center at (4,3)": "[PLACE] (4,3)",
     "Pick the green cube (4)": "[PICK] <cube> (4)", "Place the green cube left of the center at (3,2)": "[PLACE] (3,2)",
     "Pick the blue cube (5)": "[PICK] <cube> (5)", "Place the blue cube right of the center at (5,2)": "[PLACE] (5,2)",
     "Return to the home position": "[HOME]", "Place the orange cube at (6,1)": "[PLACE] (6,1)",
     "Place the red cube at (6,2)": "[PLACE] (6,2)", "Place the yellow cube at (6,3)": "[PLACE] (6,3)",
     "Place the green cube at (5,2)": "[PLACE] (5,2)", "Place the blue cube at (7,2)": "[PLACE] (7,2)"},
)


def author(task: TaskSpec, env, plans: list[str], table: dict[str, str], out_dir: Path, k: int = 3):
    brain, body = Session(PlanBackend(plans)), Session(MappingBackend(table))
    trace = run_episode(task, env, brain, body, LoopConfig(max_feedback_loops=k), PromptKit.load(task.kind))
    record(brain, out_dir / f"{task.id}.brain.jsonl")
    record(body, out_dir / f"{task.id}.body.jsonl")
    return trace


def build_transcripts(rows: list[dict]) -> None:
    out = DATA / "transcripts" / "household"
    scene = load_scene(SCENE)
    by_id = {r["id"]: r for r in rows}
    for tid, (plans, table) in HOUSEHOLD_SCRIPTS.items():
        row = by_id[tid]
        task = TaskSpec(tid, row["description"], HOUSEHOLD, SCENE, row["script"], row["relevant_objects"])
        trace = author(task, scene.fresh(), plans, table, out)
        print(f"{tid:28s} {trace.status:24s} revisions={len(trace.plans) - 1}")
    tid, desc, plans, table = OSCILLATION_SCRIPT
    trace = author(TaskSpec(tid, desc, HOUSEHOLD, SCENE), scene.fresh(), plans, table, DATA / "transcripts" / "scenarios")
    print(f"{tid:28s} {trace.status:24s} revisions={len(trace.plans) - 1}")

    tt = load_tabletop_task(DATA / "tabletop" / "tt6_plus_sign.json")
    task = TaskSpec(tt.task_id, tt.description, TABLETOP, goal=tt.goal)
    env = TabletopEnv(tt.initial.copy(), tt.goal, tt.task_id)
    trace = author(task, env, PLUS_SCRIPT[0], PLUS_SCRIPT[1], DATA / "transcripts" / "tabletop")
    print(f"{tt.task_id:28s} {trace.status:24s} revisions={len(trace.plans) - 1} goal={env.check_goal()}")


def main() -> None:
    rows = build_dataset()
    build_exemplars(rows)
    build_tabletop()
    build_transcripts(rows)


if __name__ == "__main__":
    main()
