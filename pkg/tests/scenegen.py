"""Random small household scenes and action sequences for property tests."""

from __future__ import annotations

import random

from brainbody.grammar import ActionStep, ObjectRef
from brainbody.household import HouseholdEnv, default_catalog, load_scene

FURNITURE = [
    ("box", ["CONTAINER", "OPENABLE"]),
    ("shelf", ["SURFACE"]),
    ("table", ["SURFACE"]),
    ("oven", ["CONTAINER", "OPENABLE", "SWITCHABLE"]),
    ("lamp", ["SWITCHABLE"]),
    ("chair", ["SITTABLE"]),
    ("jar", ["CONTAINER", "OPENABLE", "GRABBABLE"]),
]
ITEMS = ["cup", "book", "apple", "key"]


def _initial_states(props: list[str], rng: random.Random) -> list[str]:
    out = []
    if "OPENABLE" in props:
        out.append(rng.choice(["OPEN", "CLOSED"]))
    if "SWITCHABLE" in props:
        out.append(rng.choice(["ON", "OFF"]))
    return out


def random_scene_dict(rng: random.Random) -> dict:
    objects, relations = [], []
    counts: dict[str, int] = {}

    def add(name: str, props: list[str]) -> str:
        counts[name] = counts.get(name, 0) + 1
        objects.append({"name": name, "id": counts[name], "properties": props, "states": _initial_states(props, rng)})
        return f"<{name}> ({counts[name]})"

    furniture = [(add(n, p), p) for n, p in rng.sample(FURNITURE, rng.randint(2, 5))]
    receivers = [ref for ref, p in furniture if ("CONTAINER" in p or "SURFACE" in p) and "GRABBABLE" not in p]
    for _ in range(rng.randint(1, 4)):
        ref = add(rng.choice(ITEMS), ["GRABBABLE"])
        if receivers and rng.random() < 0.8:
            target = rng.choice(receivers)
            rel = "INSIDE" if "CONTAINER" in next(p for r, p in furniture if r == target) else "ONTOP"
            relations.append([ref, rel, target])
    # a jar may sit on a surface
    for ref, p in furniture:
        if "GRABBABLE" in p:
            surfaces = [r for r, q in furniture if "SURFACE" in q]
            if surfaces and rng.random() < 0.5:
                relations.append([ref, "ONTOP", rng.choice(surfaces)])
    fixed = [ref for ref, p in furniture if "GRABBABLE" not in p]
    for a, b in zip(fixed, fixed[1:]):
        if rng.random() < 0.4:
            relations.append([a, "CLOSE_TO", b])
    anchor = rng.choice([None, *fixed])
    return {"objects": objects, "relations": relations, "agent": {"anchor": anchor, "posture": "STANDING"}}


def random_scene(rng: random.Random) -> HouseholdEnv:
    return load_scene(random_scene_dict(rng), default_catalog())


def random_step(env: HouseholdEnv, rng: random.Random, unknown_rate: float = 0.0) -> ActionStep:
    refs = sorted(env.state.objects)
    verb = rng.choice(env.catalog.verbs)
    arity = env.catalog[verb].arity
    args = []
    for _ in range(arity):
        if rng.random() < unknown_rate:
            args.append(ObjectRef("ghost", 1))
        else:
            args.append(rng.choice(refs))
    return ActionStep(verb, tuple(args))


def random_walk(env: HouseholdEnv, rng: random.Random, n: int) -> list[ActionStep]:
    """Execute ``n`` random steps (failures included); return the ones that succeeded."""
    done = []
    for _ in range(n):
        step = random_step(env, rng)
        if env.execute(step).ok:
            done.append(step)
    return done


def guided_walk(env: HouseholdEnv, rng: random.Random, n: int) -> list[ActionStep]:
    """Like :func:`random_walk` but walks next to the object first, so more steps succeed."""
    done = []
    for _ in range(n):
        step = random_step(env, rng)
        if step.args and step.verb not in ("WALK", "FIND"):
            walk = ActionStep("WALK", (step.args[-1],))
            if env.execute(walk).ok:
                done.append(walk)
        if env.execute(step).ok:
            done.append(step)
    return done


def metric_case(seed: int):
    """A scene, a reference script that changes at least one atom, and an agent end state.

    Returns ``(scene, reference_env, agent_env, script, relevant_refs)``.
    """
    rng = random.Random(seed)
    while True:
        scene = random_scene(rng)
        ref_env = scene.fresh()
        script = guided_walk(ref_env, rng, rng.randint(2, 10))
        if ref_env.state.atoms() != scene.initial_state.atoms():
            break
    agent_env = scene.fresh()
    for step in script[: rng.randint(0, len(script))]:
        agent_env.execute(step)
    if rng.random() < 0.5:
        guided_walk(agent_env, rng, rng.randint(1, 6))
    refs = sorted(o.render() for o in scene.state.objects)
    relevant = tuple(rng.sample(refs, rng.randint(1, min(3, len(refs)))))
    return scene, ref_env, agent_env, script, relevant
