import pytest

from brainbody import resources
from brainbody.household import load_scene
from brainbody.llm import open_session, scripted_responses
from brainbody.orchestrator import (
    BACKEND_ERROR,
    BUDGET_EXHAUSTED,
    COMPLETED,
    HOUSEHOLD,
    OSCILLATION,
    EpisodeTrace,
    Feedback,
    LoopConfig,
    Plan,
    PlanParseError,
    PlanStep,
    PromptKit,
    TaskSpec,
    build_feedback_prompt,
    build_planning_prompt,
    build_translation_prompt,
    fill_template,
    parse_plan,
    run_episode,
)

SCENE = resources.path("scenes", "home.json")


@pytest.fixture(scope="module")
def scene():
    return load_scene(SCENE)


@pytest.fixture(scope="module")
def kit():
    return PromptKit.load(HOUSEHOLD)


def sessions(plans, commands):
    return open_session(scripted_responses(plans)), open_session(scripted_responses(commands))


TASK = TaskSpec("t", "Turn off light", HOUSEHOLD)


@pytest.mark.parametrize(
    "text,steps",
    [
        ("1. Walk to the light\n2. Switch off the light", ["Walk to the light", "Switch off the light"]),
        ("Sure.\n1) Walk\n\n2) Grab\nDone!", ["Walk", "Grab"]),
        ("Step 1: Walk\nstep 2: Grab", ["Walk", "Grab"]),
        ("- 3. Walk\n- 7. Grab", ["Walk", "Grab"]),
    ],
)
def test_parse_plan_forms(text, steps):
    plan = parse_plan(text)
    assert [s.text for s in plan.steps] == steps
    assert [s.index for s in plan.steps] == list(range(1, len(steps) + 1))


def test_parse_plan_rationale():
    plan = parse_plan("1. Open the fridge // milk is inside\n2. Grab the milk")
    assert plan.steps[0] == PlanStep(1, "Open the fridge", "milk is inside")
    assert plan.steps[1].rationale is None
    assert plan.render() == "1. Open the fridge // milk is inside\n2. Grab the milk"


@pytest.mark.parametrize("text", ["", "I cannot help with that.", "1.\n2. //only a comment"])
def test_parse_plan_rejects(text):
    with pytest.raises(PlanParseError) as info:
        parse_plan(text)
    assert info.value.completion == text


def test_normalized_ignores_case_punctuation_rationale():
    a = parse_plan("1. Grab the plate.\n2. Wash it! // again")
    b = parse_plan("1) grab THE plate\n2) wash it")
    assert a.normalized() == b.normalized()
    assert a.normalized() != parse_plan("1. Grab the cup\n2. Wash it").normalized()


def test_fill_template_leaves_unknown():
    assert fill_template("{a} and {b}", a="x") == "x and {b}"


def test_planning_prompt_structure(scene, kit):
    prompt = build_planning_prompt(TASK, scene.perceive(), kit.planning_exemplars, kit)
    assert prompt[0].role == "system" and prompt[1].role == "user"
    user = prompt[1].text
    assert "Turn off light" in user
    assert "STATE <light> (1): ON" in user
    assert kit.planning_exemplars[0][0] in user
    with pytest.raises(ValueError):
        build_planning_prompt(TASK, scene.perceive(), [], kit)


def test_feedback_prompt_structure(scene, kit):
    prior = parse_plan("1. Grab the milk")
    fb = Feedback("STATE x", "[GRAB] <milk> (1)", "Cannot execute ... [ContainerClosed]", "Please revise.")
    prompt = build_feedback_prompt(TASK, prior, fb, kit.feedback_exemplars, kit)
    user = prompt[-1].text
    for part in ("1. Grab the milk", "[ContainerClosed]", "STATE x", "Please revise."):
        assert part in user
    with pytest.raises(ValueError):
        build_feedback_prompt(TASK, prior, None, kit.feedback_exemplars, kit)


def test_translation_prompt_lists_commands(scene, kit):
    prompt = build_translation_prompt(PlanStep(1, "Walk to the fridge"), scene.catalog, kit.body_exemplars, kit)
    assert "[PUTBACK] <object> (id) <object> (id)" in prompt[0].text
    assert prompt[-1].text.rstrip().endswith("Step: Walk to the fridge\nCommand:")


def test_completes_first_try(scene, kit):
    brain, body = sessions(["1. Walk to the light\n2. Switch off the light"],
                           ["[WALK] <light> (1)", "[SWITCHOFF] <light> (1)"])
    trace = run_episode(TASK, scene.fresh(), brain, body, LoopConfig(), kit)
    assert trace.status == COMPLETED
    assert [a.outcome for a in trace.attempts] == ["ok", "ok"]
    assert "STATE <light> (1): OFF" in trace.final_summary
    assert trace.brain_calls == 1 and trace.body_calls == 2


def test_pass_step_is_skipped(scene, kit):
    brain, body = sessions(["1. Think about it\n2. Walk to the light"], ["[Pass]", "[WALK] <light> (1)"])
    env = scene.fresh()
    trace = run_episode(TASK, env, brain, body, LoopConfig(), kit)
    assert [a.outcome for a in trace.attempts] == ["pass", "ok"]
    assert trace.status == COMPLETED


def test_budget_zero_stops_after_first_failure(scene, kit):
    brain, body = sessions(["1. Grab the milk"], ["[GRAB] <milk> (1)"])
    trace = run_episode(TASK, scene.fresh(), brain, body, LoopConfig(max_feedback_loops=0), kit)
    assert trace.status == BUDGET_EXHAUSTED
    assert len(trace.plans) == 1 and trace.attempts[-1].error_code == "NotCloseEnough"


def test_revision_restarts_from_step_one_on_persisted_state(scene, kit):
    brain, body = sessions(
        ["1. Walk to the fridge\n2. Grab the milk", "1. Open the fridge\n2. Grab the milk"],
        ["[WALK] <fridge> (1)", "[GRAB] <milk> (1)", "[OPEN] <fridge> (1)", "[GRAB] <milk> (1)"],
    )
    trace = run_episode(TASK, scene.fresh(), brain, body, LoopConfig(max_feedback_loops=1), kit)
    assert trace.status == COMPLETED
    assert [(a.revision, a.step_index, a.outcome) for a in trace.attempts] == [
        (0, 1, "ok"), (0, 2, "exec_error"), (1, 1, "ok"), (1, 2, "ok"),
    ]
    # the feedback prompt carried the error and the state after the failure
    fb_prompt = brain.exchanges[1].request[-1].text
    assert "[ContainerClosed]" in fb_prompt
    assert "AGENT at <fridge> (1)" in fb_prompt


def test_body_parse_error_triggers_feedback(scene, kit):
    brain, body = sessions(["1. Fly to the light", "1. Walk to the light"], ["[FLY] <light> (1)", "[WALK] <light> (1)"])
    trace = run_episode(TASK, scene.fresh(), brain, body, LoopConfig(), kit)
    assert trace.status == COMPLETED
    assert trace.attempts[0].outcome == "parse_error"
    assert trace.attempts[0].error_code == "UnknownVerb"
    assert trace.failures[0].kind == "parse_error"


def test_plan_parse_error_consumes_a_loop(scene, kit):
    brain, body = sessions(["no plan here", "1. Walk to the light"], ["[WALK] <light> (1)"])
    trace = run_episode(TASK, scene.fresh(), brain, body, LoopConfig(max_feedback_loops=1), kit)
    assert trace.status == COMPLETED
    assert trace.failures[0].kind == "plan_parse_error"
    retry = brain.exchanges[1].request
    assert retry[-2].role == "assistant" and retry[-2].text == "no plan here"
    assert retry[-1].role == "user"

    brain, body = sessions(["no plan here", "1. Walk to the light"], ["[WALK] <light> (1)"])
    trace = run_episode(TASK, scene.fresh(), brain, body, LoopConfig(max_feedback_loops=0), kit)
    assert trace.status == BUDGET_EXHAUSTED and trace.plans == []


def test_oscillation_detected(scene, kit):
    plans = ["1. Grab the milk", "1. grab the milk. // retry", "1. Walk to the fridge"]
    brain, body = sessions(plans, ["[GRAB] <milk> (1)"] * 3)
    trace = run_episode(TASK, scene.fresh(), brain, body, LoopConfig(max_feedback_loops=3), kit)
    assert trace.status == OSCILLATION
    assert trace.detail == "revision 1 repeats revision 0"
    assert trace.body_calls == 1


def test_oscillation_guard_off_runs_budget(scene, kit):
    plans = ["1. Grab the milk"] * 3
    brain, body = sessions(plans, ["[GRAB] <milk> (1)"] * 3)
    trace = run_episode(TASK, scene.fresh(), brain, body, LoopConfig(max_feedback_loops=2, oscillation_guard=False), kit)
    assert trace.status == BUDGET_EXHAUSTED
    assert len(trace.plans) == 3


def test_backend_error_is_reported(scene, kit):
    brain, body = sessions(["1. Walk to the light\n2. Switch off the light"], ["[WALK] <light> (1)"])
    trace = run_episode(TASK, scene.fresh(), brain, body, LoopConfig(), kit)
    assert trace.status == BACKEND_ERROR
    assert trace.detail.startswith("translator:")


def test_trace_json_round_trip(scene, kit):
    brain, body = sessions(["1. Walk to the fridge\n2. Grab the milk", "1. Open the fridge\n2. Grab the milk"],
                           ["[WALK] <fridge> (1)", "[GRAB] <milk> (1)", "[OPEN] <fridge> (1)", "[GRAB] <milk> (1)"])
    trace = run_episode(TASK, scene.fresh(), brain, body, LoopConfig(), kit)
    text = trace.to_json()
    again = EpisodeTrace.from_json(text)
    assert again.to_json() == text
    assert again.plans[1] == trace.plans[1]
    assert isinstance(again.plans[0], Plan)


def test_loop_config_rejects_negative():
    with pytest.raises(ValueError):
        LoopConfig(max_feedback_loops=-1)
