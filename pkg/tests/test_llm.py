import json
import threading
import time

import httpx
import pytest

from brainbody.llm import (
    ConfigError,
    Exchange,
    Gateway,
    HttpConfig,
    HttpError,
    LLMError,
    LLMTimeout,
    PromptMessages,
    ScriptedConfig,
    TranscriptExhausted,
    TranscriptLoadError,
    TranscriptMismatch,
    config_from_dict,
    load_transcript,
    open_session,
    record,
    scripted_responses,
)

PROMPT = PromptMessages.of("You are a planner.", ("user", "Task: make toast"))


def ok_body(text):
    return {"choices": [{"message": {"role": "assistant", "content": text}}]}


def http_config(handler, **kw):
    kw.setdefault("auth_env", None)
    kw.setdefault("backoff", 0.0)
    return HttpConfig("http://llm.test/v1/chat/completions", "m1", transport=httpx.MockTransport(handler), **kw)


def test_prompt_requires_system_first():
    from brainbody.llm import Message

    with pytest.raises(ValueError):
        PromptMessages(())
    with pytest.raises(ValueError):
        PromptMessages((Message("user", "hi"),))
    with pytest.raises(ValueError):
        Message("robot", "hi")


def test_http_payload_and_auth(monkeypatch):
    seen = {}

    def handler(request):
        seen["auth"] = request.headers.get("authorization")
        seen["body"] = json.loads(request.content)
        return httpx.Response(200, json=ok_body("1. Walk to the toaster"))

    monkeypatch.setenv("TEST_KEY", "sekrit")
    session = open_session(http_config(handler, auth_env="TEST_KEY", temperature=0.3, max_tokens=64))
    assert session.complete(PROMPT) == "1. Walk to the toaster"
    assert seen["auth"] == "Bearer sekrit"
    assert seen["body"]["model"] == "m1"
    assert seen["body"]["temperature"] == 0.3
    assert seen["body"]["max_tokens"] == 64
    assert seen["body"]["messages"][0] == {"role": "system", "content": "You are a planner."}
    ex = session.exchanges[0]
    assert ex.backend == "http:m1" and ex.latency >= 0


def test_missing_auth_env_is_config_error(monkeypatch):
    monkeypatch.delenv("NOPE_KEY", raising=False)
    with pytest.raises(ConfigError, match="NOPE_KEY"):
        open_session(http_config(lambda r: httpx.Response(200), auth_env="NOPE_KEY"))


@pytest.mark.parametrize("status", [429, 500, 503])
def test_retries_transient_status(status):
    calls = []

    def handler(request):
        calls.append(1)
        if len(calls) < 3:
            return httpx.Response(status, text="busy")
        return httpx.Response(200, json=ok_body("done"))

    session = open_session(http_config(handler, retries=3))
    assert session.complete(PROMPT) == "done"
    assert len(calls) == 3


def test_gives_up_after_retries():
    calls = []

    def handler(request):
        calls.append(1)
        return httpx.Response(503, text="down")

    session = open_session(http_config(handler, retries=2))
    with pytest.raises(HttpError) as info:
        session.complete(PROMPT)
    assert info.value.status == 503
    assert len(calls) == 3


def test_client_error_not_retried():
    calls = []

    def handler(request):
        calls.append(1)
        return httpx.Response(401, text="bad key")

    with pytest.raises(HttpError) as info:
        open_session(http_config(handler, retries=3)).complete(PROMPT)
    assert info.value.status == 401 and len(calls) == 1


def test_timeout_retried_then_raised():
    def handler(request):
        raise httpx.ReadTimeout("slow", request=request)

    with pytest.raises(LLMTimeout):
        open_session(http_config(handler, retries=1)).complete(PROMPT)


def test_bad_response_shape():
    with pytest.raises(LLMError, match="unexpected response shape"):
        open_session(http_config(lambda r: httpx.Response(200, json={"nope": 1}))).complete(PROMPT)


def test_custom_content_path():
    session = open_session(
        http_config(lambda r: httpx.Response(200, json={"output": {"text": "hi"}}), content_path=("output", "text"))
    )
    assert session.complete(PROMPT) == "hi"


def test_backoff_is_exponential(monkeypatch):
    sleeps = []
    monkeypatch.setattr("brainbody.llm.time.sleep", lambda s: sleeps.append(s))
    with pytest.raises(HttpError):
        open_session(http_config(lambda r: httpx.Response(500), retries=3, backoff=0.5)).complete(PROMPT)
    assert sleeps == [0.5, 1.0, 2.0]


def test_in_flight_limit_shared_per_endpoint():
    lock = threading.Lock()
    state = {"now": 0, "peak": 0}

    def handler(request):
        with lock:
            state["now"] += 1
            state["peak"] = max(state["peak"], state["now"])
        time.sleep(0.02)
        with lock:
            state["now"] -= 1
        return httpx.Response(200, json=ok_body("x"))

    gw = Gateway()
    cfg = http_config(handler, max_in_flight=2)
    sessions = [gw.open_session(cfg) for _ in range(6)]
    threads = [threading.Thread(target=s.complete, args=(PROMPT,)) for s in sessions]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert state["peak"] <= 2
    assert all(len(s.exchanges) == 1 for s in sessions)


@pytest.mark.parametrize(
    "kw",
    [{"temperature": -0.1}, {"temperature": 2.5}, {"retries": -1}, {"max_tokens": 0}, {"max_in_flight": 0}],
)
def test_config_validation(kw):
    with pytest.raises(ConfigError):
        open_session(http_config(lambda r: httpx.Response(200), **kw))


def test_config_from_dict():
    cfg = config_from_dict({"kind": "http", "endpoint": "http://x", "model": "m", "content_path": ["a", 0]})
    assert isinstance(cfg, HttpConfig) and cfg.content_path == ("a", 0)
    assert isinstance(config_from_dict({"kind": "scripted", "transcript_path": "t.jsonl"}), ScriptedConfig)
    with pytest.raises(ConfigError):
        config_from_dict({"kind": "carrier-pigeon"})
    with pytest.raises(ConfigError):
        config_from_dict({"kind": "http", "endpoint": "x", "model": "m", "colour": "red"})


# ---- scripted ---------------------------------------------------------------


def test_scripted_positional_and_exhausted():
    session = open_session(scripted_responses(["a", "b"]))
    assert session.complete(PROMPT) == "a"
    assert session.complete(PROMPT) == "b"
    with pytest.raises(TranscriptExhausted):
        session.complete(PROMPT)


def test_record_then_strict_replay(tmp_path):
    session = open_session(scripted_responses(["1. Walk to the fridge"]))
    session.complete(PROMPT)
    path = record(session, tmp_path / "brain.jsonl")
    replay = open_session(ScriptedConfig(path, strict=True))
    assert replay.complete(PROMPT) == "1. Walk to the fridge"
    assert [e.to_dict() for e in replay.exchanges] == [e.to_dict() for e in session.exchanges]
    again = record(replay, tmp_path / "again.jsonl")
    assert again.read_bytes() == path.read_bytes()


def test_strict_ignores_whitespace_only_changes(tmp_path):
    path = record(_one_exchange(), tmp_path / "t.jsonl")
    loose = PromptMessages.of("You  are a planner.\n", ("user", "Task:   make toast\n\n"))
    assert open_session(ScriptedConfig(path, strict=True)).complete(loose) == "ok"


def test_strict_mismatch_names_line(tmp_path):
    path = record(_one_exchange(), tmp_path / "t.jsonl")
    other = PromptMessages.of("You are a planner.", ("user", "Task: make tea"))
    with pytest.raises(TranscriptMismatch, match="line 2"):
        open_session(ScriptedConfig(path, strict=True)).complete(other)
    # non-strict replays anyway
    assert open_session(ScriptedConfig(path)).complete(other) == "ok"


def _one_exchange():
    s = open_session(ScriptedConfig(exchanges=[Exchange(None, "ok")]))
    s.complete(PROMPT)
    return s


def test_load_transcript_errors(tmp_path):
    with pytest.raises(TranscriptLoadError, match="not found"):
        load_transcript(tmp_path / "missing.jsonl")
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"response": "a"}\n{not json\n')
    with pytest.raises(TranscriptLoadError, match=":2:"):
        load_transcript(bad)


def test_scripted_config_requires_source():
    with pytest.raises(ConfigError):
        open_session(ScriptedConfig())
