from __future__ import annotations

import json
import logging

import httpx
import pytest

from lengthfidelity.client import (
    ModelEndpoint,
    build_payload,
    endpoint_from_config,
    estimate_tokens,
    generate,
    mock_model,
)
from lengthfidelity.errors import AuthError, PlanError, ProviderError, RateLimited, Timeout
from lengthfidelity.ingest import Attachment
from lengthfidelity.metrics import length_metrics
from lengthfidelity.parse import ParseMethod, parse_response
from lengthfidelity.prompt import TaskKind, TaskSpec, get_variant, render
from lengthfidelity.wordcount import count_words

DOC = "Source text."


def _prompt(name, t):
    return render(get_variant(name), TaskSpec(TaskKind.SUMMARIZE, t, DOC))


def _final(endpoint, name, t):
    v = get_variant(name)
    return parse_response(generate(endpoint, _prompt(name, t)).text, v.family)


# -- mock ----------------------------------------------------------------------

def test_mock_exact_vanilla():
    assert count_words(_final(mock_model("exact"), "vanilla-v1", 50).final_text) == 50


def test_mock_exact_thinking_v1_tagged():
    text = generate(mock_model("exact"), _prompt("thinking-v1", 20)).text
    assert "<final_answer>" in text and "</final_answer>" in text
    p = parse_response(text, "thinking")
    assert p.parse_method is ParseMethod.TAG_PAIR
    assert count_words(p.final_text) == 20


def test_mock_thinking_v2_marker():
    p = _final(mock_model("exact"), "thinking-v2", 50)
    assert p.parse_method is ParseMethod.MARKER
    assert count_words(p.final_text) == 50


def test_mock_offset():
    p = _final(mock_model("offset", offset=6), "vanilla-v2", 20)
    assert count_words(p.final_text) == 26


def test_mock_scale():
    n = count_words(_final(mock_model("scale", scale=1.3), "thinking-v1", 100).final_text)
    assert n == 130
    assert length_metrics(n, 100).apd == pytest.approx(0.30, abs=1e-12)
    # half rounds up: 1.3 * 5 = 6.5 -> 7
    assert count_words(_final(mock_model("scale", scale=1.3), "vanilla-v1", 5).final_text) == 7


def test_mock_verbose():
    n = count_words(_final(mock_model("verbose"), "vanilla-v1", 20).final_text)
    assert length_metrics(n, 20).ratio == 3.0


@pytest.mark.parametrize("name", ["vanilla-v1", "vanilla-v2", "thinking-v1", "thinking-v2"])
@pytest.mark.parametrize("t", [1, 20, 333])
def test_mock_exact_all_variants(name, t):
    assert count_words(_final(mock_model("exact", seed=3), name, t).final_text) == t


def test_mock_deterministic_and_seeded():
    p = _prompt("vanilla-v1", 40)
    a = generate(mock_model("exact", seed=1), p).text
    assert a == generate(mock_model("exact", seed=1), p).text
    assert a != generate(mock_model("exact", seed=2), p).text


def test_mock_story_prompt():
    v = get_variant("story-vanilla")
    text = generate(mock_model("exact"), render(v, TaskSpec(TaskKind.STORY, 30))).text
    assert count_words(text) == 30


def test_mock_judge():
    ep = mock_model("judge", score=0.9, responses={"Dimension: Relevance": "not json"})
    assert json.loads(generate(ep, "Dimension: Correctness").text)["score"] == 0.9
    assert generate(ep, "Dimension: Relevance").text == "not json"


def test_mock_token_accounting():
    r = generate(mock_model("exact"), "exactly 10 words")
    assert r.tokens_estimated
    assert r.output_tokens == estimate_tokens(len(r.text))
    assert r.latency_ms >= 0


# -- HTTP --------------------------------------------------------------------

def _endpoint(**kw):
    base = dict(id="prov", base_url="https://llm.test/v1", api_key_env="LF_TEST_KEY", model="m-1",
                backoff_base_s=0.0, backoff_cap_s=0.0, max_retries=2)
    base.update(kw)
    return ModelEndpoint(**base)


def _ok_body(text="hello world", usage=True):
    body = {"choices": [{"message": {"role": "assistant", "content": text}}]}
    if usage:
        body["usage"] = {"prompt_tokens": 11, "completion_tokens": 3}
    return body


@pytest.fixture
def key(monkeypatch):
    monkeypatch.setenv("LF_TEST_KEY", "sk-secret-123")


def _client(handler):
    return httpx.Client(transport=httpx.MockTransport(handler))


def test_http_success_and_payload(key):
    seen = {}

    def handler(req):
        seen["url"] = str(req.url)
        seen["auth"] = req.headers["authorization"]
        seen["body"] = json.loads(req.content)
        return httpx.Response(200, json=_ok_body())

    prompt = _prompt("thinking-v1", 20)
    r = generate(_endpoint(), prompt, "The doc.", http_client=_client(handler))
    assert r.text == "hello world"
    assert (r.input_tokens, r.output_tokens, r.tokens_estimated) == (11, 3, False)
    assert seen["url"] == "https://llm.test/v1/chat/completions"
    assert seen["auth"] == "Bearer sk-secret-123"
    body = seen["body"]
    assert body["model"] == "m-1"
    assert body["temperature"] == 1.0
    assert body["max_tokens"] == 4 * 20 + 512
    content = body["messages"][0]["content"]
    assert content.startswith(prompt.text)  # instruction first, byte-identical
    assert content.endswith("The doc.")


def test_http_missing_usage_is_estimated(key):
    r = generate(_endpoint(), "exactly 5 words", http_client=_client(lambda req: httpx.Response(200, json=_ok_body("abcdefghi", usage=False))))
    assert r.tokens_estimated
    assert r.output_tokens == 3  # ceil(9 / 4)


def test_missing_env_var(monkeypatch):
    monkeypatch.delenv("LF_TEST_KEY", raising=False)
    with pytest.raises(AuthError):
        generate(_endpoint(), "hi", http_client=_client(lambda req: httpx.Response(200, json=_ok_body())))


@pytest.mark.parametrize("status", [401, 403])
def test_auth_errors_not_retried(key, status):
    calls = []

    def handler(req):
        calls.append(1)
        return httpx.Response(status, text="nope")

    with pytest.raises(AuthError):
        generate(_endpoint(), "hi", http_client=_client(handler))
    assert len(calls) == 1


def test_rate_limit_retried_then_success(key):
    calls = []

    def handler(req):
        calls.append(1)
        return httpx.Response(429) if len(calls) < 3 else httpx.Response(200, json=_ok_body())

    assert generate(_endpoint(), "hi", http_client=_client(handler)).text == "hello world"
    assert len(calls) == 3


def test_rate_limit_budget_exhausted(key):
    calls = []

    def handler(req):
        calls.append(1)
        return httpx.Response(429)

    with pytest.raises(RateLimited):
        generate(_endpoint(max_retries=2), "hi", http_client=_client(handler))
    assert len(calls) == 3


def test_server_error_reports_status(key):
    with pytest.raises(ProviderError) as info:
        generate(_endpoint(max_retries=1), "hi", http_client=_client(lambda req: httpx.Response(503, text="down")))
    assert info.value.status == 503
    assert "down" in info.value.body


def test_client_error_not_retried(key):
    calls = []

    def handler(req):
        calls.append(1)
        return httpx.Response(400, text="bad request body")

    with pytest.raises(ProviderError) as info:
        generate(_endpoint(), "hi", http_client=_client(handler))
    assert info.value.status == 400 and len(calls) == 1


def test_timeout(key):
    def handler(req):
        raise httpx.ReadTimeout("slow", request=req)

    with pytest.raises(Timeout):
        generate(_endpoint(max_retries=1), "hi", http_client=_client(handler))


def test_debug_log_redacts_secret(key, caplog):
    caplog.set_level(logging.DEBUG, logger="lengthfidelity.client")
    generate(_endpoint(), "hi", http_client=_client(lambda req: httpx.Response(200, json=_ok_body())))
    assert "sk-secret-123" not in caplog.text
    assert "<redacted>" in caplog.text


def test_payload_document_first_and_file_part():
    ep = _endpoint(document_first=True)
    assert build_payload(ep, "P", "D")["messages"][0]["content"] == "D\n\nP"
    ep = _endpoint(attachment_mode="file_part")
    parts = build_payload(ep, "P", Attachment("letter.pdf", b"%PDF-1.4", "application/pdf"))["messages"][0]["content"]
    assert parts[0] == {"type": "text", "text": "P"}
    assert parts[1]["type"] == "file"
    assert parts[1]["file"]["filename"] == "letter.pdf"
    assert parts[1]["file"]["file_data"].startswith("data:application/pdf;base64,")


def test_endpoint_config_validation():
    with pytest.raises(PlanError):
        endpoint_from_config({"id": "x", "request_style": "carrier-pigeon"})
    with pytest.raises(PlanError):
        endpoint_from_config({"id": "x", "request_style": "chat_completions", "base_url": "https://a"})
    with pytest.raises(PlanError):
        endpoint_from_config({"id": "x", "request_style": "mock", "colour": "blue"})
    ep = endpoint_from_config({"id": "m", "request_style": "mock", "mock": {"mode": "offset", "offset": 4}})
    assert ep.mock.offset == 4
    assert "sk-" not in json.dumps(_endpoint().to_config())
