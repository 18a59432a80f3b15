"""Model invocation: a chat-completions HTTP adapter and a deterministic mock.

Every real endpoint is driven through one wire format (``POST
{base_url}/chat/completions`` with a bearer token read from the environment
variable named in the endpoint). Provider quirks are handled with
``attachment_mode`` and extra headers rather than per-provider code.
"""

from __future__ import annotations

import enum
import hashlib
import json
import logging
import math
import os
import random
import time
from collections.abc import Mapping
from dataclasses import dataclass, field
from typing import Any

import httpx

from .errors import AuthError, PlanError, ProviderError, RateLimited, Timeout
from .ingest import Attachment, SourceDocument
from .prompt import FINAL_MARKER, RenderedPrompt, target_from_prompt

log = logging.getLogger(__name__)

DEFAULT_TEMPERATURE = 1.0


class RequestStyle(str, enum.Enum):
    CHAT_COMPLETIONS = "chat_completions"
    MOCK = "mock"


class AttachmentMode(str, enum.Enum):
    FILE_PART = "file_part"
    INLINE_TEXT = "inline_text"


class MockMode(str, enum.Enum):
    EXACT = "exact"
    OFFSET = "offset"
    SCALE = "scale"
    VERBOSE = "verbose"
    JUDGE = "judge"


@dataclass(frozen=True)
class MockConfig:
    mode: MockMode = MockMode.EXACT
    seed: int = 0
    offset: int = 0
    scale: float = 1.0
    # judge mode: fixed score, with per-prompt overrides keyed by a substring
    score: float = 1.0
    responses: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "mode", MockMode(self.mode))


@dataclass(frozen=True)
class ModelEndpoint:
    id: str
    request_style: RequestStyle = RequestStyle.CHAT_COMPLETIONS
    model: str | None = None
    base_url: str | None = None
    api_key_env: str | None = None
    temperature: float = DEFAULT_TEMPERATURE
    max_output_tokens: int | None = None
    attachment_mode: AttachmentMode = AttachmentMode.INLINE_TEXT
    document_first: bool = False
    headers: Mapping[str, str] = field(default_factory=dict)
    timeout_s: float = 120.0
    max_retries: int = 4
    backoff_base_s: float = 1.0
    backoff_cap_s: float = 30.0
    mock: MockConfig | None = None

    def __post_init__(self):
        object.__setattr__(self, "request_style", RequestStyle(self.request_style))
        object.__setattr__(self, "attachment_mode", AttachmentMode(self.attachment_mode))
        if self.request_style is RequestStyle.MOCK and self.mock is None:
            object.__setattr__(self, "mock", MockConfig())

    def to_config(self) -> dict[str, Any]:
        """Plain-data form, as written to plan files and store headers."""
        out: dict[str, Any] = {"id": self.id, "request_style": self.request_style.value}
        if self.request_style is RequestStyle.MOCK:
            m = self.mock
            out["mock"] = {"mode": m.mode.value, "seed": m.seed, "offset": m.offset,
                           "scale": m.scale, "score": m.score, "responses": dict(m.responses)}
            return out
        out.update(
            model=self.model, base_url=self.base_url, api_key_env=self.api_key_env,
            temperature=self.temperature, max_output_tokens=self.max_output_tokens,
            attachment_mode=self.attachment_mode.value, document_first=self.document_first,
            headers=dict(self.headers), timeout_s=self.timeout_s, max_retries=self.max_retries,
        )
        return out


_ENDPOINT_KEYS = {
    "id", "request_style", "model", "base_url", "api_key_env", "temperature",
    "max_output_tokens", "attachment_mode", "document_first", "headers", "timeout_s",
    "max_retries", "backoff_base_s", "backoff_cap_s", "mock",
}


def endpoint_from_config(cfg: Mapping[str, Any]) -> ModelEndpoint:
    """Build an endpoint from a plan-file mapping, raising PlanError on bad input."""
    if "id" not in cfg:
        raise PlanError("endpoint needs an 'id'")
    unknown = set(cfg) - _ENDPOINT_KEYS
    if unknown:
        raise PlanError(f"endpoint {cfg['id']!r}: unknown keys {sorted(unknown)}")
    kwargs = dict(cfg)
    try:
        style = RequestStyle(kwargs.get("request_style", RequestStyle.CHAT_COMPLETIONS))
    except ValueError:
        raise PlanError(
            f"endpoint {cfg['id']!r}: unknown request_style {cfg.get('request_style')!r} "
            f"(expected one of {[s.value for s in RequestStyle]})"
        ) from None
    kwargs["request_style"] = style
    if "mock" in kwargs and kwargs["mock"] is not None:
        try:
            kwargs["mock"] = MockConfig(**kwargs["mock"])
        except (TypeError, ValueError) as exc:
            raise PlanError(f"endpoint {cfg['id']!r}: bad mock config: {exc}") from None
    if style is RequestStyle.CHAT_COMPLETIONS:
        if not kwargs.get("base_url"):
            raise PlanError(f"endpoint {cfg['id']!r}: chat_completions needs base_url")
        if not kwargs.get("api_key_env"):
            raise PlanError(f"endpoint {cfg['id']!r}: chat_completions needs api_key_env")
    try:
        return ModelEndpoint(**kwargs)
    except ValueError as exc:
        raise PlanError(f"endpoint {cfg['id']!r}: {exc}") from None


def mock_model(
    mode: MockMode | str = MockMode.EXACT,
    seed: int = 0,
    *,
    offset: int = 0,
    scale: float = 1.0,
    score: float = 1.0,
    responses: Mapping[str, str] | None = None,
    id: str | None = None,
) -> ModelEndpoint:
    """Offline endpoint with a fixed, seeded output contract.

    The target ``t`` is read from the first integer after "exactly" in the
    prompt. ``exact`` emits ``t`` countable words, ``offset`` emits
    ``t + offset``, ``scale`` emits ``round(scale * t)`` (half up) and
    ``verbose`` emits ``3 * t``. Prompts carrying a thinking scaffold get a
    matching ``<thinking>`` / final-answer structure back. ``judge`` mode
    answers with a JSON score object instead.
    """
    cfg = MockConfig(mode, seed, offset, scale, score, dict(responses or {}))
    return ModelEndpoint(id=id or f"mock-{cfg.mode.value}", request_style=RequestStyle.MOCK, mock=cfg)


@dataclass(frozen=True)
class ModelResponse:
    text: str
    input_tokens: int
    output_tokens: int
    latency_ms: float
    tokens_estimated: bool = False


Document = SourceDocument | Attachment | str | None


def generate(
    endpoint: ModelEndpoint,
    prompt: RenderedPrompt | str,
    document: Document = None,
    *,
    http_client: httpx.Client | None = None,
    target_words: int | None = None,
) -> ModelResponse:
    """Send one prompt (plus optional document) and return the raw text."""
    text = prompt.text if isinstance(prompt, RenderedPrompt) else prompt
    if target_words is None and isinstance(prompt, RenderedPrompt):
        target_words = prompt.target_words
    if endpoint.request_style is RequestStyle.MOCK:
        return _mock_generate(endpoint.mock, text)
    return _http_generate(endpoint, text, document, http_client, target_words)


def estimate_tokens(chars: int) -> int:
    return math.ceil(chars / 4)


# -- mock --------------------------------------------------------------------

_VOCAB = (
    "amazon customers growth revenue service cloud delivery value invest "
    "letter builders primitive innovation product team market retail "
    "selection price speed advertising video satellite model data capacity "
    "logistics region store partner company result year future focus "
    "strong steady careful simple broad durable long new core key clear "
    "build grow serve learn invent improve deliver expand reduce measure"
).split()

_MOCK_DEFAULT_TARGET = 50


def _word_target(cfg: MockConfig, t: int) -> int:
    if cfg.mode is MockMode.EXACT:
        n = t
    elif cfg.mode is MockMode.OFFSET:
        n = t + cfg.offset
    elif cfg.mode is MockMode.SCALE:
        n = math.floor(cfg.scale * t + 0.5)
    else:
        n = 3 * t
    return max(n, 1)


def _prose(words: list[str]) -> str:
    out = []
    for i, w in enumerate(words):
        if i % 12 == 0:
            w = w.capitalize()
        if i % 12 == 11 or i == len(words) - 1:
            w += "."
        out.append(w)
    return " ".join(out)


def _mock_text(cfg: MockConfig, prompt: str) -> str:
    if cfg.mode is MockMode.JUDGE:
        for needle, reply in cfg.responses.items():
            if needle in prompt:
                return reply
        return json.dumps({"score": cfg.score, "rationale": "mock judge"})

    t = target_from_prompt(prompt) or _MOCK_DEFAULT_TARGET
    n = _word_target(cfg, t)
    digest = hashlib.sha256(f"{cfg.seed}\x00{prompt}".encode()).digest()
    rng = random.Random(int.from_bytes(digest[:8], "big"))
    words = [rng.choice(_VOCAB) for _ in range(n)]
    body = _prose(words)

    low = prompt.lower()
    if "<final_answer>" in low:
        counted = "\n".join(f"{i} {w}" for i, w in enumerate(words, 1))
        return (
            f"<thinking>\n{counted}\n</thinking>\n\n"
            f"<final_answer>\n{body}\n[EXACTLY {t} WORDS TOTAL]\n</final_answer>"
        )
    marker = FINAL_MARKER.replace("{target_words}", str(t))
    if marker.lower() in low:
        return (
            "<thinking>\n- Outline the core points\n"
            f"- Count words: 1, 2, 3... until reaching {n}\n</thinking>\n\n"
            f"{marker}\n{body}"
        )
    if "<thinking>" in low:
        return f"<thinking>\nplan {n} words\n</thinking>\n{body}"
    return body


def _mock_generate(cfg: MockConfig, prompt: str) -> ModelResponse:
    start = time.perf_counter()
    text = _mock_text(cfg, prompt)
    latency = (time.perf_counter() - start) * 1000.0
    return ModelResponse(text, estimate_tokens(len(prompt)), estimate_tokens(len(text)), latency, True)


# -- HTTP --------------------------------------------------------------------

_RETRY_STATUS = {408, 409, 425, 429, 500, 502, 503, 504, 529}


def _resolve_key(endpoint: ModelEndpoint) -> str:
    name = endpoint.api_key_env
    if not name:
        raise AuthError(f"endpoint {endpoint.id!r} names no api_key_env")
    key = os.environ.get(name, "").strip()
    if not key:
        raise AuthError(f"environment variable {name} is unset or empty (endpoint {endpoint.id!r})")
    return key


def _url(base_url: str) -> str:
    base = base_url.rstrip("/")
    return base if base.endswith("/chat/completions") else base + "/chat/completions"


def _document_part(endpoint: ModelEndpoint, document: Document) -> tuple[str | None, dict | None]:
    """Return (inline text, file part) for the document; at most one is set."""
    if document is None:
        return None, None
    if endpoint.attachment_mode is AttachmentMode.FILE_PART:
        if isinstance(document, Attachment):
            att = document
        else:
            text = document.text if isinstance(document, SourceDocument) else str(document)
            path = document.path if isinstance(document, SourceDocument) else "document.txt"
            att = Attachment(path, text.encode("utf-8"), "text/plain")
        return None, {"type": "file", "file": {"filename": att.filename, "file_data": att.data_url()}}
    if isinstance(document, Attachment):
        try:
            return document.data.decode("utf-8"), None
        except UnicodeDecodeError:
            raise ProviderError(
                f"endpoint {endpoint.id!r} uses inline_text but the document is binary; "
                "use attachment_mode file_part"
            ) from None
    return (document.text if isinstance(document, SourceDocument) else str(document)), None


def build_payload(
    endpoint: ModelEndpoint, prompt_text: str, document: Document = None, target_words: int | None = None
) -> dict[str, Any]:
    inline, file_part = _document_part(endpoint, document)
    if file_part is not None:
        parts = [{"type": "text", "text": prompt_text}]
        parts.insert(0 if endpoint.document_first else 1, file_part)
        content: Any = parts
    elif inline is not None:
        content = f"{inline}\n\n{prompt_text}" if endpoint.document_first else f"{prompt_text}\n\n{inline}"
    else:
        content = prompt_text
    max_tokens = endpoint.max_output_tokens
    if max_tokens is None and target_words:
        max_tokens = 4 * target_words + 512
    payload: dict[str, Any] = {
        "model": endpoint.model or endpoint.id,
        "messages": [{"role": "user", "content": content}],
        "temperature": endpoint.temperature,
    }
    if max_tokens is not None:
        payload["max_tokens"] = max_tokens
    return payload


def _message_text(data: Mapping[str, Any]) -> str:
    try:
        content = data["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError):
        raise ProviderError("response has no choices[0].message.content", body=json.dumps(data)[:500]) from None
    if isinstance(content, list):
        return "".join(p.get("text", "") for p in content if isinstance(p, Mapping))
    return content or ""


def _usage(data: Mapping[str, Any]) -> tuple[int | None, int | None]:
    usage = data.get("usage") or {}
    inp = usage.get("prompt_tokens", usage.get("input_tokens"))
    out = usage.get("completion_tokens", usage.get("output_tokens"))
    return inp, out


def _backoff(endpoint: ModelEndpoint, attempt: int, retry_after: str | None) -> float:
    delay = endpoint.backoff_base_s * 2**attempt
    if retry_after:
        try:
            delay = max(delay, float(retry_after))
        except ValueError:
            pass
    return min(delay, endpoint.backoff_cap_s)


def _redacted(headers: Mapping[str, str]) -> dict[str, str]:
    return {k: ("<redacted>" if k.lower() in {"authorization", "x-api-key", "api-key"} else v)
            for k, v in headers.items()}


def _http_generate(endpoint, prompt_text, document, http_client, target_words) -> ModelResponse:
    key = _resolve_key(endpoint)
    if not endpoint.base_url:
        raise ProviderError(f"endpoint {endpoint.id!r} has no base_url")
    headers = {"Authorization": f"Bearer {key}", "Content-Type": "application/json", **endpoint.headers}
    payload = build_payload(endpoint, prompt_text, document, target_words)
    url = _url(endpoint.base_url)
    if log.isEnabledFor(logging.DEBUG):
        log.debug("POST %s headers=%s body=%s", url, _redacted(headers), json.dumps(payload)[:2000])

    own_client = http_client is None
    client = http_client or httpx.Client(timeout=endpoint.timeout_s)
    try:
        last: Exception | None = None
        for attempt in range(endpoint.max_retries + 1):
            start = time.perf_counter()
            try:
                resp = client.post(url, headers=headers, json=payload, timeout=endpoint.timeout_s)
            except httpx.TimeoutException as exc:
                last = Timeout(f"{endpoint.id}: request timed out after {endpoint.timeout_s}s ({exc})")
                retry_after = None
            except httpx.TransportError as exc:
                last = ProviderError(f"{endpoint.id}: transport error: {exc}")
                retry_after = None
            else:
                latency = (time.perf_counter() - start) * 1000.0
                if log.isEnabledFor(logging.DEBUG):
                    log.debug("response %s %s", resp.status_code, resp.text[:2000])
                if resp.status_code < 300:
                    return _parse_success(resp, latency, prompt_text, document)
                if resp.status_code in (401, 403):
                    raise AuthError(f"{endpoint.id}: HTTP {resp.status_code}: {resp.text[:200]}")
                if resp.status_code not in _RETRY_STATUS:
                    raise ProviderError(
                        f"{endpoint.id}: HTTP {resp.status_code}", status=resp.status_code, body=resp.text[:500]
                    )
                retry_after = resp.headers.get("retry-after")
                if resp.status_code == 429:
                    last = RateLimited(f"{endpoint.id}: rate limited (HTTP 429) after {attempt + 1} attempts")
                else:
                    last = ProviderError(
                        f"{endpoint.id}: HTTP {resp.status_code}", status=resp.status_code, body=resp.text[:500]
                    )
            if attempt < endpoint.max_retries:
                delay = _backoff(endpoint, attempt, retry_after)
                log.info("%s: retrying in %.2fs after %s", endpoint.id, delay, last)
                time.sleep(delay)
        raise last
    finally:
        if own_client:
            client.close()


def _parse_success(resp: httpx.Response, latency: float, prompt_text: str, document: Document) -> ModelResponse:
    try:
        data = resp.json()
    except ValueError:
        raise ProviderError("response body is not JSON", status=resp.status_code, body=resp.text[:500]) from None
    text = _message_text(data)
    inp, out = _usage(data)
    estimated = inp is None or out is None
    if inp is None:
        doc_chars = len(document.text) if isinstance(document, SourceDocument) else (
            len(document) if isinstance(document, str) else 0)
        inp = estimate_tokens(len(prompt_text) + doc_chars)
    if out is None:
        out = estimate_tokens(len(text))
    return ModelResponse(text, int(inp), int(out), latency, estimated)
