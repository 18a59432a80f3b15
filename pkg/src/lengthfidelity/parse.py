"""Final-answer extraction from raw model responses.

Vanilla responses are scored whole. Thinking responses go through a fixed
priority list of rules; the rule that fired is recorded so analysts can
filter on it:

1. ``TagPair``: the first ``<final_answer>...</final_answer>`` pair
   (an opening tag with no close also lands here, flagged ``unclosed_tag``)
2. ``Marker``: text after ``Final N-word document:``
3. ``AfterThinking``: text after the last ``</thinking>``
4. ``WholeText``: the whole response, when it carries no thinking block
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass

from .errors import EmptyResponse, ThinkingOnly
from .prompt import Family


class ParseMethod(str, enum.Enum):
    TAG_PAIR = "TagPair"
    MARKER = "Marker"
    AFTER_THINKING = "AfterThinking"
    WHOLE_TEXT = "WholeText"


@dataclass(frozen=True)
class ParsedResponse:
    final_text: str
    thinking_text: str | None
    parse_method: ParseMethod
    unclosed_tag: bool = False


_FLAGS = re.IGNORECASE | re.DOTALL
_FINAL_PAIR = re.compile(r"<\s*final_answer\s*>(.*?)<\s*/\s*final_answer\s*>", _FLAGS)
_FINAL_OPEN = re.compile(r"<\s*final_answer\s*>", re.IGNORECASE)
_THINK_PAIR = re.compile(r"<\s*thinking\s*>(.*?)<\s*/\s*thinking\s*>", _FLAGS)
_THINK_OPEN = re.compile(r"<\s*thinking\s*>", re.IGNORECASE)
_THINK_CLOSE = re.compile(r"<\s*/\s*thinking\s*>", re.IGNORECASE)
_MARKER = re.compile(r"Final\s+\d+\s*-\s*word\s+document\s*:", re.IGNORECASE)
_ANY_TAG = re.compile(r"<\s*/?\s*(?:thinking|final_answer)\s*>", re.IGNORECASE)
_SCAFFOLD_LINE = re.compile(r"^[ \t]*\[\s*EXACTLY\s+\d+\s+WORDS\s+TOTAL\s*\][ \t]*(?:\r?\n|$)", re.MULTILINE)


def _clean(text: str) -> str:
    return _ANY_TAG.sub("", text).strip()


def _without_thinking(raw: str) -> str:
    """Drop closed thinking blocks, and an unclosed one through end of text."""
    text = _THINK_PAIR.sub("", raw)
    m = _THINK_OPEN.search(text)
    return text[: m.start()] if m else text


def extract_final(raw: str, family: Family | str, variant_id: str | None = None) -> ParsedResponse:
    if raw is None or not raw.strip():
        raise EmptyResponse(f"empty response{f' for {variant_id}' if variant_id else ''}")
    family = Family(family)

    if family is Family.VANILLA:
        text = _clean(raw)
        if not text:
            raise EmptyResponse("response holds nothing but tags")
        return ParsedResponse(text, None, ParseMethod.WHOLE_TEXT)

    think = _THINK_PAIR.search(raw)
    thinking_text = think.group(1).strip() if think else None
    if thinking_text is None and _THINK_OPEN.search(raw):
        # unclosed thinking block: everything after it is draft
        opening = _THINK_OPEN.search(raw)
        closing_final = _FINAL_OPEN.search(raw, opening.end())
        end = closing_final.start() if closing_final else len(raw)
        thinking_text = _clean(raw[opening.end():end]) or None

    def done(text: str, method: ParseMethod, unclosed: bool = False) -> ParsedResponse:
        text = _clean(text)
        if not text:
            raise ThinkingOnly(f"no final text extracted{f' for {variant_id}' if variant_id else ''}")
        return ParsedResponse(text, thinking_text, method, unclosed)

    pair = _FINAL_PAIR.search(raw)
    if pair:
        return done(pair.group(1), ParseMethod.TAG_PAIR)
    opening = _FINAL_OPEN.search(raw)
    if opening:
        return done(raw[opening.end():], ParseMethod.MARKER, unclosed=True)

    outside = _without_thinking(raw)
    marker = _MARKER.search(outside)
    if marker:
        return done(outside[marker.end():], ParseMethod.MARKER)
    if _THINK_OPEN.search(raw) and not _THINK_CLOSE.search(raw):
        # thinking never closed: salvage the last marker inside it
        markers = list(_MARKER.finditer(raw))
        if markers:
            return done(raw[markers[-1].end():], ParseMethod.MARKER)

    closes = list(_THINK_CLOSE.finditer(raw))
    if closes:
        return done(raw[closes[-1].end():], ParseMethod.AFTER_THINKING)
    if _THINK_OPEN.search(raw):
        raise ThinkingOnly(f"thinking block never closed{f' for {variant_id}' if variant_id else ''}")
    return done(raw, ParseMethod.WHOLE_TEXT)


def strip_scaffold(final_text: str) -> str:
    """Remove echoed ``[EXACTLY N WORDS TOTAL]`` lines and surrounding whitespace."""
    return _SCAFFOLD_LINE.sub("", final_text).strip()


def parse_response(raw: str, family: Family | str, variant_id: str | None = None) -> ParsedResponse:
    """:func:`extract_final` followed by :func:`strip_scaffold`."""
    parsed = extract_final(raw, family, variant_id)
    final = strip_scaffold(parsed.final_text)
    if not final:
        raise ThinkingOnly(f"only template scaffold left after extraction{f' for {variant_id}' if variant_id else ''}")
    return ParsedResponse(final, parsed.thinking_text, parsed.parse_method, parsed.unclosed_tag)
