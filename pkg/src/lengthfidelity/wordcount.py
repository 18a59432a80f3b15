"""Deterministic Treebank-style word counting.

Text is split on whitespace, then each chunk is peeled: leading and trailing
punctuation become their own tokens, clitics are split off
(``Amazon's`` -> ``Amazon`` + ``'s``), internal dashes and ellipses are
separated, and hyphenated compounds stay whole. Straight double quotes are
rewritten to the Treebank forms ````` and ``''``.

A token is counted when it contains at least one letter (Unicode ``L*``) or
decimal digit (``Nd``). Rules version ``ptb-2`` additionally counts
double-quote tokens, which is what reproduces the published reference counts
for texts containing quoted words; ``ptb-1`` is the plain letter/digit rule.

    >>> tokenize("12% to $575 billion")
    ['12', '%', 'to', '$', '575', 'billion']
    >>> count_words("Amazon's growth")
    3
"""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass

__all__ = [
    "TokenizationRules",
    "RULES_V1",
    "RULES_V2",
    "CURRENT_RULES",
    "RULES_VERSION",
    "get_rules",
    "tokenize",
    "is_countable",
    "count_words",
]

CLITICS = ("n't", "'s", "'re", "'ve", "'ll", "'d", "'m")
QUOTE_TOKENS = frozenset({"``", "''", '"', "“", "”", "„"})


@dataclass(frozen=True)
class TokenizationRules:
    version: str
    clitics: tuple[str, ...] = CLITICS
    count_quote_marks: bool = False


RULES_V1 = TokenizationRules("ptb-1")
RULES_V2 = TokenizationRules("ptb-2", count_quote_marks=True)
CURRENT_RULES = RULES_V2
RULES_VERSION = CURRENT_RULES.version

_RULES = {r.version: r for r in (RULES_V1, RULES_V2)}


def get_rules(version: str) -> TokenizationRules:
    try:
        return _RULES[version]
    except KeyError:
        raise ValueError(
            f"unknown rules version {version!r}; known: {sorted(_RULES)}"
        ) from None


def _is_word_char(ch: str) -> bool:
    cat = unicodedata.category(ch)
    return cat[0] in "LM" or cat[0] == "N"


_APOSTROPHES = "'’"
_ABBREV = re.compile(r"^(?:[^\W\d_]\.){2,}$")
# runs of dashes and dots that always stand alone
_MULTI_PUNCT = re.compile(r"^(\.{3,}|-{2,}|``|'')")
_MULTI_PUNCT_END = re.compile(r"(\.{3,}|-{2,}|``|'')$")
_INTERNAL_SEP = re.compile(
    r"(\.{3,}|-{2,}|[—–―…]"
    r"|(?<!\d)[,;:](?!//)|[,;:](?!\d)(?!//)|[!?])"
)


def _norm_apos(s: str) -> str:
    return s.replace("’", "'")


def _split_clitic(core: str, clitics: tuple[str, ...]) -> list[str]:
    low = _norm_apos(core.lower())
    for clitic in clitics:
        if low.endswith(clitic) and len(core) > len(clitic):
            head = core[: -len(clitic)]
            if _is_word_char(head[-1]):
                return [head, core[-len(clitic):]]
    return [core]


def _is_bare_clitic(chunk: str, clitics: tuple[str, ...]) -> bool:
    return _norm_apos(chunk.lower()) in clitics


def _peel(chunk: str, clitics: tuple[str, ...]) -> list[str]:
    lead: list[str] = []
    trail: list[str] = []

    while chunk and not _is_word_char(chunk[0]) and not _is_bare_clitic(chunk, clitics):
        m = _MULTI_PUNCT.match(chunk)
        tok = m.group(1) if m else chunk[0]
        lead.append("``" if tok == '"' else tok)
        chunk = chunk[len(tok):]

    while chunk and not _is_word_char(chunk[-1]) and not _is_bare_clitic(chunk, clitics):
        if chunk[-1] == "." and _ABBREV.match(chunk):
            break
        m = _MULTI_PUNCT_END.search(chunk)
        tok = m.group(1) if m else chunk[-1]
        trail.append("''" if tok == '"' else tok)
        chunk = chunk[: -len(tok)]

    middle: list[str] = []
    if chunk:
        pieces = [p for p in _INTERNAL_SEP.split(chunk) if p]
        if len(pieces) > 1:
            for piece in pieces:
                if _INTERNAL_SEP.fullmatch(piece):
                    middle.append(piece)
                else:
                    middle.extend(_peel(piece, clitics))
        elif _is_bare_clitic(chunk, clitics) or _ABBREV.match(chunk):
            middle.append(chunk)
        else:
            middle.extend(_split_clitic(chunk, clitics))

    return lead + middle + trail[::-1]


def tokenize(text: str, rules: TokenizationRules = CURRENT_RULES) -> list[str]:
    """Split ``text`` into Treebank-style tokens. Empty text gives ``[]``."""
    tokens: list[str] = []
    for chunk in text.split():
        tokens.extend(_peel(chunk, rules.clitics))
    return tokens


def is_countable(token: str, rules: TokenizationRules = CURRENT_RULES) -> bool:
    if rules.count_quote_marks and token in QUOTE_TOKENS:
        return True
    for ch in token:
        cat = unicodedata.category(ch)
        if cat[0] == "L" or cat == "Nd":
            return True
    return False


def count_words(text: str, rules: TokenizationRules | str = CURRENT_RULES) -> int:
    """Number of countable tokens in ``text``; punctuation-only tokens are skipped."""
    if isinstance(rules, str):
        rules = get_rules(rules)
    return sum(1 for tok in tokenize(text, rules) if is_countable(tok, rules))
