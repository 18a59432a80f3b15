"""How words are counted.

Every length in this harness is a count of Treebank-style tokens that contain
a letter or a digit. Clitics split off ("Amazon's" is two words), hyphenated
compounds stay whole, and currency or percent signs are not words.
"""

from __future__ import annotations

from lengthfidelity.wordcount import RULES_V1, count_words, is_countable, tokenize

samples = [
    "Amazon's strong results.",
    "Revenue rose 12% to $575 billion.",
    "A long-term, customer-first plan... and it isn't done.",
    'The ``primitives\'\' approach, or "primitives" for short.',
]

for text in samples:
    toks = tokenize(text)
    marked = " ".join(t if is_countable(t) else f"[{t}]" for t in toks)
    print(f"{count_words(text):>3}  {marked}")

# Quote marks are the one thing the two rule versions disagree on.
quoted = samples[-1]
print(f"\ncurrent rules: {count_words(quoted)} words; {RULES_V1.version}: {count_words(quoted, RULES_V1)} words")
