"""Prompt variants and rendering.

Built-in templates live as plain-text resources under ``templates/`` and are
reproduced byte-for-byte. The source document is never interpolated into the
instruction; the client attaches it separately.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

from .errors import InvalidTarget, KindMismatch, MissingPlaceholder, PromptError, UnknownVariant

PLACEHOLDER = "{target_words}"
FINAL_MARKER = "Final {target_words}-word document:"


class TaskKind(str, enum.Enum):
    SUMMARIZE = "summarize"
    STORY = "story"


class Family(str, enum.Enum):
    VANILLA = "vanilla"
    THINKING = "thinking"


class VariantId(str, enum.Enum):
    VANILLA_V1 = "vanilla-v1"
    VANILLA_V2 = "vanilla-v2"
    THINKING_V1 = "thinking-v1"
    THINKING_V2 = "thinking-v2"
    STORY_VANILLA = "story-vanilla"
    STORY_THINKING = "story-thinking"
    CUSTOM = "custom"


@dataclass(frozen=True)
class TaskSpec:
    kind: TaskKind
    target_words: int
    document: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", TaskKind(self.kind))
        if not isinstance(self.target_words, int) or self.target_words < 1:
            raise InvalidTarget(f"target_words must be a positive integer, got {self.target_words!r}")
        if self.kind is TaskKind.SUMMARIZE and not self.document:
            raise PromptError("summarize tasks need a non-empty document")
        if self.kind is TaskKind.STORY and self.document is not None:
            raise PromptError("story tasks take no document")


@dataclass(frozen=True)
class PromptVariant:
    id: VariantId
    family: Family
    template: str
    task_kind: TaskKind = TaskKind.SUMMARIZE
    name: str | None = None  # display name; custom variants need one to stay distinct

    def __post_init__(self):
        object.__setattr__(self, "id", VariantId(self.id))
        object.__setattr__(self, "family", Family(self.family))
        object.__setattr__(self, "task_kind", TaskKind(self.task_kind))
        if PLACEHOLDER not in self.template:
            raise MissingPlaceholder(f"template for {self.key!r} has no {PLACEHOLDER} placeholder")
        if (
            self.family is Family.THINKING
            and self.id is not VariantId.STORY_THINKING
            and not has_final_scaffold(self.template)
        ):
            raise PromptError(
                f"thinking template for {self.key!r} needs a <thinking> block, "
                "<final_answer> tags or a 'Final N-word document:' marker"
            )

    @property
    def key(self) -> str:
        return self.name or self.id.value


def has_final_scaffold(template: str) -> bool:
    low = template.lower()
    return "<thinking>" in low or "<final_answer>" in low or FINAL_MARKER.lower() in low


@dataclass(frozen=True)
class RenderedPrompt:
    variant_id: str
    target_words: int
    text: str


_BUILTIN_SPECS = [
    (VariantId.VANILLA_V1, Family.VANILLA, TaskKind.SUMMARIZE, "vanilla_v1.txt"),
    (VariantId.VANILLA_V2, Family.VANILLA, TaskKind.SUMMARIZE, "vanilla_v2.txt"),
    (VariantId.THINKING_V1, Family.THINKING, TaskKind.SUMMARIZE, "thinking_v1.txt"),
    (VariantId.THINKING_V2, Family.THINKING, TaskKind.SUMMARIZE, "thinking_v2.txt"),
    (VariantId.STORY_VANILLA, Family.VANILLA, TaskKind.STORY, "story_vanilla.txt"),
    (VariantId.STORY_THINKING, Family.THINKING, TaskKind.STORY, "story_thinking.txt"),
]


def _read_template(filename: str) -> str:
    text = resources.files(__package__).joinpath("templates").joinpath(filename).read_text(encoding="utf-8")
    return text.removesuffix("\n")


@lru_cache(maxsize=None)
def _builtins() -> dict[str, PromptVariant]:
    out = {}
    for vid, family, kind, filename in _BUILTIN_SPECS:
        out[vid.value] = PromptVariant(vid, family, _read_template(filename), kind)
    return out


_custom: dict[str, PromptVariant] = {}


def list_variants() -> list[PromptVariant]:
    """The six built-in variants, in a fixed order."""
    return list(_builtins().values())


def custom_variant(
    name: str,
    template: str,
    family: Family | str,
    task_kind: TaskKind | str = TaskKind.SUMMARIZE,
) -> PromptVariant:
    return PromptVariant(VariantId.CUSTOM, Family(family), template, TaskKind(task_kind), name=name)


def load_template_file(
    path: str | Path, family: Family | str, name: str | None = None,
    task_kind: TaskKind | str = TaskKind.SUMMARIZE,
) -> PromptVariant:
    path = Path(path)
    template = path.read_text(encoding="utf-8").removesuffix("\n")
    return custom_variant(name or path.stem, template, family, task_kind)


def register_variant(variant: PromptVariant) -> PromptVariant:
    """Make a custom variant resolvable by name through :func:`get_variant`."""
    if variant.id is not VariantId.CUSTOM:
        raise PromptError("only custom variants can be registered")
    if variant.key in _builtins():
        raise PromptError(f"{variant.key!r} shadows a built-in variant")
    _custom[variant.key] = variant
    return variant


def get_variant(name: str | VariantId) -> PromptVariant:
    key = name.value if isinstance(name, VariantId) else str(name)
    key = key.lower().replace("_", "-")
    builtins = _builtins()
    if key in builtins:
        return builtins[key]
    if str(name) in _custom:
        return _custom[str(name)]
    known = sorted(builtins) + sorted(_custom)
    raise UnknownVariant(f"unknown variant {name!r}; known: {', '.join(known)}")


def render_text(template: str, target_words: int) -> str:
    if PLACEHOLDER not in template:
        raise MissingPlaceholder(f"template has no {PLACEHOLDER} placeholder")
    if isinstance(target_words, bool) or not isinstance(target_words, int) or target_words < 1:
        raise InvalidTarget(f"target_words must be a positive integer, got {target_words!r}")
    # plain replace: other braces in the template stay untouched
    return template.replace(PLACEHOLDER, str(target_words))


def render(variant: PromptVariant, task: TaskSpec) -> RenderedPrompt:
    if variant.task_kind is not task.kind:
        raise KindMismatch(
            f"variant {variant.key!r} is for {variant.task_kind.value} tasks, "
            f"task is {task.kind.value}"
        )
    return RenderedPrompt(variant.key, task.target_words, render_text(variant.template, task.target_words))


_TARGET_IN_PROMPT = re.compile(r"exactly\s+(\d+)", re.IGNORECASE)


def target_from_prompt(text: str) -> int | None:
    """First integer following ``exactly`` (any case), or None."""
    m = _TARGET_IN_PROMPT.search(text)
    return int(m.group(1)) if m else None
