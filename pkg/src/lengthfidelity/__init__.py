"""Length-fidelity harness for word-count-controlled LLM prompting."""

from .client import ModelEndpoint, ModelResponse, generate, mock_model
from .metrics import (
    AggregateStats,
    LengthMetrics,
    SignificanceResult,
    aggregate,
    describe,
    length_metrics,
    paired_significance,
    relative_improvement,
)
from .parse import ParsedResponse, ParseMethod, extract_final, parse_response, strip_scaffold
from .prompt import (
    Family,
    PromptVariant,
    RenderedPrompt,
    TaskKind,
    TaskSpec,
    VariantId,
    get_variant,
    list_variants,
    render,
)
from .runner import ExperimentPlan, expand, load_plan, resume, run
from .wordcount import RULES_VERSION, count_words, tokenize

__version__ = "0.1.0"

__all__ = [
    "AggregateStats", "ExperimentPlan", "Family", "LengthMetrics", "ModelEndpoint", "ModelResponse",
    "ParseMethod", "ParsedResponse", "PromptVariant", "RULES_VERSION", "RenderedPrompt", "SignificanceResult",
    "TaskKind", "TaskSpec", "VariantId", "aggregate", "count_words", "describe", "expand", "extract_final",
    "generate", "get_variant", "length_metrics", "list_variants", "load_plan", "mock_model",
    "paired_significance", "parse_response", "relative_improvement", "render", "resume", "run",
    "strip_scaffold", "tokenize",
]
