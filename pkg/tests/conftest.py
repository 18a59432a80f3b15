from __future__ import annotations

import pytest

from lengthfidelity.client import mock_model
from lengthfidelity.metrics import length_metrics
from lengthfidelity.prompt import get_variant
from lengthfidelity.runner import ExperimentPlan
from lengthfidelity.store import GenerationRecord, record_id

# The six generations of the worked-example table: (target, text, reported length).
# LaTeX escapes are undone; the doubled-backtick quotes are kept as typed.
GOLDEN = [
    (20, "Amazon had a strong year in 2023, with revenue, operating income, and free cash flow growth. "
         "The company is investing in primitives and generative AI capabilities.", 26),
    (50, "Amazon had a strong year in 2023, with revenue growth, improved profitability, and continued "
         "customer experience enhancements. The company is focused on building foundational ``primitive'' "
         "services to rapidly innovate and empower both internal and external builders, with a particular "
         "emphasis on generative AI capabilities.", 46),
    (100, "Amazon's 2023 annual letter to shareholders highlights the company's strong financial performance, "
          "with 12% revenue growth and a dramatic improvement in operating income and free cash flow. The letter "
          "emphasizes Amazon's focus on customer experience, with enhancements in selection, pricing, and delivery "
          "speed. It also discusses the company's progress in Advertising, AWS, and newer business investments "
          "like Prime Video and Project Kuiper. The letter emphasizes Amazon's ``primitives'' approach, which "
          "involves building foundational services to enable rapid innovation. It also outlines the company's "
          "vision for Generative AI and its potential to transform various Amazon businesses. Overall, the letter "
          "conveys Amazon's optimism and conviction in its long-term growth and innovation potential.", 118),
    (20, "Amazon's strong financial results, customer experience, and focus on building primitive services to "
         "empower builders and innovation across businesses.", 20),
    (50, "Amazon saw strong growth in 2023, with revenue, operating income, and free cash flow improving "
         "significantly. The company is investing in customer experience, logistics, and advertising, while "
         "also making progress in AWS, Prime Video, and new initiatives like Generative AI and Project Kuiper. "
         "Amazon remains focused on long-term value creation.", 50),
    (100, "Amazon saw strong growth in 2023, with revenue increasing 12% to $575 billion. Operating income and "
          "free cash flow also improved significantly. The company attributed these results to its focus on "
          "customer experience, including expanded selection, competitive pricing, and faster delivery. Amazon "
          "continued investing in key initiatives like AWS, Prime Video, and Project Kuiper. The letter discusses "
          "the company's ``primitives'' approach to building flexible, reusable services that enable rapid "
          "innovation. It also highlights Amazon's focus on generative AI as a transformative technology. "
          "Overall, the letter conveys the company's enthusiasm and optimism for the future.", 99),
]

MAIN_VARIANTS = ("vanilla-v1", "vanilla-v2", "thinking-v1", "thinking-v2")


def make_plan(endpoints, variants=MAIN_VARIANTS, targets=(20, 50), attempts=2, document="A short source text.",
              **kw) -> ExperimentPlan:
    kw.setdefault("inter_attempt_delay_ms", 0)
    return ExperimentPlan(
        endpoints=list(endpoints),
        variants=[get_variant(v) for v in variants],
        targets=list(targets),
        attempts=attempts,
        document=document,
        **kw,
    )


def make_record(endpoint, variant, target, attempt, generated, *, family=None, tokens=(0, 0), latency=0.0,
                final_text=None):
    if family is None:
        family = "thinking" if "thinking" in variant else "vanilla"
    return GenerationRecord(
        record_id=record_id(endpoint, variant, target, attempt),
        endpoint_id=endpoint, variant_id=variant, family=family,
        target_words=target, attempt_index=attempt,
        final_text=final_text, word_count=generated,
        metrics=length_metrics(generated, target),
        input_tokens=tokens[0], output_tokens=tokens[1], latency_ms=latency,
    )


@pytest.fixture
def exact_mock():
    return mock_model("exact", seed=7, id="mock-exact")


@pytest.fixture
def doc_file(tmp_path):
    p = tmp_path / "doc.txt"
    p.write_text("The council approved the budget on Tuesday.\nIt funds three bridges and a school.\n",
                 encoding="utf-8")
    return p
