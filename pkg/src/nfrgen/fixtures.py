"""Bundled evaluation fixtures whose aggregate metrics land exactly on the
reference study results, for offline verification of the analysis stack.

The validity counts are the unique integer split of 174 records consistent
with the reference mean, median, and score-share percentages; the
applicability and confusion tables are likewise reverse-derived from the
reference aggregates and verified by hand arithmetic.
"""
from __future__ import annotations

from dataclasses import dataclass

from .evalsvc.records import NfrRef, ScoreRecord, SelectionRecord
from .evalsvc.store import EvalStore

MODEL_IDS = (
    "gpt-4o-mini",
    "claude-3-5-haiku-20241022",
    "claude-3-7-sonnet-20250219",
    "gemini-1.5-pro",
    "Llama-3.3-70B-Instruct-Turbo-Free",
    "deepSeek-V3",
    "Qwen2.5-72B-Instruct-Turbo",
    "grok-2-1212",
)

# 174 scored NFRs. Validity: mean 806/174 = 4.632..., median 5.0, shares
# 76.4 / 14.4 / 6.3 / 2.9 (the 1-2 band splits {2:3, 1:2}).
VALIDITY_COUNTS = {5: 133, 4: 25, 3: 11, 2: 3, 1: 2}
# Applicability: mean 799/174 = 4.592..., median 5.0, >=4 share 157/174 =
# 90.2%, score-3 share 1.7%, 1-2 band 8.0%.
APPLICABILITY_COUNTS = {5: 138, 4: 19, 3: 3, 2: 10, 1: 4}

SCORED_TOTAL = 174
SELECTED_TOTAL = 168

# 168 blind selections as (model-assigned attribute, expert-selected
# attribute) -> count. Diagonal sums to 135 exact matches; the off-diagonal
# cells split 14 near misses / 19 mismatches under the default relatedness
# map, and reproduce the reference row shares (20% of the Functional
# Suitability row lands on Reliability, a third of the Flexibility row on
# Compatibility, Performance Efficiency and Compatibility fully diagonal).
CONFUSION_CELLS: dict[tuple[str, str], int] = {
    ("Functional Suitability", "Functional Suitability"): 18,
    ("Functional Suitability", "Reliability"): 7,
    ("Functional Suitability", "Usability"): 4,
    ("Functional Suitability", "Security"): 6,
    ("Performance Efficiency", "Performance Efficiency"): 20,
    ("Compatibility", "Compatibility"): 15,
    ("Usability", "Usability"): 17,
    ("Usability", "Functional Suitability"): 2,
    ("Usability", "Security"): 1,
    ("Reliability", "Reliability"): 20,
    ("Reliability", "Performance Efficiency"): 2,
    ("Reliability", "Functional Suitability"): 2,
    ("Security", "Security"): 18,
    ("Security", "Reliability"): 1,
    ("Security", "Functional Suitability"): 1,
    ("Maintainability", "Maintainability"): 10,
    ("Maintainability", "Usability"): 2,
    ("Flexibility", "Flexibility"): 8,
    ("Flexibility", "Compatibility"): 4,
    ("Safety", "Safety"): 9,
    ("Safety", "Reliability"): 1,
}

_FIXED_STAMP = "2025-01-01T00:00:00+00:00"


def _expand(counts: dict[int, int]) -> list[int]:
    values: list[int] = []
    for score in sorted(counts, reverse=True):
        values.extend([score] * counts[score])
    return values


@dataclass
class FixtureData:
    frs: list[dict]
    nfrs: list[dict]
    scores: list[ScoreRecord]
    selections: list[SelectionRecord]

    def refs(self) -> dict[str, NfrRef]:
        return {r["nfr_id"]: NfrRef(r["nfr_id"], r["fr_id"], r["model_id"],
                                    r["attribute"]) for r in self.nfrs}


def fixture_dataset() -> FixtureData:
    """Deterministic records: 174 score pairs and 168 blind selections, tied
    to synthetic NFR rows spread round-robin over the eight models."""
    frs = [{"fr_id": f"FX-FR-{i + 1:02d}",
            "text": f"The system shall carry out operation {i + 1:02d} as specified."}
           for i in range(34)]
    nfrs: list[dict] = []
    scores: list[ScoreRecord] = []
    selections: list[SelectionRecord] = []

    validity = _expand(VALIDITY_COUNTS)
    applicability = _expand(APPLICABILITY_COUNTS)
    from . import quality
    catalog = quality.CANONICAL_NAMES
    for i, (v, a) in enumerate(zip(validity, applicability)):
        nfr_id = f"fx-score-{i + 1:03d}"
        nfrs.append({
            "nfr_id": nfr_id,
            "fr_id": frs[i % len(frs)]["fr_id"],
            "model_id": MODEL_IDS[i % len(MODEL_IDS)],
            "text": f"Scored item {i + 1:03d} shall meet its target within 2 seconds.",
            "attribute": catalog[i % len(catalog)],
            "subcharacteristic": None,
            "justification": f"Derived from {frs[i % len(frs)]['fr_id']}.",
        })
        scores.append(ScoreRecord(
            evaluator_id=f"E{(i % 10) + 1:02d}", nfr_id=nfr_id,
            validity=v, applicability=a, submitted_at=_FIXED_STAMP))

    j = 0
    for (llm_attr, expert_attr), count in CONFUSION_CELLS.items():
        for _ in range(count):
            nfr_id = f"fx-sel-{j + 1:03d}"
            nfrs.append({
                "nfr_id": nfr_id,
                "fr_id": frs[j % len(frs)]["fr_id"],
                "model_id": MODEL_IDS[j % len(MODEL_IDS)],
                "text": f"Reviewed item {j + 1:03d} shall meet its target in 95% of cases.",
                "attribute": llm_attr,
                "subcharacteristic": None,
                "justification": f"Derived from {frs[j % len(frs)]['fr_id']}.",
            })
            selections.append(SelectionRecord(
                evaluator_id=f"E{(j % 10) + 1:02d}", nfr_id=nfr_id,
                chosen_attribute=expert_attr, submitted_at=_FIXED_STAMP))
            j += 1

    assert len(scores) == SCORED_TOTAL and len(selections) == SELECTED_TOTAL
    return FixtureData(frs=frs, nfrs=nfrs, scores=scores, selections=selections)


def populate_store(store: EvalStore) -> FixtureData:
    """Load the fixture records into an evaluation store (for export tests
    and offline report runs)."""
    data = fixture_dataset()
    store.add_frs((f["fr_id"], f["text"]) for f in data.frs)
    store.add_nfrs(data.nfrs)
    for record in data.scores:
        store.upsert_score(record)
    for record in data.selections:
        store.upsert_selection(record)
    return data
