"""Study metrics: score distributions, exact/near/mismatch breakdown,
the 9x9 confusion matrix, per-model comparison, and dataset export.

Computations keep full precision internally; rounding happens only when a
report is rendered.
"""
from __future__ import annotations

import csv
import json
import statistics
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Mapping, Sequence

from . import quality
from .errors import EmptyInputError, IntegrityError, ArgumentError
from .evalsvc.records import NfrRef, ScoreRecord, SelectionRecord
from .evalsvc.store import EvalStore

SCORES = (1, 2, 3, 4, 5)
EXPORT_FORMAT_VERSION = 1


@dataclass(frozen=True)
class ScoreDistribution:
    dimension: str
    counts: dict[int, int]
    total: int
    mean: float
    median: float
    proportions: dict[int, float]


def score_distribution(records: Sequence[ScoreRecord], dimension: str) -> ScoreDistribution:
    """Counts, proportions, mean, and the standard order-statistic median for
    one scoring dimension."""
    if dimension not in quality.DIMENSIONS:
        raise ArgumentError(f"unknown dimension {dimension!r}")
    if not records:
        raise EmptyInputError(f"no score records to distribute over ({dimension})")
    values = [getattr(r, dimension) for r in records]
    counts = {s: 0 for s in SCORES}
    for v in values:
        counts[v] += 1
    total = len(values)
    mean = sum(s * c for s, c in counts.items()) / total
    median = float(statistics.median(sorted(values)))
    proportions = {s: c / total for s, c in counts.items()}
    return ScoreDistribution(dimension=dimension, counts=counts, total=total,
                             mean=mean, median=median, proportions=proportions)


class MatchCategory(Enum):
    EXACT = "exact"
    NEAR_MISS = "near_miss"
    MISMATCH = "mismatch"


def classify_match(llm_attr: str, expert_attr: str,
                   relatedness: quality.RelatednessMap = quality.DEFAULT_RELATEDNESS
                   ) -> MatchCategory:
    """Exact when equal, near miss when the pair is related, else mismatch."""
    a = quality.resolve_attribute(llm_attr).canonical_name
    b = quality.resolve_attribute(expert_attr).canonical_name
    if a == b:
        return MatchCategory.EXACT
    if (a, b) in relatedness:
        return MatchCategory.NEAR_MISS
    return MatchCategory.MISMATCH


@dataclass(frozen=True)
class MatchBreakdown:
    exact: int
    near: int
    mismatch: int
    total: int

    @property
    def rates(self) -> dict[str, float]:
        return {"exact": self.exact / self.total,
                "near": self.near / self.total,
                "mismatch": self.mismatch / self.total}


def _llm_attribute(nfr_id: str, refs: Mapping[str, NfrRef]) -> str:
    ref = refs.get(nfr_id)
    if ref is None:
        raise IntegrityError(
            f"selection references NFR {nfr_id!r} absent from the run artifacts")
    return ref.attribute


def match_breakdown(selections: Sequence[SelectionRecord],
                    refs: Mapping[str, NfrRef],
                    relatedness: quality.RelatednessMap = quality.DEFAULT_RELATEDNESS
                    ) -> MatchBreakdown:
    if not selections:
        raise EmptyInputError("no selection records to break down")
    tallies = {c: 0 for c in MatchCategory}
    for record in selections:
        category = classify_match(_llm_attribute(record.nfr_id, refs),
                                  record.chosen_attribute, relatedness)
        tallies[category] += 1
    return MatchBreakdown(exact=tallies[MatchCategory.EXACT],
                          near=tallies[MatchCategory.NEAR_MISS],
                          mismatch=tallies[MatchCategory.MISMATCH],
                          total=len(selections))


@dataclass(frozen=True)
class ConfusionMatrix:
    """Rows: the attribute the model assigned; columns: the expert's choice."""

    attributes: tuple[str, ...]
    counts: tuple[tuple[int, ...], ...]
    row_normalized: tuple[tuple[float, ...], ...]
    zero_rows: tuple[str, ...]
    total: int

    @property
    def diagonal_sum(self) -> int:
        return sum(self.counts[i][i] for i in range(len(self.attributes)))

    def cell(self, llm_attr: str, expert_attr: str) -> int:
        i = self.attributes.index(llm_attr)
        j = self.attributes.index(expert_attr)
        return self.counts[i][j]

    def normalized_cell(self, llm_attr: str, expert_attr: str) -> float:
        i = self.attributes.index(llm_attr)
        j = self.attributes.index(expert_attr)
        return self.row_normalized[i][j]


def confusion_matrix(selections: Sequence[SelectionRecord],
                     refs: Mapping[str, NfrRef]) -> ConfusionMatrix:
    """Cross-tabulate model-assigned versus expert-selected attributes.

    Rows without any record stay all-zero and are flagged rather than being
    rendered as a fabricated 0% share.
    """
    if not selections:
        raise EmptyInputError("no selection records to tabulate")
    names = quality.CANONICAL_NAMES
    index = {name: i for i, name in enumerate(names)}
    counts = [[0] * len(names) for _ in names]
    for record in selections:
        i = index[_llm_attribute(record.nfr_id, refs)]
        j = index[record.chosen_attribute]
        counts[i][j] += 1
    normalized: list[tuple[float, ...]] = []
    zero_rows: list[str] = []
    for i, name in enumerate(names):
        row_total = sum(counts[i])
        if row_total == 0:
            zero_rows.append(name)
            normalized.append(tuple(0.0 for _ in names))
        else:
            normalized.append(tuple(c / row_total for c in counts[i]))
    return ConfusionMatrix(attributes=names,
                           counts=tuple(tuple(row) for row in counts),
                           row_normalized=tuple(normalized),
                           zero_rows=tuple(zero_rows),
                           total=len(selections))


@dataclass(frozen=True)
class ModelMetrics:
    model_id: str
    n_scores: int
    avg_validity: float | None
    avg_applicability: float | None
    n_selections: int
    exact_selections: int
    attr_accuracy_pct: float | None


@dataclass(frozen=True)
class PerLlmReport:
    models: tuple[ModelMetrics, ...]

    def for_model(self, model_id: str) -> ModelMetrics:
        for m in self.models:
            if m.model_id == model_id:
                return m
        raise KeyError(model_id)


def per_llm_report(scores: Sequence[ScoreRecord],
                   selections: Sequence[SelectionRecord],
                   refs: Mapping[str, NfrRef],
                   relatedness: quality.RelatednessMap = quality.DEFAULT_RELATEDNESS,
                   model_ids: Sequence[str] | None = None) -> PerLlmReport:
    """Per-model score averages and exact-match accuracy.

    Models with no records are reported with n=0 instead of being omitted;
    pass model_ids to pin the roster (e.g. every model configured in a run).
    """
    def model_of(nfr_id: str) -> str:
        ref = refs.get(nfr_id)
        if ref is None:
            raise IntegrityError(
                f"record references NFR {nfr_id!r} absent from the run artifacts")
        return ref.model_id

    roster = set(model_ids) if model_ids is not None else set()
    score_map: dict[str, list[ScoreRecord]] = {}
    for record in scores:
        score_map.setdefault(model_of(record.nfr_id), []).append(record)
    selection_map: dict[str, list[SelectionRecord]] = {}
    for record in selections:
        selection_map.setdefault(model_of(record.nfr_id), []).append(record)
    roster |= set(score_map) | set(selection_map)

    metrics = []
    for model_id in sorted(roster):
        model_scores = score_map.get(model_id, [])
        model_selections = selection_map.get(model_id, [])
        exact = sum(
            1 for r in model_selections
            if classify_match(_llm_attribute(r.nfr_id, refs), r.chosen_attribute,
                              relatedness) is MatchCategory.EXACT)
        metrics.append(ModelMetrics(
            model_id=model_id,
            n_scores=len(model_scores),
            avg_validity=(sum(r.validity for r in model_scores) / len(model_scores)
                          if model_scores else None),
            avg_applicability=(sum(r.applicability for r in model_scores) / len(model_scores)
                               if model_scores else None),
            n_selections=len(model_selections),
            exact_selections=exact,
            attr_accuracy_pct=(exact / len(model_selections) * 100
                               if model_selections else None),
        ))
    return PerLlmReport(models=tuple(metrics))


# -- report rendering ---------------------------------------------------------

def _round(value: float | None, digits: int) -> float | None:
    return None if value is None else round(value, digits)


def histogram_series(dist: ScoreDistribution) -> list[dict]:
    return [{"score": s, "count": dist.counts[s],
             "proportion_pct": _round(dist.proportions[s] * 100, 1)}
            for s in SCORES]


def render_text_bars(dist: ScoreDistribution, width: int = 40) -> str:
    peak = max(dist.counts.values()) or 1
    lines = [f"{dist.dimension} (n={dist.total}, mean={dist.mean:.2f}, "
             f"median={dist.median:g})"]
    for s in SCORES:
        bar = "#" * round(dist.counts[s] / peak * width)
        lines.append(f"{s} | {bar} {dist.counts[s]}")
    return "\n".join(lines)


def build_report(scores: Sequence[ScoreRecord],
                 selections: Sequence[SelectionRecord],
                 refs: Mapping[str, NfrRef],
                 relatedness: quality.RelatednessMap = quality.DEFAULT_RELATEDNESS,
                 model_ids: Sequence[str] | None = None) -> dict:
    """Assemble every metric into one JSON-ready document.

    Percentages are rendered to one decimal and means to two, matching the
    reference tables; empty sections are null rather than an error so a
    partially populated store still exports.
    """
    report: dict = {
        "format_version": EXPORT_FORMAT_VERSION,
        "relatedness_map": relatedness.to_pairs(),
        "score_distributions": None,
        "match_breakdown": None,
        "confusion_matrix": None,
        "per_llm": None,
        "histograms": None,
    }
    if scores:
        distributions = {}
        histograms = {}
        for dimension in quality.DIMENSIONS:
            dist = score_distribution(scores, dimension)
            distributions[dimension] = {
                "counts": {str(s): dist.counts[s] for s in SCORES},
                "total": dist.total,
                "mean": _round(dist.mean, 2),
                "median": dist.median,
                "proportions_pct": {str(s): _round(dist.proportions[s] * 100, 1)
                                    for s in SCORES},
            }
            histograms[dimension] = histogram_series(dist)
        report["score_distributions"] = distributions
        report["histograms"] = histograms
    if selections:
        breakdown = match_breakdown(selections, refs, relatedness)
        report["match_breakdown"] = {
            "exact": breakdown.exact,
            "near": breakdown.near,
            "mismatch": breakdown.mismatch,
            "total": breakdown.total,
            "rates_pct": {k: _round(v * 100, 1) for k, v in breakdown.rates.items()},
        }
        matrix = confusion_matrix(selections, refs)
        report["confusion_matrix"] = {
            "attributes": list(matrix.attributes),
            "counts": [list(row) for row in matrix.counts],
            "row_normalized": [
                [None if attr in matrix.zero_rows else _round(v, 3) for v in row]
                for attr, row in zip(matrix.attributes, matrix.row_normalized)],
            "zero_rows": list(matrix.zero_rows),
            "total": matrix.total,
            "diagonal_sum": matrix.diagonal_sum,
        }
    if scores or selections:
        per_model = per_llm_report(scores, selections, refs, relatedness, model_ids)
        report["per_llm"] = [{
            "model_id": m.model_id,
            "n_scores": m.n_scores,
            "avg_validity": _round(m.avg_validity, 2),
            "avg_applicability": _round(m.avg_applicability, 2),
            "n_selections": m.n_selections,
            "attr_accuracy_pct": _round(m.attr_accuracy_pct, 1),
        } for m in per_model.models]
    return report


# -- export / import ----------------------------------------------------------

_SCORE_FIELDS = ("evaluator_id", "nfr_id", "validity", "applicability", "submitted_at")
_SELECTION_FIELDS = ("evaluator_id", "nfr_id", "chosen_attribute", "submitted_at")
_NFR_FIELDS = ("nfr_id", "fr_id", "model_id", "text", "attribute",
               "subcharacteristic", "justification")


def export_document(store: EvalStore,
                    relatedness: quality.RelatednessMap = quality.DEFAULT_RELATEDNESS) -> dict:
    refs = store.nfr_refs()
    scores = store.scores()
    selections = store.selections()
    return {
        "format_version": EXPORT_FORMAT_VERSION,
        "frs": [{"fr_id": fr_id, "text": text}
                for fr_id, text in sorted(store.fr_texts().items())],
        "nfrs": store.nfr_rows(),
        # Only the id and experience fields leave the store; display names do not.
        "evaluators": [{"evaluator_id": e.evaluator_id,
                        "years_experience": e.years_experience,
                        "role_title": e.role_title}
                       for e in store.evaluators()],
        "scores": [r.to_dict() for r in scores],
        "selections": [r.to_dict() for r in selections],
        "report": build_report(scores, selections, refs, relatedness,
                               model_ids=store.model_ids()),
    }


def _write_csv(path: Path, fieldnames: Sequence[str], rows: Sequence[Mapping]) -> None:
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=list(fieldnames))
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row.get(k) for k in fieldnames})


def export_dataset(store: EvalStore, out_dir: str | Path, format: str = "json",
                   relatedness: quality.RelatednessMap = quality.DEFAULT_RELATEDNESS
                   ) -> list[Path]:
    """Write the full study dataset plus the computed report.

    json: a single dataset.json. csv: one table per record type with the
    report alongside as JSON (plus per-model and confusion tables). Both
    round-trip through load_export.
    """
    if format not in ("json", "csv"):
        raise ArgumentError(f"unsupported export format {format!r}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    document = export_document(store, relatedness)
    written: list[Path] = []
    if format == "json":
        path = out_dir / "dataset.json"
        path.write_text(json.dumps(document, indent=2, ensure_ascii=False),
                        encoding="utf-8")
        written.append(path)
        return written

    _write_csv(out_dir / "frs.csv", ("fr_id", "text"), document["frs"])
    _write_csv(out_dir / "nfrs.csv", _NFR_FIELDS, document["nfrs"])
    _write_csv(out_dir / "evaluators.csv",
               ("evaluator_id", "years_experience", "role_title"),
               document["evaluators"])
    _write_csv(out_dir / "scores.csv", _SCORE_FIELDS, document["scores"])
    _write_csv(out_dir / "selections.csv", _SELECTION_FIELDS, document["selections"])
    report_path = out_dir / "report.json"
    report_path.write_text(json.dumps(document["report"], indent=2, ensure_ascii=False),
                           encoding="utf-8")
    written.extend([out_dir / "frs.csv", out_dir / "nfrs.csv",
                    out_dir / "evaluators.csv", out_dir / "scores.csv",
                    out_dir / "selections.csv", report_path])
    report = document["report"]
    if report.get("per_llm"):
        _write_csv(out_dir / "per_llm.csv",
                   ("model_id", "n_scores", "avg_validity", "avg_applicability",
                    "n_selections", "attr_accuracy_pct"), report["per_llm"])
        written.append(out_dir / "per_llm.csv")
    if report.get("confusion_matrix"):
        matrix = report["confusion_matrix"]
        rows = []
        for name, row in zip(matrix["attributes"], matrix["counts"]):
            entry = {"llm_attribute": name}
            entry.update({col: v for col, v in zip(matrix["attributes"], row)})
            rows.append(entry)
        _write_csv(out_dir / "confusion.csv",
                   ["llm_attribute", *matrix["attributes"]], rows)
        written.append(out_dir / "confusion.csv")
    return written


@dataclass
class ExportedDataset:
    frs: list[dict]
    nfrs: list[dict]
    evaluators: list[dict]
    scores: list[ScoreRecord]
    selections: list[SelectionRecord]

    def refs(self) -> dict[str, NfrRef]:
        return {r["nfr_id"]: NfrRef(r["nfr_id"], r["fr_id"], r["model_id"],
                                    r["attribute"]) for r in self.nfrs}


def _read_csv(path: Path) -> list[dict]:
    with path.open("r", encoding="utf-8", newline="") as handle:
        return list(csv.DictReader(handle))


def load_export(path: str | Path) -> ExportedDataset:
    """Read back a json or csv export directory (or the dataset.json itself)."""
    path = Path(path)
    if path.is_dir() and (path / "dataset.json").exists():
        path = path / "dataset.json"
    if path.is_file():
        data = json.loads(path.read_text(encoding="utf-8"))
        scores = data.get("scores", [])
        selections = data.get("selections", [])
        frs, nfrs, evaluators = data.get("frs", []), data.get("nfrs", []), data.get("evaluators", [])
    else:
        frs = _read_csv(path / "frs.csv")
        nfrs = _read_csv(path / "nfrs.csv")
        evaluators = _read_csv(path / "evaluators.csv")
        scores = _read_csv(path / "scores.csv")
        selections = _read_csv(path / "selections.csv")
    return ExportedDataset(
        frs=frs, nfrs=nfrs, evaluators=evaluators,
        scores=[ScoreRecord(r["evaluator_id"], r["nfr_id"], int(r["validity"]),
                            int(r["applicability"]), r["submitted_at"])
                for r in scores],
        selections=[SelectionRecord(r["evaluator_id"], r["nfr_id"],
                                    r["chosen_attribute"], r["submitted_at"])
                    for r in selections],
    )
