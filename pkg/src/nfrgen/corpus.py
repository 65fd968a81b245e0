"""Requirement-dataset ingestion, source-document filtering, and selection of
the functional-requirement subset that feeds generation."""
from __future__ import annotations

import csv
import io
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import BinaryIO, Iterable, Sequence

from .errors import ArgumentError, CapacityError, NfrgenError, RowParseError


class RequirementKind(str, Enum):
    FR = "FR"
    NFR = "NFR"


class SelectionStrategy(str, Enum):
    UNIFORM_RANDOM = "uniform_random"
    PER_DOCUMENT_STRATIFIED = "per_document_stratified"
    EXPLICIT_LIST = "explicit_list"


@dataclass(frozen=True)
class RequirementRecord:
    id: str
    text: str
    kind: RequirementKind
    source_doc: str | None = None
    year: int | None = None

    def __post_init__(self):
        if not self.text.strip():
            raise ArgumentError(f"requirement {self.id!r} has empty text")
        if not isinstance(self.kind, RequirementKind):
            raise ArgumentError(f"requirement {self.id!r} has invalid kind {self.kind!r}")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "text": self.text,
            "kind": self.kind.value,
            "source_doc": self.source_doc,
            "year": self.year,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RequirementRecord":
        return cls(
            id=data["id"],
            text=data["text"],
            kind=RequirementKind(data["kind"]),
            source_doc=data.get("source_doc"),
            year=data.get("year"),
        )


@dataclass(frozen=True)
class SrsDocument:
    name: str
    topic: str
    year: int
    fr_count: int

    def __post_init__(self):
        if self.fr_count < 0:
            raise ArgumentError(f"document {self.name!r} has negative fr_count")
        if not 1000 <= self.year <= 9999:
            raise ArgumentError(f"document {self.name!r} year must be a 4-digit integer")


@dataclass(frozen=True)
class FrSubset:
    members: tuple[RequirementRecord, ...]
    selection_seed: int
    strategy: SelectionStrategy

    def __post_init__(self):
        ids = [r.id for r in self.members]
        if len(set(ids)) != len(ids):
            raise ArgumentError("subset member ids must be pairwise distinct")
        for r in self.members:
            if r.kind is not RequirementKind.FR:
                raise ArgumentError(f"subset member {r.id!r} is not an FR")

    @property
    def member_ids(self) -> tuple[str, ...]:
        return tuple(r.id for r in self.members)

    def to_dict(self) -> dict:
        return {
            "selection_seed": self.selection_seed,
            "strategy": self.strategy.value,
            "member_ids": list(self.member_ids),
            "members": [r.to_dict() for r in self.members],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FrSubset":
        return cls(
            members=tuple(RequirementRecord.from_dict(d) for d in data["members"]),
            selection_seed=data["selection_seed"],
            strategy=SelectionStrategy(data["strategy"]),
        )


@dataclass(frozen=True)
class RejectedRow:
    row_number: int
    raw: str
    reason: str


@dataclass
class ParseResult:
    records: list[RequirementRecord] = field(default_factory=list)
    rejected: list[RejectedRow] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def count(self, kind: RequirementKind) -> int:
        return sum(1 for r in self.records if r.kind is kind)


_LABEL_MAP = {
    "fr": RequirementKind.FR,
    "functional": RequirementKind.FR,
    "nfr": RequirementKind.NFR,
    "non-functional": RequirementKind.NFR,
}

_HEADER_NAMES = ("text", "label")


def parse_requirements_file(source: BinaryIO | bytes, format: str = "tsv") -> ParseResult:
    """Parse a TSV/CSV requirement table into records plus a rejection report.

    Columns: text, label, optional source_doc, optional year. A first row
    whose leading cells are exactly "text","label" is treated as a header.
    Label matching is case-insensitive over the documented synonyms only;
    rows with any other label land in the rejection report rather than being
    guessed or dropped. Structurally malformed rows (fewer than two columns,
    empty text, non-integer year) abort with RowParseError.

    Record ids are assigned deterministically from the data-row index, so
    re-parsing the same file always yields the same ids.
    """
    if format not in ("tsv", "csv"):
        raise ArgumentError(f"unsupported format {format!r}, expected 'tsv' or 'csv'")
    raw = source if isinstance(source, bytes) else source.read()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise NfrgenError(f"input stream is not valid UTF-8: {exc}") from exc

    delimiter = "\t" if format == "tsv" else ","
    reader = csv.reader(io.StringIO(text, newline=""), delimiter=delimiter)
    result = ParseResult()
    texts_seen: dict[str, str] = {}
    data_index = 0
    for row_number, row in enumerate(reader, start=1):
        if not row or all(not cell.strip() for cell in row):
            continue
        if row_number == 1 and tuple(c.strip() for c in row[:2]) == _HEADER_NAMES:
            continue
        raw_row = delimiter.join(row)
        if len(row) < 2:
            raise RowParseError(row_number, raw_row, "expected at least 2 columns")
        req_text = row[0].strip()
        label = row[1].strip()
        if not req_text:
            raise RowParseError(row_number, raw_row, "empty requirement text")
        source_doc = row[2].strip() or None if len(row) > 2 else None
        year: int | None = None
        if len(row) > 3 and row[3].strip():
            try:
                year = int(row[3].strip())
            except ValueError:
                raise RowParseError(row_number, raw_row, f"invalid year {row[3]!r}") from None

        data_index += 1
        kind = _LABEL_MAP.get(label.casefold())
        if kind is None:
            result.rejected.append(
                RejectedRow(row_number, raw_row, f"unknown label: {label!r}"))
            continue
        record = RequirementRecord(
            id=f"R{data_index:04d}", text=req_text, kind=kind,
            source_doc=source_doc, year=year)
        if req_text in texts_seen:
            result.warnings.append(
                f"duplicate text: {record.id} repeats {texts_seen[req_text]}")
        else:
            texts_seen[req_text] = record.id
        result.records.append(record)
    return result


def filter_srs_documents(docs: Sequence[SrsDocument], min_year: int,
                         max_year: int) -> list[SrsDocument]:
    """Keep documents whose year falls inside [min_year, max_year], order preserved."""
    if min_year > max_year:
        raise ArgumentError(f"min_year {min_year} exceeds max_year {max_year}")
    return [d for d in docs if min_year <= d.year <= max_year]


def _stratified_quotas(groups: dict[str, int], count: int, rng: random.Random) -> dict[str, int]:
    # One slot at a time, round-robin over a seeded document order, skipping
    # documents whose pool is exhausted; keeps per-doc counts within 1 of
    # each other whenever capacity allows.
    order = sorted(groups)
    rng.shuffle(order)
    quotas = {doc: 0 for doc in order}
    remaining = count
    while remaining > 0:
        progressed = False
        for doc in order:
            if remaining == 0:
                break
            if quotas[doc] < groups[doc]:
                quotas[doc] += 1
                remaining -= 1
                progressed = True
        if not progressed:
            raise CapacityError(
                f"cannot allocate {count} items over documents with total capacity "
                f"{sum(groups.values())}", requested=count, available=sum(groups.values()))
    return quotas


def select_fr_subset(records: Sequence[RequirementRecord], count: int,
                     strategy: SelectionStrategy | str, seed: int,
                     explicit_ids: Sequence[str] | None = None) -> FrSubset:
    """Select `count` distinct FRs, reproducibly for a fixed (records, count,
    strategy, seed) quadruple.

    uniform_random samples over all FRs; per_document_stratified balances the
    draw across source documents with per-doc counts differing by at most one;
    explicit_list takes the given ids verbatim (for reproducing a previously
    recorded selection).
    """
    strategy = SelectionStrategy(strategy)
    if count < 0:
        raise ArgumentError(f"count must be non-negative, got {count}")
    frs = [r for r in records if r.kind is RequirementKind.FR]
    ids = [r.id for r in frs]
    if len(set(ids)) != len(ids):
        raise ArgumentError("input records contain duplicate ids")
    if count > len(frs):
        raise CapacityError(
            f"requested {count} FRs but only {len(frs)} are available",
            requested=count, available=len(frs))

    rng = random.Random(seed)
    if strategy is SelectionStrategy.EXPLICIT_LIST:
        if explicit_ids is None:
            raise ArgumentError("explicit_list strategy requires explicit_ids")
        if len(explicit_ids) != count:
            raise ArgumentError(
                f"count {count} does not match {len(explicit_ids)} explicit ids")
        by_id = {r.id: r for r in frs}
        missing = [i for i in explicit_ids if i not in by_id]
        if missing:
            raise ArgumentError(f"explicit ids not found among FRs: {missing}")
        members = tuple(by_id[i] for i in explicit_ids)
    elif strategy is SelectionStrategy.UNIFORM_RANDOM:
        chosen = sorted(rng.sample(range(len(frs)), count))
        members = tuple(frs[i] for i in chosen)
    else:  # PER_DOCUMENT_STRATIFIED
        by_doc: dict[str, list[int]] = {}
        for idx, r in enumerate(frs):
            by_doc.setdefault(r.source_doc or "", []).append(idx)
        quotas = _stratified_quotas({d: len(v) for d, v in by_doc.items()}, count, rng)
        chosen = []
        for doc in sorted(by_doc):
            chosen.extend(rng.sample(by_doc[doc], quotas[doc]))
        members = tuple(frs[i] for i in sorted(chosen))

    return FrSubset(members=members, selection_seed=seed, strategy=strategy)


def load_srs_documents(rows: Iterable[dict]) -> list[SrsDocument]:
    """Build document descriptors from parsed JSON rows."""
    return [SrsDocument(name=r["name"], topic=r.get("topic", ""),
                        year=int(r["year"]), fr_count=int(r.get("fr_count", 0)))
            for r in rows]
