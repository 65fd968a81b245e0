"""Domain records for the evaluation study."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

from .. import quality
from ..errors import ArgumentError, ValidationError

SCORING = "scoring"
SELECTION = "selection"
TASKS = (SCORING, SELECTION)


class NfrRef(NamedTuple):
    """Lightweight handle on a generated NFR, as sampling and metrics see it."""

    nfr_id: str
    fr_id: str
    model_id: str
    attribute: str


@dataclass(frozen=True)
class Evaluator:
    evaluator_id: str
    display_name: str
    years_experience: int
    role_title: str

    def __post_init__(self):
        if self.years_experience < 0:
            raise ArgumentError(
                f"evaluator {self.evaluator_id!r} has negative experience")


@dataclass(frozen=True)
class EvaluationSample:
    sample_id: str
    task: str
    members: tuple[str, ...]
    strata: dict[str, int]
    seed: int

    def __post_init__(self):
        if self.task not in TASKS:
            raise ArgumentError(f"unknown task {self.task!r}")
        if len(set(self.members)) != len(self.members):
            raise ArgumentError("sample members must be distinct")
        if sum(self.strata.values()) != len(self.members):
            raise ArgumentError("strata counts must sum to the member count")


@dataclass(frozen=True)
class Assignment:
    evaluator_id: str
    task: str
    fr_ids: tuple[str, ...]
    nfr_ids: tuple[str, ...]
    designated_model: str | None = None

    def __post_init__(self):
        if self.task not in TASKS:
            raise ArgumentError(f"unknown task {self.task!r}")
        if len(set(self.fr_ids)) != len(self.fr_ids):
            raise ArgumentError("assignment fr_ids must be distinct")


def _check_score(name: str, value: object) -> int:
    if not isinstance(value, int) or isinstance(value, bool) or not 1 <= value <= 5:
        raise ValidationError(f"{name} must be an integer in 1..5, got {value!r}")
    return value


@dataclass(frozen=True)
class ScoreRecord:
    evaluator_id: str
    nfr_id: str
    validity: int
    applicability: int
    submitted_at: str

    def __post_init__(self):
        _check_score("validity", self.validity)
        _check_score("applicability", self.applicability)

    def to_dict(self) -> dict:
        return {"evaluator_id": self.evaluator_id, "nfr_id": self.nfr_id,
                "validity": self.validity, "applicability": self.applicability,
                "submitted_at": self.submitted_at}


@dataclass(frozen=True)
class SelectionRecord:
    evaluator_id: str
    nfr_id: str
    chosen_attribute: str
    submitted_at: str

    def __post_init__(self):
        canonical = quality.resolve_attribute(self.chosen_attribute).canonical_name
        object.__setattr__(self, "chosen_attribute", canonical)

    def to_dict(self) -> dict:
        return {"evaluator_id": self.evaluator_id, "nfr_id": self.nfr_id,
                "chosen_attribute": self.chosen_attribute,
                "submitted_at": self.submitted_at}
