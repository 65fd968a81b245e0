"""Service layer binding sampling, assignments, and record storage, with the
blind-review guarantee enforced when payloads are built."""
from __future__ import annotations

import hashlib
import random
import secrets
from datetime import datetime, timezone
from typing import Callable, Iterable, Sequence

from .. import quality
from ..errors import (AuthorizationError, IntegrityError, NotFoundError,
                      SampleFrozenError, UnknownAttributeError, ValidationError)
from ..generation import LoadedRun
from .records import (SCORING, SELECTION, TASKS, Assignment, EvaluationSample,
                      Evaluator, ScoreRecord, SelectionRecord)
from .sampling import assign_evaluators, draw_sample
from .store import EvalStore


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


def item_alias(nfr_id: str) -> str:
    """Opaque evaluator-facing handle for an NFR.

    Canonical NFR ids embed the producing model for audit purposes, so they
    must never reach an evaluator; payloads carry this digest instead and
    submissions are translated back before storage.
    """
    return "n" + hashlib.sha256(nfr_id.encode("utf-8")).hexdigest()[:16]


class EvalService:
    def __init__(self, store: EvalStore, *,
                 now: Callable[[], str] = _utc_now,
                 token_factory: Callable[[], str] | None = None):
        self.store = store
        self._now = now
        self._token_factory = token_factory or (lambda: secrets.token_urlsafe(16))

    # -- study setup ------------------------------------------------------

    def import_run(self, loaded: LoadedRun) -> dict[str, int]:
        """Copy a generation run's FRs and NFRs into the store."""
        self.store.add_frs((r.id, r.text) for r in loaded.run.subset.members)
        rows = [e.to_dict() for artifact in loaded.artifacts for e in artifact.entries]
        self.store.add_nfrs(rows)
        return {"frs": len(loaded.run.subset.members), "nfrs": len(rows)}

    def add_evaluators(self, evaluators: Iterable[Evaluator]) -> None:
        self.store.add_evaluators(evaluators)

    def seeded_fr_pool(self, task: str, size: int, seed: int) -> list[str]:
        """Pick a seeded FR pool for a task's draw, skipping FRs the other
        task has already sampled."""
        refs = self.store.nfr_refs()
        other = self.store.get_sample(SELECTION if task == SCORING else SCORING)
        taken = ({refs[n].fr_id for n in other.members if n in refs}
                 if other is not None else set())
        pool = sorted({r.fr_id for r in refs.values()} - taken)
        random.Random(seed).shuffle(pool)
        return pool[:size]

    def create_sample(self, task: str, target_count: int, seed: int, *,
                      allowed_fr_ids: Iterable[str] | None = None,
                      exclude_other_task: bool = True,
                      force: bool = False) -> EvaluationSample:
        """Draw and persist the task's stratified sample.

        By default the draw excludes FRs already sampled for the other task,
        which keeps downstream assignment disjointness satisfiable. An
        existing sample is only replaced with force=True.
        """
        if task not in TASKS:
            raise ValidationError(f"unknown task {task!r}")
        existing = self.store.get_sample(task)
        if existing is not None and not force:
            if existing.seed == seed and len(existing.members) == target_count:
                return existing
            raise ValidationError(
                f"a {task} sample already exists; pass force to replace it")
        refs = self.store.nfr_refs()
        allowed = set(allowed_fr_ids) if allowed_fr_ids is not None else None
        if exclude_other_task:
            other = self.store.get_sample(SELECTION if task == SCORING else SCORING)
            if other is not None:
                taken = {refs[n].fr_id for n in other.members if n in refs}
                pool_frs = {r.fr_id for r in refs.values()}
                allowed = (allowed if allowed is not None else pool_frs) - taken
        sample = draw_sample(list(refs.values()), task, target_count, seed,
                             allowed_fr_ids=allowed)
        self.store.save_sample(sample, target_count)
        return sample

    def assign(self, frs_per_evaluator: int = 3, seed: int = 0,
               evaluators: Sequence[Evaluator] | None = None) -> list[Assignment]:
        """Create assignments for both tasks and issue evaluator tokens."""
        if evaluators is not None:
            known = {e.evaluator_id for e in self.store.evaluators()}
            new = [e for e in evaluators if e.evaluator_id not in known]
            if new:
                self.store.add_evaluators(new)
        roster = self.store.evaluators()
        scoring = self.store.get_sample(SCORING)
        selection = self.store.get_sample(SELECTION)
        if scoring is None or selection is None:
            raise ValidationError("both task samples must exist before assignment")
        assignments = assign_evaluators(scoring, selection, roster,
                                        self.store.nfr_refs(),
                                        frs_per_evaluator=frs_per_evaluator,
                                        seed=seed)
        self.store.save_assignments(assignments)
        for evaluator in roster:
            if self.store.token_for(evaluator.evaluator_id) is None:
                self.store.set_token(evaluator.evaluator_id, self._token_factory())
        return assignments

    def freeze(self, task: str) -> None:
        if task not in TASKS:
            raise ValidationError(f"unknown task {task!r}")
        self.store.freeze_sample(task)

    # -- submissions ------------------------------------------------------

    def _resolve_item(self, evaluator_id: str, task: str, nfr_id: str) -> str:
        """Accept either a canonical NFR id or the payload alias, and check
        the (evaluator, item) pair is actually assigned for this task."""
        assignment = self.store.assignment_for(evaluator_id, task)
        if assignment is not None:
            if nfr_id in assignment.nfr_ids:
                return nfr_id
            aliases = {item_alias(n): n for n in assignment.nfr_ids}
            if nfr_id in aliases:
                return aliases[nfr_id]
        raise AuthorizationError(
            f"evaluator {evaluator_id!r} is not assigned NFR {nfr_id!r} "
            f"for the {task} task")

    def _check_disjointness(self, evaluator_id: str, task: str, nfr_id: str) -> None:
        # Re-checked on every write: the FR behind this NFR must not appear in
        # any assignment of the other task.
        refs = self.store.nfr_refs()
        ref = refs.get(nfr_id)
        if ref is None:
            raise IntegrityError(f"NFR {nfr_id!r} is not in the store")
        other_task = SELECTION if task == SCORING else SCORING
        for assignment in self.store.assignments():
            if assignment.task == other_task and ref.fr_id in assignment.fr_ids:
                raise IntegrityError(
                    f"FR {ref.fr_id!r} appears in both task assignments")

    def record_score(self, evaluator_id: str, nfr_id: str, validity: int,
                     applicability: int) -> ScoreRecord:
        if not isinstance(validity, int) or not 1 <= validity <= 5:
            raise ValidationError(f"validity must be an integer in 1..5, got {validity!r}")
        if not isinstance(applicability, int) or not 1 <= applicability <= 5:
            raise ValidationError(
                f"applicability must be an integer in 1..5, got {applicability!r}")
        canonical_id = self._resolve_item(evaluator_id, SCORING, nfr_id)
        record = ScoreRecord(evaluator_id, canonical_id, validity, applicability,
                             self._now())
        if self.store.sample_frozen(SCORING):
            raise SampleFrozenError("the scoring sample is frozen; submissions are closed")
        self._check_disjointness(evaluator_id, SCORING, canonical_id)
        self.store.upsert_score(record)
        return record

    def record_selection(self, evaluator_id: str, nfr_id: str,
                         attribute_name: str) -> SelectionRecord:
        try:
            canonical = quality.resolve_attribute(attribute_name).canonical_name
        except UnknownAttributeError as exc:
            raise ValidationError(str(exc)) from exc
        canonical_id = self._resolve_item(evaluator_id, SELECTION, nfr_id)
        record = SelectionRecord(evaluator_id, canonical_id, canonical, self._now())
        if self.store.sample_frozen(SELECTION):
            raise SampleFrozenError("the selection sample is frozen; submissions are closed")
        self._check_disjointness(evaluator_id, SELECTION, canonical_id)
        self.store.upsert_selection(record)
        return record

    # -- payloads ---------------------------------------------------------

    def evaluator_for_token(self, token: str) -> Evaluator:
        return self.store.evaluator_by_token(token)

    def assignments_summary(self, evaluator_id: str) -> dict:
        tasks = []
        for task in TASKS:
            assignment = self.store.assignment_for(evaluator_id, task)
            if assignment is None:
                continue
            done = sum(1 for n in assignment.nfr_ids if (
                self.store.score_for(evaluator_id, n) if task == SCORING
                else self.store.selection_for(evaluator_id, n)) is not None)
            tasks.append({
                "task": task,
                "fr_count": len(assignment.fr_ids),
                "nfr_count": len(assignment.nfr_ids),
                "done": done,
                "frozen": self.store.sample_frozen(task),
            })
        return {"evaluator_id": evaluator_id, "tasks": tasks}

    def evaluator_payload(self, evaluator_id: str, task: str) -> dict:
        """Build the task payload an evaluator works from.

        Scoring payloads show the assigned attribute and justification next
        to each NFR; selection payloads are blind: items carry the FR and NFR
        text only, with no field that states or encodes the assigned
        attribute. Model identity is withheld from both.
        """
        if task not in TASKS:
            raise ValidationError(f"unknown task {task!r}")
        assignment = self.store.assignment_for(evaluator_id, task)
        if assignment is None:
            raise NotFoundError(
                f"evaluator {evaluator_id!r} has no {task} assignment")
        fr_texts = self.store.fr_texts()
        nfr_rows = {r["nfr_id"]: r for r in self.store.nfr_rows()}
        assigned = set(assignment.nfr_ids)
        by_fr: dict[str, list[dict]] = {fr_id: [] for fr_id in assignment.fr_ids}
        done = 0
        for nfr_id in assignment.nfr_ids:
            row = nfr_rows.get(nfr_id)
            if row is None:
                raise IntegrityError(f"assigned NFR {nfr_id!r} is missing from the store")
            if task == SCORING:
                submitted = self.store.score_for(evaluator_id, nfr_id)
                item = {
                    "nfr_id": item_alias(nfr_id),
                    "text": row["text"],
                    "attribute": row["attribute"],
                    "subcharacteristic": row["subcharacteristic"],
                    "justification": row["justification"],
                    "submitted": {"validity": submitted.validity,
                                  "applicability": submitted.applicability}
                    if submitted else None,
                }
            else:
                chosen = self.store.selection_for(evaluator_id, nfr_id)
                item = {
                    "nfr_id": item_alias(nfr_id),
                    "text": row["text"],
                    "submitted": chosen.chosen_attribute if chosen else None,
                }
            if item["submitted"] is not None:
                done += 1
            by_fr.setdefault(row["fr_id"], []).append(item)
        payload = {
            "task": task,
            "evaluator_id": evaluator_id,
            "frozen": self.store.sample_frozen(task),
            "progress": {"done": done, "total": len(assigned)},
            "frs": [{
                "fr_id": fr_id,
                "fr_text": fr_texts.get(fr_id, ""),
                "nfrs": by_fr.get(fr_id, []),
            } for fr_id in assignment.fr_ids],
        }
        if task == SCORING:
            payload["rubrics"] = {
                dimension: [{"score": lvl.score, "label": lvl.label,
                             "definition": lvl.definition}
                            for lvl in quality.RUBRICS[dimension]]
                for dimension in quality.DIMENSIONS
            }
        else:
            payload["options"] = list(quality.CANONICAL_NAMES)
        return payload
