"""Stratified sampling and evaluator assignment with cross-task FR disjointness.

Pure functions over plain values: the service layer wires them to storage.
"""
from __future__ import annotations

import random
from typing import Iterable, Mapping, Sequence

from ..errors import ArgumentError, CapacityError, IntegrityError
from .records import SCORING, SELECTION, Assignment, EvaluationSample, Evaluator, NfrRef


def allocate_strata(pool_sizes: Mapping[str, int], target: int, seed: int) -> dict[str, int]:
    """Split a target count across strata as evenly as possible.

    Every stratum gets target // n; the remainder goes one each to strata in
    a seeded order, so per-stratum counts never differ by more than one. A
    stratum smaller than its quota is a capacity error rather than a silently
    unbalanced sample.
    """
    if target < 0:
        raise ArgumentError("target must be non-negative")
    names = sorted(pool_sizes)
    if target == 0:
        return {name: 0 for name in names}
    if not names:
        raise CapacityError("no strata to sample from", requested=target, available=0)
    total = sum(pool_sizes.values())
    if target > total:
        raise CapacityError(
            f"target {target} exceeds pool of {total}", requested=target, available=total)
    base, remainder = divmod(target, len(names))
    order = names[:]
    random.Random(seed).shuffle(order)
    quotas = {name: base for name in names}
    for name in order[:remainder]:
        quotas[name] += 1
    for name, quota in quotas.items():
        if quota > pool_sizes[name]:
            raise CapacityError(
                f"stratum {name!r} holds {pool_sizes[name]} items but the even "
                f"split needs {quota}", requested=quota, available=pool_sizes[name])
    return quotas


def draw_sample(refs: Sequence[NfrRef], task: str, target_count: int, seed: int,
                allowed_fr_ids: Iterable[str] | None = None) -> EvaluationSample:
    """Draw a per-model stratified sample of NFR ids, deterministic in seed."""
    pool = list(refs)
    if allowed_fr_ids is not None:
        allowed = set(allowed_fr_ids)
        pool = [r for r in pool if r.fr_id in allowed]
    by_model: dict[str, list[NfrRef]] = {}
    for ref in pool:
        by_model.setdefault(ref.model_id, []).append(ref)
    quotas = allocate_strata({m: len(v) for m, v in by_model.items()}, target_count, seed)
    members: list[str] = []
    strata: dict[str, int] = {}
    for model_id in sorted(by_model):
        quota = quotas[model_id]
        strata[model_id] = quota
        candidates = sorted(r.nfr_id for r in by_model[model_id])
        rng = random.Random(f"{seed}:{task}:{model_id}")
        members.extend(sorted(rng.sample(candidates, quota)))
    return EvaluationSample(
        sample_id=f"{task}-{seed}-{target_count}",
        task=task, members=tuple(members), strata=strata, seed=seed)


def _round_robin(fr_ids: list[str], holders: list[str], per_holder: int,
                 what: str) -> dict[str, list[str]]:
    capacity = per_holder * len(holders)
    if len(fr_ids) > capacity:
        raise CapacityError(
            f"{what} needs slots for {len(fr_ids)} FRs but {len(holders)} "
            f"evaluators x {per_holder} provide only {capacity}",
            requested=len(fr_ids), available=capacity)
    buckets: dict[str, list[str]] = {h: [] for h in holders}
    for i, fr_id in enumerate(fr_ids):
        buckets[holders[i % len(holders)]].append(fr_id)
    # FR reuse across evaluators within a task is allowed; top evaluators up
    # to per_holder distinct FRs so everyone reviews a comparable load.
    width = min(per_holder, len(fr_ids))
    for holder in holders:
        have = buckets[holder]
        for fr_id in fr_ids:
            if len(have) >= width:
                break
            if fr_id not in have:
                have.append(fr_id)
    return buckets


def assign_evaluators(scoring_sample: EvaluationSample,
                      selection_sample: EvaluationSample,
                      evaluators: Sequence[Evaluator],
                      refs: Mapping[str, NfrRef],
                      frs_per_evaluator: int = 3,
                      seed: int = 0) -> list[Assignment]:
    """Build both tasks' assignments with globally disjoint FR sets.

    Scoring assignments carry a designated model: each evaluator reviews the
    sampled NFRs that their model generated for their FRs. Selection
    assignments cover all sampled NFRs under the evaluator's FRs regardless
    of model. Every sampled NFR ends up in at least one assignment, or the
    call fails with the shortfall.
    """
    if not evaluators:
        raise CapacityError("at least one evaluator is required", requested=1, available=0)
    if frs_per_evaluator < 1:
        raise ArgumentError("frs_per_evaluator must be >= 1")
    if len({e.evaluator_id for e in evaluators}) != len(evaluators):
        raise ArgumentError("evaluator ids must be unique")

    def resolve(sample: EvaluationSample) -> list[NfrRef]:
        missing = [n for n in sample.members if n not in refs]
        if missing:
            raise IntegrityError(f"sampled NFRs missing from the run: {missing[:5]}")
        return [refs[n] for n in sample.members]

    scoring_refs = resolve(scoring_sample)
    selection_refs = resolve(selection_sample)
    scoring_frs = {r.fr_id for r in scoring_refs}
    selection_frs = {r.fr_id for r in selection_refs}
    overlap = scoring_frs & selection_frs
    if overlap:
        raise ArgumentError(
            "scoring and selection samples share FRs, so disjoint task FR sets "
            f"are impossible: {sorted(overlap)[:5]}")

    rng = random.Random(seed)
    evaluator_ids = [e.evaluator_id for e in evaluators]
    assignments: list[Assignment] = []

    frs_by_model: dict[str, set[str]] = {}
    for r in scoring_refs:
        frs_by_model.setdefault(r.model_id, set()).add(r.fr_id)
    models = sorted(frs_by_model)
    if models:
        if len(evaluator_ids) < len(models):
            raise CapacityError(
                f"scoring covers {len(models)} models but only "
                f"{len(evaluator_ids)} evaluators are available",
                requested=len(models), available=len(evaluator_ids))
        # Cycle evaluators over models ordered by FR load, so when there are
        # spare evaluators they land on the models whose samples spread over
        # the most FRs.
        model_order = sorted(models, key=lambda m: (-len(frs_by_model[m]), m))
        evaluator_order = evaluator_ids[:]
        rng.shuffle(evaluator_order)
        designated = {eid: model_order[i % len(model_order)]
                      for i, eid in enumerate(evaluator_order)}
        for model_id in model_order:
            holders = [eid for eid in evaluator_order if designated[eid] == model_id]
            model_frs = sorted(frs_by_model[model_id])
            buckets = _round_robin(model_frs, holders, frs_per_evaluator,
                                   f"scoring (model {model_id})")
            for eid in holders:
                fr_ids = tuple(sorted(buckets[eid]))
                nfr_ids = tuple(sorted(
                    r.nfr_id for r in scoring_refs
                    if r.model_id == model_id and r.fr_id in set(fr_ids)))
                if nfr_ids:
                    assignments.append(Assignment(eid, SCORING, fr_ids, nfr_ids, model_id))

    if selection_refs:
        sel_frs = sorted(selection_frs)
        holder_order = evaluator_ids[:]
        rng.shuffle(holder_order)
        buckets = _round_robin(sel_frs, holder_order, frs_per_evaluator, "selection")
        for eid in holder_order:
            fr_ids = tuple(sorted(buckets[eid]))
            nfr_ids = tuple(sorted(r.nfr_id for r in selection_refs
                                   if r.fr_id in set(fr_ids)))
            if nfr_ids:
                assignments.append(Assignment(eid, SELECTION, fr_ids, nfr_ids, None))

    covered_scoring = {n for a in assignments if a.task == SCORING for n in a.nfr_ids}
    covered_selection = {n for a in assignments if a.task == SELECTION for n in a.nfr_ids}
    if covered_scoring != set(scoring_sample.members):
        raise IntegrityError("scoring assignments do not cover the sample")
    if covered_selection != set(selection_sample.members):
        raise IntegrityError("selection assignments do not cover the sample")
    return assignments
