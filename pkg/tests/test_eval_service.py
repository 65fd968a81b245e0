from __future__ import annotations

import json
import random

import pytest

from nfrgen import quality
from nfrgen.errors import (ArgumentError, AuthorizationError, CapacityError,
                           NotFoundError, SampleFrozenError, ValidationError)
from nfrgen.evalsvc import (SCORING, SELECTION, EvalService, EvalStore,
                            Evaluator, NfrRef, allocate_strata,
                            assign_evaluators, draw_sample)
from nfrgen.evalsvc.records import EvaluationSample
from nfrgen.evalsvc.service import item_alias

from conftest import make_evaluators, seed_store, token_counter


def refs_for(n_models: int, frs_per_model: int, per_fr: int,
             model_prefix: str = "mk") -> dict[str, NfrRef]:
    refs = {}
    catalog = quality.CANONICAL_NAMES
    i = 0
    for m in range(n_models):
        model_id = f"{model_prefix}-{chr(ord('a') + m)}"
        for f in range(frs_per_model):
            fr_id = f"FR-{f + 1:02d}"
            for k in range(per_fr):
                nfr_id = f"{model_id}/{fr_id}/{k + 1}"
                refs[nfr_id] = NfrRef(nfr_id, fr_id, model_id,
                                      catalog[i % len(catalog)])
                i += 1
    return refs


class TestAllocateStrata:
    def test_174_over_8_models(self):
        quotas = allocate_strata({f"m{i}": 30 for i in range(8)}, 174, seed=1)
        assert sum(quotas.values()) == 174
        assert set(quotas.values()) <= {21, 22}
        assert max(quotas.values()) - min(quotas.values()) <= 1

    def test_168_over_8_models_exact(self):
        quotas = allocate_strata({f"m{i}": 30 for i in range(8)}, 168, seed=1)
        assert all(q == 21 for q in quotas.values())

    def test_target_zero(self):
        quotas = allocate_strata({"a": 5, "b": 5}, 0, seed=1)
        assert quotas == {"a": 0, "b": 0}

    def test_target_exceeds_pool(self):
        with pytest.raises(CapacityError) as exc:
            allocate_strata({"a": 2, "b": 2}, 5, seed=1)
        assert exc.value.requested == 5 and exc.value.available == 4

    def test_short_stratum_reported(self):
        with pytest.raises(CapacityError, match="'b'"):
            allocate_strata({"a": 100, "b": 1}, 10, seed=1)


class TestDrawSample:
    def test_deterministic_in_seed(self):
        refs = list(refs_for(4, 6, 3).values())
        a = draw_sample(refs, SCORING, 20, seed=9)
        b = draw_sample(refs, SCORING, 20, seed=9)
        assert a == b
        assert len(set(a.members)) == 20

    def test_stratification_bound(self):
        refs = list(refs_for(5, 6, 3).values())
        sample = draw_sample(refs, SCORING, 23, seed=2)
        assert sum(sample.strata.values()) == 23
        assert max(sample.strata.values()) - min(sample.strata.values()) <= 1

    def test_fr_restriction(self):
        refs = refs_for(2, 6, 2)
        sample = draw_sample(list(refs.values()), SELECTION, 6, seed=1,
                             allowed_fr_ids={"FR-01", "FR-02"})
        assert {refs[n].fr_id for n in sample.members} <= {"FR-01", "FR-02"}


class TestAssignEvaluators:
    def build_samples(self, refs, scoring_frs, selection_frs, n_each=None):
        scoring_members = tuple(sorted(
            n for n, r in refs.items() if r.fr_id in scoring_frs))
        selection_members = tuple(sorted(
            n for n, r in refs.items() if r.fr_id in selection_frs))
        def strata(members):
            out = {}
            for n in members:
                out[refs[n].model_id] = out.get(refs[n].model_id, 0) + 1
            return out
        return (EvaluationSample("s1", SCORING, scoring_members,
                                 strata(scoring_members), 0),
                EvaluationSample("s2", SELECTION, selection_members,
                                 strata(selection_members), 0))

    def test_exact_fit_two_evaluators_six_frs(self):
        refs = refs_for(1, 6, 2)
        scoring, selection = self.build_samples(
            refs, {"FR-01", "FR-02", "FR-03"}, {"FR-04", "FR-05", "FR-06"})
        assignments = assign_evaluators(scoring, selection, make_evaluators(2),
                                        refs, frs_per_evaluator=3, seed=1)
        scoring_frs = {fr for a in assignments if a.task == SCORING for fr in a.fr_ids}
        selection_frs = {fr for a in assignments if a.task == SELECTION
                         for fr in a.fr_ids}
        assert scoring_frs == {"FR-01", "FR-02", "FR-03"}
        assert selection_frs == {"FR-04", "FR-05", "FR-06"}
        assert scoring_frs.isdisjoint(selection_frs)

    def test_every_sampled_nfr_covered(self):
        refs = refs_for(3, 6, 2)
        scoring, selection = self.build_samples(
            refs, {"FR-01", "FR-02", "FR-03"}, {"FR-04", "FR-05", "FR-06"})
        assignments = assign_evaluators(scoring, selection, make_evaluators(5),
                                        refs, seed=3)
        covered = {n for a in assignments if a.task == SCORING for n in a.nfr_ids}
        assert covered == set(scoring.members)
        covered = {n for a in assignments if a.task == SELECTION for n in a.nfr_ids}
        assert covered == set(selection.members)

    def test_scoring_restricted_to_designated_model(self):
        refs = refs_for(3, 6, 2)
        scoring, selection = self.build_samples(
            refs, {"FR-01", "FR-02"}, {"FR-05", "FR-06"})
        assignments = assign_evaluators(scoring, selection, make_evaluators(4),
                                        refs, seed=3)
        for a in assignments:
            if a.task == SCORING:
                assert a.designated_model is not None
                assert all(refs[n].model_id == a.designated_model
                           for n in a.nfr_ids)

    def test_overlapping_samples_rejected(self):
        refs = refs_for(1, 4, 2)
        scoring, selection = self.build_samples(
            refs, {"FR-01", "FR-02"}, {"FR-02", "FR-03"})
        with pytest.raises(ArgumentError, match="disjoint"):
            assign_evaluators(scoring, selection, make_evaluators(2), refs)

    def test_no_evaluators(self):
        refs = refs_for(1, 2, 1)
        scoring, selection = self.build_samples(refs, {"FR-01"}, {"FR-02"})
        with pytest.raises(CapacityError):
            assign_evaluators(scoring, selection, [], refs)

    def test_capacity_shortfall_reported(self):
        refs = refs_for(1, 6, 1)
        scoring, selection = self.build_samples(
            refs, {"FR-01", "FR-02", "FR-03", "FR-04", "FR-05"}, {"FR-06"})
        with pytest.raises(CapacityError):
            assign_evaluators(scoring, selection, make_evaluators(1), refs,
                              frs_per_evaluator=3)

    def test_deterministic_in_seed(self):
        refs = refs_for(2, 6, 2)
        scoring, selection = self.build_samples(
            refs, {"FR-01", "FR-02", "FR-03"}, {"FR-04", "FR-05", "FR-06"})
        a = assign_evaluators(scoring, selection, make_evaluators(3), refs, seed=5)
        b = assign_evaluators(scoring, selection, make_evaluators(3), refs, seed=5)
        assert a == b


def ready_service(service: EvalService, *, n_models=2, n_frs=6, per_fr=2,
                  n_evaluators=2, scoring_n=4, selection_n=4) -> EvalService:
    seed_store(service.store, n_models=n_models, n_frs=n_frs, per_fr=per_fr)
    service.add_evaluators(make_evaluators(n_evaluators))
    half = [f"FR-{i + 1:02d}" for i in range(n_frs // 2)]
    service.create_sample(SCORING, scoring_n, seed=1, allowed_fr_ids=half)
    service.create_sample(SELECTION, selection_n, seed=2)
    service.assign(frs_per_evaluator=3, seed=3)
    return service


class TestServiceRecords:
    def test_score_round_trip(self, service):
        ready_service(service)
        assignment = service.store.assignment_for("E01", SCORING)
        nfr_id = assignment.nfr_ids[0]
        service.record_score("E01", nfr_id, 5, 4)
        stored = service.store.score_for("E01", nfr_id)
        assert (stored.validity, stored.applicability) == (5, 4)

    def test_score_range_validation(self, service):
        ready_service(service)
        assignment = service.store.assignment_for("E01", SCORING)
        with pytest.raises(ValidationError):
            service.record_score("E01", assignment.nfr_ids[0], 6, 4)
        with pytest.raises(ValidationError):
            service.record_score("E01", assignment.nfr_ids[0], 5, 0)

    def test_unassigned_nfr_is_authorization_error(self, service):
        ready_service(service)
        with pytest.raises(AuthorizationError):
            service.record_score("E01", "mk-zz/FR-99/1", 5, 5)

    def test_alias_accepted_on_submission(self, service):
        ready_service(service)
        assignment = service.store.assignment_for("E01", SCORING)
        nfr_id = assignment.nfr_ids[0]
        service.record_score("E01", item_alias(nfr_id), 4, 4)
        assert service.store.score_for("E01", nfr_id) is not None

    def test_resubmission_replaces_and_audits(self, service):
        ready_service(service)
        assignment = service.store.assignment_for("E01", SELECTION)
        nfr_id = assignment.nfr_ids[0]
        service.record_selection("E01", nfr_id, "Security")
        service.record_selection("E01", nfr_id, "Reliability")
        stored = service.store.selection_for("E01", nfr_id)
        assert stored.chosen_attribute == "Reliability"
        entries = service.store.audit_entries()
        assert any(e["action"] == "selection_replaced" for e in entries)
        assert len(service.store.selections()) == 1

    def test_selection_unknown_attribute(self, service):
        ready_service(service)
        assignment = service.store.assignment_for("E01", SELECTION)
        with pytest.raises(ValidationError):
            service.record_selection("E01", assignment.nfr_ids[0], "Portability")

    def test_freeze_blocks_submissions(self, service):
        ready_service(service)
        assignment = service.store.assignment_for("E01", SCORING)
        service.record_score("E01", assignment.nfr_ids[0], 5, 5)
        service.freeze(SCORING)
        with pytest.raises(SampleFrozenError):
            service.record_score("E01", assignment.nfr_ids[0], 4, 4)

    def test_persistence_round_trip_across_reopen(self, tmp_path):
        path = tmp_path / "eval.db"
        store = EvalStore(path)
        service = EvalService(store, token_factory=token_counter())
        ready_service(service)
        assignment = service.store.assignment_for("E01", SCORING)
        service.record_score("E01", assignment.nfr_ids[0], 5, 4)
        expected_scores = store.scores()
        expected_assignments = store.assignments()
        store.close()

        reopened = EvalStore(path)
        assert reopened.scores() == expected_scores
        assert reopened.assignments() == expected_assignments
        assert reopened.evaluators() == make_evaluators(2)
        reopened.close()


class TestPayloads:
    def test_scoring_payload_shape(self, service):
        ready_service(service)
        payload = service.evaluator_payload("E01", SCORING)
        assert payload["task"] == SCORING
        assert payload["progress"]["total"] > 0
        assert set(payload["rubrics"]) == {"validity", "applicability"}
        assert len(payload["rubrics"]["validity"]) == 5
        item = payload["frs"][0]["nfrs"][0]
        assert "attribute" in item and "justification" in item
        assert "model_id" not in json.dumps(payload)

    def test_selection_payload_blind(self, service):
        ready_service(service)
        payload = service.evaluator_payload("E01", SELECTION)
        assert payload["options"] == list(quality.CANONICAL_NAMES)
        for group in payload["frs"]:
            for item in group["nfrs"]:
                assert set(item) == {"nfr_id", "text", "submitted"}
        body = json.dumps({k: v for k, v in payload.items() if k != "options"})
        for name in quality.CANONICAL_NAMES:
            assert name not in body
        for model_id in service.store.model_ids():
            assert model_id not in body

    def test_payload_for_unassigned_evaluator(self, service):
        ready_service(service)
        service.store.add_evaluators([Evaluator("E99", "X", 1, "QA")])
        with pytest.raises(NotFoundError):
            service.evaluator_payload("E99", SCORING)

    def test_submitted_values_rehydrate(self, service):
        ready_service(service)
        assignment = service.store.assignment_for("E01", SELECTION)
        nfr_id = assignment.nfr_ids[0]
        service.record_selection("E01", nfr_id, "Safety")
        payload = service.evaluator_payload("E01", SELECTION)
        submitted = [item["submitted"] for group in payload["frs"]
                     for item in group["nfrs"]
                     if item["nfr_id"] == item_alias(nfr_id)]
        assert submitted == ["Safety"]
        assert payload["progress"]["done"] == 1

    def test_tokens_issued_and_resolve(self, service):
        ready_service(service)
        token = service.store.token_for("E01")
        assert token is not None
        assert service.evaluator_for_token(token).evaluator_id == "E01"
        with pytest.raises(NotFoundError):
            service.evaluator_for_token("not-a-token")

    def test_payload_progress_counts(self, service):
        ready_service(service)
        assignment = service.store.assignment_for("E01", SCORING)
        for nfr_id in assignment.nfr_ids:
            service.record_score("E01", nfr_id, 5, 5)
        payload = service.evaluator_payload("E01", SCORING)
        assert payload["progress"]["done"] == payload["progress"]["total"]


class TestSampleLifecycle:
    def test_existing_sample_returned_when_params_match(self, service):
        seed_store(service.store)
        first = service.create_sample(SCORING, 4, seed=1)
        again = service.create_sample(SCORING, 4, seed=1)
        assert first == again

    def test_existing_sample_conflict_requires_force(self, service):
        seed_store(service.store)
        service.create_sample(SCORING, 4, seed=1)
        with pytest.raises(ValidationError, match="force"):
            service.create_sample(SCORING, 6, seed=2)
        replaced = service.create_sample(SCORING, 6, seed=2, force=True)
        assert len(replaced.members) == 6

    def test_second_task_excludes_first_task_frs(self, service):
        seed_store(service.store, n_models=2, n_frs=8, per_fr=2)
        refs = service.store.nfr_refs()
        scoring = service.create_sample(
            SCORING, 6, seed=1, allowed_fr_ids=[f"FR-{i + 1:02d}" for i in range(4)])
        selection = service.create_sample(SELECTION, 6, seed=2)
        scoring_frs = {refs[n].fr_id for n in scoring.members}
        selection_frs = {refs[n].fr_id for n in selection.members}
        assert scoring_frs.isdisjoint(selection_frs)


class TestRandomizedInvariants:
    def test_stratification_randomized(self):
        rng = random.Random(7)
        for _ in range(300):
            n_models = rng.randrange(1, 9)
            pools = {f"m{i}": rng.randrange(5, 40) for i in range(n_models)}
            target = rng.randrange(0, min(sum(pools.values()),
                                          min(pools.values()) * n_models) + 1)
            quotas = allocate_strata(pools, target, seed=rng.randrange(1000))
            assert sum(quotas.values()) == target
            if quotas:
                assert max(quotas.values()) - min(quotas.values()) <= 1
