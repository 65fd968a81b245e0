from __future__ import annotations

import itertools

import pytest

from nfrgen.corpus import FrSubset, RequirementKind, RequirementRecord, SelectionStrategy
from nfrgen.evalsvc import EvalService, EvalStore, Evaluator
from nfrgen.gateway import Gateway, MockTransport, ModelConfig


def make_frs(n: int, prefix: str = "FR") -> list[RequirementRecord]:
    return [RequirementRecord(
        id=f"{prefix}-{i + 1:02d}",
        text=f"The system shall perform operation {i + 1:02d} on request.",
        kind=RequirementKind.FR) for i in range(n)]


def make_subset(n: int, seed: int = 0) -> FrSubset:
    return FrSubset(members=tuple(make_frs(n)), selection_seed=seed,
                    strategy=SelectionStrategy.EXPLICIT_LIST)


def make_models(n: int, provider: str = "mockprov") -> list[ModelConfig]:
    return [ModelConfig(model_id=f"mk-{chr(ord('a') + i)}", provider_id=provider,
                        max_retries=0) for i in range(n)]


def mock_gateway(transport: MockTransport | None = None,
                 provider: str = "mockprov", **kwargs) -> tuple[Gateway, MockTransport]:
    transport = transport or MockTransport()
    gw = Gateway(**kwargs)
    gw.register_provider(provider, transport)
    return gw, transport


def seed_store(store: EvalStore, *, n_models: int = 2, n_frs: int = 6,
               per_fr: int = 2, model_prefix: str = "mk") -> None:
    """Fill a store with synthetic FRs and NFRs (texts free of attribute names
    and model ids, so blindness scans have a clean baseline)."""
    from nfrgen import quality

    catalog = quality.CANONICAL_NAMES
    frs = [(f"FR-{i + 1:02d}", f"The system shall perform operation {i + 1:02d}.")
           for i in range(n_frs)]
    store.add_frs(frs)
    rows = []
    counter = itertools.count()
    for m in range(n_models):
        model_id = f"{model_prefix}-{chr(ord('a') + m)}"
        for fr_id, _ in frs:
            for k in range(per_fr):
                i = next(counter)
                rows.append({
                    "nfr_id": f"{model_id}/{fr_id}/{k + 1}",
                    "fr_id": fr_id,
                    "model_id": model_id,
                    "text": f"Item {i:03d} shall finish within {k + 2} seconds.",
                    "attribute": catalog[i % len(catalog)],
                    "subcharacteristic": None,
                    "justification": f"Implied by {fr_id}.",
                })
    store.add_nfrs(rows)


def make_evaluators(n: int) -> list[Evaluator]:
    return [Evaluator(f"E{i + 1:02d}", f"Evaluator {i + 1}", 5 + i, "Engineer")
            for i in range(n)]


def token_counter():
    counter = itertools.count(1)
    return lambda: f"tok-{next(counter):03d}"


@pytest.fixture
def service(tmp_path):
    store = EvalStore(tmp_path / "eval.db")
    svc = EvalService(store, token_factory=token_counter())
    yield svc
    store.close()
