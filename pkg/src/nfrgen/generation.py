"""Resumable generation pipeline: FR subset in, one validated artifact file
per model out, with every request and rejection accounted for."""
from __future__ import annotations

import json
import os
import re
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .corpus import FrSubset
from .errors import (ArgumentError, FormatVersionError, IntegrityError,
                     ResponseParseError, TransportError)
from .gateway import Gateway, ModelConfig, RawCompletion
from .prompting import (EntryRejection, GeneratedNfr, ParseContext, PromptSpec,
                        build_prompt, parse_llm_response)

FORMAT_VERSION = 1

STATUS_PENDING = "pending"
STATUS_PARTIAL = "partial"
STATUS_COMPLETE = "complete"
STATUS_FAILED = "failed"


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _new_run_id() -> str:
    stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%SZ")
    return f"run-{stamp}-{uuid.uuid4().hex[:8]}"


def _write_json_atomic(path: Path, payload: dict) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(payload, indent=2, ensure_ascii=False), encoding="utf-8")
    os.replace(tmp, path)


def sanitize_model_id(model_id: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]", "_", model_id)


def artifact_path(out_dir: Path, model_id: str) -> Path:
    return Path(out_dir) / f"LLM-{sanitize_model_id(model_id)}.json"


@dataclass
class CompletionNote:
    """One model response for a batch of FRs, kept for exactly-once bookkeeping."""

    fr_ids: list[str]
    request_fingerprint: str
    latency: float
    attempt_count: int
    timestamp: str
    status: str  # "ok" | "parse_failure"

    def to_dict(self) -> dict:
        return {
            "fr_ids": self.fr_ids,
            "request_fingerprint": self.request_fingerprint,
            "latency": self.latency,
            "attempt_count": self.attempt_count,
            "timestamp": self.timestamp,
            "status": self.status,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CompletionNote":
        return cls(fr_ids=list(data["fr_ids"]),
                   request_fingerprint=data["request_fingerprint"],
                   latency=data["latency"], attempt_count=data["attempt_count"],
                   timestamp=data["timestamp"], status=data["status"])


@dataclass
class TransportFailure:
    fr_ids: list[str]
    error: str
    status: int | None = None

    def to_dict(self) -> dict:
        return {"fr_ids": self.fr_ids, "error": self.error, "status": self.status}

    @classmethod
    def from_dict(cls, data: dict) -> "TransportFailure":
        return cls(fr_ids=list(data["fr_ids"]), error=data["error"],
                   status=data.get("status"))


@dataclass
class RunArtifact:
    """Per-model output file contents: entries plus full failure accounting."""

    model_id: str
    run_id: str
    prompt_fingerprint: str
    entries: list[GeneratedNfr] = field(default_factory=list)
    rejections: list[EntryRejection] = field(default_factory=list)
    completions: list[CompletionNote] = field(default_factory=list)
    failures: list[TransportFailure] = field(default_factory=list)

    def completed_fr_ids(self) -> set[str]:
        done: set[str] = set()
        for note in self.completions:
            done.update(note.fr_ids)
        return done

    def failed_fr_ids(self) -> set[str]:
        failed: set[str] = set()
        for failure in self.failures:
            failed.update(failure.fr_ids)
        return failed

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "run_id": self.run_id,
            "model_id": self.model_id,
            "prompt_fingerprint": self.prompt_fingerprint,
            "entries": [e.to_dict() for e in self.entries],
            "rejections": [r.to_dict() for r in self.rejections],
            "completions": [c.to_dict() for c in self.completions],
            "failures": [f.to_dict() for f in self.failures],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunArtifact":
        version = data.get("format_version")
        if version != FORMAT_VERSION:
            raise FormatVersionError(version, FORMAT_VERSION)
        return cls(
            model_id=data["model_id"],
            run_id=data["run_id"],
            prompt_fingerprint=data["prompt_fingerprint"],
            entries=[GeneratedNfr.from_dict(e) for e in data.get("entries", [])],
            rejections=[EntryRejection(r.get("fr_id"), r["reason"], r["raw_span"])
                        for r in data.get("rejections", [])],
            completions=[CompletionNote.from_dict(c) for c in data.get("completions", [])],
            failures=[TransportFailure.from_dict(f) for f in data.get("failures", [])],
        )


@dataclass
class GenerationRun:
    run_id: str
    subset: FrSubset
    models: list[ModelConfig]
    prompt_fingerprint: str
    batch_size: int
    statuses: dict[str, str] = field(default_factory=dict)
    counts: dict[str, int] = field(default_factory=dict)
    prompt_spec_meta: dict = field(default_factory=dict)
    created_at: str = field(default_factory=_utc_now)

    @property
    def total_nfrs(self) -> int:
        return sum(self.counts.values())

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "run_id": self.run_id,
            "created_at": self.created_at,
            "prompt_fingerprint": self.prompt_fingerprint,
            "batch_size": self.batch_size,
            "prompt_spec": self.prompt_spec_meta,
            "subset": self.subset.to_dict(),
            "models": [m.to_dict() for m in self.models],
            "statuses": dict(sorted(self.statuses.items())),
            "counts": dict(sorted(self.counts.items())),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GenerationRun":
        version = data.get("format_version")
        if version != FORMAT_VERSION:
            raise FormatVersionError(version, FORMAT_VERSION)
        run = cls(
            run_id=data["run_id"],
            subset=FrSubset.from_dict(data["subset"]),
            models=[ModelConfig.from_dict(m) for m in data["models"]],
            prompt_fingerprint=data["prompt_fingerprint"],
            batch_size=data.get("batch_size", 1),
            statuses=dict(data.get("statuses", {})),
            counts=dict(data.get("counts", {})),
            prompt_spec_meta=dict(data.get("prompt_spec", {})),
            created_at=data.get("created_at", _utc_now()),
        )
        known = {m.model_id for m in run.models}
        stray = (set(run.statuses) | set(run.counts)) - known
        if stray:
            raise IntegrityError(f"manifest references unknown model ids: {sorted(stray)}")
        return run


def manifest_path(out_dir: Path) -> Path:
    return Path(out_dir) / "run.json"


def _batches(subset: FrSubset, batch_size: int):
    members = list(subset.members)
    for i in range(0, len(members), batch_size):
        yield members[i:i + batch_size]


class _ModelWorker:
    """Queries one model over the subset and maintains its artifact file."""

    def __init__(self, config: ModelConfig, subset: FrSubset, spec: PromptSpec,
                 gateway: Gateway, out_dir: Path, artifact: RunArtifact,
                 batch_size: int):
        self.config = config
        self.subset = subset
        self.spec = spec
        self.gateway = gateway
        self.path = artifact_path(out_dir, config.model_id)
        self.artifact = artifact
        self.batch_size = batch_size
        self._write_lock = threading.Lock()

    def _flush(self) -> None:
        with self._write_lock:
            _write_json_atomic(self.path, self.artifact.to_dict())

    def pending_batches(self) -> list[list]:
        done = self.artifact.completed_fr_ids()
        pending = [r for r in self.subset.members if r.id not in done]
        return [pending[i:i + self.batch_size]
                for i in range(0, len(pending), self.batch_size)]

    def run(self, fr_concurrency: int = 1) -> None:
        batches = self.pending_batches()
        # Drop stale transport failures for pairs we are about to retry.
        retrying = {r.id for batch in batches for r in batch}
        self.artifact.failures = [f for f in self.artifact.failures
                                  if not set(f.fr_ids) & retrying]
        self._flush()
        if not batches:
            return
        if fr_concurrency <= 1:
            for batch in batches:
                self._process_batch(batch)
        else:
            with ThreadPoolExecutor(max_workers=fr_concurrency) as pool:
                futures = [pool.submit(self._process_batch, batch) for batch in batches]
                for future in futures:
                    future.result()

    def _process_batch(self, batch: list) -> None:
        fr_ids = [r.id for r in batch]
        prompt = build_prompt(self.spec.with_frs(tuple(batch)))
        try:
            completion: RawCompletion = self.gateway.query_model(self.config, prompt)
        except TransportError as exc:
            with self._write_lock:
                self.artifact.failures.append(TransportFailure(
                    fr_ids=fr_ids, error=str(exc), status=exc.status))
            self._flush()
            return
        ctx = ParseContext(fr_ids=frozenset(fr_ids), model_id=self.config.model_id)
        try:
            parsed = parse_llm_response(completion.text, ctx)
            status = "ok"
            entries, rejections = parsed.entries, parsed.rejections
        except ResponseParseError as exc:
            status = "parse_failure"
            entries = []
            rejections = [EntryRejection(fr_id, "unparsable response", exc.raw)
                          for fr_id in fr_ids]
        note = CompletionNote(
            fr_ids=fr_ids, request_fingerprint=completion.request_fingerprint,
            latency=completion.latency, attempt_count=completion.attempt_count,
            timestamp=completion.timestamp, status=status)
        with self._write_lock:
            self.artifact.entries.extend(entries)
            self.artifact.rejections.extend(rejections)
            self.artifact.completions.append(note)
        self._flush()

    def status(self) -> str:
        all_ids = set(self.subset.member_ids)
        done = self.artifact.completed_fr_ids()
        failed = self.artifact.failed_fr_ids()
        if all_ids and done >= all_ids:
            return STATUS_COMPLETE
        if all_ids and not done and failed >= all_ids:
            return STATUS_FAILED
        if done or failed:
            return STATUS_PARTIAL
        return STATUS_PENDING


def _execute(run: GenerationRun, spec: PromptSpec, gateway: Gateway, out_dir: Path,
             artifacts: dict[str, RunArtifact], *, model_concurrency: int,
             fr_concurrency: int) -> GenerationRun:
    out_dir = Path(out_dir)
    manifest_lock = threading.Lock()

    def finish(worker: _ModelWorker) -> None:
        with manifest_lock:
            run.statuses[worker.config.model_id] = worker.status()
            run.counts[worker.config.model_id] = len(worker.artifact.entries)
            _write_json_atomic(manifest_path(out_dir), run.to_dict())

    workers = [
        _ModelWorker(config, run.subset, spec, gateway, out_dir,
                     artifacts[config.model_id], run.batch_size)
        for config in run.models
        if run.statuses.get(config.model_id) != STATUS_COMPLETE
    ]
    try:
        if model_concurrency <= 1 or len(workers) <= 1:
            for worker in workers:
                worker.run(fr_concurrency)
                finish(worker)
        else:
            with ThreadPoolExecutor(max_workers=model_concurrency) as pool:
                futures = {pool.submit(worker.run, fr_concurrency): worker
                           for worker in workers}
                for future, worker in futures.items():
                    future.result()
                    finish(worker)
    finally:
        # Persist whatever progress exists even when a worker blew up, so an
        # interrupted run stays resumable.
        with manifest_lock:
            for worker in workers:
                run.statuses[worker.config.model_id] = worker.status()
                run.counts[worker.config.model_id] = len(worker.artifact.entries)
            _write_json_atomic(manifest_path(out_dir), run.to_dict())
    return run


def run_generation(subset: FrSubset, models: list[ModelConfig], spec: PromptSpec,
                   out_dir: str | Path, gateway: Gateway, *,
                   run_id: str | None = None, batch_size: int = 1,
                   model_concurrency: int = 4, fr_concurrency: int = 1) -> GenerationRun:
    """Attempt every (model, FR) pair exactly once and write one artifact file
    per model plus a run manifest, all before returning.

    Transport failures and parse rejections are recorded in the artifacts,
    never dropped; a model whose every request fails is marked failed while
    the rest of the run continues.
    """
    if not models:
        raise ArgumentError("run_generation requires at least one model")
    if len({m.model_id for m in models}) != len(models):
        raise ArgumentError("model ids must be unique within a run")
    if batch_size < 1:
        raise ArgumentError("batch_size must be >= 1")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    full_spec = spec.with_frs(subset.members)
    run = GenerationRun(
        run_id=run_id or _new_run_id(),
        subset=subset,
        models=list(models),
        prompt_fingerprint=full_spec.fingerprint(),
        batch_size=batch_size,
        statuses={m.model_id: STATUS_PENDING for m in models},
        counts={m.model_id: 0 for m in models},
        prompt_spec_meta={
            "techniques": sorted(spec.enabled_techniques),
            "exemplar": spec.exemplar,
        },
    )
    # Writing the manifest up front both records the run and verifies the
    # output directory is writable before any network traffic.
    _write_json_atomic(manifest_path(out_dir), run.to_dict())

    artifacts = {m.model_id: RunArtifact(model_id=m.model_id, run_id=run.run_id,
                                         prompt_fingerprint=run.prompt_fingerprint)
                 for m in models}
    return _execute(run, full_spec, gateway, out_dir, artifacts,
                    model_concurrency=model_concurrency, fr_concurrency=fr_concurrency)


def _load_manifest(out_dir: Path) -> GenerationRun:
    path = manifest_path(out_dir)
    if not path.exists():
        raise IntegrityError(f"no run manifest at {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise IntegrityError(f"run manifest is corrupt: {exc}") from exc
    return GenerationRun.from_dict(data)


def _rebuild_spec(run: GenerationRun) -> PromptSpec:
    meta = run.prompt_spec_meta
    spec = PromptSpec(
        frs=run.subset.members,
        enabled_techniques=frozenset(meta.get("techniques", [])),
        exemplar=meta.get("exemplar", ""),
    )
    if spec.fingerprint() != run.prompt_fingerprint:
        raise IntegrityError("manifest prompt fingerprint does not match its prompt spec")
    return spec


def resume_run(out_dir: str | Path, gateway: Gateway, *,
               run_id: str | None = None, model_concurrency: int = 4,
               fr_concurrency: int = 1) -> GenerationRun:
    """Re-query only (model, FR) pairs without a recorded completion.

    Models already complete are not touched at all, byte-for-byte; pairs that
    previously failed in transport are retried, pairs whose output was
    recorded (even unparsable output) are not.
    """
    out_dir = Path(out_dir)
    run = _load_manifest(out_dir)
    if run_id is not None and run_id != run.run_id:
        raise IntegrityError(f"manifest run_id {run.run_id!r} does not match {run_id!r}")
    spec = _rebuild_spec(run)
    artifacts: dict[str, RunArtifact] = {}
    for config in run.models:
        path = artifact_path(out_dir, config.model_id)
        if path.exists():
            try:
                artifact = RunArtifact.from_dict(json.loads(path.read_text(encoding="utf-8")))
            except json.JSONDecodeError as exc:
                raise IntegrityError(f"artifact {path.name} is corrupt: {exc}") from exc
            if artifact.run_id != run.run_id:
                raise IntegrityError(
                    f"artifact {path.name} belongs to run {artifact.run_id!r}")
            artifacts[config.model_id] = artifact
        else:
            artifacts[config.model_id] = RunArtifact(
                model_id=config.model_id, run_id=run.run_id,
                prompt_fingerprint=run.prompt_fingerprint)
    return _execute(run, spec, gateway, out_dir, artifacts,
                    model_concurrency=model_concurrency, fr_concurrency=fr_concurrency)


@dataclass
class LoadedRun:
    run: GenerationRun
    artifacts: list[RunArtifact]
    missing_models: list[str]

    def nfr_index(self) -> dict[str, GeneratedNfr]:
        return {e.nfr_id: e for a in self.artifacts for e in a.entries}


def load_run(out_dir: str | Path) -> LoadedRun:
    """Reconstruct a run and its artifacts, validating referential closure.

    Missing per-model files are reported as gaps rather than failing the
    load; entries referencing FRs outside the run subset fail it.
    """
    out_dir = Path(out_dir)
    run = _load_manifest(out_dir)
    subset_ids = set(run.subset.member_ids)
    artifacts: list[RunArtifact] = []
    missing: list[str] = []
    seen_nfr_ids: set[str] = set()
    for config in run.models:
        path = artifact_path(out_dir, config.model_id)
        if not path.exists():
            missing.append(config.model_id)
            continue
        artifact = RunArtifact.from_dict(json.loads(path.read_text(encoding="utf-8")))
        if artifact.model_id != config.model_id:
            raise IntegrityError(
                f"artifact {path.name} declares model {artifact.model_id!r}")
        for entry in artifact.entries:
            if entry.fr_id not in subset_ids:
                raise IntegrityError(
                    f"entry {entry.nfr_id!r} references fr_id {entry.fr_id!r} "
                    f"outside the run subset")
            if entry.nfr_id in seen_nfr_ids:
                raise IntegrityError(f"duplicate nfr_id {entry.nfr_id!r} across artifacts")
            seen_nfr_ids.add(entry.nfr_id)
        artifacts.append(artifact)
    return LoadedRun(run=run, artifacts=artifacts, missing_models=missing)
