"""HTTP JSON API over the evaluation service.

Evaluators authenticate with the opaque token issued at assignment time
(path segment on reads, X-Eval-Token header on writes); admin endpoints are
optionally guarded by a shared admin token. Errors use one shape:
{code, message, detail}.
"""
from __future__ import annotations

import io
import zipfile
from pathlib import Path
from tempfile import TemporaryDirectory

from fastapi import FastAPI, Header, Request, Response
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .. import analysis
from ..errors import (ArgumentError, AuthorizationError, CapacityError,
                      IntegrityError, NfrgenError, NotFoundError,
                      SampleFrozenError, ValidationError)
from .records import TASKS, Evaluator
from .service import EvalService

_ERROR_MAP: tuple[tuple[type, int, str], ...] = (
    (SampleFrozenError, 409, "sample_frozen"),
    (CapacityError, 409, "capacity_error"),
    (ValidationError, 400, "validation_error"),
    (AuthorizationError, 403, "authorization_error"),
    (NotFoundError, 404, "not_found"),
    (IntegrityError, 500, "integrity_error"),
    (ArgumentError, 400, "invalid_argument"),
)


def _error_response(exc: NfrgenError) -> JSONResponse:
    for cls, status, code in _ERROR_MAP:
        if isinstance(exc, cls):
            detail = {}
            if isinstance(exc, CapacityError):
                detail = {"requested": exc.requested, "available": exc.available}
            return JSONResponse(status_code=status, content={
                "code": code, "message": str(exc), "detail": detail})
    return JSONResponse(status_code=500, content={
        "code": "internal_error", "message": str(exc), "detail": {}})


class ScoreBody(BaseModel):
    nfr_id: str
    validity: int
    applicability: int


class SelectionBody(BaseModel):
    nfr_id: str
    attribute: str


class EvaluatorBody(BaseModel):
    evaluator_id: str
    display_name: str = ""
    years_experience: int = 0
    role_title: str = ""


class SampleBody(BaseModel):
    task: str
    n: int = Field(ge=0)
    seed: int = 0
    force: bool = False
    fr_pool: int | None = None


class AssignBody(BaseModel):
    frs_per_evaluator: int = 3
    seed: int = 0
    evaluators: list[EvaluatorBody] | None = None


class FreezeBody(BaseModel):
    task: str


def create_app(service: EvalService, *, static_dir: str | Path | None = None,
               admin_token: str | None = None) -> FastAPI:
    app = FastAPI(title="nfrgen evaluation service", docs_url=None, redoc_url=None)

    @app.exception_handler(NfrgenError)
    async def handle_domain_error(request: Request, exc: NfrgenError):
        return _error_response(exc)

    def check_admin(provided: str | None) -> None:
        if admin_token is not None and provided != admin_token:
            raise AuthorizationError("missing or invalid admin token")

    def resolve_token(token: str) -> str:
        return service.evaluator_for_token(token).evaluator_id

    @app.get("/api/assignments/{token}")
    def get_assignments(token: str):
        return service.assignments_summary(resolve_token(token))

    @app.get("/api/tasks/{token}/scoring")
    def get_scoring_task(token: str):
        return service.evaluator_payload(resolve_token(token), "scoring")

    @app.get("/api/tasks/{token}/selection")
    def get_selection_task(token: str):
        return service.evaluator_payload(resolve_token(token), "selection")

    @app.post("/api/scores")
    def post_score(body: ScoreBody, x_eval_token: str | None = Header(default=None)):
        if not x_eval_token:
            raise AuthorizationError("missing X-Eval-Token header")
        evaluator_id = resolve_token(x_eval_token)
        record = service.record_score(evaluator_id, body.nfr_id,
                                      body.validity, body.applicability)
        return {"stored": record.to_dict()}

    @app.post("/api/selections")
    def post_selection(body: SelectionBody,
                       x_eval_token: str | None = Header(default=None)):
        if not x_eval_token:
            raise AuthorizationError("missing X-Eval-Token header")
        evaluator_id = resolve_token(x_eval_token)
        record = service.record_selection(evaluator_id, body.nfr_id, body.attribute)
        return {"stored": record.to_dict()}

    @app.post("/api/admin/sample")
    def admin_sample(body: SampleBody,
                     x_admin_token: str | None = Header(default=None)):
        check_admin(x_admin_token)
        if body.task not in TASKS:
            raise ValidationError(f"unknown task {body.task!r}")
        allowed = None
        if body.fr_pool is not None:
            allowed = service.seeded_fr_pool(body.task, body.fr_pool, body.seed)
        sample = service.create_sample(body.task, body.n, body.seed,
                                       allowed_fr_ids=allowed, force=body.force)
        return {"sample_id": sample.sample_id, "task": sample.task,
                "size": len(sample.members), "strata": sample.strata}

    @app.post("/api/admin/assign")
    def admin_assign(body: AssignBody,
                     x_admin_token: str | None = Header(default=None)):
        check_admin(x_admin_token)
        evaluators = None
        if body.evaluators is not None:
            evaluators = [Evaluator(e.evaluator_id, e.display_name,
                                    e.years_experience, e.role_title)
                          for e in body.evaluators]
        assignments = service.assign(body.frs_per_evaluator, body.seed, evaluators)
        return {"assignments": [{
            "evaluator_id": a.evaluator_id, "task": a.task,
            "fr_ids": list(a.fr_ids), "nfr_count": len(a.nfr_ids),
        } for a in assignments]}

    @app.post("/api/admin/freeze")
    def admin_freeze(body: FreezeBody,
                     x_admin_token: str | None = Header(default=None)):
        check_admin(x_admin_token)
        service.freeze(body.task)
        return {"frozen": body.task}

    @app.get("/api/admin/export")
    def admin_export(format: str = "json",
                     x_admin_token: str | None = Header(default=None)):
        check_admin(x_admin_token)
        if format == "json":
            return analysis.export_document(service.store)
        if format == "csv":
            buffer = io.BytesIO()
            with TemporaryDirectory() as tmp:
                written = analysis.export_dataset(service.store, tmp, "csv")
                with zipfile.ZipFile(buffer, "w", zipfile.ZIP_DEFLATED) as archive:
                    for path in written:
                        archive.write(path, arcname=path.name)
            return Response(content=buffer.getvalue(), media_type="application/zip",
                            headers={"Content-Disposition":
                                     'attachment; filename="export.zip"'})
        raise ValidationError(f"unsupported export format {format!r}")

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app
