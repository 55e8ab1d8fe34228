"""HTTP adapter for the annotation service.

Versioned JSON API under /api/v1; the browser UI is the reference
client. Tranche views never reveal which item is the qualifier.

    POST /api/v1/tranche  {volunteer_id}            -> tranche view
    POST /api/v1/submit   {tranche_id, answers[6]}  -> submission status
    GET  /api/v1/report                             -> agreement report
    GET  /api/v1/health                             -> liveness
"""

from __future__ import annotations

from typing import Optional

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from .annotation import (
    AnnotationService,
    DuplicateSubmissionError,
    PoolExhaustedError,
    QuotaExceededError,
    UnknownTrancheError,
)

API_VERSION = "v1"


class TrancheRequest(BaseModel):
    volunteer_id: str = Field(min_length=1)


class ItemView(BaseModel):
    position: int
    text: str


class TrancheView(BaseModel):
    tranche_id: str
    items: list[ItemView]
    completed: int
    quota: int


class Answer(BaseModel):
    intentful: bool
    abusive: bool


class SubmitRequest(BaseModel):
    tranche_id: str
    answers: list[Answer]


class SubmitResponse(BaseModel):
    status: str
    votes_recorded: int
    completed: int
    quota: int
    note: Optional[str] = None


def create_app(service: AnnotationService) -> FastAPI:
    app = FastAPI(title="annotation-service", version=API_VERSION)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.post(f"/api/{API_VERSION}/tranche", response_model=TrancheView)
    def issue_tranche(req: TrancheRequest) -> TrancheView:
        try:
            tranche = service.next_tranche(req.volunteer_id)
        except QuotaExceededError as exc:
            raise HTTPException(status_code=403, detail="quota_exhausted") from exc
        except PoolExhaustedError as exc:
            raise HTTPException(status_code=409, detail="pool_exhausted") from exc
        progress = service.progress(req.volunteer_id)
        return TrancheView(
            tranche_id=tranche.tranche_id,
            items=[
                ItemView(position=i, text=item.text)
                for i, item in enumerate(tranche.items)
            ],
            completed=progress["completed"],
            quota=progress["quota"],
        )

    @app.post(f"/api/{API_VERSION}/submit", response_model=SubmitResponse)
    def submit(req: SubmitRequest) -> SubmitResponse:
        try:
            tranche = service.tranches.get(req.tranche_id)
            if tranche is None:
                raise UnknownTrancheError(req.tranche_id)
            result = service.submit_tranche(
                req.tranche_id,
                [(a.intentful, a.abusive) for a in req.answers],
            )
        except UnknownTrancheError as exc:
            raise HTTPException(status_code=404, detail="unknown_tranche") from exc
        except DuplicateSubmissionError as exc:
            raise HTTPException(status_code=409, detail="duplicate_submission") from exc
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        progress = service.progress(tranche.volunteer_id)
        note = None
        if result["status"] == "discarded":
            note = (
                "This tranche was set aside by the study's qualification "
                "check and its answers were not counted."
            )
        return SubmitResponse(
            status=result["status"],
            votes_recorded=result["votes_recorded"],
            completed=progress["completed"],
            quota=progress["quota"],
            note=note,
        )

    @app.get(f"/api/{API_VERSION}/report")
    def report() -> dict:
        return service.agreement_report()

    @app.get(f"/api/{API_VERSION}/health")
    def health() -> dict:
        return {"status": "ok"}

    return app


def serve(service: AnnotationService, host: str = "127.0.0.1", port: int = 8765) -> None:
    import uvicorn

    uvicorn.run(create_app(service), host=host, port=port, log_level="warning")
