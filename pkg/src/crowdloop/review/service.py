"""HTTP facade over the review store for human adjudicators.

Auth is a shared token in the X-Review-Token header, configured through the
CROWDLOOP_TOKEN environment variable (no token configured = open instance,
for local use).  /export/final always recomputes the merge from the
resolution log, so what it serves is by construction the log replay.
"""

from __future__ import annotations

import os
from typing import Optional

from fastapi import Depends, FastAPI, HTTPException, Query, Request, Response
from pydantic import BaseModel, Field

from ..consensus import ConsensusResult
from ..jsonio import dumps_canonical
from .store import LabelValidationError, Resolution, ReviewConflict, ReviewStore

TOKEN_ENV = "CROWDLOOP_TOKEN"
TOKEN_HEADER = "X-Review-Token"


class ResolutionIn(BaseModel):
    reviewer_id: str
    final_name: Optional[str] = None
    final_explanation: Optional[str] = None
    final_labels: dict[str, Optional[str]] = Field(default_factory=dict)
    rule_tag: Optional[int] = None
    decided_at: str = ""


def _summarize(item) -> dict:
    votes = item.votes.get("votes", [])
    provisional = item.provisional or {}
    return {
        "item_id": item.item_id,
        "record_id": item.record_id,
        "task": item.task,
        "status": item.status,
        "consistency": provisional.get("consistency"),
        "provisional_label": provisional.get("label"),
        "n_votes": len(votes),
        "n_failures": len(item.votes.get("failures", [])),
        "context": item.context,
    }


def create_app(
    store: ReviewStore,
    consensus_results: Optional[list[ConsensusResult]] = None,
    token: Optional[str] = None,
) -> FastAPI:
    app = FastAPI(title="crowdloop review service")
    expected_token = token if token is not None else os.environ.get(TOKEN_ENV)
    consensus_results = consensus_results or []

    def auth(request: Request) -> None:
        if expected_token and request.headers.get(TOKEN_HEADER) != expected_token:
            raise HTTPException(status_code=401, detail="missing or invalid review token")

    @app.get("/healthz")
    def healthz():
        return {"ok": True}

    @app.get("/queue", dependencies=[Depends(auth)])
    def queue(
        status: str = Query("pending"),
        limit: int = Query(50, ge=1, le=1000),
    ):
        if status == "pending":
            items = store.pending(limit)
        else:
            items = [i for i in store.items() if i.status == status][:limit]
        return {
            "items": [_summarize(i) for i in items],
            "progress": store.progress(),
        }

    @app.get("/items/{item_id}", dependencies=[Depends(auth)])
    def get_item(item_id: str):
        try:
            item = store.get(item_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"no item {item_id!r}")
        return item.to_dict()

    @app.post("/items/{item_id}/resolution", dependencies=[Depends(auth)])
    def resolve(item_id: str, body: ResolutionIn):
        resolution = Resolution(
            item_id=item_id,
            reviewer_id=body.reviewer_id,
            final_name=body.final_name,
            final_explanation=body.final_explanation,
            final_labels={k: v for k, v in body.final_labels.items()},
            rule_tag=body.rule_tag,
            decided_at=body.decided_at,
        )
        try:
            return store.resolve(item_id, resolution)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"no item {item_id!r}")
        except LabelValidationError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        except ReviewConflict as exc:
            raise HTTPException(
                status_code=409,
                detail={"message": str(exc), "existing": exc.existing},
            )

    @app.post("/items/{item_id}/claim", dependencies=[Depends(auth)])
    def claim(item_id: str, body: dict):
        # advisory only: records who opened the item, never blocks a resolve
        reviewer = str(body.get("reviewer_id", ""))
        try:
            store.claim(item_id, reviewer)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"no item {item_id!r}")
        return {"status": "claimed", "item_id": item_id, "reviewer_id": reviewer}

    @app.post("/items/{item_id}/skip", dependencies=[Depends(auth)])
    def skip(item_id: str):
        try:
            return store.skip(item_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"no item {item_id!r}")
        except ReviewConflict as exc:
            raise HTTPException(status_code=409, detail={"message": str(exc)})

    @app.get("/progress", dependencies=[Depends(auth)])
    def progress():
        return store.progress()

    @app.get("/codebook", dependencies=[Depends(auth)])
    def codebook():
        if store.codebook is None:
            raise HTTPException(status_code=404, detail="no codebook configured")
        return store.codebook.to_dict()

    @app.get("/export/final", dependencies=[Depends(auth)])
    def export_final():
        from .store import merge_final_dataset

        pairs = merge_final_dataset(
            consensus_results, store.resolutions(), store.items(), codebook=store.codebook
        )
        body = "".join(dumps_canonical(p.to_dict()) + "\n" for p in pairs)
        return Response(content=body, media_type="application/x-ndjson")

    return app
