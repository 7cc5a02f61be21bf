"""HTTP JSON API over the curator store, consumed by the review UI and CLI."""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, HTTPException, Query
from fastapi.responses import FileResponse, JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .curator import (ConflictError, LabelStore, NotFoundError,
                      PendingProposalsError)
from .geo import InvalidInputError
from .io import _polygon_from_coords, _polygon_to_coords
from .segmenter import SegmenterConfig


class SessionRequest(BaseModel):
    phase: int
    cell_ids: list[str]


class DecisionRequest(BaseModel):
    action: str
    reviewer: str
    polygon: list | None = None  # GeoJSON Polygon coordinates


class PromoteRequest(BaseModel):
    entries: list[dict] | None = None
    allow_pending: bool = False


def create_app(store: LabelStore, segmenter_cfg: SegmenterConfig | None = None,
               ui_dir=None) -> FastAPI:
    cfg = segmenter_cfg or SegmenterConfig()
    app = FastAPI(title="agavescan curator")

    @app.exception_handler(NotFoundError)
    async def _not_found(_req, exc):
        return JSONResponse(status_code=404, content={"detail": str(exc)})

    @app.exception_handler(ConflictError)
    async def _conflict(_req, exc):
        return JSONResponse(status_code=409, content={"detail": str(exc)})

    @app.exception_handler(InvalidInputError)
    async def _invalid(_req, exc):
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.post("/sessions")
    def open_session(req: SessionRequest):
        session = store.open_session(req.phase, req.cell_ids)
        return {"session_id": session.session_id, "phase": session.phase,
                "cell_ids": session.cell_ids}

    @app.get("/sessions/{session_id}/progress")
    def progress(session_id: str):
        return store.session_progress(session_id)

    @app.post("/sessions/{session_id}/proposals/generate")
    def generate(session_id: str):
        enqueued, errors = store.generate_proposals(session_id, cfg)
        return {"enqueued": enqueued, "errors": errors}

    @app.get("/sessions/{session_id}/proposals")
    def list_proposals(session_id: str, status: str | None = None,
                       page: int = Query(1, ge=1), page_size: int = Query(50, ge=1)):
        session = store.sessions.get(session_id)
        if session is None:
            raise NotFoundError(f"unknown session {session_id}")
        props = store.list_proposals(status=status, phase=session.phase)
        start = (page - 1) * page_size
        items = []
        for p in props[start:start + page_size]:
            transform = _clip_transform(store, p.clip_id)
            items.append({
                "proposal_id": p.proposal_id,
                "clip_id": p.clip_id,
                "status": p.status,
                "score": p.score,
                "polygon": {"type": "Polygon",
                            "coordinates": _polygon_to_coords(p.polygon)},
                "clip_url": f"/clips/{p.clip_id}.png",
                "mask_url": f"/clips/{p.clip_id}/mask.png",
                "transform": transform,
            })
        return {"proposals": items, "total": len(props), "page": page}

    @app.get("/clips/{clip_id}.png")
    def clip_png(clip_id: str):
        path = store.clips_root / "clips" / f"{clip_id}.png"
        if not path.exists():
            raise NotFoundError(f"unknown clip {clip_id}")
        return FileResponse(path, media_type="image/png")

    @app.get("/clips/{clip_id}/mask.png")
    def mask_png(clip_id: str):
        path = store.clips_root / "masks" / f"{clip_id}.png"
        if not path.exists():
            raise NotFoundError(f"no mask for clip {clip_id}")
        return FileResponse(path, media_type="image/png")

    @app.get("/clips/{clip_id}/transform.json")
    def clip_transform(clip_id: str):
        transform = _clip_transform(store, clip_id)
        if transform is None:
            raise NotFoundError(f"no transform sidecar for clip {clip_id}")
        return transform

    @app.post("/proposals/{proposal_id}/decision")
    def decide(proposal_id: str, req: DecisionRequest):
        polygon = None
        if req.polygon is not None:
            polygon = _polygon_from_coords(req.polygon)
            if not polygon.is_simple():
                raise InvalidInputError("polygon is self-intersecting")
        prop = store.decide(proposal_id, req.action, req.reviewer, polygon)
        return prop.to_dict()

    @app.post("/phases/{phase}/promote")
    def promote(phase: int, req: PromoteRequest | None = None):
        req = req or PromoteRequest()
        try:
            ds = store.promote_phase(phase, new_entries=req.entries,
                                     allow_pending=req.allow_pending)
        except PendingProposalsError as exc:
            return JSONResponse(status_code=409, content={"detail": str(exc)})
        return store.dataset_report(ds.phase)

    @app.get("/phases/{phase}/report")
    def report(phase: int):
        return store.dataset_report(phase)

    if ui_dir is not None and Path(ui_dir).exists():
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app


def _clip_transform(store: LabelStore, clip_id: str) -> dict | None:
    import json as _json

    sidecar = store.clips_root / "clips" / f"{clip_id}.json"
    if sidecar.exists():
        return _json.loads(sidecar.read_text())
    return None
