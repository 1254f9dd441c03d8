"""FastAPI application exposing the interactive filtering session API.

Local tool: HTTP/JSON, no auth. Errors come back as {code, message, detail}
with conventional status codes (404 unknown ids, 409 busy or stale, 400 bad
parameters).
"""

from __future__ import annotations

import io
from functools import lru_cache
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Query, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, Response

from maskforge.errors import (
    BusyError,
    MaskforgeError,
    ParameterError,
    StaleStateError,
    ValidationError,
    VocabularyError,
)
from maskforge.service import schemas
from maskforge.service.state import Session, SessionStore

_STATUS = {
    BusyError: 409,
    StaleStateError: 409,
    VocabularyError: 400,
    ParameterError: 400,
    ValidationError: 422,
}


def _session_view(session: Session) -> schemas.SessionView:
    return schemas.SessionView(
        id=session.id,
        version=session.version,
        mask_count=len(session.masks),
        survivor_count=len(session.survivors),
        prompts=[{"text": p.text, "mode": p.mode, "tau": p.tau} for p in session.prompts],
        k=None if session.assignment is None else session.assignment.k,
        decisions=dict(session.decisions),
        resample_count=None if session.resample_ids is None else len(session.resample_ids),
        state_hash=session.state_hash(),
    )


def create_app(sessions_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="maskforge session service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    store = SessionStore(sessions_dir=sessions_dir)
    app.state.store = store

    @app.exception_handler(MaskforgeError)
    async def maskforge_error(request: Request, exc: MaskforgeError):
        status = next(
            (code for cls, code in _STATUS.items() if isinstance(exc, cls)), 400
        )
        body = schemas.ErrorBody(code=type(exc).__name__, message=str(exc))
        if isinstance(exc, VocabularyError):
            body.detail = {"known_tokens": exc.known}
        return JSONResponse(status_code=status, content=body.model_dump())

    @app.exception_handler(KeyError)
    async def not_found(request: Request, exc: KeyError):
        body = schemas.ErrorBody(code="NotFound", message=str(exc.args[0]) if exc.args else "")
        return JSONResponse(status_code=404, content=body.model_dump())

    # -- sessions -----------------------------------------------------------

    @app.post("/sessions", response_model=schemas.SessionView)
    def create_session(body: schemas.SessionCreateRequest):
        session = store.create_session(
            body.mask_path, body.embedding_path, body.frames_dir,
            body.dedup_tau, body.seed,
        )
        return _session_view(session)

    @app.get("/sessions/{session_id}", response_model=schemas.SessionView)
    def get_session(session_id: str):
        return _session_view(store.get(session_id))

    @app.get("/sessions/{session_id}/clusters", response_model=list[schemas.ClusterView])
    def get_clusters(session_id: str):
        return store.get(session_id).clusters_payload()

    @app.get(
        "/sessions/{session_id}/clusters/{cluster_id}/masks",
        response_model=schemas.ClusterMasksResponse,
    )
    def get_cluster_masks(
        session_id: str,
        cluster_id: int,
        page: int = Query(default=0, ge=0),
        page_size: int = Query(default=24, ge=1, le=200),
    ):
        session = store.get(session_id)
        if session.assignment is None or not 0 <= cluster_id < session.assignment.k:
            raise KeyError(f"unknown cluster {cluster_id}")
        members = session.assignment.members()[cluster_id]
        start = page * page_size
        return schemas.ClusterMasksResponse(
            cluster_id=cluster_id,
            mask_ids=members[start : start + page_size],
            page=page,
            page_size=page_size,
            total=len(members),
            pages=(len(members) + page_size - 1) // page_size,
        )

    @app.get("/sessions/{session_id}/histogram", response_model=schemas.HistogramResponse)
    def get_histogram(session_id: str):
        session = store.get(session_id)
        payload = session.histogram_payload()
        return schemas.HistogramResponse(version=session.version, **payload)

    @app.get("/sessions/{session_id}/state_hash", response_model=schemas.StateHashResponse)
    def get_state_hash(session_id: str):
        session = store.get(session_id)
        return schemas.StateHashResponse(state_hash=session.state_hash(),
                                         version=session.version)

    @app.get("/sessions/{session_id}/log", response_model=schemas.LogResponse)
    def get_log(session_id: str):
        return schemas.LogResponse(entries=store.get(session_id).log)

    # -- mutations ------------------------------------------------------------

    @app.post("/sessions/{session_id}/prompts", response_model=schemas.MutationResponse)
    def post_prompt(session_id: str, body: schemas.PromptRequest):
        result = store.mutate(
            session_id, "text_filter",
            {"text": body.text, "mode": body.mode, "tau": body.tau},
            expected_version=body.version,
        )
        return schemas.MutationResponse(result=result,
                                        session=_session_view(store.get(session_id)))

    @app.post(
        "/sessions/{session_id}/clusters/{cluster_id}/decision",
        response_model=schemas.MutationResponse,
    )
    def post_decision(session_id: str, cluster_id: int, body: schemas.DecisionRequest):
        result = store.mutate(
            session_id, "decision",
            {"cluster_id": cluster_id, "decision": body.decision},
            expected_version=body.version,
        )
        return schemas.MutationResponse(result=result,
                                        session=_session_view(store.get(session_id)))

    @app.post("/sessions/{session_id}/recluster", response_model=schemas.MutationResponse)
    def post_recluster(session_id: str, body: schemas.ReclusterRequest):
        result = store.mutate(session_id, "recluster", {"k": body.k},
                              expected_version=body.version)
        return schemas.MutationResponse(result=result,
                                        session=_session_view(store.get(session_id)))

    @app.post("/sessions/{session_id}/resample", response_model=schemas.MutationResponse)
    def post_resample(session_id: str, body: schemas.ResampleRequest):
        session = store.get(session_id)
        params = {"quota": body.quota,
                  "seed": body.seed if body.seed is not None else session.seed}
        result = store.mutate(session_id, "resample", params, expected_version=body.version)
        return schemas.MutationResponse(result=result,
                                        session=_session_view(store.get(session_id)))

    @app.post("/sessions/{session_id}/reset", response_model=schemas.MutationResponse)
    def post_reset(session_id: str):
        result = store.mutate(session_id, "reset", {})
        return schemas.MutationResponse(result=result,
                                        session=_session_view(store.get(session_id)))

    # -- jobs --------------------------------------------------------------------

    @app.post("/sessions/{session_id}/jobs", response_model=schemas.JobView)
    def post_job(session_id: str, body: schemas.JobRequest):
        job = store.launch_job(session_id, body.kind, body.params)
        return schemas.JobView(**job.to_json())

    @app.get("/jobs/{job_id}", response_model=schemas.JobView)
    def get_job(job_id: str):
        return schemas.JobView(**store.get_job(job_id).to_json())

    # -- thumbnails ----------------------------------------------------------------

    @lru_cache(maxsize=512)
    def render_thumb(mask_id: str) -> bytes:
        session, mask = store.find_mask(mask_id)
        bitmap = mask.decode()
        x, y, w, h = mask.bbox
        pad = 2
        x0, y0 = max(0, x - pad), max(0, y - pad)
        x1, y1 = min(mask.width, x + w + pad), min(mask.height, y + h + pad)
        crop_mask = bitmap[y0:y1, x0:x1]
        frame_path = None
        if session.frames_dir:
            frame_path = Path(session.frames_dir) / f"{mask.frame_id}.png"
        if frame_path is not None and frame_path.exists():
            from maskforge.core.serial import load_png

            pixels = load_png(frame_path)[y0:y1, x0:x1].astype(np.float64)
            pixels[~crop_mask] *= 0.35  # dim everything outside the mask
            rgb = np.clip(pixels, 0, 255).astype(np.uint8)
        else:
            rgb = np.repeat(np.where(crop_mask[..., None], 230, 32).astype(np.uint8),
                            3, axis=2)
        from PIL import Image

        image = Image.fromarray(rgb, mode="RGB")
        scale = max(1, 96 // max(image.size))
        if scale > 1:
            image = image.resize((image.width * scale, image.height * scale),
                                 Image.NEAREST)
        buf = io.BytesIO()
        image.save(buf, format="PNG")
        return buf.getvalue()

    @app.get("/masks/{mask_id:path}/thumb.png")
    def get_thumb(mask_id: str):
        return Response(content=render_thumb(mask_id), media_type="image/png")

    return app
