"""HTTP endpoints for rating sessions. All payloads JSON; images served as
PNG. No rater-facing response ever carries a ground-truth field."""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import Response
from PIL import Image
from pydantic import BaseModel

from .session import (
    TEST_KINDS, SessionError, SessionJournal, VttSession, create_session,
    finalize_session, record_response,
)


class CreateSessionBody(BaseModel):
    test_kind: str = "crop32_plain"
    n_each: int = 50
    seed: int | None = None
    allow_revisit: bool = False


class ResponseBody(BaseModel):
    item_id: str
    label: str


class ServiceState:
    def __init__(self, pools: dict[str, tuple[list[str], list[str]]],
                 journal_dir: str | Path):
        self.pools = pools
        self.journal = SessionJournal(journal_dir)
        self.sessions: dict[str, VttSession] = {}
        self.finalized: dict[str, dict] = {}
        self._seed_counter = 0

    def next_seed(self) -> int:
        self._seed_counter += 1
        return self._seed_counter


def pools_from_dirs(real_dir: str | Path, synt_dir: str | Path,
                    test_kind: str = "crop32_plain") -> dict:
    real = sorted(str(p) for p in Path(real_dir).glob("**/*.png"))
    synt = sorted(str(p) for p in Path(synt_dir).glob("**/*.png"))
    return {test_kind: (real, synt)}


def create_app(state: ServiceState) -> FastAPI:
    app = FastAPI(title="visual rating service")
    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
                       allow_headers=["*"])

    def get_session(session_id: str) -> VttSession:
        session = state.sessions.get(session_id)
        if session is None:
            raise HTTPException(404, f"unknown session {session_id}")
        return session

    @app.post("/sessions")
    def post_session(body: CreateSessionBody):
        if body.test_kind not in state.pools:
            raise HTTPException(400, f"no pools configured for {body.test_kind!r}; "
                                     f"available: {sorted(state.pools)}")
        real, synt = state.pools[body.test_kind]
        seed = body.seed if body.seed is not None else state.next_seed()
        try:
            session = create_session(real, synt, n_each=body.n_each,
                                     test_kind=body.test_kind, seed=seed,
                                     allow_revisit=body.allow_revisit)
        except ValueError as e:
            raise HTTPException(400, str(e))
        state.sessions[session.session_id] = session
        state.journal.log_created(session)
        return {"session_id": session.session_id, "test_kind": session.test_kind,
                "total_items": session.total}

    @app.get("/sessions/{session_id}/next")
    def get_next(session_id: str):
        session = get_session(session_id)
        item = session.current_item()
        if item is None:
            return {"done": True, "answered": len(session.responses),
                    "total": session.total}
        return {"done": False, "item_id": item.item_id,
                "index": len(session.responses), "total": session.total,
                "image_url": f"/sessions/{session_id}/items/{item.item_id}/image"}

    @app.get("/sessions/{session_id}/items/{item_id}/image")
    def get_image(session_id: str, item_id: str):
        session = get_session(session_id)
        item = session.item_by_id(item_id)
        if item is None:
            raise HTTPException(404, f"unknown item {item_id}")
        path = Path(item.image_ref)
        if path.exists():
            data = path.read_bytes()
        else:
            raise HTTPException(404, f"image file missing for {item_id}")
        return Response(content=data, media_type="image/png")

    @app.post("/sessions/{session_id}/responses")
    def post_response(session_id: str, body: ResponseBody):
        session = get_session(session_id)
        try:
            record_response(session, body.item_id, body.label)
        except SessionError as e:
            raise HTTPException(409, str(e))
        state.journal.log_response(session_id, body.item_id, body.label)
        return {"recorded": True, "answered": len(session.responses),
                "total": session.total, "complete": session.is_complete}

    @app.post("/sessions/{session_id}/finalize")
    def post_finalize(session_id: str):
        session = get_session(session_id)
        if session_id in state.finalized:   # idempotent
            return state.finalized[session_id]
        try:
            matrix, _audit = finalize_session(session)
        except SessionError as e:
            raise HTTPException(409, str(e))
        state.journal.log_finalized(session_id, matrix)
        payload = {"session_id": session_id, "test_kind": session.test_kind,
                   "accuracy": matrix.accuracy,
                   "real_selected_as_real": matrix.real_as_real,
                   "real_as_synt": matrix.real_as_synt,
                   "synt_as_real": matrix.synt_as_real,
                   "synt_as_synt": matrix.synt_as_synt}
        state.finalized[session_id] = payload
        return payload

    @app.get("/sessions/{session_id}/report")
    def get_report(session_id: str):
        if session_id not in state.finalized:
            raise HTTPException(409, "session not finalized")
        return state.finalized[session_id]

    return app


def make_phantom_image_file(path: Path, image: np.ndarray) -> None:
    Image.fromarray(image, mode="L").save(path)
