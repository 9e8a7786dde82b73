"""HTTP editing service: sessions, edits, calibration, and direction listing.

State is read-only (generator, segmenter, banks) except for the in-memory
session map; per-session locks serialize operations on one session while
distinct sessions proceed concurrently. Images travel as base64 PNG so the
pixels a client displays are byte-identical to what the server rendered.
"""
from __future__ import annotations

import secrets
import threading
import uuid
from dataclasses import dataclass, field
from typing import Sequence

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .bank import DirectionBank
from .editing import (
    EditSession,
    DistanceMetric,
    MeanPixelL2,
    calibrate_alpha,
    pop_edit,
    push_edit,
    render,
    session_to_document,
)
from .errors import (
    FingerprintMismatch,
    LelsdError,
    UnknownDirection,
    UnknownSession,
)
from .generators import GeneratorBackend
from .imaging import encode_png_base64
from .latent import EditOp, LatentDirection
from .segmentation import SegmenterBackend
from .training import sample_latents

_ERROR_STATUS = {
    "UnknownSession": 404,
    "UnknownDirection": 404,
    "UnknownPart": 404,
    "SpaceMismatch": 409,
    "FingerprintMismatch": 409,
    "CalibrationOutOfRange": 409,
    "NonMonotoneDistance": 409,
    "UnsupportedCapability": 409,
    "UnsupportedVersion": 409,
}
_DEFAULT_ERROR_STATUS = 400


@dataclass
class ServiceState:
    backend: GeneratorBackend
    segmenter: SegmenterBackend
    banks: tuple[DirectionBank, ...]
    metric: DistanceMetric = field(default_factory=MeanPixelL2)
    sessions: dict[str, EditSession] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.banks = tuple(self.banks)
        for bank in self.banks:
            if bank.generator_fingerprint != self.backend.fingerprint:
                raise FingerprintMismatch(
                    f"bank was trained against generator {bank.generator_fingerprint[:12]}..., "
                    f"active generator is {self.backend.fingerprint[:12]}..."
                )
        self.directions: dict[str, tuple[LatentDirection, float]] = {}
        for bank in self.banks:
            for entry in bank.entries:
                self.directions[entry.name] = (bank.direction(entry.name), entry.final_score)
        self._sessions_lock = threading.Lock()
        self._session_locks: dict[str, threading.Lock] = {}

    def direction(self, name: str) -> LatentDirection:
        if name not in self.directions:
            raise UnknownDirection(f"no direction named {name!r} is loaded")
        return self.directions[name][0]

    def create_session(self, seed: int | None) -> tuple[EditSession, int]:
        if seed is None:
            seed = secrets.randbits(32)
        code = sample_latents(self.backend.space, 1, seed)[0]
        session = EditSession(uuid.uuid4().hex, code, self.backend.fingerprint)
        with self._sessions_lock:
            self.sessions[session.session_id] = session
            self._session_locks[session.session_id] = threading.Lock()
        return session, seed

    def session_lock(self, session_id: str) -> threading.Lock:
        with self._sessions_lock:
            if session_id not in self._session_locks:
                raise UnknownSession(f"no session {session_id!r}")
            return self._session_locks[session_id]

    def get_session(self, session_id: str) -> EditSession:
        with self._sessions_lock:
            if session_id not in self.sessions:
                raise UnknownSession(f"no session {session_id!r}")
            return self.sessions[session_id]

    def put_session(self, session: EditSession) -> None:
        with self._sessions_lock:
            self.sessions[session.session_id] = session


class SessionCreateRequest(BaseModel):
    seed: int | None = None


class EditRequest(BaseModel):
    direction: str
    alpha: float


class CalibrateRequest(BaseModel):
    direction: str
    distance: float


def create_app(state: ServiceState) -> FastAPI:
    app = FastAPI(title="lelsd editing service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.exception_handler(LelsdError)
    def _lelsd_error(_request: Request, exc: LelsdError) -> JSONResponse:
        status = _ERROR_STATUS.get(exc.code, _DEFAULT_ERROR_STATUS)
        return JSONResponse(status_code=status, content={"code": exc.code, "message": str(exc)})

    @app.exception_handler(RequestValidationError)
    def _validation_error(_request: Request, exc: RequestValidationError) -> JSONResponse:
        return JSONResponse(status_code=400, content={"code": "MalformedRequest", "message": str(exc.errors())})

    def _render_b64(session: EditSession) -> str:
        return encode_png_base64(render(session, state.backend))

    @app.post("/sessions")
    def create_session(body: SessionCreateRequest):
        session, seed = state.create_session(body.seed)
        return {"session_id": session.session_id, "seed": seed, "image": _render_b64(session)}

    @app.get("/directions")
    def list_directions():
        return {
            "directions": [
                {
                    "name": name,
                    "part": direction.part.name,
                    "layer_range": list(direction.layer_range),
                    "final_score": score,
                }
                for name, (direction, score) in state.directions.items()
            ]
        }

    @app.post("/sessions/{session_id}/edits")
    def push(session_id: str, body: EditRequest):
        direction = state.direction(body.direction)
        with state.session_lock(session_id):
            session = push_edit(state.get_session(session_id), EditOp(direction, body.alpha))
            state.put_session(session)
            return {"image": _render_b64(session), "stack_depth": len(session.edit_stack)}

    @app.delete("/sessions/{session_id}/edits")
    def pop(session_id: str):
        with state.session_lock(session_id):
            session = pop_edit(state.get_session(session_id))
            state.put_session(session)
            return {"image": _render_b64(session), "stack_depth": len(session.edit_stack)}

    @app.post("/sessions/{session_id}/calibrate")
    def calibrate(session_id: str, body: CalibrateRequest):
        direction = state.direction(body.direction)
        with state.session_lock(session_id):
            session = state.get_session(session_id)
        alpha_neg, alpha_pos = calibrate_alpha(session, direction, body.distance, state.metric, state.backend)
        return {"alpha_neg": alpha_neg, "alpha_pos": alpha_pos}

    @app.get("/sessions/{session_id}")
    def export_session(session_id: str):
        with state.session_lock(session_id):
            return session_to_document(state.get_session(session_id))

    return app


def build_service(
    backend: GeneratorBackend,
    segmenter: SegmenterBackend,
    banks: Sequence[DirectionBank],
    metric: DistanceMetric | None = None,
) -> FastAPI:
    state = ServiceState(backend, segmenter, tuple(banks), metric or MeanPixelL2())
    return create_app(state)
