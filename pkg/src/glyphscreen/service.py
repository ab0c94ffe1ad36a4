"""Screening HTTP service: live dictation sessions against trained models.

A session dictates the 36 glyphs (or a stored discriminative-15 subset) in
a seeded random order; each submitted drawing is scored immediately with
the same single-recording forward pass the offline tools use, so API
scores are bit-identical to offline scoring. Sessions persist as an
append-only event log plus a snapshot rewritten after every event; on
restart the log is replayed when it is ahead of the snapshot.

Endpoints (JSON): POST /sessions, POST /sessions/{id}/glyphs,
GET /sessions/{id}, GET /sessions/{id}/report, GET /models,
GET /models/{id}/discriminative, POST /echo. Errors carry
{"error": {"code", "detail"}} with machine-readable codes.
"""

from __future__ import annotations

import datetime
import glob
import json
import os
import threading
import uuid

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .glyphs import ALL_GLYPHS, REAL_GLYPHS, glyph_index
from .recording import GlyphRecording, RecordingError, SamplePoint
from .recognizer import TrainedRecognizer, load_model, score_recording
from .diagnosis import Calibration, ChildSession, diagnose


class ApiError(Exception):
    def __init__(self, status: int, code: str, detail: str):
        self.status = status
        self.code = code
        self.detail = detail


class CreateSessionBody(BaseModel):
    model_id: str
    mode: str = "full36"
    seed: int = 0


class SubmitGlyphBody(BaseModel):
    glyph: str
    samples: list


class EchoBody(BaseModel):
    samples: list


def _samples_from_rows(rows) -> list[SamplePoint]:
    try:
        return [
            SamplePoint(t=float(r[0]), x=float(r[1]), y=float(r[2]),
                        pen_down=bool(r[3]),
                        pressure=None if r[4] is None else float(r[4]))
            for r in rows
        ]
    except (TypeError, ValueError, IndexError) as exc:
        raise ApiError(422, "invalid_samples", f"malformed sample rows: {exc}") from exc


def _rows_from_samples(samples: list[SamplePoint]) -> list:
    return [[s.t, s.x, s.y, 1 if s.pen_down else 0, s.pressure] for s in samples]


class SessionStore:
    """In-memory registry with an event log + snapshot on disk per session."""

    def __init__(self, data_dir: str):
        self.data_dir = data_dir
        os.makedirs(data_dir, exist_ok=True)
        self._registry_lock = threading.Lock()
        self._locks: dict[str, threading.Lock] = {}
        self.sessions: dict[str, dict] = {}
        self._load_existing()

    def _snapshot_path(self, sid: str) -> str:
        return os.path.join(self.data_dir, f"{sid}.json")

    def _log_path(self, sid: str) -> str:
        return os.path.join(self.data_dir, f"{sid}.log.jsonl")

    def _load_existing(self) -> None:
        for log_path in glob.glob(os.path.join(self.data_dir, "*.log.jsonl")):
            sid = os.path.basename(log_path)[:-len(".log.jsonl")]
            state = None
            snap = self._snapshot_path(sid)
            if os.path.exists(snap):
                with open(snap, encoding="utf-8") as fh:
                    state = json.load(fh)
            with open(log_path, encoding="utf-8") as fh:
                events = [json.loads(line) for line in fh if line.strip()]
            state = self._replay(state, events)
            if state is not None:
                self.sessions[sid] = state
                self._locks[sid] = threading.Lock()

    @staticmethod
    def _replay(state: dict | None, events: list[dict]) -> dict | None:
        for event in events:
            if event["event"] == "created":
                if state is None:
                    state = event["state"]
            elif event["event"] == "glyph_scored":
                if state is not None and event["glyph"] not in state["scores"]:
                    state["scores"][event["glyph"]] = event["score"]
                    state["degenerate"] = sorted(set(state.get("degenerate", []))
                                                 | ({event["glyph"]} if event["flagged"] else set()))
                    state["samples"][event["glyph"]] = event["samples"]
        if state is not None:
            done = all(g in state["scores"] for g in state["dictation_order"])
            state["status"] = "complete" if done else "open"
        return state

    def lock(self, sid: str) -> threading.Lock:
        with self._registry_lock:
            if sid not in self._locks:
                raise ApiError(404, "session_not_found", f"no session {sid}")
            return self._locks[sid]

    def get(self, sid: str) -> dict:
        with self._registry_lock:
            if sid not in self.sessions:
                raise ApiError(404, "session_not_found", f"no session {sid}")
            return self.sessions[sid]

    def create(self, state: dict) -> None:
        sid = state["session_id"]
        with self._registry_lock:
            self.sessions[sid] = state
            self._locks[sid] = threading.Lock()
        self._append_event(sid, {"event": "created", "state": state})
        self._write_snapshot(sid)

    def record_score(self, sid: str, glyph: str, score: float, flagged: bool,
                     samples: list) -> None:
        self._append_event(sid, {
            "event": "glyph_scored", "glyph": glyph, "score": score,
            "flagged": flagged, "samples": samples,
            "at": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        })
        self._write_snapshot(sid)

    def _append_event(self, sid: str, event: dict) -> None:
        with open(self._log_path(sid), "a", encoding="utf-8") as fh:
            fh.write(json.dumps(event, sort_keys=True) + "\n")

    def _write_snapshot(self, sid: str) -> None:
        path = self._snapshot_path(sid)
        tmp = path + ".tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(self.sessions[sid], fh, sort_keys=True)
        os.replace(tmp, path)


def _public_state(state: dict) -> dict:
    return {
        "session_id": state["session_id"],
        "created_at": state["created_at"],
        "model_id": state["model_id"],
        "mode": state["mode"],
        "seed": state["seed"],
        "dictation_order": state["dictation_order"],
        "scores": state["scores"],
        "degenerate": state.get("degenerate", []),
        "remaining": [g for g in state["dictation_order"] if g not in state["scores"]],
        "status": state["status"],
    }


def create_app(model_dir: str, data_dir: str = "sessions") -> FastAPI:
    app = FastAPI(title="glyphscreen screening service")
    models: dict[str, TrainedRecognizer] = {}
    for path in sorted(glob.glob(os.path.join(model_dir, "*.gsmodel"))):
        models[os.path.splitext(os.path.basename(path))[0]] = load_model(path)
    store = SessionStore(data_dir)

    @app.exception_handler(ApiError)
    async def _api_error(_request: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status,
                            content={"error": {"code": exc.code, "detail": exc.detail}})

    def _model(model_id: str) -> TrainedRecognizer:
        if model_id not in models:
            raise ApiError(404, "model_not_found", f"no model {model_id}")
        return models[model_id]

    def _calibration(model: TrainedRecognizer) -> Calibration:
        info = model.extras.get("calibration")
        if not info:
            raise ApiError(409, "model_uncalibrated",
                           "model container has no embedded calibration")
        return Calibration(threshold=info["threshold"], rate=info["rate"],
                           source=info.get("source", ""))

    @app.get("/models")
    def list_models():
        return {"models": [{
            "model_id": mid,
            "kind": m.kind,
            "calibration": m.extras.get("calibration"),
            "has_discriminative": bool(m.extras.get("discriminative")),
        } for mid, m in sorted(models.items())]}

    @app.get("/models/{model_id}/discriminative")
    def model_discriminative(model_id: str):
        model = _model(model_id)
        stored = model.extras.get("discriminative")
        if not stored:
            raise ApiError(404, "no_discriminative_ranking",
                           f"model {model_id} has no stored ranking")
        return stored

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSessionBody):
        model = _model(body.model_id)
        if body.mode == "full36":
            glyphs = list(REAL_GLYPHS)
        elif body.mode == "discriminative15":
            stored = model.extras.get("discriminative")
            if not stored:
                raise ApiError(409, "no_discriminative_ranking",
                               "model has no stored discriminative subset")
            glyphs = list(stored["subset"])
        else:
            raise ApiError(422, "invalid_mode", f"unknown mode {body.mode!r}")
        order = [glyphs[i] for i in
                 np.random.Generator(np.random.PCG64(body.seed)).permutation(len(glyphs))]
        state = {
            "session_id": uuid.uuid4().hex,
            "created_at": datetime.datetime.now(datetime.timezone.utc).isoformat(),
            "model_id": body.model_id,
            "mode": body.mode,
            "seed": body.seed,
            "dictation_order": order,
            "scores": {},
            "degenerate": [],
            "samples": {},
            "status": "open",
        }
        store.create(state)
        return _public_state(state)

    @app.get("/sessions/{sid}")
    def get_session(sid: str):
        return _public_state(store.get(sid))

    @app.post("/sessions/{sid}/glyphs")
    def submit_glyph(sid: str, body: SubmitGlyphBody):
        lock = store.lock(sid)
        with lock:
            state = store.get(sid)
            if state["status"] == "complete":
                raise ApiError(409, "session_complete", "session already complete")
            if body.glyph not in state["dictation_order"]:
                raise ApiError(422, "glyph_not_in_session",
                               f"glyph {body.glyph!r} is not dictated in this session")
            if body.glyph in state["scores"]:
                raise ApiError(409, "duplicate_glyph",
                               f"glyph {body.glyph!r} already scored")
            samples = _samples_from_rows(body.samples)
            try:
                rec = GlyphRecording(child_id=sid, group="TD", requested=body.glyph,
                                     samples=samples)
            except RecordingError as exc:
                raise ApiError(422, "invalid_samples", str(exc)) from exc
            model = _model(state["model_id"])
            probs, degenerate = score_recording(model, rec)
            score = float(probs[glyph_index(body.glyph)])

            state["scores"][body.glyph] = score
            if degenerate:
                state["degenerate"] = sorted(set(state["degenerate"]) | {body.glyph})
            state["samples"][body.glyph] = _rows_from_samples(samples)
            if all(g in state["scores"] for g in state["dictation_order"]):
                state["status"] = "complete"
            store.record_score(sid, body.glyph, score, degenerate,
                               state["samples"][body.glyph])

            top = np.argsort(-probs)[:5]
            running = float(np.mean([state["scores"][g] for g in state["dictation_order"]
                                     if g in state["scores"]]))
            return {
                "glyph": body.glyph,
                "probabilities": [{"glyph": ALL_GLYPHS[i], "p": float(probs[i])}
                                  for i in top],
                "requested_score": score,
                "running_d": running,
                "degenerate": degenerate,
                "remaining": [g for g in state["dictation_order"]
                              if g not in state["scores"]],
                "status": state["status"],
            }

    @app.get("/sessions/{sid}/report")
    def session_report(sid: str):
        state = store.get(sid)
        missing = [g for g in state["dictation_order"] if g not in state["scores"]]
        if missing:
            raise ApiError(409, "session_incomplete",
                           f"missing glyphs: {','.join(missing)}")
        model = _model(state["model_id"])
        cal = _calibration(model)
        session = ChildSession(child_id=sid, group="TD", recordings={},
                               scores={g: float(s) for g, s in state["scores"].items()})
        subset = None if state["mode"] == "full36" else tuple(state["dictation_order"])
        report = diagnose(session, cal, subset=subset)
        payload = report.to_json_dict()
        payload["mode"] = state["mode"]
        payload["degenerate"] = state.get("degenerate", [])
        return payload

    @app.post("/echo")
    def echo(body: EchoBody):
        samples = _samples_from_rows(body.samples)
        return {"samples": _rows_from_samples(samples)}

    return app
