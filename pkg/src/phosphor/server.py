"""HTTP serve mode: session plans, stimulus frames, and response collection.

Endpoints (all JSON, schema_version 1):

* ``GET /api/health``
* ``GET /api/session/{id}`` -- blinded plan: trial counts only, never clip
  ids, categories, or ground truth
* ``GET /api/stimulus/{id}/{trial}`` -- frame-bundle manifest (fps + URLs);
  practice trials additionally carry original-camera frame URLs
* ``GET /api/stimulus/{id}/{trial}/frame/{k}.png`` (and ``.../original/...``)
* ``POST /api/response`` -- idempotent per (session, practice, trial): first
  accept is 200, duplicates are 409, schema violations 422

Accepted responses append to ``responses/{session}.jsonl`` through a single
writer lock; a truncated final line (crash mid-append) is skipped on re-read.
"""

from __future__ import annotations

import io
import json
import threading
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, Response
from pydantic import BaseModel, Field

from . import pnm
from .session import SCHEMA_VERSION, SessionPlan, load_session


class TrialResponsePayload(BaseModel):
    saw_people: bool
    saw_cars: bool
    confidence: int = Field(ge=1, le=5)
    response_time_ms: float = Field(ge=0)


class ResponseEnvelope(BaseModel):
    schema_version: int = SCHEMA_VERSION
    session_id: str
    trial_index: int = Field(ge=0)
    practice: bool = False
    response: TrialResponsePayload
    client_timestamp: str = ""


def read_response_log(path) -> list[dict]:
    """Parse a JSON-lines response log, skipping a truncated final line."""
    path = Path(path)
    if not path.exists():
        return []
    records = []
    lines = path.read_text().split("\n")
    for i, line in enumerate(lines):
        if not line.strip():
            continue
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError:
            if i == len(lines) - 1 or (i == len(lines) - 2 and not lines[-1].strip()):
                import warnings

                warnings.warn(f"{path}: skipping truncated final line")
            else:
                raise
    return records


class _SessionState:
    def __init__(self, plan: SessionPlan, log_path: Path):
        self.plan = plan
        self.log_path = log_path
        self.lock = threading.Lock()
        self.seen: set[tuple[bool, int]] = {
            (bool(r.get("practice", False)), int(r["trial_index"]))
            for r in read_response_log(log_path)
        }


def create_app(sessions_dir, stimuli_dir, responses_dir, original_dir=None) -> FastAPI:
    """Build the serve-mode app over on-disk artifacts.

    ``sessions_dir`` holds ``{session_id}.json`` plans.  ``stimuli_dir`` holds
    rendered frames at ``{clip_id}/{strategy}_{grid}/frame_*.pgm``; practice
    clips live there too.  ``original_dir`` (defaults to stimuli_dir) holds
    raw camera frames at ``{clip_id}/frame_*.pgm`` for practice playback.
    """
    sessions_dir = Path(sessions_dir)
    stimuli_dir = Path(stimuli_dir)
    responses_dir = Path(responses_dir)
    responses_dir.mkdir(parents=True, exist_ok=True)
    original_dir = Path(original_dir) if original_dir is not None else stimuli_dir

    app = FastAPI(title="phosphor serve mode")
    states: dict[str, _SessionState] = {}
    states_lock = threading.Lock()

    def get_state(session_id: str) -> _SessionState:
        with states_lock:
            state = states.get(session_id)
            if state is None:
                plan_path = sessions_dir / f"{session_id}.json"
                if not plan_path.exists():
                    raise HTTPException(status_code=404, detail="unknown session")
                state = _SessionState(load_session(plan_path),
                                      responses_dir / f"{session_id}.jsonl")
                states[session_id] = state
            return state

    def get_trial(state: _SessionState, trial_index: int, practice: bool):
        trials = state.plan.practice_trials if practice else state.plan.trials
        if not 0 <= trial_index < len(trials):
            raise HTTPException(status_code=404, detail="unknown trial")
        return trials[trial_index]

    def trial_frame_dir(state, trial_index: int, practice: bool) -> Path:
        trial = get_trial(state, trial_index, practice)
        return stimuli_dir / trial.clip_id / f"{trial.strategy.value}_{trial.grid}"

    def frame_png(path: Path) -> Response:
        from PIL import Image

        if not path.exists():
            raise HTTPException(status_code=404, detail="missing frame")
        img = Image.fromarray(np.asarray(pnm.read_image(path)))
        buf = io.BytesIO()
        img.save(buf, format="PNG")
        return Response(content=buf.getvalue(), media_type="image/png")

    @app.get("/api/health")
    def health():
        return {"status": "ok", "schema_version": SCHEMA_VERSION}

    @app.get("/api/session/{session_id}")
    def session_info(session_id: str):
        state = get_state(session_id)
        # blinded: counts only; no clip ids, categories, or ground truth
        return {
            "schema_version": SCHEMA_VERSION,
            "session_id": session_id,
            "n_trials": len(state.plan.trials),
            "n_practice_trials": len(state.plan.practice_trials),
        }

    @app.get("/api/stimulus/{session_id}/{trial_index}")
    def stimulus_manifest(session_id: str, trial_index: int, practice: bool = False):
        state = get_state(session_id)
        frame_dir = trial_frame_dir(state, trial_index, practice)
        frames = sorted(frame_dir.glob("frame_*.pgm"))
        if not frames:
            raise HTTPException(status_code=404, detail="no frames for trial")
        meta_path = frame_dir / "render.json"
        fps = 25.0
        if meta_path.exists():
            fps = json.loads(meta_path.read_text()).get("fps", fps)
        flag = "?practice=true" if practice else ""
        base = f"/api/stimulus/{session_id}/{trial_index}"
        manifest = {
            "schema_version": SCHEMA_VERSION,
            "fps": fps,
            "n_frames": len(frames),
            "practice": practice,
            "frame_urls": [f"{base}/frame/{k}.png{flag}" for k in range(len(frames))],
        }
        if practice:
            trial = get_trial(state, trial_index, True)
            originals = sorted((original_dir / trial.clip_id).glob("frame_*.pgm"))
            manifest["original_frame_urls"] = [
                f"{base}/original/{k}.png{flag}" for k in range(len(originals))
            ]
        return manifest

    @app.get("/api/stimulus/{session_id}/{trial_index}/frame/{k}.png")
    def stimulus_frame(session_id: str, trial_index: int, k: int, practice: bool = False):
        state = get_state(session_id)
        frame_dir = trial_frame_dir(state, trial_index, practice)
        return frame_png(pnm.frame_path(frame_dir, "frame", k, "pgm"))

    @app.get("/api/stimulus/{session_id}/{trial_index}/original/{k}.png")
    def original_frame(session_id: str, trial_index: int, k: int, practice: bool = True):
        state = get_state(session_id)
        trial = get_trial(state, trial_index, practice)
        return frame_png(pnm.frame_path(original_dir / trial.clip_id, "frame", k, "pgm"))

    @app.post("/api/response")
    def post_response(envelope: ResponseEnvelope):
        state = get_state(envelope.session_id)
        get_trial(state, envelope.trial_index, envelope.practice)  # 404 on bad index
        key = (envelope.practice, envelope.trial_index)
        with state.lock:
            if key in state.seen:
                raise HTTPException(status_code=409, detail="duplicate trial response")
            with open(state.log_path, "a") as f:
                f.write(json.dumps(envelope.model_dump()) + "\n")
            state.seen.add(key)
        return {"status": "accepted", "trial_index": envelope.trial_index}

    return app
