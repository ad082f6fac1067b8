"""Local HTTP service: session storage, annotations, decomposition previews,
training/evaluation, and the live monitor feed.

Handlers are thin wrappers over library calls; persistence is plain files
under a data directory with crash-safe write-temp-then-rename updates.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
import uuid
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Query, Request, Response
from fastapi.responses import JSONResponse, StreamingResponse
from fastapi.staticfiles import StaticFiles

from . import __version__
from .decompose import (
    BatemanParams,
    DecomposeConfig,
    cda,
    dda,
    decomposition_to_json,
    discrete_decomposition_to_json,
)
from .errors import HydramonError, InvalidAnnotation
from .features import FeaturizeConfig, featurize_session, merge_datasets
from .learn import (
    ModelSpec,
    cross_validate,
    load_model,
    render_report,
    save_model,
)
from .preprocess import PreprocessConfig, preprocess_pipeline
from .signal_core import (
    AnnotationTrack,
    HydrationLevel,
    SessionRecording,
    annotations_from_json,
    annotations_to_json,
    parse_e4_csv,
    serialize_e4_csv,
)
from .stream import InProcessSink, StreamConfig, StreamEngine

DEFAULT_DATA_DIR = "~/.hydramon"
DEFAULT_BIND_ADDR = "127.0.0.1:8764"


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


class SessionStore:
    """File-backed session index; one directory per session."""

    def __init__(self, root: str | Path | None = None):
        root = root or os.environ.get("HYDRA_DATA_DIR", DEFAULT_DATA_DIR)
        self.root = Path(root).expanduser()
        self.root.mkdir(parents=True, exist_ok=True)
        (self.root / "sessions").mkdir(exist_ok=True)
        (self.root / "models").mkdir(exist_ok=True)
        self._lock = threading.Lock()
        self._index_path = self.root / "index.json"
        if not self._index_path.exists():
            _atomic_write(self._index_path, json.dumps({"v": 1, "sessions": {}}))

    # -- index ---------------------------------------------------------------

    def _read_index(self) -> dict:
        return json.loads(self._index_path.read_text())

    def _write_index(self, index: dict) -> None:
        _atomic_write(self._index_path, json.dumps(index, indent=2))

    def list_sessions(self) -> list[dict]:
        index = self._read_index()
        return sorted(index["sessions"].values(), key=lambda e: e["id"])

    def session_dir(self, session_id: str) -> Path:
        return self.root / "sessions" / session_id

    # -- sessions ------------------------------------------------------------

    def create_session(self, csv_text: str, subject: str = "unknown") -> dict:
        series = parse_e4_csv(csv_text)
        session_id = uuid.uuid4().hex[:12]
        sdir = self.session_dir(session_id)
        sdir.mkdir(parents=True)
        _atomic_write(sdir / "raw.csv", csv_text)
        entry = {
            "id": session_id,
            "subject": subject,
            "rate": series.rate,
            "start_time": series.start_time,
            "n_samples": len(series),
            "duration": series.duration,
        }
        with self._lock:
            index = self._read_index()
            index["sessions"][session_id] = entry
            self._write_index(index)
        return entry

    def get_entry(self, session_id: str) -> dict | None:
        return self._read_index()["sessions"].get(session_id)

    def load_recording(self, session_id: str) -> SessionRecording:
        sdir = self.session_dir(session_id)
        series = parse_e4_csv((sdir / "raw.csv").read_text())
        track, spans = None, []
        ann = self._read_annotations(session_id)
        if ann is not None:
            track, spans = annotations_from_json(ann["doc"])
        entry = self.get_entry(session_id)
        rec = SessionRecording(session_id, entry["subject"], series,
                               artifact_spans=tuple(spans))
        if track is not None:
            rec = rec.with_annotations(track)
        return rec

    # -- annotations (revision CAS) -------------------------------------------

    def _read_annotations(self, session_id: str) -> dict | None:
        path = self.session_dir(session_id) / "annotations.json"
        if not path.exists():
            return None
        return json.loads(path.read_text())

    def get_annotations(self, session_id: str) -> dict:
        ann = self._read_annotations(session_id)
        if ann is None:
            empty = annotations_to_json(
                AnnotationTrack(HydrationLevel.WELL_HYDRATED), [])
            return {"revision": 0, "doc": empty}
        return ann

    def put_annotations(self, session_id: str, doc: dict, revision: int) -> dict:
        annotations_from_json(doc)  # validate before writing
        with self._lock:
            current = self._read_annotations(session_id)
            current_rev = 0 if current is None else current["revision"]
            if revision != current_rev:
                raise StaleRevision(current_rev)
            record = {"revision": current_rev + 1, "doc": doc}
            _atomic_write(self.session_dir(session_id) / "annotations.json",
                          json.dumps(record, indent=2))
        return record

    # -- decomposition cache ---------------------------------------------------

    def decomposition(self, session_id: str, method: str, tau: tuple,
                      preprocess: PreprocessConfig,
                      config: DecomposeConfig) -> tuple[dict, bool]:
        key = json.dumps({
            "method": method, "tau": list(tau),
            "pre": [preprocess.cutoff_hz, preprocess.filter_order,
                    preprocess.hanning_width],
            "cfg": [config.amp_threshold, config.onset_fraction,
                    config.tonic_smooth_s, config.driver_smooth_s,
                    config.slew, config.mask_threshold],
        }, sort_keys=True)
        digest = hashlib.sha256(key.encode()).hexdigest()[:16]
        path = self.session_dir(session_id) / f"decomp_{digest}.json"
        if path.exists():
            return json.loads(path.read_text()), True
        rec = self.load_recording(session_id)
        series = preprocess_pipeline(rec, preprocess)
        params = BatemanParams(*tau)
        if method == "cda":
            doc = decomposition_to_json(cda(series, params, config))
        else:
            doc = discrete_decomposition_to_json(dda(series, params, config))
        _atomic_write(path, json.dumps(doc))
        return doc, False

    # -- models ----------------------------------------------------------------

    def model_path(self, model_id: str) -> Path:
        return self.root / "models" / f"{model_id}.json"


class StaleRevision(HydramonError):
    def __init__(self, current: int):
        self.current = current
        super().__init__(f"stale revision; current is {current}")


class Monitor:
    """One background replay per service; explicit start/stop."""

    def __init__(self):
        self.sink = InProcessSink()
        self._thread: threading.Thread | None = None
        self._stop = threading.Event()
        self.session_id: str | None = None

    @property
    def running(self) -> bool:
        return self._thread is not None and self._thread.is_alive()

    def start(self, recording: SessionRecording, model, config: StreamConfig,
              speed: float) -> None:
        if self.running:
            raise HydramonError("monitor already running")
        self._stop.clear()
        self.sink = InProcessSink()
        self.session_id = recording.id
        engine = StreamEngine(model, config, sinks=[self.sink])
        series = recording.series
        dt = 1.0 / series.rate
        pause = 0.0 if np.isinf(speed) else dt / speed

        def run():
            for i, value in enumerate(series.values):
                if self._stop.is_set():
                    return
                engine.push_sample(series.start_time + i * dt, float(value))
                if pause:
                    time.sleep(pause)

        self._thread = threading.Thread(target=run, daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=10.0)
            self._thread = None


def _bad_request(message: str) -> JSONResponse:
    return JSONResponse(status_code=400, content={"error": message})


def _not_found(what: str) -> JSONResponse:
    return JSONResponse(status_code=404, content={"error": f"unknown {what}"})


def create_app(store: SessionStore | None = None) -> FastAPI:
    store = store or SessionStore()
    monitor = Monitor()
    app = FastAPI(title="hydramon", version=__version__)
    app.state.store = store
    app.state.monitor = monitor

    @app.exception_handler(HydramonError)
    async def handle_domain_error(request: Request, exc: HydramonError):
        if isinstance(exc, StaleRevision):
            return JSONResponse(status_code=409, content={
                "error": str(exc), "current_revision": exc.current})
        return _bad_request(str(exc))

    @app.exception_handler(Exception)
    async def handle_internal(request: Request, exc: Exception):
        error_id = uuid.uuid4().hex[:8]
        return JSONResponse(status_code=500,
                            content={"error": "internal error", "id": error_id})

    # -- sessions -------------------------------------------------------------

    @app.get("/api/sessions")
    def list_sessions():
        return {"sessions": store.list_sessions()}

    @app.post("/api/sessions", status_code=201)
    async def create_session(request: Request, subject: str = "unknown"):
        body = (await request.body()).decode()
        return store.create_session(body, subject)

    @app.get("/api/sessions/{session_id}")
    def get_session(session_id: str):
        entry = store.get_entry(session_id)
        if entry is None:
            return _not_found("session")
        return entry

    @app.get("/api/sessions/{session_id}/signal")
    def get_signal(session_id: str, channel: str = "raw",
                   from_t: float | None = Query(default=None, alias="from"),
                   to_t: float | None = Query(default=None, alias="to"),
                   decimate: int = 1):
        if store.get_entry(session_id) is None:
            return _not_found("session")
        if channel not in ("raw", "filtered", "tonic", "phasic", "driver"):
            return _bad_request(f"unknown channel {channel!r}")
        if decimate < 1:
            return _bad_request("decimate must be >= 1")
        rec = store.load_recording(session_id)
        cached = None
        if channel == "raw":
            series = rec.series
            values = series.values
            t0, rate = series.start_time, series.rate
        elif channel == "filtered":
            series = preprocess_pipeline(rec)
            values = series.values
            t0, rate = series.start_time, series.rate
        else:
            doc, cached = store.decomposition(
                session_id, "cda", (0.75, 2.0), PreprocessConfig(),
                DecomposeConfig())
            key = {"tonic": "tonic", "phasic": "phasic",
                   "driver": "phasic_driver"}[channel]
            values = np.asarray(doc[key])
            t0, rate = doc["start_time"], doc["rate"]
        i0 = 0 if from_t is None else max(0, int((from_t - t0) * rate))
        i1 = len(values) if to_t is None else min(len(values),
                                                  int((to_t - t0) * rate) + 1)
        sliced = values[i0:i1:decimate]
        payload = {
            "channel": channel,
            "t0": t0 + i0 / rate,
            "rate": rate / decimate,
            "values": [float(v) for v in sliced],
        }
        if cached is not None:
            payload["cached"] = cached
        return payload

    # -- annotations ----------------------------------------------------------

    @app.get("/api/sessions/{session_id}/annotations")
    def get_annotations(session_id: str):
        if store.get_entry(session_id) is None:
            return _not_found("session")
        return store.get_annotations(session_id)

    @app.put("/api/sessions/{session_id}/annotations")
    async def put_annotations(session_id: str, request: Request):
        if store.get_entry(session_id) is None:
            return _not_found("session")
        try:
            body = json.loads(await request.body())
            doc = body["doc"]
            revision = int(body["revision"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError):
            return _bad_request("body must be {'revision': int, 'doc': {...}}")
        return store.put_annotations(session_id, doc, revision)

    # -- decomposition --------------------------------------------------------

    @app.post("/api/sessions/{session_id}/decompose")
    async def decompose(session_id: str, request: Request):
        if store.get_entry(session_id) is None:
            return _not_found("session")
        try:
            body = json.loads((await request.body()) or b"{}")
        except json.JSONDecodeError:
            return _bad_request("invalid JSON body")
        method = body.get("method", "cda")
        if method not in ("cda", "dda"):
            return _bad_request(f"unknown method {method!r}")
        tau = tuple(body.get("tau", (0.75, 2.0)))
        if len(tau) != 2:
            return _bad_request("tau must be [rise, decay]")
        doc, cached = store.decomposition(session_id, method, tau,
                                          PreprocessConfig(), DecomposeConfig())
        return {"method": method, "cached": cached, "result": doc}

    # -- training / evaluation ------------------------------------------------

    def _collect_dataset(session_ids: list[str]):
        datasets = []
        for sid in session_ids:
            if store.get_entry(sid) is None:
                raise HydramonError(f"unknown session {sid}")
            rec = store.load_recording(sid)
            series = preprocess_pipeline(rec)
            prepped = SessionRecording(rec.id, rec.subject, series,
                                       artifact_spans=rec.artifact_spans,
                                       annotations=rec.annotations)
            datasets.append(featurize_session(prepped, FeaturizeConfig()))
        return merge_datasets(datasets)

    @app.post("/api/train")
    async def train(request: Request):
        try:
            body = json.loads(await request.body())
            session_ids = list(body["sessions"])
            kind = body.get("model", "tree")
        except (json.JSONDecodeError, KeyError, TypeError):
            return _bad_request("body must include 'sessions' list")
        data = _collect_dataset(session_ids)
        model = ModelSpec(kind=kind).train(data)
        model_id = uuid.uuid4().hex[:12]
        save_model(model, store.model_path(model_id))
        return {"model_id": model_id, "kind": kind, "rows": len(data)}

    @app.post("/api/evaluate")
    async def evaluate(request: Request):
        try:
            body = json.loads(await request.body())
            session_ids = list(body["sessions"])
            kind = body.get("model", "tree")
            k = int(body.get("k", 10))
            seed = int(body.get("seed", 0))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError):
            return _bad_request("body must include 'sessions' list")
        data = _collect_dataset(session_ids)
        report = cross_validate(data, ModelSpec(kind=kind), k=k, seed=seed)
        return {"report": report.to_json(),
                "table": render_report({kind: report})}

    # -- monitor --------------------------------------------------------------

    @app.post("/api/monitor/start")
    async def monitor_start(request: Request):
        try:
            body = json.loads(await request.body())
            session_id = body["session"]
            model_id = body["model_id"]
        except (json.JSONDecodeError, KeyError, TypeError):
            return _bad_request("body must include 'session' and 'model_id'")
        if store.get_entry(session_id) is None:
            return _not_found("session")
        model_path = store.model_path(model_id)
        if not model_path.exists():
            return _not_found("model")
        if monitor.running:
            return _bad_request("monitor already running")
        rec = store.load_recording(session_id)
        debounce_n = int(body.get("debounce_n", 3))
        speed = float(body.get("speed", "inf"))
        config = StreamConfig(rate=rec.series.rate, debounce_n=debounce_n)
        monitor.start(rec, load_model(model_path), config, speed)
        return {"status": "started", "session": session_id}

    @app.post("/api/monitor/stop")
    def monitor_stop():
        monitor.stop()
        return {"status": "stopped"}

    @app.get("/api/monitor/events")
    def monitor_events():
        def stream():
            idle = 0.0
            while True:
                events = monitor.sink.drain()
                for event in events:
                    yield f"data: {json.dumps(event.to_json())}\n\n"
                if events:
                    idle = 0.0
                    continue
                if not monitor.running:
                    yield "event: end\ndata: {}\n\n"
                    return
                time.sleep(0.05)
                idle += 0.05
                if idle > 300:
                    return
        return StreamingResponse(stream(), media_type="text/event-stream")

    # -- static frontend ------------------------------------------------------

    dist = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    if dist.is_dir():
        app.mount("/", StaticFiles(directory=dist, html=True), name="ui")

    return app
