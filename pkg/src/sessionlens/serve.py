"""Model-as-a-service plus read APIs for the analyst dashboard.

Endpoints (all under the versioned prefix /v1):

    POST /v1/predict                 probability after every event prefix
    GET  /v1/sessions/{id}/analysis  exported per-session series record
    GET  /v1/clusters                exported intent clusters
    GET  /v1/reports/{feature}       exported contrast report
    GET  /v1/tags?key=...            recorded expert tags
    POST /v1/tags                    append a tag (bearer-token protected)

Read endpoints return the export records byte-for-byte as written by the
analysis stage. Prediction is stateless and recomputes exactly the offline
path (same parsing, ordering, truncation, scaling and forward pass), so an
online answer equals the offline prefix series to the last bit.

The loaded model and exports live behind a single bundle reference that is
swapped atomically; in-flight requests see the old or the new bundle,
never a mixture.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, Response

from . import ingest
from .contrast import CONTRAST_FORMAT, ExpertTag, TagStore
from .errors import FormatError, InputError, SessionlensError
from .ingest import DEFAULT_MAX_EVENTS, Session
from .train import TrainedModel, load_model

log = logging.getLogger(__name__)

API_PREFIX = "/v1"


@dataclass
class ExportStore:
    """Raw export lines, keyed for byte-faithful replay."""

    series_by_id: dict = field(default_factory=dict)    # sid -> raw line
    clusters_raw: list = field(default_factory=list)    # raw lines
    reports: dict = field(default_factory=dict)         # feature -> (header, rows)


def _read_raw_export(path, expected_format):
    with open(path, "r", encoding="utf-8") as fh:
        header_raw = fh.readline().strip()
        header = json.loads(header_raw)
        if header.get("format") != expected_format:
            raise FormatError(f"{path}: expected {expected_format!r} export")
        rows = [ln.strip() for ln in fh if ln.strip()]
    return header_raw, rows


def load_exports(export_dir) -> ExportStore:
    """Pick up series/clusters/contrast exports present in a directory."""
    store = ExportStore()
    series = os.path.join(export_dir, "series.jsonl")
    if os.path.exists(series):
        _, rows = _read_raw_export(series, "sessionlens-series")
        for raw in rows:
            store.series_by_id[json.loads(raw)["session_id"]] = raw
    clusters = os.path.join(export_dir, "clusters.jsonl")
    if os.path.exists(clusters):
        _, store.clusters_raw = _read_raw_export(clusters, "sessionlens-clusters")
    for name in sorted(os.listdir(export_dir)) if os.path.isdir(export_dir) else []:
        if name.startswith("contrast_") and name.endswith(".jsonl"):
            feature = name[len("contrast_"):-len(".jsonl")]
            store.reports[feature] = _read_raw_export(
                os.path.join(export_dir, name), CONTRAST_FORMAT)
    return store


@dataclass
class ServiceBundle:
    """Immutable view the handlers read: one reference, swapped atomically."""

    model: TrainedModel | None = None
    exports: ExportStore = field(default_factory=ExportStore)

    @property
    def max_events(self) -> int:
        if self.model is None:
            return DEFAULT_MAX_EVENTS
        return int(self.model.metadata.get("max_events", DEFAULT_MAX_EVENTS))


class ServiceState:
    def __init__(self, bundle: ServiceBundle, tag_store: TagStore | None,
                 token: str):
        self.bundle = bundle
        self.tag_store = tag_store
        self.token = token

    def swap(self, bundle: ServiceBundle) -> None:
        self.bundle = bundle   # single reference assignment: atomic


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": message})


def _predict_payload(bundle: ServiceBundle, body: dict) -> dict:
    if not isinstance(body, dict):
        raise InputError("request body must be a JSON object")
    raw_events = body.get("events")
    if not isinstance(raw_events, list) or not raw_events:
        raise InputError("events must be a non-empty list")
    session_id = body.get("session_id") or "live"
    events = []
    for i, obj in enumerate(raw_events):
        try:
            base = dict(obj) if isinstance(obj, dict) else None
            if base is None:
                raise ValueError("event is not an object")
            base.setdefault("session_id", session_id)
            events.append(ingest._event_from_obj(base))
        except ValueError as exc:
            raise InputError(f"events[{i}]: {exc}") from exc
    ordered = tuple(sorted(events, key=lambda e: e.ts))  # stable, as sessionize
    session = Session(session_id=session_id, events=ordered)
    model = bundle.model
    seq = ingest.extract_features(session, model.schema,
                                  max_len=bundle.max_events)
    probs = model.prefix_probabilities(seq)
    return {"session_id": session_id,
            "probabilities": [float(p) for p in probs],
            "model_version": model.version,
            "schema_fingerprint": model.schema_fingerprint}


def create_app(state: ServiceState) -> FastAPI:
    app = FastAPI(title="sessionlens", docs_url=None, redoc_url=None)
    # the CORS wildcard never covers Authorization; list it for the dashboard
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"],
                       allow_headers=["Authorization", "Content-Type"])
    app.state.service = state

    @app.post(f"{API_PREFIX}/predict")
    async def predict(request: Request):
        bundle = state.bundle
        if bundle.model is None:
            return _error(503, "no model loaded")
        try:
            body = await request.json()
        except Exception:
            return _error(400, "request body is not valid JSON")
        try:
            return JSONResponse(_predict_payload(bundle, body))
        except InputError as exc:
            return _error(422, str(exc))
        except SessionlensError as exc:
            return _error(400, str(exc))

    @app.get(f"{API_PREFIX}/sessions/{{session_id}}/analysis")
    async def session_analysis(session_id: str):
        bundle = state.bundle
        if not bundle.exports.series_by_id:
            return _error(503, "analysis exports not loaded")
        raw = bundle.exports.series_by_id.get(session_id)
        if raw is None:
            return _error(404, f"unknown session {session_id!r}")
        return Response(content=raw, media_type="application/json")

    @app.get(f"{API_PREFIX}/clusters")
    async def clusters():
        rows = state.bundle.exports.clusters_raw
        return Response(content="[" + ",".join(rows) + "]",
                        media_type="application/json")

    @app.get(f"{API_PREFIX}/reports/{{feature}}")
    async def report(feature: str):
        entry = state.bundle.exports.reports.get(feature)
        if entry is None:
            return _error(404, f"no contrast report for feature {feature!r}")
        header_raw, rows = entry
        body = '{"meta":' + header_raw + ',"rows":[' + ",".join(rows) + "]}"
        return Response(content=body, media_type="application/json")

    @app.get(f"{API_PREFIX}/tags")
    async def list_tags(key: str | None = None):
        if state.tag_store is None:
            return _error(503, "tag store not configured")
        tags = [t.to_record() for t in state.tag_store.list_tags(key)]
        return JSONResponse({"tags": tags})

    @app.post(f"{API_PREFIX}/tags")
    async def post_tag(request: Request):
        if state.tag_store is None:
            return _error(503, "tag store not configured")
        auth = request.headers.get("authorization", "")
        if auth != f"Bearer {state.token}":
            return _error(401, "missing or invalid token")
        try:
            body = await request.json()
        except Exception:
            return _error(400, "request body is not valid JSON")
        if not isinstance(body, dict):
            return _error(422, "tag must be a JSON object")
        try:
            tag = ExpertTag(author=body.get("author", ""),
                            key=body.get("key", ""),
                            verdict=body.get("verdict", ""),
                            note=body.get("note", ""),
                            **({"ts_ms": body["ts_ms"]} if "ts_ms" in body else {}))
        except InputError as exc:
            return _error(422, str(exc))
        record = state.tag_store.record_tag(tag)   # durable before the 2xx
        return JSONResponse({"recorded": record}, status_code=201)

    return app


def build_state(model_path=None, export_dir=None, tags_path=None,
                token: str = "change-me") -> ServiceState:
    model = load_model(model_path) if model_path else None
    exports = load_exports(export_dir) if export_dir else ExportStore()
    tag_store = TagStore(tags_path) if tags_path else None
    return ServiceState(ServiceBundle(model=model, exports=exports),
                        tag_store, token)


def run(host: str, port: int, state: ServiceState) -> None:
    import uvicorn

    uvicorn.run(create_app(state), host=host, port=port, log_level="info")
