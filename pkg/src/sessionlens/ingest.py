"""Event-log ingestion: parse, sessionize, encode features, scale.

File formats (both newline-delimited UTF-8 JSON with a versioned header
line as the first record):

Event file
    {"format": "sessionlens-events", "version": 1}
    {"session_id": "s1", "ts": 1000, "event_type": "click",
     "page_type": "Home", "category": "music", "dwell": 1.5}

``session_id`` (non-empty string), ``ts`` (integer epoch milliseconds, >= 0)
and the three string attributes are required; any further scalar keys are
carried as extras. Malformed lines are counted and reported, never silently
dropped.

Schema file
    {"format": "sessionlens-schema", "version": 1, "features": [
      {"name": "gap_ms", "kind": "numeric", "source": "ts", "derived": "gap"},
      {"name": "page_type", "kind": "categorical", "source": "page_type",
       "vocabulary": ["Home", "Search"]}]}

Encoded width is 1 column per numeric feature and ``len(vocabulary) + 1``
per categorical feature (vocabulary order, then an out-of-vocabulary
bucket).
"""

from __future__ import annotations

import hashlib
import io
import json
import logging
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone

import numpy as np

from .errors import FormatError, InputError, SchemaError

log = logging.getLogger(__name__)

EVENTS_FORMAT = "sessionlens-events"
SCHEMA_FORMAT = "sessionlens-schema"
FORMAT_VERSION = 1

CORE_FIELDS = ("session_id", "ts", "event_type", "page_type", "category")

DEFAULT_MAX_EVENTS = 200


@dataclass(frozen=True)
class RawEvent:
    session_id: str
    ts: int
    event_type: str
    page_type: str
    category: str
    extras: dict = field(default_factory=dict)

    def attributes(self) -> dict:
        """Flat pre-scaling attribute view used for snapshots and grouping."""
        out = {"ts": self.ts, "event_type": self.event_type,
               "page_type": self.page_type, "category": self.category}
        out.update(self.extras)
        return out

    def to_record(self) -> dict:
        rec = {"session_id": self.session_id, "ts": self.ts,
               "event_type": self.event_type, "page_type": self.page_type,
               "category": self.category}
        for k in sorted(self.extras):
            rec[k] = self.extras[k]
        return rec


@dataclass(frozen=True)
class Session:
    session_id: str
    events: tuple
    outcome: int | None = None


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    kind: str                      # "numeric" | "categorical"
    source: str                    # attribute name ("ts" for derived gap)
    vocabulary: tuple = ()
    derived: str | None = None     # "gap" marks the inter-event time feature

    @property
    def width(self) -> int:
        return 1 if self.kind == "numeric" else len(self.vocabulary) + 1


@dataclass(frozen=True)
class FeatureSchema:
    features: tuple
    version: int = FORMAT_VERSION

    def __post_init__(self):
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise SchemaError("feature names must be unique")
        for f in self.features:
            if f.kind not in ("numeric", "categorical"):
                raise SchemaError(f"unknown feature kind {f.kind!r} for {f.name!r}")
            if f.kind == "categorical" and not f.vocabulary:
                raise SchemaError(f"categorical feature {f.name!r} needs a vocabulary")
            if f.derived not in (None, "gap"):
                raise SchemaError(f"unknown derived feature {f.derived!r}")

    @property
    def width(self) -> int:
        return sum(f.width for f in self.features)

    def column_slices(self) -> dict[str, slice]:
        out, col = {}, 0
        for f in self.features:
            out[f.name] = slice(col, col + f.width)
            col += f.width
        return out

    def numeric_columns(self) -> list[int]:
        cols, col = [], 0
        for f in self.features:
            if f.kind == "numeric":
                cols.append(col)
            col += f.width
        return cols

    def to_dict(self) -> dict:
        feats = []
        for f in self.features:
            d = {"name": f.name, "kind": f.kind, "source": f.source}
            if f.kind == "categorical":
                d["vocabulary"] = list(f.vocabulary)
            if f.derived:
                d["derived"] = f.derived
            feats.append(d)
        return {"format": SCHEMA_FORMAT, "version": self.version, "features": feats}

    def fingerprint(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureSchema":
        if d.get("format") != SCHEMA_FORMAT:
            raise FormatError(f"not a schema document: format={d.get('format')!r}")
        if d.get("version") != FORMAT_VERSION:
            raise FormatError(f"unsupported schema version {d.get('version')!r}")
        feats = tuple(
            FeatureSpec(name=f["name"], kind=f["kind"], source=f["source"],
                        vocabulary=tuple(f.get("vocabulary", ())),
                        derived=f.get("derived"))
            for f in d["features"])
        return cls(features=feats)


def load_schema(path) -> FeatureSchema:
    with open(path, "r", encoding="utf-8") as fh:
        return FeatureSchema.from_dict(json.load(fh))


def save_schema(schema: FeatureSchema, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(schema.to_dict(), fh, indent=2)
        fh.write("\n")


@dataclass(frozen=True)
class ActionSequence:
    session_id: str
    values: np.ndarray            # (T, schema.width) float64
    schema_fingerprint: str
    scaled: bool = False

    def __post_init__(self):
        if self.values.ndim != 2 or self.values.shape[0] < 1:
            raise SchemaError(f"sequence matrix must be (T>=1, width), got {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise InputError(f"sequence {self.session_id} contains non-finite values")

    @property
    def length(self) -> int:
        return self.values.shape[0]


# ---------------------------------------------------------------------------
# Parsing

@dataclass
class ParseReport:
    data_lines: int = 0
    accepted: int = 0
    rejects: list = field(default_factory=list)   # (line_no, reason)

    @property
    def n_rejected(self) -> int:
        return len(self.rejects)


def _check_scalar(value):
    return isinstance(value, (str, int, float)) and not isinstance(value, bool)


def _event_from_obj(obj: dict) -> RawEvent:
    if not isinstance(obj, dict):
        raise ValueError("record is not an object")
    sid = obj.get("session_id")
    if not isinstance(sid, str) or not sid:
        raise ValueError("session_id missing or empty")
    ts = obj.get("ts")
    if isinstance(ts, bool) or not isinstance(ts, int):
        raise ValueError("ts must be an integer (milliseconds)")
    if ts < 0:
        raise ValueError("ts must be >= 0")
    core = {}
    for key in ("event_type", "page_type", "category"):
        v = obj.get(key)
        if not isinstance(v, str):
            raise ValueError(f"{key} missing or not a string")
        core[key] = v
    extras = {}
    for k, v in obj.items():
        if k in CORE_FIELDS:
            continue
        if not _check_scalar(v):
            raise ValueError(f"extra attribute {k!r} is not a scalar")
        extras[k] = v
    return RawEvent(session_id=sid, ts=ts, extras=extras, **core)


def parse_events(stream, expected_format: str = EVENTS_FORMAT):
    """Read newline-delimited events from a text or byte stream.

    Returns (events, ParseReport). The first non-blank line must be the
    versioned header. Raises FormatError when the header is wrong or when
    more than half of the data lines are malformed.
    """
    if isinstance(stream, (bytes, str)):
        stream = io.StringIO(stream.decode("utf-8") if isinstance(stream, bytes) else stream)
    events: list[RawEvent] = []
    report = ParseReport()
    header_seen = False
    for line_no, raw in enumerate(stream, start=1):
        if isinstance(raw, bytes):
            raw = raw.decode("utf-8")
        line = raw.strip()
        if not line:
            continue
        if not header_seen:
            try:
                head = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"line {line_no}: unreadable header: {exc}") from exc
            if not isinstance(head, dict) or head.get("format") != expected_format:
                raise FormatError(
                    f"line {line_no}: expected header format={expected_format!r}, "
                    f"got {head.get('format') if isinstance(head, dict) else head!r}")
            if head.get("version") != FORMAT_VERSION:
                raise FormatError(f"unsupported events version {head.get('version')!r}")
            header_seen = True
            continue
        report.data_lines += 1
        try:
            events.append(_event_from_obj(json.loads(line)))
            report.accepted += 1
        except (json.JSONDecodeError, ValueError) as exc:
            report.rejects.append((line_no, str(exc)))
    if report.data_lines and report.n_rejected * 2 > report.data_lines:
        raise FormatError(
            f"{report.n_rejected} of {report.data_lines} lines malformed (> 50%)")
    return events, report


def read_events(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_events(fh)


def write_events(events, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"format": EVENTS_FORMAT, "version": FORMAT_VERSION},
                            separators=(",", ":")) + "\n")
        for ev in events:
            fh.write(json.dumps(ev.to_record(), separators=(",", ":")) + "\n")


# ---------------------------------------------------------------------------
# Sessionization

def sessionize(events) -> list[Session]:
    """Group events by session_id and time-order each group.

    Ties on timestamp keep the input order (stable sort); the returned
    sessions are sorted by session_id so output is independent of input
    permutation when timestamps are distinct.
    """
    groups: dict[str, list[RawEvent]] = {}
    for ev in events:
        groups.setdefault(ev.session_id, []).append(ev)
    sessions = []
    for sid in sorted(groups):
        ordered = sorted(groups[sid], key=lambda e: e.ts)  # stable
        sessions.append(Session(session_id=sid, events=tuple(ordered)))
    return sessions


def with_outcomes(sessions, labels_by_id: dict) -> list[Session]:
    """Attach outcome labels (0/1) from a session_id keyed mapping."""
    out = []
    for s in sessions:
        label = labels_by_id.get(s.session_id)
        if label is not None and label not in (0, 1):
            raise InputError(f"outcome for {s.session_id} must be 0 or 1, got {label!r}")
        out.append(replace(s, outcome=label))
    return out


def window_tag(session: Session) -> str:
    """Calendar-month bucket (UTC) of the session's first event."""
    ts = session.events[0].ts / 1000.0
    return datetime.fromtimestamp(ts, tz=timezone.utc).strftime("%Y-%m")


# ---------------------------------------------------------------------------
# Feature extraction

@dataclass
class QualityIssue:
    session_id: str
    event_index: int
    feature: str
    reason: str


@dataclass
class FeatureQualityReport:
    issues: list = field(default_factory=list)

    def add(self, session_id, event_index, feature, reason):
        self.issues.append(QualityIssue(session_id, event_index, feature, reason))

    def __len__(self):
        return len(self.issues)


def extract_features(session: Session, schema: FeatureSchema,
                     max_len: int = DEFAULT_MAX_EVENTS,
                     report: FeatureQualityReport | None = None) -> ActionSequence:
    """Encode one session as a (T, width) float64 matrix.

    Sessions longer than max_len are truncated from the front (the most
    recent events are kept) and the derived gap restarts at 0 on the first
    kept event. Missing attributes fall back to 0 / the OOV bucket and are
    recorded in the quality report.
    """
    if not session.events:
        raise InputError(f"session {session.session_id} has no events")
    events = list(session.events[-max_len:]) if max_len else list(session.events)
    T = len(events)
    values = np.zeros((T, schema.width))
    col = 0
    for spec in schema.features:
        if spec.derived == "gap":
            ts = np.array([e.ts for e in events], dtype=np.float64)
            values[1:, col] = np.diff(ts)
            col += 1
            continue
        if spec.kind == "numeric":
            for t, ev in enumerate(events):
                attrs = ev.attributes()
                v = attrs.get(spec.source)
                if isinstance(v, bool) or not isinstance(v, (int, float)):
                    if report is not None:
                        reason = "missing" if v is None else "non-numeric"
                        report.add(session.session_id, t, spec.name, reason)
                    v = 0.0
                values[t, col] = float(v)
            col += 1
        else:
            index = {tok: i for i, tok in enumerate(spec.vocabulary)}
            oov = len(spec.vocabulary)
            for t, ev in enumerate(events):
                attrs = ev.attributes()
                v = attrs.get(spec.source)
                if v is None and report is not None:
                    report.add(session.session_id, t, spec.name, "missing")
                slot = index.get(v if isinstance(v, str) else str(v), oov) \
                    if v is not None else oov
                values[t, col + slot] = 1.0
            col += spec.width
    return ActionSequence(session_id=session.session_id, values=values,
                          schema_fingerprint=schema.fingerprint())


# ---------------------------------------------------------------------------
# Scaling

@dataclass(frozen=True)
class Scaler:
    """Per numeric column z-score parameters, tied to one schema."""

    schema_fingerprint: str
    columns: tuple                # numeric column indices
    means: np.ndarray
    stds: np.ndarray

    def __post_init__(self):
        if np.any(self.stds < 0):
            raise InputError("fitted std must be >= 0")


def fit_scaler(sequences, schema: FeatureSchema) -> Scaler:
    """Fit means and population stds over all rows of the training split."""
    fp = schema.fingerprint()
    rows = []
    for seq in sequences:
        if seq.schema_fingerprint != fp:
            raise SchemaError(f"sequence {seq.session_id} has mismatched schema fingerprint")
        if seq.scaled:
            raise InputError(f"sequence {seq.session_id} is already scaled")
        rows.append(seq.values)
    if not rows:
        raise InputError("cannot fit a scaler on zero sequences")
    cols = schema.numeric_columns()
    stacked = np.concatenate(rows, axis=0)[:, cols] if cols else np.zeros((0, 0))
    means = stacked.mean(axis=0) if cols else np.zeros(0)
    stds = stacked.std(axis=0) if cols else np.zeros(0)   # population (ddof=0)
    return Scaler(schema_fingerprint=fp, columns=tuple(cols), means=means, stds=stds)


def apply_scaler(seq: ActionSequence, scaler: Scaler) -> ActionSequence:
    """Z-score numeric columns; zero-variance columns map to 0; categorical
    columns pass through untouched. Refuses to scale twice."""
    if seq.schema_fingerprint != scaler.schema_fingerprint:
        raise SchemaError(f"sequence {seq.session_id} does not match the scaler's schema")
    if seq.scaled:
        raise InputError(f"sequence {seq.session_id} is already scaled")
    values = seq.values.copy()
    for j, col in enumerate(scaler.columns):
        sd = scaler.stds[j]
        if sd == 0.0:
            values[:, col] = 0.0
        else:
            values[:, col] = (values[:, col] - scaler.means[j]) / sd
    return replace(seq, values=values, scaled=True)
