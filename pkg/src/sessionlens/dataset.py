"""Prepared-dataset container: sessionized, labeled, windowed event data.

One newline-delimited UTF-8 file; the header carries the feature schema
and extraction settings, each row one session:

    {"format": "sessionlens-dataset", "version": 1, "max_events": 200,
     "schema": {...}}
    {"session_id": "s1", "window": "2016-01", "label": 1, "events": [...]}

Feature matrices are re-derived from the stored events on load (extraction
is deterministic), so the file stays small and cannot drift from its
schema.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import FormatError
from . import ingest
from .ingest import (ActionSequence, FeatureQualityReport, FeatureSchema,
                     Session)

DATASET_FORMAT = "sessionlens-dataset"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class PreparedSession:
    session_id: str
    window: str
    label: int | None
    session: Session
    sequence: ActionSequence    # unscaled


def build_dataset(sessions, schema: FeatureSchema, labels_by_id=None,
                  max_events: int = ingest.DEFAULT_MAX_EVENTS):
    """Encode sessions against a schema; returns (records, quality report)."""
    labels_by_id = labels_by_id or {}
    report = FeatureQualityReport()
    records = []
    for session in sessions:
        seq = ingest.extract_features(session, schema, max_len=max_events,
                                      report=report)
        records.append(PreparedSession(
            session_id=session.session_id,
            window=ingest.window_tag(session),
            label=labels_by_id.get(session.session_id),
            session=session,
            sequence=seq))
    return records, report


def save_dataset(path, schema: FeatureSchema, records,
                 max_events: int = ingest.DEFAULT_MAX_EVENTS) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        header = {"format": DATASET_FORMAT, "version": FORMAT_VERSION,
                  "max_events": max_events, "schema": schema.to_dict()}
        fh.write(json.dumps(header, separators=(",", ":")) + "\n")
        for rec in records:
            row = {"session_id": rec.session_id, "window": rec.window,
                   "label": rec.label,
                   "events": [e.to_record() for e in rec.session.events]}
            fh.write(json.dumps(row, separators=(",", ":")) + "\n")


def load_dataset(path):
    """Returns (schema, records, max_events); sequences are re-extracted."""
    with open(path, "r", encoding="utf-8") as fh:
        header = json.loads(fh.readline())
        if header.get("format") != DATASET_FORMAT:
            raise FormatError(f"not a dataset file: format={header.get('format')!r}")
        if header.get("version") != FORMAT_VERSION:
            raise FormatError(f"unsupported dataset version {header.get('version')!r}")
        schema = FeatureSchema.from_dict(header["schema"])
        max_events = header.get("max_events", ingest.DEFAULT_MAX_EVENTS)
        records = []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            events = tuple(ingest._event_from_obj(obj) for obj in row["events"])
            session = Session(session_id=row["session_id"], events=events,
                              outcome=row["label"])
            seq = ingest.extract_features(session, schema, max_len=max_events)
            records.append(PreparedSession(
                session_id=row["session_id"], window=row["window"],
                label=row["label"], session=session, sequence=seq))
    return schema, records, max_events
