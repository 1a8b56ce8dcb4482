"""Expert contrasting: aggregate impact events by feature value, persist
analyst verdicts, render reports.

The machine report format is newline-delimited JSON with a versioned
header; the tag store is a single append-only file whose records each
carry a crc32 over their canonical serialization, so partial writes and
bit rot surface as integrity errors instead of silent data loss.

Timestamps honor SOURCE_DATE_EPOCH (seconds) when set, which makes report
headers and tags reproducible in scripted runs.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import time
import zlib
from dataclasses import dataclass, field
from datetime import datetime, timezone
from statistics import median

from .errors import FormatError, InputError, IntegrityError, SchemaError

log = logging.getLogger(__name__)

CONTRAST_FORMAT = "sessionlens-contrast"
TAGS_FORMAT = "sessionlens-tags"
FORMAT_VERSION = 1

VERDICTS = ("suspected-cause", "benign", "needs-data")


def now_ms() -> int:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    return int(epoch) * 1000 if epoch else int(time.time() * 1000)


def utc_iso(ts_ms: int) -> str:
    return datetime.fromtimestamp(ts_ms / 1000.0, tz=timezone.utc) \
        .isoformat(timespec="seconds")


# ---------------------------------------------------------------------------
# Aggregation

@dataclass(frozen=True)
class ContrastRow:
    value: str                    # the grouped feature value
    count: int
    mean_distance: float
    median_distance: float
    rose: int
    fell: int
    examples: tuple               # up to max_examples distinct session ids

    @property
    def key(self) -> str:
        return f"{self.value}"


@dataclass(frozen=True)
class ContrastReport:
    feature: str
    rows: tuple
    generated_at_ms: int

    def row_for(self, value: str) -> ContrastRow | None:
        for row in self.rows:
            if row.value == value:
                return row
        return None


def grouping_key(feature: str, value) -> str:
    return f"{feature}={value}"


def aggregate_impacts(impacts, feature: str, max_examples: int = 5,
                      generated_at_ms: int | None = None) -> ContrastReport:
    """One report row per distinct value of the grouping feature.

    Rows are sorted by mean distance descending (value ascending on ties).
    All impact snapshots must carry the feature; an unknown name is a
    schema error, never an empty report.
    """
    groups: dict = {}
    for e in impacts:
        if feature not in e.event:
            raise SchemaError(
                f"impact event for session {e.session_id} has no feature {feature!r}")
        groups.setdefault(str(e.event[feature]), []).append(e)
    rows = []
    for value, members in groups.items():
        dists = [m.distance for m in members]
        examples = []
        for m in members:
            if m.session_id not in examples:
                examples.append(m.session_id)
            if len(examples) >= max_examples:
                break
        rows.append(ContrastRow(
            value=value, count=len(members),
            mean_distance=sum(dists) / len(dists),
            median_distance=float(median(dists)),
            rose=sum(1 for m in members if m.direction == "rose"),
            fell=sum(1 for m in members if m.direction == "fell"),
            examples=tuple(examples)))
    rows.sort(key=lambda r: (-r.mean_distance, r.value))
    return ContrastReport(feature=feature, rows=tuple(rows),
                          generated_at_ms=generated_at_ms if generated_at_ms is not None
                          else now_ms())


# ---------------------------------------------------------------------------
# Rendering

def render_report(report: ContrastReport, fmt: str = "plain") -> str:
    """Render all rows; "plain" is an aligned table, "records" the
    machine-readable newline-delimited form."""
    if fmt == "records":
        lines = [json.dumps({"format": CONTRAST_FORMAT, "version": FORMAT_VERSION,
                             "feature": report.feature,
                             "generated_at_ms": report.generated_at_ms},
                            separators=(",", ":"))]
        for r in report.rows:
            lines.append(json.dumps(
                {"value": r.value, "count": r.count,
                 "mean_distance": r.mean_distance,
                 "median_distance": r.median_distance,
                 "rose": r.rose, "fell": r.fell,
                 "examples": list(r.examples)}, separators=(",", ":")))
        return "\n".join(lines) + "\n"
    if fmt != "plain":
        raise InputError(f"unknown report format {fmt!r}")
    head = (f"feature: {report.feature}    "
            f"generated: {utc_iso(report.generated_at_ms)}")
    cols = ["value", "count", "mean_dist", "median_dist", "rose", "fell", "examples"]
    body = [[r.value, str(r.count), f"{r.mean_distance:.4f}",
             f"{r.median_distance:.4f}", str(r.rose), str(r.fell),
             ",".join(r.examples)] for r in report.rows]
    widths = [max(len(c), *(len(row[i]) for row in body)) if body else len(c)
              for i, c in enumerate(cols)]
    fmt_row = lambda row: "  ".join(v.ljust(w) for v, w in zip(row, widths)).rstrip()
    lines = [head, fmt_row(cols), fmt_row(["-" * w for w in widths])]
    lines += [fmt_row(row) for row in body]
    return "\n".join(lines) + "\n"


def parse_report(text: str) -> ContrastReport:
    """Inverse of render_report(fmt="records")."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise FormatError("empty report document")
    header = json.loads(lines[0])
    if header.get("format") != CONTRAST_FORMAT:
        raise FormatError(f"not a contrast report: {header.get('format')!r}")
    if header.get("version") != FORMAT_VERSION:
        raise FormatError(f"unsupported report version {header.get('version')!r}")
    rows = []
    for ln in lines[1:]:
        d = json.loads(ln)
        rows.append(ContrastRow(value=d["value"], count=d["count"],
                                mean_distance=d["mean_distance"],
                                median_distance=d["median_distance"],
                                rose=d["rose"], fell=d["fell"],
                                examples=tuple(d["examples"])))
    return ContrastReport(feature=header["feature"], rows=tuple(rows),
                          generated_at_ms=header["generated_at_ms"])


def write_report(report: ContrastReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(render_report(report, fmt="records"))


def read_report(path) -> ContrastReport:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_report(fh.read())


# ---------------------------------------------------------------------------
# Expert tags

@dataclass(frozen=True)
class ExpertTag:
    author: str
    key: str                      # grouping key, e.g. "page_type=Error"
    verdict: str
    note: str = ""
    ts_ms: int = field(default_factory=now_ms)

    def __post_init__(self):
        if self.verdict not in VERDICTS:
            raise InputError(
                f"verdict must be one of {VERDICTS}, got {self.verdict!r}")
        if not self.author or not self.key:
            raise InputError("tag author and key must be non-empty")

    def to_record(self) -> dict:
        return {"author": self.author, "key": self.key, "verdict": self.verdict,
                "note": self.note, "ts_ms": self.ts_ms}


def _record_crc(record: dict) -> int:
    canon = json.dumps(record, sort_keys=True, separators=(",", ":"))
    return zlib.crc32(canon.encode("utf-8"))


class TagStore:
    """Append-only, checksummed tag log on local disk.

    Single writer (serialized by an internal lock); any number of readers.
    Every record line carries a crc32; corruption raises IntegrityError on
    read rather than yielding partial data.
    """

    def __init__(self, path):
        self.path = str(path)
        self._lock = threading.Lock()
        if not os.path.exists(self.path):
            with open(self.path, "w", encoding="utf-8") as fh:
                fh.write(json.dumps({"format": TAGS_FORMAT,
                                     "version": FORMAT_VERSION},
                                    separators=(",", ":")) + "\n")
                fh.flush()
                os.fsync(fh.fileno())

    def record_tag(self, tag: ExpertTag) -> dict:
        """Durably append one tag; returns the written record."""
        record = tag.to_record()
        record["crc32"] = _record_crc(tag.to_record())
        line = json.dumps(record, sort_keys=True, separators=(",", ":"))
        with self._lock:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(line + "\n")
                fh.flush()
                os.fsync(fh.fileno())
        return record

    def list_tags(self, key: str | None = None) -> list:
        """All tags (optionally for one grouping key) in timestamp order."""
        tags = []
        with open(self.path, "r", encoding="utf-8") as fh:
            header_line = fh.readline().strip()
            try:
                header = json.loads(header_line)
            except json.JSONDecodeError as exc:
                raise IntegrityError(f"{self.path}: unreadable tag store header") from exc
            if header.get("format") != TAGS_FORMAT:
                raise FormatError(f"{self.path}: not a tag store")
            if header.get("version") != FORMAT_VERSION:
                raise FormatError(
                    f"{self.path}: unsupported tag store version {header.get('version')!r}")
            for line_no, line in enumerate(fh, start=2):
                line = line.strip()
                if not line:
                    continue
                try:
                    record = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise IntegrityError(
                        f"{self.path}:{line_no}: corrupt tag record") from exc
                crc = record.pop("crc32", None)
                if crc != _record_crc(record):
                    raise IntegrityError(
                        f"{self.path}:{line_no}: tag record checksum mismatch")
                tags.append(ExpertTag(author=record["author"], key=record["key"],
                                      verdict=record["verdict"], note=record["note"],
                                      ts_ms=record["ts_ms"]))
        if key is not None:
            tags = [t for t in tags if t.key == key]
        tags.sort(key=lambda t: t.ts_ms)  # stable: append order breaks ties
        return tags
