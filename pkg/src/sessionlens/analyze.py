"""Post-training analysis: per-prefix prediction series, consecutive
distances, impact ranking, confusion partitioning and intent clustering.

Timestep convention: probabilities[t] is the outcome probability after
events[0..t] (0-based, length T). distances[j] = dist(probabilities[j],
probabilities[j+1]) has length T-1 and is attributed to the arrival of
event j+1, so an ImpactEvent at timestep t points at the event whose
arrival moved the prediction.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from math import comb

import numpy as np

from .errors import ClusteringError, FormatError, InputError
from .train import TrainedModel

log = logging.getLogger(__name__)

SERIES_FORMAT = "sessionlens-series"
IMPACTS_FORMAT = "sessionlens-impacts"
CLUSTERS_FORMAT = "sessionlens-clusters"
FORMAT_VERSION = 1

SERIES_CONVENTION = "probabilities[t] is the outcome probability after events[0..t]"

METRICS = {
    "absolute": lambda a, b: abs(a - b),
    "squared": lambda a, b: (a - b) ** 2,
}


@dataclass(frozen=True)
class PredictionSeries:
    session_id: str
    probabilities: np.ndarray      # length T, values in (0,1)

    def __post_init__(self):
        p = self.probabilities
        if p.ndim != 1 or p.shape[0] < 1:
            raise InputError(f"prediction series for {self.session_id} must be 1-D, T>=1")
        if np.any(p <= 0.0) or np.any(p >= 1.0):
            raise InputError(f"prediction series for {self.session_id} must lie in (0,1)")

    def __len__(self):
        return self.probabilities.shape[0]


@dataclass(frozen=True)
class DistanceSeries:
    session_id: str
    distances: np.ndarray          # length T-1, non-negative
    metric: str = "absolute"

    def __len__(self):
        return self.distances.shape[0]


@dataclass(frozen=True)
class ConfusionPartition:
    threshold: float
    tp: frozenset
    tn: frozenset
    fp: frozenset
    fn: frozenset

    @property
    def mispredicted(self) -> frozenset:
        return self.fp | self.fn

    @property
    def all_ids(self) -> frozenset:
        return self.tp | self.tn | self.fp | self.fn


@dataclass(frozen=True)
class IntentCluster:
    cluster_id: int
    members: tuple                 # session ids, input order
    centroid: np.ndarray
    dispersion: float              # RMS distance to centroid


@dataclass(frozen=True)
class ImpactEvent:
    session_id: str
    t: int                         # 0-based index of the arriving event
    distance: float
    direction: str                 # "rose" | "fell"
    event: dict                    # pre-scaling attribute snapshot


@dataclass(frozen=True)
class ThresholdPolicy:
    kind: str                      # "absolute" | "percentile"
    value: float

    def __post_init__(self):
        if self.kind not in ("absolute", "percentile"):
            raise InputError(f"unknown threshold policy {self.kind!r}")
        if self.kind == "percentile" and not 0.0 <= self.value <= 100.0:
            raise InputError(f"percentile must be in [0,100], got {self.value}")


DEFAULT_POLICY = ThresholdPolicy("percentile", 95.0)


@dataclass(frozen=True)
class SessionAnalysis:
    """Everything the exports and the impact ranking need for one session."""

    session_id: str
    series: PredictionSeries
    distances: DistanceSeries
    events: tuple                  # RawEvent, aligned with series rows
    label: int | None = None


# ---------------------------------------------------------------------------
# Series

def prefix_predictions(model: TrainedModel, seq) -> PredictionSeries:
    """Outcome probability after every prefix, in one forward pass.

    By prefix causality this equals running T separate forward passes over
    seq[:1], seq[:2], ... seq[:T].
    """
    probs = model.prefix_probabilities(seq)
    return PredictionSeries(session_id=seq.session_id, probabilities=probs)


def distance_series(series: PredictionSeries, metric="absolute") -> DistanceSeries:
    """Distances between consecutive prefix predictions (length T-1)."""
    if callable(metric):
        fn, name = metric, getattr(metric, "__name__", "custom")
    else:
        if metric not in METRICS:
            raise InputError(f"unknown distance metric {metric!r}")
        fn, name = METRICS[metric], metric
    p = series.probabilities
    if len(p) < 2:
        log.warning("session %s has a single prefix; empty distance series",
                    series.session_id)
        return DistanceSeries(series.session_id, np.zeros(0), metric=name)
    d = np.array([fn(p[j], p[j + 1]) for j in range(len(p) - 1)], dtype=np.float64)
    if np.any(d < 0):
        raise InputError(f"metric {name!r} produced a negative distance")
    return DistanceSeries(series.session_id, d, metric=name)


def analyze_sessions(model: TrainedModel, records, metric="absolute"):
    """Prediction and distance series for prepared sessions (dataset records)."""
    out = []
    for rec in records:
        series = prefix_predictions(model, rec.sequence)
        events = tuple(rec.session.events[-len(series):])
        out.append(SessionAnalysis(
            session_id=rec.session_id, series=series,
            distances=distance_series(series, metric=metric),
            events=events, label=rec.label))
    return out


# ---------------------------------------------------------------------------
# Impact ranking

def resolve_threshold(analyses, policy: ThresholdPolicy = DEFAULT_POLICY) -> float:
    """Absolute policies pass through; percentile pools every distance."""
    if policy.kind == "absolute":
        return float(policy.value)
    pooled = np.concatenate([a.distances.distances for a in analyses]) \
        if analyses else np.zeros(0)
    if pooled.size == 0:
        return float("inf")
    return float(np.percentile(pooled, policy.value))


def rank_impacts(analyses, policy: ThresholdPolicy = DEFAULT_POLICY):
    """Impact events at or above the threshold, sorted by distance
    descending with (session_id, t) tie-break."""
    threshold = resolve_threshold(analyses, policy)
    impacts = []
    for a in analyses:
        p = a.series.probabilities
        for j, dist in enumerate(a.distances.distances):
            if dist >= threshold:
                t = j + 1
                impacts.append(ImpactEvent(
                    session_id=a.session_id, t=t, distance=float(dist),
                    direction="rose" if p[t] > p[t - 1] else "fell",
                    event=a.events[t].attributes()))
    impacts.sort(key=lambda e: (-e.distance, e.session_id, e.t))
    return impacts


# ---------------------------------------------------------------------------
# Confusion partition

def confusion_partition(model: TrainedModel, sequences, labels,
                        threshold: float = 0.5) -> ConfusionPartition:
    """Split session ids by predicted-vs-real outcome at the threshold.

    Correctly predicted sessions are kept as ids only; the mispredicted
    sets feed the clustering stage.
    """
    if not sequences:
        raise InputError("confusion partition needs a non-empty labeled set")
    if len(sequences) != len(labels):
        raise InputError(f"{len(sequences)} sequences but {len(labels)} labels")
    buckets = {"tp": set(), "tn": set(), "fp": set(), "fn": set()}
    for seq, y in zip(sequences, labels):
        if y not in (0, 1):
            raise InputError(f"labels must be 0/1, got {y!r}")
        pred = 1 if model.predict(seq) >= threshold else 0
        key = ("tp" if y == 1 else "fp") if pred == 1 else ("fn" if y == 1 else "tn")
        buckets[key].add(seq.session_id)
    return ConfusionPartition(threshold=threshold,
                              tp=frozenset(buckets["tp"]), tn=frozenset(buckets["tn"]),
                              fp=frozenset(buckets["fp"]), fn=frozenset(buckets["fn"]))


# ---------------------------------------------------------------------------
# Clustering (seeded k-means++ over sequence embeddings)

def _kmeans_pp_init(points: np.ndarray, k: int, rng) -> np.ndarray:
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]))
    first = int(rng.integers(0, n))
    centers[0] = points[first]
    d2 = np.sum((points - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            raise ClusteringError("fewer distinct points than clusters")
        probs = d2 / total
        idx = int(rng.choice(n, p=probs))
        centers[j] = points[idx]
        d2 = np.minimum(d2, np.sum((points - centers[j]) ** 2, axis=1))
    return centers


def kmeans(points: np.ndarray, k: int, seed: int,
           max_iter: int = 100, tol: float = 1e-6):
    """Seeded k-means++ with Lloyd iterations; returns (assignments, centers).

    Stops when every centroid moves less than tol or after max_iter rounds.
    Ties in assignment go to the lowest cluster id; empty clusters are
    re-seeded with the point farthest from its centroid.
    """
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if k < 1:
        raise ClusteringError(f"k must be >= 1, got {k}")
    if n < k:
        raise ClusteringError(f"cannot form {k} clusters from {n} points")
    if np.unique(points, axis=0).shape[0] < k:
        raise ClusteringError("fewer distinct points than clusters")
    rng = np.random.default_rng(seed)
    centers = _kmeans_pp_init(points, k, rng)
    assign = np.zeros(n, dtype=int)
    for _ in range(max_iter):
        dists = np.linalg.norm(points[:, None, :] - centers[None, :, :], axis=2)
        assign = np.argmin(dists, axis=1)
        new_centers = centers.copy()
        reseeded: list[int] = []
        for j in range(k):
            mask = assign == j
            if mask.any():
                new_centers[j] = points[mask].mean(axis=0)
            else:
                per_point = dists[np.arange(n), assign].copy()
                per_point[reseeded] = -1.0
                far = int(np.argmax(per_point))
                new_centers[j] = points[far]
                assign[far] = j
                reseeded.append(far)
        movement = np.linalg.norm(new_centers - centers, axis=1).max()
        centers = new_centers
        if movement < tol:
            break
    dists = np.linalg.norm(points[:, None, :] - centers[None, :, :], axis=2)
    assign = np.argmin(dists, axis=1)
    return assign, centers


def cluster_mispredicted(model: TrainedModel, sequences, k: int, seed: int):
    """k-means over final-step embeddings of mispredicted sequences.

    Every input sequence lands in exactly one cluster; clusters come back
    as IntentCluster records with RMS dispersion.
    """
    if len(sequences) < k:
        raise ClusteringError(
            f"need at least k={k} mispredicted sequences, got {len(sequences)}")
    points = np.vstack([model.embedding(s) for s in sequences])
    assign, centers = kmeans(points, k, seed)
    clusters = []
    for j in range(k):
        mask = assign == j
        members = tuple(s.session_id for s, keep in zip(sequences, mask) if keep)
        sq = np.sum((points[mask] - centers[j]) ** 2, axis=1)
        dispersion = float(np.sqrt(sq.mean())) if mask.any() else 0.0
        clusters.append(IntentCluster(cluster_id=j, members=members,
                                      centroid=centers[j], dispersion=dispersion))
    if any(not c.members for c in clusters):
        raise ClusteringError("clustering produced an empty cluster")
    return clusters


# ---------------------------------------------------------------------------
# Cluster-quality metrics

def adjusted_rand_index(labels_a, labels_b) -> float:
    """Chance-corrected pair-counting agreement between two labelings."""
    a = list(labels_a)
    b = list(labels_b)
    if len(a) != len(b):
        raise InputError("labelings must have equal length")
    n = len(a)
    if n == 0:
        raise InputError("labelings must be non-empty")
    table: dict = {}
    for x, y in zip(a, b):
        table[(x, y)] = table.get((x, y), 0) + 1
    rows: dict = {}
    cols: dict = {}
    for (x, y), c in table.items():
        rows[x] = rows.get(x, 0) + c
        cols[y] = cols.get(y, 0) + c
    sum_cells = sum(comb(c, 2) for c in table.values())
    sum_rows = sum(comb(c, 2) for c in rows.values())
    sum_cols = sum(comb(c, 2) for c in cols.values())
    pairs = comb(n, 2)
    expected = sum_rows * sum_cols / pairs if pairs else 0.0
    max_index = 0.5 * (sum_rows + sum_cols)
    if max_index == expected:
        return 1.0
    return (sum_cells - expected) / (max_index - expected)


def silhouette_score(points: np.ndarray, assignments) -> float:
    """Mean silhouette over all points; singleton clusters contribute 0."""
    points = np.asarray(points, dtype=np.float64)
    assign = np.asarray(assignments)
    ids = np.unique(assign)
    if ids.size < 2:
        raise InputError("silhouette needs at least two clusters")
    dists = np.linalg.norm(points[:, None, :] - points[None, :, :], axis=2)
    scores = np.zeros(points.shape[0])
    for i in range(points.shape[0]):
        own = assign == assign[i]
        n_own = own.sum()
        if n_own <= 1:
            continue
        a = dists[i, own].sum() / (n_own - 1)
        b = min(dists[i, assign == c].mean() for c in ids if c != assign[i])
        scores[i] = (b - a) / max(a, b)
    return float(scores.mean())


# ---------------------------------------------------------------------------
# Exports (newline-delimited, session_id keyed; consumed by serve)

def _compact_event(attrs: dict) -> dict:
    return {k: attrs[k] for k in sorted(attrs)}


def write_series(analyses, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        header = {"format": SERIES_FORMAT, "version": FORMAT_VERSION,
                  "convention": SERIES_CONVENTION}
        fh.write(json.dumps(header, separators=(",", ":")) + "\n")
        for a in analyses:
            row = {"session_id": a.session_id, "label": a.label,
                   "probabilities": [float(p) for p in a.series.probabilities],
                   "distances": [float(d) for d in a.distances.distances],
                   "metric": a.distances.metric,
                   "events": [_compact_event(e.attributes()) for e in a.events]}
            fh.write(json.dumps(row, separators=(",", ":")) + "\n")


def write_impacts(impacts, path, policy: ThresholdPolicy, threshold: float) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        header = {"format": IMPACTS_FORMAT, "version": FORMAT_VERSION,
                  "policy": {"kind": policy.kind, "value": policy.value},
                  "threshold": threshold}
        fh.write(json.dumps(header, separators=(",", ":")) + "\n")
        for e in impacts:
            row = {"session_id": e.session_id, "t": e.t, "distance": e.distance,
                   "direction": e.direction, "event": _compact_event(e.event)}
            fh.write(json.dumps(row, separators=(",", ":")) + "\n")


def write_clusters(clusters, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        header = {"format": CLUSTERS_FORMAT, "version": FORMAT_VERSION,
                  "k": len(clusters)}
        fh.write(json.dumps(header, separators=(",", ":")) + "\n")
        for c in clusters:
            row = {"cluster_id": c.cluster_id, "members": list(c.members),
                   "centroid": [float(v) for v in c.centroid],
                   "dispersion": c.dispersion}
            fh.write(json.dumps(row, separators=(",", ":")) + "\n")


def load_export(path, expected_format: str):
    """Read an export file; returns (header, raw row lines, parsed rows)."""
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline().strip()
        try:
            header = json.loads(first)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: unreadable export header") from exc
        if header.get("format") != expected_format:
            raise FormatError(
                f"{path}: expected format {expected_format!r}, got {header.get('format')!r}")
        if header.get("version") != FORMAT_VERSION:
            raise FormatError(f"{path}: unsupported version {header.get('version')!r}")
        raw, parsed = [], []
        for line in fh:
            line = line.strip()
            if line:
                raw.append(line)
                parsed.append(json.loads(line))
    return header, raw, parsed


def read_impacts(path):
    """Impacts export back as ImpactEvent records (header, impacts)."""
    header, _, rows = load_export(path, IMPACTS_FORMAT)
    impacts = [ImpactEvent(session_id=r["session_id"], t=r["t"],
                           distance=r["distance"], direction=r["direction"],
                           event=r["event"]) for r in rows]
    return header, impacts
