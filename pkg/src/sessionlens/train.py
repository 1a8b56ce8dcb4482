"""Training loop, time-window splits, evaluation, model persistence.

The model file is a versioned binary container:

    bytes 0..7    magic  b"SLNSMODL"
    u32 LE        container version (currently 1)
    u32 LE        header length in bytes
    header        UTF-8 JSON: dims, feature schema, scaler columns, metadata
    blocks        little-endian float64 arrays, in BLOCK_ORDER
    trailer       sha256 of everything above (32 bytes)

Weights round-trip bit-exactly; loading verifies magic, version and
checksum before touching any payload.
"""

from __future__ import annotations

import hashlib
import json
import logging
import struct
from dataclasses import asdict, dataclass, field

import numpy as np

from . import seqmath
from .errors import (EvalError, InputError, IntegrityError, SchemaError,
                     SplitError, TrainingDiverged, VersionError)
from .ingest import ActionSequence, FeatureSchema, Scaler, apply_scaler
from .seqmath import AdadeltaState, DenseParams, GradientSet, LstmParams

log = logging.getLogger(__name__)

MAGIC = b"SLNSMODL"
CONTAINER_VERSION = 1

BLOCK_ORDER = seqmath.LSTM_FIELDS + ("dense_w", "dense_b", "scaler_means", "scaler_stds")


@dataclass(frozen=True)
class Hyperparams:
    hidden_dim: int = 32
    epochs: int = 10
    batch_size: int = 32
    rho: float = 0.95
    eps: float = 1e-6
    init_scale: float = 0.08
    forget_bias: float = 1.0
    pos_weight: float = 1.0


@dataclass(frozen=True)
class TrainedModel:
    lstm: LstmParams
    dense: DenseParams
    scaler: Scaler
    schema: FeatureSchema
    metadata: dict = field(default_factory=dict)
    version: int = CONTAINER_VERSION

    def __post_init__(self):
        if self.scaler.schema_fingerprint != self.schema.fingerprint():
            raise SchemaError("scaler was fitted on a different schema")

    @property
    def schema_fingerprint(self) -> str:
        return self.scaler.schema_fingerprint

    def prepare(self, seq: ActionSequence) -> ActionSequence:
        """Scale a sequence with the model's scaler (no-op if already scaled)."""
        if seq.schema_fingerprint != self.schema_fingerprint:
            raise SchemaError(
                f"sequence {seq.session_id} does not match the model schema")
        return seq if seq.scaled else apply_scaler(seq, self.scaler)

    def predict(self, seq: ActionSequence) -> float:
        """Outcome probability for the full (prepared) sequence."""
        return seqmath.predict(self.prepare(seq).values, self.lstm, self.dense)

    def predict_at_k(self, seq: ActionSequence, k: int = 0) -> float:
        """Probability from the prefix that drops the final k events."""
        if seq.length <= k:
            raise EvalError(
                f"sequence {seq.session_id} has T={seq.length} <= k={k}")
        prepared = self.prepare(seq)
        return seqmath.predict(prepared.values[:seq.length - k],
                               self.lstm, self.dense)

    def prefix_probabilities(self, seq: ActionSequence) -> np.ndarray:
        """Outcome probability after each prefix, one forward pass."""
        hidden, _ = seqmath.lstm_forward(self.prepare(seq).values, self.lstm)
        return seqmath.head_probabilities(hidden, self.dense)

    def embedding(self, seq: ActionSequence) -> np.ndarray:
        _, emb = seqmath.lstm_forward(self.prepare(seq).values, self.lstm)
        return emb


# ---------------------------------------------------------------------------
# Splits

def split_by_time(items, tags, train_tags):
    """Partition items into (train, eval-by-tag) using their window tags.

    Eval windows may precede or follow the training window; the splits are
    disjoint by construction. Raises SplitError when no item lands in the
    training window; an empty eval side only logs a warning.
    """
    items = list(items)
    tags = list(tags)
    if len(items) != len(tags):
        raise SplitError(f"{len(items)} items but {len(tags)} window tags")
    train_tags = set(train_tags)
    train, eval_by_tag = [], {}
    for item, tag in zip(items, tags):
        if tag in train_tags:
            train.append(item)
        else:
            eval_by_tag.setdefault(tag, []).append(item)
    if not train:
        raise SplitError(f"no items in training windows {sorted(train_tags)}")
    if not eval_by_tag:
        log.warning("training windows %s cover every item; eval split is empty",
                    sorted(train_tags))
    return train, eval_by_tag


# ---------------------------------------------------------------------------
# Training

def _check_dataset(sequences, labels, scaler):
    if not sequences:
        raise InputError("training set is empty")
    if len(sequences) != len(labels):
        raise InputError(f"{len(sequences)} sequences but {len(labels)} labels")
    for seq in sequences:
        if seq.schema_fingerprint != scaler.schema_fingerprint:
            raise SchemaError(
                f"sequence {seq.session_id} does not match the scaler schema")
    for y in labels:
        if y not in (0, 1):
            raise InputError(f"labels must be 0/1, got {y!r}")


def train_model(sequences, labels, hparams: Hyperparams, seed: int,
                scaler: Scaler, schema: FeatureSchema, data_window=None):
    """Mini-batch BPTT with Adadelta; deterministic given the seed.

    Gradients are computed per sequence and summed over each batch in input
    order, then applied with one Adadelta step per batch. Returns
    (TrainedModel, per-epoch mean loss). Zero epochs returns the seeded
    initialization untouched.
    """
    _check_dataset(sequences, labels, scaler)
    input_dim = sequences[0].values.shape[1]
    mats = [s.values for s in sequences]
    ys = list(labels)

    lstm, dense = seqmath.init_params(
        input_dim, hparams.hidden_dim, seed,
        scale=hparams.init_scale, forget_bias=hparams.forget_bias)
    state = AdadeltaState.fresh(lstm, dense, rho=hparams.rho, eps=hparams.eps)
    shuffle_rng = np.random.default_rng([seed, 1])

    n = len(mats)
    curve = []
    for epoch in range(hparams.epochs):
        order = shuffle_rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, hparams.batch_size):
            batch = order[start:start + hparams.batch_size]
            acc = GradientSet.zeros(input_dim, hparams.hidden_dim)
            batch_loss = 0.0
            for idx in batch:
                loss, grads = seqmath.backward(
                    mats[idx], ys[idx], lstm, dense, pos_weight=hparams.pos_weight)
                batch_loss += loss
                acc = acc.add(grads)
            if not np.isfinite(batch_loss):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch}, batch {start // hparams.batch_size} "
                    f"(batch loss {batch_loss!r}, seed {seed})")
            epoch_loss += batch_loss
            lstm, dense, state = seqmath.adadelta_step(lstm, dense, acc, state)
        curve.append(epoch_loss / n)
        log.debug("epoch %d: mean loss %.6f", epoch, curve[-1])

    metadata = {"seed": seed, "hyperparams": asdict(hparams),
                "data_window": data_window, "n_train": n}
    model = TrainedModel(lstm=lstm, dense=dense, scaler=scaler, schema=schema,
                         metadata=metadata)
    return model, curve


# ---------------------------------------------------------------------------
# Evaluation

@dataclass(frozen=True)
class EvalReport:
    k: int
    threshold: float
    tp: int
    fp: int
    tn: int
    fn: int
    excluded: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def accuracy(self) -> float:
        return (self.tp + self.tn) / self.total if self.total else 0.0

    @property
    def precision(self) -> float:
        denom = self.tp + self.fp
        return self.tp / denom if denom else 0.0

    @property
    def recall(self) -> float:
        denom = self.tp + self.fn
        return self.tp / denom if denom else 0.0

    def to_dict(self) -> dict:
        return {"k": self.k, "threshold": self.threshold,
                "counts": {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn},
                "excluded": self.excluded, "evaluated": self.total,
                "accuracy": self.accuracy, "precision": self.precision,
                "recall": self.recall}


def evaluate_at_k(model: TrainedModel, sequences, labels, k: int,
                  threshold: float = 0.5) -> EvalReport:
    """Classify each sequence from its prefix of length T - k.

    Sequences with T <= k cannot be evaluated and are excluded (counted in
    the report). Decision rule: probability >= threshold predicts outcome 1.
    """
    if k < 0:
        raise InputError(f"k must be >= 0, got {k}")
    if len(sequences) != len(labels):
        raise InputError(f"{len(sequences)} sequences but {len(labels)} labels")
    tp = fp = tn = fn = excluded = 0
    for seq, y in zip(sequences, labels):
        if y not in (0, 1):
            raise InputError(f"labels must be 0/1, got {y!r}")
        if seq.length <= k:
            excluded += 1
            continue
        pred = 1 if model.predict_at_k(seq, k) >= threshold else 0
        if pred == 1 and y == 1:
            tp += 1
        elif pred == 1 and y == 0:
            fp += 1
        elif pred == 0 and y == 0:
            tn += 1
        else:
            fn += 1
    if tp + fp + tn + fn == 0:
        raise EvalError(f"no sequence is longer than k={k}; nothing to evaluate")
    return EvalReport(k=k, threshold=threshold, tp=tp, fp=fp, tn=tn, fn=fn,
                      excluded=excluded)


def roc_auc(labels, scores) -> float:
    """Rank-based AUC (ties get averaged ranks)."""
    labels = np.asarray(labels)
    scores = np.asarray(scores, dtype=np.float64)
    n_pos = int(np.sum(labels == 1))
    n_neg = int(np.sum(labels == 0))
    if n_pos == 0 or n_neg == 0:
        raise EvalError("AUC needs at least one positive and one negative label")
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(len(scores))
    i = 0
    srt = scores[order]
    while i < len(srt):
        j = i
        while j < len(srt) and srt[j] == srt[i]:
            j += 1
        ranks[order[i:j]] = 0.5 * (i + 1 + j)
        i = j
    pos_rank_sum = float(np.sum(ranks[labels == 1]))
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


# ---------------------------------------------------------------------------
# Persistence

def _blocks(model: TrainedModel) -> dict:
    arrays = dict(model.lstm.arrays())
    arrays["dense_w"] = np.asarray(model.dense.weights, dtype=np.float64)
    arrays["dense_b"] = np.array([model.dense.bias])
    arrays["scaler_means"] = np.asarray(model.scaler.means, dtype=np.float64)
    arrays["scaler_stds"] = np.asarray(model.scaler.stds, dtype=np.float64)
    return arrays


def save_model(model: TrainedModel, sink) -> None:
    """Serialize to the documented binary container (path or binary file)."""
    header = {
        "input_dim": model.lstm.input_dim,
        "hidden_dim": model.lstm.hidden_dim,
        "schema": model.schema.to_dict(),
        "schema_fingerprint": model.schema_fingerprint,
        "scaler_columns": list(model.scaler.columns),
        "metadata": model.metadata,
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    payload = bytearray()
    payload += MAGIC
    payload += struct.pack("<II", CONTAINER_VERSION, len(header_bytes))
    payload += header_bytes
    arrays = _blocks(model)
    for name in BLOCK_ORDER:
        payload += np.ascontiguousarray(arrays[name], dtype="<f8").tobytes()
    payload += hashlib.sha256(bytes(payload)).digest()
    if hasattr(sink, "write"):
        sink.write(bytes(payload))
    else:
        with open(sink, "wb") as fh:
            fh.write(bytes(payload))


def load_model(source) -> TrainedModel:
    """Read a model container, verifying magic, version and checksum."""
    if hasattr(source, "read"):
        data = source.read()
    else:
        with open(source, "rb") as fh:
            data = fh.read()
    if len(data) < len(MAGIC) + 8:
        raise IntegrityError("model file truncated (no header)")
    if data[:len(MAGIC)] != MAGIC:
        raise IntegrityError("not a sessionlens model file (bad magic)")
    version, header_len = struct.unpack_from("<II", data, len(MAGIC))
    if version != CONTAINER_VERSION:
        raise VersionError(
            f"unsupported model container version {version} (expected {CONTAINER_VERSION})")
    body_start = len(MAGIC) + 8
    if len(data) < body_start + header_len + 32:
        raise IntegrityError("model file truncated")
    digest = hashlib.sha256(data[:-32]).digest()
    if digest != data[-32:]:
        raise IntegrityError("model file checksum mismatch")
    header = json.loads(data[body_start:body_start + header_len].decode("utf-8"))
    h, d = header["hidden_dim"], header["input_dim"]
    n_numeric = len(header["scaler_columns"])
    shapes = {}
    for name in seqmath.LSTM_FIELDS:
        shapes[name] = (h, d) if name.startswith("w_x") else (h, h) if name.startswith("w_h") else (h,)
    shapes["dense_w"] = (h,)
    shapes["dense_b"] = (1,)
    shapes["scaler_means"] = (n_numeric,)
    shapes["scaler_stds"] = (n_numeric,)

    offset = body_start + header_len
    arrays = {}
    for name in BLOCK_ORDER:
        count = int(np.prod(shapes[name])) if shapes[name] else 0
        nbytes = count * 8
        block = data[offset:offset + nbytes]
        if len(block) != nbytes:
            raise IntegrityError(f"model file truncated inside block {name!r}")
        arrays[name] = np.frombuffer(block, dtype="<f8").astype(np.float64).reshape(shapes[name])
        offset += nbytes
    if offset != len(data) - 32:
        raise IntegrityError("model file has trailing garbage")

    schema = FeatureSchema.from_dict(header["schema"])
    if schema.fingerprint() != header["schema_fingerprint"]:
        raise IntegrityError("schema fingerprint does not match embedded schema")
    lstm = LstmParams(**{name: arrays[name] for name in seqmath.LSTM_FIELDS})
    dense = DenseParams(weights=arrays["dense_w"], bias=float(arrays["dense_b"][0]))
    scaler = Scaler(schema_fingerprint=header["schema_fingerprint"],
                    columns=tuple(header["scaler_columns"]),
                    means=arrays["scaler_means"], stds=arrays["scaler_stds"])
    return TrainedModel(lstm=lstm, dense=dense, scaler=scaler, schema=schema,
                        metadata=header["metadata"], version=version)
