"""Shared fixtures: tiny schemas, wrapped sequences, quick toy models."""

import numpy as np

from sessionlens import ingest, train


def numeric_schema(n_cols=2):
    return ingest.FeatureSchema(features=tuple(
        ingest.FeatureSpec(name=f"x{i}", kind="numeric", source=f"x{i}")
        for i in range(n_cols)))


def wrap_matrices(mats, schema, scaled=False, prefix="t"):
    fp = schema.fingerprint()
    return [ingest.ActionSequence(session_id=f"{prefix}{i:04d}",
                                  values=np.asarray(m, dtype=np.float64),
                                  schema_fingerprint=fp, scaled=scaled)
            for i, m in enumerate(mats)]


def separable_toy(n=8, seed=42):
    """Sequences whose label is the sign of column 0; schema + scaler included."""
    rng = np.random.default_rng(seed)
    schema = numeric_schema(2)
    mats, labels = [], []
    for k in range(n):
        y = k % 2
        T = 3 + (k % 3)
        mats.append(np.column_stack([np.full(T, 1.0 if y else -1.0),
                                     rng.uniform(-0.2, 0.2, T)]))
        labels.append(y)
    seqs = wrap_matrices(mats, schema)
    scaler = ingest.fit_scaler(seqs, schema)
    scaled = [ingest.apply_scaler(s, scaler) for s in seqs]
    return schema, scaler, scaled, labels


def toy_model(epochs=30, seed=7, hidden_dim=4):
    schema, scaler, scaled, labels = separable_toy()
    hp = train.Hyperparams(hidden_dim=hidden_dim, epochs=epochs, batch_size=8)
    model, curve = train.train_model(scaled, labels, hp, seed, scaler, schema)
    return model, curve, scaled, labels


def random_sequences(schema, n, seed, t_range=(1, 9), scale=1.0, prefix="r"):
    rng = np.random.default_rng(seed)
    width = schema.width
    mats = [rng.normal(scale=scale, size=(int(rng.integers(*t_range)), width))
            for _ in range(n)]
    return wrap_matrices(mats, schema, scaled=True, prefix=prefix)
