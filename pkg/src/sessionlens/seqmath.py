"""Numeric core: LSTM forward pass, sigmoid head, BCE loss, BPTT, Adadelta.

Everything here is pure float64 numpy over immutable inputs. The recurrence
is the standard single-layer LSTM

    i_t = sig(W_xi x_t + W_hi h_{t-1} + b_i)        input gate
    f_t = sig(W_xf x_t + W_hf h_{t-1} + b_f)        forget gate
    g_t = tanh(W_xc x_t + W_hc h_{t-1} + b_c)       cell candidate
    o_t = sig(W_xo x_t + W_ho h_{t-1} + b_o)        output gate
    c_t = f_t * c_{t-1} + i_t * g_t
    h_t = o_t * tanh(c_t)

with h_0 = c_0 = 0. The sequence embedding is h_T, the hidden state after
the last step. A dense sigmoid head maps it to an outcome probability, and
`backward` returns exact analytic gradients of the binary cross-entropy
through the whole unrolled recurrence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import InputError, ShapeError

# Gate order used everywhere arrays are stacked or serialized.
GATES = ("i", "f", "c", "o")

LSTM_FIELDS = (
    "w_xi", "w_xf", "w_xc", "w_xo",
    "w_hi", "w_hf", "w_hc", "w_ho",
    "b_i", "b_f", "b_c", "b_o",
)

BCE_CLIP = 1e-7        # probability clamp before log
PROB_FLOOR = 1e-15     # keeps predict strictly inside (0, 1)

# The embedding of a sequence is the final hidden state, a float64 vector
# of length hidden_dim.
Embedding = np.ndarray


def _as_f64(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64)


@dataclass(frozen=True)
class LstmParams:
    """Per-gate LSTM weights. Input weights are (hidden, input), recurrent
    weights (hidden, hidden), biases (hidden,)."""

    w_xi: np.ndarray
    w_xf: np.ndarray
    w_xc: np.ndarray
    w_xo: np.ndarray
    w_hi: np.ndarray
    w_hf: np.ndarray
    w_hc: np.ndarray
    w_ho: np.ndarray
    b_i: np.ndarray
    b_f: np.ndarray
    b_c: np.ndarray
    b_o: np.ndarray

    def __post_init__(self):
        h, d = self.w_xi.shape
        for name in LSTM_FIELDS:
            arr = getattr(self, name)
            want = (h, d) if name.startswith("w_x") else (h, h) if name.startswith("w_h") else (h,)
            if arr.shape != want:
                raise ShapeError(f"LstmParams.{name}: expected {want}, got {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise InputError(f"LstmParams.{name} contains non-finite values")

    @property
    def hidden_dim(self) -> int:
        return self.w_xi.shape[0]

    @property
    def input_dim(self) -> int:
        return self.w_xi.shape[1]

    def arrays(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in LSTM_FIELDS}


@dataclass(frozen=True)
class DenseParams:
    """Sigmoid head: probability = sig(weights . embedding + bias)."""

    weights: np.ndarray
    bias: float

    def __post_init__(self):
        w = _as_f64(self.weights)
        if w.ndim != 1:
            raise ShapeError(f"DenseParams.weights must be 1-D, got shape {w.shape}")
        if not (np.all(np.isfinite(w)) and math.isfinite(self.bias)):
            raise InputError("DenseParams contains non-finite values")


@dataclass
class GradientSet:
    """Partial derivatives of the loss, shape-congruent with the parameters."""

    w_xi: np.ndarray
    w_xf: np.ndarray
    w_xc: np.ndarray
    w_xo: np.ndarray
    w_hi: np.ndarray
    w_hf: np.ndarray
    w_hc: np.ndarray
    w_ho: np.ndarray
    b_i: np.ndarray
    b_f: np.ndarray
    b_c: np.ndarray
    b_o: np.ndarray
    dense_w: np.ndarray
    dense_b: float

    @classmethod
    def zeros(cls, input_dim: int, hidden_dim: int) -> "GradientSet":
        h, d = hidden_dim, input_dim
        return cls(
            *(np.zeros((h, d)) for _ in range(4)),
            *(np.zeros((h, h)) for _ in range(4)),
            *(np.zeros(h) for _ in range(4)),
            dense_w=np.zeros(h),
            dense_b=0.0,
        )

    def add(self, other: "GradientSet") -> "GradientSet":
        """Elementwise sum, used to accumulate per-sequence gradients."""
        kw = {name: getattr(self, name) + getattr(other, name) for name in LSTM_FIELDS}
        return GradientSet(**kw, dense_w=self.dense_w + other.dense_w,
                           dense_b=self.dense_b + other.dense_b)

    def scaled(self, factor: float) -> "GradientSet":
        kw = {name: getattr(self, name) * factor for name in LSTM_FIELDS}
        return GradientSet(**kw, dense_w=self.dense_w * factor,
                           dense_b=self.dense_b * factor)

    def flat(self) -> np.ndarray:
        """All entries concatenated into one vector (field order, C layout)."""
        parts = [getattr(self, name).ravel() for name in LSTM_FIELDS]
        parts.append(np.ravel(self.dense_w))
        parts.append(np.array([self.dense_b]))
        return np.concatenate(parts)


@dataclass(frozen=True)
class AdadeltaState:
    """Running E[g^2] and E[dx^2] accumulators, one entry per parameter."""

    sq_grad: dict
    sq_delta: dict
    rho: float = 0.95
    eps: float = 1e-6

    @classmethod
    def fresh(cls, lstm: LstmParams, dense: DenseParams,
              rho: float = 0.95, eps: float = 1e-6) -> "AdadeltaState":
        if not 0.0 < rho < 1.0:
            raise InputError(f"adadelta decay must be in (0,1), got {rho}")
        if eps <= 0.0:
            raise InputError(f"adadelta epsilon must be positive, got {eps}")
        zeros = {name: np.zeros_like(arr) for name, arr in lstm.arrays().items()}
        zeros["dense_w"] = np.zeros_like(_as_f64(dense.weights))
        zeros["dense_b"] = 0.0
        return cls(sq_grad=zeros, sq_delta={k: np.copy(v) if isinstance(v, np.ndarray) else v
                                            for k, v in zeros.items()},
                   rho=rho, eps=eps)


def init_params(input_dim: int, hidden_dim: int, seed: int,
                scale: float = 0.08, forget_bias: float = 1.0):
    """Seeded initialization: weights uniform in [-scale, scale], biases zero
    except the forget gate at +forget_bias (stabilizes early training).

    Draw order is fixed (input weights, recurrent weights, dense weights, in
    field order) so a seed pins the full parameter set bit-exactly.
    """
    if input_dim < 1 or hidden_dim < 1:
        raise ShapeError("input_dim and hidden_dim must be positive")
    rng = np.random.default_rng(seed)
    h, d = hidden_dim, input_dim
    wx = {f"w_x{g}": rng.uniform(-scale, scale, size=(h, d)) for g in GATES}
    wh = {f"w_h{g}": rng.uniform(-scale, scale, size=(h, h)) for g in GATES}
    biases = {f"b_{g}": (np.full(h, float(forget_bias)) if g == "f" else np.zeros(h))
              for g in GATES}
    lstm = LstmParams(**wx, **wh, **biases)
    dense = DenseParams(weights=rng.uniform(-scale, scale, size=h), bias=0.0)
    return lstm, dense


def sigmoid(x):
    """Elementwise logistic; exp overflow saturates cleanly to 0."""
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-_as_f64(x)))


def _check_seq(seq: np.ndarray, params: LstmParams) -> np.ndarray:
    seq = _as_f64(seq)
    if seq.ndim != 2:
        raise ShapeError(f"sequence must be 2-D (T, input_dim), got shape {seq.shape}")
    if seq.shape[0] < 1:
        raise ShapeError("sequence must contain at least one step")
    if seq.shape[1] != params.input_dim:
        raise ShapeError(
            f"sequence width {seq.shape[1]} != params input_dim {params.input_dim}")
    if not np.all(np.isfinite(seq)):
        raise InputError("sequence contains non-finite values")
    return seq


def _stacked(params: LstmParams):
    """Gate-stacked views: W_x (4h, d), W_h (4h, h), b (4h,)."""
    wx = np.concatenate([params.w_xi, params.w_xf, params.w_xc, params.w_xo], axis=0)
    wh = np.concatenate([params.w_hi, params.w_hf, params.w_hc, params.w_ho], axis=0)
    b = np.concatenate([params.b_i, params.b_f, params.b_c, params.b_o])
    return wx, wh, b


def _run_forward(seq: np.ndarray, params: LstmParams):
    """Unrolled recurrence with per-step caches kept for BPTT."""
    T = seq.shape[0]
    h_dim = params.hidden_dim
    wx, wh, b = _stacked(params)
    x_proj = seq @ wx.T + b  # (T, 4h), input contribution for every step

    gate_i = np.empty((T, h_dim))
    gate_f = np.empty((T, h_dim))
    gate_g = np.empty((T, h_dim))
    gate_o = np.empty((T, h_dim))
    cells = np.empty((T, h_dim))
    tanh_c = np.empty((T, h_dim))
    hidden = np.empty((T, h_dim))

    h = np.zeros(h_dim)
    c = np.zeros(h_dim)
    with np.errstate(over="ignore"):
        for t in range(T):
            a = x_proj[t] + wh @ h
            gate_i[t] = 1.0 / (1.0 + np.exp(-a[:h_dim]))
            gate_f[t] = 1.0 / (1.0 + np.exp(-a[h_dim:2 * h_dim]))
            gate_g[t] = np.tanh(a[2 * h_dim:3 * h_dim])
            gate_o[t] = 1.0 / (1.0 + np.exp(-a[3 * h_dim:]))
            c = gate_f[t] * c + gate_i[t] * gate_g[t]
            cells[t] = c
            tanh_c[t] = np.tanh(c)
            h = gate_o[t] * tanh_c[t]
            hidden[t] = h
    return {
        "seq": seq, "hidden": hidden, "cells": cells, "tanh_c": tanh_c,
        "gate_i": gate_i, "gate_f": gate_f, "gate_g": gate_g, "gate_o": gate_o,
        "wh": wh,
    }


def lstm_forward(seq, params: LstmParams):
    """Run the recurrence over a (T, input_dim) sequence.

    Returns (hidden_states, embedding): all T hidden states as a (T, hidden)
    matrix, and the embedding = hidden state after the final step. Hidden
    state at step t depends only on rows 0..t of the input.
    """
    seq = _check_seq(seq, params)
    cache = _run_forward(seq, params)
    hidden = cache["hidden"]
    return hidden, hidden[-1].copy()


def _head_logit(embedding: np.ndarray, dense: DenseParams) -> float:
    return float(_as_f64(dense.weights) @ embedding + dense.bias)


def head_probabilities(hidden_states: np.ndarray, dense: DenseParams) -> np.ndarray:
    """Apply the sigmoid head to each hidden state (one value per prefix)."""
    logits = hidden_states @ _as_f64(dense.weights) + dense.bias
    return np.clip(sigmoid(logits), PROB_FLOOR, 1.0 - PROB_FLOOR)


def predict(seq, lstm: LstmParams, dense: DenseParams) -> float:
    """Outcome probability for the full sequence, strictly inside (0, 1)."""
    if _as_f64(dense.weights).shape[0] != lstm.hidden_dim:
        raise ShapeError("dense weights length != lstm hidden_dim")
    _, embedding = lstm_forward(seq, lstm)
    z = sigmoid(_head_logit(embedding, dense))
    return float(np.clip(z, PROB_FLOOR, 1.0 - PROB_FLOOR))


def _check_label(label) -> float:
    if label not in (0, 1):
        raise InputError(f"label must be 0 or 1, got {label!r}")
    return float(label)


def bce_loss(z: float, label, pos_weight: float = 1.0) -> float:
    """Binary cross-entropy on the clamped probability.

    z is clipped to [BCE_CLIP, 1 - BCE_CLIP] before the logs so saturated
    predictions yield a large finite loss. pos_weight scales the label=1
    term (class-imbalance aid; 1.0 means plain BCE).
    """
    y = _check_label(label)
    if not (0.0 <= z <= 1.0):
        raise InputError(f"probability must be in [0,1], got {z}")
    zc = min(max(z, BCE_CLIP), 1.0 - BCE_CLIP)
    return -(pos_weight * y * math.log(zc) + (1.0 - y) * math.log(1.0 - zc))


def backward(seq, label, lstm: LstmParams, dense: DenseParams,
             pos_weight: float = 1.0):
    """Loss and exact gradients of bce_loss(predict(seq)) for one sequence.

    The gradient at the head is computed in logit space (numerically stable;
    equals the clamped-loss derivative wherever the clamp is inactive), then
    propagated through every unrolled step.
    """
    seq = _check_seq(seq, lstm)
    d_w = _as_f64(dense.weights)
    if d_w.shape[0] != lstm.hidden_dim:
        raise ShapeError("dense weights length != lstm hidden_dim")
    y = _check_label(label)

    cache = _run_forward(seq, lstm)
    hidden = cache["hidden"]
    embedding = hidden[-1]
    z = float(np.clip(sigmoid(_head_logit(embedding, dense)), PROB_FLOOR, 1.0 - PROB_FLOOR))
    loss = bce_loss(z, label, pos_weight=pos_weight)

    # dL/dlogit for weighted BCE: y=0 -> z, y=1 -> pos_weight * (z - 1)
    dlogit = z * ((1.0 - y) + pos_weight * y) - pos_weight * y

    T = seq.shape[0]
    h_dim = lstm.hidden_dim
    gi, gf, gg, go = cache["gate_i"], cache["gate_f"], cache["gate_g"], cache["gate_o"]
    cells, tanh_c, wh = cache["cells"], cache["tanh_c"], cache["wh"]

    da_all = np.empty((T, 4 * h_dim))
    dh = dlogit * d_w
    dc = np.zeros(h_dim)
    for t in range(T - 1, -1, -1):
        do = dh * tanh_c[t]
        dc = dc + dh * go[t] * (1.0 - tanh_c[t] ** 2)
        c_prev = cells[t - 1] if t > 0 else 0.0
        da_i = dc * gg[t] * gi[t] * (1.0 - gi[t])
        da_f = dc * c_prev * gf[t] * (1.0 - gf[t])
        da_g = dc * gi[t] * (1.0 - gg[t] ** 2)
        da_o = do * go[t] * (1.0 - go[t])
        da_all[t, :h_dim] = da_i
        da_all[t, h_dim:2 * h_dim] = da_f
        da_all[t, 2 * h_dim:3 * h_dim] = da_g
        da_all[t, 3 * h_dim:] = da_o
        dh = wh.T @ da_all[t]
        dc = dc * gf[t]

    h_prev = np.vstack([np.zeros(h_dim), hidden[:-1]])
    dwx = da_all.T @ seq       # (4h, d)
    dwh = da_all.T @ h_prev    # (4h, h)
    db = da_all.sum(axis=0)    # (4h,)

    s = [slice(k * h_dim, (k + 1) * h_dim) for k in range(4)]
    grads = GradientSet(
        w_xi=dwx[s[0]], w_xf=dwx[s[1]], w_xc=dwx[s[2]], w_xo=dwx[s[3]],
        w_hi=dwh[s[0]], w_hf=dwh[s[1]], w_hc=dwh[s[2]], w_ho=dwh[s[3]],
        b_i=db[s[0]], b_f=db[s[1]], b_c=db[s[2]], b_o=db[s[3]],
        dense_w=dlogit * embedding.copy(),
        dense_b=dlogit,
    )
    return loss, grads


def adadelta_step(lstm: LstmParams, dense: DenseParams, grads: GradientSet,
                  state: AdadeltaState):
    """One Adadelta update (Zeiler's rule), elementwise per parameter:

        E[g^2]  <- rho E[g^2] + (1-rho) g^2
        dx      = -sqrt(E[dx^2] + eps) / sqrt(E[g^2] + eps) * g
        E[dx^2] <- rho E[dx^2] + (1-rho) dx^2
        x       <- x + dx

    Returns new (lstm, dense, state); inputs are left untouched.
    """
    rho, eps = state.rho, state.eps
    new_sq_g: dict = {}
    new_sq_d: dict = {}

    def upd(name, value, grad):
        g = grad
        eg = rho * state.sq_grad[name] + (1.0 - rho) * g * g
        dx = -np.sqrt(state.sq_delta[name] + eps) / np.sqrt(eg + eps) * g
        new_sq_g[name] = eg
        new_sq_d[name] = rho * state.sq_delta[name] + (1.0 - rho) * dx * dx
        return value + dx

    lstm_kw = {}
    for name in LSTM_FIELDS:
        p, g = getattr(lstm, name), getattr(grads, name)
        if p.shape != np.shape(g):
            raise ShapeError(f"gradient {name} shape {np.shape(g)} != param {p.shape}")
        lstm_kw[name] = upd(name, p, g)
    if _as_f64(dense.weights).shape != np.shape(grads.dense_w):
        raise ShapeError("dense weight gradient shape mismatch")
    new_dense = DenseParams(
        weights=upd("dense_w", _as_f64(dense.weights), _as_f64(grads.dense_w)),
        bias=float(upd("dense_b", dense.bias, grads.dense_b)),
    )
    new_state = replace(state, sq_grad=new_sq_g, sq_delta=new_sq_d)
    return LstmParams(**lstm_kw), new_dense, new_state
