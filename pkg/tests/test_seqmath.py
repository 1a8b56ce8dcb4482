"""Numeric core tests: forward/backward oracles, Adadelta rule, properties."""

import math

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sessionlens import seqmath as sm
from sessionlens.errors import InputError, ShapeError


def zero_params(input_dim, hidden_dim):
    g = sm.GradientSet.zeros(input_dim, hidden_dim)
    lstm = sm.LstmParams(**{n: getattr(g, n) for n in sm.LSTM_FIELDS})
    dense = sm.DenseParams(weights=np.zeros(hidden_dim), bias=0.0)
    return lstm, dense


def scalar_params(wxi, wxf, wxc, wxo, whi, whf, whc, who, bi, bf, bc, bo):
    a = lambda v: np.array([[float(v)]])
    b = lambda v: np.array([float(v)])
    return sm.LstmParams(
        w_xi=a(wxi), w_xf=a(wxf), w_xc=a(wxc), w_xo=a(wxo),
        w_hi=a(whi), w_hf=a(whf), w_hc=a(whc), w_ho=a(who),
        b_i=b(bi), b_f=b(bf), b_c=b(bc), b_o=b(bo),
    )


class TestForward:
    def test_zero_params_zero_embedding(self):
        lstm, _ = zero_params(3, 4)
        seq = np.array([[1.0, -2.0, 0.5], [0.1, 0.2, 0.3], [5.0, 5.0, 5.0]])
        hidden, emb = sm.lstm_forward(seq, lstm)
        # gates sit at 0.5 but the candidate tanh(0)=0 pins c and h to zero
        npt.assert_array_equal(emb, np.zeros(4))
        npt.assert_array_equal(hidden, np.zeros((3, 4)))

    def test_single_step_matches_scalar_recurrence(self):
        # Independent scalar oracle (math module, no numpy):
        #   i = sig(0.5*1 + 0.1) ; f = sig(-0.3*1 + 1.0) ; g = tanh(0.8*1 - 0.2)
        #   o = sig(0.2*1 + 0.05) ; c = i*g ; h = o*tanh(c)
        # evaluated by hand in a plain-Python session.
        lstm = scalar_params(0.5, -0.3, 0.8, 0.2, 0.1, 0.2, -0.1, 0.3,
                             0.1, 1.0, -0.2, 0.05)
        hidden, emb = sm.lstm_forward(np.array([[1.0]]), lstm)
        assert emb[0] == pytest.approx(0.1874800359481923, abs=1e-15)
        assert hidden[0, 0] == emb[0]

    def test_prefix_causality(self):
        rng = np.random.default_rng(3)
        lstm, _ = random_params(rng, input_dim=3, hidden_dim=5)
        seq = rng.normal(size=(5, 3))
        full, _ = sm.lstm_forward(seq, lstm)
        pre, _ = sm.lstm_forward(seq[:3], lstm)
        npt.assert_array_equal(full[:3], pre)

    def test_shape_and_finite_errors(self):
        lstm, _ = zero_params(3, 4)
        with pytest.raises(ShapeError):
            sm.lstm_forward(np.zeros((2, 2)), lstm)
        with pytest.raises(ShapeError):
            sm.lstm_forward(np.zeros((0, 3)), lstm)
        with pytest.raises(InputError):
            sm.lstm_forward(np.array([[1.0, np.nan, 0.0]]), lstm)


def random_params(rng, input_dim, hidden_dim, scale=0.4):
    kw = {}
    for name in sm.LSTM_FIELDS:
        shape = ((hidden_dim, input_dim) if name.startswith("w_x")
                 else (hidden_dim, hidden_dim) if name.startswith("w_h")
                 else (hidden_dim,))
        kw[name] = rng.uniform(-scale, scale, size=shape)
    dense = sm.DenseParams(weights=rng.uniform(-scale, scale, size=hidden_dim),
                           bias=float(rng.uniform(-0.5, 0.5)))
    return sm.LstmParams(**kw), dense


class TestPredict:
    def test_zero_params_gives_half(self):
        lstm, dense = zero_params(2, 3)
        assert sm.predict(np.zeros((4, 2)), lstm, dense) == 0.5

    def test_bias_only_logistic(self):
        lstm, _ = zero_params(2, 3)
        dense = sm.DenseParams(weights=np.zeros(3), bias=2.0)
        # sig(2) evaluated independently with math.exp
        assert sm.predict(np.ones((2, 2)), lstm, dense) == pytest.approx(
            0.8807970779778823, abs=1e-15)

    def test_composes_embedding_and_logistic(self):
        rng = np.random.default_rng(11)
        lstm, dense = random_params(rng, 4, 6)
        seq = rng.normal(size=(5, 4))
        _, emb = sm.lstm_forward(seq, lstm)
        expected = 1.0 / (1.0 + math.exp(-(float(dense.weights @ emb) + dense.bias)))
        assert sm.predict(seq, lstm, dense) == pytest.approx(expected, abs=1e-15)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1))
    def test_output_open_interval_and_deterministic(self, seed):
        rng = np.random.default_rng(seed)
        lstm, dense = random_params(rng, 3, 4, scale=3.0)
        seq = rng.normal(scale=5.0, size=(rng.integers(1, 7), 3))
        z1 = sm.predict(seq, lstm, dense)
        z2 = sm.predict(seq.copy(), lstm, dense)
        assert 0.0 < z1 < 1.0
        assert z1 == z2


class TestBce:
    def test_half_is_ln2(self):
        assert sm.bce_loss(0.5, 1) == pytest.approx(0.6931471805599453, abs=1e-15)
        assert sm.bce_loss(0.5, 0) == pytest.approx(0.6931471805599453, abs=1e-15)

    def test_perfect_prediction_near_zero(self):
        assert sm.bce_loss(1.0, 1) == pytest.approx(0.0, abs=1e-6)
        assert sm.bce_loss(0.0, 0) == pytest.approx(0.0, abs=1e-6)

    def test_clamped_worst_case(self):
        # -ln(1e-7), the clamp kicking in at z=0
        assert sm.bce_loss(0.0, 1) == pytest.approx(16.11809565095832, rel=1e-12)

    def test_bad_label_rejected(self):
        with pytest.raises(InputError):
            sm.bce_loss(0.5, 2)
        with pytest.raises(InputError):
            sm.bce_loss(0.5, 0.3)

    def test_bad_probability_rejected(self):
        with pytest.raises(InputError):
            sm.bce_loss(1.2, 1)
        with pytest.raises(InputError):
            sm.bce_loss(float("nan"), 1)


def finite_difference_grads(seq, label, lstm, dense, step=1e-5, pos_weight=1.0):
    """Central-difference oracle over every parameter entry."""

    def loss_with(lstm_arrays, dense_w, dense_b):
        p = sm.LstmParams(**lstm_arrays)
        d = sm.DenseParams(weights=dense_w, bias=dense_b)
        z = sm.predict(seq, p, d)
        return sm.bce_loss(z, label, pos_weight=pos_weight)

    arrays = {n: getattr(lstm, n).copy() for n in sm.LSTM_FIELDS}
    out = {}
    for name in sm.LSTM_FIELDS:
        base = arrays[name]
        g = np.empty_like(base)
        it = np.nditer(base, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = base[idx]
            base[idx] = orig + step
            up = loss_with(arrays, dense.weights, dense.bias)
            base[idx] = orig - step
            down = loss_with(arrays, dense.weights, dense.bias)
            base[idx] = orig
            g[idx] = (up - down) / (2 * step)
        out[name] = g
    w = dense.weights.copy()
    gw = np.empty_like(w)
    for i in range(w.size):
        orig = w[i]
        w[i] = orig + step
        up = loss_with(arrays, w, dense.bias)
        w[i] = orig - step
        down = loss_with(arrays, w, dense.bias)
        w[i] = orig
        gw[i] = (up - down) / (2 * step)
    out["dense_w"] = gw
    up = loss_with(arrays, w, dense.bias + step)
    down = loss_with(arrays, w, dense.bias - step)
    out["dense_b"] = (up - down) / (2 * step)
    return out


def assert_close_rel(analytic, numeric, rtol=1e-4, floor=1e-3):
    a, f = np.asarray(analytic), np.asarray(numeric)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(f)), floor)
    worst = np.max(np.abs(a - f) / denom)
    assert worst <= rtol, f"gradient mismatch: worst rel err {worst:.3e}"


class TestBackward:
    def test_matches_finite_differences(self):
        rng = np.random.default_rng(2024)
        for trial in range(6):
            h = int(rng.integers(1, 9))
            d = int(rng.integers(1, 5))
            T = int(rng.integers(1, 7))
            lstm, dense = random_params(rng, d, h)
            seq = rng.normal(size=(T, d))
            label = int(rng.integers(0, 2))
            loss, grads = sm.backward(seq, label, lstm, dense)
            assert loss == pytest.approx(
                sm.bce_loss(sm.predict(seq, lstm, dense), label), abs=1e-12)
            numeric = finite_difference_grads(seq, label, lstm, dense)
            for name in sm.LSTM_FIELDS:
                assert_close_rel(getattr(grads, name), numeric[name])
            assert_close_rel(grads.dense_w, numeric["dense_w"])
            assert_close_rel(grads.dense_b, numeric["dense_b"])

    def test_pos_weight_gradient(self):
        rng = np.random.default_rng(5)
        lstm, dense = random_params(rng, 3, 4)
        seq = rng.normal(size=(4, 3))
        _, grads = sm.backward(seq, 1, lstm, dense, pos_weight=3.0)
        numeric = finite_difference_grads(seq, 1, lstm, dense, pos_weight=3.0)
        for name in sm.LSTM_FIELDS:
            assert_close_rel(getattr(grads, name), numeric[name])

    def test_saturated_correct_prediction_has_tiny_gradient(self):
        rng = np.random.default_rng(9)
        lstm, _ = random_params(rng, 2, 3)
        dense = sm.DenseParams(weights=np.zeros(3), bias=40.0)  # z = 1 to machine eps
        _, grads = sm.backward(rng.normal(size=(3, 2)), 1, lstm, dense)
        assert np.linalg.norm(grads.flat()) < 1e-6

    def test_summed_duplicate_doubles_gradient(self):
        rng = np.random.default_rng(13)
        lstm, dense = random_params(rng, 3, 4)
        seq = rng.normal(size=(5, 3))
        _, g1 = sm.backward(seq, 0, lstm, dense)
        total = g1.add(g1)
        npt.assert_array_equal(total.flat(), g1.scaled(2.0).flat())


def scalar_adadelta_reference(grads, rho, eps, steps):
    """Independent per-entry recurrence: plain Python floats, no arrays."""
    eg, ed, x = 0.0, 0.0, 0.0
    trace = []
    for g in grads[:steps]:
        eg = rho * eg + (1 - rho) * g * g
        dx = -math.sqrt(ed + eps) / math.sqrt(eg + eps) * g
        ed = rho * ed + (1 - rho) * dx * dx
        x += dx
        trace.append(x)
    return trace


class TestAdadelta:
    def setup_method(self):
        self.lstm, self.dense = zero_params(1, 1)
        self.state = sm.AdadeltaState.fresh(self.lstm, self.dense)

    def grad_with(self, value):
        g = sm.GradientSet.zeros(1, 1)
        g.w_xi = np.array([[value]])
        return g

    def test_zero_gradient_is_noop(self):
        lstm2, dense2, state2 = sm.adadelta_step(
            self.lstm, self.dense, sm.GradientSet.zeros(1, 1), self.state)
        for name in sm.LSTM_FIELDS:
            npt.assert_array_equal(getattr(lstm2, name), getattr(self.lstm, name))
        npt.assert_array_equal(dense2.weights, self.dense.weights)
        assert dense2.bias == self.dense.bias
        # accumulators decay toward zero (here they start at zero and stay)
        assert all(np.all(v == 0) for v in state2.sq_grad.values())

    def test_accumulator_decay(self):
        _, _, state = sm.adadelta_step(self.lstm, self.dense, self.grad_with(1.0), self.state)
        before = state.sq_grad["w_xi"][0, 0]
        _, _, state2 = sm.adadelta_step(self.lstm, self.dense, self.grad_with(0.0), state)
        assert 0 < state2.sq_grad["w_xi"][0, 0] == pytest.approx(0.95 * before, rel=1e-12)

    def test_first_step_hand_value(self):
        # hand evaluation of the two-line rule: E[g^2]=0.05,
        # dx = -sqrt(1e-6 / 0.050001)
        lstm2, _, _ = sm.adadelta_step(self.lstm, self.dense, self.grad_with(1.0), self.state)
        assert lstm2.w_xi[0, 0] == pytest.approx(-0.0044720912343108364, rel=1e-12)

    def test_two_steps_match_scalar_reference(self):
        grads = [0.7, 0.7]
        expected = scalar_adadelta_reference(grads, rho=0.95, eps=1e-6, steps=2)
        lstm, dense, state = self.lstm, self.dense, self.state
        for g, want in zip(grads, expected):
            lstm, dense, state = sm.adadelta_step(lstm, dense, self.grad_with(g), state)
            assert lstm.w_xi[0, 0] == pytest.approx(want, rel=1e-14)

    def test_longer_run_matches_scalar_reference(self):
        rng = np.random.default_rng(77)
        grads = [float(v) for v in rng.normal(size=20)]
        expected = scalar_adadelta_reference(grads, rho=0.95, eps=1e-6, steps=20)
        lstm, dense, state = self.lstm, self.dense, self.state
        for g in grads:
            lstm, dense, state = sm.adadelta_step(lstm, dense, self.grad_with(g), state)
        assert lstm.w_xi[0, 0] == pytest.approx(expected[-1], rel=1e-12)

    def test_shape_mismatch_rejected(self):
        bad = sm.GradientSet.zeros(2, 1)
        with pytest.raises(ShapeError):
            sm.adadelta_step(self.lstm, self.dense, bad, self.state)


def toy_problem():
    """8 short sequences whose label is carried by the sign of column 0."""
    rng = np.random.default_rng(42)
    seqs, labels = [], []
    for k in range(8):
        y = k % 2
        T = 3 + (k % 3)
        seq = np.column_stack([np.full(T, 1.0 if y else -1.0),
                               rng.uniform(-0.2, 0.2, T)])
        seqs.append(seq)
        labels.append(y)
    return seqs, labels


class TestTrainingDynamics:
    def test_fifty_full_batch_steps_halve_loss(self):
        seqs, labels = toy_problem()
        lstm, dense = sm.init_params(2, 4, seed=7)
        state = sm.AdadeltaState.fresh(lstm, dense)

        def total(lstm, dense):
            return sum(sm.bce_loss(sm.predict(s, lstm, dense), y)
                       for s, y in zip(seqs, labels))

        baseline = total(lstm, dense)
        for _ in range(50):
            acc = sm.GradientSet.zeros(2, 4)
            for s, y in zip(seqs, labels):
                _, g = sm.backward(s, y, lstm, dense)
                acc = acc.add(g)
            lstm, dense, state = sm.adadelta_step(lstm, dense, acc, state)
        assert total(lstm, dense) < 0.5 * baseline

    def test_init_is_seeded_and_stable(self):
        a = sm.init_params(3, 5, seed=123)
        b = sm.init_params(3, 5, seed=123)
        for x, y in zip(a[0].arrays().values(), b[0].arrays().values()):
            npt.assert_array_equal(x, y)
        npt.assert_array_equal(a[1].weights, b[1].weights)
        npt.assert_array_equal(a[0].b_f, np.ones(5))  # forget bias +1
        npt.assert_array_equal(a[0].b_i, np.zeros(5))
