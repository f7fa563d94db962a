import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ae2lstm.errors import ShapeError, UsageError
from ae2lstm.fusion import FeatureSequence
from ae2lstm.lstm import (LstmModel, LstmTrainConfig, lstm_forward, lstm_loss, predict, split_validation,
                          train_lstm)
from ae2lstm.nn import gradient_check
from ae2lstm.rng import Rng


def sig(z):
    return 1.0 / (1.0 + math.exp(-z))


def seq(x, label=0, pid="p"):
    return FeatureSequence(pid, np.asarray(x, dtype=np.float64), label)


def scalar_cell(x, h, c, Wx, Wh, b):
    """One LSTM cell step written out per hidden unit (gate order i, f, o, g)."""
    H = len(h)
    a = [sum(Wx[r, k] * x[k] for k in range(len(x))) + sum(Wh[r, k] * h[k] for k in range(H)) + b[r]
         for r in range(4 * H)]
    h2, c2 = [], []
    for j in range(H):
        i, f, o = sig(a[j]), sig(a[H + j]), sig(a[2 * H + j])
        g = math.tanh(a[3 * H + j])
        cj = f * c[j] + i * g
        c2.append(cj)
        h2.append(o * math.tanh(cj))
    return h2, c2


def unrolled(model, xs):
    L1, L2 = model.layer1, model.layer2
    H = model.nh
    h1 = c1 = h2 = c2 = [0.0] * H
    for x in xs:
        h1, c1 = scalar_cell(x, h1, c1, L1.Wx.value, L1.Wh.value, L1.b.value)
        h2, c2 = scalar_cell(h1, h2, c2, L2.Wx.value, L2.Wh.value, L2.b.value)
    W, b = model.head.W.value, model.head.b.value
    return sig(sum(W[0, k] * h2[k] for k in range(H)) + b[0])


def test_zero_model_gives_half():
    m = LstmModel(3, 4)
    assert lstm_forward(m, seq(np.ones((5, 3)))) == 0.5
    assert predict(m, seq(np.ones((2, 3)))) == (0.5, 1)


@pytest.mark.parametrize("length", [1, 3])
def test_matches_scalar_unrolled_trace(length):
    m = LstmModel(3, 2, rng=Rng(1), dtype=np.float64)
    m.layer1.b.value[...] = Rng(2).uniform(-1, 1, size=8)
    xs = Rng(3).uniform(size=(length, 3))
    assert lstm_forward(m, seq(xs)) == pytest.approx(unrolled(m, xs), rel=1e-13)


def test_forget_bias_initialized_to_one():
    m = LstmModel(3, 4, rng=Rng(0))
    assert np.all(m.layer1.b.value[4:8] == 1) and np.all(m.layer2.b.value[4:8] == 1)
    assert not m.layer1.b.value[:4].any() and not m.layer1.b.value[8:].any()


def test_large_head_bias():
    m = LstmModel(3, 4, rng=Rng(0))
    m.head.b.value[...] = 20.0
    p, cls = predict(m, seq(np.zeros((2, 3))))
    assert p > 0.999 and cls == 1


def test_empty_sequence_rejected():
    with pytest.raises(UsageError):
        lstm_forward(LstmModel(3, 2), seq(np.zeros((0, 3))))


def test_feature_size_mismatch():
    with pytest.raises(ShapeError):
        lstm_forward(LstmModel(3, 2), seq(np.zeros((2, 4))))


def test_lstm_loss_values():
    assert lstm_loss([0.0, 1.0], [0, 1]) == 0
    assert lstm_loss([1.0], [0]) == 0.5
    assert lstm_loss([0.5, 0.5], [1, 0]) == 0.125
    with pytest.raises(UsageError):
        lstm_loss([0.5], [1, 0])


@pytest.mark.parametrize("lengths", [[5], [1, 3, 5, 2], [4, 4]])
def test_bptt_gradient(lengths):
    rng = Rng(len(lengths))
    m = LstmModel(4, 5, rng=rng, dtype=np.float64)
    seqs = [seq(rng.uniform(size=(T, 4))) for T in lengths]
    labels = [k % 2 for k in range(len(lengths))]
    res = gradient_check(lambda: m.loss_and_grad(seqs, labels), m.params(), step=1e-5, n_samples=None)
    assert res.passed(1e-4), res


def test_batch_invariance_bitwise():
    rng = Rng(8)
    m = LstmModel(6, 7, rng=rng)
    seqs = [seq(rng.uniform(size=(T, 6))) for T in [4, 1, 7, 2, 7, 3]]
    batched = m.forward_batch(seqs)
    single = np.array([lstm_forward(m, s) for s in seqs], dtype=batched.dtype)
    assert np.array_equal(batched, single)
    shuffled = m.forward_batch(seqs[::-1])[::-1]
    assert np.array_equal(batched, shuffled)


def test_padding_receives_zero_gradient():
    rng = Rng(9)
    m = LstmModel(3, 4, rng=rng, dtype=np.float64)
    short, long = seq(rng.uniform(size=(2, 3))), seq(rng.uniform(size=(6, 3)))
    m.loss_and_grad([short], [1])
    alone = [p.grad.copy() for p in m.params()]
    for p in m.params():
        p.zero_grad()
    # same short sequence padded next to a long one: its contribution is unchanged
    m.loss_and_grad([short, long], [1, 0])
    both = [p.grad.copy() for p in m.params()]
    for p in m.params():
        p.zero_grad()
    m.loss_and_grad([long], [0])
    long_only = [p.grad.copy() for p in m.params()]
    for a, b, c in zip(alone, both, long_only):
        np.testing.assert_allclose(b, (a + c) / 2, rtol=1e-10, atol=1e-14)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 30), st.floats(0.1, 20))
def test_state_bounds(seed, T, scale):
    rng = Rng(seed)
    m = LstmModel(3, 4, rng=rng, dtype=np.float64)
    for p in m.params():
        p.value *= scale
    X = rng.uniform(-1, 1, size=(1, T, 3))
    hs, (_, _, cs, _, _) = m.layer1.forward(X)
    assert np.all(np.abs(hs) < 1)
    # |c_t| <= |c_{t-1}| + 1 since f, i in (0,1) and |g| <= 1
    assert np.all(np.abs(cs[0, 1:]) <= np.arange(1, T + 1)[:, None] + 1e-12)


def _separable(n, T=4, d=3, seed=0):
    rng = Rng(seed)
    out = []
    for k in range(n):
        label = k % 2
        x = rng.uniform(0, 0.3, size=(T, d)) + 0.6 * label
        out.append(seq(x, label, f"s{k}"))
    return out


def test_training_reduces_loss():
    data = _separable(8)
    m = LstmModel(3, 16, rng=Rng(1))
    res = train_lstm(m, data, data, LstmTrainConfig(optimizer="adam", lr=1e-2, max_epochs=60, patience=60, seed=1))
    assert res.train_trace[res.best_epoch - 1] < res.train_trace[0]


def test_early_stopping_restores_best_weights():
    good = _separable(4)
    # validation set carries the opposite labels, so every update hurts it
    adversarial = [FeatureSequence(s.patient_id, s.features, 1 - s.label) for s in good]
    m = LstmModel(3, 4, rng=Rng(2))
    res = train_lstm(m, good, adversarial,
                     LstmTrainConfig(optimizer="sgd", lr=0.5, max_epochs=50, patience=1, seed=0))
    assert res.val_trace[1] > res.val_trace[0]
    assert res.stopped_epoch == 2 and res.best_epoch == 1

    replay = LstmModel(3, 4, rng=Rng(2))
    one = train_lstm(replay, good, adversarial,
                     LstmTrainConfig(optimizer="sgd", lr=0.5, max_epochs=1, patience=1, seed=0))
    for p, q in zip(res.model.params(), one.model.params()):
        assert np.array_equal(p.value, q.value)


def test_early_stopping_never_returns_worse_weights():
    data = _separable(10, seed=3)
    train, val = data[:6], data[6:]
    m = LstmModel(3, 8, rng=Rng(3))
    res = train_lstm(m, train, val, LstmTrainConfig(optimizer="adam", lr=3e-2, max_epochs=40, patience=5, seed=3))
    from ae2lstm.lstm import evaluate_loss
    final = evaluate_loss(res.model, val)
    assert final == pytest.approx(min(res.val_trace), rel=1e-6)
    assert final <= min(res.val_trace[:res.stopped_epoch]) + 1e-9


def test_training_determinism():
    data = _separable(8, seed=4)
    cfg = LstmTrainConfig(optimizer="adam", lr=1e-2, max_epochs=15, patience=3, seed=9)
    a = train_lstm(LstmModel(3, 5, rng=Rng(5)), data[:6], data[6:], cfg)
    b = train_lstm(LstmModel(3, 5, rng=Rng(5)), data[:6], data[6:], cfg)
    assert a.stopped_epoch == b.stopped_epoch
    for p, q in zip(a.model.params(), b.model.params()):
        assert np.array_equal(p.value, q.value)


def test_memorize_single_sequence():
    s = seq(Rng(6).uniform(size=(5, 3)), 1)
    m = LstmModel(3, 8, rng=Rng(6))
    res = train_lstm(m, [s], [s], LstmTrainConfig(optimizer="adam", lr=1e-2, max_epochs=300, patience=300))
    assert lstm_loss([lstm_forward(res.model, s)], [1]) < 1e-3


def test_split_validation_stratified():
    data = [seq(np.zeros((1, 2)), int(k < 4), f"s{k}") for k in range(10)]
    train, val = split_validation(data, 0.2, seed=1)
    assert len(val) == 2 and sorted(s.label for s in val) == [0, 1]
    assert {s.patient_id for s in train}.isdisjoint({s.patient_id for s in val})


def test_train_config_validation():
    with pytest.raises(UsageError):
        LstmTrainConfig(patience=0)
    with pytest.raises(UsageError):
        LstmTrainConfig(val_fraction=1.0)
