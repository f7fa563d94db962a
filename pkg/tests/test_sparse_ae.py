import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ae2lstm.errors import ShapeError, UsageError
from ae2lstm.nn import gradient_check
from ae2lstm.rng import Rng
from ae2lstm.sparse_ae import AeTrainConfig, SparseAE, ae_loss, kl_sparsity, train_ae


def zero_model(n_in=6, n_code=3, **kw):
    return SparseAE(n_in, n_code, **kw)  # rng=None -> all-zero weights


def sig(z):
    return 1.0 / (1.0 + math.exp(-z))


def test_encode_zero_weights_is_half():
    assert np.array_equal(zero_model().encode(np.linspace(0, 1, 6)), [0.5] * 3)


def test_decode_zero_weights_is_half():
    assert np.array_equal(zero_model().decode(np.array([0.1, 0.9, 0.3])), [0.5] * 6)


def test_encode_wrong_length():
    with pytest.raises(ShapeError):
        zero_model().encode(np.zeros(5))


def test_decode_wrong_length():
    with pytest.raises(ShapeError):
        zero_model().decode(np.zeros(4))


def test_encode_matches_scalar_loop():
    m = SparseAE(5, 3, rng=Rng(7), dtype=np.float64)
    m.encoder.b.value[...] = [0.1, -0.2, 0.3]
    x = Rng(8).uniform(size=5)
    W, b = m.encoder.W.value, m.encoder.b.value
    expect = [sig(sum(W[j, i] * x[i] for i in range(5)) + b[j]) for j in range(3)]
    np.testing.assert_allclose(m.encode(x), expect, rtol=1e-14)


def test_kl_zero_at_target():
    assert kl_sparsity(0.05, np.full(4, 0.05)) == pytest.approx(0.0, abs=1e-15)


def test_kl_single_unit_scalar():
    expect = 0.05 * math.log(0.05 / 0.5) + 0.95 * math.log(0.95 / 0.5)
    assert kl_sparsity(0.05, np.array([0.5])) == pytest.approx(expect, rel=1e-14)
    assert expect == pytest.approx(0.05 * math.log(0.1) + 0.95 * math.log(1.9), rel=1e-14)


def test_zero_model_on_half_vector():
    loss = ae_loss(zero_model(), np.full((2, 6), 0.5))
    assert loss.mse == 0 and loss.l2 == 0


def test_loss_composition():
    m = SparseAE(6, 3, rho=0.1, beta=2.0, lam=0.01, rng=Rng(1), dtype=np.float64)
    X = Rng(2).uniform(size=(5, 6))
    H = m.encode(X)
    R = m.decode(H)
    mse = np.sum((X - R) ** 2) / (5 * 6)
    l2 = 0.5 * (np.sum(m.encoder.W.value**2) + np.sum(m.decoder.W.value**2))
    kl = kl_sparsity(0.1, H.mean(0))
    out = ae_loss(m, X)
    assert out.mse == pytest.approx(mse, rel=1e-12)
    assert out.l2 == pytest.approx(l2, rel=1e-12)
    assert out.total == pytest.approx(mse + 0.01 * l2 + 2.0 * kl, rel=1e-12)


def test_empty_batch_is_usage_error():
    with pytest.raises(UsageError):
        ae_loss(zero_model(), np.zeros((0, 6)))


@pytest.mark.parametrize("beta,lam", [(4.0, 0.004), (0.0, 0.0), (40.0, 0.1)])
def test_full_loss_gradient(beta, lam):
    m = SparseAE(10, 4, rho=0.05, beta=beta, lam=lam, rng=Rng(3), dtype=np.float64)
    X = Rng(4).uniform(size=(7, 10))
    res = gradient_check(lambda: m.loss_and_grad(X).total, m.params(), step=1e-5, n_samples=None)
    assert res.passed(1e-4), res


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 0.99), st.lists(st.floats(0.0, 1.0), min_size=1, max_size=8))
def test_kl_nonnegative(rho, q):
    assert kl_sparsity(rho, np.array(q)) >= -1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.floats(-50, 50))
def test_codes_strictly_inside_unit_interval(seed, scale):
    m = SparseAE(8, 5, rng=Rng(seed))
    m.encoder.W.value *= np.float32(scale)
    h = m.encode(Rng(seed + 1).uniform(size=(4, 8)))
    assert np.all(h > 0) and np.all(h < 1)


def test_memorizes_single_vector():
    x = Rng(5).uniform(size=(1, 16))
    m = SparseAE(16, 4, beta=0.0, lam=0.0, rng=Rng(6))
    _, trace = train_ae(m, x, AeTrainConfig(max_epochs=2000, batch_size=1, optimizer="adam", lr=1e-2))
    assert m.loss(x).mse < 1e-3
    assert len(trace) == 2000


def test_sgd_small_step_descends():
    X = Rng(7).uniform(size=(8, 12))
    m = SparseAE(12, 4, rng=Rng(8))
    _, trace = train_ae(m, X, AeTrainConfig(max_epochs=10, batch_size=8, optimizer="sgd", lr=1e-2))
    assert all(b <= a for a, b in zip(trace, trace[1:]))


def test_training_is_deterministic():
    X = Rng(9).uniform(size=(20, 12))
    cfg = AeTrainConfig(max_epochs=5, batch_size=4, optimizer="adam", lr=1e-2, seed=11)
    a, b = SparseAE(12, 4, rng=Rng(1)), SparseAE(12, 4, rng=Rng(1))
    train_ae(a, X, cfg)
    train_ae(b, X, cfg)
    for p, q in zip(a.params(), b.params()):
        assert np.array_equal(p.value, q.value)


def test_config_validation():
    with pytest.raises(UsageError):
        AeTrainConfig(max_epochs=0)
    with pytest.raises(UsageError):
        AeTrainConfig(batch_size=0)
    with pytest.raises(UsageError):
        SparseAE(4, 2, rho=1.0)
