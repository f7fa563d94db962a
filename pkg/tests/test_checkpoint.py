import struct

import numpy as np
import pytest

from ae2lstm import checkpoint
from ae2lstm.errors import FormatError
from ae2lstm.fusion import MODALITIES, FeatureSequence, FusionStack
from ae2lstm.lstm import LstmModel
from ae2lstm.rng import Rng
from ae2lstm.sparse_ae import SparseAE


def same_params(a, b):
    pa, pb = a.params(), b.params()
    assert [p.name for p in pa] == [p.name for p in pb]
    for x, y in zip(pa, pb):
        assert x.value.dtype == y.value.dtype == np.float32
        assert x.value.tobytes() == y.value.tobytes()


def small_stack(seed=0):
    rng = Rng(seed)
    level1 = {m: SparseAE(12, 3, rng=rng.spawn(), name=m.name) for m in MODALITIES}
    return FusionStack(level1, SparseAE(15, 4, rng=rng.spawn(), name="fusion"))


def test_sparse_ae_roundtrip():
    ae = SparseAE(20, 5, rho=0.1, beta=2.0, lam=0.01, rng=Rng(1))
    back = checkpoint.load_sparse_ae(checkpoint.dump_sparse_ae(ae))
    same_params(ae, back)
    assert back.hyper == ae.hyper
    x = np.random.default_rng(0).uniform(size=(4, 20)).astype(np.float32)
    assert back.encode(x).tobytes() == ae.encode(x).tobytes()


def test_fusion_roundtrip():
    stack = small_stack()
    back = checkpoint.load_fusion(checkpoint.dump_fusion(stack))
    for a, b in zip(stack.models(), back.models()):
        same_params(a, b)
    assert (back.input_dim, back.d, back.d_final) == (12, 3, 4)


def test_lstm_roundtrip():
    model = LstmModel(6, 5, rng=Rng(2))
    back = checkpoint.load_lstm(checkpoint.dump_lstm(model))
    same_params(model, back)
    seq = np.random.default_rng(1).uniform(size=(7, 6)).astype(np.float32)
    assert back.forward_batch([seq]).tobytes() == model.forward_batch([seq]).tobytes()


def test_features_roundtrip():
    rng = np.random.default_rng(3)
    seqs = [FeatureSequence(f"p{k}", rng.uniform(size=(k + 1, 4)).astype(np.float32), k % 2) for k in range(4)]
    back = checkpoint.load_features(checkpoint.dump_features(seqs))
    assert [s.patient_id for s in back] == [s.patient_id for s in seqs]
    assert [s.label for s in back] == [s.label for s in seqs]
    for a, b in zip(seqs, back):
        assert a.features.tobytes() == b.features.tobytes()


def test_dump_is_deterministic(tmp_path):
    raw = checkpoint.dump_fusion(small_stack(5))
    assert raw == checkpoint.dump_fusion(small_stack(5))
    checkpoint.save(tmp_path / "f.ckpt", raw)
    assert checkpoint.load(tmp_path / "f.ckpt") == raw


def test_layout_header():
    raw = checkpoint.dump_lstm(LstmModel(2, 2))
    assert raw[:4] == b"AE2L"
    assert struct.unpack("<I", raw[4:8])[0] == checkpoint.FORMAT_VERSION
    (n,) = struct.unpack("<H", raw[8:10])
    assert raw[10:10 + n] == b"lstm"


def test_version_mismatch():
    raw = bytearray(checkpoint.dump_sparse_ae(SparseAE(4, 2)))
    raw[4:8] = struct.pack("<I", 99)
    with pytest.raises(FormatError, match="version 99"):
        checkpoint.load_sparse_ae(bytes(raw))


def test_bad_magic():
    raw = checkpoint.dump_sparse_ae(SparseAE(4, 2))
    with pytest.raises(FormatError, match="magic"):
        checkpoint.load_sparse_ae(b"XXXX" + raw[4:])


@pytest.mark.parametrize("cut", [3, 9, 30, -1])
def test_truncation(cut):
    raw = checkpoint.dump_sparse_ae(SparseAE(4, 2, rng=Rng(0)))
    with pytest.raises(FormatError):
        checkpoint.load_sparse_ae(raw[:cut])


def test_trailing_bytes():
    raw = checkpoint.dump_sparse_ae(SparseAE(4, 2))
    with pytest.raises(FormatError, match="trailing"):
        checkpoint.load_sparse_ae(raw + b"\0")


def test_wrong_kind():
    raw = checkpoint.dump_lstm(LstmModel(3, 2))
    with pytest.raises(FormatError, match="expected"):
        checkpoint.load_fusion(raw)


def test_shape_mismatch_reported():
    ae = SparseAE(4, 2)
    raw = checkpoint.encode("sparse_ae", {**ae.hyper, "name": "ae"},
                            [(p.name, np.zeros((1, 1))) for p in ae.params()])
    with pytest.raises(FormatError, match="shape"):
        checkpoint.load_sparse_ae(raw)
