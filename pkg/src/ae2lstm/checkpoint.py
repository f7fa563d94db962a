"""Binary checkpoint and feature-cache files.

Layout (all integers little-endian)::

    magic        4 bytes  b"AE2L"
    version      u32      FORMAT_VERSION
    kind         u16 length + UTF-8    ("sparse_ae", "fusion_stack", "lstm", "features")
    hyper        u32 length + UTF-8 JSON (sorted keys)
    n_arrays     u32
    per array:
        name     u16 length + UTF-8
        ndim     u8
        shape    ndim x u32
        data     little-endian float32, C order

A feature cache stores each patient's (n_slices, d) matrix as one array named
by the patient id; ids and labels live in the hyper block.
"""

from __future__ import annotations

import io
import json
import struct
from pathlib import Path

import numpy as np

from .errors import FormatError
from .fusion import MODALITIES, FeatureSequence, FusionStack, Modality
from .lstm import LstmModel
from .sparse_ae import SparseAE

MAGIC = b"AE2L"
FORMAT_VERSION = 1
_F32 = np.dtype("<f4")


def _pack_str(s: str, width: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<" + width, len(raw)) + raw


def encode(kind: str, hyper: dict, arrays: list[tuple[str, np.ndarray]]) -> bytes:
    out = io.BytesIO()
    out.write(MAGIC)
    out.write(struct.pack("<I", FORMAT_VERSION))
    out.write(_pack_str(kind, "H"))
    out.write(_pack_str(json.dumps(hyper, sort_keys=True), "I"))
    out.write(struct.pack("<I", len(arrays)))
    for name, arr in arrays:
        arr = np.asarray(arr)
        out.write(_pack_str(name, "H"))
        out.write(struct.pack("<B", arr.ndim))
        out.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        out.write(np.ascontiguousarray(arr, dtype=_F32).tobytes())
    return out.getvalue()


class _Reader:
    def __init__(self, raw: bytes):
        self.raw, self.pos = raw, 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.raw):
            raise FormatError(f"truncated file while reading {what}")
        chunk = self.raw[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))

    def string(self, width: str, what: str) -> str:
        (n,) = self.unpack("<" + width, what)
        return self.take(n, what).decode("utf-8")


def decode(raw: bytes) -> tuple[str, dict, dict[str, np.ndarray]]:
    r = _Reader(bytes(raw))
    if r.take(4, "magic") != MAGIC:
        raise FormatError("bad magic: not an AE2L file")
    (version,) = r.unpack("<I", "version")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported format version {version} (expected {FORMAT_VERSION})")
    kind = r.string("H", "kind")
    hyper = json.loads(r.string("I", "hyper"))
    (count,) = r.unpack("<I", "array count")
    arrays = {}
    for _ in range(count):
        name = r.string("H", "array name")
        (ndim,) = r.unpack("<B", f"{name} ndim")
        shape = r.unpack(f"<{ndim}I", f"{name} shape")
        n = int(np.prod(shape, dtype=np.int64))
        arrays[name] = np.frombuffer(r.take(n * 4, f"{name} data"), _F32).reshape(shape).astype(np.float32)
    if r.pos != len(r.raw):
        raise FormatError("trailing bytes after last array")
    return kind, hyper, arrays


def _expect(kind: str, got: str):
    if got != kind:
        raise FormatError(f"expected a {kind!r} checkpoint, found {got!r}")


def _params_arrays(params, prefix=""):
    return [(prefix + p.name, p.value) for p in params]


def _load_params(params, arrays, prefix=""):
    for p in params:
        key = prefix + p.name
        if key not in arrays:
            raise FormatError(f"missing array {key}")
        if arrays[key].shape != p.value.shape:
            raise FormatError(f"{key}: shape {arrays[key].shape} != expected {p.value.shape}")
        p.value = arrays[key].copy()
        p.grad = np.zeros_like(p.value)


def _ae_from(hyper: dict, name: str) -> SparseAE:
    return SparseAE(hyper["input_dim"], hyper["code_dim"], hyper["rho"], hyper["beta"], hyper["lam"], name=name)


def dump_sparse_ae(model: SparseAE) -> bytes:
    return encode("sparse_ae", {**model.hyper, "name": model.name}, _params_arrays(model.params()))


def load_sparse_ae(raw: bytes) -> SparseAE:
    kind, hyper, arrays = decode(raw)
    _expect("sparse_ae", kind)
    model = _ae_from(hyper, hyper.get("name", "ae"))
    _load_params(model.params(), arrays)
    return model


def dump_fusion(stack: FusionStack) -> bytes:
    hyper = {m.name: stack.level1[m].hyper for m in MODALITIES}
    hyper["fusion"] = stack.level2.hyper
    arrays = [a for ae in stack.models() for a in _params_arrays(ae.params())]
    return encode("fusion_stack", hyper, arrays)


def load_fusion(raw: bytes) -> FusionStack:
    kind, hyper, arrays = decode(raw)
    _expect("fusion_stack", kind)
    try:
        level1 = {m: _ae_from(hyper[m.name], m.name) for m in MODALITIES}
        level2 = _ae_from(hyper["fusion"], "fusion")
    except KeyError as exc:
        raise FormatError(f"fusion checkpoint lacks hyperparameters for {exc}") from None
    for ae in [*level1.values(), level2]:
        _load_params(ae.params(), arrays)
    return FusionStack(level1, level2)


def dump_lstm(model: LstmModel) -> bytes:
    return encode("lstm", model.hyper, _params_arrays(model.params()))


def load_lstm(raw: bytes) -> LstmModel:
    kind, hyper, arrays = decode(raw)
    _expect("lstm", kind)
    model = LstmModel(hyper["input_size"], hyper["nh"])
    _load_params(model.params(), arrays)
    return model


def dump_features(seqs: list[FeatureSequence]) -> bytes:
    hyper = {"ids": [s.patient_id for s in seqs], "labels": [int(s.label) for s in seqs]}
    return encode("features", hyper, [(s.patient_id, s.features) for s in seqs])


def load_features(raw: bytes) -> list[FeatureSequence]:
    kind, hyper, arrays = decode(raw)
    _expect("features", kind)
    return [FeatureSequence(pid, arrays[pid], label) for pid, label in zip(hyper["ids"], hyper["labels"])]


def save(path, raw: bytes):
    Path(path).write_bytes(raw)


def load(path) -> bytes:
    return Path(path).read_bytes()
