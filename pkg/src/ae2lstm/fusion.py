"""Two-level autoencoder stack: one sparse AE per MRI modality, then a fusion
AE over the concatenated per-modality codes.

Each AE minimizes its own reconstruction objective; level 2 is trained only
after every level-1 model is frozen.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .errors import DataError, ShapeError
from .rng import Rng
from .sparse_ae import AeTrainConfig, SparseAE, train_ae

EMPTY_SLICE_MEAN = 1e-4


class Modality(enum.IntEnum):
    ADC = 0
    CBF = 1
    CBV = 2
    DWI = 3
    Tmax = 4


MODALITIES = tuple(Modality)


@dataclass
class FeatureSequence:
    patient_id: str
    features: np.ndarray  # (n_slices, d_final)
    label: int

    def __len__(self):
        return self.features.shape[0]


@dataclass
class FusionStack:
    level1: dict[Modality, SparseAE]
    level2: SparseAE

    def __post_init__(self):
        if set(self.level1) != set(MODALITIES):
            raise ShapeError(f"level-1 models must cover {[m.name for m in MODALITIES]}")
        dims = {ae.code_dim for ae in self.level1.values()}
        if len(dims) != 1:
            raise ShapeError(f"level-1 code sizes differ: {sorted(dims)}")
        if self.level2.input_dim != len(MODALITIES) * self.d:
            raise ShapeError(f"level-2 input {self.level2.input_dim} != 5 x {self.d}")

    @property
    def input_dim(self) -> int:
        return self.level1[Modality.ADC].input_dim

    @property
    def d(self) -> int:
        return self.level1[Modality.ADC].code_dim

    @property
    def d_final(self) -> int:
        return self.level2.code_dim

    def models(self) -> list[SparseAE]:
        return [self.level1[m] for m in MODALITIES] + [self.level2]


def _bundle_arrays(bundle) -> list[np.ndarray]:
    if isinstance(bundle, Mapping):
        missing = [m.name for m in MODALITIES if m not in bundle]
        if missing:
            raise DataError(f"missing modalities: {missing}")
        return [np.asarray(bundle[m]) for m in MODALITIES]
    arrays = [np.asarray(a) for a in bundle]
    if len(arrays) != len(MODALITIES):
        raise DataError(f"expected {len(MODALITIES)} modality slices, got {len(arrays)}")
    return arrays


def level1_codes(stack: FusionStack, bundle) -> np.ndarray:
    """Concatenated level-1 codes Z1..Z5 in modality order."""
    codes = []
    for m, x in zip(MODALITIES, _bundle_arrays(bundle)):
        ae = stack.level1[m]
        lead = x.shape[:-2] if x.shape[-1] != ae.input_dim else x.shape[:-1]
        x = x.reshape(*lead, -1)
        if x.shape[-1] != ae.input_dim:
            raise ShapeError(f"{m.name} slice has {x.shape[-1]} pixels, model expects {ae.input_dim}")
        codes.append(ae.encode(x))
    return np.concatenate(codes, axis=-1)


def encode_slice(stack: FusionStack, slice_bundle) -> np.ndarray:
    """Multimodal feature Z for one slice position (or a stack of them)."""
    return stack.level2.encode(level1_codes(stack, slice_bundle))


def patient_slices(record, drop_empty: bool = False) -> list[np.ndarray]:
    """Per-modality (n_slices, n_pixels) matrices for one patient, slice axis last in the volume."""
    vols = [record.volumes[m] for m in MODALITIES]
    shapes = {v.dims for v in vols}
    if len(shapes) != 1:
        raise DataError(f"patient {record.id}: modality volumes disagree in shape {sorted(shapes)}")
    mats = [np.moveaxis(v.voxels, 2, 0).reshape(v.dims[2], -1) for v in vols]
    if drop_empty:
        keep = np.mean([mat.mean(axis=1) for mat in mats], axis=0) >= EMPTY_SLICE_MEAN
        mats = [mat[keep] for mat in mats]
    return mats


def encode_patient(stack: FusionStack, record, drop_empty: bool = False) -> FeatureSequence:
    mats = patient_slices(record, drop_empty)
    if mats[0].shape[0] == 0:
        raise DataError(f"patient {record.id}: no slices left to encode")
    return FeatureSequence(record.id, encode_slice(stack, mats), int(record.binary_label))


def pool_slices(records: Sequence, drop_empty: bool = False) -> dict[Modality, np.ndarray]:
    per_patient = [patient_slices(r, drop_empty) for r in records]
    return {m: np.concatenate([p[i] for p in per_patient]) for i, m in enumerate(MODALITIES)}


def train_fusion(slices: Mapping[Modality, np.ndarray], d: int, d_final: int | None = None,
                 config: AeTrainConfig | None = None, *, rho: float = 0.05, beta: float = 4.0,
                 lam: float = 0.004) -> tuple[FusionStack, dict[str, list[float]]]:
    """Train five level-1 AEs independently, then the level-2 AE on their codes.

    ``slices[m]`` is an (n, n_pixels) matrix; row k of every modality must come
    from the same patient and slice position. Returns the stack and per-model
    loss traces keyed by model name.
    """
    config = config or AeTrainConfig()
    d_final = d if d_final is None else d_final
    missing = [m.name for m in MODALITIES if m not in slices]
    if missing:
        raise DataError(f"missing slice sets for {missing}")
    mats = {m: np.asarray(slices[m]) for m in MODALITIES}
    counts = {m.name: mats[m].shape[0] for m in MODALITIES}
    if len(set(counts.values())) != 1:
        raise DataError(f"misaligned slice counts across modalities: {counts}")
    widths = {mats[m].shape[1] for m in MODALITIES}
    if len(widths) != 1:
        raise DataError(f"modalities disagree in slice size: {sorted(widths)}")
    input_dim = widths.pop()

    seeds = Rng(config.seed)
    level1, traces = {}, {}
    for m in MODALITIES:
        init, shuffle = seeds.spawn(), seeds.next_u64()
        ae = SparseAE(input_dim, d, rho, beta, lam, rng=init, name=m.name)
        _, traces[m.name] = train_ae(ae, mats[m], replace(config, seed=shuffle))
        level1[m] = ae

    init, shuffle = seeds.spawn(), seeds.next_u64()
    level2 = SparseAE(len(MODALITIES) * d, d_final, rho, beta, lam, rng=init, name="fusion")
    stack = FusionStack(level1, level2)
    codes = level1_codes(stack, [mats[m] for m in MODALITIES])
    _, traces["fusion"] = train_ae(level2, codes, replace(config, seed=shuffle))
    return stack, traces
