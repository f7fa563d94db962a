"""Patient records, preprocessing and the cohort manifest.

Manifest format (UTF-8, tab-separated, one patient per line)::

    # id  ADC  CBF  CBV  DWI  Tmax  mrs
    p000  p000_ADC.nii  p000_CBF.nii  p000_CBV.nii  p000_DWI.nii  p000_Tmax.nii  2

Lines that are blank or start with ``#`` are ignored. Relative volume paths
are resolved against the manifest's directory.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, UsageError
from .fusion import MODALITIES, Modality
from .nifti import Volume, read_nifti_file, write_nifti_file

MANIFEST_HEADER = "# id\t" + "\t".join(m.name for m in MODALITIES) + "\tmrs"
POOR_OUTCOME_MIN_MRS = 3


def binarize_mrs(mrs: int) -> int:
    """0 (good) for mRS 0-2, 1 (poor) for mRS 3-6."""
    if isinstance(mrs, bool) or int(mrs) != mrs or not 0 <= mrs <= 6:
        raise UsageError(f"mRS must be an integer in 0..6, got {mrs!r}")
    return int(mrs >= POOR_OUTCOME_MIN_MRS)


def normalize_volume(v: Volume) -> Volume:
    """Per-volume min-max scaling to [0, 1]; a constant volume maps to zeros."""
    x = np.asarray(v.voxels, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise DataError("volume contains non-finite voxels")
    lo, hi = x.min(), x.max()
    if hi == lo:
        return Volume(np.zeros_like(x), v.modality)
    out = (x - lo) / (hi - lo)
    # pin the extremes exactly; rounding can otherwise leave max at 1 - ulp
    out[x == lo], out[x == hi] = 0.0, 1.0
    return Volume(out, v.modality)


@dataclass
class PatientRecord:
    id: str
    volumes: dict[Modality, Volume]
    mrs: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        missing = [m.name for m in MODALITIES if m not in self.volumes]
        if missing:
            raise DataError(f"patient {self.id}: missing modalities {missing}")
        shapes = {self.volumes[m].dims for m in MODALITIES}
        if len(shapes) != 1:
            raise DataError(f"patient {self.id}: modality volumes disagree in shape {sorted(shapes)}")
        binarize_mrs(self.mrs)

    @property
    def binary_label(self) -> int:
        return binarize_mrs(self.mrs)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.volumes[Modality.ADC].dims


@dataclass
class Cohort:
    records: list[PatientRecord]
    provenance: str = "synthetic"

    def __post_init__(self):
        ids = [r.id for r in self.records]
        if len(set(ids)) != len(ids):
            raise DataError("patient ids must be unique")
        if self.provenance not in ("synthetic", "ingested"):
            raise UsageError(f"unknown provenance {self.provenance!r}")

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def labels(self) -> np.ndarray:
        return np.array([r.binary_label for r in self.records])

    def subset(self, ids) -> list[PatientRecord]:
        by_id = {r.id: r for r in self.records}
        return [by_id[i] for i in ids]


@dataclass
class ManifestEntry:
    id: str
    paths: dict[Modality, Path]
    mrs: int


def read_manifest(path) -> list[ManifestEntry]:
    path = Path(path)
    entries, seen = [], set()
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        cols = line.rstrip("\n").split("\t")
        if len(cols) != 2 + len(MODALITIES):
            raise DataError(f"{path}:{lineno}: expected {2 + len(MODALITIES)} tab-separated fields, got {len(cols)}")
        pid, *files, mrs = cols
        try:
            mrs_val = int(mrs)
            binarize_mrs(mrs_val)
        except (ValueError, UsageError):
            raise DataError(f"{path}:{lineno}: invalid mRS {mrs!r}") from None
        if not pid or pid in seen:
            raise DataError(f"{path}:{lineno}: empty or duplicate patient id {pid!r}")
        seen.add(pid)
        paths = {m: (path.parent / f) for m, f in zip(MODALITIES, files)}
        entries.append(ManifestEntry(pid, paths, mrs_val))
    return entries


def write_manifest(path, entries: list[ManifestEntry]):
    path = Path(path)
    lines = [MANIFEST_HEADER]
    for e in entries:
        lines.append("\t".join([e.id, *(str(e.paths[m]) for m in MODALITIES), str(e.mrs)]))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_record(entry: ManifestEntry, normalize: bool = True) -> PatientRecord:
    vols = {}
    for m in MODALITIES:
        p = entry.paths[m]
        if not p.exists():
            raise DataError(f"patient {entry.id}: {m.name} volume missing at {p}")
        v = read_nifti_file(p, m)
        vols[m] = normalize_volume(v) if normalize else v
    return PatientRecord(entry.id, vols, entry.mrs)


def load_cohort(manifest_path, normalize: bool = True) -> Cohort:
    return Cohort([load_record(e, normalize) for e in read_manifest(manifest_path)], "ingested")


def save_cohort(cohort: Cohort, out_dir) -> Path:
    """Write one float32 .nii per patient and modality plus ``manifest.tsv``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for r in cohort.records:
        paths = {}
        for m in MODALITIES:
            name = f"{r.id}_{m.name}.nii"
            write_nifti_file(out_dir / name, r.volumes[m].voxels, datatype=16)
            paths[m] = Path(name)
        entries.append(ManifestEntry(r.id, paths, r.mrs))
    manifest = out_dir / "manifest.tsv"
    write_manifest(manifest, entries)
    return manifest
