"""Synthetic five-modality stroke cohort (stand-in for private clinical data).

Each patient gets an ellipsoidal "brain" of per-modality base intensity with
smooth Gaussian-blurred noise, plus one spherical lesion. Lesion geometry and
contrast grow with the patient's mRS:

* radius   = min(nx, ny) * (0.05 + 0.20 * mrs / 6)   (voxel units, isotropic)
* contrast = 0.2 + 0.4 * [mrs >= 3] + 0.3 * mrs / 6, multiplied by a
  per-modality sign/weight (dark on ADC, CBF, CBV; bright on DWI, Tmax)

Contrast is monotone in mRS with a step at the good/poor boundary, so the
worst good outcome (mRS 2) and the mildest poor outcome (mRS 3) differ in
contrast by ``CLASS_CONTRAST_MARGIN`` and in radius by
``CLASS_RADIUS_MARGIN * min(nx, ny)``. Every volume is min-max normalized.
The lesion centre is jittered inside the central part of the brain.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.ndimage import gaussian_filter

from .cohort import Cohort, PatientRecord, normalize_volume
from .errors import UsageError
from .fusion import MODALITIES, Modality
from .nifti import Volume
from .rng import Rng

DESK_DIMS = (32, 32, 12)
PAPER_DIMS = (192, 192)

BASE_INTENSITY = {Modality.ADC: 0.6, Modality.CBF: 0.5, Modality.CBV: 0.5, Modality.DWI: 0.4, Modality.Tmax: 0.3}
LESION_WEIGHT = {Modality.ADC: -0.8, Modality.CBF: -0.9, Modality.CBV: -0.6, Modality.DWI: 1.0, Modality.Tmax: 1.0}
NOISE_AMPLITUDE = 0.05
NOISE_SIGMA = (1.5, 1.5, 0.75)

CLASS_CONTRAST_MARGIN = 0.4 + 0.3 / 6
CLASS_RADIUS_MARGIN = 0.20 / 6


def lesion_radius(mrs: int, dims) -> float:
    return min(dims[0], dims[1]) * (0.05 + 0.20 * mrs / 6)


def lesion_contrast(mrs: int) -> float:
    return 0.2 + 0.4 * (mrs >= 3) + 0.3 * mrs / 6


def class_counts(n: int, poor_fraction: float) -> tuple[int, int]:
    """(n_good, n_poor) with n_poor = round-half-up(n * poor_fraction), at least one of each."""
    n_poor = int(math.floor(n * poor_fraction + 0.5))
    n_poor = min(max(n_poor, 1), n - 1)
    return n - n_poor, n_poor


def _grid(dims):
    return np.meshgrid(*(np.arange(k, dtype=np.float64) for k in dims), indexing="ij")


def _render_patient(pid: str, mrs: int, dims, rng: Rng) -> PatientRecord:
    nx, ny, nz = dims
    x, y, z = _grid(dims)
    cx, cy, cz = (nx - 1) / 2, (ny - 1) / 2, (nz - 1) / 2
    brain = ((x - cx) / (0.45 * nx)) ** 2 + ((y - cy) / (0.45 * ny)) ** 2 + ((z - cz) / max(0.6 * nz, 1.0)) ** 2 <= 1

    centre = (rng.uniform(0.35, 0.65) * (nx - 1), rng.uniform(0.35, 0.65) * (ny - 1),
              rng.uniform(0.3, 0.7) * (nz - 1))
    radius = lesion_radius(mrs, dims)
    dist2 = (x - centre[0]) ** 2 + (y - centre[1]) ** 2 + (z - centre[2]) ** 2
    lesion = (dist2 <= radius**2) & brain
    contrast = lesion_contrast(mrs)

    volumes = {}
    for m in MODALITIES:
        noise = gaussian_filter(rng.normal(size=dims), NOISE_SIGMA, mode="nearest")
        noise *= NOISE_AMPLITUDE / (noise.std() + 1e-12)
        vox = brain * (BASE_INTENSITY[m] + noise) + lesion * (LESION_WEIGHT[m] * contrast)
        volumes[m] = normalize_volume(Volume(vox, m))
    meta = {"centre": centre, "radius": radius, "contrast": contrast, "lesion_voxels": int(lesion.sum())}
    return PatientRecord(pid, volumes, mrs, meta)


def generate_synthetic_cohort(n: int = 119, dims=DESK_DIMS, seed: int = 0, poor_fraction: float = 0.34) -> Cohort:
    dims = tuple(int(k) for k in dims)
    if n < 2:
        raise UsageError(f"cohort size must be >= 2, got {n}")
    if not 0 < poor_fraction < 1:
        raise UsageError(f"poor_fraction must lie in (0, 1), got {poor_fraction}")
    if len(dims) != 3 or dims[0] < 4 or dims[1] < 4 or dims[2] < 1:
        raise UsageError(f"degenerate dims {dims}: need nx, ny >= 4 and nz >= 1")
    rng = Rng(seed)
    n_good, n_poor = class_counts(n, poor_fraction)
    labels = rng.shuffle([1] * n_poor + [0] * n_good)
    width = len(str(n - 1))
    records = []
    for k, label in enumerate(labels):
        prng = rng.spawn()
        mrs = prng.integers(3, 7) if label else prng.integers(0, 3)
        records.append(_render_patient(f"p{k:0{width}d}", mrs, dims, prng))
    return Cohort(records, "synthetic")
