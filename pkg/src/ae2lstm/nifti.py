"""Minimal single-file NIfTI-1 (.nii) reader and writer.

Only the header fields needed to recover a 3-D scalar volume are interpreted:
``sizeof_hdr``, ``dim``, ``datatype``, ``bitpix``, ``vox_offset``,
``scl_slope``, ``scl_inter`` and ``magic``. Byte order is detected by checking
which interpretation of ``dim[0]`` falls in 1..7. Voxels are stored with x
varying fastest.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ParseError, UsageError

HEADER_SIZE = 348
DEFAULT_VOX_OFFSET = 352  # header + 4-byte empty extension block

# NIfTI datatype code -> (numpy kind, bitpix)
DATATYPES = {
    2: ("u1", 8),
    4: ("i2", 16),
    16: ("f4", 32),
    64: ("f8", 64),
}

_OFF_DIM = 40
_OFF_DATATYPE = 70
_OFF_BITPIX = 72
_OFF_PIXDIM = 76
_OFF_VOX_OFFSET = 108
_OFF_SCL_SLOPE = 112
_OFF_SCL_INTER = 116
_OFF_MAGIC = 344


@dataclass
class Volume:
    voxels: np.ndarray  # (nx, ny, nz)
    modality: object = None

    def __post_init__(self):
        if self.voxels.ndim != 3 or min(self.voxels.shape) < 1:
            raise UsageError(f"volume must be 3-D with positive extents, got {self.voxels.shape}")

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(int(n) for n in self.voxels.shape)


def _endianness(raw: bytes) -> str:
    for order in ("<", ">"):
        (dim0,) = struct.unpack_from(order + "h", raw, _OFF_DIM)
        if 1 <= dim0 <= 7:
            return order
    raise ParseError("dim[0]: not in 1..7 under either byte order")


def parse_nifti(raw: bytes, modality=None) -> Volume:
    """Decode a .nii byte stream into a float64 (nx, ny, nz) volume."""
    raw = bytes(raw)
    if len(raw) < HEADER_SIZE:
        raise ParseError(f"header: truncated ({len(raw)} < {HEADER_SIZE} bytes)")
    order = _endianness(raw)
    (sizeof_hdr,) = struct.unpack_from(order + "i", raw, 0)
    if sizeof_hdr != HEADER_SIZE:
        raise ParseError(f"sizeof_hdr: expected 348, got {sizeof_hdr}")
    magic = raw[_OFF_MAGIC:_OFF_MAGIC + 4]
    if magic == b"ni1\x00":
        raise ParseError("magic: two-file NIfTI (ni1) is not supported; use single-file .nii")
    if magic != b"n+1\x00":
        raise ParseError(f"magic: expected b'n+1\\x00', got {magic!r}")

    dim = struct.unpack_from(order + "8h", raw, _OFF_DIM)
    shape = [dim[k] if k <= dim[0] else 1 for k in (1, 2, 3)]
    if min(shape) < 1:
        raise ParseError(f"dim: non-positive extent in {dim}")
    (datatype,) = struct.unpack_from(order + "h", raw, _OFF_DATATYPE)
    if datatype not in DATATYPES:
        raise ParseError(f"datatype: unsupported code {datatype}")
    kind, _ = DATATYPES[datatype]
    (vox_offset,) = struct.unpack_from(order + "f", raw, _OFF_VOX_OFFSET)
    slope, inter = struct.unpack_from(order + "2f", raw, _OFF_SCL_SLOPE)

    offset = int(vox_offset)
    if offset < HEADER_SIZE:
        raise ParseError(f"vox_offset: {vox_offset} points inside the header")
    dtype = np.dtype(order + kind)
    count = int(np.prod(shape))
    if len(raw) < offset + count * dtype.itemsize:
        raise ParseError(f"voxel data: truncated (need {count * dtype.itemsize} bytes at offset {offset}, "
                         f"have {max(len(raw) - offset, 0)})")
    data = np.frombuffer(raw, dtype, count, offset).astype(np.float64)
    if slope == 0:
        slope = 1.0
    data = data * slope + inter
    return Volume(data.reshape(shape, order="F"), modality)


def write_nifti(voxels: np.ndarray, datatype: int = 16, endian: str = "<",
                slope: float = 0.0, inter: float = 0.0, pixdim=(1.0, 1.0, 1.0)) -> bytes:
    """Encode raw (already scaled-to-storage) voxel values as a .nii stream."""
    if datatype not in DATATYPES:
        raise UsageError(f"unsupported datatype {datatype}")
    if endian not in "<>":
        raise UsageError("endian must be '<' or '>'")
    voxels = np.asarray(voxels)
    if voxels.ndim != 3:
        raise UsageError(f"expected a 3-D volume, got shape {voxels.shape}")
    kind, bitpix = DATATYPES[datatype]
    hdr = bytearray(HEADER_SIZE)
    struct.pack_into(endian + "i", hdr, 0, HEADER_SIZE)
    struct.pack_into(endian + "8h", hdr, _OFF_DIM, 3, *voxels.shape, 1, 1, 1, 1)
    struct.pack_into(endian + "2h", hdr, _OFF_DATATYPE, datatype, bitpix)
    struct.pack_into(endian + "8f", hdr, _OFF_PIXDIM, 1.0, *pixdim, 0, 0, 0, 0)
    struct.pack_into(endian + "3f", hdr, _OFF_VOX_OFFSET, DEFAULT_VOX_OFFSET, slope, inter)
    hdr[_OFF_MAGIC:_OFF_MAGIC + 4] = b"n+1\x00"
    body = np.asarray(voxels, dtype=np.dtype(endian + kind)).tobytes(order="F")
    return bytes(hdr) + b"\x00" * (DEFAULT_VOX_OFFSET - HEADER_SIZE) + body


def read_nifti_file(path, modality=None) -> Volume:
    return parse_nifti(Path(path).read_bytes(), modality)


def write_nifti_file(path, voxels: np.ndarray, **kw):
    Path(path).write_bytes(write_nifti(voxels, **kw))
