"""TNS1 binary files for tensors (``.tns``) and observation masks (``.msk``).

Layout, all integers little-endian::

    offset  size  field
    0       4     magic b"TNS1"
    4       1     version (1)
    5       1     element type: 1 = float64 tensor entries, 2 = uint64 mask offsets
    6       2     reserved, zero
    8       4     number of dimensions (always 3)
    12      12    I1, I2, I3 as uint32
    24      ...   payload

Tensor payloads hold ``I1*I2*I3`` float64 values, first index fastest.
Mask payloads hold the sorted flat offsets of observed entries (same index
order); their count is implied by the payload length.
"""

import struct

import numpy as np

from .data import ObservationMask
from .tensor import as_tensor3

MAGIC = b"TNS1"
VERSION = 1
TYPE_F64 = 1
TYPE_U64 = 2
HEADER = struct.Struct("<4sBBHI3I")
HEADER_SIZE = HEADER.size  # 24


class TnsFormatError(ValueError):
    """Malformed TNS1 file; `offset` is the byte position of the problem."""

    def __init__(self, message, offset):
        self.offset = offset
        super().__init__(f"{message} (at byte {offset})")


def _pack_header(elem_type, shape):
    shape = tuple(int(s) for s in shape)
    if any(s < 0 or s >= 2**32 for s in shape):
        raise ValueError(f"dimensions {shape} do not fit in uint32")
    return HEADER.pack(MAGIC, VERSION, elem_type, 0, 3, *shape)


def _parse(buf, elem_type):
    if len(buf) < HEADER_SIZE:
        raise TnsFormatError(f"truncated header: {len(buf)} of {HEADER_SIZE} bytes", len(buf))
    magic, version, etype, _reserved, ndim, *shape = HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise TnsFormatError(f"bad magic {magic!r}", 0)
    if version != VERSION:
        raise TnsFormatError(f"unsupported version {version}", 4)
    if etype != elem_type:
        raise TnsFormatError(f"element type {etype}, expected {elem_type}", 5)
    if ndim != 3:
        raise TnsFormatError(f"{ndim} dimensions, only 3 supported", 8)
    payload = len(buf) - HEADER_SIZE
    if elem_type == TYPE_F64:
        n = shape[0] * shape[1] * shape[2]
        if n * 8 > 2**62:
            raise TnsFormatError(f"dimensions {tuple(shape)} overflow", 12)
        if payload < n * 8:
            raise TnsFormatError(f"truncated payload: {payload} of {n * 8} bytes", len(buf))
        if payload > n * 8:
            raise TnsFormatError("trailing bytes after payload", HEADER_SIZE + n * 8)
    elif payload % 8:
        raise TnsFormatError("payload is not a whole number of uint64 offsets", len(buf))
    return tuple(shape), memoryview(buf)[HEADER_SIZE:]


def tensor_to_bytes(t):
    t = as_tensor3(t)
    data = np.asarray(t, dtype="<f8").tobytes(order="F")
    return _pack_header(TYPE_F64, t.shape) + data


def tensor_from_bytes(buf):
    shape, payload = _parse(buf, TYPE_F64)
    return np.frombuffer(payload, dtype="<f8").astype(float).reshape(shape, order="F")


def save_tensor(t, path):
    with open(path, "wb") as fh:
        fh.write(tensor_to_bytes(t))


def load_tensor(path):
    with open(path, "rb") as fh:
        return tensor_from_bytes(fh.read())


def mask_to_bytes(mask):
    return _pack_header(TYPE_U64, mask.shape) + mask.indices.astype("<u8").tobytes()


def mask_from_bytes(buf):
    shape, payload = _parse(buf, TYPE_U64)
    offsets = np.frombuffer(payload, dtype="<u8")
    n = shape[0] * shape[1] * shape[2]
    if offsets.size:
        bad = np.flatnonzero(np.diff(offsets.astype(np.int64)) <= 0)
        if bad.size:
            raise TnsFormatError("mask offsets not strictly increasing", HEADER_SIZE + 8 * (bad[0] + 1))
        if offsets[-1] >= n:
            raise TnsFormatError("mask offset out of range", HEADER_SIZE + 8 * (offsets.size - 1))
    return ObservationMask(shape, offsets.astype(np.int64))


def save_mask(mask, path):
    with open(path, "wb") as fh:
        fh.write(mask_to_bytes(mask))


def load_mask(path):
    with open(path, "rb") as fh:
        return mask_from_bytes(fh.read())
