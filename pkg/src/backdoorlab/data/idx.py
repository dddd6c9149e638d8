"""Reader and writer for the big-endian IDX container used by MNIST.

Only unsigned-byte payloads are supported: magic ``0x00000801`` for 1-D
label vectors and ``0x00000803`` for 3-D image stacks (other ranks with the
``0x08`` type code are accepted as long as the header is consistent).
"""
import gzip
import struct

import numpy as np

from ..errors import BadMagicError, DimensionMismatchError, TruncatedError

UBYTE = 0x08
LABELS_MAGIC = 0x00000801
IMAGES_MAGIC = 0x00000803


def parse_idx(data):
    """Parse IDX bytes into ``(array, kind)`` with kind ``"labels"`` or ``"images"``."""
    data = bytes(data)
    if len(data) < 4:
        raise TruncatedError(f"IDX header needs 4 bytes, got {len(data)}", offset=len(data))
    zero, dtype_code, ndim = struct.unpack_from(">HBB", data, 0)
    if zero != 0 or dtype_code != UBYTE or ndim == 0:
        raise BadMagicError(f"bad IDX magic 0x{data[:4].hex()}", offset=0)
    header_end = 4 + 4 * ndim
    if len(data) < header_end:
        raise TruncatedError(f"IDX header declares {ndim} dims but file ends early", offset=len(data))
    dims = struct.unpack_from(f">{ndim}I", data, 4)
    if ndim > 1 and 0 in dims[1:]:
        raise DimensionMismatchError(f"zero-sized item dimension in {dims}", offset=8)
    # An item is one label or one image, so truncation is reported at the
    # first item boundary past the end of the data.
    item = int(np.prod(dims[1:], dtype=np.int64)) if ndim > 1 else 1
    expected = header_end + item * dims[0]
    if len(data) < expected:
        complete = (len(data) - header_end) // item
        raise TruncatedError(
            f"IDX payload declares {dims[0]} items of {item} bytes but only {complete} are complete; "
            f"expected {expected} bytes, got {len(data)}",
            offset=header_end + complete * item,
        )
    if len(data) > expected:
        raise DimensionMismatchError(
            f"IDX payload has {len(data) - expected} bytes beyond the declared dims {dims}",
            offset=expected,
        )
    array = np.frombuffer(data, dtype=np.uint8, offset=header_end, count=expected - header_end)
    array = array.reshape(dims).copy()
    kind = "labels" if ndim == 1 else "images"
    return array, kind


def dump_idx(array):
    array = np.asarray(array)
    if array.dtype != np.uint8:
        if array.size and (array.min() < 0 or array.max() > 255 or not np.all(array == np.round(array))):
            raise ValueError("IDX export only supports values representable as uint8")
        array = array.astype(np.uint8)
    if array.ndim == 0 or array.ndim > 255:
        raise ValueError(f"cannot store a {array.ndim}-d array as IDX")
    header = struct.pack(">HBB", 0, UBYTE, array.ndim) + struct.pack(f">{array.ndim}I", *array.shape)
    return header + np.ascontiguousarray(array).tobytes()


def read_idx(path):
    """Read an IDX file; ``.gz`` files are decompressed transparently."""
    opener = gzip.open if str(path).endswith(".gz") else open
    with opener(path, "rb") as f:
        return parse_idx(f.read())


def write_idx(path, array):
    with open(path, "wb") as f:
        f.write(dump_idx(array))
