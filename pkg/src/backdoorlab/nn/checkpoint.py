"""Binary parameter checkpoints.

Layout (little-endian)::

    b"BDFG"  u32 version  u32 record_count
    record_count x ( u32 rank, rank x u32 dim, prod(dims) x float32 )

Records are the trainable tensors in parameter-dict order followed by the
running mean and running variance of every batch-norm layer in layer order.
The architecture itself is not stored; loading needs the matching spec.
"""
import struct

import numpy as np

from ..errors import FormatError
from .network import init_params, init_state

MAGIC = b"BDFG"
VERSION = 1


def _records(params, state):
    for value in params.values():
        yield value
    for index in sorted(state):
        yield state[index].running_mean
        yield state[index].running_var


def dumps(params, state):
    tensors = list(_records(params, state))
    chunks = [MAGIC, struct.pack("<II", VERSION, len(tensors))]
    for t in tensors:
        t = np.asarray(t)
        chunks.append(struct.pack("<I", t.ndim))
        chunks.append(struct.pack(f"<{t.ndim}I", *t.shape))
        chunks.append(np.ascontiguousarray(t, dtype="<f4").tobytes())
    return b"".join(chunks)


def loads(data, spec):
    """Parse checkpoint bytes against ``spec``; returns ``(params, state)``."""
    if data[:4] != MAGIC:
        raise FormatError(f"bad checkpoint magic {data[:4]!r}", offset=0)
    if len(data) < 12:
        raise FormatError("checkpoint header truncated", offset=len(data))
    version, count = struct.unpack_from("<II", data, 4)
    if version != VERSION:
        raise FormatError(f"unsupported checkpoint version {version}", offset=4)
    params = init_params(spec, np.random.default_rng(0))
    state = init_state(spec)
    slots = [(params, key) for key in params]
    for index in sorted(state):
        slots.append((state[index], "running_mean"))
        slots.append((state[index], "running_var"))
    if count != len(slots):
        raise FormatError(f"checkpoint has {count} tensors, network expects {len(slots)}", offset=8)
    offset = 12
    for owner, key in slots:
        if offset + 4 > len(data):
            raise FormatError("checkpoint truncated in record header", offset=offset)
        (rank,) = struct.unpack_from("<I", data, offset)
        offset += 4
        if offset + 4 * rank > len(data):
            raise FormatError("checkpoint truncated in dims", offset=offset)
        dims = struct.unpack_from(f"<{rank}I", data, offset)
        offset += 4 * rank
        nbytes = 4 * int(np.prod(dims, dtype=np.int64))
        if offset + nbytes > len(data):
            raise FormatError("checkpoint truncated in tensor payload", offset=offset)
        value = np.frombuffer(data, dtype="<f4", count=nbytes // 4, offset=offset)
        value = value.reshape(dims).astype(np.float32)
        offset += nbytes
        if isinstance(owner, dict):
            if value.shape != owner[key].shape:
                raise FormatError(f"tensor {key} has shape {value.shape}, expected {owner[key].shape}",
                                  offset=offset - nbytes)
            owner[key] = value
        else:
            if value.shape != getattr(owner, key).shape:
                raise FormatError(f"batch-norm {key} shape mismatch", offset=offset - nbytes)
            setattr(owner, key, value)
    if offset != len(data):
        raise FormatError(f"{len(data) - offset} trailing bytes after last record", offset=offset)
    return params, state


def save(path, params, state):
    with open(path, "wb") as f:
        f.write(dumps(params, state))


def load(path, spec):
    with open(path, "rb") as f:
        return loads(f.read(), spec)
