"""
SGIRF1 field checkpoints.

Little-endian layout::

    b"SGIRF1"
    uint32  field count
    per field:
        uint16  name length, then the UTF-8 name
        uint8   ndim, then ndim uint32 dimensions
        float64 values, row-major
"""

import struct
from collections import OrderedDict
from pathlib import Path

import numpy as np
import torch

from sgir.errors import ParseError
from sgir.util.sampling import DTYPE

MAGIC = b"SGIRF1"


def encode_checkpoint(state):
    """Bytes of an ordered mapping name -> tensor or array."""
    out = [MAGIC, struct.pack("<I", len(state))]
    for name, value in state.items():
        data = np.ascontiguousarray(torch.as_tensor(value, dtype=DTYPE).detach().numpy(), dtype="<f8")
        encoded = name.encode("utf-8")
        out.append(struct.pack("<H", len(encoded)))
        out.append(encoded)
        out.append(struct.pack("<B", data.ndim))
        out.append(struct.pack(f"<{data.ndim}I", *data.shape))
        out.append(data.tobytes())
    return b"".join(out)


class _Reader:
    def __init__(self, data):
        self.data = data
        self.pos = 0

    def take(self, size, what):
        if self.pos + size > len(self.data):
            raise ParseError(f"truncated checkpoint while reading {what}", self.pos)
        chunk = self.data[self.pos:self.pos + size]
        self.pos += size
        return chunk

    def unpack(self, fmt, what):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def decode_checkpoint(data):
    reader = _Reader(data)
    if reader.take(len(MAGIC), "magic") != MAGIC:
        raise ParseError("not an SGIRF1 checkpoint", 0)
    (count,) = reader.unpack("<I", "field count")
    state = OrderedDict()
    for _ in range(count):
        (name_len,) = reader.unpack("<H", "name length")
        at = reader.pos
        try:
            name = reader.take(name_len, "name").decode("utf-8")
        except UnicodeDecodeError:
            raise ParseError("field name is not UTF-8", at) from None
        (ndim,) = reader.unpack("<B", "ndim")
        shape = reader.unpack(f"<{ndim}I", "shape")
        size = int(np.prod(shape, dtype=np.int64))
        values = np.frombuffer(reader.take(8 * size, f"values of {name!r}"), dtype="<f8")
        state[name] = torch.from_numpy(values.astype(np.float64).reshape(shape))
    if reader.pos != len(data):
        raise ParseError("trailing bytes after the last field", reader.pos)
    return state


def save_checkpoint(path, store):
    """Write every slice of a ParamStore (or a plain mapping)."""
    state = store.state_dict() if hasattr(store, "state_dict") else store
    Path(path).write_bytes(encode_checkpoint(state))


def load_checkpoint(path, store=None, strict=True):
    state = decode_checkpoint(Path(path).read_bytes())
    if store is not None:
        store.load_state_dict(state, strict=strict)
    return state
