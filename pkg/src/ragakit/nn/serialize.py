"""Binary weight files.

Layout, little-endian throughout::

    b"RGLB"  u16 version  u32 layer_count
    per layer:  u8 kind_tag  u16 array_count
      per array:  u8 ndim  u32 dims[ndim]  f32 data[prod(dims)]

``kind_tag`` indexes ``LAYER_KINDS``. Arrays are the layer's trainable
parameters followed by its running statistics, in ``Network.get_weights``
order.
"""

from __future__ import annotations

import io
import struct
from pathlib import Path

import numpy as np

from ..errors import WeightFormatError
from .layers import LAYER_KINDS

MAGIC = b"RGLB"
VERSION = 1


def dumps(kinds: list[str], weights: list[list[np.ndarray]]) -> bytes:
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<HI", VERSION, len(weights)))
    for kind, arrays in zip(kinds, weights):
        buf.write(struct.pack("<BH", LAYER_KINDS.index(kind), len(arrays)))
        for arr in arrays:
            arr = np.asarray(arr)
            buf.write(struct.pack("<B", arr.ndim))
            buf.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            buf.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    return buf.getvalue()


def loads(data: bytes) -> tuple[list[str], list[list[np.ndarray]]]:
    view = memoryview(data)
    if bytes(view[:4]) != MAGIC:
        raise WeightFormatError("bad magic")
    try:
        version, count = struct.unpack_from("<HI", view, 4)
        if version != VERSION:
            raise WeightFormatError(f"unsupported version {version}")
        pos = 10
        kinds, weights = [], []
        for _ in range(count):
            tag, n_arrays = struct.unpack_from("<BH", view, pos)
            pos += 3
            kinds.append(LAYER_KINDS[tag])
            arrays = []
            for _ in range(n_arrays):
                (ndim,) = struct.unpack_from("<B", view, pos)
                pos += 1
                shape = struct.unpack_from(f"<{ndim}I", view, pos)
                pos += 4 * ndim
                size = int(np.prod(shape, dtype=np.int64))
                if pos + 4 * size > len(view):
                    raise WeightFormatError("truncated array data")
                arrays.append(np.frombuffer(view, dtype="<f4", count=size, offset=pos)
                              .reshape(shape).copy())
                pos += 4 * size
            weights.append(arrays)
    except (struct.error, IndexError) as exc:
        raise WeightFormatError(str(exc)) from exc
    return kinds, weights


def save_weights(path, net) -> None:
    Path(path).write_bytes(dumps([l.kind for l in net.layers], net.get_weights()))


def load_weights(path, net) -> None:
    kinds, weights = loads(Path(path).read_bytes())
    if kinds != [l.kind for l in net.layers]:
        raise WeightFormatError("layer kinds in file do not match the network")
    net.set_weights(weights)
