"""Binary checkpoint format.

Layout (all little-endian)::

    b"AMGA"            magic
    u32                format version (1)
    u32                layer count
    per layer:
        u32 in_dim, u32 out_dim
        f32[out_dim * in_dim]   weights, row-major
        f32[out_dim]            bias

Only parameters are stored; optimizer moments are not.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .engine import FFLayer
from .errors import FormatError

MAGIC = b"AMGA"
VERSION = 1
_U32 = struct.Struct("<I")
_DIMS = struct.Struct("<II")


def checkpoint_bytes(layers: list[FFLayer]) -> bytes:
    parts = [MAGIC, _U32.pack(VERSION), _U32.pack(len(layers))]
    for layer in layers:
        parts.append(_DIMS.pack(layer.in_dim, layer.out_dim))
        parts.append(np.ascontiguousarray(layer.weights, dtype="<f4").tobytes())
        parts.append(np.ascontiguousarray(layer.bias, dtype="<f4").tobytes())
    return b"".join(parts)


def save_checkpoint(layers: list[FFLayer], path) -> None:
    Path(path).write_bytes(checkpoint_bytes(layers))


def layers_from_bytes(raw: bytes) -> list[FFLayer]:
    if len(raw) < 12:
        raise FormatError(f"checkpoint truncated: {len(raw)} bytes is shorter than the header")
    if raw[:4] != MAGIC:
        raise FormatError(f"bad checkpoint magic {raw[:4]!r}, expected {MAGIC!r}")
    (version,) = _U32.unpack_from(raw, 4)
    if version != VERSION:
        raise FormatError(f"unsupported checkpoint version {version}")
    (count,) = _U32.unpack_from(raw, 8)
    offset = 12
    layers = []
    for i in range(count):
        if offset + _DIMS.size > len(raw):
            raise FormatError(f"checkpoint truncated in layer {i} header")
        in_dim, out_dim = _DIMS.unpack_from(raw, offset)
        offset += _DIMS.size
        n_w, n_b = in_dim * out_dim, out_dim
        end = offset + 4 * (n_w + n_b)
        if end > len(raw):
            raise FormatError(f"checkpoint truncated in layer {i} parameters")
        w = np.frombuffer(raw, dtype="<f4", count=n_w, offset=offset).reshape(out_dim, in_dim)
        b = np.frombuffer(raw, dtype="<f4", count=n_b, offset=offset + 4 * n_w)
        if layers and layers[-1].out_dim != in_dim:
            raise FormatError(f"layer {i} input width {in_dim} does not follow previous width {layers[-1].out_dim}")
        layers.append(FFLayer.from_params(w.astype(np.float32), b.astype(np.float32), i))
        offset = end
    if offset != len(raw):
        raise FormatError(f"checkpoint has {len(raw) - offset} trailing bytes")
    return layers


def load_checkpoint(path) -> list[FFLayer]:
    return layers_from_bytes(Path(path).read_bytes())
