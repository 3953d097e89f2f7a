"""Binary checkpoint format for :class:`LstmModel`.

Layout (all integers little-endian)::

    b"RNLS"                 magic
    u16                     format version
    u32                     spec block length in bytes
    spec block              UTF-8 ``key=value`` lines: name, dims, d_x, W, seed, trained_epochs
    u64                     payload length in bytes (8 * parameter count)
    payload                 float64 LE parameters

Parameter order: for each layer, for each gate in (input, forget, output,
candidate): input weights W (d_in x H, row-major), recurrent weights U
(H x H, row-major), bias b (H); then head weights (H_last) and head bias.
"""

from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np

from .errors import CheckpointFormatError, CheckpointSpecError, CheckpointTruncatedError, ConfigError
from .lstm_core import ArchSpec, LayerParams, LstmModel, param_count

MAGIC = b"RNLS"
VERSION = 1
_F64 = np.dtype("<f8")


def _spec_block(model: LstmModel) -> bytes:
    s = model.spec
    lines = [
        f"name={s.name}",
        "dims=" + ",".join(str(h) for h in s.hidden_dims),
        f"d_x={s.d_x}",
        f"W={s.W}",
        f"seed={model.seed}",
        f"trained_epochs={model.trained_epochs}",
    ]
    return ("\n".join(lines) + "\n").encode("utf-8")


def flatten(model: LstmModel) -> np.ndarray:
    parts = []
    for layer in model.layers:
        H = layer.hidden
        for k in range(4):
            cols = slice(k * H, (k + 1) * H)
            parts += [layer.wx[:, cols].ravel(), layer.wh[:, cols].ravel(), layer.b[cols]]
    parts += [model.head_w, model.head_b]
    return np.concatenate(parts)


def unflatten(spec: ArchSpec, flat: np.ndarray, seed=0, trained_epochs=0) -> LstmModel:
    pos = 0

    def take(n, shape):
        nonlocal pos
        out = flat[pos:pos + n].reshape(shape)
        pos += n
        return out

    layers = []
    for d_in, H in zip(spec.layer_input_dims, spec.hidden_dims):
        wx = np.empty((d_in, 4 * H))
        wh = np.empty((H, 4 * H))
        b = np.empty(4 * H)
        for k in range(4):
            cols = slice(k * H, (k + 1) * H)
            wx[:, cols] = take(d_in * H, (d_in, H))
            wh[:, cols] = take(H * H, (H, H))
            b[cols] = take(H, (H,))
        layers.append(LayerParams(wx, wh, b))
    h_last = spec.hidden_dims[-1]
    head_w = take(h_last, (h_last,)).copy()
    head_b = take(1, (1,)).copy()
    return LstmModel(spec, layers, head_w, head_b, seed=seed, trained_epochs=trained_epochs)


def dumps(model: LstmModel) -> bytes:
    spec = _spec_block(model)
    payload = flatten(model).astype(_F64).tobytes()
    return (MAGIC + struct.pack("<HI", VERSION, len(spec)) + spec
            + struct.pack("<Q", len(payload)) + payload)


def save_checkpoint(model: LstmModel, path) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(dumps(model))
    os.replace(tmp, path)


def _parse_spec(block: bytes):
    try:
        fields = dict(line.split("=", 1) for line in block.decode("utf-8").splitlines() if line)
        spec = ArchSpec(
            name=fields["name"],
            hidden_dims=tuple(int(v) for v in fields["dims"].split(",")),
            d_x=int(fields["d_x"]),
            W=int(fields["W"]),
        )
        return spec, int(fields["seed"]), int(fields["trained_epochs"])
    except (UnicodeDecodeError, KeyError, ValueError, ConfigError) as exc:
        raise CheckpointSpecError(f"malformed spec block: {exc}") from exc


def loads(data: bytes) -> LstmModel:
    if len(data) < 4:
        raise CheckpointTruncatedError("file shorter than the magic bytes")
    if data[:4] != MAGIC:
        raise CheckpointFormatError(f"bad magic {data[:4]!r}, expected {MAGIC!r}")
    if len(data) < 10:
        raise CheckpointTruncatedError("file ends inside the header")
    version, spec_len = struct.unpack_from("<HI", data, 4)
    if version != VERSION:
        raise CheckpointFormatError(f"unsupported checkpoint version {version} (reader supports {VERSION})")
    pos = 10
    if len(data) < pos + spec_len + 8:
        raise CheckpointTruncatedError("file ends inside the spec block")
    spec, seed, epochs = _parse_spec(data[pos:pos + spec_len])
    pos += spec_len
    (payload_len,) = struct.unpack_from("<Q", data, pos)
    pos += 8
    expected = 8 * param_count(spec, include_head=True)
    if payload_len != expected:
        raise CheckpointSpecError(
            f"payload declares {payload_len} bytes but spec {spec.name} needs {expected}")
    if len(data) < pos + payload_len:
        raise CheckpointTruncatedError(
            f"payload truncated: {len(data) - pos} of {payload_len} bytes present")
    if len(data) > pos + payload_len:
        raise CheckpointFormatError(f"{len(data) - pos - payload_len} unexpected trailing bytes")
    flat = np.frombuffer(data, dtype=_F64, count=payload_len // 8, offset=pos).astype(np.float64)
    if not np.all(np.isfinite(flat)):
        raise CheckpointSpecError("payload contains non-finite parameters")
    return unflatten(spec, flat, seed, epochs)


def load_checkpoint(path) -> LstmModel:
    return loads(Path(path).read_bytes())
