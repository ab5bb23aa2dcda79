"""Binary checkpoint: config echo plus a named float32 tensor table, CRC-32 trailer.

Layout (little-endian)::

    b"SAAM" | u32 version | u32 n + n bytes JSON ModelConfig | u32 count
    count x ( u32 n + n bytes UTF-8 name | u8 dtype | u8 rank | rank x u32 dim | data )
    u32 CRC-32 of every preceding byte
"""

from __future__ import annotations

import dataclasses
import json
import struct
import zlib
from pathlib import Path

import numpy as np

from .errors import (
    BadMagicError,
    CheckpointError,
    CrcMismatchError,
    EchoMismatchError,
    TensorMismatchError,
    VersionMismatchError,
)
from .model import Model, ModelConfig, build_model, named_tensors, set_training

MAGIC = b"SAAM"
VERSION = 1
DTYPE_FLOAT32 = 0

_U32 = struct.Struct("<I")
_U8 = struct.Struct("<B")


def encode_checkpoint(model: Model) -> bytes:
    out = bytearray(MAGIC)
    out += _U32.pack(VERSION)
    echo = json.dumps(model.config.to_dict(), sort_keys=True).encode()
    out += _U32.pack(len(echo)) + echo
    tensors = list(named_tensors(model))
    out += _U32.pack(len(tensors))
    for name, t in tensors:
        raw = name.encode()
        out += _U32.pack(len(raw)) + raw
        out += _U8.pack(DTYPE_FLOAT32) + _U8.pack(t.ndim)
        for dim in t.shape:
            out += _U32.pack(dim)
        out += np.ascontiguousarray(t.data, dtype="<f4").tobytes()
    out += _U32.pack(zlib.crc32(out))
    return bytes(out)


def save_checkpoint(model: Model, path: Path) -> None:
    path.write_bytes(encode_checkpoint(model))


class _Reader:
    def __init__(self, buf: bytes, start: int) -> None:
        self.buf = buf
        self.pos = start

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            msg = "checkpoint ends inside a record"
            raise CheckpointError(msg)
        chunk = self.buf[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u32(self) -> int:
        return int(_U32.unpack(self.take(_U32.size))[0])

    def u8(self) -> int:
        return int(_U8.unpack(self.take(_U8.size))[0])


def decode_checkpoint(buf: bytes) -> tuple[ModelConfig, dict[str, np.ndarray]]:
    """Validate magic, CRC and version, then return the config echo and tensors."""
    if buf[: len(MAGIC)] != MAGIC:
        msg = f"expected magic {MAGIC!r}, got {buf[: len(MAGIC)]!r}"
        raise BadMagicError(msg)
    if len(buf) < len(MAGIC) + 2 * _U32.size:
        msg = "file too short to hold a checksum"
        raise CrcMismatchError(msg)
    body, trailer = buf[: -_U32.size], buf[-_U32.size :]
    stored = _U32.unpack(trailer)[0]
    actual = zlib.crc32(body)
    if stored != actual:
        msg = f"stored CRC {stored:#010x} != computed {actual:#010x}"
        raise CrcMismatchError(msg)

    reader = _Reader(body, len(MAGIC))
    version = reader.u32()
    if version != VERSION:
        msg = f"checkpoint version {version}, this build reads {VERSION}"
        raise VersionMismatchError(msg)
    try:
        echo = json.loads(reader.take(reader.u32()).decode())
        config = ModelConfig.from_dict(echo)
    except (ValueError, TypeError) as e:
        msg = f"unreadable configuration echo: {e}"
        raise CheckpointError(msg) from e

    tensors: dict[str, np.ndarray] = {}
    for _ in range(reader.u32()):
        name = reader.take(reader.u32()).decode()
        code = reader.u8()
        if code != DTYPE_FLOAT32:
            raise TensorMismatchError(name, f"unsupported dtype code {code}")
        shape = tuple(reader.u32() for _ in range(reader.u8()))
        count = int(np.prod(shape)) if shape else 1
        data = np.frombuffer(reader.take(4 * count), dtype="<f4").reshape(shape)
        tensors[name] = data.astype(np.float32)
    if reader.pos != len(body):
        msg = f"{len(body) - reader.pos} trailing bytes after the tensor table"
        raise CheckpointError(msg)
    return config, tensors


def _check_echo(echo: ModelConfig, requested: ModelConfig) -> None:
    """Every field but the init seed must agree."""
    for f in dataclasses.fields(ModelConfig):
        if f.name == "seed":
            continue
        stored, wanted = getattr(echo, f.name), getattr(requested, f.name)
        if stored != wanted:
            raise EchoMismatchError(f.name, stored, wanted)


def load_checkpoint(path: Path, cfg: ModelConfig | None = None) -> Model:
    """Rebuild the model from the echo (or ``cfg``) and copy every tensor in.

    A tensor missing, unexpected or of the wrong shape raises
    ``TensorMismatchError`` naming it; any other disagreement between ``cfg``
    and the echo raises ``EchoMismatchError``. The model comes back in
    inference mode.
    """
    try:
        buf = path.read_bytes()
    except OSError as e:
        msg = f"cannot read checkpoint {path}: {e}"
        raise CheckpointError(msg) from e
    echo, stored = decode_checkpoint(buf)
    model = build_model(cfg if cfg is not None else echo)

    expected = dict(named_tensors(model))
    for name in stored:
        if name not in expected:
            raise TensorMismatchError(name, "not part of the requested architecture")
    for name, t in expected.items():
        data = stored.get(name)
        if data is None:
            raise TensorMismatchError(name, "missing from checkpoint")
        if data.shape != t.shape:
            raise TensorMismatchError(
                name, f"checkpoint shape {data.shape}, model shape {t.shape}"
            )
        t.data[...] = data
    if cfg is not None:
        _check_echo(echo, cfg)
    set_training(model, False)
    return model
