"""Binary model checkpoints.

Layout (all integers little-endian unsigned):
    8 bytes   magic b"WDSELCP1"
    u32       format version (currently 1)
    u32       descriptor length, then that many bytes of canonical
              architecture JSON (sorted keys, compact separators)
    32 bytes  sha256 of the descriptor bytes
    u32       parameter count, then per parameter:
                  u16 name length + utf-8 name
                  u8 ndim + u32 per dimension
                  float64 little-endian data blob
No trailing bytes are tolerated; a short read anywhere raises before any
model object is constructed.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .errors import (ArchitectureMismatchError, CheckpointVersionError,
                     CorruptCheckpointError)
from .model import ModelConfig, SelectorModel

MAGIC = b"WDSELCP1"
VERSION = 1


def _canonical_descriptor(arch: dict) -> bytes:
    return json.dumps(arch, sort_keys=True, separators=(",", ":")).encode("utf-8")


def architecture_hash(arch: dict) -> str:
    return hashlib.sha256(_canonical_descriptor(arch)).hexdigest()


def save_checkpoint(model: SelectorModel, path) -> None:
    desc = _canonical_descriptor(model.architecture())
    params = model.named_parameters()
    parts = [MAGIC, struct.pack("<I", VERSION),
             struct.pack("<I", len(desc)), desc,
             hashlib.sha256(desc).digest(),
             struct.pack("<I", len(params))]
    for name, tensor in params:
        raw = name.encode("utf-8")
        arr = np.ascontiguousarray(tensor.data, dtype="<f8")
        parts.append(struct.pack("<H", len(raw)))
        parts.append(raw)
        parts.append(struct.pack("<B", arr.ndim))
        for dim in arr.shape:
            parts.append(struct.pack("<I", dim))
        parts.append(arr.tobytes())
    Path(path).write_bytes(b"".join(parts))


class _Reader:
    def __init__(self, blob: bytes, path):
        self.blob = blob
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise CorruptCheckpointError(
                f"{self.path}: truncated checkpoint "
                f"(needed {n} bytes at offset {self.pos})")
        out = self.blob[self.pos:self.pos + n]
        self.pos += n
        return out

    def u8(self) -> int:
        return struct.unpack("<B", self.take(1))[0]

    def u16(self) -> int:
        return struct.unpack("<H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]


def read_architecture(path) -> dict:
    """Read only the architecture descriptor, without building a model."""
    reader = _Reader(Path(path).read_bytes(), path)
    if reader.take(len(MAGIC)) != MAGIC:
        raise CorruptCheckpointError(f"{path}: bad magic bytes")
    version = reader.u32()
    if version != VERSION:
        raise CheckpointVersionError(
            f"{path}: checkpoint version {version}, supported version {VERSION}")
    desc = reader.take(reader.u32())
    if hashlib.sha256(desc).digest() != reader.take(32):
        raise CorruptCheckpointError(f"{path}: architecture hash mismatch")
    try:
        return json.loads(desc.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptCheckpointError(
            f"{path}: unreadable architecture descriptor: {exc}") from exc


def load_checkpoint(path, *, expected_architecture: dict | None = None) -> SelectorModel:
    """Rebuild a model from a checkpoint; bit-exact parameter round trip.

    When expected_architecture is given (the descriptor the caller's run
    was configured for), any difference is an architecture mismatch even
    if the file itself is internally consistent.
    """
    blob = Path(path).read_bytes()
    reader = _Reader(blob, path)
    if reader.take(len(MAGIC)) != MAGIC:
        raise CorruptCheckpointError(f"{path}: bad magic bytes")
    version = reader.u32()
    if version != VERSION:
        raise CheckpointVersionError(
            f"{path}: checkpoint version {version}, supported version {VERSION}")
    desc_bytes = reader.take(reader.u32())
    if hashlib.sha256(desc_bytes).digest() != reader.take(32):
        raise CorruptCheckpointError(f"{path}: architecture hash mismatch")
    try:
        arch = json.loads(desc_bytes.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptCheckpointError(
            f"{path}: unreadable architecture descriptor: {exc}") from exc

    if expected_architecture is not None:
        want = architecture_hash(expected_architecture)
        have = architecture_hash(arch)
        if want != have:
            diff = _describe_difference(expected_architecture, arch)
            raise ArchitectureMismatchError(
                f"{path}: checkpoint architecture does not match the run "
                f"configuration ({diff})")

    bank_names = arch.pop("bank_names", None)
    if not isinstance(bank_names, list) or not bank_names:
        raise CorruptCheckpointError(f"{path}: descriptor lacks bank names")
    try:
        mcfg = ModelConfig(**arch)
    except TypeError as exc:
        raise CorruptCheckpointError(
            f"{path}: descriptor does not describe a model: {exc}") from exc
    model = SelectorModel.build(mcfg, tuple(bank_names), seed=0)

    count = reader.u32()
    values = {}
    for _ in range(count):
        name = reader.take(reader.u16()).decode("utf-8")
        ndim = reader.u8()
        shape = tuple(reader.u32() for _ in range(ndim))
        n_items = int(np.prod(shape, dtype=np.int64)) if shape else 1
        raw = reader.take(8 * n_items)
        values[name] = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
    if reader.pos != len(blob):
        raise CorruptCheckpointError(
            f"{path}: {len(blob) - reader.pos} trailing bytes after parameters")

    expected_names = [name for name, _ in model.named_parameters()]
    if sorted(values) != sorted(expected_names):
        raise CorruptCheckpointError(
            f"{path}: parameter names do not match the declared architecture")
    for name, tensor in model.named_parameters():
        arr = values[name]
        if arr.shape != tensor.data.shape:
            raise CorruptCheckpointError(
                f"{path}: parameter {name} has shape {arr.shape}, "
                f"expected {tensor.data.shape}")
        tensor.data[...] = arr
    return model


def _describe_difference(want: dict, have: dict) -> str:
    keys = sorted(set(want) | set(have))
    for key in keys:
        if want.get(key) != have.get(key):
            return f"first differing field: {key}={have.get(key)!r}, expected {want.get(key)!r}"
    return "descriptors hash differently"
