"""Binary checkpoint format for trained models.

Layout: 8-byte magic ``ADVMTCK1``; u32 little-endian header length; UTF-8
JSON header (config snapshot, task names, tensor manifest of
name/scope/shape); per-task vocabularies as length-prefixed UTF-8 token
lists; then raw little-endian float64 payloads in manifest order.
Trailing bytes are an error, so framing mistakes never pass silently.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .config import Config
from .corpus import Vocabulary
from .multitask import ModelState, build_model

MAGIC_PREFIX = b"ADVMTCK"
FORMAT_VERSION = 1
MAGIC = MAGIC_PREFIX + str(FORMAT_VERSION).encode()


class CheckpointError(ValueError):
    pass


class BadMagicError(CheckpointError):
    pass


class VersionMismatchError(CheckpointError):
    pass


class TruncatedError(CheckpointError):
    pass


def save_checkpoint(model: ModelState, path):
    params = model.parameters()
    header = {
        "version": FORMAT_VERSION,
        "config": model.config.to_dict(),
        "tasks": [t.name for t in model.tasks],
        "tensors": [
            {"name": p.name, "scope": p.scope, "shape": list(p.value.shape)}
            for p in params
        ],
    }
    header_bytes = json.dumps(header, sort_keys=True,
                              separators=(",", ":")).encode("utf-8")
    out = bytearray()
    out += MAGIC
    out += struct.pack("<I", len(header_bytes))
    out += header_bytes
    for task in model.tasks:
        tokens = task.vocab.nonreserved
        out += struct.pack("<I", len(tokens))
        for tok in tokens:
            b = tok.encode("utf-8")
            out += struct.pack("<I", len(b)) + b
    for p in params:
        out += np.ascontiguousarray(p.value, dtype="<f8").tobytes()
    Path(path).write_bytes(bytes(out))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedError(
                f"truncated checkpoint: wanted {n} bytes at offset {self.pos}, "
                f"file has {len(self.data)}")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]


def load_checkpoint(path) -> ModelState:
    data = Path(path).read_bytes()
    r = _Reader(data)
    magic = r.take(8)
    if not magic.startswith(MAGIC_PREFIX):
        raise BadMagicError(f"bad magic {magic!r}; not an advmt checkpoint")
    if magic != MAGIC:
        raise VersionMismatchError(
            f"unsupported checkpoint version marker {magic!r}; expected {MAGIC!r}")
    header = json.loads(r.take(r.u32()).decode("utf-8"))
    if header.get("version") != FORMAT_VERSION:
        raise VersionMismatchError(
            f"unsupported checkpoint version {header.get('version')}")
    config = Config.from_dict(header["config"])

    vocabs = []
    for tc in config.tasks:
        count = r.u32()
        tokens = [r.take(r.u32()).decode("utf-8") for _ in range(count)]
        vocabs.append(Vocabulary.from_tokens(tokens, tc.min_frequency))

    model = build_model(config, vocabs, np.random.default_rng(0))
    params = {p.name: p for p in model.parameters()}
    manifest = header["tensors"]
    if set(params) != {t["name"] for t in manifest}:
        raise CheckpointError("tensor manifest does not match the model layout")
    for entry in manifest:
        p = params[entry["name"]]
        shape = tuple(entry["shape"])
        if p.value.shape != shape:
            raise CheckpointError(
                f"tensor {entry['name']!r}: declared shape {shape} does not "
                f"match model shape {p.value.shape}")
        n = int(np.prod(shape)) if shape else 1
        raw = r.take(8 * n)
        p.value[...] = np.frombuffer(raw, dtype="<f8").reshape(shape)
    if r.pos != len(data):
        raise CheckpointError(
            f"{len(data) - r.pos} trailing bytes after the declared payloads")
    return model
