"""
Binary checkpoint format.

Layout (little-endian):

    magic b"EFGN" | u32 version | u32 meta_len | meta JSON (sorted keys)
    u32 n_entries | entries sorted by name:
        u16 name_len | name | u8 dtype tag | u8 rank | u32 extents[rank] | u64 offset | u64 nbytes
    u64 payload_len | payload
    8-byte blake2b digest of everything before it

Tensor names carry a section prefix: ``param/``, ``mask/``, ``buffer/`` or
``optim/<model>/``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import hashlib
import json
import os
from pathlib import Path
import struct
from typing import Any

import numpy as np

from ..exceptions import (
    CheckpointChecksumError,
    CheckpointError,
    CheckpointMagicError,
    CheckpointTruncatedError,
    CheckpointVersionError,
)
from ..logging_utils import get_logger

logger = get_logger(__name__)

MAGIC = b"EFGN"
FORMAT_VERSION = 1
DIGEST_SIZE = 8

DTYPE_TAGS: dict[np.dtype, int] = {
    np.dtype("<f4"): 0,
    np.dtype("u1"): 1,
    np.dtype("<f8"): 2,
}
TAG_DTYPES = {tag: dtype for dtype, tag in DTYPE_TAGS.items()}


@dataclass
class Checkpoint:
    """Everything needed to resume training or run inference."""

    config: dict[str, Any]
    tensors: dict[str, np.ndarray] = field(default_factory=dict)
    epoch: int = 0
    steps: dict[str, int] = field(default_factory=dict)
    rng_state: dict[str, Any] = field(default_factory=dict)
    version: int = FORMAT_VERSION

    def section(self, prefix: str) -> dict[str, np.ndarray]:
        """Tensors under ``prefix/`` with the prefix stripped."""
        head = f"{prefix}/"
        return {k[len(head):]: v for k, v in self.tensors.items() if k.startswith(head)}

    @property
    def params(self) -> dict[str, np.ndarray]:
        return self.section("param")

    @property
    def masks(self) -> dict[str, np.ndarray]:
        return self.section("mask")

    @property
    def buffers(self) -> dict[str, np.ndarray]:
        return self.section("buffer")

    def meta(self) -> dict[str, Any]:
        return {
            "config": self.config,
            "epoch": self.epoch,
            "steps": self.steps,
            "rng_state": self.rng_state,
        }


def encode_checkpoint(ckpt: Checkpoint) -> bytes:
    meta = json.dumps(ckpt.meta(), sort_keys=True, separators=(",", ":")).encode("utf-8")
    head = [MAGIC, struct.pack("<II", FORMAT_VERSION, len(meta)), meta]
    head.append(struct.pack("<I", len(ckpt.tensors)))

    chunks: list[bytes] = []
    offset = 0
    for name in sorted(ckpt.tensors):
        array = np.asarray(ckpt.tensors[name])
        dtype = array.dtype.newbyteorder("<") if array.dtype.byteorder == ">" else array.dtype
        if dtype not in DTYPE_TAGS:
            raise CheckpointError(f"Tensor '{name}' has unsupported dtype {array.dtype}")
        data = np.ascontiguousarray(array, dtype=dtype).tobytes()
        encoded = name.encode("utf-8")
        head.append(struct.pack("<H", len(encoded)) + encoded)
        head.append(struct.pack("<BB", DTYPE_TAGS[dtype], array.ndim))
        head.append(struct.pack(f"<{array.ndim}I", *array.shape))
        head.append(struct.pack("<QQ", offset, len(data)))
        chunks.append(data)
        offset += len(data)

    payload = b"".join(chunks)
    body = b"".join(head) + struct.pack("<Q", len(payload)) + payload
    return body + hashlib.blake2b(body, digest_size=DIGEST_SIZE).digest()


class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise CheckpointTruncatedError(
                f"Checkpoint ends at byte {len(self.blob)}, needed {self.pos + n}"
            )
        out = self.blob[self.pos: self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str) -> tuple[Any, ...]:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def decode_checkpoint(blob: bytes) -> Checkpoint:
    """
    Parse and verify a checkpoint image.

    Raises:
        CheckpointMagicError: Wrong leading bytes
        CheckpointVersionError: Unsupported format version
        CheckpointTruncatedError: File ends before its declared contents
        CheckpointChecksumError: Digest mismatch
    """
    if blob[:4] != MAGIC:
        raise CheckpointMagicError("Not an EFGN checkpoint (bad magic)")
    reader = _Reader(blob)
    reader.take(4)
    (version,) = reader.unpack("<I")
    if version != FORMAT_VERSION:
        raise CheckpointVersionError(
            f"Checkpoint format version {version} is not supported (expected {FORMAT_VERSION})"
        )
    (meta_len,) = reader.unpack("<I")
    meta_raw = reader.take(meta_len)
    (n_entries,) = reader.unpack("<I")
    entries = []
    for _ in range(n_entries):
        (name_len,) = reader.unpack("<H")
        name = reader.take(name_len).decode("utf-8")
        tag, rank = reader.unpack("<BB")
        shape = reader.unpack(f"<{rank}I")
        offset, nbytes = reader.unpack("<QQ")
        entries.append((name, tag, shape, offset, nbytes))
    (payload_len,) = reader.unpack("<Q")
    payload_start = reader.pos
    reader.take(payload_len)
    body_end = reader.pos
    digest = reader.take(DIGEST_SIZE)
    if reader.pos != len(blob):
        raise CheckpointError(f"{len(blob) - reader.pos} unexpected trailing bytes")
    if hashlib.blake2b(blob[:body_end], digest_size=DIGEST_SIZE).digest() != digest:
        raise CheckpointChecksumError("Checkpoint checksum mismatch")

    try:
        meta = json.loads(meta_raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"Unreadable checkpoint metadata: {e}") from e

    tensors: dict[str, np.ndarray] = {}
    for name, tag, shape, offset, nbytes in entries:
        if tag not in TAG_DTYPES:
            raise CheckpointError(f"Tensor '{name}' has unknown dtype tag {tag}")
        dtype = TAG_DTYPES[tag]
        if offset + nbytes > payload_len or nbytes != int(np.prod(shape, dtype=np.int64)) * dtype.itemsize:
            raise CheckpointError(f"Tensor '{name}' has an inconsistent directory entry")
        start = payload_start + offset
        tensors[name] = (
            np.frombuffer(blob, dtype=dtype, count=nbytes // dtype.itemsize, offset=start)
            .reshape(shape)
            .copy()
        )
    return Checkpoint(
        config=meta["config"],
        tensors=tensors,
        epoch=int(meta["epoch"]),
        steps={k: int(v) for k, v in meta["steps"].items()},
        rng_state=meta["rng_state"],
        version=version,
    )


def save_checkpoint(ckpt: Checkpoint, path: str | Path) -> Path:
    """Write ``ckpt`` atomically (temp file + rename)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(encode_checkpoint(ckpt))
    os.replace(tmp, path)
    logger.info("Saved checkpoint (%d tensors, epoch %d) to %s", len(ckpt.tensors), ckpt.epoch, path)
    return path


def load_checkpoint(path: str | Path) -> Checkpoint:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"Checkpoint not found: {path}")
    ckpt = decode_checkpoint(path.read_bytes())
    logger.info("Loaded checkpoint from %s (epoch %d)", path, ckpt.epoch)
    return ckpt
