"""Checkpoint file format: magic, version, JSON manifest, float32 blobs,
trailing SHA-256 over everything before it."""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .config import ModelConfig
from .params import ModelParams
from ..errors import CorruptCheckpoint, VersionMismatch

CHECKPOINT_MAGIC = b"BCMD"
CHECKPOINT_VERSION = 1
_DIGEST_LEN = 32


def save_checkpoint(params: ModelParams, path: str | Path) -> None:
    manifest = {
        "config": params.config.to_dict(),
        "tensors": [
            {"name": name, "shape": list(tensor.shape)}
            for name, tensor in params.tensors.items()
        ],
    }
    header = json.dumps(manifest, sort_keys=True).encode("utf-8")
    body = bytearray()
    body += CHECKPOINT_MAGIC
    body += struct.pack("<II", CHECKPOINT_VERSION, len(header))
    body += header
    for tensor in params.tensors.values():
        body += np.ascontiguousarray(tensor, dtype="<f4").tobytes()
    digest = hashlib.sha256(body).digest()
    Path(path).write_bytes(bytes(body) + digest)


def load_checkpoint(
    path: str | Path, expected_config: ModelConfig | None = None
) -> ModelParams:
    """Read and validate a checkpoint.

    Raises CorruptCheckpoint on checksum, magic or size problems and
    VersionMismatch when the format version is unknown or the stored model
    configuration differs from expected_config.
    """
    raw = Path(path).read_bytes()
    if len(raw) < 4 + 8 + _DIGEST_LEN:
        raise CorruptCheckpoint(f"{path}: file too small to be a checkpoint")
    body, digest = raw[:-_DIGEST_LEN], raw[-_DIGEST_LEN:]
    if hashlib.sha256(body).digest() != digest:
        raise CorruptCheckpoint(f"{path}: checksum mismatch (truncated or modified)")
    if body[:4] != CHECKPOINT_MAGIC:
        raise CorruptCheckpoint(f"{path}: bad magic {body[:4]!r}")
    version, header_len = struct.unpack_from("<II", body, 4)
    if version != CHECKPOINT_VERSION:
        raise VersionMismatch(
            f"{path}: format version {version}, this build reads {CHECKPOINT_VERSION}"
        )
    header_end = 12 + header_len
    try:
        manifest = json.loads(body[12:header_end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptCheckpoint(f"{path}: unreadable manifest: {exc}") from exc

    config = ModelConfig.from_dict(manifest["config"])
    if expected_config is not None and config != expected_config:
        raise VersionMismatch(
            "checkpoint configuration does not match the requested model:\n"
            f"  checkpoint: {config.to_dict()}\n"
            f"  requested:  {expected_config.to_dict()}"
        )

    tensors: dict[str, np.ndarray] = {}
    offset = header_end
    for entry in manifest["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        end = offset + 4 * count
        if end > len(body):
            raise CorruptCheckpoint(f"{path}: tensor data truncated at {entry['name']}")
        tensors[entry["name"]] = (
            np.frombuffer(body, dtype="<f4", count=count, offset=offset)
            .reshape(shape)
            .copy()
        )
        offset = end
    if offset != len(body):
        raise CorruptCheckpoint(f"{path}: {len(body) - offset} unexpected trailing bytes")
    return ModelParams(config=config, tensors=tensors)
