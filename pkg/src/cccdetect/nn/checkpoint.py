"""Model checkpoint container: JSON header plus raw float32 payload.

Byte layout::

    [0:8)    magic  b"CCCKPT01"
    [8:16)   little-endian uint64, JSON header length in bytes
    [16:16+L) UTF-8 JSON header
    [16+L:)  parameter payload, raw little-endian float32, row-major

The header lists the role tag, architecture config, one record per
parameter (name, shape, byte offset into the payload, byte length), the
training provenance (seed, epochs, config hash), and an optional fixture
recorded at save time for load verification.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"CCCKPT01"

ROLE_SEGMENTATION = "segmentation"
ROLE_CLASSIFIER = "classifier"


class CheckpointError(ValueError):
    """Malformed checkpoint file or incompatible configuration."""


@dataclass
class Checkpoint:
    role: str
    arch: dict
    params: dict            # name -> float32 ndarray
    provenance: dict = field(default_factory=dict)
    fixture: dict | None = None


def save_checkpoint(path, role, arch, params, provenance, fixture=None) -> Path:
    """Write a checkpoint; ``params`` maps names to float32 arrays."""
    path = Path(path)
    records = []
    chunks = []
    offset = 0
    for name in params:
        arr = np.ascontiguousarray(params[name], dtype="<f4")
        raw = arr.tobytes()
        records.append({
            "name": name,
            "shape": list(arr.shape),
            "offset": offset,
            "nbytes": len(raw),
        })
        chunks.append(raw)
        offset += len(raw)
    header = {
        "format_version": 1,
        "role": role,
        "arch": arch,
        "params": records,
        "provenance": provenance,
    }
    if fixture is not None:
        header["fixture"] = fixture
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(header_bytes)))
        fh.write(header_bytes)
        for raw in chunks:
            fh.write(raw)
    return path


def load_checkpoint(path) -> Checkpoint:
    path = Path(path)
    blob = path.read_bytes()
    if blob[:8] != MAGIC:
        raise CheckpointError(f"{path}: bad magic, not a checkpoint file")
    (header_len,) = struct.unpack("<Q", blob[8:16])
    try:
        header = json.loads(blob[16:16 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: unreadable header: {exc}") from exc
    payload = blob[16 + header_len:]
    params = {}
    for rec in header["params"]:
        raw = payload[rec["offset"]:rec["offset"] + rec["nbytes"]]
        if len(raw) != rec["nbytes"]:
            raise CheckpointError(f"{path}: truncated payload for parameter {rec['name']}")
        arr = np.frombuffer(raw, dtype="<f4").reshape(rec["shape"]).copy()
        params[rec["name"]] = arr
    return Checkpoint(
        role=header["role"],
        arch=header["arch"],
        params=params,
        provenance=header.get("provenance", {}),
        fixture=header.get("fixture"),
    )
