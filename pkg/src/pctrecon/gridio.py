"""Raw grid persistence and run manifests.

Grids are written as an 8-value little-endian int64 header (magic, version,
rows, cols, kind tag, three reserved zeros) followed by the row-major
float64 payload. Manifests are JSON with sorted keys.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

MAGIC = int.from_bytes(b"PCTGRID0", "little")
VERSION = 1

KIND_TAGS = {
    "image": 0,
    "absorption": 1,
    "phase": 2,
    "intensity": 3,
    "contrast": 4,
    "labels": 5,
    "beta": 6,
    "delta": 7,
}
_TAG_NAMES = {v: k for k, v in KIND_TAGS.items()}


def write_grid(path, values: np.ndarray, kind: str = "image") -> None:
    if kind not in KIND_TAGS:
        raise ValueError(f"unknown grid kind {kind!r}")
    arr = np.asarray(values, dtype="<f8")
    if arr.ndim != 2:
        raise ValueError("grids must be 2-D")
    header = np.array(
        [MAGIC, VERSION, arr.shape[0], arr.shape[1], KIND_TAGS[kind], 0, 0, 0],
        dtype="<i8",
    )
    with open(path, "wb") as f:
        f.write(header.tobytes())
        f.write(np.ascontiguousarray(arr).tobytes())


def read_grid(path):
    """Returns (values, kind_name)."""
    raw = Path(path).read_bytes()
    header = np.frombuffer(raw[:64], dtype="<i8")
    if header.size != 8 or header[0] != MAGIC:
        raise ValueError(f"{path}: not a grid file")
    if header[1] != VERSION:
        raise ValueError(f"{path}: unsupported grid version {header[1]}")
    rows, cols, tag = int(header[2]), int(header[3]), int(header[4])
    data = np.frombuffer(raw[64:], dtype="<f8")
    if data.size != rows * cols:
        raise ValueError(f"{path}: truncated grid payload")
    return data.reshape(rows, cols).copy(), _TAG_NAMES.get(tag, "image")


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(path, manifest: dict) -> None:
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def read_manifest(path) -> dict:
    return json.loads(Path(path).read_text())
