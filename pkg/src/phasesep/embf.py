"""EMBF binary tensor container.

Little-endian layout: magic ``EMBF`` (4 bytes), u32 version = 1, u32 rows,
u32 dim, then rows*dim IEEE-754 32-bit floats, row-major. The raw container
accepts any shape; the embedding-table wrapper in `encoder` additionally
enforces an even dim and joins the labels sidecar.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import EmbfFormatError

MAGIC = b"EMBF"
VERSION = 1
_HEADER = struct.Struct("<4sIII")


def write_array(path: str | Path, arr: np.ndarray) -> None:
    """Write a 2-D array as float32. Lossless for float32 input."""
    arr = np.asarray(arr)
    if arr.ndim != 2:
        raise EmbfFormatError(f"EMBF stores 2-D arrays, got ndim={arr.ndim}")
    rows, dim = arr.shape
    payload = np.ascontiguousarray(arr, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, rows, dim))
        fh.write(payload)


def read_array(path: str | Path) -> np.ndarray:
    """Read a container back as a (rows, dim) float32 array."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise EmbfFormatError(f"{path}: truncated header")
    magic, version, rows, dim = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise EmbfFormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise EmbfFormatError(f"{path}: unsupported version {version}")
    expected = rows * dim * 4
    body = raw[_HEADER.size :]
    if len(body) != expected:
        raise EmbfFormatError(
            f"{path}: payload has {len(body)} bytes, expected {expected}"
        )
    data = np.frombuffer(body, dtype="<f4").reshape(rows, dim)
    return data.copy()


def labels_sidecar_path(path: str | Path) -> Path:
    return Path(str(path) + ".labels.jsonl")


def write_labels(path: str | Path, labels: list[dict]) -> None:
    """One JSON object per row: aspect, polarity, text_len, optional intensity."""
    with open(labels_sidecar_path(path), "w", encoding="utf-8") as fh:
        for row in labels:
            fh.write(json.dumps(row, separators=(",", ":")) + "\n")


def read_labels(path: str | Path) -> list[dict]:
    sidecar = labels_sidecar_path(path)
    rows = []
    with open(sidecar, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise EmbfFormatError(f"{sidecar}: bad JSON on line {line_no + 1}") from exc
            for key in ("aspect", "polarity", "text_len"):
                if key not in obj:
                    raise EmbfFormatError(
                        f"{sidecar}: line {line_no + 1} missing field {key!r}"
                    )
            rows.append(obj)
    return rows
