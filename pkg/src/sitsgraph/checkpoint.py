"""Checkpoint files: a length-prefixed JSON header (architecture, shapes,
seed, epoch, metrics) followed by the little-endian float32 parameter blob in
declaration order."""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import MissingFile, ShapeMismatch


def save_checkpoint(path: str | Path, header: dict, params: list[np.ndarray]) -> None:
    header = dict(header)
    header["shapes"] = [list(p.shape) for p in params]
    blob = b"".join(np.ascontiguousarray(p, dtype="<f4").tobytes() for p in params)
    hj = json.dumps(header, sort_keys=True).encode()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(struct.pack("<I", len(hj)))
        f.write(hj)
        f.write(blob)


def load_checkpoint(path: str | Path) -> tuple[dict, list[np.ndarray]]:
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"missing checkpoint {path}")
    raw = path.read_bytes()
    (hlen,) = struct.unpack("<I", raw[:4])
    header = json.loads(raw[4 : 4 + hlen])
    shapes = [tuple(s) for s in header["shapes"]]
    expected = sum(int(np.prod(s)) * 4 for s in shapes)
    blob = raw[4 + hlen :]
    if len(blob) != expected:
        raise ShapeMismatch(f"parameter blob holds {len(blob)} bytes, expected {expected}")
    params = []
    off = 0
    for s in shapes:
        size = int(np.prod(s)) * 4
        params.append(np.frombuffer(blob[off : off + size], dtype="<f4").reshape(s).copy())
        off += size
    return header, params
