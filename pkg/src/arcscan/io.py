"""File formats: ARSD image containers, key=value configs, CSV/PGM/index lists."""
from __future__ import annotations

import csv
import re
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import N_CLASSES, SIZE

MAGIC = b"ARSD1"
_HEADER = struct.Struct("<5sIII")
_RECORD_BYTES = 1 + 4 * SIZE * SIZE


class ArsdFormatError(ValueError):
    """Malformed ARSD container; ``offset`` is the byte position of the fault."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class ConfigError(ValueError):
    pass


@dataclass
class ArsDataset:
    """A labelled stack of ARS images, shape (N, 180, 180)."""

    images: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.images.ndim != 3 or self.images.shape[1:] != (SIZE, SIZE):
            raise ValueError(f"images must be (N, {SIZE}, {SIZE}), got {self.images.shape}")
        if self.labels.shape != (self.images.shape[0],):
            raise ValueError("one label per image required")

    def __len__(self) -> int:
        return self.images.shape[0]


def write_arsd(path, images: np.ndarray, labels) -> None:
    images = np.asarray(images)
    labels = np.asarray(labels)
    n = images.shape[0]
    if images.shape != (n, SIZE, SIZE) or labels.shape != (n,):
        raise ValueError("images must be (N, 180, 180) with N labels")
    if n and (labels.min() < 0 or labels.max() >= N_CLASSES):
        raise ValueError("class ids must be in [0, 4]")
    px = images.astype("<f4").reshape(n, -1)
    rec = np.empty(n, dtype=[("label", "u1"), ("pixels", "<f4", (SIZE * SIZE,))])
    rec["label"] = labels
    rec["pixels"] = px
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, n, SIZE, SIZE))
        fh.write(rec.tobytes())


def read_arsd(path) -> ArsDataset:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ArsdFormatError("truncated header", len(data))
    magic, n, h, w = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise ArsdFormatError(f"bad magic {magic!r}", 0)
    if h != SIZE:
        raise ArsdFormatError(f"height {h} != {SIZE}", 9)
    if w != SIZE:
        raise ArsdFormatError(f"width {w} != {SIZE}", 13)
    expected = _HEADER.size + n * _RECORD_BYTES
    if len(data) < expected:
        bad = (len(data) - _HEADER.size) // _RECORD_BYTES
        raise ArsdFormatError(f"truncated record {bad} of {n}", _HEADER.size + bad * _RECORD_BYTES)
    if len(data) > expected:
        raise ArsdFormatError("trailing bytes after last record", expected)
    rec = np.frombuffer(data, dtype=[("label", "u1"), ("pixels", "<f4", (SIZE * SIZE,))],
                        count=n, offset=_HEADER.size)
    labels = rec["label"].astype(np.int64)
    bad = np.flatnonzero(labels >= N_CLASSES)
    if bad.size:
        raise ArsdFormatError(f"class id {labels[bad[0]]} out of range", _HEADER.size + bad[0] * _RECORD_BYTES)
    images = rec["pixels"].astype(np.float64).reshape(n, SIZE, SIZE)
    return ArsDataset(images, labels)


def parse_config(text: str) -> dict[str, str]:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        out[key] = value
    return out


def read_config(path) -> dict[str, str]:
    return parse_config(Path(path).read_text())


def format_config(values: dict) -> str:
    return "".join(f"{k} = {v}\n" for k, v in values.items())


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_pgm(path, grid: np.ndarray) -> None:
    """8-bit binary PGM (P5), scaled so the maximum count maps to 255."""
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 2:
        raise ValueError("PGM needs a 2-D grid")
    top = grid.max() if grid.size else 0.0
    scaled = np.zeros(grid.shape, dtype=np.uint8) if top <= 0 else \
        np.floor(grid / top * 255.0 + 0.5).astype(np.uint8)
    h, w = grid.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(scaled.tobytes())


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    m = re.match(rb"P5\s+(\d+)\s+(\d+)\s+(\d+)\s", data)
    if m is None:
        raise ValueError("not a binary PGM")
    w, h, maxval = (int(g) for g in m.groups())
    if maxval != 255:
        raise ValueError("only 8-bit PGM supported")
    return np.frombuffer(data, dtype=np.uint8, count=w * h, offset=m.end()).reshape(h, w)


def write_index_list(path, indices) -> None:
    Path(path).write_text("".join(f"{int(i)}\n" for i in sorted(indices)))


def read_index_list(path) -> list[int]:
    return [int(s) for s in Path(path).read_text().split()]
