"""Spherical ARS data model.

An ARS image is the upper hemisphere of scattered intensity unrolled onto a
180x180 grid at 1 degree resolution.  Rows index the horizontal angle beta,
columns index the vertical angle alpha.  Column ``c`` holds the latitudinal
arc at ``alpha = c`` degrees; columns 0..89 carry ``beta`` in [0, 180] and
columns 90..179 carry ``beta`` in [0, -180], i.e. the second half of the
latitude at ``180 - alpha``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterable, Sequence

import numpy as np

SIZE = 180
N_PIXELS = SIZE * SIZE


class DeficiencyClass(IntEnum):
    """Vacancy deficiency level; the integer value is the class id."""

    D0 = 0
    D10 = 1
    D20 = 2
    D40 = 3
    D60 = 4

    @property
    def level(self) -> float:
        return _LEVELS[self.value]


_LEVELS = (0.0, 0.1, 0.2, 0.4, 0.6)
N_CLASSES = len(_LEVELS)


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ArsImage:
    pixels: np.ndarray
    label: DeficiencyClass | None = None

    def __post_init__(self):
        px = np.array(self.pixels, dtype=np.float64)
        if px.shape != (SIZE, SIZE):
            raise ValueError(f"ARS image must be {SIZE}x{SIZE}, got {px.shape}")
        if not np.all(np.isfinite(px)):
            raise ValueError("ARS image contains non-finite values")
        object.__setattr__(self, "pixels", _readonly(px))
        if self.label is not None:
            object.__setattr__(self, "label", DeficiencyClass(int(self.label)))


@dataclass(frozen=True)
class ArcSet:
    """Sorted, duplicate-free latitudinal arc (column) indices."""

    indices: tuple[int, ...]

    def __init__(self, indices: Iterable[int]):
        idx = [int(i) for i in indices]
        if len(set(idx)) != len(idx):
            raise ValueError(f"duplicate arc indices in {idx}")
        for i in idx:
            if not 0 <= i < SIZE:
                raise ValueError(f"arc index {i} out of range [0, {SIZE - 1}]")
        object.__setattr__(self, "indices", tuple(sorted(idx)))

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.indices, dtype=np.intp)


@dataclass(frozen=True, eq=False)
class PointMask:
    mask: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.array(self.mask, dtype=bool)
        if m.shape != (SIZE, SIZE):
            raise ValueError(f"mask must be {SIZE}x{SIZE}, got {m.shape}")
        object.__setattr__(self, "mask", _readonly(m))

    @property
    def count(self) -> int:
        return int(self.mask.sum())

    def flat_indices(self) -> np.ndarray:
        """Row-major indices of sampled pixels, ascending."""
        return np.flatnonzero(self.mask)

    def __eq__(self, other):
        return isinstance(other, PointMask) and np.array_equal(self.mask, other.mask)

    @classmethod
    def from_flat_indices(cls, indices: Sequence[int]) -> "PointMask":
        idx = np.asarray(indices, dtype=np.intp)
        if idx.size and (idx.min() < 0 or idx.max() >= N_PIXELS):
            raise ValueError("pixel index out of range")
        if np.unique(idx).size != idx.size:
            raise ValueError("duplicate pixel indices")
        m = np.zeros(N_PIXELS, dtype=bool)
        m[idx] = True
        return cls(m.reshape(SIZE, SIZE))

    @classmethod
    def from_arcs(cls, arcs: ArcSet, points: Sequence[int] | None = None) -> "PointMask":
        """Mask covering ``arcs``; ``points`` optionally picks positions in the
        concatenated arc vector (position ``j`` is row ``j % 180`` of arc
        ``arcs[j // 180]``)."""
        m = np.zeros((SIZE, SIZE), dtype=bool)
        cols = arcs.as_array()
        if points is None:
            m[:, cols] = True
        else:
            rows, cidx = concat_position_to_pixel(arcs, points)
            m[rows, cidx] = True
        return cls(m)

    @classmethod
    def full(cls) -> "PointMask":
        return cls(np.ones((SIZE, SIZE), dtype=bool))


def concat_position_to_pixel(arcs: ArcSet, points: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    """Map positions in the concatenated arc vector to (row, column) pixels."""
    pts = np.asarray(points, dtype=np.intp)
    cols = arcs.as_array()
    if pts.size and (pts.min() < 0 or pts.max() >= SIZE * len(cols)):
        raise ValueError("point index outside the selected arcs")
    return pts % SIZE, cols[pts // SIZE]


def arc_to_angles(arc_index: int) -> tuple[float, tuple[float, float]]:
    """Return ``(alpha, (beta_start, beta_end))`` in degrees for a column."""
    if not isinstance(arc_index, (int, np.integer)) or not 0 <= arc_index < SIZE:
        raise ValueError(f"arc index {arc_index!r} out of range [0, {SIZE - 1}]")
    alpha = float(arc_index)
    if arc_index < SIZE // 2:
        return alpha, (0.0, 180.0)
    return alpha, (0.0, -180.0)


def angles_to_arc(alpha_deg: float, beta_half: int) -> int:
    """Inverse of :func:`arc_to_angles`: ``beta_half`` is +1 or -1."""
    c = int(round(alpha_deg))
    if not 0 <= c < SIZE:
        raise ValueError(f"alpha {alpha_deg} out of range")
    expected = 1 if c < SIZE // 2 else -1
    if beta_half != expected:
        raise ValueError(f"alpha={c} is stored with beta half {expected:+d}")
    return c


def paired_arc(arc_index: int) -> int:
    """Column of the other half of the same latitude (alpha2 = 180 - alpha1)."""
    alpha, _ = arc_to_angles(arc_index)
    return int(SIZE - alpha) % SIZE


def _pixels(image) -> np.ndarray:
    return image.pixels if isinstance(image, ArsImage) else np.asarray(image)


def extract_arcs(image, arcs: ArcSet) -> np.ndarray:
    """Concatenate the selected columns: arc order, rows ascending."""
    px = _pixels(image)
    return np.ascontiguousarray(px[:, arcs.as_array()].T).ravel()


def apply_mask(image, mask: PointMask) -> np.ndarray:
    """Values at sampled positions in row-major order (not zero-filled)."""
    if mask.count == 0:
        raise ValueError("empty mask: nothing to sample")
    return _pixels(image)[mask.mask]


def columns_first(stack: np.ndarray, dtype=None) -> np.ndarray:
    """Contiguous (N, column, row) copy of an (N, 180, 180) stack."""
    return np.ascontiguousarray(np.asarray(stack).transpose(0, 2, 1), dtype=dtype)


def sample_stack(stack: np.ndarray, sampling, *, transposed: bool = False) -> np.ndarray:
    """Sample an (N, 180, 180) stack into an (N, M) matrix.

    ``sampling`` is an ArcSet, a PointMask, or None for the whole image.
    Values come out column by column (the arc concatenation order) for every
    kind of sampling, so an ArcSet and its equivalent mask give identical
    rows.  Pass ``transposed=True`` for a stack from :func:`columns_first`.
    """
    stack = np.asarray(stack)
    n = stack.shape[0]
    cf = stack if transposed else stack.transpose(0, 2, 1)
    if sampling is None:
        return cf.reshape(n, -1)
    if isinstance(sampling, ArcSet):
        return np.take(cf, sampling.as_array(), axis=1).reshape(n, -1)
    if isinstance(sampling, PointMask):
        if sampling.count == 0:
            raise ValueError("empty mask: nothing to sample")
        return np.take(cf.reshape(n, -1), np.flatnonzero(sampling.mask.T), axis=1)
    raise TypeError(f"unsupported sampling spec {type(sampling).__name__}")
