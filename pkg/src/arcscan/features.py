"""Statistical descriptors of sampled ARS intensities and recursive feature
elimination driven by LDA feature importance.

All features are statistics of the multiset of sampled values, so they do not
depend on the order in which pixels were gathered.  Percentiles use linear
interpolation between order statistics at rank ``p/100 * (M - 1)``; variance
and standard deviation use the population (1/M) convention.
"""
from __future__ import annotations

import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import sample_stack

DEFAULT_FEATURES = (
    "MEAN", "STD", "VAR", "MIN", "MEDIAN", "P25", "P10", "MAD", "RMS", "ENERGY", "RANGE",
)

# Extra candidates for the 30-feature elimination experiment.
EXTENDED_FEATURES = (
    "MAX", "P75", "P90", "SKEWNESS", "KURTOSIS", "IQR", "P5", "P95", "P1", "P99",
    "MEDIAN_AD", "MEAN_ABS", "CV", "ENTROPY", "LOG_ENERGY", "TRIMMED_MEAN",
    "P40", "P60", "P80",
)

CANDIDATE_POOL = DEFAULT_FEATURES + EXTENDED_FEATURES

ENTROPY_BINS = 32


_scratch = threading.local()


def _buffer(slot: str, shape, dtype=np.float64) -> np.ndarray:
    """Per-thread reusable work array (avoids page-faulting a fresh
    temporary on every call in tight optimization loops)."""
    bufs = getattr(_scratch, "bufs", None)
    if bufs is None:
        bufs = _scratch.bufs = {}
    b = bufs.get(slot)
    if b is None or b.shape != shape or b.dtype != dtype:
        b = bufs[slot] = np.empty(shape, dtype=dtype)
    return b


class _Batch:
    """Per-row statistics of an (n, M) value matrix, computed lazily and shared
    between features.

    ``values`` may be float32 (sorted in single precision, which is exact for
    order statistics); every sum is accumulated in float64.  Intermediate
    arrays live in per-thread scratch buffers, so a batch must not outlive the
    next batch created on the same thread.
    """

    def __init__(self, values: np.ndarray):
        self.x = values
        self.m = values.shape[1]
        self._cache = {}

    def _get(self, key, fn):
        if key not in self._cache:
            self._cache[key] = fn()
        return self._cache[key]

    @property
    def x64(self):
        """The values in double precision (a scratch copy for float32 input)."""
        def compute():
            if self.x.dtype == np.float64:
                return self.x
            buf = _buffer("x64", self.x.shape)
            np.copyto(buf, self.x)
            return buf
        return self._get("x64", compute)

    @property
    def sorted(self):
        return self._get("sorted", lambda: np.sort(self.x, axis=1))

    @property
    def mean(self):
        return self._get("mean", lambda: self.x64.sum(axis=1) / self.m)

    @property
    def centered(self):
        return self._get("centered", lambda: np.subtract(self.x64, self.mean[:, None],
                                                         out=_buffer("centered", self.x.shape)))

    @property
    def var(self):
        return self._get("var", lambda: np.einsum("ij,ij->i", self.centered, self.centered) / self.m)

    @property
    def mad(self):
        def compute():
            if self.x.dtype == np.float32 and "centered" not in self._cache:
                # single-precision deviations, double-precision accumulation
                work = np.subtract(self.x, self.mean.astype(np.float32)[:, None],
                                   out=_buffer("abs32", self.x.shape, np.float32))
                np.abs(work, out=work)
                return work.sum(axis=1, dtype=np.float64) / self.m
            work = np.abs(self.centered, out=_buffer("abs", self.x.shape))
            return work.sum(axis=1) / self.m
        return self._get("mad", compute)

    @property
    def energy(self):
        # sum (c + mu)^2 = sum c^2 + m mu^2: no cancellation, float64 throughout
        return self._get("energy", lambda: self.m * (self.var + self.mean ** 2))

    def order_stat(self, i: int) -> np.ndarray:
        return self.sorted[:, i].astype(np.float64)

    def percentile(self, p: float) -> np.ndarray:
        def compute():
            rank = p / 100.0 * (self.m - 1)
            lo = int(np.floor(rank))
            hi = min(lo + 1, self.m - 1)
            frac = rank - lo
            low = self.order_stat(lo)
            if frac == 0.0:
                return low
            return low + frac * (self.order_stat(hi) - low)

        return self._get(("p", p), compute)

    def central_moment(self, order: int) -> np.ndarray:
        return self._get(("cm", order), lambda: np.mean(self.centered ** order, axis=1))


def _safe_div(num, den):
    out = np.zeros_like(num)
    ok = den != 0
    out[ok] = num[ok] / den[ok]
    return out


def _skewness(b: _Batch):
    return _safe_div(b.central_moment(3), b.var ** 1.5)


def _kurtosis(b: _Batch):
    v2 = b.var ** 2
    k = _safe_div(b.central_moment(4), v2)
    return np.where(v2 != 0, k - 3.0, 0.0)


def _entropy(b: _Batch):
    lo = b.order_stat(0)[:, None]
    width = b.order_stat(-1)[:, None] - lo
    scaled = _safe_div(b.x - lo, np.broadcast_to(width, b.x.shape))
    bins = np.minimum((scaled * ENTROPY_BINS).astype(np.int64), ENTROPY_BINS - 1)
    offsets = np.arange(b.x.shape[0])[:, None] * ENTROPY_BINS
    counts = np.bincount((bins + offsets).ravel(), minlength=b.x.shape[0] * ENTROPY_BINS)
    p = counts.reshape(-1, ENTROPY_BINS) / b.m
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, -p * np.log2(p), 0.0)
    return terms.sum(axis=1)


def _trimmed_mean(b: _Batch, cut: float = 0.1):
    k = int(np.floor(cut * b.m))
    return b.sorted[:, k: b.m - k].mean(axis=1, dtype=np.float64)


FEATURES: dict[str, Callable[[_Batch], np.ndarray]] = {
    "MEAN": lambda b: b.mean,
    "STD": lambda b: np.sqrt(b.var),
    "VAR": lambda b: b.var,
    "MIN": lambda b: b.order_stat(0),
    "MEDIAN": lambda b: b.percentile(50),
    "P25": lambda b: b.percentile(25),
    "P10": lambda b: b.percentile(10),
    "MAD": lambda b: b.mad,
    "RMS": lambda b: np.sqrt(b.energy / b.m),
    "ENERGY": lambda b: b.energy,
    "RANGE": lambda b: b.order_stat(-1) - b.order_stat(0),
    "MAX": lambda b: b.order_stat(-1),
    "P75": lambda b: b.percentile(75),
    "P90": lambda b: b.percentile(90),
    "SKEWNESS": _skewness,
    "KURTOSIS": _kurtosis,
    "IQR": lambda b: b.percentile(75) - b.percentile(25),
    "P5": lambda b: b.percentile(5),
    "P95": lambda b: b.percentile(95),
    "P1": lambda b: b.percentile(1),
    "P99": lambda b: b.percentile(99),
    "MEDIAN_AD": lambda b: np.median(np.abs(b.x - b.percentile(50)[:, None]), axis=1),
    "MEAN_ABS": lambda b: np.abs(b.x64).sum(axis=1) / b.m,
    "CV": lambda b: _safe_div(np.sqrt(b.var), np.abs(b.mean)),
    "ENTROPY": _entropy,
    "LOG_ENERGY": lambda b: np.log1p(b.energy),
    "TRIMMED_MEAN": _trimmed_mean,
    "P40": lambda b: b.percentile(40),
    "P60": lambda b: b.percentile(60),
    "P80": lambda b: b.percentile(80),
}


def _check_ids(ids: Sequence[str]) -> tuple[str, ...]:
    ids = tuple(ids)
    unknown = [i for i in ids if i not in FEATURES]
    if unknown:
        raise KeyError(f"unknown feature(s): {', '.join(unknown)}")
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate feature ids")
    return ids


def extract_values(values: np.ndarray, ids: Sequence[str] = DEFAULT_FEATURES) -> np.ndarray:
    """Features of each row of an (n, M) matrix -> (n, d)."""
    ids = _check_ids(ids)
    x = np.asarray(values)
    if x.dtype != np.float32:
        x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[1] == 0:
        raise ValueError("cannot extract features from an empty sample")
    b = _Batch(x)
    out = np.empty((x.shape[0], len(ids)))
    for j, name in enumerate(ids):
        out[:, j] = FEATURES[name](b)
    return out


_ORDER_FREE = {"MEAN", "STD", "VAR", "MAD", "RMS", "ENERGY", "CV", "LOG_ENERGY", "MEAN_ABS"}


@dataclass(frozen=True)
class ColumnSummary:
    """Per-image, per-column sums of a columns-first (n, C, R) stack.

    The mean and variance of any union of whole columns follow from these
    exactly (pairwise combination of column means and squared deviations),
    so arc selections need no pass over the pixels for moments.
    """

    totals: np.ndarray  # (n, C) column sums
    m2: np.ndarray      # (n, C) squared deviations from the column mean
    rows: int

    @classmethod
    def of(cls, stack: np.ndarray, chunk: int = 64) -> "ColumnSummary":
        stack = np.asarray(stack)
        n, c, r = stack.shape
        totals = np.empty((n, c))
        m2 = np.empty((n, c))
        for lo in range(0, n, chunk):
            x = stack[lo:lo + chunk].astype(np.float64)
            totals[lo:lo + chunk] = x.sum(axis=2)
            x -= (totals[lo:lo + chunk] / r)[:, :, None]
            m2[lo:lo + chunk] = np.einsum("ijk,ijk->ij", x, x)
        return cls(totals, m2, r)

    def moments(self, cols: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Mean and population variance over the union of ``cols``."""
        t = self.totals[:, cols]
        m = self.rows * len(cols)
        mean = t.sum(axis=1) / m
        spread = t / self.rows - mean[:, None]
        m2 = self.m2[:, cols].sum(axis=1) + self.rows * np.einsum("ij,ij->i", spread, spread)
        return mean, m2 / m


def extract_columns(stack: np.ndarray, summary: ColumnSummary, cols,
                    ids: Sequence[str] = DEFAULT_FEATURES) -> np.ndarray:
    """Features over the union of whole columns of a columns-first stack.

    Matches ``extract_values(sample_stack(..., transposed=True))`` up to
    rounding.  The gathered block is sorted in place, since every feature is
    invariant to the order of the values.
    """
    ids = _check_ids(ids)
    cols = np.asarray(cols, dtype=np.intp)
    if cols.size == 0:
        raise ValueError("cannot extract features from an empty sample")
    n = stack.shape[0]
    v = np.take(stack, cols, axis=1).reshape(n, -1)
    b = _Batch(v)
    if not set(ids) <= _ORDER_FREE:
        v.sort(axis=1)
        b._cache["sorted"] = v
    b._cache["mean"], b._cache["var"] = summary.moments(cols)
    out = np.empty((n, len(ids)))
    for j, name in enumerate(ids):
        out[:, j] = FEATURES[name](b)
    return out


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    ids: tuple[str, ...]
    source_id: int | None = None

    def __getitem__(self, name: str) -> float:
        return float(self.values[self.ids.index(name)])

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.ids, map(float, self.values)))


def extract(values, ids: Sequence[str] = DEFAULT_FEATURES, source_id: int | None = None) -> FeatureVector:
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise ValueError("cannot extract features from an empty sample")
    return FeatureVector(extract_values(v[None, :], ids)[0], tuple(ids), source_id)


@dataclass
class FeatureMatrix:
    values: np.ndarray
    labels: np.ndarray
    feature_ids: tuple[str, ...] | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.feature_ids is None:
            # unnamed columns: default features when the width matches, else f0, f1, ...
            d = self.values.shape[-1] if self.values.ndim == 2 else 0
            self.feature_ids = DEFAULT_FEATURES if d == len(DEFAULT_FEATURES) else tuple(f"f{j}" for j in range(d))
        self.feature_ids = tuple(self.feature_ids)
        if self.values.ndim != 2:
            raise ValueError("feature matrix must be 2-D")
        if self.values.shape[0] != self.labels.shape[0]:
            raise ValueError("row count and label count differ")
        if self.values.shape[1] != len(self.feature_ids):
            raise ValueError("column count and feature id count differ")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def rows(self, idx) -> "FeatureMatrix":
        return FeatureMatrix(self.values[idx], self.labels[idx], self.feature_ids)

    def select(self, ids: Sequence[str]) -> "FeatureMatrix":
        cols = [self.feature_ids.index(i) for i in ids]
        return FeatureMatrix(self.values[:, cols], self.labels, tuple(ids))

    def to_csv(self, path) -> None:
        from .io import write_csv
        write_csv(path, list(self.feature_ids) + ["label"],
                  ([repr(float(v)) for v in row] + [int(lab)] for row, lab in zip(self.values, self.labels)))


def extract_dataset(images: np.ndarray, labels, sampling=None, ids: Sequence[str] = DEFAULT_FEATURES,
                    workers: int = 1, chunk: int = 100) -> FeatureMatrix:
    """Feature matrix of an (N, 180, 180) stack under a sampling spec
    (ArcSet, PointMask or None for full images)."""
    images = np.asarray(images)
    if images.ndim == 2:
        images = images[None]
    n = images.shape[0]
    if n == 0:
        raise ValueError("empty dataset")
    ids = _check_ids(ids)
    starts = range(0, n, chunk)

    def block(s):
        return extract_values(sample_stack(images[s:s + chunk], sampling), ids)

    if workers > 1 and n > chunk:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(block, starts))
    else:
        parts = [block(s) for s in starts]
    return FeatureMatrix(np.vstack(parts), np.asarray(labels), ids)


def feature_costs(values: np.ndarray, ids: Sequence[str], repeats: int = 3) -> dict[str, float]:
    """Wall-clock seconds to compute each feature alone over ``values``
    (best of ``repeats``).  Shared work (sorting, centering) is charged to
    every feature that needs it."""
    x = np.asarray(values, dtype=np.float64)
    out = {}
    for name in _check_ids(ids):
        best = np.inf
        for _ in range(repeats):
            t0 = time.perf_counter()
            FEATURES[name](_Batch(x))
            best = min(best, time.perf_counter() - t0)
        out[name] = best
    return out


@dataclass
class RfeStep:
    step: int
    active: tuple[str, ...]
    accuracy: float
    extraction_seconds: float
    removed: str | None = None


def rfe(matrix: FeatureMatrix, min_features: int, split_seed: int = 0, *,
        train_fraction: float = 0.8, ridge: float = 1e-6,
        costs: dict[str, float] | None = None) -> list[RfeStep]:
    """Recursive feature elimination with LDA importance.

    Each step fits LDA on a fixed stratified training split, records the
    held-out accuracy, then drops the single feature with the lowest
    importance (ties: the later feature in the active list).  Step ``t`` has
    ``d - t`` active features; ``removed`` names the feature dropped after
    that step.  ``extraction_seconds`` sums ``costs`` over the active set.
    """
    from .lda import LdaError, accuracy, fit
    from .pipeline import stratified_split

    if matrix.d < min_features or min_features < 1:
        raise ValueError(f"cannot reduce {matrix.d} features to {min_features}")
    if np.unique(matrix.labels).size < 2:
        raise ValueError("RFE needs at least two classes")
    rng = np.random.default_rng(split_seed)
    train_idx, test_idx = stratified_split(matrix.labels, (train_fraction, 1 - train_fraction), rng)
    if np.all(np.ptp(matrix.values[train_idx], axis=0) == 0):
        raise LdaError("degenerate feature matrix: every feature is constant")

    active = list(matrix.feature_ids)
    trace: list[RfeStep] = []
    step = 0
    while True:
        sub = matrix.select(active)
        model = fit(sub.rows(train_idx), ridge=ridge)
        acc = accuracy(model, sub.rows(test_idx))
        secs = sum(costs[a] for a in active) if costs else float("nan")
        trace.append(RfeStep(step, tuple(active), acc, secs))
        if len(active) <= min_features:
            break
        phi = model.feature_importance
        worst = len(phi) - 1 - int(np.argmin(phi[::-1]))
        trace[-1].removed = active.pop(worst)
        step += 1
    return trace
