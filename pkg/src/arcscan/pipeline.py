"""Compressed-learning experiments: full-data baseline, PSO arc selection,
intra-arc point subsampling, raw 2-D point sampling, sweeps and heatmaps.

Every repetition draws its own noise realisation and a stratified three-way
split (PSO train / PSO validation / final evaluation).  PSO fitness is the
validation accuracy of an LDA fitted on the PSO-train part; the reported
accuracy comes from an LDA refitted on train+validation and scored on the
evaluation part, which no fitness call ever sees.
"""
from __future__ import annotations

import logging
import time
from concurrent.futures import Executor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import pso
from .core import N_PIXELS, SIZE, ArcSet, PointMask, columns_first, sample_stack
from .datagen import NoiseSpec, apply_noise
from .features import DEFAULT_FEATURES, ColumnSummary, FeatureMatrix, extract_columns, extract_values
from .lda import accuracy, fit

log = logging.getLogger(__name__)

MODES = ("full", "latitude", "intra_latitude", "point2d")


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str = "dataset.arsd"
    sampling_mode: str = "latitude"
    arc_budget: int = 4
    intra_rate: float = 1.0
    point_budget: int = 324
    noise: NoiseSpec = NoiseSpec()
    split: tuple[float, float, float] = (0.6, 0.2, 0.2)
    repetitions: int = 10
    seed: int = 0
    swarm_size: int = 30
    iterations: int = 80
    point2d_iterations: int = 1000
    inertia: float = 0.5
    cognitive: float = 1.0
    social: float = 3.0
    velocity_clamp: float = 0.25
    ridge: float = 1e-6
    features: tuple[str, ...] = DEFAULT_FEATURES

    def __post_init__(self):
        if self.sampling_mode not in MODES:
            raise ValueError(f"sampling_mode must be one of {MODES}")
        if not 1 <= self.arc_budget <= SIZE:
            raise ValueError("arc_budget must be in [1, 180]")
        if not 0 < self.intra_rate <= 1:
            raise ValueError("intra_rate must be in (0, 1]")
        if not 1 <= self.point_budget <= N_PIXELS:
            raise ValueError(f"point_budget must be in [1, {N_PIXELS}]")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if len(self.split) != 3 or min(self.split) <= 0 or abs(sum(self.split) - 1) > 1e-9:
            raise ValueError("split must be three positive shares summing to 1")

    @property
    def split_fraction(self) -> float:
        """Share of data used for fitting the reported model."""
        return self.split[0] + self.split[1]

    def pso_config(self, dims: int, value_range: tuple[int, int], seed: int, iterations: int | None = None):
        return pso.PsoConfig(
            dims=dims, value_range=value_range, swarm_size=self.swarm_size,
            iterations=self.iterations if iterations is None else iterations,
            inertia=self.inertia, cognitive=self.cognitive, social=self.social,
            seed=seed, velocity_clamp=self.velocity_clamp,
        )

    def with_(self, **kw) -> "ExperimentConfig":
        return replace(self, **kw)


@dataclass
class RunReport:
    mode: str
    accuracies: list[float]
    selections: list                    # ArcSet or PointMask per repetition
    sampled_points: int
    wall_time: float
    k: int = 0
    intra_rate: float = 1.0
    noise: str = "clean"
    fitness: list[float] = field(default_factory=list)
    seconds: list[float] = field(default_factory=list)

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean(self.accuracies))

    def rows(self):
        """CSV rows: mode, k, intra_rate, noise, repetition, accuracy, points, seconds."""
        for rep, acc in enumerate(self.accuracies):
            secs = self.seconds[rep] if rep < len(self.seconds) else 0.0
            yield [self.mode, self.k, f"{self.intra_rate:g}", self.noise, rep,
                   f"{acc:.6f}", self.sampled_points, f"{secs:.3f}"]


REPORT_HEADER = ["mode", "k", "intra_rate", "noise", "repetition", "accuracy", "points", "seconds"]


def stratified_split(labels: np.ndarray, shares: Sequence[float], rng: np.random.Generator) -> list[np.ndarray]:
    """Split indices into parts with the given shares inside every class.

    Part sizes per class are ``round(cumulative share * n_c)`` differences, so
    every index lands in exactly one part.  Each part is sorted.
    """
    labels = np.asarray(labels)
    cum = np.cumsum(shares)
    parts: list[list[np.ndarray]] = [[] for _ in shares]
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        idx = idx[rng.permutation(idx.size)]
        bounds = [0] + [int(round(s * idx.size)) for s in cum[:-1]] + [idx.size]
        for j in range(len(shares)):
            parts[j].append(idx[bounds[j]:bounds[j + 1]])
    return [np.sort(np.concatenate(p)) for p in parts]


def repetition_seeds(seed: int, rep: int) -> dict[str, np.random.SeedSequence]:
    """Independent, reproducible streams for one repetition."""
    root = np.random.SeedSequence([int(seed), int(rep)])
    noise, split, swarm, swarm2, extra = root.spawn(5)
    return {"noise": noise, "split": split, "pso": swarm, "pso2": swarm2, "extra": extra}


def _int_seed(ss: np.random.SeedSequence) -> int:
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _whole_columns(sampling):
    """Column indices when ``sampling`` covers whole columns only, else None.

    Arc sets, full images and column-shaped masks all take the same route,
    so equivalent samplings give identical features."""
    if sampling is None:
        return np.arange(SIZE)
    if isinstance(sampling, ArcSet):
        return sampling.as_array()
    if isinstance(sampling, PointMask):
        per_col = sampling.mask.sum(axis=0)
        if per_col.any() and np.all((per_col == 0) | (per_col == SIZE)):
            return np.flatnonzero(per_col)
    return None


class Repetition:
    """Noisy data, split and cached evaluators for one repetition."""

    def __init__(self, images: np.ndarray, labels: np.ndarray, cfg: ExperimentConfig, rep: int):
        self.cfg = cfg
        self.rep = rep
        self.seeds = repetition_seeds(cfg.seed, rep)
        self.images = apply_noise(images, cfg.noise, _int_seed(self.seeds["noise"]))
        self.labels = np.asarray(labels)
        rng = np.random.default_rng(self.seeds["split"])
        self.train, self.val, self.test = stratified_split(self.labels, cfg.split, rng)
        self.fit_rows = np.sort(np.concatenate([self.train, self.val]))
        self._search_rows = np.concatenate([self.train, self.val])
        self._n_train = self.train.size
        # single precision matches the ARSD storage format and halves sort time
        self._stacks = {part: columns_first(self.images[rows], np.float32) for part, rows in
                        (("search", self._search_rows), ("fit", self.fit_rows), ("test", self.test))}
        self._summaries: dict = {}
        self._cache: dict = {}
        self.cache_hits = 0

    def _features(self, part: str, sampling) -> np.ndarray:
        cols = _whole_columns(sampling)
        stack = self._stacks[part]
        if cols is None:
            return extract_values(sample_stack(stack, sampling, transposed=True), self.cfg.features)
        if part not in self._summaries:
            self._summaries[part] = ColumnSummary.of(stack)
        return extract_columns(stack, self._summaries[part], cols, self.cfg.features)

    def fitness(self, sampling, key=None) -> float:
        """Validation accuracy of an LDA fitted on the PSO-train part."""
        if key is not None and key in self._cache:
            self.cache_hits += 1
            return self._cache[key]
        f = self._features("search", sampling)
        y = self.labels[self._search_rows]
        n = self._n_train
        model = fit(FeatureMatrix(f[:n], y[:n], self.cfg.features), self.cfg.ridge)
        acc = accuracy(model, FeatureMatrix(f[n:], y[n:], self.cfg.features))
        if key is not None:
            self._cache[key] = acc
        return acc

    def evaluate(self, sampling) -> float:
        """Held-out accuracy: fit on train+validation, score on the evaluation part."""
        y = self.labels
        ftr = self._features("fit", sampling)
        fte = self._features("test", sampling)
        model = fit(FeatureMatrix(ftr, y[self.fit_rows], self.cfg.features), self.cfg.ridge)
        return accuracy(model, FeatureMatrix(fte, y[self.test], self.cfg.features))


def load_images(cfg: ExperimentConfig):
    from .io import read_arsd
    ds = read_arsd(cfg.dataset)
    return ds.images, ds.labels


def _report(mode, cfg, k, rate, points, reps_out, t0):
    accs, sels, fits, secs = zip(*reps_out) if reps_out else ((), (), (), ())
    return RunReport(mode, list(accs), list(sels), points, time.perf_counter() - t0,
                     k=k, intra_rate=rate, noise=cfg.noise.tag, fitness=list(fits), seconds=list(secs))


def run_full_baseline(cfg: ExperimentConfig, images=None, labels=None) -> RunReport:
    """LDA on features of whole images, averaged over repetitions."""
    if images is None:
        images, labels = load_images(cfg)
    t0 = time.perf_counter()
    out = []
    for rep in range(cfg.repetitions):
        t = time.perf_counter()
        r = Repetition(images, labels, cfg, rep)
        out.append((r.evaluate(None), PointMask.full(), float("nan"), time.perf_counter() - t))
    return _report("full", cfg, SIZE, 1.0, N_PIXELS, out, t0)


def _search_arcs(r: Repetition, cfg: ExperimentConfig, k: int, executor=None):
    if k == SIZE:
        arcs = ArcSet(range(SIZE))
        return arcs, r.fitness(arcs, arcs.indices)

    def fitness(idx):
        return r.fitness(ArcSet(idx), idx)

    pcfg = cfg.pso_config(k, (0, SIZE - 1), _int_seed(r.seeds["pso"]))
    res = pso.optimize(pcfg, fitness, executor=executor)
    return ArcSet(res.gbest_position), res.gbest_fitness


def optimize_arcs(cfg: ExperimentConfig, images=None, labels=None, executor: Executor | None = None) -> RunReport:
    """PSO over sets of ``arc_budget`` latitudinal arcs, per repetition."""
    if images is None:
        images, labels = load_images(cfg)
    k = cfg.arc_budget
    t0 = time.perf_counter()
    out = []
    for rep in range(cfg.repetitions):
        t = time.perf_counter()
        r = Repetition(images, labels, cfg, rep)
        arcs, fit_acc = _search_arcs(r, cfg, k, executor)
        acc = r.evaluate(arcs)
        log.info("latitude k=%d rep=%d arcs=%s fitness=%.4f accuracy=%.4f", k, rep, arcs.indices, fit_acc, acc)
        out.append((acc, arcs, fit_acc, time.perf_counter() - t))
    return _report("latitude", cfg, k, 1.0, SIZE * k, out, t0)


def random_arcs(cfg: ExperimentConfig, images=None, labels=None) -> RunReport:
    """Baseline: a uniformly random ArcSet of size ``arc_budget`` per repetition."""
    if images is None:
        images, labels = load_images(cfg)
    k = cfg.arc_budget
    t0 = time.perf_counter()
    out = []
    for rep in range(cfg.repetitions):
        t = time.perf_counter()
        r = Repetition(images, labels, cfg, rep)
        rng = np.random.default_rng(r.seeds["extra"])
        arcs = ArcSet(rng.choice(SIZE, size=k, replace=False))
        out.append((r.evaluate(arcs), arcs, float("nan"), time.perf_counter() - t))
    return _report("random", cfg, k, 1.0, SIZE * k, out, t0)


def intra_budget(n_arcs: int, rate: float) -> int:
    return int(round(rate * SIZE * n_arcs))


def _search_intra(r: Repetition, cfg: ExperimentConfig, arcs: ArcSet, executor=None):
    width = SIZE * len(arcs)
    dims = intra_budget(len(arcs), cfg.intra_rate)
    if dims < 1:
        raise ValueError("intra-arc budget rounds to zero points")
    if dims > width:
        raise ValueError(f"budget of {dims} points exceeds the {width} available in {len(arcs)} arcs")
    if dims == width:
        mask = PointMask.from_arcs(arcs)
        return mask, r.fitness(mask, ("arcs",) + arcs.indices)

    def fitness(idx):
        return r.fitness(PointMask.from_arcs(arcs, idx), idx)

    pcfg = cfg.pso_config(dims, (0, width - 1), _int_seed(r.seeds["pso2"]))
    res = pso.optimize(pcfg, fitness, executor=executor)
    return PointMask.from_arcs(arcs, res.gbest_position), res.gbest_fitness


def optimize_intra(cfg: ExperimentConfig, arcs, images=None, labels=None,
                   executor: Executor | None = None) -> RunReport:
    """Second-stage PSO over points inside fixed arcs.

    ``arcs`` is one ArcSet for all repetitions or a list with one per
    repetition (e.g. the selections of an :func:`optimize_arcs` report).
    """
    if images is None:
        images, labels = load_images(cfg)
    per_rep = list(arcs) if not isinstance(arcs, ArcSet) else [arcs] * cfg.repetitions
    if len(per_rep) < cfg.repetitions:
        raise ValueError("need one ArcSet per repetition")
    n_arcs = len(per_rep[0])
    dims = intra_budget(n_arcs, cfg.intra_rate)
    if dims > SIZE * n_arcs:
        raise ValueError("budget exceeds available points")
    t0 = time.perf_counter()
    out = []
    for rep in range(cfg.repetitions):
        t = time.perf_counter()
        r = Repetition(images, labels, cfg, rep)
        mask, fit_acc = _search_intra(r, cfg, per_rep[rep], executor)
        out.append((r.evaluate(mask), mask, fit_acc, time.perf_counter() - t))
    return _report("intra_latitude", cfg, n_arcs, cfg.intra_rate, dims, out, t0)


def optimize_point2d(cfg: ExperimentConfig, images=None, labels=None,
                     executor: Executor | None = None) -> RunReport:
    """PSO directly over raw pixel indices in [0, 32399]."""
    if images is None:
        images, labels = load_images(cfg)
    budget = cfg.point_budget
    t0 = time.perf_counter()
    out = []
    for rep in range(cfg.repetitions):
        t = time.perf_counter()
        r = Repetition(images, labels, cfg, rep)
        if budget == N_PIXELS:
            mask = PointMask.full()
            fit_acc = r.fitness(mask, "full")
        else:
            def fitness(idx):
                return r.fitness(PointMask.from_flat_indices(idx), idx)

            pcfg = cfg.pso_config(budget, (0, N_PIXELS - 1), _int_seed(r.seeds["pso"]),
                                  iterations=cfg.point2d_iterations)
            res = pso.optimize(pcfg, fitness, executor=executor)
            mask = PointMask.from_flat_indices(res.gbest_position)
            fit_acc = res.gbest_fitness
        out.append((r.evaluate(mask), mask, fit_acc, time.perf_counter() - t))
    return _report("point2d", cfg, 0, budget / N_PIXELS, budget, out, t0)


@dataclass
class Heatmap:
    mode: str                  # "arc" or "pixel"
    counts: np.ndarray         # (180,) for arcs, (180, 180) for pixels

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def grid(self) -> np.ndarray:
        """180x180 view; arc counts are broadcast down each column."""
        if self.mode == "arc":
            return np.broadcast_to(self.counts[None, :], (SIZE, SIZE)).copy()
        return self.counts


def aggregate_heatmap(reports: Sequence[RunReport]) -> Heatmap:
    sels = [s for rep in reports for s in rep.selections]
    if not sels:
        raise ValueError("no selections to aggregate")
    kinds = {type(s) for s in sels}
    if len(kinds) != 1:
        raise ValueError("cannot mix arc and pixel selections in one heatmap")
    if isinstance(sels[0], ArcSet):
        counts = np.zeros(SIZE, dtype=np.int64)
        for s in sels:
            counts[s.as_array()] += 1
        return Heatmap("arc", counts)
    counts = np.zeros((SIZE, SIZE), dtype=np.int64)
    for s in sels:
        counts += s.mask
    return Heatmap("pixel", counts)


def accuracy_vs_arcs_sweep(cfg: ExperimentConfig, k_values: Sequence[int],
                           noises: Sequence[NoiseSpec] | None = None,
                           images=None, labels=None, executor=None) -> list[RunReport]:
    """optimize_arcs for every (noise, k) pair; noise conditions re-optimize."""
    if not k_values:
        return []
    if images is None:
        images, labels = load_images(cfg)
    noises = [cfg.noise] if noises is None else list(noises)
    out = []
    for nz in noises:
        for k in k_values:
            out.append(optimize_arcs(cfg.with_(noise=nz, arc_budget=int(k)), images, labels, executor))
    return out


def intra_grid(cfg: ExperimentConfig, k_values: Sequence[int], rates: Sequence[float],
               images=None, labels=None, executor=None) -> list[RunReport]:
    """Table-style grid: one latitude search per k, reused for every rate."""
    if images is None:
        images, labels = load_images(cfg)
    out = []
    for k in k_values:
        lat = optimize_arcs(cfg.with_(arc_budget=int(k)), images, labels, executor)
        for rate in rates:
            if rate == 1.0:
                out.append(replace(lat, mode="intra_latitude"))
                continue
            out.append(optimize_intra(cfg.with_(arc_budget=int(k), intra_rate=float(rate)),
                                      lat.selections, images, labels, executor))
    return out
