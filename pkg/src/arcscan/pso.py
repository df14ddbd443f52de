"""Particle swarm optimization over discrete index sets.

Particles move in a continuous box; each evaluation rounds a copy of the
position to a set of distinct integer indices.  Defaults follow the
experimental setup: w=0.5, c1=1, c2=3, 80 iterations.
"""
from __future__ import annotations

from concurrent.futures import Executor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np


@dataclass(frozen=True)
class PsoConfig:
    dims: int
    value_range: tuple[int, int]        # inclusive
    swarm_size: int = 30
    iterations: int = 80
    inertia: float = 0.5
    cognitive: float = 1.0
    social: float = 3.0
    seed: int = 0
    velocity_clamp: float = 0.25        # fraction of the range width
    init_velocity: float = 0.0          # initial |v| bound, fraction of the range width

    def __post_init__(self):
        lo, hi = self.value_range
        if self.swarm_size < 2:
            raise ValueError("swarm_size must be >= 2")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if min(self.inertia, self.cognitive, self.social) < 0:
            raise ValueError("w, c1, c2 must be non-negative")
        if self.dims < 1:
            raise ValueError("dims must be >= 1")
        if hi < lo:
            raise ValueError(f"empty value range {self.value_range}")
        if self.dims > hi - lo + 1:
            raise ValueError(f"cannot place {self.dims} distinct indices in {self.value_range}")
        if self.velocity_clamp <= 0:
            raise ValueError("velocity_clamp must be positive")

    @property
    def width(self) -> float:
        lo, hi = self.value_range
        return float(hi - lo)

    def with_(self, **kw) -> "PsoConfig":
        return replace(self, **kw)


@dataclass
class Particle:
    position: np.ndarray
    velocity: np.ndarray
    pbest_position: np.ndarray
    pbest_fitness: float = -np.inf


@dataclass
class SwarmResult:
    gbest_position: tuple[int, ...]
    gbest_fitness: float
    fitness_history: list[float]
    evaluations: int = 0
    velocity_norms: list[np.ndarray] = field(default_factory=list, repr=False)


def step_velocity(particle: Particle, gbest: np.ndarray, cfg: PsoConfig, r1: float, r2: float) -> np.ndarray:
    """v <- w v + c1 r1 (pbest - p) + c2 r2 (gbest - p), clamped per component."""
    p = particle.position
    v = (cfg.inertia * particle.velocity
         + cfg.cognitive * r1 * (particle.pbest_position - p)
         + cfg.social * r2 * (gbest - p))
    vmax = cfg.velocity_clamp * cfg.width
    return np.clip(v, -vmax, vmax)


def discretize(position: Sequence[float], value_range: tuple[int, int], dims: int | None = None) -> tuple[int, ...]:
    """Round to the nearest integer (halves up), clamp into range, and move
    duplicates to the nearest unused index (ties toward the lower index).
    Coordinates are resolved in order.  Returns a sorted tuple."""
    lo, hi = value_range
    pos = np.asarray(position, dtype=np.float64)
    dims = pos.size if dims is None else dims
    if pos.size != dims:
        raise ValueError(f"position has {pos.size} coordinates, expected {dims}")
    if dims > hi - lo + 1:
        raise ValueError(f"cannot place {dims} distinct indices in [{lo}, {hi}]")
    idx = np.clip(np.floor(pos + 0.5), lo, hi).astype(np.int64)
    if np.unique(idx).size == dims:
        return tuple(int(i) for i in np.sort(idx))
    used = set()
    out = []
    for i in idx.tolist():
        if i in used:
            for step in range(1, hi - lo + 1):
                if i - step >= lo and i - step not in used:
                    i -= step
                    break
                if i + step <= hi and i + step not in used:
                    i += step
                    break
        used.add(i)
        out.append(i)
    return tuple(sorted(out))


def optimize(cfg: PsoConfig, fitness: Callable[[tuple[int, ...]], float], *,
             executor: Executor | None = None, record_velocities: bool = False) -> SwarmResult:
    """Maximize ``fitness`` over sets of ``cfg.dims`` distinct indices.

    Per iteration every particle is evaluated first, then personal and global
    bests are updated in particle order (strict improvement only), then
    velocities and positions move.  Evaluations may run on ``executor``;
    results do not depend on scheduling.
    """
    rng = np.random.default_rng(cfg.seed)
    lo, hi = cfg.value_range
    k, d = cfg.swarm_size, cfg.dims
    pos = rng.uniform(lo, hi, size=(k, d))
    if cfg.init_velocity > 0:
        a = cfg.init_velocity * cfg.width
        vel = rng.uniform(-a, a, size=(k, d))
    else:
        vel = np.zeros((k, d))
    swarm = [Particle(pos[i].copy(), vel[i].copy(), pos[i].copy()) for i in range(k)]
    gbest_pos = swarm[0].position.copy()
    gbest_fit = -np.inf
    gbest_idx: tuple[int, ...] = discretize(gbest_pos, cfg.value_range, d)
    history: list[float] = []
    norms: list[np.ndarray] = []
    evaluations = 0

    def evaluate(idx):
        try:
            return float(fitness(idx))
        except Exception as exc:
            raise RuntimeError(f"fitness evaluation failed for indices {idx}") from exc

    for _ in range(cfg.iterations):
        if record_velocities:
            norms.append(np.array([np.linalg.norm(p.velocity) for p in swarm]))
        candidates = [discretize(p.position, cfg.value_range, d) for p in swarm]
        if executor is not None:
            scores = list(executor.map(evaluate, candidates))
        else:
            scores = [evaluate(c) for c in candidates]
        evaluations += len(candidates)
        for p, idx, s in zip(swarm, candidates, scores):
            if s > p.pbest_fitness:
                p.pbest_fitness = s
                p.pbest_position = p.position.copy()
            if s > gbest_fit:
                gbest_fit = s
                gbest_pos = p.position.copy()
                gbest_idx = idx
        history.append(gbest_fit)
        for p in swarm:
            r1, r2 = rng.random(2)
            p.velocity = step_velocity(p, gbest_pos, cfg, r1, r2)
            p.position = np.clip(p.position + p.velocity, lo, hi)

    return SwarmResult(gbest_idx, gbest_fit, history, evaluations, norms)
