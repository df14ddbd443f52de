from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from arcscan.pso import Particle, PsoConfig, discretize, optimize, step_velocity

from oracles import naive_velocity


def test_discretize_examples():
    assert discretize([12.4, 90.7], (0, 179)) == (12, 91)
    assert discretize([12.4, 12.6, 12.1], (0, 179)) == (11, 12, 13)
    assert discretize([-5.0, 200.0], (0, 179)) == (0, 179)
    assert discretize([0.5, 1.5], (0, 179)) == (1, 2)
    assert discretize([0.0, 0.0, 0.0], (0, 2)) == (0, 1, 2)
    with pytest.raises(ValueError):
        discretize([1.0, 2.0, 3.0], (0, 1))


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 50), st.integers(0, 30).flatmap(
    lambda w: st.tuples(st.just(w), st.lists(st.floats(-100, 200), min_size=1, max_size=w + 1))))
def test_discretize_properties(lo, wpos):
    width, pos = wpos
    out = discretize(pos, (lo, lo + width))
    assert len(out) == len(pos) == len(set(out))
    assert all(lo <= i <= lo + width for i in out) and list(out) == sorted(out)


def _particle(rng, d=5):
    return Particle(rng.uniform(0, 100, d), rng.normal(0, 5, d), rng.uniform(0, 100, d))


def test_velocity_fixed_point_and_inertia(rng):
    cfg = PsoConfig(dims=3, value_range=(0, 100))
    p = np.array([1.0, 2.0, 3.0])
    part = Particle(p, np.zeros(3), p.copy())
    np.testing.assert_array_equal(step_velocity(part, p, cfg, 0.3, 0.8), np.zeros(3))
    cfg1 = cfg.with_(inertia=1.0, cognitive=0.0, social=0.0)
    v0 = np.array([1.0, -2.0, 0.5])
    part = Particle(p, v0, p + 4)
    np.testing.assert_array_equal(step_velocity(part, p - 7, cfg1, 0.9, 0.9), v0)


def test_velocity_matches_scalar_oracle(rng):
    cfg = PsoConfig(dims=5, value_range=(0, 100), velocity_clamp=0.1)
    for _ in range(50):
        part = _particle(rng)
        g = rng.uniform(0, 100, 5)
        r1, r2 = rng.random(2)
        got = step_velocity(part, g, cfg, r1, r2)
        ref = naive_velocity(part.velocity, part.position, part.pbest_position, g, cfg.inertia, cfg.cognitive,
                             cfg.social, r1, r2, cfg.velocity_clamp * cfg.width)
        np.testing.assert_allclose(got, ref, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("kw", [dict(swarm_size=1), dict(iterations=0), dict(inertia=-0.1), dict(dims=0),
                                dict(dims=5, value_range=(0, 3)), dict(velocity_clamp=0.0)])
def test_config_invariants(kw):
    base = dict(dims=2, value_range=(0, 10))
    base.update(kw)
    with pytest.raises(ValueError):
        PsoConfig(**base)


def test_constant_fitness():
    res = optimize(PsoConfig(dims=2, value_range=(0, 20), iterations=5), lambda idx: 0.7)
    assert res.gbest_fitness == 0.7 and res.fitness_history == [0.7] * 5
    assert res.evaluations == 5 * 30


def test_finds_analytic_optimum():
    hits = 0
    for seed in range(10):
        res = optimize(PsoConfig(dims=1, value_range=(0, 179), seed=seed), lambda idx: -float((idx[0] - 42) ** 2))
        hits += res.gbest_position == (42,)
    assert hits >= 9


def test_monotone_traces_and_budget():
    seen = []

    def fitness(idx):
        seen.append(idx)
        return float(np.sin(np.sum(idx)) + np.cos(idx[0] * 0.3))

    res = optimize(PsoConfig(dims=3, value_range=(0, 40), seed=3, iterations=40), fitness)
    assert np.all(np.diff(res.fitness_history) >= 0)
    assert all(len(set(s)) == 3 and min(s) >= 0 and max(s) <= 40 for s in seen)
    assert fitness(res.gbest_position) == res.gbest_fitness


def test_geometric_velocity_decay():
    cfg = PsoConfig(dims=3, value_range=(0, 100), swarm_size=4, iterations=12, cognitive=0.0, social=0.0,
                    seed=2, init_velocity=0.05)
    norms = np.array(optimize(cfg, lambda idx: 0.0, record_velocities=True).velocity_norms)
    expected = norms[0] * 0.5 ** np.arange(12)[:, None]
    np.testing.assert_array_equal(norms, expected)


def test_determinism_and_executor():
    cfg = PsoConfig(dims=4, value_range=(0, 60), seed=11, iterations=15)

    def fitness(idx):
        return -float(np.var(idx))

    a = optimize(cfg, fitness)
    b = optimize(cfg, fitness)
    with ThreadPoolExecutor(4) as ex:
        c = optimize(cfg, fitness, executor=ex)
    assert a.gbest_position == b.gbest_position == c.gbest_position
    assert a.fitness_history == b.fitness_history == c.fitness_history


def test_fitness_failure_has_context():
    def bad(idx):
        raise ZeroDivisionError("boom")

    with pytest.raises(RuntimeError, match="indices"):
        optimize(PsoConfig(dims=1, value_range=(0, 5)), bad)
