import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nnformation.config import load_config
from nnformation.dynamics import (BENCHMARK_VELOCITIES, BENCHMARK_ALPHA, BENCHMARK_BETA, BENCHMARK_POSITIONS, AgentState,
                                  BenchmarkParams, ConstantVelocity, LeaderState, Sinusoidal, agent_deriv,
                                  benchmark_drift, benchmark_f, hexagon_formation, leader_deriv)


@pytest.mark.parametrize("v, u, f, expected", [
    ((0, 0), (0, 0), (0, 0), ((0, 0), (0, 0))),
    ((1, 0), (0, 2), (0, 0), ((1, 0), (0, 2))),
    ((1, 1), (-1, 0), (0.5, 0), ((1, 1), (-0.5, 0))),
])
def test_agent_deriv(v, u, f, expected):
    dx, dv = agent_deriv(AgentState(np.zeros(2), np.array(v, float)), u, f)
    assert np.array_equal(dx, expected[0]) and np.array_equal(dv, expected[1])


def test_leader_constant_velocity():
    s = LeaderState(np.array([5.0, 5.0]), np.array([1.0, 0.0]))
    for t in (0.0, 3.7, 100.0):
        dx, dv = leader_deriv(s, t, ConstantVelocity())
        assert np.array_equal(dx, [1, 0]) and np.array_equal(dv, [0, 0])


def test_leader_sinusoidal_at_zero():
    s = LeaderState(np.zeros(2), np.array([0.5, 0.3]))
    dx, dv = leader_deriv(s, 0.0, Sinusoidal())
    assert np.array_equal(dx, [0.5, 0.3])
    assert np.allclose(dv, [0.1, 0.0])


def test_leader_rejects_negative_time():
    with pytest.raises(ValueError):
        leader_deriv(LeaderState(np.zeros(2), np.zeros(2)), -1.0, ConstantVelocity())


def test_benchmark_f_examples():
    p = BenchmarkParams.standard()
    assert np.allclose(benchmark_f(1, AgentState(np.zeros(2), np.zeros(2)), p), [0.5, 0.0])
    out = benchmark_f(3, AgentState(np.array([1.0, 0.0]), np.array([1.0, 1.0])), p)
    assert np.allclose(out, [1 - 0.2 * math.cos(1.0) ** 2, 1.0], rtol=0, atol=1e-15)
    flat = BenchmarkParams(np.zeros(2), np.zeros(2))
    assert np.array_equal(benchmark_f(2, AgentState(np.array([2.0, 3.0]), np.array([4.0, 5.0])), flat), [2, 5])


def test_benchmark_f_index_checks():
    p = BenchmarkParams.standard()
    with pytest.raises(IndexError):
        benchmark_f(0, AgentState(np.zeros(2), np.zeros(2)), p)
    with pytest.raises(IndexError):
        benchmark_f(17, AgentState(np.zeros(2), np.zeros(2)), p)


def test_benchmark_constants_shape():
    assert len(BENCHMARK_POSITIONS) == len(BENCHMARK_VELOCITIES) == len(BENCHMARK_ALPHA) == len(BENCHMARK_BETA) == 16
    assert BENCHMARK_POSITIONS[0] == (4, 6)
    assert BENCHMARK_ALPHA[0] == 0.5 and BENCHMARK_BETA[0] == 0.7
    assert BENCHMARK_ALPHA[2] == -0.2 and BENCHMARK_BETA[2] == -0.2
    assert all(0 <= c <= 10 for v in BENCHMARK_VELOCITIES for c in v)


def test_presets_use_benchmark_constants():
    for name in ("benchmark_s1", "benchmark_s2"):
        cfg = load_config(name)
        assert np.array_equal(cfg.agents.positions, BENCHMARK_POSITIONS)
        assert np.array_equal(cfg.agents.velocities, BENCHMARK_VELOCITIES)
        assert np.array_equal(cfg.agents.alpha, BENCHMARK_ALPHA)
        assert np.array_equal(cfg.agents.beta, BENCHMARK_BETA)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.1, 100.0))
def test_drift_bounded_on_bounded_sets(seed, scale):
    rng = np.random.default_rng(seed)
    p = BenchmarkParams.standard()
    x, v = rng.uniform(-scale, scale, (16, 2)), rng.uniform(-scale, scale, (16, 2))
    f = benchmark_drift(x, v, p)
    assert np.all(np.abs(f[:, 0]) <= np.abs(x[:, 0]) + np.abs(p.alpha) + 1e-12)
    assert np.all(np.abs(f[:, 1]) <= np.abs(v[:, 1]) + np.abs(p.beta) + 1e-12)
    for i in (0, 7, 15):
        assert np.allclose(f[i], benchmark_f(i + 1, AgentState(x[i], v[i]), p), rtol=1e-15)


def test_derivs_are_pure():
    s = AgentState(np.array([1.0, 2.0]), np.array([3.0, 4.0]))
    a = agent_deriv(s, [1.0, 1.0], [0.5, 0.5])
    a[0][0] = 99.0
    assert s.velocity[0] == 3.0
    assert np.array_equal(agent_deriv(s, [1.0, 1.0], [0.5, 0.5])[1], [1.5, 1.5])


def test_hexagon_six_vertices():
    pts = hexagon_formation(6, 2.0)
    k = np.arange(6)
    expected = 2.0 * np.stack([np.cos(k * np.pi / 3), np.sin(k * np.pi / 3)], axis=1)
    assert np.allclose(pts, expected, atol=1e-15)


def _arc_position(p, verts):
    """Perimeter distance from vertex 0, recovered from coordinates alone."""
    for e in range(6):
        a, b = verts[e], verts[e + 1]
        side = np.linalg.norm(b - a)
        t = np.dot(p - a, b - a) / side**2
        if -1e-12 <= t <= 1 + 1e-12 and np.linalg.norm(a + t * (b - a) - p) < 1e-12:
            return e * side + t * side
    raise AssertionError(f"{p} is not on the hexagon")


def test_hexagon_sixteen_equal_gaps():
    pts = hexagon_formation(16, 3.0)
    assert pts.shape == (16, 2)
    k = np.arange(7)
    verts = 3.0 * np.stack([np.cos(k * np.pi / 3), np.sin(k * np.pi / 3)], axis=1)
    arcs = np.array([_arc_position(p, verts) for p in pts])
    gaps = np.diff(np.append(arcs, arcs[0] + 18.0))
    assert np.allclose(gaps, 18 / 16, rtol=0, atol=1e-12)


@pytest.mark.parametrize("n", list(range(1, 25)))
def test_hexagon_centroid(n):
    assert np.abs(hexagon_formation(n, 3.0).mean(axis=0)).max() <= 1e-12


@pytest.mark.parametrize("n", [6, 12, 18])
def test_hexagon_relabel_rotation(n):
    # shifting the start index by n/6 rotates the set by 60 degrees
    pts = hexagon_formation(n, 1.0)
    c, s = math.cos(math.pi / 3), math.sin(math.pi / 3)
    rot = pts @ np.array([[c, s], [-s, c]])
    assert np.allclose(np.roll(pts, -n // 6, axis=0), rot, atol=1e-12)


def test_hexagon_validation():
    with pytest.raises(ValueError):
        hexagon_formation(0, 1.0)
    with pytest.raises(ValueError):
        hexagon_formation(6, -1.0)
