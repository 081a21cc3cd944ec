"""Agent and leader models, the 16-agent benchmark drift and formation geometry."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Benchmark constants for the 16-agent system.
BENCHMARK_POSITIONS = (
    (4, 6), (5.5, 1), (2.5, 5), (8, 2), (6.5, 5.5), (1.5, 4), (1.5, 6.5), (5, 6),
    (2, 7.5), (6, 5), (9, 7.5), (4, 5), (3.5, 4), (5, 3.5), (1.5, 2.5), (4, 7),
)
# Entries 8-15 arrive with three components ("[4, 5, 3]"); the interior
# comma is read as a decimal point, e.g. [4, 5, 3] -> [4.5, 3].
BENCHMARK_VELOCITIES = (
    (5, 5), (2, 3.5), (1, 5.5), (2, 6.5), (7, 2), (2.5, 3.5), (3, 5), (4.5, 3),
    (5.5, 7), (1.2, 5), (4.5, 5), (4.5, 5), (6, 4.5), (4.5, 6), (7, 3.5), (2, 4),
)
BENCHMARK_ALPHA = (0.5, 0.3, -0.2, 0.7, -0.5, -0.3, -0.6, 0.4, -0.8, 0.6, -0.4, 0.3, 0.4, -0.2, 0.7, -0.6)
BENCHMARK_BETA = (0.7, 0.35, -0.2, 0.6, -0.25, -0.5, 0.45, -0.4, 0.75, -0.6, -0.3, -0.4, 0.65, -0.25, 0.8, -0.45)


@dataclass(frozen=True)
class AgentState:
    position: np.ndarray
    velocity: np.ndarray


@dataclass(frozen=True)
class LeaderState:
    position: np.ndarray
    velocity: np.ndarray


@dataclass(frozen=True)
class BenchmarkParams:
    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.alpha, dtype=float)
        b = np.asarray(self.beta, dtype=float)
        if a.ndim != 1 or a.shape != b.shape:
            raise ValueError(f"alpha and beta must be equal-length vectors, got {a.shape} and {b.shape}")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "beta", b)

    @classmethod
    def standard(cls) -> "BenchmarkParams":
        return cls(np.array(BENCHMARK_ALPHA), np.array(BENCHMARK_BETA))

    @property
    def n(self) -> int:
        return len(self.alpha)


def agent_deriv(state: AgentState, control, f_value) -> tuple[np.ndarray, np.ndarray]:
    """(ẋ, v̇) = (v, f + u)."""
    v = np.asarray(state.velocity, dtype=float)
    return v.copy(), np.asarray(f_value, dtype=float) + np.asarray(control, dtype=float)


class LeaderProfile:
    """Leader acceleration h(t)."""

    name = "abstract"

    def accel(self, t: float) -> np.ndarray:
        raise NotImplementedError

    def to_dict(self) -> dict:
        return {"profile": self.name}


class ConstantVelocity(LeaderProfile):
    name = "constant_velocity"

    def __init__(self, dim: int = 2):
        self.dim = dim

    def accel(self, t):
        return np.zeros(self.dim)


class Sinusoidal(LeaderProfile):
    """h(t) = (A cos ωt, -A sin ωt)."""

    name = "sinusoidal"

    def __init__(self, amplitude: float = 0.1, omega: float = 0.2):
        self.amplitude = float(amplitude)
        self.omega = float(omega)

    def accel(self, t):
        wt = self.omega * t
        return np.array([self.amplitude * np.cos(wt), -self.amplitude * np.sin(wt)])

    def to_dict(self):
        return {"profile": self.name, "amplitude": self.amplitude, "omega": self.omega}


def leader_deriv(state: LeaderState, t: float, profile: LeaderProfile) -> tuple[np.ndarray, np.ndarray]:
    if t < 0:
        raise ValueError("time must be non-negative")
    return np.asarray(state.velocity, dtype=float).copy(), profile.accel(t)


def benchmark_drift(x: np.ndarray, v: np.ndarray, params: BenchmarkParams) -> np.ndarray:
    """Vectorised drift for all agents: x, v have shape (n, 2)."""
    x1, x2 = x[:, 0], x[:, 1]
    v1, v2 = v[:, 0], v[:, 1]
    return np.stack([
        x1 + params.alpha * np.cos(x1 * v1) ** 2,
        v2 + params.beta * np.sin(x2 * v2) ** 2,
    ], axis=1)


def benchmark_f(index: int, state: AgentState, params: BenchmarkParams) -> np.ndarray:
    """Drift of agent ``index`` (1-based)."""
    if not 1 <= index <= params.n:
        raise IndexError(f"agent index {index} outside 1..{params.n}")
    x = np.asarray(state.position, dtype=float)
    v = np.asarray(state.velocity, dtype=float)
    if x.shape != (2,) or v.shape != (2,):
        raise ValueError("the benchmark drift is defined for planar agents only")
    a, b = params.alpha[index - 1], params.beta[index - 1]
    return np.array([x[0] + a * np.cos(x[0] * v[0]) ** 2, v[1] + b * np.sin(x[1] * v[1]) ** 2])


def hexagon_formation(n: int, radius: float) -> np.ndarray:
    """n offsets at equal arc-length spacing around a regular hexagon.

    The first point is the vertex at angle 0. When n is coprime to 6 the raw
    samples are not centrally balanced, so the set is shifted to zero mean.
    """
    if n < 1:
        raise ValueError("need at least one agent")
    if radius <= 0:
        raise ValueError("radius must be positive")
    k = np.arange(7)
    verts = radius * np.stack([np.cos(k * np.pi / 3), np.sin(k * np.pi / 3)], axis=1)
    s = np.arange(n) * 6.0 / n  # arc length in units of the side length
    edge = np.minimum(np.floor(s).astype(int), 5)
    frac = s - edge
    pts = verts[edge] + (verts[edge + 1] - verts[edge]) * frac[:, None]
    if np.gcd(n, 6) == 1:
        pts = pts - pts.mean(axis=0)
    return pts
