"""Relative coordinates, graph-coupled formation errors, control input and gain conditions."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import Topology
from .nn import DimensionError


@dataclass(frozen=True)
class Gains:
    gamma_x: float
    gamma_v: float

    def __post_init__(self):
        if not (self.gamma_x > 0 and self.gamma_v > 0):
            raise ValueError("gains gamma_x and gamma_v must be strictly positive")


def coordinate_transform(positions, velocities, leader_position, leader_velocity, offsets):
    """z_x = x - x̄ - p, z_v = v - v̄ for every agent (rows)."""
    x = np.asarray(positions, dtype=float)
    v = np.asarray(velocities, dtype=float)
    p = np.asarray(offsets, dtype=float)
    if not (x.shape == v.shape == p.shape):
        raise DimensionError(f"positions {x.shape}, velocities {v.shape} and offsets {p.shape} must agree")
    return x - leader_position - p, v - leader_velocity


def formation_errors(z_x, z_v, topology: Topology):
    """e_i = Σ_j a_ij (z_i - z_j) + d_i z_i, for position and velocity."""
    z_x = np.asarray(z_x, dtype=float)
    z_v = np.asarray(z_v, dtype=float)
    if z_x.shape != z_v.shape or z_x.shape[0] != topology.n:
        raise DimensionError(f"expected {topology.n} agents, got z_x {z_x.shape} and z_v {z_v.shape}")
    a = topology.weights
    deg = a.sum(axis=1)[:, None]
    d = topology.pinning[:, None]

    def couple(z):
        return deg * z - a @ z + d * z

    return couple(z_x), couple(z_v)


def control_law(e_x, e_v, weights, phi, gains: Gains) -> np.ndarray:
    """u = -γ_x e_x - γ_v e_v - Ŵᵀφ.

    Single agent: e (D,), weights (h, D), phi (h,). Stacked: e (n, D),
    weights (n, h, D), phi (n, h).
    """
    e_x = np.asarray(e_x, dtype=float)
    e_v = np.asarray(e_v, dtype=float)
    weights = np.asarray(weights, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if e_x.shape != e_v.shape or weights.shape[:-2] + weights.shape[-1:] != e_x.shape \
            or phi.shape != weights.shape[:-1]:
        raise DimensionError(
            f"e_x {e_x.shape}, e_v {e_v.shape}, weights {weights.shape}, phi {phi.shape} do not agree"
        )
    compensation = (phi[..., None, :] @ weights)[..., 0, :]
    return -gains.gamma_x * e_x - gains.gamma_v * e_v - compensation


@dataclass(frozen=True)
class Inequality:
    label: str
    lhs: float
    bound: float

    @property
    def margin(self) -> float:
        return self.lhs - self.bound

    @property
    def passed(self) -> bool:
        return self.lhs > self.bound


@dataclass(frozen=True)
class GainReport:
    lambda_min: float
    inequalities: tuple[Inequality, ...]

    @property
    def passed(self) -> bool:
        return all(q.passed for q in self.inequalities)

    @property
    def first_failure(self) -> Inequality | None:
        return next((q for q in self.inequalities if not q.passed), None)

    def lines(self) -> list[str]:
        out = [f"lambda_min(L+D) = {self.lambda_min:.6g}"]
        for q in self.inequalities:
            status = "PASS" if q.passed else "FAIL"
            out.append(f"{status}  {q.label}: {q.lhs:.6g} > {q.bound:.6g} (margin {q.margin:+.6g})")
        return out

    def to_dict(self) -> dict:
        return {
            "lambda_min": float(self.lambda_min),
            "passed": bool(self.passed),
            "inequalities": [
                {"label": q.label, "lhs": float(q.lhs), "bound": float(q.bound),
                 "margin": float(q.margin), "passed": bool(q.passed)}
                for q in self.inequalities
            ],
        }


def gain_check(gains: Gains, lambda_min: float) -> GainReport:
    """Sufficient stability conditions on (γ_x, γ_v) given λ_min of L + D."""
    if not lambda_min > 0:
        raise ValueError(f"lambda_min = {lambda_min:.3g} <= 0: topology is not connected and pinned")
    gx, gv = gains.gamma_x, gains.gamma_v
    return GainReport(lambda_min, (
        Inequality("gamma_x > 1", gx, 1.0),
        Inequality("gamma_v > 1.5 + 1/(2 lambda_min^2)", gv, 1.5 + 1.0 / (2.0 * lambda_min**2)),
        Inequality("gamma_x + gamma_v > 1/lambda_min", gx + gv, 1.0 / lambda_min),
    ))
