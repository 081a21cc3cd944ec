"""Gaussian RBF approximator, sigma-modified weight law and least-squares fit oracle."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

DEFAULT_GAMMA = 5.0
DEFAULT_SIGMA = 0.05


class DimensionError(ValueError):
    pass


@dataclass(frozen=True)
class RbfBasis:
    """h Gaussian neurons over the joint (position, velocity) space.

    ``centers`` has shape (h, 2*D), ``widths`` shape (h,).
    """

    centers: np.ndarray
    widths: np.ndarray

    def __post_init__(self):
        c = np.array(self.centers, dtype=float)
        w = np.array(self.widths, dtype=float).reshape(-1)
        if c.ndim != 2 or c.shape[0] < 1:
            raise DimensionError(f"centers must be an (h, 2D) array with h >= 1, got shape {c.shape}")
        if c.shape[1] == 0 or c.shape[1] % 2:
            raise DimensionError(f"center dimension must be 2*D, got {c.shape[1]}")
        if w.shape != (c.shape[0],):
            raise DimensionError(f"need one width per neuron ({c.shape[0]}), got {w.shape[0]}")
        if not np.all(w > 0):
            raise ValueError("all widths must be positive")
        c.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "widths", w)
        object.__setattr__(self, "_c2", np.sum(c * c, axis=1))
        object.__setattr__(self, "_ct2", 2.0 * c.T)
        object.__setattr__(self, "_inv_w2", 1.0 / w**2)

    @property
    def h(self) -> int:
        return self.centers.shape[0]

    @property
    def dim(self) -> int:
        """Spatial dimension D."""
        return self.centers.shape[1] // 2

    @classmethod
    def grid(cls, lower: Sequence[float], upper: Sequence[float], counts: Sequence[int],
             width_factor: float = 1.5) -> "RbfBasis":
        """Uniform grid of centers over a box; every width is ``width_factor`` times
        the largest per-axis grid spacing."""
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        counts = [int(k) for k in counts]
        if not (lower.shape == upper.shape == (len(counts),)):
            raise DimensionError("lower, upper and counts must have the same length")
        if any(k < 1 for k in counts) or np.any(upper <= lower):
            raise ValueError("grid needs counts >= 1 and upper > lower on every axis")
        axes = [np.linspace(lo, hi, k) if k > 1 else np.array([(lo + hi) / 2])
                for lo, hi, k in zip(lower, upper, counts)]
        spacing = max((hi - lo) / (k - 1) if k > 1 else hi - lo
                      for lo, hi, k in zip(lower, upper, counts))
        centers = np.array(list(itertools.product(*axes)))
        return cls(centers, np.full(len(centers), width_factor * spacing))


@dataclass(frozen=True)
class AdaptationParams:
    """Gain matrix Γ (h×h, symmetric positive definite) and leakage σ > 0."""

    gamma: np.ndarray
    sigma: float = DEFAULT_SIGMA

    def __post_init__(self):
        g = np.atleast_2d(np.array(self.gamma, dtype=float))
        if g.shape[0] != g.shape[1]:
            raise DimensionError(f"gamma must be square, got shape {g.shape}")
        if not np.array_equal(g, g.T):
            raise ValueError("gamma must be symmetric")
        if np.linalg.eigvalsh(g).min() <= 0:
            raise ValueError("gamma must be positive definite")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        g.setflags(write=False)
        object.__setattr__(self, "gamma", g)
        object.__setattr__(self, "sigma", float(self.sigma))

    @classmethod
    def scalar(cls, h: int, gain: float = DEFAULT_GAMMA, sigma: float = DEFAULT_SIGMA) -> "AdaptationParams":
        return cls(gain * np.eye(h), sigma)

    @property
    def h(self) -> int:
        return self.gamma.shape[0]

    @property
    def scalar_gain(self) -> float | None:
        """c when Γ = c·I, otherwise None."""
        c = self.gamma[0, 0]
        return float(c) if np.array_equal(self.gamma, c * np.eye(self.h)) else None

    def gamma_inverse(self) -> np.ndarray:
        return np.linalg.inv(self.gamma)


def _joint(position, velocity) -> np.ndarray:
    x = np.asarray(position, dtype=float)
    v = np.asarray(velocity, dtype=float)
    if x.shape != v.shape:
        raise DimensionError(f"position {x.shape} and velocity {v.shape} differ in shape")
    return np.concatenate([x, v], axis=-1)


def activations(basis: RbfBasis, chi: np.ndarray) -> np.ndarray:
    """Batched basis evaluation: ``chi`` of shape (..., 2D) -> (..., h)."""
    chi = np.asarray(chi, dtype=float)
    if chi.shape[-1] != basis.centers.shape[1]:
        raise DimensionError(f"input dimension {chi.shape[-1]} does not match basis ({basis.centers.shape[1]})")
    # |χ - c|² expanded so the cross term is a single matrix product
    sq = np.sum(chi * chi, axis=-1)[..., None] - chi @ basis._ct2 + basis._c2
    np.maximum(sq, 0.0, out=sq)
    sq *= -basis._inv_w2
    return np.exp(sq, out=sq)


def basis_eval(basis: RbfBasis, position, velocity) -> np.ndarray:
    """φ_j = exp(-|χ - c_j|² / w_j²) with χ = (position, velocity)."""
    chi = _joint(position, velocity)
    if chi.ndim != 1:
        raise DimensionError("basis_eval takes a single agent; use activations() for batches")
    if chi.shape[0] != basis.centers.shape[1]:
        raise DimensionError(f"input dimension {chi.shape[0]} does not match basis ({basis.centers.shape[1]})")
    diff = basis.centers - chi
    return np.exp(-np.sum(diff * diff, axis=1) / basis.widths**2)


def nn_output(weights: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Ŵᵀφ."""
    weights = np.asarray(weights, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if weights.ndim != 2 or phi.shape != (weights.shape[0],):
        raise DimensionError(f"weights {weights.shape} and activations {phi.shape} do not agree")
    return weights.T @ phi


def weight_update_deriv(weights: np.ndarray, phi: np.ndarray, e_x, e_v,
                        params: AdaptationParams) -> np.ndarray:
    """dŴ/dt = Γ (φ (e_x + e_v)ᵀ - σ Ŵ)."""
    weights = np.asarray(weights, dtype=float)
    phi = np.asarray(phi, dtype=float)
    s = np.asarray(e_x, dtype=float) + np.asarray(e_v, dtype=float)
    h = params.h
    if weights.shape != (h, s.shape[0]) or phi.shape != (h,):
        raise DimensionError(
            f"weights {weights.shape}, activations {phi.shape} and errors {s.shape} "
            f"do not agree with gamma of size {h}"
        )
    return params.gamma @ (np.outer(phi, s) - params.sigma * weights)


@dataclass(frozen=True)
class FitReport:
    max_residual: float
    rms_residual: float
    rank: int
    rank_deficient: bool
    samples: int


def _lstsq(phi: np.ndarray, targets: np.ndarray, h: int) -> tuple[np.ndarray, FitReport]:
    # SVD-based; returns the minimum-norm solution when phi is rank deficient
    w, _, rank, _ = np.linalg.lstsq(phi, targets, rcond=None)
    r = phi @ w - targets
    norms = np.linalg.norm(r, axis=1)
    report = FitReport(
        max_residual=float(norms.max()) if len(norms) else 0.0,
        rms_residual=float(np.sqrt(np.mean(norms**2))) if len(norms) else 0.0,
        rank=int(rank),
        rank_deficient=int(rank) < h,
        samples=phi.shape[0],
    )
    return w, report


def fit_weights_least_squares(basis: RbfBasis, samples: Iterable[tuple]) -> tuple[np.ndarray, FitReport]:
    """Minimise Σ|Wᵀφ(χ_s) - y_s|² over W for (position, velocity, target) samples.

    Residuals in the report are Euclidean norms per sample.
    """
    samples = list(samples)
    if len(samples) < basis.h:
        raise ValueError(f"need at least h={basis.h} samples, got {len(samples)}")
    chi = np.array([_joint(x, v) for x, v, _ in samples])
    targets = np.array([np.asarray(y, dtype=float) for _, _, y in samples])
    if targets.ndim != 2 or targets.shape[1] != basis.dim:
        raise DimensionError(f"targets must be {basis.dim}-vectors")
    return _lstsq(activations(basis, chi), targets, basis.h)


def grid_samples(lower: Sequence[float], upper: Sequence[float], per_axis: int) -> np.ndarray:
    """Tensor grid of joint-space points, shape (per_axis ** k, k)."""
    axes = [np.linspace(lo, hi, per_axis) for lo, hi in zip(lower, upper)]
    return np.array(list(itertools.product(*axes)))


def fit_function(basis: RbfBasis, fn: Callable[[np.ndarray, np.ndarray], np.ndarray],
                 lower: Sequence[float], upper: Sequence[float], per_axis: int = 9
                 ) -> tuple[np.ndarray, FitReport]:
    """Fit ``fn(position, velocity)`` sampled on a grid over the box."""
    pts = grid_samples(lower, upper, per_axis)
    d = basis.dim
    samples = [(p[:d], p[d:], fn(p[:d], p[d:])) for p in pts]
    return fit_weights_least_squares(basis, samples)
