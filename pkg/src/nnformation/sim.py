"""Closed-loop integration, disturbance injection, Lyapunov monitoring and run metrics."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .controller import Gains, control_law, coordinate_transform, formation_errors
from .graph import Topology, augmented_laplacian, kron_identity
from .nn import AdaptationParams, RbfBasis, activations

log = logging.getLogger(__name__)


class SimulationAbort(RuntimeError):
    """The run hit a non-finite state or a weight norm above the safety bound."""

    def __init__(self, message: str, agent: int | None = None, t: float | None = None):
        super().__init__(message)
        self.agent = agent
        self.t = t


@dataclass
class SwarmState:
    """Full ODE state: agents (n, D), leader (D,), NN weights (n, h, D)."""

    t: float
    x: np.ndarray
    v: np.ndarray
    leader_x: np.ndarray
    leader_v: np.ndarray
    weights: np.ndarray

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    def pack(self) -> np.ndarray:
        return np.concatenate([self.x.ravel(), self.v.ravel(), self.leader_x, self.leader_v,
                               self.weights.ravel()])

    def unpack(self, y: np.ndarray, t: float | None = None) -> "SwarmState":
        """A state with this one's shapes holding the values in ``y``."""
        n, d = self.x.shape
        h = self.weights.shape[1]
        k = n * d
        return SwarmState(
            t=self.t if t is None else t,
            x=y[:k].reshape(n, d),
            v=y[k:2 * k].reshape(n, d),
            leader_x=y[2 * k:2 * k + d],
            leader_v=y[2 * k + d:2 * k + 2 * d],
            weights=y[2 * k + 2 * d:].reshape(n, h, d),
        )

    def copy(self) -> "SwarmState":
        return self.unpack(self.pack().copy())


def rk4_step(f: Callable[[float, np.ndarray], np.ndarray], t: float, y: np.ndarray, dt: float) -> np.ndarray:
    """Classical fourth-order Runge-Kutta step for y' = f(t, y)."""
    k1 = f(t, y)
    k2 = f(t + dt / 2, y + dt / 2 * k1)
    k3 = f(t + dt / 2, y + dt / 2 * k2)
    k4 = f(t + dt, y + dt * k3)
    return y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def step_rk4(state: SwarmState, dt: float, system: Callable[[SwarmState], SwarmState]) -> SwarmState:
    """Advance the stacked state by one RK4 step.

    ``system`` maps a state to its time derivative, returned as a SwarmState
    whose array fields hold the rates.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")

    def f(t, y):
        k = system(state.unpack(y, t)).pack()
        if not np.isfinite(k).all():
            _check_finite(state.unpack(k, t))
        return k

    return state.unpack(rk4_step(f, state.t, state.pack(), dt), state.t + dt)


@dataclass
class Signals:
    """Intermediate closed-loop quantities at one state."""

    z_x: np.ndarray
    z_v: np.ndarray
    e_x: np.ndarray
    e_v: np.ndarray
    phi: np.ndarray
    u: np.ndarray


class ClosedLoop:
    """transforms -> errors -> control -> agent, leader and weight derivatives."""

    def __init__(self, topology: Topology, offsets: np.ndarray, basis: RbfBasis,
                 params: AdaptationParams, gains: Gains,
                 drift: Callable[[np.ndarray, np.ndarray], np.ndarray],
                 leader_accel: Callable[[float], np.ndarray]):
        self.topology = topology
        self.offsets = np.asarray(offsets, dtype=float)
        self.basis = basis
        self.params = params
        self.gains = gains
        self.drift = drift
        self.leader_accel = leader_accel
        if self.offsets.shape[0] != topology.n:
            raise ValueError(f"formation has {self.offsets.shape[0]} offsets for {topology.n} agents")
        if basis.h != params.h:
            raise ValueError(f"basis has {basis.h} neurons but gamma is {params.h}x{params.h}")
        self._gain = params.scalar_gain

    def signals(self, s: SwarmState) -> Signals:
        z_x, z_v = coordinate_transform(s.x, s.v, s.leader_x, s.leader_v, self.offsets)
        e_x, e_v = formation_errors(z_x, z_v, self.topology)
        phi = activations(self.basis, np.concatenate([s.x, s.v], axis=1))
        u = control_law(e_x, e_v, s.weights, phi, self.gains)
        return Signals(z_x, z_v, e_x, e_v, phi, u)

    def __call__(self, s: SwarmState) -> SwarmState:
        sig = self.signals(s)
        sigma = self.params.sigma
        if self._gain is not None:
            dw = sig.phi[:, :, None] * (self._gain * (sig.e_x + sig.e_v))[:, None, :]
            dw -= (self._gain * sigma) * s.weights
        else:
            learn = sig.phi[:, :, None] * (sig.e_x + sig.e_v)[:, None, :] - sigma * s.weights
            dw = np.einsum("jk,ikd->ijd", self.params.gamma, learn)
        return SwarmState(s.t, s.v.copy(), self.drift(s.x, s.v) + sig.u, s.leader_v.copy(),
                          np.asarray(self.leader_accel(s.t), dtype=float), dw)

    def rate(self, template: SwarmState) -> Callable[[float, np.ndarray], np.ndarray]:
        """Flat-vector derivative y' = f(t, y) with shapes taken from ``template``."""

        def f(t, y):
            k = self(template.unpack(y, t)).pack()
            if not np.isfinite(k).all():
                _check_finite(template.unpack(k, t))
            return k

        return f


def _check_finite(s: SwarmState) -> None:
    """Raise with the first agent whose entries are not finite."""
    bad = ~(np.isfinite(s.x).all(axis=1) & np.isfinite(s.v).all(axis=1)
            & np.isfinite(s.weights).all(axis=(1, 2)))
    if bad.any():
        agent = int(np.flatnonzero(bad)[0])
        raise SimulationAbort(f"non-finite state or derivative for agent {agent} at t={s.t:.6g}", agent, s.t)
    if not (np.isfinite(s.leader_x).all() and np.isfinite(s.leader_v).all()):
        raise SimulationAbort(f"non-finite leader state at t={s.t:.6g}", None, s.t)


@dataclass(frozen=True)
class Surrogate:
    value: float
    certifying: bool


def lyapunov_block(topology: Topology, gains: Gains) -> np.ndarray:
    """[[(γ_x+γ_v) L̂L̂, L̂], [L̂, L̂]] (2n × 2n)."""
    lh = augmented_laplacian(topology)
    return np.block([[(gains.gamma_x + gains.gamma_v) * lh @ lh, lh], [lh, lh]])


class LyapunovMonitor:
    """Evaluates V = ½ zᵀ(M ⊗ I_D)z + ½ Σ Tr(W̃ᵀ Γ⁻¹ W̃).

    W̃ = Ŵ - W* when ``w_star`` is given (oracle mode), otherwise Ŵ (surrogate
    mode). ``certifying`` is False when M is not positive definite.
    """

    def __init__(self, topology: Topology, gains: Gains, params: AdaptationParams,
                 w_star: np.ndarray | None = None):
        self.lh = augmented_laplacian(topology)
        self.gsum = gains.gamma_x + gains.gamma_v
        self.w_star = None if w_star is None else np.asarray(w_star, dtype=float)
        self.gamma_inv = params.gamma_inverse()
        gain = params.scalar_gain
        self._inv_gain = None if gain is None else 1.0 / gain
        self.certifying = bool(np.linalg.eigvalsh(lyapunov_block(topology, gains)).min() > 0)

    @property
    def mode(self) -> str:
        return "surrogate" if self.w_star is None else "oracle"

    def value(self, z_x: np.ndarray, z_v: np.ndarray, weights: np.ndarray) -> float:
        lx = self.lh @ z_x
        lv = self.lh @ z_v
        quad = self.gsum * np.sum(lx * lx) + 2.0 * np.sum(z_x * lv) + np.sum(z_v * lv)
        wt = weights if self.w_star is None else weights - self.w_star
        if self._inv_gain is not None:
            wterm = self._inv_gain * np.sum(wt * wt)
        else:
            wterm = float(np.einsum("ihd,hk,ikd->", wt, self.gamma_inv, wt))
        return 0.5 * (quad + wterm)


def lyapunov_surrogate(state: SwarmState, topology: Topology, gains: Gains, params: AdaptationParams,
                       offsets: np.ndarray, w_star: np.ndarray | None = None) -> Surrogate:
    monitor = LyapunovMonitor(topology, gains, params, w_star)
    z_x, z_v = coordinate_transform(state.x, state.v, state.leader_x, state.leader_v, offsets)
    return Surrogate(monitor.value(z_x, z_v, state.weights), monitor.certifying)


def lyapunov_reference(z_x, z_v, weights, topology, gains, params, w_star=None) -> float:
    """Literal evaluation with the Kronecker-expanded block matrix (slow; for checks)."""
    d = z_x.shape[1]
    z = np.concatenate([np.ravel(z_x), np.ravel(z_v)])
    q = kron_identity(lyapunov_block(topology, gains), d)
    wt = weights if w_star is None else weights - w_star
    ginv = params.gamma_inverse()
    return 0.5 * z @ q @ z + 0.5 * sum(np.trace(w.T @ ginv @ w) for w in wt)


@dataclass(frozen=True)
class Disturbance:
    """Velocity impulse added to ``targets`` (0-based ids) at ``time``."""

    time: float
    targets: tuple[int, ...]
    velocity_impulse: np.ndarray


@dataclass
class TrajectoryLog:
    t: np.ndarray
    x: np.ndarray
    v: np.ndarray
    leader_x: np.ndarray
    leader_v: np.ndarray
    z_x: np.ndarray
    z_v: np.ndarray
    e_x: np.ndarray
    e_v: np.ndarray
    u: np.ndarray
    wnorm: np.ndarray
    V: np.ndarray
    lyapunov_mode: str = "surrogate"
    certifying: bool = True
    final_state: SwarmState | None = field(default=None, repr=False)

    @property
    def err_pos(self) -> np.ndarray:
        return np.linalg.norm(self.z_x, axis=2).max(axis=1)

    @property
    def err_vel(self) -> np.ndarray:
        return np.linalg.norm(self.z_v, axis=2).max(axis=1)

    @property
    def n(self) -> int:
        return self.x.shape[1]

    @property
    def dim(self) -> int:
        return self.x.shape[2]

    def at(self, time: float) -> int:
        """Index of the sample nearest ``time``."""
        return int(np.argmin(np.abs(self.t - time)))

    def columns(self) -> list[str]:
        return csv_columns(self.n, self.dim)

    def rows(self) -> np.ndarray:
        s = len(self.t)
        parts = [self.t[:, None], self.leader_x, self.leader_v]
        for arr in (self.x, self.v, self.z_x, self.z_v, self.e_x, self.e_v, self.u):
            parts.append(arr.reshape(s, -1))
        parts += [self.wnorm, self.V[:, None], self.err_pos[:, None], self.err_vel[:, None]]
        return np.concatenate(parts, axis=1)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.columns())
            for row in self.rows():
                w.writerow([format(float(q), ".12g") for q in row])


def csv_columns(n: int, dim: int) -> list[str]:
    cols = ["t"] + [f"xbar_{k + 1}" for k in range(dim)] + [f"vbar_{k + 1}" for k in range(dim)]
    for prefix in ("x", "v", "zx", "zv", "ex", "ev", "u"):
        cols += [f"{prefix}{i + 1}_{k + 1}" for i in range(n) for k in range(dim)]
    cols += [f"wnorm{i + 1}" for i in range(n)]
    return cols + ["V", "err_pos_max", "err_vel_max"]


def simulate(loop: ClosedLoop, initial: SwarmState, dt: float, duration: float, sample_period: float,
             disturbances: Sequence[Disturbance] = (), monitor: LyapunovMonitor | None = None,
             weight_bound: float = 1e6) -> TrajectoryLog:
    """Fixed-step RK4 from t=0 to ``duration``, sampling every ``sample_period``."""
    steps = int(round(duration / dt))
    every = int(round(sample_period / dt))
    if steps < 1 or abs(steps * dt - duration) > 1e-9 * max(1.0, duration):
        raise ValueError("duration must be a positive integer multiple of dt")
    if every < 1 or abs(every * dt - sample_period) > 1e-9 * max(1.0, sample_period):
        raise ValueError("sample_period must be a positive integer multiple of dt")
    pending = sorted(disturbances, key=lambda q: q.time)
    for dist in pending:
        if not 0 <= dist.time <= duration:
            raise ValueError(f"disturbance time {dist.time} outside [0, {duration}]")

    state = initial.copy()
    state.t = 0.0
    n_samples = steps // every + 1
    n, d, h = state.n, state.dim, state.weights.shape[1]
    buf = {key: np.empty((n_samples, n, d)) for key in ("x", "v", "z_x", "z_v", "e_x", "e_v", "u")}
    lx = np.empty((n_samples, d))
    lv = np.empty((n_samples, d))
    tt = np.empty(n_samples)
    wn = np.empty((n_samples, n))
    vv = np.empty(n_samples)

    f = loop.rate(state)
    y = state.pack()
    row = 0
    for k in range(steps + 1):
        t = k * dt
        while pending and t >= pending[0].time - 1e-9 * dt:
            dist = pending.pop(0)
            cur = state.unpack(y, t)
            cur.v[list(dist.targets)] += dist.velocity_impulse
            log.info("applied velocity impulse %s to agents %s at t=%.6g",
                     dist.velocity_impulse, list(dist.targets), t)
        cur = state.unpack(y, t)
        norms = np.linalg.norm(cur.weights, axis=(1, 2))
        if not np.all(np.isfinite(y)):
            _check_finite(cur)
        if norms.max() > weight_bound:
            agent = int(np.argmax(norms))
            raise SimulationAbort(
                f"weight norm of agent {agent} reached {norms[agent]:.3g} > bound {weight_bound:.3g} at t={t:.6g}",
                agent, t)
        if k % every == 0:
            sig = loop.signals(cur)
            tt[row] = t
            buf["x"][row], buf["v"][row] = cur.x, cur.v
            buf["z_x"][row], buf["z_v"][row] = sig.z_x, sig.z_v
            buf["e_x"][row], buf["e_v"][row] = sig.e_x, sig.e_v
            buf["u"][row] = sig.u
            lx[row], lv[row] = cur.leader_x, cur.leader_v
            wn[row] = norms
            vv[row] = monitor.value(sig.z_x, sig.z_v, cur.weights) if monitor is not None else np.nan
            row += 1
        if k < steps:
            y = rk4_step(f, t, y, dt)

    return TrajectoryLog(
        t=tt, x=buf["x"], v=buf["v"], leader_x=lx, leader_v=lv, z_x=buf["z_x"], z_v=buf["z_v"],
        e_x=buf["e_x"], e_v=buf["e_v"], u=buf["u"], wnorm=wn, V=vv,
        lyapunov_mode=monitor.mode if monitor is not None else "none",
        certifying=monitor.certifying if monitor is not None else False,
        final_state=state.unpack(y.copy(), steps * dt),
    )


@dataclass(frozen=True)
class Summary:
    final_pos_error: float
    peak_pos_error: float
    final_vel_error: float
    peak_vel_error: float
    tolerance: float
    time_to_threshold: float | None
    burn_in: float
    V_min: float | None
    V_max: float | None

    def lines(self) -> list[str]:
        ttt = "not reached" if self.time_to_threshold is None else f"{self.time_to_threshold:.6g} s"
        vr = "n/a" if self.V_min is None else f"[{self.V_min:.6g}, {self.V_max:.6g}]"
        return [
            f"position error  final {self.final_pos_error:.6g}  peak {self.peak_pos_error:.6g}",
            f"velocity error  final {self.final_vel_error:.6g}  peak {self.peak_vel_error:.6g}",
            f"time to position error <= {self.tolerance:g}: {ttt}",
            f"Lyapunov range after t={self.burn_in:g} s: {vr}",
        ]

    def to_dict(self) -> dict:
        return {k: (None if v is None else float(v)) for k, v in self.__dict__.items()}


def settle_time(t: np.ndarray, err: np.ndarray, tolerance: float) -> float | None:
    """Earliest sample time after which ``err`` stays within ``tolerance``."""
    above = np.flatnonzero(err > tolerance)
    if len(above) == 0:
        return float(t[0])
    if above[-1] == len(err) - 1:
        return None
    return float(t[above[-1] + 1])


def metrics(log_: TrajectoryLog, tolerance: float = 0.1, burn_in: float = 0.0) -> Summary:
    if len(log_.t) == 0:
        raise ValueError("empty trajectory log")
    ep, ev = log_.err_pos, log_.err_vel
    after = log_.V[(log_.t >= burn_in) & np.isfinite(log_.V)]
    return Summary(
        final_pos_error=float(ep[-1]), peak_pos_error=float(ep.max()),
        final_vel_error=float(ev[-1]), peak_vel_error=float(ev.max()),
        tolerance=tolerance, time_to_threshold=settle_time(log_.t, ep, tolerance), burn_in=burn_in,
        V_min=float(after.min()) if len(after) else None,
        V_max=float(after.max()) if len(after) else None,
    )


class PreflightError(ValueError):
    """A scenario failed its pre-run checks (connectivity or gain conditions)."""

    def __init__(self, message: str, spectral=None, gain_report=None):
        super().__init__(message)
        self.spectral = spectral
        self.gain_report = gain_report


def preflight(config, allow_unstable_gains: bool = False):
    """Spectral report and gain check for a scenario; raises PreflightError on refusal."""
    from .controller import gain_check
    from .graph import spectral_report

    spectral = spectral_report(config.build_topology())
    if not spectral.connected:
        raise PreflightError(f"topology is not connected ({spectral.components} components)", spectral)
    report = gain_check(config.build_gains(), spectral.augmented_min_eigenvalue)
    allow = allow_unstable_gains or config.gains.allow_unstable
    if not report.passed and not allow:
        q = report.first_failure
        raise PreflightError(f"gain check failed: {q.label} ({q.lhs:.6g} <= {q.bound:.6g})", spectral, report)
    return spectral, report


def oracle_weights(config):
    """Least-squares W* for every agent's drift over the network's operating box.

    Returns (W* of shape (n, h, D), list of FitReport).
    """
    from .dynamics import BenchmarkParams, benchmark_drift
    from .nn import FitReport, grid_samples

    basis = config.build_basis()
    n, d = config.n, config.dim
    pts = grid_samples(config.nn.lower, config.nn.upper, config.sim.oracle_samples_per_axis)
    if len(pts) < basis.h:
        raise ValueError(f"need at least h={basis.h} samples, got {len(pts)}")
    params = config.benchmark_params()
    x, v = pts[:, :d], pts[:, d:]
    targets = np.zeros((len(pts), n, d))
    if params is not None:
        for i in range(n):
            one = BenchmarkParams(np.full(len(pts), params.alpha[i]), np.full(len(pts), params.beta[i]))
            targets[:, i] = benchmark_drift(x, v, one)
    phi = activations(basis, pts)
    # one factorisation serves every agent's right-hand side
    w, _, rank, _ = np.linalg.lstsq(phi, targets.reshape(len(pts), n * d), rcond=None)
    w_star = w.reshape(basis.h, n, d).transpose(1, 0, 2).copy()
    resid = np.linalg.norm((phi @ w).reshape(len(pts), n, d) - targets, axis=2)
    reports = [FitReport(float(r.max()), float(np.sqrt(np.mean(r**2))), int(rank), int(rank) < basis.h, len(pts))
               for r in resid.T]
    return w_star, reports


def initial_state(config) -> SwarmState:
    h = int(np.prod(config.nn.counts))
    return SwarmState(
        t=0.0,
        x=np.array(config.agents.positions, dtype=float),
        v=np.array(config.agents.velocities, dtype=float),
        leader_x=np.array(config.leader.position, dtype=float),
        leader_v=np.array(config.leader.velocity, dtype=float),
        weights=np.zeros((config.n, h, config.dim)),
    )


def build_loop(config) -> ClosedLoop:
    return ClosedLoop(config.build_topology(), config.build_offsets(), config.build_basis(),
                      config.build_params(), config.build_gains(), config.build_drift(),
                      config.build_leader().accel)


def run_scenario(config, allow_unstable_gains: bool = False, w_star: np.ndarray | None = None) -> TrajectoryLog:
    """Validate, integrate and log one scenario.

    In oracle Lyapunov mode W* is fitted here unless supplied.
    """
    preflight(config, allow_unstable_gains)
    params = config.build_params()
    if config.sim.lyapunov_mode == "oracle" and w_star is None:
        w_star, _ = oracle_weights(config)
    elif config.sim.lyapunov_mode != "oracle":
        w_star = None
    monitor = LyapunovMonitor(config.build_topology(), config.build_gains(), params, w_star)
    return simulate(build_loop(config), initial_state(config), config.sim.dt, config.sim.duration,
                    config.sim.sample_period, config.build_disturbances(), monitor, config.sim.weight_bound)
