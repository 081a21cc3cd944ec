"""Scenario configuration: strict YAML schema, validation and model construction."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .controller import Gains
from .dynamics import (BenchmarkParams, ConstantVelocity, LeaderProfile, Sinusoidal, benchmark_drift,
                       hexagon_formation)
from .graph import Topology, TopologyError
from .nn import AdaptationParams, RbfBasis
from .sim import Disturbance

PRESETS = ("benchmark_s1", "benchmark_s2")
LEADER_PROFILES = ("constant_velocity", "sinusoidal")
DRIFT_MODELS = ("benchmark", "zero")
LYAPUNOV_MODES = ("surrogate", "oracle")


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


def _keys(block: Any, key: str, required: set[str], optional: set[str] = frozenset()) -> dict:
    if not isinstance(block, dict):
        raise ConfigError(key, "expected a mapping")
    unknown = sorted(set(block) - required - set(optional))
    if unknown:
        raise ConfigError(f"{key}.{unknown[0]}" if key else unknown[0], "unknown key")
    missing = sorted(required - set(block))
    if missing:
        raise ConfigError(f"{key}.{missing[0]}" if key else missing[0], "missing required key")
    return block


def _num(value: Any, key: str, *, positive: bool = False, nonneg: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(key, f"expected a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(key, "must be finite")
    name = key.rsplit(".", 1)[-1]
    if positive and value <= 0:
        raise ConfigError(key, f"{name} must be positive")
    if nonneg and value < 0:
        raise ConfigError(key, f"{name} must be non-negative")
    return value


def _vec(value: Any, key: str, length: int | None = None, **kw) -> list[float]:
    if not isinstance(value, (list, tuple)):
        raise ConfigError(key, "expected a list of numbers")
    if length is not None and len(value) != length:
        raise ConfigError(key, f"expected {length} entries, got {len(value)}")
    return [_num(q, f"{key}[{i}]", **kw) for i, q in enumerate(value)]


def _rows(value: Any, key: str, n: int, dim: int) -> list[list[float]]:
    if not isinstance(value, (list, tuple)) or len(value) != n:
        raise ConfigError(key, f"expected {n} rows (one per agent)")
    return [_vec(r, f"{key}[{i}]", dim) for i, r in enumerate(value)]


def _bool(value: Any, key: str) -> bool:
    if not isinstance(value, bool):
        raise ConfigError(key, f"expected true/false, got {value!r}")
    return value


def _choice(value: Any, key: str, options) -> str:
    if value not in options:
        raise ConfigError(key, f"must be one of {', '.join(options)}; got {value!r}")
    return value


@dataclass
class TopologyConfig:
    n: int
    edges: list[list[float]]
    pinning: list[float]


@dataclass
class FormationConfig:
    generator: str = "hexagon"
    radius: float = 3.0
    offsets: list[list[float]] | None = None


@dataclass
class AgentsConfig:
    positions: list[list[float]]
    velocities: list[list[float]]
    drift: str = "benchmark"
    alpha: list[float] | None = None
    beta: list[float] | None = None


@dataclass
class LeaderConfig:
    profile: str = "constant_velocity"
    position: list[float] = field(default_factory=lambda: [5.0, 5.0])
    velocity: list[float] = field(default_factory=lambda: [0.5, 0.3])
    amplitude: float = 0.1
    omega: float = 0.2


@dataclass
class NnConfig:
    lower: list[float]
    upper: list[float]
    counts: list[int]
    width_factor: float = 1.5
    gamma: float = 5.0
    sigma: float = 0.05


@dataclass
class GainsConfig:
    gamma_x: float
    gamma_v: float
    allow_unstable: bool = False


@dataclass
class SimConfig:
    dt: float = 0.001
    duration: float = 40.0
    sample_period: float = 0.01
    weight_bound: float = 1e6
    lyapunov_mode: str = "surrogate"
    oracle_samples_per_axis: int = 9
    tolerance: float = 0.1
    burn_in: float = 10.0


@dataclass
class DisturbanceConfig:
    time: float
    targets: list[int]
    velocity_impulse: list[float]


@dataclass
class OutputsConfig:
    plots: bool = True
    csv: str = "trajectory.csv"


@dataclass
class ScenarioConfig:
    name: str
    topology: TopologyConfig
    formation: FormationConfig
    agents: AgentsConfig
    leader: LeaderConfig
    nn: NnConfig
    gains: GainsConfig
    sim: SimConfig
    disturbances: list[DisturbanceConfig] = field(default_factory=list)
    outputs: OutputsConfig = field(default_factory=OutputsConfig)

    @property
    def n(self) -> int:
        return self.topology.n

    @property
    def dim(self) -> int:
        return len(self.leader.position)

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["formation"]["offsets"] is None:
            del d["formation"]["offsets"]
        for key in ("alpha", "beta"):
            if d["agents"][key] is None:
                del d["agents"][key]
        return d

    # model construction

    def build_topology(self) -> Topology:
        return Topology.from_edges(self.n, self.topology.edges, self.topology.pinning)

    def build_offsets(self) -> np.ndarray:
        if self.formation.generator == "hexagon":
            return hexagon_formation(self.n, self.formation.radius)
        return np.array(self.formation.offsets, dtype=float)

    def build_basis(self) -> RbfBasis:
        return RbfBasis.grid(self.nn.lower, self.nn.upper, self.nn.counts, self.nn.width_factor)

    def build_params(self) -> AdaptationParams:
        return AdaptationParams.scalar(int(np.prod(self.nn.counts)), self.nn.gamma, self.nn.sigma)

    def build_gains(self) -> Gains:
        return Gains(self.gains.gamma_x, self.gains.gamma_v)

    def build_leader(self) -> LeaderProfile:
        if self.leader.profile == "sinusoidal":
            return Sinusoidal(self.leader.amplitude, self.leader.omega)
        return ConstantVelocity(self.dim)

    def benchmark_params(self) -> BenchmarkParams | None:
        if self.agents.drift != "benchmark":
            return None
        return BenchmarkParams(np.array(self.agents.alpha), np.array(self.agents.beta))

    def build_drift(self):
        params = self.benchmark_params()
        if params is None:
            return lambda x, v: np.zeros_like(x)
        return lambda x, v: benchmark_drift(x, v, params)

    def build_disturbances(self) -> list[Disturbance]:
        return [Disturbance(q.time, tuple(q.targets), np.array(q.velocity_impulse, dtype=float))
                for q in self.disturbances]


def parse_config(doc: Any) -> ScenarioConfig:
    """Validate a decoded YAML document; errors name the offending key."""
    top = _keys(doc, "", {"name", "topology", "agents", "nn", "gains"},
                {"formation", "leader", "sim", "disturbances", "outputs"})
    name = top["name"]
    if not isinstance(name, str) or not name:
        raise ConfigError("name", "expected a non-empty string")

    t = _keys(top["topology"], "topology", {"n", "edges", "pinning"})
    n = t["n"]
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise ConfigError("topology.n", "n must be a positive integer")
    if not isinstance(t["edges"], list):
        raise ConfigError("topology.edges", "expected a list of [i, j, weight]")
    edges = []
    for k, e in enumerate(t["edges"]):
        key = f"topology.edges[{k}]"
        if not isinstance(e, list) or len(e) != 3:
            raise ConfigError(key, "expected [i, j, weight]")
        i, j = e[0], e[1]
        for idx in (i, j):
            if isinstance(idx, bool) or not isinstance(idx, int) or not 0 <= idx < n:
                raise ConfigError(key, f"agent id {idx!r} must be an integer in 0..{n - 1}")
        if i == j:
            raise ConfigError(key, "self-loops are not allowed")
        edges.append([i, j, _num(e[2], key + "[2]", nonneg=True)])
    pinning = _vec(t["pinning"], "topology.pinning", n, nonneg=True)
    if not any(d > 0 for d in pinning):
        raise ConfigError("topology.pinning", "no pinned agent (at least one d_i must be positive)")
    topo = TopologyConfig(n, edges, pinning)

    f = _keys(top.get("formation", {}), "formation", set(), {"generator", "radius", "offsets"})
    formation = FormationConfig()
    formation.generator = _choice(f.get("generator", "hexagon"), "formation.generator", ("hexagon", "explicit"))
    if formation.generator == "hexagon":
        if "offsets" in f:
            raise ConfigError("formation.offsets", "only allowed with generator: explicit")
        formation.radius = _num(f.get("radius", 3.0), "formation.radius", positive=True)
        if n < 3:
            raise ConfigError("formation.generator", "hexagon formation needs n >= 3")
    else:
        if "offsets" not in f:
            raise ConfigError("formation.offsets", "missing required key")
        if "radius" in f:
            raise ConfigError("formation.radius", "only allowed with generator: hexagon")
        formation.radius = 3.0

    lead = _keys(top.get("leader", {}), "leader", set(), {"profile", "position", "velocity", "amplitude", "omega"})
    leader = LeaderConfig()
    leader.profile = _choice(lead.get("profile", leader.profile), "leader.profile", LEADER_PROFILES)
    leader.position = _vec(lead.get("position", leader.position), "leader.position")
    dim = len(leader.position)
    if dim < 1:
        raise ConfigError("leader.position", "must have at least one component")
    leader.velocity = _vec(lead.get("velocity", leader.velocity), "leader.velocity", dim)
    leader.amplitude = _num(lead.get("amplitude", leader.amplitude), "leader.amplitude", nonneg=True)
    leader.omega = _num(lead.get("omega", leader.omega), "leader.omega")
    if leader.profile == "sinusoidal" and dim != 2:
        raise ConfigError("leader.profile", "the sinusoidal profile is planar (D = 2)")
    if formation.generator == "hexagon" and dim != 2:
        raise ConfigError("formation.generator", "hexagon formation is planar (D = 2)")
    if formation.generator == "explicit":
        formation.offsets = _rows(f["offsets"], "formation.offsets", n, dim)

    a = _keys(top["agents"], "agents", {"positions", "velocities"}, {"drift", "alpha", "beta"})
    agents = AgentsConfig(_rows(a["positions"], "agents.positions", n, dim),
                          _rows(a["velocities"], "agents.velocities", n, dim))
    agents.drift = _choice(a.get("drift", "benchmark"), "agents.drift", DRIFT_MODELS)
    if agents.drift == "benchmark":
        if dim != 2:
            raise ConfigError("agents.drift", "the benchmark drift is planar (D = 2)")
        for key in ("alpha", "beta"):
            if key not in a:
                raise ConfigError(f"agents.{key}", "missing required key for drift: benchmark")
        agents.alpha = _vec(a["alpha"], "agents.alpha", n)
        agents.beta = _vec(a["beta"], "agents.beta", n)
    else:
        for key in ("alpha", "beta"):
            if key in a:
                raise ConfigError(f"agents.{key}", "only allowed with drift: benchmark")

    b = _keys(top["nn"], "nn", {"lower", "upper", "counts"}, {"width_factor", "gamma", "sigma"})
    lower = _vec(b["lower"], "nn.lower", 2 * dim)
    upper = _vec(b["upper"], "nn.upper", 2 * dim)
    for i, (lo, hi) in enumerate(zip(lower, upper)):
        if hi <= lo:
            raise ConfigError(f"nn.upper[{i}]", "upper bound must exceed lower bound")
    counts = b["counts"]
    if (not isinstance(counts, list) or len(counts) != 2 * dim
            or any(isinstance(c, bool) or not isinstance(c, int) or c < 1 for c in counts)):
        raise ConfigError("nn.counts", f"expected {2 * dim} positive integers")
    nn = NnConfig(lower, upper, list(counts),
                  _num(b.get("width_factor", 1.5), "nn.width_factor", positive=True),
                  _num(b.get("gamma", 5.0), "nn.gamma", positive=True),
                  _num(b.get("sigma", 0.05), "nn.sigma", positive=True))

    g = _keys(top["gains"], "gains", {"gamma_x", "gamma_v"}, {"allow_unstable"})
    gains = GainsConfig(_num(g["gamma_x"], "gains.gamma_x", positive=True),
                        _num(g["gamma_v"], "gains.gamma_v", positive=True),
                        _bool(g.get("allow_unstable", False), "gains.allow_unstable"))

    s = _keys(top.get("sim", {}), "sim", set(), set(SimConfig.__dataclass_fields__))
    sim = SimConfig()
    for key in ("dt", "duration", "sample_period", "weight_bound", "tolerance"):
        if key in s:
            setattr(sim, key, _num(s[key], f"sim.{key}", positive=True))
    if "burn_in" in s:
        sim.burn_in = _num(s["burn_in"], "sim.burn_in", nonneg=True)
    if "lyapunov_mode" in s:
        sim.lyapunov_mode = _choice(s["lyapunov_mode"], "sim.lyapunov_mode", LYAPUNOV_MODES)
    if "oracle_samples_per_axis" in s:
        k = s["oracle_samples_per_axis"]
        if isinstance(k, bool) or not isinstance(k, int) or k < 2:
            raise ConfigError("sim.oracle_samples_per_axis", "expected an integer >= 2")
        sim.oracle_samples_per_axis = k
    if sim.lyapunov_mode == "oracle" and agents.drift == "benchmark" \
            and sim.oracle_samples_per_axis ** (2 * dim) < int(np.prod(counts)):
        raise ConfigError("sim.oracle_samples_per_axis", "oracle fit needs at least as many samples as neurons")
    if sim.dt > sim.duration:
        raise ConfigError("sim.dt", "dt must not exceed duration")
    for key in ("duration", "sample_period"):
        ratio = getattr(sim, key) / sim.dt
        if abs(ratio - round(ratio)) > 1e-6:
            raise ConfigError(f"sim.{key}", f"{key} must be an integer multiple of dt")
    if sim.burn_in > sim.duration:
        raise ConfigError("sim.burn_in", "burn_in must not exceed duration")

    dist = top.get("disturbances", [])
    if not isinstance(dist, list):
        raise ConfigError("disturbances", "expected a list")
    disturbances = []
    for k, q in enumerate(dist):
        key = f"disturbances[{k}]"
        q = _keys(q, key, {"time", "targets", "velocity_impulse"})
        time = _num(q["time"], key + ".time", nonneg=True)
        if time > sim.duration:
            raise ConfigError(key + ".time", "disturbance time must lie within [0, duration]")
        targets = q["targets"]
        if not isinstance(targets, list) or not targets:
            raise ConfigError(key + ".targets", "expected a non-empty list of agent ids")
        for idx in targets:
            if isinstance(idx, bool) or not isinstance(idx, int) or not 0 <= idx < n:
                raise ConfigError(key + ".targets", f"agent id {idx!r} must be an integer in 0..{n - 1}")
        disturbances.append(DisturbanceConfig(time, list(targets), _vec(q["velocity_impulse"],
                                                                         key + ".velocity_impulse", dim)))

    o = _keys(top.get("outputs", {}), "outputs", set(), {"plots", "csv"})
    outputs = OutputsConfig(_bool(o.get("plots", True), "outputs.plots"), o.get("csv", "trajectory.csv"))
    if not isinstance(outputs.csv, str) or not outputs.csv or "/" in outputs.csv:
        raise ConfigError("outputs.csv", "expected a plain file name")

    cfg = ScenarioConfig(name, topo, formation, agents, leader, nn, gains, sim, disturbances, outputs)
    try:
        cfg.build_topology()
    except TopologyError as exc:
        raise ConfigError("topology", str(exc)) from exc
    return cfg


def preset_path(name: str) -> Path:
    if name not in PRESETS:
        raise ConfigError("preset", f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
    return Path(str(resources.files("nnformation") / "presets" / f"{name}.yaml"))


def resolve(path_or_preset: str | Path) -> Path:
    """A shipped preset name or a filesystem path."""
    if str(path_or_preset) in PRESETS and not Path(path_or_preset).exists():
        return preset_path(str(path_or_preset))
    return Path(path_or_preset)


def load_config(path_or_preset: str | Path) -> ScenarioConfig:
    """Load a scenario file, a preset name, or a run metadata file (its config echo)."""
    path = resolve(path_or_preset)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read file: {exc.strerror}") from exc
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(str(path), f"parse error: {exc}") from exc
    if isinstance(doc, dict) and doc.get("kind") == "nnformation-run-metadata":
        doc = doc.get("config")
    return parse_config(doc)


def dump_config(cfg: ScenarioConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False, default_flow_style=None)
