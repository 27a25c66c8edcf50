"""Scenario configs and the experiments built on them.

A scenario is a JSON document::

    {
      "name": "paper-example",
      "p": 4,
      "omega": 10.0,
      "H": [0, 1],
      "couplings": [{"i": 1, "j": 3, "kind": "linear", "gain": 1.0}, ...],
      "initial": {"type": "random", "seed": 7, "radius": 5.0, "center_radius": 3.0},
      "horizon": 60.0,
      "frames": ["original", "averaged"],
      "integrator": {"h0": 0.01, "steps_per_period": 256, "sample_dt": 0.1},
      "quadrature": {"rule": "gauss-legendre", "nodes": 2048},
      "output": {"dir": "out"}
    }

Node indices in ``couplings`` are 1-based.  ``initial`` may instead be
``{"type": "explicit", "states": [[q1, p1], ...]}``.  Only ``p``, ``omega``
and ``couplings`` are required; without ``initial`` the run starts from a
random sample with seed 0.  A random ``initial`` block must name its seed.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.stats import spearmanr

from . import __version__
from .analysis import averaging_error, dist_to_manifold, max_pairwise, settle_index, sync_metrics
from .averaging import QuadratureSpec
from .coupling import CouplingError, CouplingFunction, Interconnection
from .dynamics import FRAMES, IntegrationError, IntegratorSpec, SystemSpec, Trajectory, simulate
from .topology import build_graph, is_connected

__all__ = [
    "ConfigError",
    "InitialCondition",
    "Scenario",
    "ScenarioResult",
    "SweepReport",
    "load_scenario",
    "run_scenario",
    "omega_sweep",
    "averaging_scaling_study",
    "default_horizon",
    "sample_ball",
    "dumps",
    "bundled_config",
    "bundled_configs",
]

SYNC_THRESHOLD = 1e-6
TAIL_FRACTION = 0.2


class ConfigError(ValueError):
    """Malformed or invalid scenario config; ``path`` locates the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def dumps(obj) -> str:
    """Canonical JSON text (sorted keys, shortest round-trip floats)."""
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=True) + "\n"


def _hash(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def default_horizon(omega_min: float) -> float:
    return max(60.0, 20.0 * 2.0 * math.pi / omega_min)


def sample_ball(rng: np.random.Generator, p: int, radius: float,
                center_radius: float = 0.0) -> np.ndarray:
    """``p`` points uniform in a disk of ``radius`` around a random center.

    The center is uniform in the disk of ``center_radius``.  The spread of
    the sample (max pairwise distance) is at most ``2 * radius``.
    """
    def disk(n, r):
        angle = rng.uniform(0.0, 2.0 * math.pi, n)
        rad = r * np.sqrt(rng.uniform(0.0, 1.0, n))
        return np.column_stack([rad * np.cos(angle), rad * np.sin(angle)])

    center = disk(1, center_radius)[0]
    return center + disk(p, radius)


@dataclass(frozen=True)
class InitialCondition:
    kind: str = "random"
    seed: int | None = 0
    radius: float = 5.0
    center_radius: float = 0.0
    states: tuple | None = None

    def realize(self, p: int) -> np.ndarray:
        if self.kind == "explicit":
            x0 = np.array(self.states, dtype=float)
            if x0.shape != (p, 2):
                raise ConfigError("initial.states", f"expected {p} pairs, got shape {x0.shape}")
            return x0
        return sample_ball(np.random.default_rng(self.seed), p, self.radius, self.center_radius)

    def to_dict(self) -> dict:
        if self.kind == "explicit":
            return {"type": "explicit", "states": [list(s) for s in self.states]}
        return {"type": "random", "seed": self.seed, "radius": self.radius,
                "center_radius": self.center_radius}


@dataclass(frozen=True)
class Scenario:
    net: Interconnection
    omega: float = 1.0
    H: tuple[float, float] = (0.0, 1.0)
    initial: InitialCondition = InitialCondition()
    horizon: float | None = None
    frames: tuple[str, ...] = ("original",)
    integrator: IntegratorSpec = IntegratorSpec()
    quadrature: QuadratureSpec = QuadratureSpec()
    name: str = "scenario"
    output_dir: str | None = None
    source: dict = field(default_factory=dict, compare=False)

    @property
    def p(self) -> int:
        return self.net.p

    @property
    def t_end(self) -> float:
        return self.horizon if self.horizon is not None else default_horizon(self.omega)

    def system(self, frame: str, omega: float | None = None) -> SystemSpec:
        return SystemSpec(self.net, self.omega if omega is None else omega, self.H,
                          frame, self.quadrature)

    def to_dict(self) -> dict:
        return {
            "name": self.name, "p": self.p, "omega": self.omega, "H": list(self.H),
            "couplings": self.net.to_list(), "initial": self.initial.to_dict(),
            "horizon": self.horizon, "frames": list(self.frames),
            "integrator": self.integrator.to_dict(), "quadrature": self.quadrature.to_dict(),
            "output": {"dir": self.output_dir},
        }

    def config_hash(self) -> str:
        return _hash(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        if not isinstance(d, dict):
            raise ConfigError("$", "config must be a JSON object")
        known = {"name", "p", "omega", "H", "couplings", "initial", "horizon", "frames",
                 "integrator", "quadrature", "output", "description"}
        for key in d:
            if key not in known:
                raise ConfigError(key, "unknown field")
        p = _positive_int(d, "p", minimum=1)
        omega = _positive(d, "omega", default=1.0)
        H = d.get("H", [0.0, 1.0])
        if not (isinstance(H, list) and len(H) == 2 and all(_is_number(v) for v in H)):
            raise ConfigError("H", "must be a list of two numbers")
        if math.hypot(*H) == 0.0:
            raise ConfigError("H", "must be nonzero")

        couplings = d.get("couplings")
        if not isinstance(couplings, list):
            raise ConfigError("couplings", "must be a list of edge records")
        edges = {}
        for k, rec in enumerate(couplings):
            path = f"couplings[{k}]"
            if not isinstance(rec, dict):
                raise ConfigError(path, "must be an object")
            rec = dict(rec)
            ends = []
            for end in ("i", "j"):
                v = rec.pop(end, None)
                if not isinstance(v, int) or isinstance(v, bool) or not 1 <= v <= p:
                    raise ConfigError(f"{path}.{end}", f"must be an integer node index in 1..{p}")
                ends.append(v - 1)
            i, j = ends
            if i == j:
                raise ConfigError(path, "self-coupling is not allowed")
            if (i, j) in edges:
                raise ConfigError(path, f"duplicate edge ({i + 1}, {j + 1})")
            try:
                edges[(i, j)] = CouplingFunction.from_dict(rec)
            except CouplingError as exc:
                raise ConfigError(path, str(exc)) from None
        net = Interconnection.from_edges(p, edges)

        initial = _initial(d["initial"], p) if "initial" in d else InitialCondition()
        horizon = d.get("horizon")
        if horizon is not None:
            horizon = _positive(d, "horizon")
        frames = d.get("frames", ["original"])
        if not isinstance(frames, list) or not frames or any(f not in FRAMES for f in frames):
            raise ConfigError("frames", f"must be a nonempty list drawn from {list(FRAMES)}")
        integrator = _sub(d, "integrator", IntegratorSpec)
        quadrature = _sub(d, "quadrature", QuadratureSpec)
        output = d.get("output", {})
        if not isinstance(output, dict):
            raise ConfigError("output", "must be an object")
        name = d.get("name", "scenario")
        if not isinstance(name, str) or not name:
            raise ConfigError("name", "must be a nonempty string")
        return cls(net, omega, (float(H[0]), float(H[1])), initial, horizon, tuple(frames),
                   integrator, quadrature, name, output.get("dir"), dict(d))


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _positive(d, key, default=None) -> float:
    v = d.get(key, default)
    if not _is_number(v) or v <= 0:
        raise ConfigError(key, "must be a positive number")
    return float(v)


def _positive_int(d, key, minimum=1) -> int:
    v = d.get(key)
    if not isinstance(v, int) or isinstance(v, bool) or v < minimum:
        raise ConfigError(key, f"must be an integer >= {minimum}")
    return v


def _sub(d, key, cls):
    sub = d.get(key, {})
    if not isinstance(sub, dict):
        raise ConfigError(key, "must be an object")
    try:
        return cls.from_dict(sub)
    except (TypeError, ValueError) as exc:
        raise ConfigError(key, str(exc)) from None


def _initial(d, p) -> InitialCondition:
    if not isinstance(d, dict):
        raise ConfigError("initial", "must be an object")
    kind = d.get("type", "random")
    if kind == "explicit":
        states = d.get("states")
        try:
            arr = np.array(states, dtype=float)
        except (TypeError, ValueError):
            raise ConfigError("initial.states", "must be a list of [q, p] pairs") from None
        if arr.shape != (p, 2) or not np.all(np.isfinite(arr)):
            raise ConfigError("initial.states", f"must be {p} finite [q, p] pairs")
        return InitialCondition("explicit", None, states=tuple(tuple(map(float, s)) for s in arr))
    if kind != "random":
        raise ConfigError("initial.type", "must be 'random' or 'explicit'")
    seed = d.get("seed")
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigError("initial.seed", "random initial conditions need a nonnegative integer seed")
    radius = d.get("radius", 5.0)
    if not _is_number(radius) or radius <= 0:
        raise ConfigError("initial.radius", "must be a positive number")
    center = d.get("center_radius", 0.0)
    if not _is_number(center) or center < 0:
        raise ConfigError("initial.center_radius", "must be a nonnegative number")
    return InitialCondition("random", seed, float(radius), float(center))


def bundled_configs() -> list[str]:
    """Names of the scenario configs shipped with the package."""
    root = resources.files("harmsync") / "configs"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def bundled_config(name: str) -> Path:
    """Path of a shipped config, by name (with or without ``.json``)."""
    stem = name[:-5] if name.endswith(".json") else name
    if stem not in bundled_configs():
        raise ConfigError(name, f"no bundled config of that name (have {bundled_configs()})")
    return Path(str(resources.files("harmsync") / "configs" / f"{stem}.json"))


def load_scenario(path) -> Scenario:
    """Load a scenario from a JSON file; a bare bundled name also works."""
    path = Path(path)
    if not path.exists() and path.parent == Path(".") and path.stem in bundled_configs():
        path = bundled_config(path.stem)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(str(path), "file not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(str(path), f"invalid JSON ({exc.msg} at line {exc.lineno})") from None
    return Scenario.from_dict(data)


def _validate_net(s: Scenario) -> None:
    failures = s.net.validate()
    if failures:
        (i, j), report = failures[0]
        raise ConfigError(f"couplings[{i + 1}->{j + 1}]",
                          f"{report.condition} condition fails at s={report.violations[:3]}")


# -- single scenario ---------------------------------------------------------

@dataclass
class ScenarioResult:
    trajectories: dict[str, Trajectory]
    metrics: dict
    files: list[str] = field(default_factory=list)


def _trajectory_metrics(traj: Trajectory) -> dict:
    spread = np.asarray(max_pairwise(traj.states))
    settle = settle_index(spread, SYNC_THRESHOLD)
    return {
        "initial": sync_metrics(traj.states[0]).to_dict(),
        "final": sync_metrics(traj.final).to_dict(),
        "sup_max_pairwise": float(spread.max()),
        "final_dist_to_manifold": float(dist_to_manifold(traj.final)),
        "settle_time": None if settle is None else float(traj.times[settle]),
        "settle_threshold": SYNC_THRESHOLD,
        "samples": len(traj),
        "step": traj.step,
    }


def run_scenario(s: Scenario, out_dir=None, write: bool = True) -> ScenarioResult:
    """Integrate every requested frame from the same initial condition.

    Writes ``<name>_<frame>.csv`` and ``<name>_metrics.json`` into
    ``out_dir`` (or the config's output dir) when ``write`` is set.
    """
    _validate_net(s)
    connectivity = is_connected(build_graph(s.net))
    x0 = s.initial.realize(s.p)
    trajectories = {}
    for frame in s.frames:
        trajectories[frame] = simulate(s.system(frame), x0, s.t_end, s.integrator)
    metrics = {
        "scenario": s.name,
        "provenance": _provenance(s),
        "connectivity": connectivity.to_dict(),
        "frames": {frame: _trajectory_metrics(t) for frame, t in trajectories.items()},
    }
    files = []
    target = out_dir if out_dir is not None else s.output_dir
    if write and target is not None:
        target = Path(target)
        target.mkdir(parents=True, exist_ok=True)
        for frame, traj in trajectories.items():
            path = target / f"{s.name}_{frame}.csv"
            traj.to_csv(path)
            files.append(str(path))
        path = target / f"{s.name}_metrics.json"
        path.write_text(dumps(metrics))
        files.append(str(path))
    return ScenarioResult(trajectories, metrics, files)


def _provenance(s: Scenario, **extra) -> dict:
    return {
        "config_hash": s.config_hash(),
        "config": s.to_dict(),
        "seed": s.initial.seed,
        "integrator": s.integrator.to_dict(),
        "quadrature": s.quadrature.to_dict(),
        "version": __version__,
        **extra,
    }


# -- omega sweep ---------------------------------------------------------------

@dataclass
class SweepReport:
    Delta: float
    delta: float
    omegas: list[float]
    eps_grid: list[float]
    horizon: float
    runs: list[dict]
    omega_star: float | None
    trend: float | None
    clauses: dict
    provenance: dict

    @property
    def residuals(self) -> list[float]:
        return [r["residual"] for r in self.runs]

    def to_dict(self) -> dict:
        return {"Delta": self.Delta, "delta": self.delta, "omegas": self.omegas,
                "eps_grid": self.eps_grid, "horizon": self.horizon, "runs": self.runs,
                "omega_star": self.omega_star, "trend_spearman": self.trend,
                "clauses": self.clauses, "provenance": self.provenance}


def _batch_initials(seed: int, n: int, p: int, spread: float, center_radius: float) -> np.ndarray:
    children = np.random.SeedSequence(seed).spawn(n)
    return np.stack([sample_ball(np.random.default_rng(c), p, 0.5 * spread, center_radius)
                     for c in children])


def _sweep_run(s: Scenario, omega: float, horizon: float, x_attr: np.ndarray,
               x_stab: np.ndarray, delta: float, eps_grid, stab_r: float) -> dict:
    ispec = s.integrator
    ispec = replace(ispec, sample_dt=None, stride=max(1, ispec.steps_per_period // 16))
    system = s.system("original", omega)
    run = {"omega": omega}
    try:
        traj = simulate(system, np.concatenate([x_attr, x_stab]), horizon, ispec)
    except IntegrationError as exc:
        run.update(error=str(exc), blowup_time=exc.time, residual=math.inf,
                   residuals=None, clause_a=False, clause_b=False, clause_c=False)
        return run
    n_attr = len(x_attr)
    spread = np.asarray(max_pairwise(traj.states))       # (samples, batch)
    attr, stab = spread[:, :n_attr], spread[:, n_attr:]
    tail = traj.times >= (1.0 - TAIL_FRACTION) * horizon
    residuals = attr[tail].max(axis=0)
    bound = float(attr.max())
    settle = {}
    for eps in eps_grid:
        times = []
        for col in attr.T:
            k = settle_index(col, eps)
            times.append(None if k is None else float(traj.times[k]))
        settle[repr(eps)] = times
    run.update(
        residuals=[float(r) for r in residuals],
        residual=float(residuals.max()),
        initial_spread=[float(v) for v in attr[0]],
        sup_spread=bound,
        clause_b=bool(np.isfinite(bound)),
        settle_times=settle,
        clause_c=all(t is not None for times in settle.values() for t in times),
        stability_initial=[float(v) for v in stab[0]],
        stability_sup=float(stab.max()),
        clause_a=bool(stab.max() <= stab_r),
        step=traj.step,
    )
    return run


def omega_sweep(s: Scenario, Delta: float, delta: float, omegas, eps_grid=None,
                n_seeds: int = 5, seed: int | None = None, horizon: float | None = None,
                stability_eps: float | None = None, stability_r: float | None = None
                ) -> SweepReport:
    """Empirical check of practical synchronization across a grid of frequencies.

    For each ``omega`` the original system is integrated from ``n_seeds``
    initial conditions of spread at most ``Delta``.  Recorded per clause:

    * (b) the sup of the spread over the horizon is finite;
    * (c) every run settles below each ``eps`` in ``eps_grid`` (all >= delta);
    * (a) runs started within ``stability_eps`` (default ``delta/2``) stay below
      ``stability_r`` (default ``2*delta``).

    The residual of a run is the sup of its spread over the last 20% of the
    horizon.  ``omega_star`` is the smallest grid frequency whose residual is
    at most ``delta`` for every seed; ``trend`` is the Spearman correlation of
    the per-omega worst residual with omega.
    """
    omegas = [float(w) for w in omegas]
    if not omegas or any(b <= a for a, b in zip(omegas, omegas[1:])):
        raise ValueError("omega grid must be nonempty and increasing")
    if not Delta > delta > 0.0:
        raise ValueError("need Delta > delta > 0")
    eps_grid = [2.0 * delta] if eps_grid is None else [float(e) for e in eps_grid]
    if not eps_grid or any(e < delta for e in eps_grid):
        raise ValueError("every eps must be at least delta")
    if n_seeds < 1:
        raise ValueError("need at least one seed")
    seed = s.initial.seed if seed is None else seed
    seed = 0 if seed is None else seed
    horizon = horizon if horizon is not None else (s.horizon or default_horizon(omegas[0]))
    stab_eps = 0.5 * delta if stability_eps is None else stability_eps
    stab_r = 2.0 * delta if stability_r is None else stability_r
    center = s.initial.center_radius if s.initial.kind == "random" else 0.0

    x_attr = _batch_initials(seed, n_seeds, s.p, Delta, center)
    x_stab = _batch_initials(seed + 1, n_seeds, s.p, stab_eps, center)
    runs = [_sweep_run(s, w, horizon, x_attr, x_stab, delta, eps_grid, stab_r) for w in omegas]

    worst = [r["residual"] for r in runs]
    passing = [r["omega"] for r in runs if r["residual"] <= delta]
    omega_star = passing[0] if passing else None
    trend = None
    if len(set(worst)) > 1:
        trend = float(spearmanr(omegas, worst).statistic)
    above = [r for r in runs if omega_star is not None and r["omega"] >= omega_star]
    clauses = {
        name: {"passing_omegas": [r["omega"] for r in runs if r[f"clause_{name}"]],
               "holds_above_omega_star": bool(above) and all(r[f"clause_{name}"] for r in above)}
        for name in ("a", "b", "c")
    }
    provenance = _provenance(s, sweep_seed=seed, n_seeds=n_seeds,
                             stability_eps=stab_eps, stability_r=stab_r)
    return SweepReport(Delta, delta, omegas, eps_grid, horizon, runs, omega_star,
                       trend, clauses, provenance)


# -- averaging error study -------------------------------------------------------

def averaging_scaling_study(s: Scenario, omegas, horizon: float | None = None,
                            sample_dt: float | None = None) -> dict:
    """Sup distance between rotating-frame and averaged runs versus omega.

    Both runs start from the scenario's initial condition and are sampled on
    the same grid.  The returned ``slope`` is the least-squares log-log
    slope (``None`` when an error is zero).
    """
    omegas = [float(w) for w in omegas]
    if len(omegas) < 2:
        raise ValueError("need at least two frequencies")
    horizon = horizon if horizon is not None else (s.horizon or 10.0)
    sample_dt = sample_dt or s.integrator.sample_dt or 0.01
    ispec = replace(s.integrator, sample_dt=sample_dt)
    x0 = s.initial.realize(s.p)
    averaged = simulate(s.system("averaged"), x0, horizon, ispec)
    rows = []
    for w in omegas:
        rotating = simulate(s.system("rotating", w), x0, horizon, ispec)
        rows.append({"omega": w, "error": averaging_error(rotating, averaged)})
    errors = np.array([r["error"] for r in rows])
    slope = None
    if np.all(errors > 0.0):
        slope = float(np.polyfit(np.log(omegas), np.log(errors), 1)[0])
    return {"rows": rows, "slope": slope, "horizon": horizon, "sample_dt": sample_dt,
            "provenance": _provenance(s)}
