"""Simulation loop, relative-objective evaluation and parameter sweeps."""
from __future__ import annotations

import csv
import itertools
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from . import dynamics
from .dynamics import DynamicsParams
from .metrics import (TRAJECTORY_HEADER, PartisanSplit, TrajectoryFrame, histogram, summarize)
from .network import DirectedNetwork, as_opinions
from .objectives import ObjectiveKind, terminal_measure
from .policy import BanBudget, ShadowBanPolicy, compute_coefficients, solve_policy, write_policy_snapshot

log = logging.getLogger(__name__)

SWEEP_AXES = ("s_network", "s_edge", "epsilon", "omega")


class SimulationError(RuntimeError):
    def __init__(self, message: str, frame_index: int):
        super().__init__(f"{message} (at frame {frame_index})")
        self.frame_index = frame_index


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SimulationConfig:
    horizon_days: float = 365.0
    policy_interval_days: float = 1.0
    record_interval_days: float = 1.0
    objective: ObjectiveKind = ObjectiveKind.MAXIMIZE_MEAN
    budget: BanBudget = BanBudget()
    dynamics: DynamicsParams = DynamicsParams()
    seed: int = 0
    baseline: bool = False

    def __post_init__(self):
        object.__setattr__(self, "objective", ObjectiveKind.parse(self.objective))
        for name in ("horizon_days", "policy_interval_days", "record_interval_days"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ConfigError(f"{name} must be a positive number, got {v!r}")
        self.policy_steps  # validates divisibility
        self.record_every

    @property
    def policy_steps(self) -> int:
        k = round(self.horizon_days / self.policy_interval_days)
        if k < 1 or abs(k * self.policy_interval_days - self.horizon_days) > 1e-9 * self.horizon_days:
            raise ConfigError("policy_interval_days must divide horizon_days")
        return k

    @property
    def record_every(self) -> int:
        k = round(self.record_interval_days / self.policy_interval_days)
        if k < 1 or abs(k * self.policy_interval_days - self.record_interval_days) > 1e-9 * self.record_interval_days:
            raise ConfigError("record_interval_days must be a multiple of policy_interval_days")
        return k

    def to_dict(self) -> dict:
        d = asdict(self)
        d["objective"] = self.objective.value
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "SimulationConfig":
        """Build from a JSON-style dict; unknown or malformed keys name their path."""
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        nested = {"budget": BanBudget, "dynamics": DynamicsParams}
        top = {f for f in cls.__dataclass_fields__}
        kwargs = {}
        for key, value in data.items():
            if key not in top:
                raise ConfigError(f"unknown config key {key!r}")
            if key in nested:
                sub = nested[key]
                if not isinstance(value, dict):
                    raise ConfigError(f"{key}: expected an object")
                for k in value:
                    if k not in sub.__dataclass_fields__:
                        raise ConfigError(f"unknown config key {key}.{k}")
                try:
                    kwargs[key] = sub(**{k: _number(v, f"{key}.{k}") for k, v in value.items()})
                except (TypeError, ValueError) as exc:
                    raise ConfigError(f"{key}: {exc}") from None
            else:
                kwargs[key] = value
        if "baseline" in kwargs and not isinstance(kwargs["baseline"], bool):
            raise ConfigError("baseline: expected true or false")
        if "seed" in kwargs and not isinstance(kwargs["seed"], int):
            raise ConfigError("seed: expected an integer")
        try:
            return cls(**kwargs)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"objective: {exc}") from None

    def with_axis(self, axis: str, value: float) -> "SimulationConfig":
        if axis in ("s_network", "s_edge"):
            return replace(self, budget=replace(self.budget, **{axis: value}))
        if axis in ("epsilon", "omega"):
            return replace(self, dynamics=replace(self.dynamics, **{axis: value}))
        raise ConfigError(f"unknown sweep axis {axis!r}")


def _number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    return float(value)


@dataclass
class RunResult:
    frames: list[TrajectoryFrame]
    final_opinions: np.ndarray
    policies: dict[float, ShadowBanPolicy] = field(default_factory=dict)


RecordHook = Callable[[TrajectoryFrame, np.ndarray, ShadowBanPolicy], None]


def policy_at(config: SimulationConfig, network: DirectedNetwork, opinions, day: float = 0.0,
              pulls: np.ndarray | None = None) -> ShadowBanPolicy:
    """The policy in force from ``day``: the LP solution, or zero for baselines."""
    if config.baseline:
        return ShadowBanPolicy(np.zeros(network.edge_count), config.budget, day)
    coeffs = compute_coefficients(network, opinions, config.objective, config.dynamics, pulls)
    return solve_policy(coeffs, config.budget, day)


def run(config: SimulationConfig, network: DirectedNetwork, opinions,
        split: PartisanSplit = PartisanSplit(), on_record: RecordHook | None = None,
        keep_policies: bool = False) -> RunResult:
    """Re-solve the ban LP every policy interval and integrate in between.

    A frame is recorded at every ``record_interval_days`` and at the horizon.
    Each frame carries the policy solved at that instant.
    """
    theta = as_opinions(opinions, network.vertex_count).copy()
    steps = config.policy_steps
    every = config.record_every
    interval = config.policy_interval_days
    n_sub = dynamics.substeps(network, config.dynamics, interval)
    dt = interval / n_sub
    frames: list[TrajectoryFrame] = []
    policies: dict[float, ShadowBanPolicy] = {}

    for k in range(steps + 1):
        day = k * interval
        pulls = dynamics.edge_pulls(network, theta, config.dynamics)
        policy = policy_at(config, network, theta, day, pulls)
        if k % every == 0 or k == steps:
            frame = summarize(theta, policy, split, network, day)
            frames.append(frame)
            if keep_policies:
                policies[day] = policy
            if on_record is not None:
                on_record(frame, theta, policy)
        if k == steps:
            break
        u = None if config.baseline else policy.u
        for sub in range(n_sub):
            if sub == 0:  # same state the policy was solved from
                flow = pulls if u is None else pulls * (1.0 - u)
                rhs = np.bincount(network.target, weights=flow, minlength=network.vertex_count)
            else:
                rhs = dynamics.opinion_derivative(network, theta, u, config.dynamics)
            theta = theta + dt * rhs
            if not np.all(np.isfinite(theta)):
                raise SimulationError("non-finite opinion", len(frames))
    return RunResult(frames, theta, policies)


@dataclass(frozen=True)
class RelativeObjective:
    """Controlled terminal value relative to the no-ban baseline.

    ``value`` is oriented so that values above 1 are improvements: the
    variance ratio is inverted for ``min-var``.  When the baseline value is
    zero, ``is_ratio`` is False and ``value`` holds the oriented difference.
    """

    value: float
    is_ratio: bool
    controlled: float
    baseline: float


def relative_objective(kind, controlled: float, baseline: float) -> RelativeObjective:
    kind = ObjectiveKind.parse(kind)
    if kind is ObjectiveKind.MINIMIZE_VARIANCE:
        num, den = baseline, controlled
    else:
        num, den = controlled, baseline
    if den == 0:
        diff = controlled - baseline
        return RelativeObjective(-diff if kind is ObjectiveKind.MINIMIZE_VARIANCE else diff,
                                 False, controlled, baseline)
    return RelativeObjective(num / den, True, controlled, baseline)


def terminal_value(config: SimulationConfig, network, opinions) -> float:
    result = run(config, network, opinions)
    return terminal_measure(config.objective, result.final_opinions)


def run_relative(config: SimulationConfig, network: DirectedNetwork, opinions,
                 baseline_value: float | None = None) -> RelativeObjective:
    """Run controlled and baseline from the same state and compare terminal values."""
    if baseline_value is None:
        baseline_value = terminal_value(replace(config, baseline=True), network, opinions)
    controlled = terminal_value(config, network, opinions)
    return relative_objective(config.objective, controlled, baseline_value)


@dataclass(frozen=True)
class SweepGrid:
    s_network: tuple[float, ...] | None = None
    s_edge: tuple[float, ...] | None = None
    epsilon: tuple[float, ...] | None = None
    omega: tuple[float, ...] | None = None

    def __post_init__(self):
        for axis in SWEEP_AXES:
            values = getattr(self, axis)
            if values is None:
                continue
            values = tuple(float(v) for v in values)
            if not values:
                raise ConfigError(f"sweep axis {axis} is empty")
            object.__setattr__(self, axis, values)
        if not self.axes:
            raise ConfigError("sweep grid has no axes")

    @property
    def axes(self) -> tuple[str, ...]:
        return tuple(a for a in SWEEP_AXES if getattr(self, a) is not None)

    def points(self) -> list[dict[str, float]]:
        axes = self.axes
        return [dict(zip(axes, combo))
                for combo in itertools.product(*(getattr(self, a) for a in axes))]


@dataclass(frozen=True)
class SweepRow:
    point: dict
    relative_objective: float | None
    status: str


def _baseline_key(config: SimulationConfig):
    return (config.dynamics, config.horizon_days, config.policy_interval_days)


def _sweep_point(args):
    config, network, opinions, baseline_value = args
    try:
        rel = run_relative(config, network, opinions, baseline_value)
    except Exception as exc:  # one bad grid point must not stop the sweep
        return None, f"error: {type(exc).__name__}: {exc}"
    return rel.value, "ok" if rel.is_ratio else "ok-difference"


def _baseline_opinions(args):
    config, network, opinions = args
    return run(config, network, opinions).final_opinions


def sweep(base_config: SimulationConfig, grid: SweepGrid, network: DirectedNetwork, opinions,
          workers: int = 1, baselines: dict | None = None) -> list[SweepRow]:
    """Evaluate ``run_relative`` at every grid point, rows in grid order.

    Baselines depend only on the dynamics, so their terminal opinions are
    computed once per distinct dynamics setting and shared by every
    objective; pass ``baselines`` (a dict) to share them across calls.
    """
    points = grid.points()
    try:
        configs = [_apply(base_config, p) for p in points]
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    cache = {} if baselines is None else baselines
    todo = {}
    for cfg in configs:
        key = _baseline_key(cfg)
        if key not in cache and key not in todo:
            todo[key] = replace(cfg, baseline=True)

    def pmap(fn, items):
        if workers > 1 and len(items) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                return list(pool.map(fn, items))
        return [fn(it) for it in items]

    finals = pmap(_baseline_opinions, [(c, network, opinions) for c in todo.values()])
    cache.update(zip(todo.keys(), finals))
    results = pmap(_sweep_point, [(c, network, opinions, terminal_measure(c.objective, cache[_baseline_key(c)]))
                                  for c in configs])
    return [SweepRow(p, v, s) for p, (v, s) in zip(points, results)]


def _apply(config: SimulationConfig, point: dict) -> SimulationConfig:
    for axis, value in point.items():
        config = config.with_axis(axis, value)
    return config


# -- run directory ------------------------------------------------------------

def day_label(day: float) -> str:
    return str(int(day)) if float(day).is_integer() else repr(float(day))


def write_config(config: SimulationConfig, run_dir) -> Path:
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    path = run_dir / "config.json"
    path.write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n")
    return path


def read_config(path) -> SimulationConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return SimulationConfig.from_dict(data)


def _fmt(x) -> str:
    return x if isinstance(x, str) else repr(float(x))


def write_opinions(path, opinions, network: DirectedNetwork | None = None) -> None:
    ids = network.node_ids if network is not None and network.node_ids else None
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(("node", "opinion"))
        for i, op in enumerate(np.asarray(opinions).tolist()):
            w.writerow([ids[i] if ids else i, repr(op)])


def write_histogram(path, opinions, bins: int = 50) -> None:
    edges, dens = histogram(opinions, bins)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(("bin_left", "bin_right", "density"))
        for lo, hi, d in zip(edges[:-1].tolist(), edges[1:].tolist(), dens.tolist()):
            w.writerow([repr(lo), repr(hi), repr(d)])


def write_trajectory(path, frames: list[TrajectoryFrame]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(TRAJECTORY_HEADER)
        for f in frames:
            w.writerow([_fmt(x) if x != "" else "" for x in f.row()])


def run_to_directory(config: SimulationConfig, network: DirectedNetwork, opinions, run_dir,
                     policy_snapshots: bool = True, split: PartisanSplit = PartisanSplit(),
                     histogram_bins: int = 50) -> RunResult:
    """Execute ``run`` and write the standard run-directory files.

    With ``policy_snapshots`` each recorded policy goes to
    ``policy_day_<d>.csv`` next to the opinions it was solved from
    (``opinions_day_<d>.csv``).  Baseline runs write no snapshots.
    """
    run_dir = Path(run_dir)
    write_config(config, run_dir)
    write_histogram(run_dir / "histogram_initial.csv", opinions, histogram_bins)

    def hook(frame, theta, policy):
        if not policy_snapshots or config.baseline:
            return
        label = day_label(frame.day)
        count = write_policy_snapshot(network, policy, run_dir / f"policy_day_{label}.csv")
        write_opinions(run_dir / f"opinions_day_{label}.csv", theta, network)
        log.info("day=%s mean_strength=%.6g banned_edges=%d", label, policy.mean_strength, count)

    result = run(config, network, opinions, split, on_record=hook)
    write_trajectory(run_dir / "trajectory.csv", result.frames)
    write_opinions(run_dir / "final_opinions.csv", result.final_opinions, network)
    write_histogram(run_dir / "histogram_final.csv", result.final_opinions, histogram_bins)
    return result


def write_sweep(path, rows: list[SweepRow]) -> None:
    axes = list(rows[0].point) if rows else []
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([*axes, "relative_objective", "status"])
        for r in rows:
            rel = "" if r.relative_objective is None else repr(r.relative_objective)
            w.writerow([*(repr(r.point[a]) for a in axes), rel, r.status])
