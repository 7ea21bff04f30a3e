"""Distribution summaries and partisan-bias accounting for ban policies."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .network import DirectedNetwork, as_opinions

QUANTILE_PROBS = (0.05, 0.25, 0.50, 0.75, 0.95)

TRAJECTORY_HEADER = ("day", "mean", "variance", "q05", "q25", "q50", "q75", "q95",
                     "mean_ban_strength", "ban_rate_low", "ban_rate_high")


@dataclass(frozen=True)
class PartisanSplit:
    """Users with opinion <= threshold are ``low``, the rest ``high``."""

    threshold: float = 0.5
    labels: tuple[str, str] = ("low", "high")

    def __post_init__(self):
        if not math.isfinite(self.threshold):
            raise ValueError("threshold must be finite")

    def high_mask(self, opinions) -> np.ndarray:
        return np.asarray(opinions) > self.threshold


@dataclass(frozen=True)
class TrajectoryFrame:
    day: float
    mean: float
    variance: float
    quantiles: tuple[float, ...]
    mean_ban_strength: float
    group_ban_rates: dict = field(default_factory=dict)

    def row(self) -> list:
        rates = [self.group_ban_rates.get(k) for k in ("low", "high")]
        return [self.day, self.mean, self.variance, *self.quantiles, self.mean_ban_strength,
                *("" if r is None else r for r in rates)]


def _u(policy, edge_count: int | None = None) -> np.ndarray:
    if policy is None:
        return np.zeros(edge_count or 0)
    return np.asarray(getattr(policy, "u", policy), dtype=float)


def shadow_ban_rate(network: DirectedNetwork, policy, opinions,
                    split: PartisanSplit = PartisanSplit()) -> dict:
    """Fraction of users per group with at least one banned out-edge.

    An empty group maps to ``None`` rather than 0.
    """
    theta = as_opinions(opinions, network.vertex_count)
    u = _u(policy, network.edge_count)
    banned_user = np.zeros(network.vertex_count, dtype=bool)
    banned_user[network.source[u > 0]] = True
    high = split.high_mask(theta)
    rates = {}
    for label, members in zip(split.labels, (~high, high)):
        size = int(members.sum())
        rates[label] = None if size == 0 else float(banned_user[members].sum() / size)
    return rates


@dataclass(frozen=True)
class PolarityStats:
    """Banned edges split by the direction they pull the follower."""

    upward_count: int = 0
    downward_count: int = 0
    neutral_count: int = 0
    upward_mass: float = 0.0
    downward_mass: float = 0.0
    neutral_mass: float = 0.0


def edge_polarity_ban_stats(network: DirectedNetwork, policy, opinions) -> PolarityStats:
    theta = as_opinions(opinions, network.vertex_count)
    u = _u(policy, network.edge_count)
    return polarity_from_edges(theta[network.source], theta[network.target], u)


def polarity_from_edges(source_opinion, target_opinion, u) -> PolarityStats:
    """Polarity counts from per-edge opinions; only ``u > 0`` edges count."""
    u = np.asarray(u, dtype=float)
    src = np.asarray(source_opinion, dtype=float)
    tgt = np.asarray(target_opinion, dtype=float)
    on = u > 0
    up = on & (src > tgt)
    down = on & (src < tgt)
    flat = on & (src == tgt)
    return PolarityStats(int(up.sum()), int(down.sum()), int(flat.sum()),
                         float(u[up].sum()), float(u[down].sum()), float(u[flat].sum()))


def summarize(opinions, policy=None, split: PartisanSplit = PartisanSplit(),
              network: DirectedNetwork | None = None, day: float = 0.0) -> TrajectoryFrame:
    """One trajectory frame.  Group ban rates need ``network``; without it they are empty."""
    theta = np.asarray(opinions, dtype=float)
    if theta.size == 0:
        raise ValueError("cannot summarise an empty opinion vector")
    u = _u(policy, network.edge_count if network is not None else 0)
    variance = float(theta.var(ddof=1)) if theta.size > 1 else 0.0
    rates = shadow_ban_rate(network, u, theta, split) if network is not None else {}
    return TrajectoryFrame(
        day=float(day),
        mean=float(theta.mean()),
        variance=variance,
        quantiles=tuple(float(q) for q in np.quantile(theta, QUANTILE_PROBS, method="linear")),
        mean_ban_strength=float(u.mean()) if u.size else 0.0,
        group_ban_rates=rates,
    )


def histogram(opinions, bin_count: int) -> tuple[np.ndarray, np.ndarray]:
    """Equal-width density histogram on [0, 1]; returns (edges, densities)."""
    if int(bin_count) != bin_count or bin_count < 1:
        raise ValueError(f"bin_count must be a positive integer, got {bin_count}")
    theta = np.asarray(opinions, dtype=float)
    if theta.size == 0:
        raise ValueError("cannot histogram an empty opinion vector")
    dens, edges = np.histogram(theta, bins=int(bin_count), range=(0.0, 1.0), density=True)
    return edges, dens
