"""Per-step shadow-ban policies.

At each policy instant the ban vector ``u`` maximises the reward rate
``sum_e B_e (1 - u_e)`` subject to ``sum_e u_e <= s_network * |E|`` and
``0 <= u_e <= s_edge``.  One budget row plus box constraints make this a
fractional knapsack, solved exactly by filling the most negative ``B`` first.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dynamics import DynamicsParams, edge_pulls
from .network import DirectedNetwork, as_opinions
from .objectives import reward_gradient

FEASIBILITY_SLACK = 1e-9
ORACLE_EDGE_LIMIT = 1000


@dataclass(frozen=True)
class BanBudget:
    s_network: float = 0.05
    s_edge: float = 1.0

    def __post_init__(self):
        for name in ("s_network", "s_edge"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} must lie in [0, 1], got {v}")

    def total(self, edge_count: int) -> float:
        return self.s_network * edge_count


@dataclass(frozen=True, eq=False)
class ShadowBanPolicy:
    u: np.ndarray
    budget: BanBudget
    day: float = 0.0

    @classmethod
    def zero(cls, edge_count: int, budget: BanBudget = BanBudget(0.0, 0.0), day: float = 0.0):
        return cls(np.zeros(edge_count), budget, day)

    @property
    def mean_strength(self) -> float:
        return float(self.u.mean()) if self.u.size else 0.0

    @property
    def banned(self) -> np.ndarray:
        return self.u > 0

    def is_feasible(self) -> bool:
        u = self.u
        return bool(
            np.all(u >= 0)
            and np.all(u <= self.budget.s_edge)
            and u.sum() <= self.budget.total(u.size) + FEASIBILITY_SLACK
        )


def lp_value(coeffs, u) -> float:
    """Objective of the ban LP: ``sum_e B_e (1 - u_e)``."""
    coeffs = np.asarray(coeffs, dtype=float)
    return float(np.sum(coeffs * (1.0 - np.asarray(u, dtype=float))))


def compute_coefficients(network: DirectedNetwork, opinions, kind, params: DynamicsParams,
                         pulls: np.ndarray | None = None) -> np.ndarray:
    """``B_e = (dr/dtheta_target) * rate_e * f(theta_source - theta_target)``.

    ``pulls`` may pass in a precomputed ``edge_pulls`` for the same state.
    """
    theta = as_opinions(opinions, network.vertex_count)
    grad = reward_gradient(kind, theta)
    if pulls is None:
        pulls = edge_pulls(network, theta, params)
    return grad[network.target] * pulls


def _fill_count(capacity: float, s_edge: float, m: int) -> tuple[int, float]:
    if capacity >= m * s_edge:
        return m, 0.0
    full = math.floor(capacity / s_edge)
    rest = capacity - full * s_edge
    if rest < 0:
        full, rest = full - 1, rest + s_edge
    return full, min(max(rest, 0.0), s_edge)


def solve_policy(coeffs, budget: BanBudget, day: float = 0.0) -> ShadowBanPolicy:
    """Exact greedy solution of the ban LP in O(|E| log |E|).

    Negative-coefficient edges are banned at full ``s_edge`` in ascending
    order of ``B`` (ties by edge index) until the budget runs out; the next
    edge takes the remainder.  Non-negative edges are never banned.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    if not np.all(np.isfinite(coeffs)):
        raise ValueError("coefficients must be finite")
    m = coeffs.size
    u = np.zeros(m)
    capacity = budget.total(m)
    if budget.s_edge == 0 or capacity <= 0 or m == 0:
        return ShadowBanPolicy(u, budget, day)

    negative = np.flatnonzero(coeffs < 0)
    full, rest = _fill_count(capacity, budget.s_edge, m)
    needed = full + (rest > 0)
    if needed < negative.size:
        # only the `needed` most negative edges matter; keep every tie at the cut
        vals = coeffs[negative]
        cut = np.partition(vals, needed - 1)[needed - 1]
        negative = negative[vals <= cut]
    ranked = negative[np.lexsort((negative, coeffs[negative]))]
    u[ranked[:full]] = budget.s_edge
    if rest > 0 and full < ranked.size:
        u[ranked[full]] = rest
    return ShadowBanPolicy(u, budget, day)


def solve_policy_oracle(coeffs, budget: BanBudget, day: float = 0.0,
                        limit: int = ORACLE_EDGE_LIMIT) -> ShadowBanPolicy:
    """Solve the ban LP through its dual, by enumerating dual breakpoints.

    The dual is ``min_{lam >= 0} lam * C + s_edge * sum_e max(0, -B_e - lam)``
    (plus the constant ``sum B``), a convex piecewise-linear function whose
    minimum sits at ``lam = 0`` or some ``lam = -B_e``.  Every breakpoint is
    evaluated in O(|E|), giving O(|E|^2) overall, and the primal is recovered
    from complementary slackness.  No sorting is involved.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    m = coeffs.size
    if m > limit:
        raise ValueError(f"oracle accepts at most {limit} edges, got {m}")
    capacity = budget.total(m)
    s = budget.s_edge
    gain = -coeffs  # value of banning one unit on each edge
    if m == 0 or s == 0 or capacity <= 0:
        return ShadowBanPolicy(np.zeros(m), budget, day)

    candidates = np.concatenate([[0.0], gain[gain > 0]])
    above = gain[None, :] - candidates[:, None]
    dual = candidates * capacity + s * np.maximum(0.0, above).sum(axis=1)
    # Flat dual segments (or underflow) can tie several breakpoints; only
    # those whose strictly-better edges fit the budget give a feasible primal.
    fits = s * (above > 0).sum(axis=1) <= capacity + FEASIBILITY_SLACK
    dual[~fits] = np.inf
    best = dual == dual.min()
    lam = candidates[best].max()

    u = np.where(gain > lam, s, 0.0)
    at_price = np.flatnonzero((gain == lam) & (gain > 0))
    left = capacity - u.sum()
    for e in at_price:  # edges priced exactly at lam share whatever budget is left
        take = min(s, max(left, 0.0))
        u[e] = take
        left -= take
    return ShadowBanPolicy(u, budget, day)


def realize_stochastic(policy, seed) -> np.ndarray:
    """Boolean mask of edges whose content is hidden, each with probability ``u_e``.

    ``seed`` may be an int or an existing ``numpy.random.Generator``.
    """
    u = np.asarray(getattr(policy, "u", policy), dtype=float)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return rng.random(u.shape) < u


def write_policy_snapshot(network: DirectedNetwork, policy: ShadowBanPolicy, path) -> int:
    """Write ``source,target,u`` rows for banned edges; returns the row count."""
    path = Path(path)
    ids = network.node_ids or None
    idx = np.flatnonzero(policy.u > 0)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(("source", "target", "u"))
        for e in idx.tolist():
            s, t = int(network.source[e]), int(network.target[e])
            w.writerow([ids[s] if ids else s, ids[t] if ids else t, repr(float(policy.u[e]))])
    return int(idx.size)
