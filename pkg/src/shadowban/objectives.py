"""Opinion rewards and their per-user gradients."""
from __future__ import annotations

from enum import Enum

import numpy as np


class ObjectiveKind(str, Enum):
    MAXIMIZE_MEAN = "max-mean"
    MINIMIZE_VARIANCE = "min-var"
    MAXIMIZE_VARIANCE = "max-var"

    @classmethod
    def parse(cls, token) -> "ObjectiveKind":
        if isinstance(token, cls):
            return token
        try:
            return cls(str(token).strip().lower())
        except ValueError:
            choices = ", ".join(k.value for k in cls)
            raise ValueError(f"unknown objective {token!r}; expected one of {choices}") from None

    @property
    def is_variance(self) -> bool:
        return self is not ObjectiveKind.MAXIMIZE_MEAN


def _check(kind: ObjectiveKind, theta: np.ndarray) -> None:
    if theta.size == 0:
        raise ValueError("reward needs at least one opinion")
    if kind.is_variance and theta.size < 2:
        raise ValueError("variance objectives need at least two opinions")


def reward(kind, opinions, center: float | None = None) -> float:
    """Instantaneous reward r(theta).

    Variance objectives use the 1/(n-1) sample normalisation; ``min-var``
    returns the negative variance.  ``center`` replaces the sample mean in
    the variance sum (used to differentiate with the mean held fixed).
    """
    kind = ObjectiveKind.parse(kind)
    theta = np.asarray(opinions, dtype=float)
    _check(kind, theta)
    if kind is ObjectiveKind.MAXIMIZE_MEAN:
        return float(theta.mean())
    mu = theta.mean() if center is None else center
    var = float(np.sum((theta - mu) ** 2) / (theta.size - 1))
    return var if kind is ObjectiveKind.MAXIMIZE_VARIANCE else -var


def reward_gradient(kind, opinions) -> np.ndarray:
    """dr/dtheta_i: 1/n for the mean, +-2(theta_i - mu)/(n-1) for the variance."""
    kind = ObjectiveKind.parse(kind)
    theta = np.asarray(opinions, dtype=float)
    _check(kind, theta)
    n = theta.size
    if kind is ObjectiveKind.MAXIMIZE_MEAN:
        return np.full(n, 1.0 / n)
    grad = (2.0 / (n - 1)) * (theta - theta.mean())
    return grad if kind is ObjectiveKind.MAXIMIZE_VARIANCE else -grad


def terminal_measure(kind, opinions) -> float:
    """Reported terminal value: the mean, or the (unsigned) variance."""
    kind = ObjectiveKind.parse(kind)
    if kind is ObjectiveKind.MAXIMIZE_MEAN:
        return reward(kind, opinions)
    return reward(ObjectiveKind.MAXIMIZE_VARIANCE, opinions)
