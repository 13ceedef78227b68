"""Removal terms for quasi-constant-yield and proportional harvesting."""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ConfigError


class HarvestKind(str, Enum):
    QUASI_CONSTANT_YIELD = "constant"
    PROPORTIONAL = "proportional"


@dataclass(frozen=True)
class HarvestStrategy:
    """Which removal law to apply and how hard.

    ``intensity`` is the quota delta (individuals/km^2/year) for
    quasi-constant-yield harvesting and the effort E (1/year) for proportional
    harvesting.  ``epsilon`` is the density below which the quota is
    progressively withdrawn; proportional harvesting ignores it.
    """

    kind: HarvestKind
    intensity: float
    epsilon: float = 10.0

    def __post_init__(self):
        try:
            object.__setattr__(self, "kind", HarvestKind(self.kind))
        except ValueError:
            raise ConfigError(f"unknown harvesting strategy {self.kind!r}; "
                              f"expected one of {[k.value for k in HarvestKind]}") from None
        if not math.isfinite(self.intensity) or self.intensity < 0:
            raise ConfigError(f"intensity must be a nonnegative number, got {self.intensity!r}")
        if not math.isfinite(self.epsilon) or self.epsilon <= 0:
            raise ConfigError(f"epsilon must be positive, got {self.epsilon!r}")

    @classmethod
    def quasi_constant(cls, quota: float, epsilon: float = 10.0) -> "HarvestStrategy":
        return cls(HarvestKind.QUASI_CONSTANT_YIELD, quota, epsilon)

    @classmethod
    def proportional(cls, effort: float) -> "HarvestStrategy":
        return cls(HarvestKind.PROPORTIONAL, effort)

    def with_intensity(self, intensity: float) -> "HarvestStrategy":
        return HarvestStrategy(self.kind, intensity, self.epsilon)


def rho_eps(s, epsilon: float):
    """Threshold function: 0 for s <= 0, s/epsilon on (0, epsilon), 1 from epsilon on."""
    s = np.asarray(s, dtype=float)
    out = np.where(s >= epsilon, 1.0, np.where(s > 0.0, s / epsilon, 0.0))
    return out[()] if out.ndim == 0 else out


def removal_rate(strategy: HarvestStrategy, chi: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Pointwise removal Y(x, u) in individuals/km^2/year.

    ``chi`` is 1 on harvested nodes and 0 on protected ones.  Below the
    threshold the quota is evaluated as ``(delta/epsilon) * u`` so that it
    coincides bit for bit with proportional harvesting at effort
    ``delta/epsilon``.
    """
    u = np.asarray(u, dtype=float)
    if strategy.kind is HarvestKind.PROPORTIONAL:
        rate = strategy.intensity * u
    else:
        delta, eps = strategy.intensity, strategy.epsilon
        rate = np.where(u >= eps, delta, np.where(u > 0.0, (delta / eps) * u, 0.0))
    return rate * chi
