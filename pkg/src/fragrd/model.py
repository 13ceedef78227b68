"""Physical constants, numerical controls and the density field on the PDE grid."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class ModelParams:
    """Constants of the logistic reaction-diffusion model.

    Units: D in km^2/year, r in 1/year, K and epsilon in individuals/km^2,
    L (side of the square domain) in km.
    """

    D: float = 50.0
    r: float = 1.0
    K: float = 1000.0
    L: float = 300.0
    epsilon: float = 10.0

    def __post_init__(self):
        for name in ("D", "r", "K", "L", "epsilon"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ConfigError(f"{name} must be a finite number, got {value!r}")
        # r = 0 is admitted so that pure diffusion can be run as a check
        if self.r < 0:
            raise ConfigError(f"r must be nonnegative, got {self.r}")
        for name in ("D", "K", "L", "epsilon"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")


@dataclass(frozen=True)
class NumericsConfig:
    refine: int = 4
    dt: float = 0.01
    t_end: float = 5.0
    record_every: int = 10
    linear_tol: float = 1e-10

    def __post_init__(self):
        if not isinstance(self.refine, int) or self.refine < 1:
            raise ConfigError(f"refine must be a positive integer, got {self.refine!r}")
        if not isinstance(self.record_every, int) or self.record_every < 1:
            raise ConfigError(f"record_every must be a positive integer, got {self.record_every!r}")
        for name in ("dt", "t_end", "linear_tol"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value) or value <= 0:
                raise ConfigError(f"{name} must be a positive number, got {value!r}")
        steps = self.t_end / self.dt
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            raise ConfigError(f"t_end={self.t_end} is not a whole number of steps dt={self.dt}")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))


@dataclass
class Field:
    """Densities at the centres of an ``m x m`` grid of square cells of side ``h``."""

    values: np.ndarray
    h: float

    @property
    def m(self) -> int:
        return self.values.shape[0]

    def copy(self) -> "Field":
        return Field(self.values.copy(), self.h)
