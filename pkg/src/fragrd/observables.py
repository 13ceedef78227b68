"""Population totals, annual yields, relative losses and reserve boundary flux."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .model import Field


@dataclass
class Trajectory:
    """Time series recorded by :func:`fragrd.solver.solve`.

    ``cumulative_yield`` is the running space-time integral of the removal
    term, updated every step by the trapezoidal rule; ``population`` and
    ``flux`` are sampled at the same recorded times.  The per-step arrays
    ``balance_residual`` (individuals/year, one entry per step) and
    ``min_density`` (lowest density on the grid, one entry per step plus the
    initial state) track the mass budget and the threshold regime.
    """

    times: np.ndarray
    population: np.ndarray
    cumulative_yield: np.ndarray
    flux: np.ndarray
    balance_residual: np.ndarray
    min_density: np.ndarray
    landscape_s: int
    landscape_digest: str
    strategy: object
    params: object
    numerics: object
    snapshots: Optional[List[Field]] = field(default=None, repr=False)

    def population_at(self, t: float) -> float:
        return float(_interp(self.times, self.population, t))

    def flux_at(self, t: float) -> float:
        return float(_interp(self.times, self.flux, t))


def _interp(times, values, t):
    if not times[0] - 1e-9 <= t <= times[-1] + 1e-9:
        raise ValueError(f"t={t} outside recorded range [{times[0]}, {times[-1]}]")
    return np.interp(t, times, values)


def total_population(u: Field) -> float:
    """Midpoint-rule integral of the density over the domain."""
    return float(u.h * u.h * np.sum(u.values))


def annual_yield(trajectory: Trajectory, t: float) -> float:
    """Harvest removed during the year (t-1, t]; linear interpolation between records."""
    if t < 1:
        raise ValueError(f"annual yield needs t >= 1, got {t}")
    end = _interp(trajectory.times, trajectory.cumulative_yield, t)
    start = _interp(trajectory.times, trajectory.cumulative_yield, t - 1)
    return float(end - start)


def relative_loss(values) -> float:
    """Percentage lost by the worst member relative to the best: 100 (max - min) / max."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("relative loss of an empty collection")
    hi = v.max()
    if not hi > 0:
        raise ValueError("relative loss needs a positive maximum")
    return float(100.0 * (hi - v.min()) / hi)


def chi_on_grid(cells: np.ndarray, m: int) -> np.ndarray:
    """Expand a landscape mask to the PDE grid, one refine x refine block per cell."""
    n = cells.shape[0]
    if m % n:
        raise ValueError(f"PDE grid of {m} nodes is not a refinement of a {n}-cell lattice")
    k = m // n
    return np.kron(np.asarray(cells, dtype=float), np.ones((k, k)))


def boundary_flux(u: Field, landscape, D: float) -> float:
    """Net diffusive flow from protected into harvested nodes, individuals/year.

    Sums ``D (u_protected - u_harvested) / h * h`` over every grid edge that
    separates a protected node from a harvested one.  ``landscape`` is a
    :class:`~fragrd.landscape.Landscape` or a 0/1 array on the lattice or on
    the PDE grid itself.
    """
    cells = getattr(landscape, "cells", landscape)
    chi = chi_on_grid(np.asarray(cells), u.m)
    v = u.values
    # (chi_b - chi_a) is +1 when a is protected and b harvested, -1 for the reverse
    horizontal = np.sum((chi[:, 1:] - chi[:, :-1]) * (v[:, :-1] - v[:, 1:]))
    vertical = np.sum((chi[1:, :] - chi[:-1, :]) * (v[:-1, :] - v[1:, :]))
    return float(D * (horizontal + vertical))


def interface_length(cells: np.ndarray, h: float) -> float:
    """Length of the protected/harvested interface on a grid of spacing ``h``."""
    c = np.asarray(cells)
    mixed = np.count_nonzero(c[:, 1:] != c[:, :-1]) + np.count_nonzero(c[1:, :] != c[:-1, :])
    return float(mixed * h)
