"""Semi-implicit integration of the harvested logistic reaction-diffusion equation.

The domain is a square of side L split into ``m x m`` cells of side ``h``;
densities live at cell centres.  Reflecting boundaries are imposed by mirror
ghost cells, which makes the five-point Laplacian symmetric with zero row
sums, so diffusion neither creates nor destroys individuals.  Each step
solves

    (I - dt D Lap) u_new = u + dt [r u (1 - u/K) - Y(x, u)]

exactly in the discrete cosine basis that diagonalises the Neumann
Laplacian, and checks the residual of the linear solve.
"""
from __future__ import annotations

import functools
from typing import Callable, Optional

import numpy as np
import scipy.fft

from .errors import ConfigError, NumericalError
from .harvest import HarvestStrategy, removal_rate
from .landscape import Landscape
from .model import Field, ModelParams, NumericsConfig
from .observables import Trajectory, boundary_flux, chi_on_grid, total_population

RemovalTerm = Callable[[np.ndarray], np.ndarray]

# negatives smaller than this fraction of K are rounding and get clamped
UNDERSHOOT_TOL = 1e-12


def grid_size(landscape: Landscape, numerics: NumericsConfig) -> int:
    return landscape.n * numerics.refine


def initial_field(params: ModelParams, numerics: NumericsConfig, n: int = 50) -> Field:
    """Uniform field at carrying capacity on the grid refining an ``n x n`` lattice."""
    m = n * numerics.refine
    return Field(np.full((m, m), float(params.K)), params.L / m)


def laplacian_values(v: np.ndarray, h: float) -> np.ndarray:
    out = -4.0 * v
    out[1:, :] += v[:-1, :]
    out[:-1, :] += v[1:, :]
    out[:, 1:] += v[:, :-1]
    out[:, :-1] += v[:, 1:]
    # mirror ghosts: the missing neighbour equals the boundary cell itself
    out[0, :] += v[0, :]
    out[-1, :] += v[-1, :]
    out[:, 0] += v[:, 0]
    out[:, -1] += v[:, -1]
    out /= h * h
    return out


def laplacian(field: Field) -> np.ndarray:
    """Five-point Laplacian with zero-flux boundaries, individuals/km^4."""
    if field.m < 3:
        raise ConfigError("the Laplacian needs at least 3 x 3 cells")
    return laplacian_values(field.values, field.h)


class DiffusionSolver:
    """Solves ``(I - c Lap) x = b`` with ``c = dt * D`` on an ``m x m`` Neumann grid."""

    def __init__(self, m: int, h: float, c: float, tol: float = 1e-10):
        k = np.arange(m)
        lam = (2.0 - 2.0 * np.cos(np.pi * k / m)) / (h * h)
        self.m, self.h, self.c, self.tol = m, h, c, tol
        self.denominator = 1.0 + c * (lam[:, None] + lam[None, :])

    def __call__(self, rhs: np.ndarray) -> np.ndarray:
        coef = scipy.fft.dctn(rhs, type=2, norm="ortho")
        coef /= self.denominator
        x = scipy.fft.idctn(coef, type=2, norm="ortho")
        res = x - self.c * laplacian_values(x, self.h) - rhs
        scale = np.linalg.norm(rhs)
        if np.linalg.norm(res) > self.tol * max(scale, np.finfo(float).tiny):
            raise NumericalError(
                f"linear solve residual {np.linalg.norm(res) / scale:.3e} exceeds {self.tol:.1e}")
        return x


@functools.lru_cache(maxsize=16)
def _diffusion_solver(m: int, h: float, c: float, tol: float) -> DiffusionSolver:
    return DiffusionSolver(m, h, c, tol)


def make_removal(strategy: HarvestStrategy, chi: np.ndarray) -> RemovalTerm:
    return functools.partial(removal_rate, strategy, chi)


def growth(u: np.ndarray, params: ModelParams) -> np.ndarray:
    return params.r * u * (1.0 - u / params.K)


def _check(u: np.ndarray, params: ModelParams, t: float) -> np.ndarray:
    if not np.isfinite(u).all():
        raise NumericalError(f"non-finite density at t={t:g}")
    low = u.min()
    if low < 0.0:
        if low < -UNDERSHOOT_TOL * params.K:
            raise NumericalError(
                f"negative density {low:.3e} at t={t:g}; reduce dt")
        np.maximum(u, 0.0, out=u)
    return u


def _advance(u: np.ndarray, source: np.ndarray, solver: DiffusionSolver,
             params: ModelParams, dt: float, t: float) -> np.ndarray:
    try:
        new = solver(u + dt * source)
    except NumericalError as exc:
        raise NumericalError(f"t={t + dt:g}: {exc}") from None
    return _check(new, params, t + dt)


def step(field: Field, params: ModelParams, numerics: NumericsConfig,
         removal: RemovalTerm, t: float = 0.0) -> Field:
    """Advance one time step: implicit diffusion, explicit growth and removal."""
    u = field.values
    solver = _diffusion_solver(field.m, field.h, numerics.dt * params.D, numerics.linear_tol)
    source = growth(u, params) - removal(u)
    return Field(_advance(u, source, solver, params, numerics.dt, t), field.h)


def solve(landscape: Landscape, strategy: HarvestStrategy,
          params: ModelParams = ModelParams(), numerics: NumericsConfig = NumericsConfig(),
          initial: Optional[Field] = None, store_snapshots: bool = False) -> Trajectory:
    """Integrate from ``u = K`` (or ``initial``) to ``numerics.t_end``.

    Population, cumulative yield and boundary flux are recorded every
    ``record_every`` steps and at the final step; the cumulative yield itself
    is updated every step.
    """
    m = grid_size(landscape, numerics)
    u = initial_field(params, numerics, landscape.n) if initial is None else initial.copy()
    if u.m != m:
        raise ConfigError(f"initial field has {u.m} cells per side, expected {m}")
    chi = chi_on_grid(landscape.cells, m)
    removal = make_removal(strategy, chi)
    dt, h2 = numerics.dt, u.h * u.h
    steps = numerics.n_steps

    times, pops, cum, fluxes = [0.0], [total_population(u)], [0.0], [boundary_flux(u, chi, params.D)]
    snapshots = [u.copy()] if store_snapshots else None
    residuals = np.empty(steps)
    minima = np.empty(steps + 1)
    minima[0] = u.values.min()

    solver = _diffusion_solver(m, u.h, dt * params.D, numerics.linear_tol)
    v = u.values
    pop = pops[0]
    g, y = growth(v, params), removal(v)
    g_int, y_int = h2 * g.sum(), h2 * y.sum()
    running = 0.0
    for k in range(1, steps + 1):
        v = _advance(v, g - y, solver, params, dt, (k - 1) * dt)
        new_pop = h2 * v.sum()
        g, y = growth(v, params), removal(v)
        new_y_int = h2 * y.sum()
        residuals[k - 1] = (new_pop - pop) / dt - (g_int - y_int)
        running += 0.5 * dt * (y_int + new_y_int)
        minima[k] = v.min()
        pop, y_int, g_int = new_pop, new_y_int, h2 * g.sum()
        if k % numerics.record_every == 0 or k == steps:
            current = Field(v, u.h)
            times.append(k * dt)
            pops.append(pop)
            cum.append(running)
            fluxes.append(boundary_flux(current, chi, params.D))
            if store_snapshots:
                snapshots.append(current.copy())

    return Trajectory(
        times=np.array(times), population=np.array(pops),
        cumulative_yield=np.array(cum), flux=np.array(fluxes),
        balance_residual=residuals, min_density=minima,
        landscape_s=landscape.s, landscape_digest=landscape.digest(),
        strategy=strategy, params=params, numerics=numerics, snapshots=snapshots)
