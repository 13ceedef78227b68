"""Built-in analytic self-checks, run by ``fragrd verify``."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, List, Optional

import numpy as np

from .harvest import HarvestStrategy
from .landscape import GeneratorConfig, Landscape, aggregation_index, generate
from .model import Field, ModelParams, NumericsConfig
from .observables import annual_yield
from .solver import solve


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


def pair_count_oracle(mask) -> int:
    """Exhaustive count of protected 4-neighbour pairs, one cell at a time."""
    rows, cols = len(mask), len(mask[0])
    count = 0
    for i in range(rows):
        for j in range(cols):
            if mask[i][j] != 0:
                continue
            if j + 1 < cols and mask[i][j + 1] == 0:
                count += 1
            if i + 1 < rows and mask[i + 1][j] == 0:
                count += 1
    return count


def toroidal_aggregation_index(cells) -> int:
    """Deliberately wrong variant that wraps around the lattice edges (fault injection)."""
    p = np.asarray(cells) == 0
    return int(np.count_nonzero(p & np.roll(p, 1, axis=0)) + np.count_nonzero(p & np.roll(p, 1, axis=1)))


def _check_equilibrium(params, numerics, landscape):
    worst = 0.0
    for strategy in (HarvestStrategy.quasi_constant(0.0), HarvestStrategy.proportional(0.0)):
        traj = solve(landscape, strategy, params, numerics)
        target = params.K * params.L ** 2
        worst = max(worst, float(np.max(np.abs(traj.population - target))) / target)
    return CheckResult("uniform equilibrium", worst < 1e-10,
                       f"max |P(t) - K L^2| / K L^2 = {worst:.2e} (limit 1e-10)")


def _check_conservation(params, numerics, landscape, rng):
    params = replace(params, r=0.0)
    numerics = replace(numerics, t_end=500 * numerics.dt)
    m = landscape.n * numerics.refine
    u0 = Field(rng.uniform(0.0, 2.0 * params.K, size=(m, m)), params.L / m)
    traj = solve(landscape, HarvestStrategy.proportional(0.0), params, numerics, initial=u0)
    drift = float(np.max(np.abs(traj.population - traj.population[0])) / traj.population[0])
    return CheckResult("pure diffusion conservation", drift < 1e-8,
                       f"max |P(t) - P(0)| / P(0) over 500 steps = {drift:.2e} (limit 1e-8)")


def _check_uniform_proportional(params, numerics):
    numerics = replace(numerics, t_end=20.0, refine=1)
    traj = solve(Landscape.uniform(50), HarvestStrategy.proportional(0.5), params, numerics)
    expected = params.K * (1.0 - 0.5 / params.r)
    density = traj.population[-1] / params.L ** 2
    err = abs(density / expected - 1.0)
    return CheckResult("uniform proportional steady state", err < 1e-3,
                       f"P(20)/L^2 = {density:.4f}, expected {expected:g} (rel. err {err:.2e}, limit 1e-3)")


def _check_quota_yield(params, numerics, landscape):
    quota = 100.0
    traj = solve(landscape, HarvestStrategy.quasi_constant(quota, params.epsilon), params, numerics)
    above = bool(traj.min_density.min() > params.epsilon)
    area = (landscape.cells == 1).sum() * (params.L / landscape.n) ** 2
    t = min(5.0, numerics.t_end)
    err = abs(annual_yield(traj, t) / (quota * area) - 1.0)
    return CheckResult("constant-quota yield identity", above and err < 1e-8,
                       f"R({t:g}) = quota x harvested area to rel. err {err:.2e} (limit 1e-8), "
                       f"min u > epsilon: {above}")


def _check_time_step(params, numerics, landscape):
    strategy = HarvestStrategy.proportional(0.5)
    coarse = solve(landscape, strategy, params, numerics).population[-1]
    fine = solve(landscape, strategy, params, replace(numerics, dt=numerics.dt / 2)).population[-1]
    change = abs(coarse / fine - 1.0)
    return CheckResult("time-step refinement", change < 1e-3,
                       f"halving dt={numerics.dt:g} changes P({numerics.t_end:g}) by "
                       f"{100 * change:.3g}% (limit 0.1%)")


def _check_aggregation(index_fn, rng, cases=200):
    for _ in range(cases):
        n = int(rng.integers(2, 31))
        mask = (rng.random((n, n)) >= rng.uniform(0.05, 0.5)).astype(np.int8)
        got, want = index_fn(mask), pair_count_oracle(mask.tolist())
        if got != want:
            return CheckResult("aggregation index oracle", False,
                               f"{n}x{n} mask: index {got} != exhaustive count {want}")
    return CheckResult("aggregation index oracle", True, f"{cases} random masks agree")


def run_checks(dt: Optional[float] = None, refine: int = 2, seed: int = 0,
               index_fn: Callable = aggregation_index) -> List[CheckResult]:
    """Run every check; ``dt`` and ``index_fn`` exist to inject faults."""
    params = ModelParams()
    numerics = NumericsConfig(refine=refine, t_end=5.0)
    if dt is not None:
        numerics = replace(numerics, dt=dt, record_every=1)
    rng = np.random.default_rng(seed)
    landscape = generate(GeneratorConfig(50, 0.1, 94, seed=seed + 1))
    return [
        _check_equilibrium(params, numerics, landscape),
        _check_conservation(params, numerics, landscape, rng),
        _check_uniform_proportional(params, numerics),
        _check_quota_yield(params, numerics, landscape),
        _check_time_step(params, numerics, landscape),
        _check_aggregation(index_fn, rng),
    ]
