import numpy as np
import pytest

from fragrd.errors import ConfigError, NumericalError
from fragrd.harvest import HarvestStrategy
from fragrd.landscape import GeneratorConfig, Landscape, generate
from fragrd.model import Field, ModelParams, NumericsConfig
from fragrd.observables import annual_yield, total_population
from fragrd.solver import (DiffusionSolver, initial_field, laplacian, make_removal, solve, step)


def ghost_padded_laplacian(v, h):
    """Reference operator: explicit mirror padding, then the plain 5-point stencil."""
    p = np.pad(v, 1, mode="edge")
    return (p[:-2, 1:-1] + p[2:, 1:-1] + p[1:-1, :-2] + p[1:-1, 2:] - 4 * v) / h**2


def cell_centres(m, L):
    h = L / m
    x = (np.arange(m) + 0.5) * h
    return np.meshgrid(x, x, indexing="ij")


def logistic(t, u0, rate, capacity):
    return capacity / (1.0 + (capacity / u0 - 1.0) * np.exp(-rate * t))


@pytest.fixture(scope="module")
def landscape():
    return generate(GeneratorConfig(50, 0.1, 94, seed=11))


class TestInitialField:
    def test_carrying_capacity(self):
        f = initial_field(ModelParams(), NumericsConfig())
        assert f.values.shape == (200, 200)
        assert (f.values == 1000.0).all()

    def test_unit_capacity(self):
        f = initial_field(ModelParams(K=1.0), NumericsConfig(refine=1))
        assert (f.values == 1.0).all()

    def test_total(self):
        p = ModelParams()
        assert total_population(initial_field(p, NumericsConfig())) == pytest.approx(p.K * p.L**2, rel=1e-14)


class TestLaplacian:
    def test_uniform(self):
        assert not laplacian(Field(np.full((20, 20), 3.0), 1.5)).any()

    def test_matches_padded_reference(self, rng):
        v = rng.random((17, 23))
        np.testing.assert_allclose(laplacian(Field(v, 0.7)), ghost_padded_laplacian(v, 0.7),
                                   rtol=1e-12, atol=1e-12)

    def test_sums_to_zero(self, rng):
        f = Field(rng.random((40, 40)) * 1000, 7.5)
        assert abs(laplacian(f).sum() * f.h**2) < 1e-9

    def test_cosine_eigenfunction_second_order(self):
        L = 300.0
        errors = []
        for m in (25, 50, 100):
            x1, _ = cell_centres(m, L)
            u = np.cos(np.pi * x1 / L)
            err = np.abs(laplacian(Field(u, L / m)) + (np.pi / L) ** 2 * u).max()
            errors.append(err)
        ratios = [errors[i] / errors[i + 1] for i in range(2)]
        assert all(3.9 < r < 4.1 for r in ratios)

    def test_too_small(self):
        with pytest.raises(ConfigError):
            laplacian(Field(np.ones((2, 2)), 1.0))


class TestDiffusionSolver:
    def test_inverts_operator(self, rng):
        m, h, c = 30, 2.0, 0.5
        x = rng.random((m, m))
        b = x - c * ghost_padded_laplacian(x, h)
        np.testing.assert_allclose(DiffusionSolver(m, h, c)(b), x, rtol=1e-10)

    def test_residual_contract(self):
        solver = DiffusionSolver(10, 1.0, 1.0, tol=1e-10)
        solver.denominator = solver.denominator * 1.01  # corrupt the inverse
        with pytest.raises(NumericalError, match="residual"):
            solver(np.random.default_rng(0).random((10, 10)))


class TestStep:
    def test_capacity_is_fixed_point(self, landscape):
        p, num = ModelParams(), NumericsConfig()
        f = initial_field(p, num)
        removal = make_removal(HarvestStrategy.quasi_constant(0.0), np.ones((200, 200)))
        for k in range(20):
            f = step(f, p, num, removal, k * num.dt)
        assert np.abs(f.values / p.K - 1).max() < 1e-12

    def test_pure_diffusion_conserves(self, rng):
        p, num = ModelParams(r=0.0), NumericsConfig(refine=1)
        f = Field(rng.uniform(0, 2000, (50, 50)), 6.0)
        p0 = total_population(f)
        removal = make_removal(HarvestStrategy.proportional(0.0), np.ones((50, 50)))
        for k in range(50):
            f = step(f, p, num, removal, k * num.dt)
            assert abs(total_population(f) / p0 - 1) < num.linear_tol
        assert np.ptp(f.values) < 2000  # smoothing happened

    def test_negative_overshoot_is_an_error(self):
        # quota far above epsilon/dt drives sub-threshold densities negative
        p, num = ModelParams(), NumericsConfig(refine=1)
        f = Field(np.full((50, 50), 5.0), 6.0)
        removal = make_removal(HarvestStrategy.quasi_constant(5000.0), np.ones((50, 50)))
        with pytest.raises(NumericalError, match="negative density"):
            step(f, p, num, removal, 0.0)

    def test_non_finite_is_an_error(self):
        p, num = ModelParams(), NumericsConfig(refine=1)
        f = Field(np.full((50, 50), 1000.0), 6.0)
        f.values[3, 3] = np.nan
        removal = make_removal(HarvestStrategy.proportional(0.0), np.ones((50, 50)))
        with pytest.raises(NumericalError):
            step(f, p, num, removal, 0.0)

    def test_uniform_proportional_limit(self):
        p, num = ModelParams(), NumericsConfig(refine=1, t_end=30.0)
        traj = solve(Landscape.uniform(50), HarvestStrategy.proportional(0.5), p, num)
        assert traj.population[-1] / p.L**2 == pytest.approx(500.0, rel=1e-3)


class TestSolve:
    def test_no_harvest_stays_at_capacity(self, landscape):
        p = ModelParams()
        for strategy in (HarvestStrategy.quasi_constant(0.0), HarvestStrategy.proportional(0.0)):
            traj = solve(landscape, strategy, p, NumericsConfig(refine=2))
            assert np.abs(traj.population / (p.K * p.L**2) - 1).max() < 1e-10
            assert annual_yield(traj, 5.0) == 0.0

    def test_constant_quota_yield_identity(self, landscape):
        p, quota = ModelParams(), 50.0
        traj = solve(landscape, HarvestStrategy.quasi_constant(quota), p, NumericsConfig(refine=2))
        assert traj.min_density.min() > p.epsilon
        assert annual_yield(traj, 5.0) == pytest.approx(quota * 0.9 * p.L**2, rel=1e-8)

    def test_uniform_proportional_follows_logistic(self):
        p, E = ModelParams(), 0.5
        errors = []
        for dt in (0.01, 0.005, 0.0025):
            num = NumericsConfig(refine=1, dt=dt, t_end=5.0, record_every=round(0.05 / dt))
            traj = solve(Landscape.uniform(50), HarvestStrategy.proportional(E), p, num)
            exact = logistic(traj.times, p.K, p.r - E, p.K * (1 - E / p.r))
            errors.append(np.abs(traj.population / p.L**2 / exact - 1).max())
            assert (np.diff(traj.population) < 0).all()
        # explicit reaction term: first order in the time step
        assert 1.9 < errors[0] / errors[1] < 2.1 and 1.9 < errors[1] / errors[2] < 2.1
        assert errors[-1] < 1e-3

    def test_mass_balance_every_step(self, landscape):
        p = ModelParams()
        traj = solve(landscape, HarvestStrategy.quasi_constant(420.0), p, NumericsConfig(refine=2))
        assert np.abs(traj.balance_residual).max() / (p.r * p.K * p.L**2) < 1e-6

    def test_nonnegative_under_collapse(self, landscape):
        traj = solve(landscape, HarvestStrategy.quasi_constant(900.0), ModelParams(),
                     NumericsConfig(refine=2, t_end=5.0), store_snapshots=True)
        assert min(s.values.min() for s in traj.snapshots) >= 0.0
        assert traj.population[-1] < 0.01 * traj.population[0]

    def test_comparison_principle(self, landscape):
        num = NumericsConfig(refine=2, t_end=3.0, record_every=50)
        for low, high in ((HarvestStrategy.quasi_constant(200.0), HarvestStrategy.quasi_constant(300.0)),
                          (HarvestStrategy.proportional(0.4), HarvestStrategy.proportional(0.6))):
            a = solve(landscape, low, ModelParams(), num, store_snapshots=True)
            b = solve(landscape, high, ModelParams(), num, store_snapshots=True)
            for ua, ub in zip(a.snapshots, b.snapshots):
                assert (ub.values <= ua.values + 1e-9).all()

    def test_record_cadence(self, landscape):
        traj = solve(landscape, HarvestStrategy.proportional(0.1), ModelParams(),
                     NumericsConfig(refine=1, t_end=2.0, record_every=25))
        np.testing.assert_allclose(traj.times, np.arange(0, 2.01, 0.25))
        assert (np.diff(traj.cumulative_yield) > 0).all()
        assert traj.population[0] == pytest.approx(9e7, rel=1e-14)

    def test_initial_field_shape_checked(self, landscape):
        with pytest.raises(ConfigError):
            solve(landscape, HarvestStrategy.proportional(0.1), ModelParams(),
                  NumericsConfig(refine=2), initial=Field(np.ones((50, 50)), 6.0))


class TestConfig:
    @pytest.mark.parametrize("kwargs", [dict(D=0.0), dict(K=-1.0), dict(r=-0.5),
                                        dict(L=float("inf")), dict(epsilon=0.0)])
    def test_bad_params(self, kwargs):
        with pytest.raises(ConfigError):
            ModelParams(**kwargs)

    @pytest.mark.parametrize("kwargs", [dict(refine=0), dict(dt=0.0), dict(t_end=-1.0),
                                        dict(dt=0.03, t_end=1.0), dict(record_every=0),
                                        dict(linear_tol=0.0)])
    def test_bad_numerics(self, kwargs):
        with pytest.raises(ConfigError):
            NumericsConfig(**kwargs)

    def test_step_count(self):
        assert NumericsConfig(dt=0.01, t_end=5.0).n_steps == 500
