import io
import math

import numpy as np
import pytest

from fragrd.errors import ConfigError
from fragrd.harvest import HarvestKind
from fragrd.landscape import GeneratorConfig, generate
from fragrd.model import ModelParams, NumericsConfig
from fragrd.sweep import (CSV_COLUMNS, DESK_S_VALUES, EnsembleSpec, PRCurve, SweepConfig,
                          SweepError, SweepResult, SweepRow, best_landscape_by_yield,
                          default_intensities, pr_diagram, rank_correlation, reversal_threshold,
                          run_sweep, unimodal_violations)

COARSE = NumericsConfig(refine=1, t_end=2.0)
SMALL = EnsembleSpec(s_values=(94, 300, 460), master_seed=1)


@pytest.fixture(scope="module")
def small_result():
    config = SweepConfig(kind="constant", intensities=(0.0, 200.0, 400.0, 600.0),
                         ensemble=SMALL, numerics=COARSE, observe_times=(1.0, 2.0))
    return run_sweep(config)


def synthetic(values_by_t, s_values=(1, 2, 3), intensities=(0.0, 1.0, 2.0)):
    """SweepResult whose P column at time t is values_by_t[t][k][j]."""
    times = sorted(values_by_t)
    rows = [SweepRow(s, x, t, values_by_t[t][k][j], values_by_t[t][k][j], 0.0)
            for k, s in enumerate(s_values) for j, x in enumerate(intensities) for t in times]
    return SweepResult(rows, list(s_values), list(intensities), times)


class TestDefaults:
    def test_landscape_targets(self):
        assert DESK_S_VALUES == (94, 146, 199, 251, 303, 356, 408, 460)
        assert EnsembleSpec.full().s_values == tuple(range(94, 461, 6))

    def test_quota_grid_respects_step_bound(self):
        grid = default_intensities("constant", ModelParams())
        assert grid[0] == 0.0 and len(grid) == 25
        assert max(grid) < ModelParams().epsilon / NumericsConfig().dt

    def test_effort_grid(self):
        grid = default_intensities("proportional", ModelParams(r=1.5))
        assert grid[-1] == pytest.approx(3.0)

    def test_seeds_follow_member_index(self):
        assert SMALL.seeds() == EnsembleSpec(s_values=(1, 2, 3), master_seed=1).seeds()
        assert SMALL.seeds() != EnsembleSpec(s_values=(1, 2, 3), master_seed=2).seeds()


class TestRunSweep:
    def test_layout(self, small_result):
        r = small_result
        assert r.s_values == [94, 300, 460]
        assert len(r.rows) == 3 * 4 * 2
        assert r.grid("P", 2.0).shape == (3, 4)

    def test_zero_intensity_keeps_capacity(self, small_result):
        P = small_result.grid("P", 2.0)
        np.testing.assert_allclose(P[:, 0], 9e7, rtol=1e-10)
        assert (small_result.grid("R", 2.0)[:, 0] == 0).all()
        assert small_result.correlations("P", 2.0)[0] == 0.0

    def test_population_decreases_with_quota(self, small_result):
        assert (np.diff(small_result.grid("P", 2.0), axis=1) < 0).all()

    def test_balance_is_tracked(self, small_result):
        assert small_result.max_balance_residual.shape == (3, 4)
        assert small_result.max_balance_residual.max() < 1e-6 * 9e7

    def test_metadata(self, small_result):
        md = small_result.metadata
        assert md["config"]["ensemble"]["seeds"] == SMALL.seeds()
        assert len(md["landscape_digests"]) == 3

    def test_worker_count_does_not_change_results(self):
        config = SweepConfig(kind="proportional", intensities=(0.2, 0.8), ensemble=SMALL,
                             numerics=NumericsConfig(refine=1, t_end=1.0), observe_times=(1.0,))
        serial = run_sweep(config)
        parallel = run_sweep(SweepConfig(**{**config.__dict__, "workers": 2}))
        assert serial.rows == parallel.rows

    def test_landscape_files(self, tmp_path):
        from fragrd.landscape import save
        paths = []
        for s in (100, 200):
            path = tmp_path / f"ls{s}.txt"
            save(generate(GeneratorConfig(50, 0.1, s, seed=s)), str(path))
            paths.append(str(path))
        config = SweepConfig(intensities=(50.0,), ensemble=None, landscape_files=tuple(paths),
                             numerics=NumericsConfig(refine=1, t_end=1.0), observe_times=(1.0,))
        assert run_sweep(config).s_values == [100, 200]

    def test_unequal_protected_area(self):
        config = SweepConfig(intensities=(1.0,), numerics=COARSE, observe_times=(1.0,))
        landscapes = [generate(GeneratorConfig(50, 0.1, 94, seed=1)),
                      generate(GeneratorConfig(50, 0.2, 94, seed=1))]
        with pytest.raises(ConfigError, match="protected area"):
            run_sweep(config, landscapes)

    def test_failed_solve_is_identified(self):
        # quotas above epsilon/dt overshoot zero once densities fall below epsilon
        config = SweepConfig(intensities=(5000.0,), numerics=NumericsConfig(refine=1, t_end=2.0),
                             observe_times=(1.0,))
        landscapes = [generate(GeneratorConfig(50, 0.1, 200, seed=4))]
        with pytest.raises(SweepError) as info:
            run_sweep(config, landscapes)
        assert info.value.k == 1 and info.value.s == 200 and info.value.intensity == 5000.0
        assert "k=1" in str(info.value)


class TestConfigValidation:
    @pytest.mark.parametrize("kwargs", [
        dict(intensities=(2.0, 1.0)),
        dict(intensities=(-1.0,)),
        dict(observe_times=(0.0,)),
        dict(observe_times=(6.0,)),
        dict(workers=0),
        dict(ensemble=None),
        dict(landscape_files=("x.txt",)),
    ])
    def test_rejected(self, kwargs):
        with pytest.raises(ConfigError):
            SweepConfig(**kwargs)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            SweepConfig(kind="poaching")

    def test_kind_coerced(self):
        assert SweepConfig(kind="proportional").kind is HarvestKind.PROPORTIONAL


class TestCsv:
    def test_round_trip(self, small_result):
        text = small_result.to_csv_text()
        back = SweepResult.from_csv(io.StringIO(text))
        assert back.s_values == small_result.s_values
        assert back.times == small_result.times
        for a, b in zip(back.rows, small_result.rows):
            assert a.s == b.s
            np.testing.assert_allclose(a[1:], b[1:], rtol=1e-11)
        assert back.metadata["config"] == small_result.metadata["config"]

    def test_layout(self, small_result):
        lines = small_result.to_csv_text().splitlines()
        body = [l for l in lines if not l.startswith("#")]
        assert body[0] == ",".join(CSV_COLUMNS)
        assert body[1].startswith("94,0,1,")
        assert len(body) == 1 + 24

    def test_nan_before_first_year(self):
        config = SweepConfig(kind="proportional", intensities=(0.5,), ensemble=EnsembleSpec(s_values=(94,)),
                             numerics=NumericsConfig(refine=1, t_end=1.0), observe_times=(0.5, 1.0))
        result = run_sweep(config)
        assert math.isnan(result.rows[0].R) and ",nan," in result.to_csv_text()

    def test_time_filter(self, small_result):
        text = small_result.to_csv_text(times=[2.0])
        assert SweepResult.from_csv(io.StringIO(text)).times == [2.0]

    def test_stable_text(self, small_result):
        assert small_result.to_csv_text() == small_result.to_csv_text()

    @pytest.mark.parametrize("text", ["a,b\n1,2\n", "s,intensity,t,P,R,flux\n94,0,1,1,1,1\n95,0,1,1,1,1\n94,1,1,1,1,1\n"])
    def test_malformed(self, text):
        with pytest.raises(ConfigError):
            SweepResult.from_csv(io.StringIO(text))


class TestAnalysis:
    def test_rank_correlation(self):
        assert rank_correlation([1, 2, 3], [10, 20, 30]) == pytest.approx(1.0)
        assert rank_correlation([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)
        assert rank_correlation([1, 2, 3], [5, 5, 5]) == 0.0

    def test_reversal_threshold(self):
        # correlation with s goes 0 (tie), -1, +1 across the grid
        result = synthetic({5.0: [[1, 3, 1], [1, 2, 2], [1, 1, 3]]})
        assert list(result.correlations("P", 5.0)) == pytest.approx([0.0, -1.0, 1.0])
        assert reversal_threshold(result, 5.0) == 2.0

    def test_no_reversal(self):
        result = synthetic({5.0: [[1, 1, 3], [2, 2, 2], [3, 3, 1]]})
        assert reversal_threshold(result, 5.0) == math.inf

    def test_pr_curve(self):
        curve = PRCurve(100, np.arange(5.0), np.array([5, 4, 3, 2, 1.0]),
                        np.array([0, 2, 3, 1, 0.0]))
        assert curve.peak_index == 2 and curve.has_interior_peak
        upper, lower = curve.branches()
        assert list(upper) == [0, 1, 2] and list(lower) == [2, 3, 4]
        assert curve.population_nonincreasing() and curve.yield_unimodal(allowance=0)

    def test_edge_peak(self):
        curve = PRCurve(100, np.arange(3.0), np.array([3, 2, 1.0]), np.array([0, 1, 2.0]))
        assert not curve.has_interior_peak

    def test_unimodal_violations(self):
        assert unimodal_violations([0, 2, 1, 3, 1, 2]) == 2
        assert unimodal_violations([0, 1, 2, 1, 0]) == 0

    def test_best_landscape(self):
        result = synthetic({5.0: [[0, 1, 0], [0, 5, 1], [0, 2, 2]]})
        assert best_landscape_by_yield(result, 5.0) == 1
        assert [c.s for c in pr_diagram(result, 5.0)] == [1, 2, 3]

    def test_unknown_time(self, small_result):
        with pytest.raises(KeyError):
            small_result.grid("P", 3.0)
