"""Landscape ensemble x harvesting intensity experiments and their summaries."""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import spearmanr

from . import __version__
from .errors import ConfigError, NumericalError
from .harvest import HarvestKind, HarvestStrategy
from .landscape import (Landscape, GeneratorConfig, ensemble_seed, ensemble_targets,
                        generate, load)
from .model import ModelParams, NumericsConfig
from .observables import annual_yield, relative_loss
from .solver import solve

# evenly spread over the observed 94..460 range
DESK_S_VALUES = (94, 146, 199, 251, 303, 356, 408, 460)
FULL_RANGE = (94, 6, 62)

CSV_COLUMNS = ("s", "intensity", "t", "P", "R", "flux")


def default_intensities(kind, params: ModelParams = ModelParams(),
                        protected_fraction: float = 0.1, count: int = 25) -> List[float]:
    """Grid from zero into the collapse regime.

    Quotas run up to ``r K (1 - protected_fraction)``, well past the quota
    ``r K / 4`` that a uniform population cannot sustain, yet below
    ``epsilon / dt`` where the explicit removal step would overshoot zero.
    Efforts run up to ``2 r``.
    """
    kind = HarvestKind(kind)
    if kind is HarvestKind.QUASI_CONSTANT_YIELD:
        top = params.r * params.K * (1.0 - protected_fraction)
    else:
        top = 2.0 * params.r
    return [float(v) for v in np.linspace(0.0, top, count)]


@dataclass(frozen=True)
class EnsembleSpec:
    n: int = 50
    fraction: float = 0.1
    s_values: Tuple[int, ...] = DESK_S_VALUES
    master_seed: int = 1
    max_iterations: int = 20_000_000

    @classmethod
    def from_range(cls, s_start: int, s_step: int, count: int, **kw) -> "EnsembleSpec":
        return cls(s_values=tuple(ensemble_targets(s_start, s_step, count)), **kw)

    @classmethod
    def full(cls, **kw) -> "EnsembleSpec":
        return cls.from_range(*FULL_RANGE, **kw)

    def seeds(self) -> List[int]:
        return [ensemble_seed(self.master_seed, k) for k in range(1, len(self.s_values) + 1)]

    def build(self) -> List[Landscape]:
        return [generate(GeneratorConfig(self.n, self.fraction, s, seed, self.max_iterations))
                for s, seed in zip(self.s_values, self.seeds())]


@dataclass(frozen=True)
class SweepConfig:
    kind: HarvestKind = HarvestKind.QUASI_CONSTANT_YIELD
    intensities: Tuple[float, ...] = ()
    ensemble: Optional[EnsembleSpec] = field(default_factory=EnsembleSpec)
    landscape_files: Tuple[str, ...] = ()
    params: ModelParams = ModelParams()
    numerics: NumericsConfig = NumericsConfig()
    observe_times: Tuple[float, ...] = (5.0,)
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "kind", HarvestKind(self.kind))
        if not self.intensities:
            fraction = self.ensemble.fraction if self.ensemble else 0.1
            object.__setattr__(self, "intensities",
                               tuple(default_intensities(self.kind, self.params, fraction)))
        grid = np.asarray(self.intensities, dtype=float)
        if grid.size == 0 or (grid < 0).any() or (np.diff(grid) < 0).any():
            raise ConfigError("intensity grid must be nonempty, nonnegative and sorted ascending")
        if (self.ensemble is None) == (not self.landscape_files):
            raise ConfigError("give exactly one of an ensemble spec or landscape files")
        if not self.observe_times or min(self.observe_times) <= 0:
            raise ConfigError("observation times must be positive")
        if max(self.observe_times) > self.numerics.t_end + 1e-9:
            raise ConfigError(f"observation time {max(self.observe_times)} is after "
                              f"t_end={self.numerics.t_end}")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")

    def landscapes(self) -> List[Landscape]:
        if self.ensemble is not None:
            return self.ensemble.build()
        return [load(path) for path in self.landscape_files]

    def describe(self) -> dict:
        """JSON-ready echo of the configuration, for provenance headers."""
        out = {
            "kind": self.kind.value,
            "intensities": list(self.intensities),
            "params": asdict(self.params),
            "numerics": asdict(self.numerics),
            "observe_times": list(self.observe_times),
        }
        if self.ensemble is not None:
            out["ensemble"] = {**asdict(self.ensemble), "s_values": list(self.ensemble.s_values),
                               "seeds": self.ensemble.seeds()}
        else:
            out["landscape_files"] = list(self.landscape_files)
        return out


class SweepRow(NamedTuple):
    s: int
    intensity: float
    t: float
    P: float
    R: float
    flux: float


class SweepError(NumericalError):
    """A single (landscape, intensity) solve failed; the sweep is abandoned."""

    def __init__(self, k, s, intensity, cause):
        self.k, self.s, self.intensity = k, s, intensity
        super().__init__(f"solve failed for landscape k={k} (s={s}), intensity {intensity:g}: {cause}")


def _run_job(job):
    k, landscape, strategy, params, numerics, times = job
    try:
        traj = solve(landscape, strategy, params, numerics)
    except NumericalError as exc:
        raise SweepError(k, landscape.s, strategy.intensity, exc) from None
    rows = []
    for t in times:
        r = annual_yield(traj, t) if t >= 1 else math.nan
        rows.append(SweepRow(landscape.s, strategy.intensity, float(t),
                             traj.population_at(t), r, traj.flux_at(t)))
    return rows, float(np.abs(traj.balance_residual).max()), float(traj.min_density.min())


@dataclass
class SweepResult:
    """Rows ordered by (landscape, intensity, observation time)."""

    rows: List[SweepRow]
    s_values: List[int]
    intensities: List[float]
    times: List[float]
    metadata: dict = field(default_factory=dict)
    max_balance_residual: Optional[np.ndarray] = None
    min_density: Optional[np.ndarray] = None

    def grid(self, quantity: str, t: float = 5.0) -> np.ndarray:
        """Values of ``quantity`` as an (n_landscapes, n_intensities) array at time t."""
        col = CSV_COLUMNS.index(quantity)
        ti = _index_of(self.times, t)
        n_int, n_t = len(self.intensities), len(self.times)
        out = np.empty((len(self.s_values), n_int))
        for idx, row in enumerate(self.rows):
            k, rest = divmod(idx, n_int * n_t)
            j, tj = divmod(rest, n_t)
            if tj == ti:
                out[k, j] = row[col]
        return out

    def losses(self, quantity: str = "P", t: float = 5.0) -> np.ndarray:
        """Relative loss across the ensemble for each intensity (nan where all are zero)."""
        values = self.grid(quantity, t)
        out = np.full(values.shape[1], math.nan)
        for j in range(values.shape[1]):
            if values[:, j].max() > 0:
                out[j] = relative_loss(values[:, j])
        return out

    def correlations(self, quantity: str = "P", t: float = 5.0) -> np.ndarray:
        values = self.grid(quantity, t)
        return np.array([rank_correlation(self.s_values, values[:, j])
                         for j in range(values.shape[1])])

    def to_csv(self, stream, times: Optional[Sequence[float]] = None) -> None:
        for line in _metadata_lines(self.metadata):
            stream.write(line + "\n")
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        keep = None if times is None else {float(t) for t in times}
        for row in self.rows:
            if keep is None or row.t in keep:
                writer.writerow([row.s] + [format_number(v) for v in row[1:]])

    def to_csv_text(self, times=None) -> str:
        buf = io.StringIO()
        self.to_csv(buf, times)
        return buf.getvalue()

    @classmethod
    def from_csv(cls, stream) -> "SweepResult":
        """Rebuild a result from an emitted table; metadata lines are parsed when JSON."""
        metadata, body = {}, []
        for line in stream:
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition(":")
                try:
                    metadata[key.strip()] = json.loads(value)
                except json.JSONDecodeError:
                    metadata[key.strip()] = value.strip()
            elif line.strip():
                body.append(line)
        reader = csv.reader(body)
        header = next(reader, None)
        if tuple(header or ()) != CSV_COLUMNS:
            raise ConfigError(f"unexpected CSV header {header}")
        rows = [SweepRow(int(r[0]), *(float(v) for v in r[1:])) for r in reader]
        s_values = list(dict.fromkeys(r.s for r in rows))
        intensities = list(dict.fromkeys(r.intensity for r in rows))
        times = list(dict.fromkeys(r.t for r in rows))
        if len(rows) != len(s_values) * len(intensities) * len(times):
            raise ConfigError("CSV does not hold a complete landscape x intensity x time table")
        return cls(rows, s_values, intensities, times, metadata)


def _index_of(seq, value):
    for i, v in enumerate(seq):
        if abs(v - value) <= 1e-9 * max(1.0, abs(value)):
            return i
    raise KeyError(f"time {value} not among observed times {list(seq)}")


def format_number(value: float) -> str:
    if math.isnan(value):
        return "nan"
    return f"{value:.12g}"


def _metadata_lines(metadata: dict) -> List[str]:
    return [f"# {key}: {json.dumps(value, sort_keys=True)}" for key, value in metadata.items()]


def rank_correlation(x, y) -> float:
    """Spearman correlation; 0 when either sample is constant (no ordering to measure)."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        return 0.0
    return float(spearmanr(x, y)[0])


def run_sweep(config: SweepConfig, landscapes: Optional[List[Landscape]] = None) -> SweepResult:
    """One solve per (landscape, intensity); rows reduced in (landscape, intensity) order."""
    if landscapes is None:
        landscapes = config.landscapes()
    counts = {ls.protected_count for ls in landscapes}
    if len(counts) != 1:
        raise ConfigError(f"landscapes differ in protected area: {sorted(counts)} cells")
    epsilon = config.params.epsilon
    times = tuple(float(t) for t in config.observe_times)
    jobs = [(k, ls, HarvestStrategy(config.kind, intensity, epsilon), config.params,
             config.numerics, times)
            for k, ls in enumerate(landscapes, start=1) for intensity in config.intensities]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            outputs = list(pool.map(_run_job, jobs))
    else:
        outputs = [_run_job(job) for job in jobs]

    n_int = len(config.intensities)
    rows = [row for out in outputs for row in out[0]]
    balance = np.array([out[1] for out in outputs]).reshape(len(landscapes), n_int)
    minima = np.array([out[2] for out in outputs]).reshape(len(landscapes), n_int)
    metadata = {"fragrd_version": __version__, "config": config.describe(),
                "landscape_digests": [ls.digest() for ls in landscapes]}
    return SweepResult(rows, [ls.s for ls in landscapes], [float(v) for v in config.intensities],
                       list(times), metadata, balance, minima)


def reversal_threshold(result: SweepResult, t: float, quantity: str = "P") -> float:
    """Smallest intensity at which the s-correlation turns positive after being negative.

    Returns ``inf`` when no such sign change occurs on the grid.
    """
    corr = result.correlations(quantity, t)
    seen_negative = False
    for intensity, c in zip(result.intensities, corr):
        if c < 0:
            seen_negative = True
        elif c > 0 and seen_negative:
            return float(intensity)
    return math.inf


@dataclass
class PRCurve:
    """Population against yield for one landscape, ordered by intensity."""

    s: int
    intensity: np.ndarray
    P: np.ndarray
    R: np.ndarray

    @property
    def peak_index(self) -> int:
        return int(np.argmax(self.R))

    @property
    def has_interior_peak(self) -> bool:
        return 0 < self.peak_index < len(self.R) - 1

    def branches(self) -> Tuple[np.ndarray, np.ndarray]:
        """Indices of the upper (below peak intensity) and lower branches."""
        idx = np.arange(len(self.R))
        return idx[:self.peak_index + 1], idx[self.peak_index:]

    def population_nonincreasing(self, rel_tol: float = 1e-9) -> bool:
        slack = rel_tol * float(np.max(self.P))
        return bool(np.all(np.diff(self.P) <= slack))

    def yield_unimodal(self, allowance: int = 1) -> bool:
        return unimodal_violations(self.R) <= allowance


def unimodal_violations(values) -> int:
    """Steps that go the wrong way for a rise-then-fall shape around the maximum."""
    v = np.asarray(values, dtype=float)
    p = int(np.argmax(v))
    d = np.diff(v)
    scale = 1e-12 * max(float(np.max(np.abs(v))), 1.0)
    return int(np.count_nonzero(d[:p] < -scale) + np.count_nonzero(d[p:] > scale))


def pr_diagram(result: SweepResult, t: float = 5.0) -> List[PRCurve]:
    P, R = result.grid("P", t), result.grid("R", t)
    grid = np.asarray(result.intensities)
    return [PRCurve(s, grid, P[k], R[k]) for k, s in enumerate(result.s_values)]


def best_landscape_by_yield(result: SweepResult, t: float = 5.0) -> int:
    """Index of the landscape whose best yield over the grid is the largest."""
    return int(np.argmax(result.grid("R", t).max(axis=1)))
