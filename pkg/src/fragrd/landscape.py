"""Binary protected/harvested lattices with exact habitat abundance and aggregation.

A landscape is an ``n x n`` mask where ``1`` marks a harvested cell and ``0`` a
protected one.  Its aggregation index is the number of 4-adjacent pairs of
protected cells; large values mean compact reserves, small values fragmented
ones.  :func:`generate` draws a configuration with an exact number of
protected cells and an exact aggregation index by Metropolis-style annealing
over cell swaps, so that ensembles differ only in how the reserve is broken
apart and never in how much reserve there is.
"""
from __future__ import annotations

import hashlib
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numba
import numpy as np

from .errors import (ConvergenceError, InfeasibleTargetError, InvalidMaskError,
                     LandscapeParseError)

PROTECTED = 0
HARVESTED = 1

FORMAT_MAGIC = "fragrd-landscape"
FORMAT_VERSION = "v1"

# random numbers drawn per annealing chunk
_CHUNK = 1 << 16


def _as_mask(cells) -> np.ndarray:
    arr = np.asarray(cells)
    if arr.ndim != 2 or arr.size == 0:
        raise InvalidMaskError(f"mask must be a non-empty 2-D array, got shape {arr.shape}")
    if not np.isin(arr, (0, 1)).all():
        raise InvalidMaskError("mask must contain only 0 (protected) and 1 (harvested)")
    return arr.astype(np.int8)


def aggregation_index(cells) -> int:
    """Count unordered 4-adjacent pairs of protected cells, without wraparound."""
    p = _as_mask(cells) == PROTECTED
    horizontal = np.count_nonzero(p[:, 1:] & p[:, :-1])
    vertical = np.count_nonzero(p[1:, :] & p[:-1, :])
    return int(horizontal + vertical)


def protected_count_for(n: int, fraction: float) -> int:
    """Number of protected cells for a fraction of an ``n x n`` lattice (round half to even)."""
    return int(round(fraction * n * n))


def _quasi_square(n: int, count: int, width: int) -> np.ndarray:
    # protected cells filled row by row into a block `width` columns wide
    mask = np.ones((n, n), dtype=np.int8)
    full, rest = divmod(count, width)
    mask[:full, :width] = PROTECTED
    if rest:
        mask[full, :rest] = PROTECTED
    return mask


def compact_mask(n: int, protected_count: int) -> np.ndarray:
    """The most aggregated quasi-square packing of ``protected_count`` cells."""
    if protected_count == 0:
        return np.ones((n, n), dtype=np.int8)
    best, best_s = None, -1
    lo = max(1, math.ceil(protected_count / n))
    for width in range(lo, n + 1):
        mask = _quasi_square(n, protected_count, width)
        s = aggregation_index(mask)
        if s > best_s:
            best, best_s = mask, s
    return best


def _min_index_dense(n: int, protected_count: int) -> int:
    # More protected than one checkerboard colour: place the harvested cells on
    # a single colour class, highest-degree cells first, so that no two are
    # adjacent and each removes as many protected pairs as possible.
    harvested = n * n - protected_count
    total_edges = 2 * n * (n - 1)
    ii, jj = np.indices((n, n))
    degree = 4 - (ii == 0) - (ii == n - 1) - (jj == 0) - (jj == n - 1)
    best = 0
    for colour in (0, 1):
        d = np.sort(degree[(ii + jj) % 2 == colour])[::-1]
        if d.size >= harvested:
            best = max(best, int(d[:harvested].sum()))
    return total_edges - best


def feasibility_bounds(n: int, protected_count: int) -> Tuple[int, int]:
    """Smallest and largest aggregation index reachable with ``protected_count`` cells.

    The maximum comes from the best quasi-square packing, which attains the
    known optimum ``2N - ceil(2 sqrt(N))`` whenever that square fits.  The
    minimum is zero up to half the lattice (checkerboard placement).
    """
    if n < 1:
        raise InvalidMaskError(f"lattice side must be positive, got {n}")
    if not 0 <= protected_count <= n * n:
        raise ValueError(f"protected_count must lie in [0, {n * n}], got {protected_count}")
    s_max = aggregation_index(compact_mask(n, protected_count))
    if protected_count <= math.ceil(n * n / 2):
        s_min = 0
    else:
        s_min = _min_index_dense(n, protected_count)
    return s_min, s_max


@dataclass(frozen=True)
class GeneratorConfig:
    n: int = 50
    protected_fraction: float = 0.1
    target_s: int = 94
    seed: int = 0
    max_iterations: int = 20_000_000

    def __post_init__(self):
        if self.n < 2:
            raise InvalidMaskError(f"lattice side must be at least 2, got {self.n}")
        if not 0.0 < self.protected_fraction < 1.0:
            raise ValueError(f"protected_fraction must lie in (0, 1), got {self.protected_fraction}")
        if self.target_s < 0:
            raise ValueError(f"target_s must be nonnegative, got {self.target_s}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")

    @property
    def protected_count(self) -> int:
        return protected_count_for(self.n, self.protected_fraction)


@dataclass(frozen=True, eq=False)
class Landscape:
    """Harvesting field on an ``n x n`` lattice (1 = harvested, 0 = protected)."""

    cells: np.ndarray
    s: int = field(init=False)
    protected_count: int = field(init=False)

    def __post_init__(self):
        cells = _as_mask(self.cells)
        if cells.shape[0] != cells.shape[1]:
            raise InvalidMaskError(f"landscape must be square, got shape {cells.shape}")
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "s", aggregation_index(cells))
        object.__setattr__(self, "protected_count", int(np.count_nonzero(cells == PROTECTED)))

    @property
    def n(self) -> int:
        return self.cells.shape[0]

    def __eq__(self, other):
        if not isinstance(other, Landscape):
            return NotImplemented
        return self.s == other.s and np.array_equal(self.cells, other.cells)

    def __hash__(self):
        return hash((self.s, self.cells.tobytes()))

    def digest(self) -> str:
        """Short content hash, used to tag outputs with the landscape they came from."""
        return hashlib.sha256(serialize(self).encode()).hexdigest()[:16]

    @classmethod
    def uniform(cls, n: int, harvested: bool = True) -> "Landscape":
        return cls(np.full((n, n), HARVESTED if harvested else PROTECTED, dtype=np.int8))


# --------------------------------------------------------------------------
# annealing


@numba.njit(cache=True)
def _protected_neighbours(mask, n, i, j):
    c = 0
    if i > 0 and mask[i - 1, j] == 0:
        c += 1
    if i < n - 1 and mask[i + 1, j] == 0:
        c += 1
    if j > 0 and mask[i, j - 1] == 0:
        c += 1
    if j < n - 1 and mask[i, j + 1] == 0:
        c += 1
    return c


@numba.njit(cache=True)
def _anneal_chunk(mask, prot, harv, slot, s, target, temp, cooling, t_min, t_max,
                  pick_p, pick_h, mode, direction, accept):
    """Run up to len(pick_p) swap proposals; returns (s, temperature, proposals used)."""
    n = mask.shape[0]
    n_prot = prot.shape[0]
    n_harv = harv.shape[0]
    di = (-1, 1, 0, 0)
    dj = (0, 0, -1, 1)
    for it in range(pick_p.shape[0]):
        if s == target:
            return s, temp, it
        temp *= cooling
        if temp < t_min:
            temp = t_max
        a = prot[pick_p[it] % n_prot]
        ai, aj = a // n, a % n
        if mode[it] < 0.5:
            b = harv[pick_h[it] % n_harv]
        else:
            # local move: a harvested cell next to some protected cell
            c = prot[pick_h[it] % n_prot]
            ci = c // n + di[direction[it]]
            cj = c % n + dj[direction[it]]
            if ci < 0 or ci >= n or cj < 0 or cj >= n or mask[ci, cj] == 0:
                continue
            b = ci * n + cj
        bi, bj = b // n, b % n
        adjacent = 1 if abs(ai - bi) + abs(aj - bj) == 1 else 0
        s_new = (s - _protected_neighbours(mask, n, ai, aj)
                 + _protected_neighbours(mask, n, bi, bj) - adjacent)
        delta = abs(s_new - target) - abs(s - target)
        if delta > 0 and accept[it] >= math.exp(-delta / temp):
            continue
        mask[ai, aj] = 1
        mask[bi, bj] = 0
        ka, kb = slot[a], slot[b]
        prot[ka] = b
        harv[kb] = a
        slot[a], slot[b] = kb, ka
        s = s_new
    return s, temp, pick_p.shape[0]


def _anneal(mask: np.ndarray, target: int, budget: int, rng: np.random.Generator):
    mask = np.ascontiguousarray(mask, dtype=np.int8).copy()
    flat = mask.reshape(-1)
    prot = np.flatnonzero(flat == PROTECTED).astype(np.int64)
    harv = np.flatnonzero(flat == HARVESTED).astype(np.int64)
    slot = np.empty(flat.size, dtype=np.int64)
    slot[prot] = np.arange(prot.size)
    slot[harv] = np.arange(harv.size)
    s = aggregation_index(mask)
    # geometric cooling from t_max to t_min, restarted from t_max on each cycle
    t_max, t_min = 0.5, 0.05
    temp = t_max
    cooling = (t_min / t_max) ** (1.0 / 200_000)
    used = 0
    while s != target and used < budget:
        size = min(_CHUNK, budget - used)
        s, temp, k = _anneal_chunk(
            mask, prot, harv, slot, s, target, temp, cooling, t_min, t_max,
            rng.integers(0, 2**62, size), rng.integers(0, 2**62, size),
            rng.random(size), rng.integers(0, 4, size), rng.random(size))
        used += k
    return mask, s, used


def generate(config: GeneratorConfig) -> Landscape:
    """Draw a landscape with an exact protected count and aggregation index.

    Starting from a uniformly random placement, protected and harvested cells
    are swapped; a swap is kept when it brings the index closer to the target,
    and otherwise with probability ``exp(-increase / T)`` under geometric
    cooling.  Half of the proposals move a protected cell next to an existing
    one, which lets the chain reach compact configurations quickly.

    Raises:
        InfeasibleTargetError: target outside :func:`feasibility_bounds`.
        ConvergenceError: the iteration budget ran out before an exact hit.
    """
    n = config.n
    count = config.protected_count
    s_min, s_max = feasibility_bounds(n, count)
    if not s_min <= config.target_s <= s_max:
        raise InfeasibleTargetError(config.target_s, s_min, s_max)
    if count == 0 or count == n * n:
        return Landscape(compact_mask(n, count))

    rng = np.random.default_rng(config.seed)
    flat = np.ones(n * n, dtype=np.int8)
    flat[rng.choice(n * n, size=count, replace=False)] = PROTECTED
    budget = config.max_iterations
    mask, s, used = _anneal(flat.reshape(n, n), config.target_s, budget // 2, rng)
    if s != config.target_s:
        # Near the maximum a random start rarely finds the few admissible
        # shapes; fall back to a randomly shifted compact block and anneal down.
        block = compact_mask(n, count)
        shift = rng.integers(0, n, size=2)
        start = np.roll(block, tuple(shift), axis=(0, 1))
        if aggregation_index(start) < config.target_s:
            start = block
        mask, s, more = _anneal(start, config.target_s, budget - used, rng)
        used += more
    if s != config.target_s:
        raise ConvergenceError(
            f"annealing stopped at s={s} after {used} iterations "
            f"(target {config.target_s}, seed {config.seed})")
    out = Landscape(mask)
    assert out.s == config.target_s and out.protected_count == count
    return out


def ensemble_seed(master_seed: int, k: int) -> int:
    """Per-member 64-bit seed derived from the master seed and the 1-based index."""
    ss = np.random.SeedSequence([int(master_seed), int(k)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def ensemble_targets(s_start: int, s_step: int, count: int) -> List[int]:
    return [s_start + s_step * k for k in range(count)]


def _generate_member(args):
    k, config = args
    try:
        return generate(config)
    except (InfeasibleTargetError, ConvergenceError) as exc:
        exc.args = (f"ensemble member k={k}: {exc}",) + exc.args[1:]
        raise


def build_ensemble(n: int, fraction: float, s_start: int, s_step: int, count: int,
                   master_seed: int, max_iterations: int = 20_000_000,
                   workers: Optional[int] = None) -> List[Landscape]:
    """Landscapes with aggregation indices ``s_start + s_step*(k-1)``, k = 1..count."""
    if count < 1:
        raise ValueError("count must be positive")
    jobs = [(k, GeneratorConfig(n, fraction, s, ensemble_seed(master_seed, k), max_iterations))
            for k, s in enumerate(ensemble_targets(s_start, s_step, count), start=1)]
    # feasibility is checked up front so that the failing member is reported cheaply
    s_min, s_max = feasibility_bounds(n, protected_count_for(n, fraction))
    for k, cfg in jobs:
        if not s_min <= cfg.target_s <= s_max:
            raise InfeasibleTargetError(
                cfg.target_s, s_min, s_max,
                f"ensemble member k={k}: target aggregation index {cfg.target_s} "
                f"is infeasible; achievable range is [{s_min}, {s_max}]")
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_generate_member, jobs))
    return [_generate_member(job) for job in jobs]


# --------------------------------------------------------------------------
# text format


def serialize(landscape: Landscape) -> str:
    rows, cols = landscape.cells.shape
    lines = [f"{FORMAT_MAGIC} {FORMAT_VERSION} {rows} {cols} {landscape.s}"]
    lines += ["".join("1" if c else "0" for c in row) for row in landscape.cells]
    return "\n".join(lines) + "\n"


def deserialize(text: str) -> Landscape:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise LandscapeParseError("empty landscape file")
    header = lines[0].split(" ")
    if len(header) != 5 or header[0] != FORMAT_MAGIC or header[1] != FORMAT_VERSION:
        raise LandscapeParseError(f"bad header: {lines[0]!r}")
    try:
        rows, cols, stored_s = (int(v) for v in header[2:])
    except ValueError:
        raise LandscapeParseError(f"bad header: {lines[0]!r}") from None
    body = lines[1:]
    if rows < 1 or cols < 1 or len(body) != rows:
        raise LandscapeParseError(f"expected {rows} grid rows, found {len(body)}")
    grid = np.empty((rows, cols), dtype=np.int8)
    for i, line in enumerate(body):
        if len(line) != cols:
            raise LandscapeParseError(f"row {i + 1}: expected {cols} characters, found {len(line)}")
        if set(line) - {"0", "1"}:
            raise LandscapeParseError(f"row {i + 1}: characters other than 0/1")
        grid[i] = np.frombuffer(line.encode(), dtype=np.uint8) - ord("0")
    try:
        landscape = Landscape(grid)
    except InvalidMaskError as exc:
        raise LandscapeParseError(str(exc)) from None
    if landscape.s != stored_s:
        raise LandscapeParseError(
            f"header aggregation index {stored_s} does not match grid ({landscape.s})")
    return landscape


def load(path) -> Landscape:
    with open(path) as fh:
        return deserialize(fh.read())


def save(landscape: Landscape, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(serialize(landscape))
