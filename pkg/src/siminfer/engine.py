"""Simulated distributions of the difference in means.

Three simulation methods, each exact-or-Monte-Carlo as appropriate:

* reallocate: redraw the treated subset without replacement (all C(n, n1)
  allocations when enumerable, uniform random subsets otherwise).
* resample_pooled: both groups redrawn with replacement from the pooled
  outcomes (sharp-null testing only).
* resample_within: each group redrawn with replacement from itself
  (estimation, or equal-means testing via a recentering).

Determinism contract: replicates are produced in fixed-size chunks, and chunk
c of a run draws all of its randomness from a counter-based generator keyed by
(seed, method, c). Chunks are concatenated in index order, so any worker count
yields bit-identical draws for the same (plan, seed).
"""
from __future__ import annotations

import math
from collections import OrderedDict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from itertools import combinations, islice

import numpy as np

from .data import (
    AdditiveShift,
    EqualMeans,
    Hypothesis,
    SharpNull,
    TwoGroupSample,
    shift_amount,
)
from .moments import diff_in_means

DEFAULT_EXACT_THRESHOLD = 200_000

# One chunk = 16384 replicates: big enough to amortize per-chunk RNG setup,
# small enough that a final partial chunk wastes little work.
CHUNK = 16384

_M_REALLOC = 1
_M_POOLED = 2
_M_WITHIN = 3
_M_SAMPLING = 4  # reserved for the oracle's repeated-sampling draws


class PlanError(ValueError):
    """Illegal simulation method x hypothesis combination."""


class ExactSizeError(ValueError):
    """Allocation count exceeds the exact-enumeration threshold."""


@dataclass(frozen=True)
class PotentialOutcomeTable:
    """Both potential outcomes for every unit; only oracles get to build one
    from thin air, the engine builds them by imputation from a hypothesis."""

    y1: np.ndarray
    y0: np.ndarray

    def __post_init__(self):
        y1 = np.asarray(self.y1, dtype=np.float64)
        y0 = np.asarray(self.y0, dtype=np.float64)
        if y1.ndim != 1 or y1.shape != y0.shape:
            raise ValueError("y1 and y0 must be equal-length vectors")
        if y1.size < 2:
            raise ValueError("need at least 2 units")
        if not (np.all(np.isfinite(y1)) and np.all(np.isfinite(y0))):
            raise ValueError("potential outcomes must be finite")
        y1.flags.writeable = False
        y0.flags.writeable = False
        object.__setattr__(self, "y1", y1)
        object.__setattr__(self, "y0", y0)

    @property
    def n(self) -> int:
        return self.y1.size

    @property
    def s1_star2(self) -> float:
        """Sample variance of Y(1) over all units, divisor n-1."""
        return float(self.y1.var(ddof=1))

    @property
    def s0_star2(self) -> float:
        return float(self.y0.var(ddof=1))

    @property
    def s10_star2(self) -> float:
        """Sample variance of the unit-level effects Y(1) - Y(0)."""
        return float((self.y1 - self.y0).var(ddof=1))


@dataclass(frozen=True)
class SimulationPlan:
    """A validated (method, hypothesis, replicates, seed) bundle.

    hypothesis None means estimation mode: no null imposed, only
    resample_within supports it.
    """

    method: str
    hypothesis: Hypothesis | None
    replicates: int
    seed: int
    exact_threshold: int = DEFAULT_EXACT_THRESHOLD

    def __post_init__(self):
        if self.method not in ("reallocate", "resample_pooled", "resample_within"):
            raise PlanError(f"unknown method {self.method!r}")
        h = self.hypothesis
        if self.method == "reallocate":
            # Reallocation needs every unit's missing potential outcome filled
            # in, which only a sharp/additive hypothesis provides. Equal-means
            # postulates too little and estimation mode nothing at all.
            if not isinstance(h, (SharpNull, AdditiveShift)):
                raise PlanError(
                    "reallocate requires a sharp-null or additive-shift hypothesis, "
                    f"not {type(h).__name__ if h is not None else 'estimation mode'}"
                )
        elif self.method == "resample_pooled":
            if not isinstance(h, SharpNull):
                raise PlanError("resample_pooled only tests the sharp null")
        else:  # resample_within
            if h is not None and not isinstance(h, EqualMeans):
                raise PlanError(
                    "resample_within supports equal-means testing or estimation mode, "
                    f"not {type(h).__name__}"
                )
        if self.replicates < 1:
            raise PlanError("replicates must be at least 1")
        try:
            _check_seed(self.seed)
        except ValueError as err:
            raise PlanError(str(err)) from None
        if self.exact_threshold < 1:
            raise PlanError("exact_threshold must be positive")


@dataclass(frozen=True)
class SimulationResult:
    draws: np.ndarray
    method_tag: str
    seed: int | str  # "exact" when enumerated
    exact: bool


def _check_seed(seed: int) -> None:
    if not isinstance(seed, (int, np.integer)) or not 0 <= int(seed) < 2**64:
        raise ValueError("seed must be an integer in [0, 2^64)")


def _chunk_rng(seed: int, method_id: int, chunk_index: int) -> np.random.Generator:
    # Counter-based substream: the key alone locates the stream, so chunks can
    # be computed on any worker in any order.
    key = np.array(
        [np.uint64(seed), (np.uint64(method_id) << np.uint64(56)) | np.uint64(chunk_index)],
        dtype=np.uint64,
    )
    return np.random.Generator(np.random.Philox(key=key))


def _run_chunks(task, nchunks: int, workers: int) -> list[np.ndarray]:
    if workers <= 1 or nchunks == 1:
        return [task(ci) for ci in range(nchunks)]
    with ProcessPoolExecutor(max_workers=min(workers, nchunks)) as pool:
        return list(pool.map(task, range(nchunks), chunksize=max(1, nchunks // (4 * workers))))


def _assemble(parts: list[np.ndarray], replicates: int, spill_path) -> np.ndarray:
    draws = np.concatenate(parts)[:replicates]
    if spill_path is not None:
        draws.astype("<f8").tofile(spill_path)
    return draws


def impute_additive(sample: TwoGroupSample, a: float) -> PotentialOutcomeTable:
    """Fill in each unit's unobserved potential outcome under Y(1) = Y(0) + a.

    Observed entries are copied untouched: treated units keep Y as Y(1) and get
    Y - a as Y(0); control units keep Y as Y(0) and get Y + a as Y(1).
    """
    if not math.isfinite(a):
        raise ValueError("shift a must be finite")
    y = sample.outcomes
    if a == 0.0:
        return PotentialOutcomeTable(y, y)
    treated = sample.assignments == 1
    return PotentialOutcomeTable(np.where(treated, y, y + a), np.where(treated, y - a, y))


def allocation_count(n: int, n1: int) -> int:
    """C(n, n1), exact at any size."""
    return math.comb(n, n1)


def _exact_draws(table: PotentialOutcomeTable, n1: int, threshold: int) -> np.ndarray:
    n = table.n
    count = allocation_count(n, n1)
    if count > threshold:
        raise ExactSizeError(
            f"C({n}, {n1}) = {count:,} allocations exceed the exact threshold "
            f"{threshold:,}; use reallocate_mc instead"
        )
    y1, y0 = table.y1, table.y0
    y0_total = y0.sum()
    out = np.empty(count, dtype=np.float64)
    pos = 0
    combos = combinations(range(n), n1)
    while True:
        batch = list(islice(combos, 65536))
        if not batch:
            break
        idx = np.array(batch, dtype=np.intp)
        treated_mean = y1[idx].sum(axis=1) / n1
        control_mean = (y0_total - y0[idx].sum(axis=1)) / (n - n1)
        out[pos : pos + idx.shape[0]] = treated_mean - control_mean
        pos += idx.shape[0]
    return out


def reallocate_exact(
    sample_or_table,
    a: float = 0.0,
    *,
    n1: int | None = None,
    exact_threshold: int = DEFAULT_EXACT_THRESHOLD,
    spill_path=None,
) -> np.ndarray:
    """One draw of tau-hat per distinct allocation of n1 treated labels.

    Accepts a TwoGroupSample (imputed additively with shift a; a=0 is the
    sharp-null test) or a prebuilt PotentialOutcomeTable plus explicit n1.
    Draws follow lexicographic subset order; length is C(n, n1).
    """
    if isinstance(sample_or_table, TwoGroupSample):
        table = impute_additive(sample_or_table, a)
        n1 = sample_or_table.n1
    elif isinstance(sample_or_table, PotentialOutcomeTable):
        table = sample_or_table
        if n1 is None:
            raise ValueError("n1 is required when passing a PotentialOutcomeTable")
    else:
        raise TypeError(f"expected sample or table, got {type(sample_or_table).__name__}")
    if not 2 <= n1 <= table.n - 2:
        raise ValueError(f"n1 must leave at least 2 units per group, got {n1} of {table.n}")
    draws = _exact_draws(table, n1, exact_threshold)
    if spill_path is not None:
        draws.astype("<f8").tofile(spill_path)
    return draws


# --- reallocation Monte Carlo ---------------------------------------------
#
# Under Y(1) = Y(0) + a, the statistic for a treated subset S decomposes as
#
#   tau_hat(S) = A(S) + a * B(S),
#   A(S) = mean(Y[S]) - mean(Y[~S]),         the sharp-null statistic,
#   B(S) = (n1 - |S ∩ {W=1}|) (1/n1 + 1/n0)  >= 0.
#
# So one batch of subsets serves every a: draws move monotonically with a,
# which is exactly what test inversion needs from a shared seed. The (A, B)
# components for a (sample, replicates, seed) triple are cached so an
# inversion's repeated calls pay for subset sampling once.


def _chunk_realloc(ci: int, seed: int, y, w, n1: int, need_b: bool):
    n = y.size
    rng = _chunk_rng(seed, _M_REALLOC, ci)
    # Uniform random n1-subset per row: rank random keys and keep the n1
    # smallest. Equivalent to a partial shuffle, but vectorizes across rows.
    keys = rng.random((CHUNK, n))
    idx = np.argpartition(keys, n1 - 1, axis=1)[:, :n1]
    treated_sum = y[idx].sum(axis=1)
    a_part = treated_sum / n1 - (y.sum() - treated_sum) / (n - n1)
    if not need_b:
        return a_part
    overlap = w[idx].sum(axis=1)
    b_part = (n1 - overlap) * (1.0 / n1 + 1.0 / (n - n1))
    return np.stack([a_part, b_part])


_component_cache: OrderedDict = OrderedDict()
_COMPONENT_CACHE_SIZE = 4


def _realloc_components(
    sample: TwoGroupSample, replicates: int, seed: int, workers: int, need_b: bool
):
    key = (
        hash((sample.outcomes.tobytes(), sample.assignments.tobytes())),
        replicates,
        seed,
    )
    cached = _component_cache.get(key)
    if cached is not None and (cached[1] is not None or not need_b):
        _component_cache.move_to_end(key)
        return cached
    nchunks = -(-replicates // CHUNK)
    task = partial(
        _chunk_realloc,
        seed=seed,
        y=sample.outcomes,
        w=sample.assignments.astype(np.float64),
        n1=sample.n1,
        need_b=need_b,
    )
    parts = _run_chunks(task, nchunks, workers)
    if need_b:
        a_full = np.concatenate([p[0] for p in parts])[:replicates]
        b_full = np.concatenate([p[1] for p in parts])[:replicates]
    else:
        a_full = np.concatenate(parts)[:replicates]
        b_full = None
    _component_cache[key] = (a_full, b_full)
    _component_cache.move_to_end(key)
    while len(_component_cache) > _COMPONENT_CACHE_SIZE:
        _component_cache.popitem(last=False)
    return _component_cache[key]


def reallocate_mc(
    sample: TwoGroupSample,
    a: float,
    replicates: int,
    seed: int,
    *,
    workers: int = 1,
    spill_path=None,
) -> np.ndarray:
    """Monte Carlo reallocation: each replicate draws a uniform n1-subset as
    the treated group and evaluates tau-hat on the a-imputed table.

    Deterministic given (seed, replicates) for any worker count, and the same
    seed reuses the same subsets across different a.
    """
    if replicates < 1:
        raise ValueError("replicates must be at least 1")
    _check_seed(seed)
    if not math.isfinite(a):
        raise ValueError("shift a must be finite")
    a_part, b_part = _realloc_components(sample, replicates, seed, workers, need_b=(a != 0.0))
    draws = a_part if a == 0.0 else a_part + a * b_part
    if spill_path is not None:
        draws.astype("<f8").tofile(spill_path)
    return draws


def _chunk_pooled(ci: int, seed: int, pooled, n1: int):
    n = pooled.size
    rng = _chunk_rng(seed, _M_POOLED, ci)
    idx = rng.integers(0, n, size=(CHUNK, n))
    treated = pooled[idx[:, :n1]].sum(axis=1) / n1
    control = pooled[idx[:, n1:]].sum(axis=1) / (n - n1)
    return treated - control


def resample_pooled(
    sample: TwoGroupSample,
    replicates: int,
    seed: int,
    *,
    workers: int = 1,
    spill_path=None,
) -> np.ndarray:
    """Sharp-null bootstrap: per replicate, draw n1 then n0 values with
    replacement from the pooled outcomes and take the difference in means."""
    if replicates < 1:
        raise ValueError("replicates must be at least 1")
    _check_seed(seed)
    nchunks = -(-replicates // CHUNK)
    task = partial(_chunk_pooled, seed=seed, pooled=sample.outcomes, n1=sample.n1)
    return _assemble(_run_chunks(task, nchunks, workers), replicates, spill_path)


def _chunk_within(ci: int, seed: int, y1g, y0g):
    n1, n0 = y1g.size, y0g.size
    rng = _chunk_rng(seed, _M_WITHIN, ci)
    i1 = rng.integers(0, n1, size=(CHUNK, n1))
    i0 = rng.integers(0, n0, size=(CHUNK, n0))
    return y1g[i1].sum(axis=1) / n1 - y0g[i0].sum(axis=1) / n0


def resample_within(
    sample: TwoGroupSample,
    replicates: int,
    seed: int,
    *,
    workers: int = 1,
    spill_path=None,
) -> np.ndarray:
    """Estimation bootstrap: resample each group from itself, with replacement,
    at its own size. The distribution centers near the observed tau-hat."""
    if replicates < 1:
        raise ValueError("replicates must be at least 1")
    _check_seed(seed)
    nchunks = -(-replicates // CHUNK)
    task = partial(_chunk_within, seed=seed, y1g=sample.group(1), y0g=sample.group(0))
    return _assemble(_run_chunks(task, nchunks, workers), replicates, spill_path)


def resample_equal_means(
    sample: TwoGroupSample,
    b: float,
    replicates: int,
    seed: int,
    *,
    workers: int = 1,
    spill_path=None,
) -> np.ndarray:
    """Equal-means bootstrap: within-group resampling of outcomes shifted so
    both groups share mean b (treated by -tau/2 + b, control by +tau/2 + b).

    A constant shift of a group moves every resampled group mean by that same
    constant, so the shifts commute with resampling: the draws are exactly the
    resample_within draws minus tau-hat, elementwise, under a shared seed, and
    b cancels outright. Computing it that way makes both identities hold to
    the bit rather than to roundoff.
    """
    if not math.isfinite(b):
        raise ValueError("b must be finite")
    within = resample_within(sample, replicates, seed, workers=workers)
    draws = within - diff_in_means(sample)
    if spill_path is not None:
        draws.astype("<f8").tofile(spill_path)
    return draws


def run_plan(
    plan: SimulationPlan,
    sample: TwoGroupSample,
    *,
    workers: int = 1,
    spill_path=None,
) -> SimulationResult:
    """Execute a validated plan, choosing exact enumeration for reallocation
    when C(n, n1) fits under the plan's threshold."""
    if plan.method == "reallocate":
        a = shift_amount(plan.hypothesis)
        if allocation_count(sample.n, sample.n1) <= plan.exact_threshold:
            draws = reallocate_exact(
                sample, a, exact_threshold=plan.exact_threshold, spill_path=spill_path
            )
            return SimulationResult(draws, "reallocate", "exact", exact=True)
        draws = reallocate_mc(
            sample, a, plan.replicates, plan.seed, workers=workers, spill_path=spill_path
        )
        return SimulationResult(draws, "reallocate", plan.seed, exact=False)
    if plan.method == "resample_pooled":
        draws = resample_pooled(
            sample, plan.replicates, plan.seed, workers=workers, spill_path=spill_path
        )
        return SimulationResult(draws, "resample_pooled", plan.seed, exact=False)
    # resample_within; EqualMeans recenters, estimation mode does not
    if isinstance(plan.hypothesis, EqualMeans):
        draws = resample_equal_means(
            sample, plan.hypothesis.b, plan.replicates, plan.seed,
            workers=workers, spill_path=spill_path,
        )
        return SimulationResult(draws, "resample_equal_means", plan.seed, exact=False)
    draws = resample_within(
        sample, plan.replicates, plan.seed, workers=workers, spill_path=spill_path
    )
    return SimulationResult(draws, "resample_within", plan.seed, exact=False)
