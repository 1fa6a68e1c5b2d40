"""Brute-force and synthetic-population ground truth.

Everything here recomputes statistics with deliberately naive, obviously
correct code paths, sharing no kernels with the engine: when engine and
oracle disagree, something is actually broken. Test-suite-facing only.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .engine import DEFAULT_EXACT_THRESHOLD, ExactSizeError, PotentialOutcomeTable, _M_SAMPLING, _chunk_rng, CHUNK


@dataclass(frozen=True)
class SyntheticPopulation:
    """Two finite value lists standing in for the group populations.

    Population moments use divisor = population size; they are the true
    parameters, not estimates.
    """

    group1_values: np.ndarray
    group0_values: np.ndarray

    def __post_init__(self):
        g1 = np.asarray(self.group1_values, dtype=np.float64)
        g0 = np.asarray(self.group0_values, dtype=np.float64)
        if g1.ndim != 1 or g0.ndim != 1 or g1.size < 2 or g0.size < 2:
            raise ValueError("population groups must be vectors of at least 2 values")
        if not (np.all(np.isfinite(g1)) and np.all(np.isfinite(g0))):
            raise ValueError("population values must be finite")
        g1.flags.writeable = False
        g0.flags.writeable = False
        object.__setattr__(self, "group1_values", g1)
        object.__setattr__(self, "group0_values", g0)

    @property
    def mu1(self) -> float:
        return float(self.group1_values.mean())

    @property
    def mu0(self) -> float:
        return float(self.group0_values.mean())

    @property
    def sigma1_2(self) -> float:
        return float(self.group1_values.var())

    @property
    def sigma0_2(self) -> float:
        return float(self.group0_values.var())

    @property
    def sigma2(self) -> float:
        """Pooled population variance, both groups concatenated."""
        return float(np.concatenate([self.group1_values, self.group0_values]).var())

    @property
    def tau_rs(self) -> float:
        return self.mu1 - self.mu0


def allocation_count(n: int, n1: int) -> int:
    return math.comb(n, n1)


def enumerate_allocations(n: int, n1: int, *, exact_threshold: int = DEFAULT_EXACT_THRESHOLD):
    """Yield every assignment vector with n1 ones, lexicographic subset order."""
    if not 0 <= n1 <= n:
        raise ValueError(f"need 0 <= n1 <= n, got n1={n1}, n={n}")
    count = allocation_count(n, n1)
    if count > exact_threshold:
        raise ExactSizeError(
            f"C({n}, {n1}) = {count:,} exceeds the exact threshold {exact_threshold:,}"
        )
    for subset in combinations(range(n), n1):
        w = np.zeros(n, dtype=np.int64)
        w[list(subset)] = 1
        yield w


def allocation_covariance_check(n: int, n1: int) -> float:
    """Max |empirical cov(W) entry - target| over full enumeration.

    Targets: diagonal p(1-p), off-diagonal -p(1-p)/(n-1). Should be zero up
    to accumulated round-off.
    """
    ws = np.array(list(enumerate_allocations(n, n1)), dtype=np.float64)
    count = ws.shape[0]
    mean = ws.mean(axis=0)
    cov = ws.T @ ws / count - np.outer(mean, mean)
    p = n1 / n
    target = np.full((n, n), -p * (1.0 - p) / (n - 1.0))
    np.fill_diagonal(target, p * (1.0 - p))
    return float(np.abs(cov - target).max())


def allocation_draws(table: PotentialOutcomeTable, n1: int) -> np.ndarray:
    """tau-hat for every allocation, one naive computation per allocation."""
    draws = []
    for w in enumerate_allocations(table.n, n1):
        treated = w == 1
        observed = np.where(treated, table.y1, table.y0)
        draws.append(observed[treated].mean() - observed[~treated].mean())
    return np.array(draws, dtype=np.float64)


def true_allocation_variance(table: PotentialOutcomeTable, n1: int) -> float:
    """Exact variance of tau-hat over all allocations (divisor = count)."""
    return float(allocation_draws(table, n1).var())


def estimand_tau_ra(table: PotentialOutcomeTable) -> float:
    """True average treatment effect for the units at hand: mean of Y(1) - Y(0)."""
    return float(np.mean(table.y1 - table.y0))


def repeated_sampling_variance(
    pop: SyntheticPopulation, n1: int, n0: int, draws: int, seed: int
) -> float:
    """Empirical variance of tau-hat over repeated stratified with-replacement
    draws from the population; should match sigma1^2/n1 + sigma0^2/n0 within
    Monte Carlo error. Chunked substreams, same determinism contract as the
    engine."""
    if draws < 10_000:
        raise ValueError("need at least 10^4 draws for a stable variance")
    if n1 < 1 or n0 < 1:
        raise ValueError("group sizes must be positive")
    g1, g0 = pop.group1_values, pop.group0_values
    parts = []
    for ci in range(-(-draws // CHUNK)):
        rng = _chunk_rng(seed, _M_SAMPLING, ci)
        i1 = rng.integers(0, g1.size, size=(CHUNK, n1))
        i0 = rng.integers(0, g0.size, size=(CHUNK, n0))
        parts.append(g1[i1].mean(axis=1) - g0[i0].mean(axis=1))
    taus = np.concatenate(parts)[:draws]
    return float(taus.var())
