"""The test statistic, sample-variance flavors, and moment summaries of draws.

Conventions, fixed once here so every module agrees:

* Variances of observed data use divisor n-1 (sample variances).
* Moments of simulated draws use divisor = replicate count: the draws are the
  distribution being described, not a sample from something bigger, and full
  enumeration must reproduce closed-form variances exactly.
* Skewness is m3/s^3 and excess kurtosis m4/s^4 - 3, central moments with the
  divisor above.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import TwoGroupSample


@dataclass(frozen=True)
class DistributionSummary:
    """Moment summary of a simulated (or enumerated) distribution of the statistic.

    skewness and excess_kurtosis are None when the draws are degenerate
    (zero variance leaves them undefined).
    """

    mean: float
    variance: float
    std_error: float
    skewness: float | None
    excess_kurtosis: float | None
    replicate_count: int
    method_tag: str
    seed: int | str

    @property
    def degenerate(self) -> bool:
        return self.skewness is None


def diff_in_means(sample: TwoGroupSample) -> float:
    """tau-hat: mean of group-1 outcomes minus mean of group-0 outcomes."""
    return float(sample.group(1).mean() - sample.group(0).mean())


def grand_variance(sample: TwoGroupSample) -> float:
    """s^2 about the single grand mean, divisor n-1."""
    return float(sample.outcomes.var(ddof=1))


def group_variance(sample: TwoGroupSample, w: int) -> float:
    """s_w^2 within group w, divisor n_w - 1."""
    return float(sample.group(w).var(ddof=1))


def summarize(draws, method_tag: str, seed: int | str) -> DistributionSummary:
    """Two-pass central moments m2..m4 of the draws, divisor = count.

    Two passes cost one extra sweep but avoid the catastrophic cancellation a
    naive sum-of-powers accumulator hits at millions of replicates.
    """
    x = np.asarray(draws, dtype=np.float64)
    if x.ndim != 1 or x.size < 2:
        raise ValueError("summarize needs at least 2 draws")
    mean = x.mean()
    d = x - mean
    d2 = d * d
    m2 = d2.mean()
    if m2 == 0.0:
        return DistributionSummary(
            mean=float(mean), variance=0.0, std_error=0.0,
            skewness=None, excess_kurtosis=None,
            replicate_count=x.size, method_tag=method_tag, seed=seed,
        )
    m3 = (d2 * d).mean()
    m4 = (d2 * d2).mean()
    return DistributionSummary(
        mean=float(mean),
        variance=float(m2),
        std_error=float(np.sqrt(m2)),
        skewness=float(m3 / m2**1.5),
        excess_kurtosis=float(m4 / m2**2 - 3.0),
        replicate_count=x.size,
        method_tag=method_tag,
        seed=seed,
    )


@dataclass
class PartialMoments:
    """Mergeable moment accumulator for deterministic parallel reduction.

    Workers accumulate disjoint chunks, then partials are merged in fixed
    (chunk index) order, so the result never depends on scheduling. Exact
    merge formulas for central moments up to order 4.
    """

    count: int = 0
    mean: float = 0.0
    m2: float = 0.0  # sum of (x-mean)^2, not averaged
    m3: float = 0.0
    m4: float = 0.0

    def update(self, chunk) -> "PartialMoments":
        x = np.asarray(chunk, dtype=np.float64)
        if x.size == 0:
            return self
        cm = x.mean()
        d = x - cm
        d2 = d * d
        other = PartialMoments(
            count=x.size, mean=float(cm),
            m2=float(d2.sum()), m3=float((d2 * d).sum()), m4=float((d2 * d2).sum()),
        )
        return self.merge(other)

    def merge(self, other: "PartialMoments") -> "PartialMoments":
        na, nb = self.count, other.count
        if na == 0:
            return other
        if nb == 0:
            return self
        n = na + nb
        delta = other.mean - self.mean
        d_n = delta / n
        m2 = self.m2 + other.m2 + delta * d_n * na * nb
        m3 = (
            self.m3 + other.m3
            + delta * d_n**2 * na * nb * (na - nb)
            + 3.0 * d_n * (na * other.m2 - nb * self.m2)
        )
        m4 = (
            self.m4 + other.m4
            + delta * d_n**3 * na * nb * (na * na - na * nb + nb * nb)
            + 6.0 * d_n**2 * (na * na * other.m2 + nb * nb * self.m2)
            + 4.0 * d_n * (na * other.m3 - nb * self.m3)
        )
        return PartialMoments(count=n, mean=self.mean + nb * d_n, m2=m2, m3=m3, m4=m4)

    def finalize(self, method_tag: str, seed: int | str) -> DistributionSummary:
        if self.count < 2:
            raise ValueError("need at least 2 accumulated draws")
        v = self.m2 / self.count
        if v == 0.0:
            return DistributionSummary(
                mean=self.mean, variance=0.0, std_error=0.0,
                skewness=None, excess_kurtosis=None,
                replicate_count=self.count, method_tag=method_tag, seed=seed,
            )
        mu3 = self.m3 / self.count
        mu4 = self.m4 / self.count
        return DistributionSummary(
            mean=self.mean, variance=v, std_error=float(np.sqrt(v)),
            skewness=float(mu3 / v**1.5), excess_kurtosis=float(mu4 / v**2 - 3.0),
            replicate_count=self.count, method_tag=method_tag, seed=seed,
        )
