"""P-values and the four confidence-interval constructions.

All intervals are two-sided at a caller-chosen level. The test-inversion
interval reuses one batch of reallocation subsets across every candidate
shift (shared base seed), which makes the p-value a monotone step function of
the shift and bisection on it well behaved.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import engine
from .data import TwoGroupSample
from .moments import diff_in_means, grand_variance, summarize
from .theory import var_sharp_reallocate

TAILS = ("right", "left", "two_sided")
CONVENTIONS = ("plain_proportion", "add_one")

# Bisection resolution for test inversion, in outcome units.
INVERSION_RESOLUTION = 0.005


class NumericalError(RuntimeError):
    """A search failed to converge (e.g. no bracket after widening twice)."""


@dataclass(frozen=True)
class InferenceReport:
    """A p-value or interval with enough metadata to reproduce it."""

    kind: str  # "p_value" | "interval"
    value: float | tuple[float, float]
    method: str
    replicates: int
    seed: int | str | None
    tail: str | None = None
    convention: str | None = None
    level: float | None = None
    recommended: bool = True

    def __post_init__(self):
        if self.kind == "p_value":
            if not 0.0 <= self.value <= 1.0:
                raise ValueError(f"p-value {self.value} outside [0, 1]")
        elif self.kind == "interval":
            lo, hi = self.value
            if not lo <= hi:
                raise ValueError(f"interval lower {lo} exceeds upper {hi}")
        else:
            raise ValueError(f"unknown report kind {self.kind!r}")

    def to_json(self) -> str:
        d = {
            "kind": self.kind,
            "value": list(self.value) if self.kind == "interval" else self.value,
            "method": self.method,
            "replicates": self.replicates,
            "seed": self.seed,
            "tail": self.tail,
            "convention": self.convention,
            "level": self.level,
            "recommended": self.recommended,
        }
        return json.dumps(d)

    @classmethod
    def from_json(cls, text: str) -> "InferenceReport":
        d = json.loads(text)
        if d["kind"] == "interval":
            d["value"] = tuple(d["value"])
        return cls(**d)

    def render(self) -> str:
        """One-line text form; interval endpoints shown at 2 decimals."""
        if self.kind == "p_value":
            body = f"p[{self.tail}] = {self.value:.6g}  ({self.convention})"
        else:
            lo, hi = self.value
            body = f"{100 * self.level:g}% CI = ({lo:.2f}, {hi:.2f})"
        note = "" if self.recommended else "  [not recommended]"
        return f"{self.method}: {body}  reps={self.replicates} seed={self.seed}{note}"


def p_value(
    draws,
    observed: float,
    tail: str = "right",
    convention: str = "plain_proportion",
    *,
    method: str = "simulated",
    seed: int | str | None = None,
) -> InferenceReport:
    """Proportion of draws at least as extreme as the observed statistic.

    plain_proportion is k/reps (can return 0); add_one is (k+1)/(reps+1),
    which never does.
    """
    x = np.asarray(draws, dtype=np.float64)
    if x.size < 1:
        raise ValueError("need at least 1 draw")
    if tail not in TAILS:
        raise ValueError(f"tail must be one of {TAILS}")
    if convention not in CONVENTIONS:
        raise ValueError(f"convention must be one of {CONVENTIONS}")
    if tail == "right":
        k = int(np.count_nonzero(x >= observed))
    elif tail == "left":
        k = int(np.count_nonzero(x <= observed))
    else:
        k = int(np.count_nonzero(np.abs(x) >= abs(observed)))
    p = k / x.size if convention == "plain_proportion" else (k + 1) / (x.size + 1)
    return InferenceReport(
        kind="p_value", value=float(p), method=method, replicates=x.size,
        seed=seed, tail=tail, convention=convention,
    )


def _tail_p(sample, a, observed, replicates, seed, workers, side) -> float:
    draws = engine.reallocate_mc(sample, a, replicates, seed, workers=workers)
    if side == "right":
        return float(np.count_nonzero(draws >= observed)) / draws.size
    return float(np.count_nonzero(draws <= observed)) / draws.size


def _bisect_nondecreasing(f, lo: float, hi: float, target: float, resolution: float) -> float:
    """Root of f(a) = target for nondecreasing f with f(lo) < target <= f(hi).

    Falls back to a grid scan at the same resolution if the evaluations turn
    out non-monotone (Monte Carlo pathology; cannot happen with shared-seed
    reallocation draws, where f is monotone by construction).
    """
    f_lo, f_hi = f(lo), f(hi)
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        f_mid = f(mid)
        if not (f_lo - 1e-12 <= f_mid <= f_hi + 1e-12):
            return _grid_scan(f, lo, hi, target, resolution)
        if f_mid < target:
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
    return 0.5 * (lo + hi)


def _grid_scan(f, lo: float, hi: float, target: float, resolution: float) -> float:
    steps = max(2, math.ceil((hi - lo) / resolution))
    grid = np.linspace(lo, hi, steps + 1)
    for a in grid:
        if f(float(a)) >= target:
            return float(a)
    raise NumericalError("grid scan found no crossing; p-value never reaches target")


def _bracketed_root(f, start_lo, start_hi, target, widen_side, resolution):
    """Bisection with up to two bracket widenings on widen_side ('lo'/'hi')."""
    lo, hi = start_lo, start_hi
    for _ in range(3):
        if f(lo) < target <= f(hi):
            return _bisect_nondecreasing(f, lo, hi, target, resolution)
        if widen_side == "lo":
            lo -= 2.0 * (hi - lo)
        else:
            hi += 2.0 * (hi - lo)
    raise NumericalError(
        f"no bracket for target {target} after widening twice: "
        f"f({lo}) = {f(lo):.6g}, f({hi}) = {f(hi):.6g}"
    )


def ci_invert_reallocation(
    sample: TwoGroupSample,
    level: float,
    replicates: int,
    seed: int,
    *,
    workers: int = 1,
) -> InferenceReport:
    """Confidence interval as the additive shifts a not rejected by one-sided
    size-(1-level)/2 reallocation tests of Y(1) = Y(0) + a.

    Every candidate a reuses the same seed, hence the same subsets: the draws
    are affine in a, so each side's p-value is monotone in a and bracketed
    bisection (from tau-hat +/- 4 analytic sharp-null SEs, resolved to 0.005)
    finds where it crosses the test size.
    """
    if not 0.0 < level < 1.0:
        raise ValueError("level must be in (0, 1)")
    alpha = (1.0 - level) / 2.0
    tau = diff_in_means(sample)
    se = math.sqrt(var_sharp_reallocate(grand_variance(sample), sample.n1, sample.n0))
    span = 4.0 * se

    # Lower endpoint: smallest a whose right-tail p reaches alpha. The
    # right-tail p increases with a (draws shift up), so it is nondecreasing.
    def p_right(a):
        return _tail_p(sample, a, tau, replicates, seed, workers, "right")

    lower = _bracketed_root(p_right, tau - span, tau, alpha, "lo", INVERSION_RESOLUTION)

    # Upper endpoint: largest a whose left-tail p is still >= alpha. The
    # left-tail p decreases in a, so run the same search mirrored in b = -a,
    # where it is nondecreasing again.
    def p_left_mirrored(b):
        return _tail_p(sample, -b, tau, replicates, seed, workers, "left")

    upper = -_bracketed_root(
        p_left_mirrored, -(tau + span), -tau, alpha, "lo", INVERSION_RESOLUTION
    )
    return InferenceReport(
        kind="interval", value=(float(lower), float(upper)), method="invert_reallocation",
        replicates=replicates, seed=seed, level=level,
    )


def _t_star(level: float, n1: int, n0: int) -> float:
    return float(stats.t.ppf(1.0 - (1.0 - level) / 2.0, df=min(n1, n0) - 1))


def ci_bootstrap_t(
    sample: TwoGroupSample,
    level: float,
    replicates: int,
    seed: int,
    *,
    workers: int = 1,
) -> InferenceReport:
    """tau-hat +/- t* SE with SE estimated from within-group resampling and
    t* on min(n1, n0) - 1 degrees of freedom (the small-sample convention the
    reference results use; Welch df would not reproduce them)."""
    if not 0.0 < level < 1.0:
        raise ValueError("level must be in (0, 1)")
    draws = engine.resample_within(sample, replicates, seed, workers=workers)
    se = summarize(draws, "resample_within", seed).std_error
    tau = diff_in_means(sample)
    h = _t_star(level, sample.n1, sample.n0) * se
    return InferenceReport(
        kind="interval", value=(tau - h, tau + h), method="bootstrap_t",
        replicates=replicates, seed=seed, level=level,
    )


def ci_bootstrap_percentile(draws, level: float) -> InferenceReport:
    """Central (1-level)/2 quantiles of within-group resampling draws, linear
    interpolation between order statistics."""
    if not 0.0 < level < 1.0:
        raise ValueError("level must be in (0, 1)")
    x = np.asarray(draws, dtype=np.float64)
    if x.size < 2.0 / (1.0 - level):
        raise ValueError(
            f"{x.size} draws cannot resolve {level:.3g}-level quantiles; "
            f"need at least {math.ceil(2.0 / (1.0 - level))}"
        )
    alpha = (1.0 - level) / 2.0
    lo, hi = np.quantile(x, [alpha, 1.0 - alpha], method="linear")
    return InferenceReport(
        kind="interval", value=(float(lo), float(hi)), method="bootstrap_percentile",
        replicates=x.size, seed=None, level=level,
    )


def ci_reallocation_sharp_se(
    sample: TwoGroupSample,
    level: float,
    replicates: int,
    seed: int,
    *,
    workers: int = 1,
) -> InferenceReport:
    """tau-hat +/- t* SE using the sharp-null reallocation SE.

    Flagged not recommended: it fixes the null at a = 0, where the
    reallocation variance is generally larger than at the shifts an interval
    actually has to cover.
    """
    if not 0.0 < level < 1.0:
        raise ValueError("level must be in (0, 1)")
    draws = engine.reallocate_mc(sample, 0.0, replicates, seed, workers=workers)
    se = summarize(draws, "reallocate", seed).std_error
    tau = diff_in_means(sample)
    h = _t_star(level, sample.n1, sample.n0) * se
    return InferenceReport(
        kind="interval", value=(tau - h, tau + h), method="reallocation_sharp_se",
        replicates=replicates, seed=seed, level=level, recommended=False,
    )
