"""Closed-form variances of the difference in means, one operation per cell.

Every operation takes explicit numeric inputs rather than a sample, because
some inputs (population variances, the unit-level effect variance) are not
observable from data and must come from an oracle table or a synthetic
population. Callers compute sample quantities via the moments module.
"""
from __future__ import annotations

from dataclasses import dataclass

from .moments import diff_in_means, grand_variance


class TheoryError(ValueError):
    """Inconsistent variance inputs (negative result where none is possible)."""


def _check_sizes(n1: int, n0: int) -> None:
    if n1 < 2 or n0 < 2:
        raise ValueError(f"group sizes must be at least 2, got n1={n1}, n0={n0}")


def var_sharp_reallocate(s2: float, n1: int, n0: int) -> float:
    """Variance under random allocation, and equally under reallocation, of a
    sharp null: s^2 (1/n1 + 1/n0)."""
    _check_sizes(n1, n0)
    if s2 < 0:
        raise ValueError("variance input must be nonnegative")
    return s2 * (1.0 / n1 + 1.0 / n0)


def var_sharp_resample(s2: float, n1: int, n0: int) -> float:
    """Variance when resampling the pooled sample with replacement under a
    sharp null: s^2 (1/n1 + 1/n0) (n-1)/n, biased low in small samples."""
    n = n1 + n0
    return var_sharp_reallocate(s2, n1, n0) * (n - 1) / n


def var_sharp_random_sampling(sigma2: float, n1: int, n0: int) -> float:
    """Variance under random sampling of both groups from one population with
    variance sigma^2 (a population parameter, so oracle-only): sigma^2 (1/n1 + 1/n0)."""
    _check_sizes(n1, n0)
    if sigma2 < 0:
        raise ValueError("variance input must be nonnegative")
    return sigma2 * (1.0 / n1 + 1.0 / n0)


def var_reallocate_additive(s2: float, tau_hat: float, a: float, n1: int, n0: int) -> float:
    """Variance of the reallocation distribution under the additive hypothesis
    Y(1) = Y(0) + a:

        [s^2 + n0*n1*a/(n(n-1)) * (a - 2*tau_hat)] * (1/n1 + 1/n0)

    Equals the sharp-null value at a = 0 and a = 2*tau_hat, and is minimized
    at a = tau_hat. Must match the enumerated variance on additively imputed
    data exactly.
    """
    _check_sizes(n1, n0)
    n = n1 + n0
    bracket = s2 + (n0 * n1 * a) / (n * (n - 1.0)) * (a - 2.0 * tau_hat)
    if bracket < 0:
        raise TheoryError(
            f"negative imputed variance ({bracket:.6g}); inputs are not consistent "
            f"with any real dataset"
        )
    return bracket * (1.0 / n1 + 1.0 / n0)


def var_estimation_random_allocation(
    s1_star2: float, s0_star2: float, s10_star2: float, n1: int, n0: int
) -> float:
    """True variance of tau-hat under random allocation, for estimation:

        s*_1^2/n1 + s*_0^2/n0 - s*_{1-0}^2/n

    The inputs are variances over ALL units' potential outcomes, so only an
    oracle table can supply them. Dropping the (unidentifiable) third term
    gives the familiar conservative two-term bound.
    """
    _check_sizes(n1, n0)
    if min(s1_star2, s0_star2, s10_star2) < 0:
        raise ValueError("variance inputs must be nonnegative")
    out = s1_star2 / n1 + s0_star2 / n0 - s10_star2 / (n1 + n0)
    if out < 0:
        raise TheoryError(f"inconsistent variance triple gives negative variance {out:.6g}")
    return out


def var_estimation_random_sampling(sigma1_2: float, sigma0_2: float, n1: int, n0: int) -> float:
    """Variance under independent random sampling of each group:
    sigma_1^2/n1 + sigma_0^2/n0 (population parameters)."""
    _check_sizes(n1, n0)
    if min(sigma1_2, sigma0_2) < 0:
        raise ValueError("variance inputs must be nonnegative")
    return sigma1_2 / n1 + sigma0_2 / n0


def var_estimation_resample(s1_2: float, s0_2: float, n1: int, n0: int) -> float:
    """Variance when resampling within groups (two independent with-replacement
    samples): (s1^2/n1)(n1-1)/n1 + (s0^2/n0)(n0-1)/n0."""
    _check_sizes(n1, n0)
    if min(s1_2, s0_2) < 0:
        raise ValueError("variance inputs must be nonnegative")
    return (s1_2 / n1) * (n1 - 1) / n1 + (s0_2 / n0) * (n0 - 1) / n0


MECHANISMS = ("random_allocation", "random_sampling", "reallocate", "resample_pooled", "resample_within")
CONTEXTS = ("sharp_null", "additive", "estimation")

# The only mechanism x context cells with a derived formula. Anything else
# (e.g. resample_within under a sharp null) has no closed form here and is
# rejected at construction.
_DISPATCH = {
    ("random_allocation", "sharp_null"): (var_sharp_reallocate, ("s2", "n1", "n0")),
    ("reallocate", "sharp_null"): (var_sharp_reallocate, ("s2", "n1", "n0")),
    ("random_sampling", "sharp_null"): (var_sharp_random_sampling, ("sigma2", "n1", "n0")),
    ("resample_pooled", "sharp_null"): (var_sharp_resample, ("s2", "n1", "n0")),
    ("reallocate", "additive"): (var_reallocate_additive, ("s2", "tau_hat", "a", "n1", "n0")),
    ("random_allocation", "estimation"): (
        var_estimation_random_allocation,
        ("s1_star2", "s0_star2", "s10_star2", "n1", "n0"),
    ),
    ("random_sampling", "estimation"): (
        var_estimation_random_sampling,
        ("sigma1_2", "sigma0_2", "n1", "n0"),
    ),
    ("resample_within", "estimation"): (var_estimation_resample, ("s1_2", "s0_2", "n1", "n0")),
}


@dataclass(frozen=True)
class VarianceScenario:
    """A (data mechanism, context) cell of the variance table.

    Only cells with a derived formula are constructible; ``variance(**inputs)``
    dispatches to it, and ``required_inputs`` names what it needs.
    """

    data_mechanism: str
    context: str

    def __post_init__(self):
        if self.data_mechanism not in MECHANISMS:
            raise ValueError(f"unknown mechanism {self.data_mechanism!r}")
        if self.context not in CONTEXTS:
            raise ValueError(f"unknown context {self.context!r}")
        if (self.data_mechanism, self.context) not in _DISPATCH:
            raise ValueError(
                f"no variance formula for {self.data_mechanism} under {self.context}"
            )

    @property
    def required_inputs(self) -> tuple[str, ...]:
        return _DISPATCH[(self.data_mechanism, self.context)][1]

    def variance(self, **inputs: float) -> float:
        fn, names = _DISPATCH[(self.data_mechanism, self.context)]
        missing = [k for k in names if k not in inputs]
        extra = [k for k in inputs if k not in names]
        if missing or extra:
            raise ValueError(
                f"{self.data_mechanism}/{self.context} needs exactly {names}; "
                f"missing={missing}, unexpected={extra}"
            )
        return fn(*(inputs[k] for k in names))


def variance_curve(sample, a_min: float, a_max: float, steps: int):
    """Evaluate the additive-shift reallocation variance on an even grid.

    Returns a list of (a, variance) pairs. The curve is an upward parabola in
    a with vertex at a = tau-hat.
    """
    if steps < 3:
        raise ValueError("steps must be at least 3")
    if not a_min < a_max:
        raise ValueError("need a_min < a_max")
    s2 = grand_variance(sample)
    tau = diff_in_means(sample)
    n1, n0 = sample.n1, sample.n0
    span = a_max - a_min
    out = []
    for i in range(steps):
        a = a_min + span * i / (steps - 1)
        out.append((a, var_reallocate_additive(s2, tau, a, n1, n0)))
    return out


def curve_to_csv(points) -> str:
    """Two-column CSV rendering of a variance curve."""
    lines = ["a,variance"]
    lines += [f"{a!r},{v!r}" for a, v in points]
    return "\n".join(lines) + "\n"
