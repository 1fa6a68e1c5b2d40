import math

import numpy as np
import pytest
from scipy import stats

from siminfer.data import load_fixture
from siminfer.engine import resample_within
from siminfer.inference import (
    InferenceReport,
    NumericalError,
    _bisect_nondecreasing,
    _bracketed_root,
    _t_star,
    ci_bootstrap_percentile,
    ci_bootstrap_t,
    ci_invert_reallocation,
    ci_reallocation_sharp_se,
    p_value,
)


@pytest.fixture(scope="module")
def sleep():
    return load_fixture("sleep_caffeine", "words_recalled", "treatment", "Sleep")[0]


def test_p_value_counting_by_hand():
    draws = np.array([-3.0, -1.0, 0.0, 2.0, 3.0])
    assert p_value(draws, 2.0).value == 2 / 5
    assert p_value(draws, 2.0, tail="left").value == 4 / 5
    assert p_value(draws, 2.0, tail="two_sided").value == 3 / 5
    assert p_value(draws, 2.0, convention="add_one").value == 3 / 6
    # ties count as at least as extreme
    assert p_value(draws, 3.0).value == 1 / 5
    assert p_value(draws, 99.0).value == 0.0
    assert p_value(draws, 99.0, convention="add_one").value == 1 / 6


def test_p_value_monotone_in_observed():
    rng = np.random.default_rng(0)
    draws = rng.normal(size=2000)
    ps = [p_value(draws, obs).value for obs in np.linspace(-3, 3, 13)]
    assert all(a >= b for a, b in zip(ps, ps[1:]))


def test_p_value_validation():
    draws = np.arange(5.0)
    with pytest.raises(ValueError):
        p_value(draws, 1.0, tail="upper")
    with pytest.raises(ValueError):
        p_value(draws, 1.0, convention="mid")
    with pytest.raises(ValueError):
        p_value(np.array([]), 1.0)


def test_report_validation_and_json_round_trip():
    rep = InferenceReport(
        kind="interval", value=(0.5, 6.5), method="bootstrap_t",
        replicates=1000, seed=42, level=0.95,
    )
    assert InferenceReport.from_json(rep.to_json()) == rep
    prep = p_value(np.arange(9.0), 5.0, seed=3, method="reallocate")
    assert InferenceReport.from_json(prep.to_json()) == prep
    with pytest.raises(ValueError):
        InferenceReport(kind="p_value", value=1.5, method="m", replicates=1, seed=0)
    with pytest.raises(ValueError):
        InferenceReport(kind="interval", value=(2.0, 1.0), method="m", replicates=1, seed=0)
    with pytest.raises(ValueError):
        InferenceReport(kind="magic", value=0.5, method="m", replicates=1, seed=0)


def test_render_flags_not_recommended():
    rep = InferenceReport(
        kind="interval", value=(-0.312, 6.312), method="reallocation_sharp_se",
        replicates=10, seed=1, level=0.95, recommended=False,
    )
    assert "[not recommended]" in rep.render()
    assert "(-0.31, 6.31)" in rep.render()


def test_bisection_finds_step_crossing():
    f = lambda a: 0.0 if a < 1.234 else 1.0
    root = _bisect_nondecreasing(f, 0.0, 4.0, 0.5, 1e-4)
    assert abs(root - 1.234) <= 1e-4


def test_non_monotone_falls_back_to_grid_scan():
    calls = []

    def dip(a):
        calls.append(a)
        return -1.0 if 1.9 < a < 2.1 else a  # local dip breaks bisection

    root = _bisect_nondecreasing(dip, 0.0, 4.0, 3.0, 0.005)
    assert abs(root - 3.0) <= 0.005
    assert any(1.9 < a < 2.1 for a in calls)  # it did hit the dip


def test_bracket_widens_then_gives_up():
    # f never reaches the target on the hi side: two widenings then failure
    f = lambda a: 0.0
    with pytest.raises(NumericalError, match="widening twice"):
        _bracketed_root(f, 0.0, 1.0, 0.5, "hi", 0.01)
    # and a root that only exists after widening is still found
    g = lambda a: a
    root = _bracketed_root(g, 4.0, 5.0, 1.0, "lo", 1e-3)
    assert abs(root - 1.0) <= 1e-3


def test_grid_scan_no_crossing_raises():
    from siminfer.inference import _grid_scan

    with pytest.raises(NumericalError, match="no crossing"):
        _grid_scan(lambda a: 0.0, 0.0, 1.0, 0.5, 0.1)


def test_t_star_uses_smaller_group_df():
    assert _t_star(0.95, 12, 12) == pytest.approx(stats.t.ppf(0.975, 11))
    assert _t_star(0.95, 30, 5) == pytest.approx(stats.t.ppf(0.975, 4))
    assert _t_star(0.90, 12, 12) < _t_star(0.99, 12, 12)


def test_interval_levels_validated(sleep):
    for fn in (ci_invert_reallocation, ci_bootstrap_t, ci_reallocation_sharp_se):
        with pytest.raises(ValueError):
            fn(sleep, 1.5, 1000, 0)
    with pytest.raises(ValueError):
        ci_bootstrap_percentile(np.arange(100.0), 0.999)  # too few draws
    with pytest.raises(ValueError):
        ci_bootstrap_percentile(np.arange(100.0), 0.0)


def test_percentile_interval_is_plain_quantiles():
    draws = np.arange(1000.0)
    rep = ci_bootstrap_percentile(draws, 0.9)
    alpha = (1.0 - 0.9) / 2.0
    lo, hi = np.quantile(draws, [alpha, 1.0 - alpha])
    assert rep.value == (lo, hi)
    assert rep.method == "bootstrap_percentile" and rep.seed is None


def test_invert_reallocation_on_bundled_study(sleep):
    # integer outcomes make the p-curve a step function, and a = 0 sits right
    # on a step, so this needs the full replicate budget to localize
    rep = ci_invert_reallocation(sleep, 0.95, 1_000_000, 42)
    lo, hi = rep.value
    assert lo == pytest.approx(0.0, abs=0.05)
    assert hi == pytest.approx(6.0, abs=0.05)
    assert rep.method == "invert_reallocation" and rep.recommended
    # endpoints certify themselves: each one-sided test sits at its size
    from siminfer.engine import reallocate_mc
    from siminfer.moments import diff_in_means

    tau = diff_in_means(sleep)
    draws_lo = reallocate_mc(sleep, lo, 1_000_000, 42)
    p_lo = (draws_lo >= tau).mean()
    assert p_lo == pytest.approx(0.025, abs=0.004)


def test_bootstrap_t_and_sharp_se_shapes(sleep):
    boot = ci_bootstrap_t(sleep, 0.95, 100_000, 42)
    sharp = ci_reallocation_sharp_se(sleep, 0.95, 100_000, 42)
    assert boot.recommended and not sharp.recommended
    b_lo, b_hi = boot.value
    s_lo, s_hi = sharp.value
    # both are centered on tau-hat = 3; the sharp-null SE is wider
    assert b_lo + b_hi == pytest.approx(6.0, rel=1e-9)
    assert s_lo + s_hi == pytest.approx(6.0, rel=1e-9)
    assert (s_hi - s_lo) > (b_hi - b_lo)
    assert b_lo == pytest.approx(0.05, abs=0.1)
    assert b_hi == pytest.approx(5.95, abs=0.1)


def test_percentile_narrower_than_t_on_small_groups(sleep):
    # with 12 per group the t multiplier (2.2 on 11 df) pushes the t interval
    # past the raw bootstrap quantiles, so the percentile interval is inside
    draws = resample_within(sleep, 100_000, 42)
    perc = ci_bootstrap_percentile(draws, 0.95)
    boot = ci_bootstrap_t(sleep, 0.95, 100_000, 42)
    assert perc.value[0] > boot.value[0]
    assert perc.value[1] < boot.value[1]
    width_ratio = (perc.value[1] - perc.value[0]) / (boot.value[1] - boot.value[0])
    assert width_ratio == pytest.approx(2 * 1.96 / (2 * _t_star(0.95, 12, 12)), abs=0.03)
