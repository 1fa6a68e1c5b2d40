"""End-to-end acceptance checks for the bundled studies and the engine/theory
contracts. One criterion per test; each prints a single PASS/FAIL line with
the computed values (bypassing capture so the lines always show).

The heavy Monte Carlo runs share module-scoped draws: one million replicates
per method per dataset at seed 42, plus four million for the shape
diagnostics. Expect a couple of minutes total.
"""
import math
import time

import numpy as np
import pytest

from siminfer.data import EqualMeans, SharpNull, TwoGroupSample, load_fixture, validate_manifest
from siminfer.engine import (
    PlanError,
    PotentialOutcomeTable,
    SimulationPlan,
    allocation_count,
    impute_additive,
    reallocate_exact,
    reallocate_mc,
    resample_equal_means,
    resample_pooled,
    resample_within,
)
from siminfer.inference import (
    ci_bootstrap_t,
    ci_invert_reallocation,
    ci_reallocation_sharp_se,
    p_value,
)
from siminfer.moments import diff_in_means, grand_variance, group_variance, summarize
from siminfer.oracle import (
    allocation_covariance_check,
    allocation_draws,
    true_allocation_variance,
)
from siminfer.theory import (
    var_estimation_random_allocation,
    var_estimation_resample,
    var_reallocate_additive,
    var_sharp_reallocate,
    var_sharp_resample,
)

REPS = 1_000_000
BIG_REPS = 4_000_000
SEED = 42


@pytest.fixture()
def announce(capsys):
    def _announce(ok: bool, text: str):
        with capsys.disabled():
            print(f"{'PASS' if ok else 'FAIL'} {text}", flush=True)
        assert ok, text

    return _announce


@pytest.fixture(scope="module")
def sleep():
    sample, manifest = load_fixture("sleep_caffeine", "words_recalled", "treatment", "Sleep")
    assert validate_manifest(sample, manifest)
    return sample


@pytest.fixture(scope="module")
def acs():
    sample, manifest = load_fixture("acs_income", "income", "sex", "Male")
    assert validate_manifest(sample, manifest)
    return sample


@pytest.fixture(scope="module")
def mc(sleep, acs):
    """(dataset, method) -> (draws at 10^6 reps seed 42, elapsed seconds)."""
    out = {}
    for name, sample in (("sleep", sleep), ("acs", acs)):
        for method, fn in (
            ("reallocate", lambda s: reallocate_mc(s, 0.0, REPS, SEED)),
            ("resample_pooled", lambda s: resample_pooled(s, REPS, SEED)),
            ("resample_within", lambda s: resample_within(s, REPS, SEED)),
            ("resample_equal_means", lambda s: resample_equal_means(s, 0.0, REPS, SEED)),
        ):
            t0 = time.perf_counter()
            draws = fn(sample)
            out[(name, method)] = (draws, time.perf_counter() - t0)
    return out


def analytic_ses(sample):
    s2 = grand_variance(sample)
    n1, n0 = sample.n1, sample.n0
    return (
        math.sqrt(var_sharp_reallocate(s2, n1, n0)),
        math.sqrt(var_sharp_resample(s2, n1, n0)),
        math.sqrt(
            var_estimation_resample(group_variance(sample, 1), group_variance(sample, 0), n1, n0)
        ),
    )


def test_criterion_1_sleep_analytic_ses(sleep, announce):
    analytic_ses(sleep)  # warm up before timing
    t0 = time.perf_counter()
    ses = analytic_ses(sleep)
    elapsed = time.perf_counter() - t0
    want = (1.505, 1.473, 1.340)
    ok = all(abs(g - w) <= 0.001 for g, w in zip(ses, want)) and elapsed < 1e-3
    announce(
        ok,
        "criterion 1: sleep analytic SEs ({:.6f}, {:.6f}, {:.6f}) within 0.001 of {}, "
        "{:.3f} ms".format(*ses, want, elapsed * 1e3),
    )


def test_criterion_2_acs_analytic_ses(acs, announce):
    ses = analytic_ses(acs)
    want = (5.034, 5.028, 4.962)
    ok = all(abs(g - w) <= 0.001 for g, w in zip(ses, want))
    announce(
        ok,
        "criterion 2: ACS analytic SEs ({:.6f}, {:.6f}, {:.6f}) within 0.001 of {}".format(
            *ses, want
        ),
    )


def test_criterion_3_monte_carlo_ses_match_analytic(sleep, acs, mc, announce):
    checks = []
    for name, sample in (("sleep", sleep), ("acs", acs)):
        targets = dict(zip(("reallocate", "resample_pooled", "resample_within"), analytic_ses(sample)))
        for method, want in targets.items():
            draws, elapsed = mc[(name, method)]
            got = summarize(draws, method, SEED).std_error
            checks.append((name, method, got, want, abs(got / want - 1.0), elapsed))
    ok = all(rel <= 0.005 and elapsed <= 60.0 for _, _, _, _, rel, elapsed in checks)
    worst = max(checks, key=lambda c: c[4])
    slowest = max(checks, key=lambda c: c[5])
    announce(
        ok,
        f"criterion 3: 6 empirical SEs at 10^6 reps within 0.5% of analytic "
        f"(worst {worst[0]}/{worst[1]} rel {worst[4]:.2e}), slowest run "
        f"{slowest[5]:.1f}s < 60s",
    )


def test_criterion_4_p_values(sleep, acs, mc, announce):
    tau_s = diff_in_means(sleep)
    p_sleep = {
        m: p_value(mc[("sleep", m)][0], tau_s).value
        for m in ("reallocate", "resample_pooled", "resample_equal_means")
    }
    want_sleep = {"reallocate": 0.025, "resample_pooled": 0.022, "resample_equal_means": 0.013}
    sleep_ok = all(abs(p_sleep[m] - want_sleep[m]) <= 0.002 for m in want_sleep)

    tau_a = diff_in_means(acs)
    p_re = p_value(mc[("acs", "reallocate")][0], tau_a).value
    p_po = p_value(mc[("acs", "resample_pooled")][0], tau_a).value
    p_eq = p_value(mc[("acs", "resample_equal_means")][0], tau_a).value
    acs_ok = (
        p_re < 1e-3 and p_po < 1e-3 and p_po > p_re and abs(p_eq - 2.6e-4) <= 1e-4
    )
    announce(
        sleep_ok and acs_ok,
        f"criterion 4: sleep p ({p_sleep['reallocate']:.6g}, {p_sleep['resample_pooled']:.6g}, "
        f"{p_sleep['resample_equal_means']:.6g}) within 0.002 of (0.025, 0.022, 0.013); "
        f"ACS p ({p_re:.3g}, {p_po:.3g}, {p_eq:.3g}) with both tails < 1e-3, "
        f"pooled > reallocating, equal-means within 1e-4 of 2.6e-4",
    )


def test_criterion_5_intervals(sleep, acs, announce):
    cases = [
        ("sleep", sleep, 0.05, (0.00, 6.00), (-0.31, 6.31), (0.05, 5.95)),
        ("acs", acs, 0.10, (9.13, 28.46), (8.89, 28.72), (9.03, 28.58)),
    ]
    details = []
    ok = True
    for name, sample, tol, want_inv, want_sharp, want_boot in cases:
        got_inv = ci_invert_reallocation(sample, 0.95, REPS, SEED).value
        got_sharp = ci_reallocation_sharp_se(sample, 0.95, REPS, SEED).value
        got_boot = ci_bootstrap_t(sample, 0.95, REPS, SEED).value
        for got, want in ((got_inv, want_inv), (got_sharp, want_sharp), (got_boot, want_boot)):
            ok = ok and all(abs(g - w) <= tol for g, w in zip(got, want))
        details.append(
            f"{name} ({got_inv[0]:.3f},{got_inv[1]:.3f})/({got_sharp[0]:.3f},{got_sharp[1]:.3f})"
            f"/({got_boot[0]:.3f},{got_boot[1]:.3f}) vs {want_inv}/{want_sharp}/{want_boot} "
            f"tol {tol}"
        )
    announce(ok, "criterion 5: intervals " + "; ".join(details))


def test_criterion_6_acs_shape_diagnostics(acs, announce):
    realloc = summarize(reallocate_mc(acs, 0.0, BIG_REPS, SEED), "reallocate", SEED)
    within = summarize(resample_within(acs, BIG_REPS, SEED), "resample_within", SEED)
    pooled = summarize(resample_pooled(acs, BIG_REPS, SEED), "resample_pooled", SEED)
    ok = (
        abs(within.skewness - 0.15) <= 0.03
        and abs(realloc.excess_kurtosis - (-0.17)) <= 0.03
        and abs(within.excess_kurtosis - 0.08) <= 0.03
        and abs(pooled.excess_kurtosis - 0.08) <= 0.03
    )
    announce(
        ok,
        f"criterion 6: ACS at 4x10^6 reps: within-resampling skewness "
        f"{within.skewness:.4f} (0.15 +/- 0.03); excess kurtosis reallocating "
        f"{realloc.excess_kurtosis:.4f} (-0.17 +/- 0.03), resampling "
        f"{within.excess_kurtosis:.4f} and {pooled.excess_kurtosis:.4f} (0.08 +/- 0.03)",
    )


def test_criterion_7_exactness(announce):
    rng = np.random.default_rng(123)
    rel_errs = []

    def rel(a, b):
        err = abs(a - b) / max(abs(a), abs(b), 1e-30)
        rel_errs.append(err)
        return err

    # enumerated variance vs closed form, equal and unequal group sizes
    for n1, n0 in ((5, 5), (3, 6)):
        y = rng.normal(size=n1 + n0)
        s = TwoGroupSample(y, np.array([1] * n1 + [0] * n0))
        draws = reallocate_exact(s)
        rel(draws.var(), var_sharp_reallocate(grand_variance(s), n1, n0))

    # assignment covariance matrix vs p(1-p) / -p(1-p)/(n-1)
    cov_dev = max(allocation_covariance_check(n, n1) for n, n1 in ((4, 2), (7, 3), (9, 5)))
    rel_errs.append(cov_dev)

    # enumerated potential-outcome variance vs finite-population decomposition
    table = PotentialOutcomeTable(rng.normal(size=9), rng.lognormal(size=9))
    rel(
        true_allocation_variance(table, 4),
        var_estimation_random_allocation(
            table.s1_star2, table.s0_star2, table.s10_star2, 4, 5
        ),
    )

    # additive-shift formula vs enumeration on the imputed table, 5 random shifts
    y = rng.normal(size=9)
    s = TwoGroupSample(y, np.array([1, 1, 1, 1, 0, 0, 0, 0, 0]))
    s2, tau = grand_variance(s), diff_in_means(s)
    for a in rng.uniform(-3.0, 3.0, size=5):
        rel(
            reallocate_exact(s, float(a)).var(),
            var_reallocate_additive(s2, tau, float(a), s.n1, s.n0),
        )

    # pooled-resampling to reallocation variance ratio is exactly (n-1)/n
    for n1, n0 in ((12, 12), (214, 217)):
        n = n1 + n0
        rel(var_sharp_resample(1.7, n1, n0) / var_sharp_reallocate(1.7, n1, n0), (n - 1) / n)

    # the additive curve returns exactly to the sharp value at a = 0 and 2 tau
    sharp = var_sharp_reallocate(s2, s.n1, s.n0)
    exact_crossings = (
        var_reallocate_additive(s2, tau, 0.0, s.n1, s.n0) == sharp
        and var_reallocate_additive(s2, tau, 2.0 * tau, s.n1, s.n0) == sharp
    )

    worst = max(rel_errs)
    ok = worst <= 1e-10 and exact_crossings
    announce(
        ok,
        f"criterion 7: exactness battery of {len(rel_errs)} identities, worst "
        f"relative deviation {worst:.2e} <= 1e-10; a=0 and a=2*tau crossings exact",
    )


def test_criterion_8_behavioral_properties(sleep, acs, announce):
    reps = 150_000
    parts = []

    within = resample_within(sleep, reps, SEED)
    shifted = resample_equal_means(sleep, 0.0, reps, SEED)
    parts.append(("equal-means = within - tau", np.array_equal(shifted, within - diff_in_means(sleep))))
    parts.append(
        ("b-irrelevance", np.array_equal(shifted, resample_equal_means(sleep, 811.5, reps, SEED)))
    )

    det = True
    for fn in (
        lambda w: reallocate_mc(acs, 0.0, reps, SEED, workers=w),
        lambda w: resample_pooled(acs, reps, SEED, workers=w),
        lambda w: resample_within(acs, reps, SEED, workers=w),
    ):
        base = fn(1)
        det = det and np.array_equal(base, fn(2)) and np.array_equal(base, fn(3))
    parts.append(("worker-count determinism", det))

    try:
        SimulationPlan("reallocate", EqualMeans(), reps, SEED)
        parts.append(("reallocate x equal-means rejected", False))
    except PlanError:
        parts.append(("reallocate x equal-means rejected", True))

    ok = all(flag for _, flag in parts)
    announce(
        ok,
        "criterion 8: " + "; ".join(f"{name} {'ok' if flag else 'FAILED'}" for name, flag in parts),
    )


def test_criterion_9_engine_matches_oracle_enumeration(announce):
    fixtures = [
        # integer and half-integer outcomes keep every mean exact in binary
        (np.array([3.0, 7, 1, 9, 4, 6, 2, 8, 5, 0]), 4, 0.0),
        (np.array([-5.0, 12, 0, 3, -2, 9, 14, 1, 7, -8, 4, 11]), 5, 0.0),
        (np.array([0.5, 2.0, 1.5, 3.5, 2.5, 0.0, 4.0, 1.0, 3.0, 5.5, 2.0, 4.5, 1.5, 6.0]), 7, 0.0),
        (np.array([3.0, 7, 1, 9, 4, 6, 2, 8, 5, 0]), 4, 2.0),  # additive shift
    ]
    sizes = []
    ok = True
    for y, n1, a in fixtures:
        w = np.array([1] * n1 + [0] * (y.size - n1))
        sample = TwoGroupSample(y, w)
        count = allocation_count(y.size, n1)
        assert count <= 200_000
        sizes.append(count)
        engine_draws = np.sort(reallocate_exact(sample, a))
        oracle_draws = np.sort(allocation_draws(impute_additive(sample, a), n1))
        ok = ok and np.array_equal(engine_draws, oracle_draws)
    announce(
        ok,
        f"criterion 9: engine enumeration equals oracle enumeration as exact "
        f"multisets on {len(fixtures)} fixtures (sizes {sizes})",
    )
