"""Regenerate the bundled example fixtures deterministically.

Two datasets ship with the package:

* sleep_caffeine: the 24-unit randomized memory experiment, verbatim.
* acs_income: a 431-row synthetic stand-in for the income-by-sex random
  sample. The original microdata is not bundled, so this script synthesizes
  outcomes that match the documented summary statistics exactly at 3 decimals
  (group means and SDs, hence the grand SD and every analytic standard error)
  and additionally match the simulation-shape diagnostics the reproduction
  depends on: the within-group-resampling skewness, and the excess kurtosis
  of the reallocation and resampling distributions.

Construction of each synthetic group: warp an evenly spaced normal quantile
grid through v = floor + exp(cubic(x)), solving the cubic's 4 coefficients so
the group hits its target mean, SD, skewness, and kurtosis; the floor keeps
the minimum income sensible. Skewness/kurtosis targets per group are derived
from the diagnostic targets by exact finite-sampling moment identities (see
verify_shape_targets below). Everything is closed-form or deterministic
root-finding, so reruns reproduce byte-identical fixtures.
"""
from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np
from scipy import optimize
from scipy.special import ndtri

ROOT = Path(__file__).resolve().parent.parent
SLEEP_WORDS_SLEEP = [14, 18, 11, 13, 18, 17, 21, 9, 16, 17, 14, 15]
SLEEP_WORDS_CAFF = [12, 12, 14, 13, 6, 18, 14, 16, 10, 7, 15, 10]

ACS = {
    "n1": 214, "n0": 217,
    "mean1": 50.96, "mean0": 32.16,
    "sd1": 62.848, "sd0": 36.920, "sd_grand": 52.248,
    # diagnostic targets for the simulated distributions
    "skew_within": 0.15,
    "kurt_realloc": -0.17,
    # free shape choices for the control group (gamma-like income profile);
    # the treated group's shape then follows from the diagnostics
    "skew0": 2.296, "kurt0": 7.94,
    "floor1": 1.5, "floor0": 1.0,
}


def divn_moments(v):
    d = v - v.mean()
    return (d**2).mean(), (d**3).mean(), (d**4).mean()


def shape(v):
    m2, m3, m4 = divn_moments(v)
    return m3 / m2**1.5, m4 / m2**2 - 3.0


def srswor_kurtosis(pooled, n1):
    """Excess kurtosis of the subset-sum statistic over uniform n1-subsets,
    exact finite-population moment identity."""
    n = pooled.size
    c = pooled - pooled.mean()
    s2 = (c**2).sum()
    s4 = (c**4).sum()
    th = [1.0]
    for j in range(4):
        th.append(th[-1] * (n1 - j) / (n - j))
    var = s2 * (th[1] - th[2])
    mu4 = s4 * (th[1] - 7 * th[2] + 12 * th[3] - 6 * th[4]) + s2**2 * (
        3 * th[2] - 6 * th[3] + 3 * th[4]
    )
    return mu4 / var**2 - 3.0


def pooled_kurtosis_target(n1, n0):
    """Invert the subset-sum kurtosis identity: which pooled-data excess
    kurtosis makes the reallocation distribution hit kurt_realloc?"""
    n = n1 + n0
    th = [1.0]
    for j in range(4):
        th.append(th[-1] * (n1 - j) / (n - j))
    c4a = th[1] - 7 * th[2] + 12 * th[3] - 6 * th[4]
    c4b = 3 * th[2] - 6 * th[3] + 3 * th[4]
    denom = (th[1] - th[2]) ** 2
    # kurt_realloc + 3 = (g2p + 3) * c4a / (n * denom) + c4b / denom
    g2p_plus3 = (ACS["kurt_realloc"] + 3.0 - c4b / denom) * n * denom / c4a
    return g2p_plus3 - 3.0


def derive_group1_shape():
    """Solve the treated group's (skew, kurt) from the diagnostic targets.

    Within-group resampling of sizes (n1, n0) has
        var  = m2_1/n1 + m2_0/n0
        skew = (mu3_1/n1^2 - mu3_0/n0^2) / var^1.5
    which pins the treated skewness given the control shape. The pooled
    fourth moment needed for the reallocation kurtosis then pins the treated
    kurtosis via the group decomposition about the grand mean.
    """
    n1, n0 = ACS["n1"], ACS["n0"]
    n = n1 + n0
    m2_1 = ACS["sd1"] ** 2 * (n1 - 1) / n1
    m2_0 = ACS["sd0"] ** 2 * (n0 - 1) / n0
    var_w = m2_1 / n1 + m2_0 / n0
    mu3_0 = ACS["skew0"] * m2_0**1.5
    mu3_1 = (ACS["skew_within"] * var_w**1.5 + mu3_0 / n0**2) * n1**2
    skew1 = mu3_1 / m2_1**1.5

    grand_mean = (n1 * ACS["mean1"] + n0 * ACS["mean0"]) / n
    d1 = ACS["mean1"] - grand_mean
    d0 = ACS["mean0"] - grand_mean
    m2_p = (n1 * (m2_1 + d1**2) + n0 * (m2_0 + d0**2)) / n
    g2p = pooled_kurtosis_target(n1, n0)
    total4 = n * (g2p + 3.0) * m2_p**2
    mu4_0 = (ACS["kurt0"] + 3.0) * m2_0**2
    sum0 = n0 * (mu4_0 + 4 * d0 * mu3_0 + 6 * d0**2 * m2_0 + d0**4)
    bracket1 = (total4 - sum0) / n1
    mu4_1 = bracket1 - 4 * d1 * mu3_1 - 6 * d1**2 * m2_1 - d1**4
    kurt1 = mu4_1 / m2_1**2 - 3.0
    return skew1, kurt1, g2p


def solve_group(n, mean_t, sd_t, skew_t, kurt_t, floor, c_init):
    """Warped quantile grid hitting 4 moments exactly; returns sorted values."""
    x = ndtri((np.arange(n) + 0.5) / n)

    def vec(c):
        return floor + np.exp(c[0] + c[1] * x + c[2] * x * x + c[3] * x**3)

    def resid(c):
        v = vec(c)
        g1, g2 = shape(v)
        return [v.mean() - mean_t, v.std(ddof=1) - sd_t, g1 - skew_t, g2 - kurt_t]

    sol = optimize.root(resid, c_init, method="hybr", options={"xtol": 1e-13})
    if not sol.success or np.abs(np.asarray(sol.fun)).max() > 1e-9:
        raise RuntimeError(f"group moment solve failed: {sol.message}")
    v = vec(sol.x)
    if not np.all(np.diff(v) > 0):
        raise RuntimeError("warp is not monotone; adjust initial guess")
    return v


def build_acs():
    skew1, kurt1, g2p = derive_group1_shape()
    male = solve_group(
        ACS["n1"], ACS["mean1"], ACS["sd1"], skew1, kurt1, ACS["floor1"],
        [np.log(30.0), 0.85, 0.08, 0.01],
    )
    female = solve_group(
        ACS["n0"], ACS["mean0"], ACS["sd0"], ACS["skew0"], ACS["kurt0"], ACS["floor0"],
        [np.log(20.0), 0.9, 0.05, 0.0],
    )
    male = np.round(male, 3)
    female = np.round(female, 3)
    check_acs(male, female, skew1, kurt1, g2p)
    return male, female


def check_acs(male, female, skew1, kurt1, g2p):
    def r3(x):
        return round(float(x), 3)

    assert male.min() > 0 and female.min() > 0
    assert r3(male.mean()) == ACS["mean1"], r3(male.mean())
    assert r3(female.mean()) == ACS["mean0"], r3(female.mean())
    assert r3(male.std(ddof=1)) == ACS["sd1"], r3(male.std(ddof=1))
    assert r3(female.std(ddof=1)) == ACS["sd0"], r3(female.std(ddof=1))
    pooled = np.concatenate([male, female])
    assert r3(pooled.std(ddof=1)) == ACS["sd_grand"], r3(pooled.std(ddof=1))

    # shape drift from 3-decimal rounding should be noise
    g1m, g2m = shape(male)
    g1f, g2f = shape(female)
    assert abs(g1m - skew1) < 5e-3 and abs(g2m - kurt1) < 5e-2
    assert abs(g1f - ACS["skew0"]) < 5e-3 and abs(g2f - ACS["kurt0"]) < 5e-2

    kr = srswor_kurtosis(pooled, ACS["n1"])
    assert abs(kr - ACS["kurt_realloc"]) < 5e-3, kr

    m2_1, mu3_1, _ = divn_moments(male)
    m2_0, mu3_0, _ = divn_moments(female)
    var_w = m2_1 / ACS["n1"] + m2_0 / ACS["n0"]
    skew_w = (mu3_1 / ACS["n1"] ** 2 - mu3_0 / ACS["n0"] ** 2) / var_w**1.5
    assert abs(skew_w - ACS["skew_within"]) < 5e-3, skew_w

    kurt_w = (m2_1 / ACS["n1"]) ** 2 * g2m / ACS["n1"] / var_w**2 + (
        m2_0 / ACS["n0"]
    ) ** 2 * g2f / ACS["n0"] / var_w**2
    g2pool = shape(pooled)[1]
    n1, n0 = ACS["n1"], ACS["n0"]
    kurt_pooled_rs = g2pool * (1 / n1**3 + 1 / n0**3) / (1 / n1 + 1 / n0) ** 2
    print(f"  treated shape: skew {g1m:.4f} kurt {g2m:.3f} (targets {skew1:.4f}, {kurt1:.3f})")
    print(f"  control shape: skew {g1f:.4f} kurt {g2f:.3f}")
    print(f"  pooled kurt {g2pool:.3f} (target {g2p:.3f})")
    print(f"  realloc kurt {kr:+.4f}  within skew {skew_w:.4f}  "
          f"within kurt {kurt_w:+.4f}  pooled-resample kurt {kurt_pooled_rs:+.4f}")
    print(f"  ranges: male [{male.min():.3f}, {male.max():.3f}]  "
          f"female [{female.min():.3f}, {female.max():.3f}]")
    assert 0.05 <= kurt_w <= 0.11 and 0.05 <= kurt_pooled_rs <= 0.11


def interleave(rows_a, rows_b, seed=123):
    """Deterministic shuffle so the CSV does not look sorted by group."""
    rng = np.random.Generator(np.random.Philox(key=np.array([seed, 0], dtype=np.uint64)))
    rows = rows_a + rows_b
    order = rng.permutation(len(rows))
    return [rows[i] for i in order]


def write_fixture(stem, header, rows, manifest):
    text = "\n".join([header] + rows) + "\n"
    mtext = json.dumps(manifest, indent=2) + "\n"
    for base in (ROOT / "src" / "siminfer" / "fixtures", ROOT / "fixtures"):
        base.mkdir(parents=True, exist_ok=True)
        (base / f"{stem}.csv").write_text(text, encoding="utf-8")
        (base / f"{stem}.manifest.json").write_text(mtext, encoding="utf-8")
    print(f"  wrote {stem}: {len(rows)} rows")


def main():
    print("sleep_caffeine:")
    sleep_rows = interleave(
        [f"{v},Sleep" for v in SLEEP_WORDS_SLEEP],
        [f"{v},Caffeine" for v in SLEEP_WORDS_CAFF],
        seed=11,
    )
    write_fixture(
        "sleep_caffeine",
        "words_recalled,treatment",
        sleep_rows,
        {
            "name": "sleep_caffeine",
            "expected_n1": 12, "expected_n0": 12,
            "expected_mean1": 15.25, "expected_mean0": 12.25,
            "expected_sd_grand": 3.686, "expected_sd1": 3.306, "expected_sd0": 3.545,
        },
    )

    print("acs_income:")
    male, female = build_acs()
    acs_rows = interleave(
        [f"{v:.3f},Male" for v in male],
        [f"{v:.3f},Female" for v in female],
        seed=12,
    )
    write_fixture(
        "acs_income",
        "income,sex",
        acs_rows,
        {
            "name": "acs_income",
            "expected_n1": ACS["n1"], "expected_n0": ACS["n0"],
            "expected_mean1": ACS["mean1"], "expected_mean0": ACS["mean0"],
            "expected_sd_grand": ACS["sd_grand"],
            "expected_sd1": ACS["sd1"], "expected_sd0": ACS["sd0"],
        },
    )
    print("done")


if __name__ == "__main__":
    sys.exit(main())
