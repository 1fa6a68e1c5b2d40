"""Command line front end: ingestion, tests, intervals, theory lookups,
variance curves, and reproduction of the bundled studies' result tables.

Exit codes: 0 success, 2 configuration error, 3 data or manifest error,
4 numerical failure (including a failed reproduction). Same arguments and
seed give byte-identical output regardless of --workers.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from . import data as data_mod
from . import engine, inference, moments, reference, theory
from .data import AdditiveShift, EqualMeans, SharpNull

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4

# fixture stem -> (outcome column, group column, treated label)
FIXTURES = {
    t["fixture"]: (t["outcome"], t["group"], t["treated"])
    for t in reference.TABLES.values()
}

TEST_METHODS = ("reallocate", "resample-pooled", "resample-within")
INTERVAL_METHODS = (
    "invert-reallocation", "bootstrap-t", "bootstrap-percentile", "reallocation-sharp-se",
)


@dataclass(frozen=True)
class RunConfig:
    """Everything one invocation needs, normalized (hyphens to underscores,
    seed resolved). Method x null legality is enforced by SimulationPlan
    before any data is read."""

    subcommand: str
    data: str | None = None
    outcome: str | None = None
    group: str | None = None
    treated: str | None = None
    fixture: str | None = None
    method: str | None = None
    null: str | None = None
    a: float | None = None
    b: float | None = None
    tail: str = "right"
    convention: str = "plain_proportion"
    level: float = 0.95
    replicates: int = 1_000_000
    seed: int = 42
    exact_threshold: int = engine.DEFAULT_EXACT_THRESHOLD
    workers: int = 1
    fmt: str = "text"
    draws_out: str | None = None
    mechanism: str | None = None
    context: str | None = None
    inputs: tuple[tuple[str, float], ...] = ()
    a_min: float | None = None
    a_max: float | None = None
    steps: int = 201
    out: str | None = None
    svg_out: str | None = None
    which: str | None = None


def _kv_pair(text: str) -> tuple[str, float]:
    name, sep, value = text.partition("=")
    if not sep or not name:
        raise argparse.ArgumentTypeError(f"expected NAME=VALUE, got {text!r}")
    try:
        return name, float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{value!r} is not a number") from None


def _add_data_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--data", metavar="CSV", help="path to a CSV file")
    sp.add_argument("--outcome", metavar="COL", help="outcome column name")
    sp.add_argument("--group", metavar="COL", help="group column name")
    sp.add_argument("--treated", metavar="LABEL", help="group label treated as group 1")
    sp.add_argument(
        "--fixture", choices=sorted(FIXTURES),
        help="bundled dataset (column names and treated label are implied)",
    )


def _add_run_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--reps", type=int, default=1_000_000, help="replicates (default 1000000)")
    sp.add_argument(
        "--seed", type=int, default=None,
        help="RNG seed (default 42; SIMINFER_SEED overrides the default)",
    )
    sp.add_argument("--workers", type=int, default=1, help="parallel workers (default 1)")


def _add_format_flag(sp: argparse.ArgumentParser) -> None:
    sp.add_argument(
        "--format", dest="fmt", choices=("text", "json", "csv"), default="text",
        help="output format; json emits one object per line",
    )


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="siminfer",
        description="Simulation-based tests and intervals for the difference "
        "in means between two groups.",
    )
    sub = p.add_subparsers(dest="subcommand", required=True)

    t = sub.add_parser("test", help="run a reallocation or resampling test")
    _add_data_flags(t)
    t.add_argument("--method", required=True, choices=TEST_METHODS)
    t.add_argument(
        "--null", choices=("sharp", "additive", "equal-means"),
        help="default: sharp for reallocate/resample-pooled, equal-means for resample-within",
    )
    t.add_argument("--a", type=float, help="additive shift (requires --null additive)")
    t.add_argument("--b", type=float, help="common mean under equal-means (does not change draws)")
    t.add_argument("--tail", choices=("right", "left", "two-sided"), default="right")
    t.add_argument("--convention", choices=("plain-proportion", "add-one"), default="plain-proportion")
    t.add_argument("--exact-threshold", type=int, default=engine.DEFAULT_EXACT_THRESHOLD,
                   help="enumerate all allocations when C(n, n1) is at most this")
    t.add_argument("--draws-out", metavar="PATH", help="spill draws to little-endian float64 file")
    _add_run_flags(t)
    _add_format_flag(t)

    i = sub.add_parser("interval", help="compute a confidence interval")
    _add_data_flags(i)
    i.add_argument("--method", required=True, choices=INTERVAL_METHODS)
    i.add_argument("--level", type=float, default=0.95)
    _add_run_flags(i)
    _add_format_flag(i)

    th = sub.add_parser("theory", help="closed-form variance for a mechanism/context cell")
    _add_data_flags(th)
    th.add_argument("--mechanism", required=True,
                    choices=tuple(m.replace("_", "-") for m in theory.MECHANISMS))
    th.add_argument("--context", required=True,
                    choices=tuple(c.replace("_", "-") for c in theory.CONTEXTS))
    th.add_argument("--a", type=float, help="additive shift for the additive context")
    th.add_argument("--input", dest="inputs", type=_kv_pair, action="append", default=[],
                    metavar="NAME=VALUE", help="explicit formula input (repeatable)")
    _add_format_flag(th)

    c = sub.add_parser("curve", help="variance of the reallocation distribution vs additive shift")
    _add_data_flags(c)
    c.add_argument("--a-min", type=float, help="default: tau_hat - (|tau_hat| + 2 SE)")
    c.add_argument("--a-max", type=float, help="default: tau_hat + (|tau_hat| + 2 SE)")
    c.add_argument("--steps", type=int, default=201)
    c.add_argument("--out", metavar="PATH", help="write CSV here instead of stdout")
    c.add_argument("--svg-out", metavar="PATH", help="also write a minimal SVG plot")

    r = sub.add_parser("reproduce", help="recompute a bundled study's published results")
    r.add_argument("which", choices=sorted(reference.TABLES))
    _add_run_flags(r)
    _add_format_flag(r)

    return p


def _resolve_seed(raw: int | None) -> int:
    if raw is not None:
        return raw
    env = os.environ.get("SIMINFER_SEED")
    if env is None:
        return 42
    try:
        return int(env)
    except ValueError:
        raise engine.PlanError(f"SIMINFER_SEED must be an integer, got {env!r}") from None


def config_from_args(args: argparse.Namespace) -> RunConfig:
    d = vars(args).copy()
    d["seed"] = _resolve_seed(d.pop("seed", None))
    if "reps" in d:
        d["replicates"] = d.pop("reps")
    for key in ("null", "tail", "convention", "method", "mechanism", "context"):
        if d.get(key):
            d[key] = d[key].replace("-", "_")
    if "inputs" in d:
        d["inputs"] = tuple(d["inputs"])
    known = {f.name for f in dataclasses.fields(RunConfig)}
    return RunConfig(**{k: v for k, v in d.items() if k in known})


def _resolve_null(cfg: RunConfig):
    """Turn (--null, --a, --b) into a hypothesis, inferring the natural null
    for the method when --null is absent."""
    null = cfg.null
    if null is None:
        if cfg.a is not None and cfg.b is not None:
            raise engine.PlanError("--a and --b are mutually exclusive")
        if cfg.a is not None:
            null = "additive"
        elif cfg.b is not None:
            null = "equal_means"
        else:
            null = "equal_means" if cfg.method == "resample_within" else "sharp"
    if null == "sharp":
        if cfg.a is not None or cfg.b is not None:
            raise engine.PlanError("the sharp null takes neither --a nor --b")
        return SharpNull()
    if null == "additive":
        if cfg.b is not None:
            raise engine.PlanError("--b belongs to the equal-means null")
        if cfg.a is None:
            raise engine.PlanError("the additive null needs --a")
        return AdditiveShift(cfg.a)
    if cfg.a is not None:
        raise engine.PlanError("--a belongs to the additive null")
    return EqualMeans(cfg.b if cfg.b is not None else 0.0)


def _load_sample(cfg: RunConfig) -> data_mod.TwoGroupSample:
    if cfg.fixture:
        outcome, group, treated = FIXTURES[cfg.fixture]
        sample, manifest = data_mod.load_fixture(
            cfg.fixture,
            cfg.outcome or outcome,
            cfg.group or group,
            cfg.treated or treated,
        )
        check = data_mod.validate_manifest(sample, manifest)
        # a flipped --treated swaps the group stats, so skip the check then
        if (cfg.treated or treated) == treated and not check:
            raise data_mod.ValidationError(
                f"fixture {cfg.fixture} failed manifest validation: "
                + ", ".join(check.mismatches)
            )
        return sample
    if not cfg.data:
        raise engine.PlanError("need --data or --fixture")
    missing = [f for f, v in (("--outcome", cfg.outcome), ("--group", cfg.group),
                              ("--treated", cfg.treated)) if not v]
    if missing:
        raise engine.PlanError(f"--data also needs {' '.join(missing)}")
    text = Path(cfg.data).read_text(encoding="utf-8")
    return data_mod.load_two_group_sample(text, cfg.outcome, cfg.group, cfg.treated)


def _fmt(x: float | None) -> str:
    return "n/a" if x is None else f"{x:.6g}"


def _emit_kv(fmt: str, rows: list[tuple[str, object]], reports: list[inference.InferenceReport]) -> None:
    """text: one 'name = value' line each then rendered reports; json: one
    object per line; csv: field,value long format."""
    if fmt == "json":
        if rows:
            print(json.dumps({str(k): v for k, v in rows}))
        for rep in reports:
            print(rep.to_json())
        return
    if fmt == "csv":
        print("field,value")
        for k, v in rows:
            print(f"{k},{v if not isinstance(v, float) else repr(v)}")
        for rep in reports:
            d = json.loads(rep.to_json())
            tag = d["method"]
            if d["kind"] == "p_value":
                print(f"{tag}.p.{d['tail']},{d['value']!r}")
            else:
                print(f"{tag}.lower,{d['value'][0]!r}")
                print(f"{tag}.upper,{d['value'][1]!r}")
        return
    for k, v in rows:
        print(f"{k} = {_fmt(v) if isinstance(v, float) or v is None else v}")
    for rep in reports:
        print(rep.render())


def run_test(cfg: RunConfig) -> int:
    hypothesis = _resolve_null(cfg)
    plan = engine.SimulationPlan(
        cfg.method, hypothesis, cfg.replicates, cfg.seed, cfg.exact_threshold
    )
    sample = _load_sample(cfg)
    result = engine.run_plan(plan, sample, workers=cfg.workers, spill_path=cfg.draws_out)
    tau = moments.diff_in_means(sample)
    summary = moments.summarize(result.draws, result.method_tag, result.seed)
    report = inference.p_value(
        result.draws, tau, cfg.tail, cfg.convention,
        method=result.method_tag, seed=result.seed,
    )
    rows: list[tuple[str, object]] = [
        ("kind", "summary"),
        ("method", result.method_tag),
        ("replicates", summary.replicate_count),
        ("seed", result.seed),
        ("tau_hat", tau),
        ("mean", summary.mean),
        ("std_error", summary.std_error),
        ("skewness", summary.skewness),
        ("excess_kurtosis", summary.excess_kurtosis),
    ]
    _emit_kv(cfg.fmt, rows, [report])
    return EXIT_OK


def run_interval(cfg: RunConfig) -> int:
    sample = _load_sample(cfg)
    if cfg.method == "invert_reallocation":
        report = inference.ci_invert_reallocation(
            sample, cfg.level, cfg.replicates, cfg.seed, workers=cfg.workers
        )
    elif cfg.method == "bootstrap_t":
        report = inference.ci_bootstrap_t(
            sample, cfg.level, cfg.replicates, cfg.seed, workers=cfg.workers
        )
    elif cfg.method == "bootstrap_percentile":
        draws = engine.resample_within(sample, cfg.replicates, cfg.seed, workers=cfg.workers)
        report = dataclasses.replace(
            inference.ci_bootstrap_percentile(draws, cfg.level), seed=cfg.seed
        )
    else:
        report = inference.ci_reallocation_sharp_se(
            sample, cfg.level, cfg.replicates, cfg.seed, workers=cfg.workers
        )
    _emit_kv(cfg.fmt, [], [report])
    return EXIT_OK


def run_theory(cfg: RunConfig) -> int:
    scenario = theory.VarianceScenario(cfg.mechanism, cfg.context)
    provided = dict(cfg.inputs)
    if cfg.fixture or cfg.data:
        sample = _load_sample(cfg)
        computable = {
            "n1": sample.n1,
            "n0": sample.n0,
            "s2": moments.grand_variance(sample),
            "tau_hat": moments.diff_in_means(sample),
            "s1_2": moments.group_variance(sample, 1),
            "s0_2": moments.group_variance(sample, 0),
        }
        if cfg.a is not None:
            computable["a"] = cfg.a
        for name in scenario.required_inputs:
            if name not in provided and name in computable:
                provided[name] = computable[name]
    elif cfg.a is not None:
        provided.setdefault("a", cfg.a)
    variance = scenario.variance(**provided)
    rows: list[tuple[str, object]] = [
        ("kind", "theory"),
        ("mechanism", cfg.mechanism),
        ("context", cfg.context),
    ]
    rows += [(f"input.{k}", float(provided[k])) for k in scenario.required_inputs]
    rows += [("variance", variance), ("se", math.sqrt(variance))]
    _emit_kv(cfg.fmt, rows, [])
    return EXIT_OK


def _curve_svg(points, sharp_variance: float) -> str:
    """Hand-rolled polyline plot: the curve plus a dashed horizontal line at
    the sharp-null variance."""
    width, height = 640, 400
    ml, mr, mt, mb = 60, 20, 20, 45
    xs = [a for a, _ in points]
    ys = [v for _, v in points] + [sharp_variance, 0.0]
    xmin, xmax = min(xs), max(xs)
    ymin, ymax = min(ys), max(ys)
    if xmax == xmin:
        xmax = xmin + 1.0
    if ymax == ymin:
        ymax = ymin + 1.0

    def px(a: float) -> float:
        return ml + (a - xmin) / (xmax - xmin) * (width - ml - mr)

    def py(v: float) -> float:
        return height - mb - (v - ymin) / (ymax - ymin) * (height - mt - mb)

    poly = " ".join(f"{px(a):.2f},{py(v):.2f}" for a, v in points)
    y_ref = py(sharp_variance)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{ml}" y1="{height - mb}" x2="{width - mr}" y2="{height - mb}" stroke="black"/>',
        f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{height - mb}" stroke="black"/>',
        f'<line x1="{ml}" y1="{y_ref:.2f}" x2="{width - mr}" y2="{y_ref:.2f}" '
        f'stroke="steelblue" stroke-dasharray="6 4"/>',
        f'<polyline points="{poly}" fill="none" stroke="firebrick" stroke-width="1.5"/>',
        f'<text x="{ml}" y="{height - mb + 16}" font-size="11">{xmin:.6g}</text>',
        f'<text x="{width - mr}" y="{height - mb + 16}" font-size="11" '
        f'text-anchor="end">{xmax:.6g}</text>',
        f'<text x="{ml - 6}" y="{py(ymin):.2f}" font-size="11" text-anchor="end">{ymin:.6g}</text>',
        f'<text x="{ml - 6}" y="{py(ymax) + 4:.2f}" font-size="11" text-anchor="end">{ymax:.6g}</text>',
        f'<text x="{width - mr}" y="{y_ref - 5:.2f}" font-size="11" text-anchor="end" '
        f'fill="steelblue">sharp-null variance {sharp_variance:.6g}</text>',
        f'<text x="{(ml + width - mr) / 2:.0f}" y="{height - 8}" font-size="12" '
        f'text-anchor="middle">additive shift a</text>',
        "</svg>",
    ]
    return "\n".join(parts) + "\n"


def run_curve(cfg: RunConfig) -> int:
    sample = _load_sample(cfg)
    s2 = moments.grand_variance(sample)
    tau = moments.diff_in_means(sample)
    sharp_variance = theory.var_sharp_reallocate(s2, sample.n1, sample.n0)
    pad = abs(tau) + 2.0 * math.sqrt(sharp_variance)
    if cfg.a_min is None and cfg.a_max is None and pad == 0.0:
        # constant data: the default window collapses to the single point a =
        # tau_hat = 0, where the curve is exactly zero
        points = [(tau, theory.var_reallocate_additive(s2, tau, tau, sample.n1, sample.n0))]
    else:
        a_min = cfg.a_min if cfg.a_min is not None else tau - pad
        a_max = cfg.a_max if cfg.a_max is not None else tau + pad
        points = theory.variance_curve(sample, a_min, a_max, cfg.steps)
    csv_text = theory.curve_to_csv(points)
    if cfg.out:
        Path(cfg.out).write_text(csv_text, encoding="utf-8")
    else:
        sys.stdout.write(csv_text)
    if cfg.svg_out:
        Path(cfg.svg_out).write_text(_curve_svg(points, sharp_variance), encoding="utf-8")
    return EXIT_OK


def _reproduce_rows(table: dict, cfg: RunConfig):
    """Yield (label, checks) where checks are (quantity, computed, expected, ok)."""
    stem = table["fixture"]
    sample, manifest = data_mod.load_fixture(stem, table["outcome"], table["group"], table["treated"])
    check = data_mod.validate_manifest(sample, manifest)
    if not check:
        raise data_mod.ValidationError(
            f"fixture {stem} failed manifest validation: " + ", ".join(check.mismatches)
        )
    tau = moments.diff_in_means(sample)
    tol_ci = table["interval_tol"]
    draws_memo: dict[str, object] = {}

    def draws_for(method: str):
        if method not in draws_memo:
            if method == "reallocate":
                draws_memo[method] = engine.reallocate_mc(
                    sample, 0.0, cfg.replicates, cfg.seed, workers=cfg.workers
                )
            elif method == "resample_pooled":
                draws_memo[method] = engine.resample_pooled(
                    sample, cfg.replicates, cfg.seed, workers=cfg.workers
                )
            elif method == "resample_within":
                draws_memo[method] = engine.resample_within(
                    sample, cfg.replicates, cfg.seed, workers=cfg.workers
                )
            else:  # resample_equal_means: recentering within-group draws
                draws_memo[method] = draws_for("resample_within") - tau
        return draws_memo[method]

    def mc_se(method: str) -> float:
        base = "resample_within" if method == "bootstrap_t" else "reallocate"
        return moments.summarize(draws_for(base), base, cfg.seed).std_error

    for row in table["rows"]:
        checks = []
        if row["kind"] == "truth_se":
            se = math.sqrt(
                theory.var_sharp_reallocate(moments.grand_variance(sample), sample.n1, sample.n0)
            )
            checks.append(("se", se, row["se"], reference.se_matches(se, row["se"], analytic=True)))
        elif row["kind"] == "test":
            draws = draws_for(row["method"])
            se = moments.summarize(draws, row["method"], cfg.seed).std_error
            checks.append(("se", se, row["se"], reference.se_matches(se, row["se"], analytic=False)))
            p = inference.p_value(draws, tau, "right", "plain_proportion").value
            checks.append(("p", p, row["p"], reference.p_value_matches(p, row["p"])))
        else:
            method = row["method"]
            if method == "invert_reallocation":
                rep = inference.ci_invert_reallocation(
                    sample, 0.95, cfg.replicates, cfg.seed, workers=cfg.workers
                )
                lo, hi = rep.value
            else:
                # both remaining rows are tau_hat +/- t* SE with a simulated SE
                se = mc_se(method)
                checks.append(
                    ("se", se, row["se"], reference.se_matches(se, row["se"], analytic=False))
                )
                h = inference._t_star(0.95, sample.n1, sample.n0) * se
                lo, hi = tau - h, tau + h
            checks.append(("lower", lo, row["ci"][0], abs(lo - row["ci"][0]) <= tol_ci))
            checks.append(("upper", hi, row["ci"][1], abs(hi - row["ci"][1]) <= tol_ci))
        yield row["label"], checks


def run_reproduce(cfg: RunConfig) -> int:
    table = reference.TABLES[cfg.which]
    results = list(_reproduce_rows(table, cfg))
    passed = sum(1 for _, checks in results if all(ok for _, _, _, ok in checks))
    if cfg.fmt == "json":
        for label, checks in results:
            print(json.dumps({
                "label": label,
                "pass": all(ok for _, _, _, ok in checks),
                "checks": [
                    {"quantity": q, "computed": c, "expected": e, "pass": ok}
                    for q, c, e, ok in checks
                ],
            }))
    elif cfg.fmt == "csv":
        print("label,quantity,computed,expected,pass")
        for label, checks in results:
            for q, c, e, ok in checks:
                print(f'"{label}",{q},{c!r},{e!r},{ok}')
    else:
        print(f"{cfg.which}: {table['fixture']}  reps={cfg.replicates} seed={cfg.seed}")
        width = max(len(label) for label, _ in results)
        for label, checks in results:
            ok = all(flag for _, _, _, flag in checks)
            detail = "; ".join(f"{q} {c:.6g} vs {e:g}" for q, c, e, _ in checks)
            print(f"{'PASS' if ok else 'FAIL'}  {label:<{width}}  {detail}")
        print(f"rows passed: {passed}/{len(results)}")
    return EXIT_OK if passed == len(results) else EXIT_NUMERICAL


_SUBCOMMANDS = {
    "test": run_test,
    "interval": run_interval,
    "theory": run_theory,
    "curve": run_curve,
    "reproduce": run_reproduce,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        return _SUBCOMMANDS[cfg.subcommand](cfg)
    except inference.NumericalError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_NUMERICAL
    except theory.TheoryError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_NUMERICAL
    except data_mod.DataError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_DATA
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_DATA
    except (engine.PlanError, engine.ExactSizeError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
