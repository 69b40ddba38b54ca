"""Command-line front end: ``twostage-deming {fit,predict,bootstrap,simulate,coverage}``."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .core import WLS, Dataset, DemingFit, parse_dataset, parse_first_stage, sniff_schema
from .deming_ls import fit_wls
from .errors import EXIT_CODES, DemingError, ParseError, UsageError
from .inference import (
    bootstrap_fit,
    data_summary,
    fit_estimator,
    pi_variances,
    prediction_interval,
)
from .selection import DEFAULT_THRESHOLDS, diagnose
from .simulation import ESTIMATE_COLUMNS, SimulationSpec, generate_dataset, run_coverage_study
from .transforms import TransformSpec, propagate_variance, records_from_dataset, transform_dataset

DEFAULT_SEED = 42

EPILOG = "exit codes:\n" + "\n".join(f"  {code}  {text}" for code, text in sorted(EXIT_CODES.items()))


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _transforms(args):
    return (
        TransformSpec.parse(args.transform_x, args.scale_x),
        TransformSpec.parse(args.transform_y, args.scale_y),
    )


def load_input(path, spec_x: TransformSpec, spec_y: TransformSpec) -> Dataset:
    """Read either CSV schema and apply the transforms."""
    kind = sniff_schema(path)
    if kind == "first_stage":
        records = parse_first_stage(path)
    else:
        data = parse_dataset(path)
        if spec_x.kind == "identity" and spec_y.kind == "identity" and spec_x.scale == spec_y.scale == 1:
            return data
        records = records_from_dataset(data)
    return transform_dataset(records, spec_x, spec_y)


def _config(args) -> dict:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    return json.loads(json.dumps(cfg, default=str))


def _metadata() -> dict:
    return {"created": datetime.now(timezone.utc).isoformat(timespec="seconds"), "version": __version__}


def _write_json(obj, path):
    text = json.dumps(obj, indent=2, allow_nan=True) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _write_csv(rows, header, path):
    fh = sys.stdout if path in (None, "-") else open(path, "w", newline="", encoding="utf-8")
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    finally:
        if fh is not sys.stdout:
            fh.close()


def _plot_rows(data: Dataset, fit: DemingFit, spec_x: TransformSpec, spec_y: TransformSpec):
    y_fit = fit.predict(data.x)
    with np.errstate(invalid="ignore", over="ignore"):
        z = spec_x.inverse(data.x)
        w = spec_y.inverse(data.y)
        w_fit = spec_y.inverse(y_fit)
    cols = (data.x, data.y, np.sqrt(data.eff_var_x), np.sqrt(data.eff_var_y), data.weight, y_fit, z, w, w_fit)
    return zip(*cols)


PLOT_COLUMNS = ("x", "y", "sd_x", "sd_y", "weight", "y_fit", "z", "w", "w_fit")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_fit(args):
    spec_x, spec_y = _transforms(args)
    data = load_input(args.input, spec_x, spec_y)
    thresholds = (args.r_low, args.r_high)
    n_boot = args.bootstrap

    selection = prefit = None
    scenario = args.scenario
    if scenario == "auto":
        diag, fit_b, _ = diagnose(data, args.lam, thresholds, run_lrt=not args.no_lrt)
        selection = diag.to_dict()
        prefit = None if fit_b is None else fit_b.to_dict()
        scenario = diag.selected

    fit = fit_estimator(data, scenario, args.lam)
    boot = None
    if n_boot or scenario == "C":
        # Scenario C has no analytic covariance: always bootstrap it
        boot = bootstrap_fit(
            data, scenario, lam=args.lam, B=n_boot or 200, seed=args.seed, level=args.level,
            weighted_resample=args.weighted_resample, point=fit,
        )
        if scenario == "C":
            fit = fit.with_cov(boot.cov_params, "bootstrap")

    wls = fit_wls(data)
    wls_out = wls.to_dict()
    if n_boot:
        wb = bootstrap_fit(data, WLS, B=n_boot, seed=args.seed, level=args.level,
                           weighted_resample=args.weighted_resample, point=wls)
        wls_out["bootstrap"] = wb.to_dict()

    artifact = fit.to_dict()
    artifact.update({
        "selection": selection,
        "prefit_B": prefit,
        "bootstrap": None if boot is None else boot.to_dict(),
        "wls_baseline": wls_out,
        "transforms": {"x": spec_x.to_dict(), "y": spec_y.to_dict()},
        "data_summary": data_summary(data),
        "config": _config(args),
        "metadata": _metadata(),
    })
    _write_json(artifact, args.out)
    plot_path = args.plot_data
    if plot_path is None and args.out not in (None, "-"):
        plot_path = str(Path(args.out).with_suffix("")) + ".plot.csv"
    if plot_path:
        _write_csv(_plot_rows(data, fit, spec_x, spec_y), PLOT_COLUMNS, plot_path)
    return 0


def _read_prediction_input(path, spec_x: TransformSpec, spec_y: TransformSpec):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError("empty prediction input")
    header = [h.strip() for h in rows[0]]
    cols = {h: [] for h in header}
    for lineno, row in enumerate(rows[1:], start=2):
        if not any(c.strip() for c in row):
            continue
        for h, cell in zip(header, row):
            try:
                cols[h].append(float(cell))
            except ValueError:
                raise ParseError("malformed number", row=lineno, column=h) from None
    arr = {h: np.asarray(v, dtype=float) for h, v in cols.items()}
    if "x" in arr:
        return arr["x"], arr.get("var_x"), arr.get("var_y")
    if "z" in arr:
        x = spec_x(arr["z"])
        vx = None if "var_z" not in arr else propagate_variance(arr["z"], arr["var_z"], spec_x)
        vy = None
        if "var_w" in arr:
            if "w" not in arr:
                raise ParseError("var_w needs the raw w column to propagate through the y transform")
            vy = propagate_variance(arr["w"], arr["var_w"], spec_y)
        return x, vx, vy
    raise ParseError("prediction input needs an x (or raw z) column", row=1)


def cmd_predict(args):
    try:
        artifact = json.loads(Path(args.fit).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"fit artifact is not valid JSON: {exc}") from exc
    fit = DemingFit.from_dict(artifact["wls_baseline"] if args.model == "wls" else artifact)
    tr = artifact.get("transforms", {})
    spec_x = TransformSpec.from_dict(tr.get("x", {}))
    spec_y = TransformSpec.from_dict(tr.get("y", {}))
    x_new, vx, vy = _read_prediction_input(args.input, spec_x, spec_y)
    summary = artifact.get("data_summary")
    var_x_new, var_e_y = pi_variances(
        fit, args.pi_mode, var_x=vx, var_y=vy, summary=summary, center=args.center
    )
    cov = fit.cov_params
    n = fit.n or (summary or {}).get("n", 0)
    pi = prediction_interval(fit, cov, x_new, var_x_new, var_e_y, level=args.level, n=n, mode=args.pi_mode)
    rows = zip(pi.x_new, pi.y_hat, pi.var_y_new, pi.lower, pi.upper)
    _write_csv(rows, ("x_new", "y_hat", "var_y_new", "lower", "upper"), args.out)
    return 0


def cmd_bootstrap(args):
    spec_x, spec_y = _transforms(args)
    data = load_input(args.input, spec_x, spec_y)
    boot = bootstrap_fit(
        data, args.scenario, lam=args.lam, B=args.B, seed=args.seed, level=args.level,
        weighted_resample=args.weighted_resample,
    )
    out = boot.to_dict()
    out["config"] = _config(args)
    out["metadata"] = _metadata()
    _write_json(out, args.out)
    if args.replicates:
        _write_csv(boot.replicates, ("beta0", "beta1", "sigma2"), args.replicates)
    return 0


def _law(text: str):
    parts = [p.strip() for p in text.split(",")]
    try:
        params = tuple(float(p) for p in parts[1:])
    except ValueError:
        raise UsageError(f"bad law {text!r}") from None
    return (parts[0], *params)


def _sim_spec(args, seed) -> SimulationSpec:
    return SimulationSpec(
        n=args.n,
        beta0=args.beta0,
        beta1=args.beta1,
        x_law=_law(args.x_law),
        var_x_law=_law(args.var_x_law) if args.var_x_law else ("constant", args.var_x),
        var_y_law=_law(args.var_y_law) if args.var_y_law else ("constant", args.var_y),
        sigma2=args.sigma2,
        lam=args.lam,
        weight_law=("integers", 1.0, float(args.max_weight)) if args.max_weight > 1 else ("constant", 1.0),
        seed=seed,
    )


def cmd_simulate(args):
    spec = _sim_spec(args, args.seed)
    data, truth = generate_dataset(spec)
    if args.out in (None, "-"):
        data.to_csv(sys.stdout)
    else:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            data.to_csv(fh)
    if args.truth:
        _write_json({
            "beta0": truth.beta0, "beta1": truth.beta1,
            "X": truth.X.tolist(), "Y": truth.Y.tolist(),
            "spec": spec.to_dict(), "config": _config(args), "metadata": _metadata(),
        }, args.truth)
    return 0


def cmd_coverage(args):
    spec = _sim_spec(args, args.seed)
    report = run_coverage_study(spec, args.scenario, M=args.replicates, B=args.B, level=args.level)
    out = report.to_dict()
    out["config"] = _config(args)
    out["metadata"] = _metadata()
    _write_json(out, args.out)
    if args.estimates:
        _write_csv(([r[c] for c in ESTIMATE_COLUMNS] for r in report.estimates), ESTIMATE_COLUMNS, args.estimates)
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _level(text):
    v = float(text)
    if not 0 < v < 1:
        raise argparse.ArgumentTypeError("level must lie in (0, 1)")
    return v


def _add_transform_args(p):
    p.add_argument("--transform-x", default="identity", help="identity | log | logit | power:<p>")
    p.add_argument("--transform-y", default="identity")
    p.add_argument("--scale-x", type=float, default=1.0, help="multiply z by this before transforming")
    p.add_argument("--scale-y", type=float, default=1.0)


def _add_sim_args(p):
    p.add_argument("--n", type=int, default=300)
    p.add_argument("--beta0", type=float, default=0.0)
    p.add_argument("--beta1", type=float, default=1.0)
    p.add_argument("--x-law", default="uniform,0,4", help="uniform,a,b | normal,mu,sd")
    p.add_argument("--var-x", type=float, default=0.1, help="constant first-stage variance of x")
    p.add_argument("--var-y", type=float, default=0.1)
    p.add_argument("--var-x-law", default=None, help="constant,v | uniform,lo,hi | proportional,c")
    p.add_argument("--var-y-law", default=None)
    p.add_argument("--sigma2", type=float, default=0.0, help="extra unknown x-error variance")
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--max-weight", type=int, default=1, help="weights drawn uniformly from 1..max")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="twostage-deming",
        description="Two-stage Deming regression for variables measured with known or estimated error variances.",
        epilog=EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    fmt = argparse.RawDescriptionHelpFormatter

    p = sub.add_parser("fit", help="fit a line and write a JSON artifact", epilog=EPILOG, formatter_class=fmt)
    p.add_argument("--input", required=True, help="CSV with x,y,var_x,var_y[,weight] or z,w,var_z,var_w[,weight]")
    _add_transform_args(p)
    p.add_argument("--scenario", choices=("auto", "A", "B", "C", WLS), default="auto")
    p.add_argument("--lambda", dest="lam", type=float, default=1.0, help="Var(x error)/Var(y error) of the unknown errors")
    p.add_argument("--r-low", type=float, default=DEFAULT_THRESHOLDS[0])
    p.add_argument("--r-high", type=float, default=DEFAULT_THRESHOLDS[1])
    p.add_argument("--no-lrt", action="store_true", help="skip the B-vs-C likelihood ratio test in auto mode")
    p.add_argument("--bootstrap", type=int, default=0, metavar="B", help="bootstrap replicates (0 = none)")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--level", type=_level, default=0.95)
    p.add_argument("--weighted-resample", action="store_true")
    p.add_argument("--out", default="-")
    p.add_argument("--plot-data", default=None, help="plot CSV path (default: <out>.plot.csv)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="prediction intervals from a fit artifact", epilog=EPILOG, formatter_class=fmt)
    p.add_argument("--fit", required=True)
    p.add_argument("--input", required=True, help="CSV with x[,var_x,var_y] or raw z[,var_z,w,var_w]")
    p.add_argument("--level", type=_level, default=0.95)
    p.add_argument("--pi-mode", choices=("individual", "mean", "mse"), default="individual")
    p.add_argument("--center", choices=("mean", "median"), default="mean", help="centre of first-stage SDs for --pi-mode mean")
    p.add_argument("--model", choices=("deming", "wls"), default="deming")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("bootstrap", help="bootstrap CIs for one estimator", epilog=EPILOG, formatter_class=fmt)
    p.add_argument("--input", required=True)
    _add_transform_args(p)
    p.add_argument("--scenario", choices=("A", "B", "C", WLS), default="B")
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--B", type=int, default=200)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--level", type=_level, default=0.95)
    p.add_argument("--weighted-resample", action="store_true")
    p.add_argument("--replicates", default=None, help="optional CSV of replicate estimates")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_bootstrap)

    p = sub.add_parser("simulate", help="write a synthetic dataset", epilog=EPILOG, formatter_class=fmt)
    _add_sim_args(p)
    p.add_argument("--out", default="-")
    p.add_argument("--truth", default=None, help="optional JSON with the true line and X values")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("coverage", help="bootstrap CI coverage study", epilog=EPILOG, formatter_class=fmt)
    _add_sim_args(p)
    p.add_argument("--scenario", choices=("A", "B", "C"), default="B")
    p.add_argument("--replicates", type=int, default=200)
    p.add_argument("--B", type=int, default=200)
    p.add_argument("--level", type=_level, default=0.95)
    p.add_argument("--out", default="-")
    p.add_argument("--estimates", default=None, help="optional per-replicate CSV")
    p.set_defaults(func=cmd_coverage)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DemingError as exc:
        print(f"error[{type(exc).__name__}]: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"error[FileNotFoundError]: {exc}", file=sys.stderr)
        return ParseError.exit_code


if __name__ == "__main__":
    sys.exit(main())
