"""Command-line entry point: ``spectral-krr <command> [options]``.

Exit codes: 0 success, 2 invalid configuration, 3 I/O failure,
4 numerical failure.
"""

import argparse
import csv
import io
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .config import ConfigError, echo, load_json, resolve
from .estimator import context_from_gram, eval_prediction_matrix, empirical_effective_dimension
from .filters import FilterFamily, default_grids, empirical_qualification, verify_family_conditions
from .kernels import KernelFileError, load_precomputed, read_labels_file
from .simlab import SyntheticTask, run_experiment
from .simlab.concentration import FeatureModel, concentration_trial, informative_r
from .simlab.experiment import (
    METHOD_FILTERS,
    RECORD_FIELDS,
    bound_check,
    method_filter,
    rate_experiment,
    validation_rate_experiment,
)
from .simlab.risk import select_lambda
from .spectrum import lambda_schedule, marginal_masses, window_threshold_n

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC = 0, 2, 3, 4


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if v is None:
        return ""
    return str(v)


def write_csv(path, cfg, header, rows):
    """CSV with a leading ``# config:`` comment line; floats in shortest repr."""
    buf = io.StringIO()
    buf.write(f"# config: {echo(cfg)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(row.get(h)) for h in header])
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(buf.getvalue())
    return path


def _threads(cfg):
    return cfg.threads or os.cpu_count() or 1


# --- commands ------------------------------------------------------------------


def cmd_reproduce_sim(cfg, out=sys.stdout):
    task = SyntheticTask(cfg.domain_size, cfg.exponent, math.sqrt(cfg.noise_var), master_seed=cfg.seed)
    grid = np.linspace(cfg.lambda_min, cfg.lambda_max, cfg.lambda_count)
    report = run_experiment(task, cfg.n, grid, cfg.methods, cfg.replicates, cfg.n_validation,
                            solver=cfg.solver, threads=_threads(cfg))
    outdir = Path(cfg.out)
    write_csv(outdir / "reproduce_sim_replicates.csv", cfg, list(RECORD_FIELDS), report.rows())
    summary = []
    for method, stats in report.aggregates().items():
        for name, agg in stats.items():
            summary.append({"method": method, "field": name, **agg})
    write_csv(outdir / "reproduce_sim_summary.csv", cfg, ["method", "field", "mean", "median", "std"], summary)
    for method in report.methods():
        print(f"{method}: median mu-MSE {report.median(method):.6g} "
              f"(median lambda {report.median(method, 'lambda_selected'):.6g})", file=out)
    return report


def _rate_task(cfg):
    support = cfg.support or (1 if cfg.mode == "polynomial" else 5)
    target = np.zeros(cfg.domain_size)
    target[:support] = 1.0
    return SyntheticTask(cfg.domain_size, cfg.exponent, math.sqrt(cfg.noise_var), target, cfg.seed), support


def _best_ridge_scale(task, cfg, nu):
    # smallest summed median risk over the ladder, for ridge capped at zeta = 1
    filt = FilterFamily("ridge")
    best = None
    for scale in cfg.ridge_scales:
        sched = {"krr": (filt, lambda n, s=scale: lambda_schedule("polynomial", n, 1.0, s, nu=nu))}
        pts, slopes = rate_experiment(task, cfg.ladder, sched, cfg.replicates, _threads(cfg))
        total = sum(p.median_risk for p in pts)
        if best is None or total < best[0]:
            best = (total, scale, pts, slopes["krr"])
    return best[1:]


def cmd_rates(cfg, out=sys.stdout):
    task, support = _rate_task(cfg)
    nu = cfg.exponent / 2.0
    rows = []
    if cfg.lambda_mode == "validation":
        grid = np.linspace(cfg.lambda_min, cfg.lambda_max, cfg.lambda_count)
        points, slopes = validation_rate_experiment(task, cfg.ladder, cfg.methods, grid,
                                                    cfg.replicates, _threads(cfg))
        schedule_note = {m: "validation" for m in cfg.methods}
    elif cfg.mode == "polynomial":
        sched = {
            m: (method_filter(m), lambda n: lambda_schedule("polynomial", n, cfg.zeta, cfg.scale, nu=nu))
            for m in cfg.methods
        }
        points, slopes = rate_experiment(task, cfg.ladder, sched, cfg.replicates, _threads(cfg))
        schedule_note = {m: f"poly(scale={cfg.scale},zeta={cfg.zeta})" for m in cfg.methods}
        n0 = window_threshold_n(lambda n: lambda_schedule("polynomial", n, cfg.zeta, cfg.scale, nu=nu), 0.0, 1.0)
        print(f"window holds for n >= {n0}", file=out)
    else:
        t_J = marginal_masses(cfg.domain_size, cfg.exponent)[support - 1]
        lam_pcr = (1.0 - cfg.r) * t_J
        points, slopes, schedule_note = [], {}, {}
        for m in cfg.methods:
            if m == "kpcr":
                pts, sl = rate_experiment(task, cfg.ladder, {m: (method_filter(m), lambda n: lam_pcr)},
                                          cfg.replicates, _threads(cfg))
                schedule_note[m] = f"(1-r)t_J^2 (r={cfg.r}, J={support})"
            elif m == "krr":
                scale, pts, krr_slope = _best_ridge_scale(task, cfg, nu)
                sl = {m: krr_slope}
                schedule_note[m] = f"poly(scale={scale},zeta=1)"
            else:
                sched = {m: (method_filter(m), lambda n: lambda_schedule("polynomial", n, 1.0, cfg.scale, nu=nu))}
                pts, sl = rate_experiment(task, cfg.ladder, sched, cfg.replicates, _threads(cfg))
                schedule_note[m] = f"poly(scale={cfg.scale},zeta=1)"
            points += pts
            slopes.update(sl)
    for p in points:
        rows.append({"method": p.method, "n": p.n, "lambda": p.lam, "median_risk": p.median_risk,
                     "mean_risk": p.mean_risk, "slope": slopes[p.method], "schedule": schedule_note[p.method]})
    write_csv(Path(cfg.out) / "rates.csv", cfg,
              ["method", "n", "lambda", "median_risk", "mean_risk", "slope", "schedule"], rows)
    for m, s in slopes.items():
        print(f"{m}: fitted slope {s:.4f}", file=out)
    return points, slopes


def cmd_bounds(cfg, out=sys.stdout):
    rows = []
    checks = []
    for N in cfg.domain_sizes:
        for a in cfg.exponents:
            for s2 in cfg.noise_vars:
                target = np.zeros(N)
                target[: min(cfg.support, N)] = 1.0
                task = SyntheticTask(N, a, math.sqrt(s2), target, cfg.seed)
                for lam in cfg.lambdas:
                    for m in cfg.methods:
                        b = bound_check(task, cfg.n, lam, m, cfg.replicates, cfg.zeta, cfg.delta, _threads(cfg))
                        checks.append(b)
                        row = {"domain_size": N, "exponent": a, "noise_var": s2, "n": cfg.n, "lambda": lam,
                               "method": m, "window": "pass" if b.window_ok else "fail",
                               "mc_risk": b.mc_risk, "mc_se": b.mc_se, "dominated": b.dominated}
                        if b.terms:
                            row.update(b.terms)
                        rows.append(row)
    header = ["domain_size", "exponent", "noise_var", "n", "lambda", "method", "window", "mc_risk",
              "mc_se", "term1", "term2", "term3", "term4", "total", "dominated"]
    write_csv(Path(cfg.out) / "bounds.csv", cfg, header, rows)
    passing = [c for c in checks if c.window_ok]
    print(f"{sum(c.dominated for c in passing)}/{len(passing)} window-admissible configs dominated; "
          f"{len(checks) - len(passing)} outside the window", file=out)
    return checks


def cmd_concentration(cfg, out=sys.stdout):
    rows = []
    results = []
    for i, case in enumerate(cfg.cases):
        mu = np.sort(marginal_masses(case["domain_size"], case["exponent"]))[::-1]
        model = FeatureModel.discrete(mu)
        lam, n, delta = case["lambda"], case["n"], case.get("delta", 0.0)
        kd = model.kappa_delta_sq(delta)
        r = case.get("r")
        if r is None:
            t = model.eigenvalues
            r = informative_r(float(np.sum(t / (t + lam))), lam, n, delta, kd)
        row = {"case": i, "domain_size": case["domain_size"], "exponent": case["exponent"], "n": n,
               "lambda": lam, "delta": delta, "r": r, "kappa_delta_sq": kd}
        try:
            res = concentration_trial(model, n, lam, delta, r, cfg.replicates,
                                      seed=[cfg.seed, i])
        except ValueError as exc:
            row["status"] = f"precondition: fail ({exc})"
            rows.append(row)
            results.append(None)
            continue
        results.append(res)
        row.update({
            "status": "ok", "d_lambda": res.d_lambda, "tail_prob": res.empirical_tail_prob,
            "tail_se": res.tail_se, "tail_bound": res.tail_bound, "tail_ok": res.tail_ok,
            "second_moment": res.empirical_second_moment, "moment_se": res.moment_se,
            "moment_bound": res.moment_bound, "moment_ok": res.moment_ok,
        })
        rows.append(row)
    header = ["case", "domain_size", "exponent", "n", "lambda", "delta", "r", "kappa_delta_sq", "status",
              "d_lambda", "tail_prob", "tail_se", "tail_bound", "tail_ok", "second_moment", "moment_se",
              "moment_bound", "moment_ok"]
    write_csv(Path(cfg.out) / "concentration.csv", cfg, header, rows)
    for row in rows:
        print(f"case {row['case']}: {row['status']}"
              + (f" tail {row['tail_prob']:.4g}<= {row['tail_bound']:.4g}, "
                 f"moment {row['second_moment']:.4g} <= {row['moment_bound']:.4g}" if row["status"] == "ok" else ""),
              file=out)
    return results


def cmd_fit_precomputed(cfg, out=sys.stdout):
    spec, splits = load_precomputed(cfg.kernel, cfg.splits)
    y = read_labels_file(cfg.labels, spec.matrix.shape[0])
    M = spec.matrix
    tr, va, te = splits.train, splits.validation, splits.test
    if tr.size == 0 or va.size == 0 or te.size == 0:
        raise ConfigError("splits", "train, validation and test must all be non-empty")
    K_eval = np.vstack([M[np.ix_(va, tr)], M[np.ix_(te, tr)]])
    ctx = context_from_gram(M[np.ix_(tr, tr)], y[tr], K_eval)
    kappa_sq = max(float(np.max(np.diag(M))), np.finfo(float).tiny)
    grid = np.linspace(cfg.lambda_min, cfg.lambda_max, cfg.lambda_count)
    rows = []
    for m in cfg.methods:
        filt = FilterFamily(METHOD_FILTERS[m], kappa_sq=kappa_sq)
        lams = grid if m != "landweber" else grid[grid * filt.landweber_step < 1.0]
        preds = eval_prediction_matrix(ctx, filt, lams)
        val_mse = np.mean((y[va][:, None] - preds[: va.size]) ** 2, axis=0)
        lam = select_lambda(lams, val_mse)
        k = int(np.flatnonzero(lams == lam)[0])
        test_mse = float(np.mean((y[te] - preds[va.size:, k]) ** 2))
        d = empirical_effective_dimension(ctx, lam)
        rows.append({"method": m, "lambda_selected": lam, "validation_mse": float(val_mse[k]),
                     "test_mse": test_mse, "effective_dimension": d, **{f"n_{k_}": v for k_, v in splits.sizes().items()}})
        print(f"{m}: lambda {lam:.6g}, test MSE {test_mse:.6g}, d_lambda {d:.4f}", file=out)
    write_csv(Path(cfg.out) / "fit_precomputed.csv", cfg,
              ["method", "lambda_selected", "validation_mse", "test_mse", "effective_dimension",
               "n_train", "n_validation", "n_test"], rows)
    return rows


def cmd_filters_verify(cfg, out=sys.stdout):
    lams, _ = default_grids(cfg.kappa_sq, cfg.grid_size, cfg.lambda_min)
    ts = np.geomspace(cfg.t_min, cfg.kappa_sq, cfg.grid_size)
    lines = [f"lambda grid: {cfg.grid_size} log-spaced points in [{cfg.lambda_min}, {cfg.kappa_sq}]",
             f"t grid: {cfg.grid_size} log-spaced points in [{cfg.t_min}, {cfg.kappa_sq}]", ""]
    results = {}
    for kind in cfg.kinds:
        filt = FilterFamily(kind, kappa_sq=cfg.kappa_sq)
        fam = verify_family_conditions(filt, lams, ts)
        results[(kind, "family")] = fam
        for cond in ("r1", "r2", "r3"):
            w = fam.worst[cond]
            ok = getattr(fam, f"{cond}_ok")
            note = " (bound attained, non-strict)" if cond in fam.attained else ""
            lines.append(f"{kind:9s} {cond.upper()}  {'PASS' if ok else 'FAIL'}  "
                         f"worst lambda={w.lam:.6g} t={w.t:.6g} value={w.value:.6g}{note}")
        slack = cfg.landweber_slack if kind == "landweber" else 1.0
        for xi in cfg.xis:
            q = empirical_qualification(filt, xi, lams, ts, slack)
            results[(kind, xi)] = q
            w = q.witness
            lines.append(f"{kind:9s} xi={xi:<5g} {'PASS' if q.ok else 'FAIL'}  slack={slack:g} "
                         f"ratio={q.ratio:.6g} witness lambda={w.lam:.6g} t={w.t:.6g} value={w.value:.6g}")
        lines.append("")
    text = "\n".join(lines)
    print(text, file=out)
    path = Path(cfg.out) / "filters_verify.txt"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(f"# config: {echo(cfg)}\n{text}\n")
    return results


COMMANDS = {
    "reproduce-sim": (cfgmod.ReproduceSimConfig, cmd_reproduce_sim),
    "rates": (cfgmod.RatesConfig, cmd_rates),
    "bounds": (cfgmod.BoundsConfig, cmd_bounds),
    "concentration": (cfgmod.ConcentrationConfig, cmd_concentration),
    "fit-precomputed": (cfgmod.FitPrecomputedConfig, cmd_fit_precomputed),
    "filters-verify": (cfgmod.FiltersVerifyConfig, cmd_filters_verify),
}


def build_parser():
    parser = argparse.ArgumentParser(prog="spectral-krr", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with configuration values")
    common.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--threads", type=int, help="worker threads (default: all cores)")
    common.add_argument("--replicates", type=int, help="number of replicates")

    p = sub.add_parser("reproduce-sim", parents=[common], help="discrete-kernel KRR vs KPCR simulation")
    p.add_argument("--n-override", type=int, help="use N = n = this value")
    p.add_argument("--solver", choices=["auto", "dense", "grouped"])

    p = sub.add_parser("rates", parents=[common], help="empirical convergence rates")
    p.add_argument("--mode", choices=["polynomial", "finite-rank"])
    p.add_argument("--lambda-mode", choices=["oracle", "validation"])
    p.add_argument("--ladder", type=lambda s: [int(v) for v in s.split(",")], help="comma-separated n values")

    sub.add_parser("bounds", parents=[common], help="Monte Carlo risk vs the risk upper bound")
    sub.add_parser("concentration", parents=[common], help="operator concentration trials")

    p = sub.add_parser("fit-precomputed", parents=[common], help="fit on a precomputed kernel file")
    p.add_argument("--kernel", help="kernel matrix file")
    p.add_argument("--labels", help="labels file")
    p.add_argument("--splits", help="train/validation/test split file")

    p = sub.add_parser("filters-verify", parents=[common], help="check filter axioms and qualification")
    p.add_argument("--landweber-slack", type=float)
    return parser


def main(argv=None, out=None):
    out = out or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    cls, func = COMMANDS[args.command]
    overrides = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    n_override = overrides.pop("n_override", None)
    if n_override is not None:
        overrides["n"] = n_override
        overrides["domain_size"] = n_override
    if args.command == "filters-verify":
        overrides.pop("replicates", None)
    try:
        cfg = resolve(cls, load_json(args.config), overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except TypeError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        func(cfg, out=out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (KernelFileError, OSError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, FloatingPointError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
