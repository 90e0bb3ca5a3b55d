"""Replicated experiments: validation-tuned risk, rate ladders, bound checks."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
import math
import os

import numpy as np

from ..estimator import prepare_grid
from ..filters import FilterFamily
from ..kernels import KernelSpec
from ..spectrum import SpectrumModel, discrete_kappa_delta_sq, theorem_bound
from .risk import estimate_rate, mu_mse_from_values, select_lambda, split_from_context
from .task import NOISE_TRANSFORM, replicate_seed, sample_dataset

METHOD_FILTERS = {"krr": "ridge", "kpcr": "cutoff", "landweber": "landweber"}
RECORD_FIELDS = ("seed", "method", "lambda_selected", "validation_mse", "mu_mse", "bias_part", "variance_part")
AGG_FIELDS = ("lambda_selected", "validation_mse", "mu_mse", "bias_part", "variance_part")


def simulation_grid(lo=1e-5, hi=0.02, size=2**10):
    return np.linspace(lo, hi, size)


def method_filter(method, kappa_sq=1.0):
    try:
        kind = METHOD_FILTERS[method]
    except KeyError:
        raise ValueError(f"unknown method {method!r}; expected one of {sorted(METHOD_FILTERS)}") from None
    return FilterFamily(kind, kappa_sq=kappa_sq)


def _map(func, items, threads):
    items = list(items)
    threads = threads or os.cpu_count() or 1
    if threads <= 1 or len(items) <= 1:
        return [func(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))


@dataclass(frozen=True)
class ReplicateRecord:
    seed: int
    method: str
    lambda_selected: float
    validation_mse: float
    mu_mse: float
    bias_part: float
    variance_part: float


@dataclass
class RiskReport:
    records: list
    config: dict = field(default_factory=dict)

    def methods(self):
        seen = []
        for rec in self.records:
            if rec.method not in seen:
                seen.append(rec.method)
        return seen

    def values(self, method, name):
        return np.array([getattr(r, name) for r in self.records if r.method == method])

    def aggregates(self):
        """``{method: {field: {"mean", "median", "std"}}}``."""
        out = {}
        for m in self.methods():
            out[m] = {}
            for name in AGG_FIELDS:
                v = self.values(m, name)
                out[m][name] = {
                    "mean": float(np.mean(v)),
                    "median": float(np.median(v)),
                    "std": float(np.std(v, ddof=1)) if v.size > 1 else 0.0,
                }
        return out

    def median(self, method, name="mu_mse"):
        return float(np.median(self.values(method, name)))

    def rows(self):
        return [asdict(r) for r in self.records]


def _replicate(task, n, n_val, methods, lambdas, kernel, solver, index):
    seed = replicate_seed(task.master_seed, index)
    train = sample_dataset(task, n, replicate_seed(task.master_seed, index, 1))
    val = sample_dataset(task, n_val, replicate_seed(task.master_seed, index, 2))
    eval_pts = np.concatenate([val.x, task.domain])
    ctx = prepare_grid(train.x, train.y, kernel, eval_points=eval_pts, solver=solver)
    P = ctx.projected_cross
    P_val, P_dom = P[:n_val], P[n_val:]
    out = []
    for method in methods:
        filt = method_filter(method, kernel.kappa_sq_of(train.x))
        G = np.stack([filt.spectral_values(lam, ctx.eigenvalues) for lam in lambdas], axis=1)
        G *= ctx.rotated_labels[:, None]
        preds = np.asarray(P_val @ G) / ctx.n
        resid = val.y[:, None] - preds
        mses = np.mean(resid * resid, axis=0)
        lam = select_lambda(lambdas, mses)
        k = int(np.flatnonzero(lambdas == lam)[0])
        g = filt.spectral_values(lam, ctx.eigenvalues)
        dom = np.asarray(P_dom @ (g * ctx.rotated_labels)).ravel() / ctx.n
        split = split_from_context(task, ctx, P_dom, filt, lam)
        out.append(
            ReplicateRecord(seed, method, lam, float(mses[k]), mu_mse_from_values(task, dom),
                            split.bias_part, split.variance_part)
        )
    return out


def run_experiment(task, n, lambdas, methods=("krr", "kpcr"), replicates=5, n_validation=None,
                   kernel=None, solver="auto", threads=1):
    """Validation-tuned fits over independent replicates.

    Each replicate draws a training and a validation sample, sweeps the
    lambda grid, picks the lambda with the smallest validation MSE, and
    records the exact mu-MSE and bias/variance split of the chosen fit.
    Fully determined by ``task.master_seed``.
    """
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    if n < 1:
        raise ValueError("n must be >= 1")
    lambdas = np.asarray(lambdas, dtype=float)
    if lambdas.size == 0 or np.any(lambdas <= 0) or np.any(np.diff(lambdas) < 0):
        raise ValueError("lambda grid must be non-empty, positive and ascending")
    n_val = n if n_validation is None else n_validation
    kernel = kernel or KernelSpec("discrete")
    rows = _map(
        lambda i: _replicate(task, n, n_val, tuple(methods), lambdas, kernel, solver, i),
        range(replicates),
        threads,
    )
    config = {
        "domain_size": task.domain_size,
        "marginal_exponent": task.marginal_exponent,
        "noise_sd": task.noise_sd,
        "master_seed": task.master_seed,
        "n": n,
        "n_validation": n_val,
        "methods": list(methods),
        "lambda_min": float(lambdas[0]),
        "lambda_max": float(lambdas[-1]),
        "lambda_count": int(lambdas.size),
        "replicates": replicates,
        "kernel": kernel.kind,
        "noise_transform": NOISE_TRANSFORM,
    }
    return RiskReport([r for chunk in rows for r in chunk], config)


def fixed_lambda_risks(task, n, filt, lam, replicates, kernel=None, solver="auto", threads=1, stream=0):
    """Exact mu-MSE of the fit at a fixed lambda, one value per replicate."""
    kernel = kernel or KernelSpec("discrete")

    def one(i):
        data = sample_dataset(task, n, replicate_seed(task.master_seed, i, 10 + stream))
        ctx = prepare_grid(data.x, data.y, kernel, eval_points=task.domain, solver=solver)
        g = filt.spectral_values(lam, ctx.eigenvalues)
        dom = np.asarray(ctx.projected_cross @ (g * ctx.rotated_labels)).ravel() / ctx.n
        return mu_mse_from_values(task, dom)

    return np.array(_map(one, range(replicates), threads))


@dataclass(frozen=True)
class RatePoint:
    method: str
    n: int
    lam: float
    median_risk: float
    mean_risk: float


def rate_experiment(task, ns, schedules, replicates, threads=1, solver="auto"):
    """Median exact risk per (method, n) under per-method lambda rules.

    ``schedules`` maps a method name to ``(filter, lam_of_n)``. Returns the
    ladder points and the fitted log-log slope per method.
    """
    ns = [int(n) for n in ns]
    if len(ns) < 3:
        raise ValueError("need ≥ 3 ladder points")
    points = []
    slopes = {}
    for method, (filt, lam_of_n) in schedules.items():
        ladder = []
        for j, n in enumerate(ns):
            lam = float(lam_of_n(n))
            risks = fixed_lambda_risks(task, n, filt, lam, replicates, solver=solver,
                                       threads=threads, stream=j)
            pt = RatePoint(method, n, lam, float(np.median(risks)), float(np.mean(risks)))
            points.append(pt)
            ladder.append((n, pt.median_risk))
        slopes[method] = estimate_rate(ladder)
    return points, slopes


def validation_rate_experiment(task, ns, methods, lambdas, replicates, threads=1):
    """Rate ladder with lambda picked on a validation sample instead of a schedule."""
    points = []
    slopes = {}
    for method in methods:
        ladder = []
        for n in ns:
            rep = run_experiment(task, n, lambdas, (method,), replicates, threads=threads)
            v = rep.values(method, "mu_mse")
            pt = RatePoint(method, int(n), rep.median(method, "lambda_selected"),
                           float(np.median(v)), float(np.mean(v)))
            points.append(pt)
            ladder.append((n, pt.median_risk))
        slopes[method] = estimate_rate(ladder)
    return points, slopes


@dataclass(frozen=True)
class BoundCheck:
    """Monte Carlo risk at a fixed lambda against the risk upper bound."""

    domain_size: int
    exponent: float
    sigma_sq: float
    n: int
    lam: float
    method: str
    window_ok: bool
    mc_risk: float
    mc_se: float
    terms: dict | None

    @property
    def dominated(self):
        if not self.window_ok:
            return None
        return self.mc_risk - 2.0 * self.mc_se <= self.terms["total"]


def bound_check(task, n, lam, method, replicates, zeta=0.0, delta=0.0, threads=1):
    """Compare the averaged exact risk to the bound for a discrete-kernel task."""
    model = SpectrumModel.marginal_power(task.domain_size, task.marginal_exponent, task.target)
    kd = discrete_kappa_delta_sq(task.masses, delta)
    filt = method_filter(method)
    try:
        terms = theorem_bound(model, zeta, task.noise_var, 1.0, kd, delta, lam, n).as_dict()
        window_ok = True
    except ValueError as exc:
        if "window" not in str(exc):
            raise
        terms, window_ok = None, False
    risks = fixed_lambda_risks(task, n, filt, lam, replicates, threads=threads)
    se = float(np.std(risks, ddof=1) / math.sqrt(risks.size)) if risks.size > 1 else 0.0
    return BoundCheck(task.domain_size, task.marginal_exponent, task.noise_var, n, float(lam),
                      method, window_ok, float(np.mean(risks)), se, terms)
