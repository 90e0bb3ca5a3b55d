"""Exact risks, validation error, lambda selection and bias/variance."""

from dataclasses import dataclass

import numpy as np
import scipy.sparse

from ..estimator import eval_predictions, predict, prepare_grid
from ..kernels import KernelSpec


def mu_mse_from_values(task, values):
    """``sum_x mu(x) (f(x) - values[x - 1])^2`` over the whole domain."""
    r = task.target - np.asarray(values, dtype=float)
    return float(np.dot(task.masses, r * r))


def exact_mu_mse(task, est):
    """Squared L2(mu) distance between the target and a fitted estimator."""
    return mu_mse_from_values(task, predict(est, task.domain))


def validation_mse(est, val_x, val_y):
    val_y = np.asarray(val_y, dtype=float)
    if val_y.size == 0:
        raise ValueError("empty validation set")
    r = val_y - predict(est, val_x)
    return float(np.mean(r * r))


def select_lambda(lambdas, mses):
    """Grid value with the smallest validation MSE; ties go to the smaller lambda."""
    lambdas = np.asarray(lambdas, dtype=float)
    mses = np.asarray(mses, dtype=float)
    if lambdas.size == 0 or lambdas.shape != mses.shape:
        raise ValueError("need matching, non-empty lambda and MSE sequences")
    best = np.min(mses)
    return float(np.min(lambdas[mses == best]))


@dataclass(frozen=True)
class BiasVariance:
    bias_part: float
    variance_part: float

    @property
    def total(self):
        return self.bias_part + self.variance_part


def _row_sq(P):
    return P.power(2) if scipy.sparse.issparse(P) else P * P


def split_from_context(task, ctx, domain_cross, filt, lam):
    """Bias and variance of the fit at ``lam`` for the design inside ``ctx``.

    ``domain_cross`` is ``K(domain, train) U`` for the context's eigenvectors.
    The noiseless fit uses labels ``f(x_i)``; the variance is the exact
    noise expectation ``sigma^2 / n^2 sum_x mu(x) sum_j P[x, j]^2 g_j^2``.
    """
    g = filt.spectral_values(lam, ctx.eigenvalues)
    z_clean = ctx.rotate(task.f(ctx.train_points))
    f0 = np.asarray(domain_cross @ (g * z_clean)).ravel() / ctx.n
    bias = float(np.dot(task.masses, (task.target - f0) ** 2))
    row_energy = np.asarray(_row_sq(domain_cross) @ (g * g)).ravel()
    variance = float(task.noise_var * np.dot(task.masses, row_energy) / ctx.n**2)
    return BiasVariance(bias, variance)


def bias_variance_split(task, X, kernel, filt, lam, solver="auto"):
    """Exact noise-averaged risk decomposition for a fixed design ``X``."""
    kernel = kernel or KernelSpec("discrete")
    X = np.asarray(X)
    ctx = prepare_grid(X, task.f(X), kernel, eval_points=task.domain, solver=solver)
    return split_from_context(task, ctx, ctx.projected_cross, filt, lam)


def estimate_rate(points):
    """Least-squares slope of ``log(risk)`` against ``log(n)``."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 3:
        raise ValueError("need ≥ 3 ladder points of (n, risk)")
    if np.any(pts <= 0):
        raise ValueError("n and risk must be positive")
    slope, _ = np.polyfit(np.log(pts[:, 0]), np.log(pts[:, 1]), 1)
    return float(slope)
