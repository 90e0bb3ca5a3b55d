"""Spectrally regularized kernel least squares.

The estimator is ``f(x) = sum_i gamma_i K(x_i, x)`` with
``gamma = g_lam(K / n) y / n``. Everything goes through one eigendecomposition
of ``K / n``; sweeping many lambdas afterwards costs ``O(n r)`` per lambda.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .filters import FilterFamily
from .kernels import KernelSpec, cross_kernel, discrete_indicator, kernel_matrix, _as_points
from .spectral import check_symmetric, eigh_symmetric

# eigenvalues of K/n at or below this fraction of the largest are treated as 0
NULL_RTOL = 1e-12
SOLVERS = ("auto", "dense", "grouped")


@dataclass(frozen=True)
class FittedEstimator:
    train_points: np.ndarray
    dual_coefficients: np.ndarray
    kernel: KernelSpec
    filter: FilterFamily
    lam: float


@dataclass(frozen=True)
class GridFitContext:
    """Reusable spectral factorization of one training set.

    Only the numerically non-null eigenpairs of ``K / n`` are stored
    (``eigenvectors`` is ``n x r``, dense or sparse). The component of ``y``
    in the null space is kept as ``null_residual``; filters act on it through
    their ``t -> 0+`` limit.
    """

    eigenvalues: np.ndarray
    eigenvectors: object
    rotated_labels: np.ndarray
    null_residual: np.ndarray
    n: int
    train_points: np.ndarray
    kernel: KernelSpec | None = None
    projected_cross: object = None
    solver: str = "dense"
    extra: dict = field(default_factory=dict, repr=False)

    @property
    def rank(self):
        return self.eigenvalues.shape[0]

    def rotate(self, v):
        """Coordinates of ``v`` along the retained eigenvectors."""
        return np.asarray(self.eigenvectors.T @ np.asarray(v, dtype=float)).ravel()


def _dense_factors(K, y):
    n = K.shape[0]
    spec = eigh_symmetric(K / n)
    w = spec.eigenvalues
    top = max(w[0], 0.0) if n else 0.0
    r = int(np.sum(w > NULL_RTOL * top)) if top > 0 else 0
    U = spec.eigenvectors[:, :r]
    V0 = spec.eigenvectors[:, r:]
    null_residual = V0 @ (V0.T @ y)
    return w[:r].copy(), U, U.T @ y, null_residual


def _grouped_factors(X, y):
    # discrete kernel: K/n has eigenvalue c_x/n on the normalized indicator
    # of each distinct point x (multiplicity c_x) and 0 elsewhere
    n = X.shape[0]
    values, inverse, counts = np.unique(X, return_inverse=True, return_counts=True)
    order = np.lexsort((values, -counts))
    rank_of = np.empty_like(order)
    rank_of[order] = np.arange(order.size)
    col = rank_of[inverse]
    c = counts[order].astype(float)
    U = scipy.sparse.csc_matrix(
        (1.0 / np.sqrt(counts[inverse]), (np.arange(n), col)), shape=(n, c.size)
    )
    sums = np.bincount(col, weights=y, minlength=c.size)
    null_residual = y - (sums / c)[col]
    return c / n, U, sums / np.sqrt(c), null_residual, values[order]


def _resolve_solver(kernel, solver):
    if solver not in SOLVERS:
        raise ValueError(f"unknown solver {solver!r}; expected one of {SOLVERS}")
    if solver == "auto":
        return "grouped" if kernel is not None and kernel.kind == "discrete" else "dense"
    if solver == "grouped" and (kernel is None or kernel.kind != "discrete"):
        raise ValueError("the grouped solver only applies to the discrete kernel")
    return solver


def _check_labels(X, y):
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] != y.shape[0]:
        raise ValueError(f"X has {X.shape[0]} points but y has {y.shape[0]} labels")
    if y.shape[0] < 1:
        raise ValueError("need at least one training point")
    if not np.all(np.isfinite(y)):
        raise ValueError("labels must be finite")
    return y


def prepare_grid(X, y, kernel, eval_points=None, solver="auto"):
    """Factor ``K / n`` once for a training set.

    If ``eval_points`` is given, the products ``K(eval, train) U`` are cached
    so that per-lambda predictions at those points cost ``O(m r)``.
    """
    X = _as_points(kernel, X)
    y = _check_labels(X, y)
    solver = _resolve_solver(kernel, solver)
    extra = {}
    if solver == "grouped":
        w, U, z, null_res, distinct = _grouped_factors(X, y)
        extra["distinct_points"] = distinct
    else:
        K = kernel_matrix(kernel, X)
        w, U, z, null_res = _dense_factors(K, y)
    P = None
    if eval_points is not None:
        if solver == "grouped":
            E = _as_points(kernel, eval_points)
            P = (discrete_indicator(E, X) @ U).tocsr()
        else:
            P = cross_kernel(kernel, X, eval_points) @ U
    return GridFitContext(w, U, z, null_res, X.shape[0], X, kernel, P, solver, extra)


def context_from_gram(K, y, K_eval=None):
    """Same as :func:`prepare_grid` for an explicit Gram matrix.

    ``K_eval`` holds kernel values between evaluation points (rows) and
    training points (columns).
    """
    K = check_symmetric(K)
    X = np.arange(K.shape[0])
    y = _check_labels(X, y)
    w, U, z, null_res = _dense_factors(K, y)
    P = None if K_eval is None else np.asarray(K_eval, dtype=float) @ U
    return GridFitContext(w, U, z, null_res, K.shape[0], X, None, P, "dense")


def _filter_weights(ctx, filt, lam):
    return filt.spectral_values(lam, ctx.eigenvalues), filt.at_zero(lam)


def dual_coefficients(ctx, filt, lam):
    g, g0 = _filter_weights(ctx, filt, lam)
    coef = np.asarray(ctx.eigenvectors @ (g * ctx.rotated_labels)).ravel()
    if g0 != 0.0:
        coef = coef + g0 * ctx.null_residual
    return coef / ctx.n


def eval_predictions(ctx, filt, lam):
    if ctx.projected_cross is None:
        raise ValueError("context was prepared without eval_points")
    g, _ = _filter_weights(ctx, filt, lam)
    return np.asarray(ctx.projected_cross @ (g * ctx.rotated_labels)).ravel() / ctx.n


def eval_prediction_matrix(ctx, filt, lambdas):
    """Predictions at the cached evaluation points, one column per lambda."""
    if ctx.projected_cross is None:
        raise ValueError("context was prepared without eval_points")
    lambdas = np.asarray(lambdas, dtype=float)
    G = np.stack([filt.spectral_values(lam, ctx.eigenvalues) for lam in lambdas], axis=1)
    G *= ctx.rotated_labels[:, None]
    return np.asarray(ctx.projected_cross @ G) / ctx.n


@dataclass(frozen=True)
class GridRecord:
    lam: float
    dual_coefficients: np.ndarray | None
    eval_predictions: np.ndarray | None


def fit_grid(ctx, filt, lambdas, coefficients=True):
    """Per-lambda coefficients (and cached-point predictions) from a context."""
    lambdas = np.asarray(lambdas, dtype=float).ravel()
    if lambdas.size == 0:
        raise ValueError("empty lambda grid")
    if np.any(lambdas <= 0):
        raise ValueError("lambdas must be positive")
    if np.any(np.diff(lambdas) < 0):
        raise ValueError("lambdas must be sorted ascending")
    out = []
    for lam in lambdas:
        coef = dual_coefficients(ctx, filt, lam) if coefficients else None
        pred = eval_predictions(ctx, filt, lam) if ctx.projected_cross is not None else None
        out.append(GridRecord(float(lam), coef, pred))
    return out


def empirical_effective_dimension(ctx, lam):
    """``sum_j w_j / (w_j + lam)`` over the eigenvalues ``w_j`` of ``K / n``."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    w = ctx.eigenvalues
    return float(np.sum(w / (w + lam)))


def fit(X, y, kernel, filt, lam, solver="auto"):
    """Fit ``f = sum_i gamma_i K(x_i, .)`` with ``gamma = g_lam(K/n) y / n``."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    filt._check_lambda(lam)
    ctx = prepare_grid(X, y, kernel, solver=solver)
    return FittedEstimator(ctx.train_points, dual_coefficients(ctx, filt, lam), kernel, filt, float(lam))


def predict(est, X_new):
    """Evaluate ``sum_i gamma_i K(x_i, x)`` at each new point."""
    if est.kernel.kind == "discrete":
        X_new = _as_points(est.kernel, X_new)
        return np.asarray(discrete_indicator(X_new, est.train_points) @ est.dual_coefficients).ravel()
    return cross_kernel(est.kernel, est.train_points, X_new) @ est.dual_coefficients


class SpectralKernelRegressor(RegressorMixin, BaseEstimator):
    """Kernel regression with a spectral filter on the normalized kernel matrix.

    Parameters
    ----------
    alpha : float, default=1.0
        Regularization level ``lam``. The filter acts on the eigenvalues of
        ``K / n``, so ``filter="ridge"`` solves ``(K + n * alpha * I) c = y``
        (sklearn's ``KernelRidge`` uses ``K + alpha * I``).
    filter : {"ridge", "cutoff", "landweber"}, default="ridge"
    kernel : {"gaussian", "discrete", "linear", "precomputed"}, default="gaussian"
        With ``"precomputed"``, ``fit`` takes the training Gram matrix and
        ``predict`` takes kernel values of shape ``(n_new, n_train)``.
    bandwidth : float, default=1.0
        Gaussian kernel width ``h`` in ``exp(-|x - x'|^2 / (2 h^2))``.
    landweber_step : float, optional
        Step size for ``filter="landweber"``; defaults to ``1 / (2 kappa^2)``.
    solver : {"auto", "dense", "grouped"}, default="auto"
        ``"grouped"`` exploits the block structure of the discrete kernel.

    Attributes
    ----------
    dual_coef_ : ndarray of shape (n_samples,)
    X_fit_ : ndarray
    effective_dimension_ : float
        ``sum_j w_j / (w_j + alpha)`` over the eigenvalues of ``K / n``.
    """

    def __init__(
        self,
        alpha=1.0,
        filter="ridge",
        kernel="gaussian",
        bandwidth=1.0,
        landweber_step=None,
        solver="auto",
    ):
        self.alpha = alpha
        self.filter = filter
        self.kernel = kernel
        self.bandwidth = bandwidth
        self.landweber_step = landweber_step
        self.solver = solver

    def _kernel_spec(self):
        if self.kernel == "gaussian":
            return KernelSpec("gaussian", bandwidth=self.bandwidth)
        return KernelSpec(self.kernel) if self.kernel != "precomputed" else None

    def _validate_X(self, X, reset):
        if self.kernel in ("discrete",):
            X = check_array(X, ensure_2d=False, dtype=None)
            if X.ndim == 2 and X.shape[1] == 1:
                X = X[:, 0]
            return X
        if self.kernel == "precomputed":
            return check_array(X)
        return check_array(X, ensure_2d=False, dtype=np.float64)

    def fit(self, X, y):
        X = self._validate_X(X, reset=True)
        y = check_array(y, ensure_2d=False, dtype=np.float64)
        if self.kernel == "precomputed":
            ctx = context_from_gram(X, y)
            kappa_sq = float(np.max(np.diag(X)))
        else:
            spec = self._kernel_spec()
            ctx = prepare_grid(X, y, spec, solver=self.solver)
            kappa_sq = spec.kappa_sq_of(ctx.train_points)
        filt = FilterFamily(
            self.filter,
            kappa_sq=max(kappa_sq, np.finfo(float).tiny),
            landweber_step=self.landweber_step if self.filter == "landweber" else None,
        )
        self.filter_ = filt
        self.dual_coef_ = dual_coefficients(ctx, filt, self.alpha)
        self.X_fit_ = ctx.train_points if self.kernel != "precomputed" else None
        self.effective_dimension_ = empirical_effective_dimension(ctx, self.alpha)
        self.n_features_in_ = 1 if np.ndim(X) == 1 else X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "dual_coef_")
        X = self._validate_X(X, reset=False)
        if self.kernel == "precomputed":
            return X @ self.dual_coef_
        est = FittedEstimator(self.X_fit_, self.dual_coef_, self._kernel_spec(), self.filter_, self.alpha)
        return predict(est, X)
