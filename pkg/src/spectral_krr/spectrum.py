"""Population eigenvalue models, source norms and the general risk bound."""

from dataclasses import dataclass
import math

import numpy as np

DEFAULT_TRUNCATION = 2**14
# (8/3 + 2 sqrt(5/3)): lower edge of the admissible lambda window
WINDOW_CONSTANT = 8.0 / 3.0 + 2.0 * math.sqrt(5.0 / 3.0)


@dataclass(frozen=True)
class SpectrumModel:
    """Eigenvalues ``t_j^2`` (non-increasing) and target coefficients ``theta_j``.

    ``theta_j`` are coordinates of the regression function along the
    L2-normalized eigenfunctions. ``tail_bound`` bounds the eigenvalue mass
    dropped by truncation (0 for explicit or finite models).
    """

    eigenvalues: np.ndarray
    theta: np.ndarray | None = None
    decay: str = "explicit"
    tail_bound: float = 0.0

    def __post_init__(self):
        t = np.asarray(self.eigenvalues, dtype=float).ravel()
        if np.any(t < 0) or not np.all(np.isfinite(t)):
            raise ValueError("eigenvalues must be finite and non-negative")
        if np.any(np.diff(t) > 0):
            raise ValueError("eigenvalues must be non-increasing")
        object.__setattr__(self, "eigenvalues", t)
        if self.theta is not None:
            th = np.asarray(self.theta, dtype=float).ravel()
            if th.size > t.size:
                raise ValueError("more coefficients than retained eigenvalues")
            object.__setattr__(self, "theta", th)

    @property
    def truncation(self):
        return self.eigenvalues.size

    @property
    def top(self):
        return float(self.eigenvalues[0]) if self.eigenvalues.size else 0.0

    def with_theta(self, theta):
        return SpectrumModel(self.eigenvalues, theta, self.decay, self.tail_bound)

    @classmethod
    def explicit(cls, eigenvalues, theta=None):
        return cls(eigenvalues, theta)

    @classmethod
    def polynomial(cls, C, nu, truncation=DEFAULT_TRUNCATION, theta=None):
        """``t_j^2 = C j^(-2 nu)``."""
        if not nu > 0.5:
            raise ValueError("polynomial decay needs nu > 1/2 for a finite trace")
        j = np.arange(1, truncation + 1, dtype=float)
        tail = C * truncation ** (1.0 - 2.0 * nu) / (2.0 * nu - 1.0)
        return cls(C * j ** (-2.0 * nu), theta, "polynomial", tail)

    @classmethod
    def exponential(cls, C, alpha, truncation=DEFAULT_TRUNCATION, theta=None):
        """``t_j^2 = C exp(-alpha j)``."""
        if not alpha > 0:
            raise ValueError("alpha must be positive")
        j = np.arange(1, truncation + 1, dtype=float)
        tail = C * math.exp(-alpha * (truncation + 1)) / -math.expm1(-alpha)
        return cls(C * np.exp(-alpha * j), theta, "exponential", tail)

    @classmethod
    def gaussian(cls, C, alpha, truncation=DEFAULT_TRUNCATION, theta=None):
        """``t_j^2 = C exp(-alpha j^2)``."""
        if not alpha > 0:
            raise ValueError("alpha must be positive")
        j = np.arange(1, truncation + 1, dtype=float)
        J1 = truncation + 1
        tail = C * math.exp(-alpha * J1 * J1) / -math.expm1(-alpha * J1)
        return cls(C * np.exp(-alpha * j * j), theta, "gaussian", tail)

    @classmethod
    def marginal_power(cls, domain_size, exponent, target=None):
        """Discrete kernel on ``{1..N}`` under ``mu(x) proportional to x^(-a)``.

        With the indicator kernel, the eigenfunctions are normalized point
        indicators and ``t_j^2`` is the j-th largest point mass. ``target``
        (values of the regression function on ``1..N``) fixes ``theta``.
        """
        mu = marginal_masses(domain_size, exponent)
        order = np.argsort(-mu, kind="stable")
        theta = None
        if target is not None:
            f = np.asarray(target, dtype=float)
            if f.shape != (domain_size,):
                raise ValueError("target must list one value per domain point")
            theta = f[order] * np.sqrt(mu[order])
        return cls(mu[order], theta, "marginal_power", 0.0)


def marginal_masses(domain_size, exponent):
    """Point masses ``mu(x) = x^(-a) / sum_y y^(-a)`` for ``x = 1..N``."""
    if domain_size < 1:
        raise ValueError("domain_size must be positive")
    w = np.arange(1, domain_size + 1, dtype=float) ** (-float(exponent))
    return w / w.sum()


def effective_dimension(model, lam):
    """``sum_j t_j^2 / (t_j^2 + lam)`` over the retained eigenvalues."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    t = model.eigenvalues
    return float(np.sum(t / (t + lam)))


def source_norm(model, zeta):
    """``(sum_j theta_j^2 / t_j^(2 (1 + zeta)))^(1/2)``; ``inf`` if unbounded.

    Zero coefficients on zero eigenvalues contribute nothing.
    """
    if model.theta is None:
        raise ValueError("model has no target coefficients")
    if zeta < 0:
        raise ValueError("zeta must be non-negative")
    th = model.theta
    t = model.eigenvalues[: th.size]
    nz = th != 0
    if np.any(t[nz] == 0):
        return math.inf
    total = np.sum(th[nz] ** 2 / t[nz] ** (1.0 + zeta))
    return float(math.sqrt(total))


def check_lambda_window(lam, n, delta, kappa_delta_sq):
    """Whether ``C kappa_delta^2 / n <= lam^(1 - delta) <= kappa_delta^2``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0 <= delta <= 1:
        raise ValueError("delta must lie in [0, 1]")
    p = lam ** (1.0 - delta)
    return bool(WINDOW_CONSTANT * kappa_delta_sq / n <= p <= kappa_delta_sq)


@dataclass(frozen=True)
class BoundTerms:
    term1: float
    term2: float
    term3: float
    term4: float

    @property
    def total(self):
        return self.term1 + self.term2 + self.term3 + self.term4

    def as_dict(self):
        return {
            "term1": self.term1,
            "term2": self.term2,
            "term3": self.term3,
            "term4": self.term4,
            "total": self.total,
        }


def theorem_bound(model, zeta, sigma_sq, kappa_sq, kappa_delta_sq, delta, lam, n):
    """Evaluate the four terms of the general risk upper bound.

    Raises ``ValueError`` when lambda lies outside the admissible window or
    the target has infinite ``H_zeta`` norm.
    """
    if not check_lambda_window(lam, n, delta, kappa_delta_sq):
        raise ValueError(
            f"lambda={lam} outside the admissible window for n={n}, delta={delta}"
        )
    norm_zeta = source_norm(model, zeta)
    if math.isinf(norm_zeta):
        raise ValueError(f"target has infinite H_zeta norm for zeta={zeta}")
    norm_zeta_sq = norm_zeta**2
    norm_h_sq = source_norm(model, 0.0) ** 2
    d = effective_dimension(model, lam)
    t1 = model.top
    term1 = 2.0 ** (zeta + 3.0) * norm_zeta_sq * lam ** (zeta + 1.0)
    term2 = 4.0 * d * sigma_sq / n
    expo = math.exp(-3.0 * lam ** (1.0 - delta) * n / (28.0 * kappa_delta_sq))
    term3 = 4.0 * d * (norm_h_sq * t1 + kappa_sq * sigma_sq / (lam * n)) * expo
    term4 = 0.0
    if zeta > 1:
        term4 = (
            16.0 * zeta**2 * 1.5 ** (zeta - 1.0) * norm_zeta_sq
            * (t1 + lam) ** (zeta - 1.0) * kappa_sq**2 * (34.0 / n + 15.0 / n**2)
        )
    return BoundTerms(term1, term2, term3, term4)


def lambda_schedule(kind, n, zeta=0.0, scale=1.0, nu=None):
    """Regularization level prescribed for a decay law at sample size ``n``.

    polynomial: ``scale * n^(-2 nu / (2 nu (zeta + 1) + 1))``;
    exponential: ``scale * log(n) / n``; gaussian: ``scale * sqrt(log n) / n``.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    if not scale > 0:
        raise ValueError("scale must be positive")
    if kind == "polynomial":
        if nu is None or not nu > 0:
            raise ValueError("polynomial schedule needs nu > 0")
        return scale * n ** (-2.0 * nu / (2.0 * nu * (zeta + 1.0) + 1.0))
    if kind == "exponential":
        return scale * math.log(n) / n
    if kind == "gaussian":
        return scale * math.sqrt(math.log(n)) / n
    raise ValueError(f"unknown decay kind {kind!r}")


def discrete_kappa_delta_sq(masses, delta):
    """``sup_x sum_j t_j^(2(1-delta)) psi_j(x)^2`` for the indicator kernel.

    There ``psi_j(x)^2 = 1{x = x_j} / mu(x_j)`` and ``t_j^2 = mu(x_j)``, so the
    sum at ``x`` is ``mu(x)^(-delta)``; the sup is brute-forced over the
    support.
    """
    mu = np.asarray(masses, dtype=float)
    mu = mu[mu > 0]
    return float(np.max(mu ** (1.0 - delta) / mu))


def window_threshold_n(lam_of_n, delta, kappa_delta_sq, n_max=10**7):
    """Smallest ``n >= 2`` from which ``lam_of_n(n)`` stays inside the window.

    Scans doubling then bisects; assumes the schedule decays slower than
    ``1/n``, so once inside the window it stays inside.
    """
    n = 2
    while n <= n_max and not check_lambda_window(lam_of_n(n), n, delta, kappa_delta_sq):
        n *= 2
    if n > n_max:
        return None
    lo, hi = max(2, n // 2), n
    while lo < hi:
        mid = (lo + hi) // 2
        if check_lambda_window(lam_of_n(mid), mid, delta, kappa_delta_sq):
            hi = mid
        else:
            lo = mid + 1
    return lo
