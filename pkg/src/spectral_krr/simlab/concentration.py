"""Monte Carlo checks of the operator concentration bounds.

A finite feature model has domain masses ``mu`` and a feature matrix
``F[x, j] = phi_j(x)`` with ``T = F^T diag(mu) F`` diagonal. A sample of size
``n`` gives ``Sigma = F^T diag(counts / n) F``.
"""

from dataclasses import dataclass
import math

import numpy as np

from ..spectral import operator_norm


@dataclass(frozen=True)
class FeatureModel:
    masses: np.ndarray
    features: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.masses, dtype=float)
        F = np.asarray(self.features, dtype=float)
        if F.ndim != 2 or F.shape[0] != mu.size:
            raise ValueError("features must have one row per domain point")
        if np.any(mu < 0) or not math.isclose(mu.sum(), 1.0, rel_tol=1e-9):
            raise ValueError("masses must be a probability vector")
        T = F.T @ (mu[:, None] * F)
        off = T - np.diag(np.diag(T))
        if np.max(np.abs(off), initial=0.0) > 1e-12 * max(np.max(np.abs(T)), 1.0):
            raise ValueError("features must diagonalize the population operator")
        object.__setattr__(self, "masses", mu)
        object.__setattr__(self, "features", F)
        object.__setattr__(self, "_t", np.diag(T).copy())

    @classmethod
    def discrete(cls, masses):
        """Indicator kernel: ``phi_j(x) = 1{x = j}``, so ``T = diag(mu)``."""
        mu = np.asarray(masses, dtype=float)
        return cls(mu, np.eye(mu.size))

    @property
    def eigenvalues(self):
        return self._t

    @property
    def kappa_sq(self):
        return float(np.max(np.sum(self.features**2, axis=1)))

    def kappa_delta_sq(self, delta):
        """``sup_x sum_j t_j^(-2 delta) phi_j(x)^2`` over the finite domain."""
        t = self._t
        w = np.zeros_like(t)
        pos = t > 0
        w[pos] = t[pos] ** (-delta)
        return float(np.max((self.features**2) @ w))


def tail_bound(d_lambda, lam, n, r, delta, kappa_delta_sq):
    return 4.0 * d_lambda * math.exp(
        -(lam ** (1.0 - delta)) * n * r * r / (2.0 * kappa_delta_sq * (1.0 + r / 3.0))
    )


def moment_bound(kappa_sq, n):
    return 34.0 * kappa_sq**2 / n + 15.0 * kappa_sq**2 / n**2


def min_admissible_r(lam, n, delta, kappa_delta_sq):
    s = kappa_delta_sq / (lam ** (1.0 - delta) * n)
    return math.sqrt(s) + s / 3.0


def informative_r(d_lambda, lam, n, delta, kappa_delta_sq, level=0.5):
    """Admissible ``r`` at which the tail bound equals ``level`` (or the minimum if larger)."""
    a = lam ** (1.0 - delta) * n / (2.0 * kappa_delta_sq)
    c = math.log(4.0 * d_lambda / level)
    r = (c / 3.0 + math.sqrt(c * c / 9.0 + 4.0 * a * c)) / (2.0 * a) if c > 0 else 0.0
    return max(r, min_admissible_r(lam, n, delta, kappa_delta_sq))


@dataclass(frozen=True)
class ConcentrationResult:
    empirical_tail_prob: float
    tail_bound: float
    tail_se: float
    empirical_second_moment: float
    moment_se: float
    moment_bound: float
    d_lambda: float
    r: float
    replicates: int

    @property
    def tail_ok(self):
        return self.empirical_tail_prob <= self.tail_bound + 3.0 * self.tail_se

    @property
    def moment_ok(self):
        return self.empirical_second_moment <= self.moment_bound


def _norm(M):
    if np.count_nonzero(M - np.diag(np.diag(M))) == 0:
        return float(np.max(np.abs(np.diag(M)), initial=0.0))
    return operator_norm(M)


def concentration_trial(model, n, lam, delta, r, replicates, seed=0):
    """Estimate ``P(A_r)`` and ``E||Sigma - T||^2`` and pair them with their bounds.

    ``A_r`` is the event ``||(T + lam)^(-1/2) (Sigma - T) (T + lam)^(-1/2)|| >= r``.
    Raises ``ValueError`` when ``r`` or ``lam`` violate the tail-bound
    preconditions.
    """
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    if not 0 <= delta < 1:
        raise ValueError("delta must lie in [0, 1)")
    kd = model.kappa_delta_sq(delta)
    if lam ** (1.0 - delta) > kd:
        raise ValueError("tail bound needs lambda^(1 - delta) <= kappa_delta^2")
    r_min = min_admissible_r(lam, n, delta, kd)
    if r < r_min:
        raise ValueError(f"r={r} below the admissible minimum {r_min:.6g}")
    t = model.eigenvalues
    F = model.features
    T = np.diag(t)
    scale = 1.0 / np.sqrt(t + lam)
    rng = np.random.default_rng(seed)
    hits = 0
    sq = np.empty(replicates)
    for k in range(replicates):
        counts = rng.multinomial(n, model.masses)
        Sigma = F.T @ ((counts / n)[:, None] * F)
        D = Sigma - T
        sq[k] = _norm(D) ** 2
        if _norm(scale[:, None] * D * scale[None, :]) >= r:
            hits += 1
    p = hits / replicates
    d = float(np.sum(t / (t + lam)))
    return ConcentrationResult(
        empirical_tail_prob=p,
        tail_bound=tail_bound(d, lam, n, r, delta, kd),
        tail_se=math.sqrt(p * (1.0 - p) / replicates),
        empirical_second_moment=float(sq.mean()),
        moment_se=float(sq.std(ddof=1) / math.sqrt(replicates)) if replicates > 1 else 0.0,
        moment_bound=moment_bound(model.kappa_sq, n),
        d_lambda=d,
        r=float(r),
        replicates=replicates,
    )
