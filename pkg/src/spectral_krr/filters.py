"""Spectral regularization families: ridge, spectral cut-off and Landweber.

A family maps a regularization level ``lam > 0`` and a spectral value ``t``
to ``g(t)``, an approximation of ``1 / t`` that stays bounded by ``1 / lam``.
"""

from dataclasses import dataclass, field
import math

import numpy as np

KINDS = ("ridge", "cutoff", "landweber")

# strict inequalities R1/R3 are checked against bound - STRICT_MARGIN
STRICT_MARGIN = 1e-12


@dataclass(frozen=True)
class FilterFamily:
    """Parameters of a regularization family.

    Parameters
    ----------
    kind : {"ridge", "cutoff", "landweber"}
    kappa_sq : float
        Upper end of the spectral range the family operates on.
    landweber_step : float, optional
        Gradient step for the Landweber iteration. Defaults to
        ``1 / (2 * kappa_sq)`` and must not exceed it.
    """

    kind: str
    kappa_sq: float = 1.0
    landweber_step: float | None = field(default=None)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown filter kind {self.kind!r}; expected one of {KINDS}")
        if not self.kappa_sq > 0:
            raise ValueError("kappa_sq must be positive")
        if self.kind == "landweber":
            step = self.landweber_step
            if step is None:
                object.__setattr__(self, "landweber_step", 0.5 / self.kappa_sq)
            elif not 0 < step <= 0.5 / self.kappa_sq * (1 + 1e-12):
                raise ValueError("landweber_step must lie in (0, 1/(2*kappa_sq)]")
        elif self.landweber_step is not None:
            raise ValueError("landweber_step only applies to the landweber kind")

    def iterations(self, lam):
        """Landweber iteration count used at level ``lam``."""
        eta = self.landweber_step
        m = max(1, math.ceil(1.0 / (eta * lam)) - 1)
        # keep eta * m < 1 / lam under rounding of the ceiling
        while m > 1 and eta * m * lam >= 1.0:
            m -= 1
        return m

    def _check_lambda(self, lam):
        if not lam > 0:
            raise ValueError("lambda must be positive")
        if self.kind == "landweber" and lam * self.landweber_step >= 1.0:
            raise ValueError("landweber requires lambda < 1/landweber_step")

    def _check_t(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t <= 0) or np.any(t > self.kappa_sq * (1 + 1e-12)):
            raise ValueError(f"t must lie in (0, {self.kappa_sq}]")
        return t

    def _check(self, lam, t):
        self._check_lambda(lam)
        return self._check_t(t)

    def evaluate(self, lam, t):
        """``g_lam(t)``; scalar in, float out, arrays elementwise."""
        t = self._check(lam, t)
        return _out(self._g(lam, t))

    def residual(self, lam, t):
        """``1 - t * g_lam(t)``."""
        t = self._check(lam, t)
        return _out(self._residual(lam, t))

    def at_zero(self, lam):
        """Limit of ``g_lam(t)`` as ``t -> 0+``.

        Used for numerically null eigen-directions of a kernel matrix.
        """
        if self.kind == "ridge":
            return 1.0 / lam
        if self.kind == "cutoff":
            return 0.0
        self._check_lambda(lam)
        return self.landweber_step * self.iterations(lam)

    def spectral_values(self, lam, t):
        """``g_lam`` on a non-negative array, zeros mapped to :meth:`at_zero`.

        No range validation beyond the lambda checks; intended for
        eigenvalue vectors already clipped to ``[0, kappa_sq]``.
        """
        t = np.asarray(t, dtype=float)
        out = np.full(t.shape, self.at_zero(lam), dtype=float)
        pos = t > 0
        if np.any(pos):
            out[pos] = self._g(lam, t[pos])
        return out

    def _g(self, lam, t):
        if self.kind == "ridge":
            return 1.0 / (t + lam)
        if self.kind == "cutoff":
            return np.where(t >= lam, 1.0 / t, 0.0)
        eta = self.landweber_step
        m = self.iterations(lam)
        # 1 - (1 - eta t)^m, without cancellation for small eta t
        return -np.expm1(m * np.log1p(-eta * t)) / t

    def _residual(self, lam, t):
        if self.kind == "ridge":
            return lam / (t + lam)
        if self.kind == "cutoff":
            return np.where(t >= lam, 0.0, 1.0)
        return np.exp(self._log_residual(lam, t))

    def _log_residual(self, lam, t):
        if self.kind == "ridge":
            return np.log(lam) - np.log(t + lam)
        if self.kind == "cutoff":
            return np.where(t >= lam, -np.inf, 0.0)
        return self.iterations(lam) * np.log1p(-self.landweber_step * t)


def _out(v):
    v = np.asarray(v)
    return float(v) if v.ndim == 0 else v


@dataclass(frozen=True)
class Witness:
    lam: float
    t: float
    value: float


@dataclass(frozen=True)
class FamilyReport:
    """Outcome of checking R1 (|t g| < 1), R2 (|1 - t g| <= 1), R3 (|g| < 1/lam).

    ``worst`` maps each condition to the grid point where the normalized
    quantity comes closest to its bound. ``attained`` lists conditions whose
    bound is reached exactly; those pass only in the non-strict sense.
    """

    r1_ok: bool
    r2_ok: bool
    r3_ok: bool
    worst: dict
    attained: tuple = ()

    @property
    def ok(self):
        return self.r1_ok and self.r2_ok and self.r3_ok


def _admissible_lambdas(filt, lambda_grid):
    lams = np.asarray(lambda_grid, dtype=float)
    if filt.kind == "landweber":
        lams = lams[lams * filt.landweber_step < 1.0]
    return lams


def verify_family_conditions(filt, lambda_grid, t_grid):
    """Check the regularization-family axioms over a (lambda, t) grid.

    R1 and R3 are strict. Since ``t g(t) >= 0`` for all three families, R1
    is decided on ``log(1 - t g(t)) > -inf``, which stays exact where the
    Landweber residual underflows. The cut-off family attains both bounds
    with equality (``t g(t) = 1`` for ``t >= lam`` and ``g(lam) = 1/lam``),
    so for that kind they are checked as non-strict and reported in
    ``attained``.
    """
    lams = _admissible_lambdas(filt, lambda_grid)
    ts = filt._check_t(t_grid)
    if lams.size == 0 or ts.size == 0:
        raise ValueError("grids must be non-empty")
    L = lams[:, None]
    T = ts[None, :]
    G = np.stack([filt._g(lam, ts) for lam in lams])
    R = np.stack([filt._residual(lam, ts) for lam in lams])
    quantities = {
        "r1": (np.abs(T * G), np.ones_like(G)),
        "r2": (np.abs(R), np.ones_like(G)),
        "r3": (np.abs(G), np.broadcast_to(1.0 / L, G.shape)),
    }
    log_res = np.stack([filt._log_residual(lam, ts) for lam in lams])
    ok = {}
    worst = {}
    attained = []
    for name, (value, bound) in quantities.items():
        ratio = value / bound
        if name == "r1":
            i, j = np.unravel_index(np.argmin(log_res), log_res.shape)
        else:
            i, j = np.unravel_index(np.argmax(ratio), ratio.shape)
        worst[name] = Witness(float(lams[i]), float(ts[j]), float(value[i, j]))
        peak = float(ratio[i, j])
        if name == "r1" and filt.kind != "cutoff":
            ok[name] = bool(np.all(np.isfinite(log_res))) and bool(np.all(G >= 0))
        elif name == "r2":
            ok[name] = peak <= 1.0 + STRICT_MARGIN
        elif filt.kind == "cutoff":
            ok[name] = peak <= 1.0 + STRICT_MARGIN
            if peak >= 1.0 - STRICT_MARGIN:
                attained.append(name)
        else:
            ok[name] = peak < 1.0 - STRICT_MARGIN
    return FamilyReport(ok["r1"], ok["r2"], ok["r3"], worst, tuple(attained))


@dataclass(frozen=True)
class QualificationReport:
    ok: bool
    xi: float
    slack: float
    witness: Witness
    ratio: float


def empirical_qualification(filt, xi, lambda_grid, t_grid, slack=1.0):
    """Check ``sup_t |1 - t g(t)| t^xi <= slack * lam^xi`` at every grid lambda.

    The returned witness is the (lambda, t) pair maximizing the ratio of the
    left side to ``lam^xi``; ``value`` holds the left side itself.
    """
    if xi < 0:
        raise ValueError("xi must be non-negative")
    if slack < 1:
        raise ValueError("slack must be >= 1")
    lams = _admissible_lambdas(filt, lambda_grid)
    ts = filt._check_t(t_grid)
    if lams.size == 0 or ts.size == 0:
        raise ValueError("grids must be non-empty")
    best = (-np.inf, None)
    for lam in lams:
        lhs = np.abs(filt._residual(lam, ts)) * ts**xi
        ratio = lhs / lam**xi
        j = int(np.argmax(ratio))
        if ratio[j] > best[0]:
            best = (float(ratio[j]), Witness(float(lam), float(ts[j]), float(lhs[j])))
    ratio, witness = best
    return QualificationReport(ratio <= slack * (1 + 1e-12), xi, slack, witness, ratio)


def default_grids(kappa_sq=1.0, size=1000, lam_min=1e-4):
    """Log-spaced lambda and t grids on ``[lam_min, kappa_sq]``."""
    lams = np.geomspace(lam_min, kappa_sq, size)
    ts = np.geomspace(lam_min * 1e-2, kappa_sq, size)
    return lams, ts
