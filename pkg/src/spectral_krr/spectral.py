"""Dense symmetric eigendecomposition and small operator-norm utilities."""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

SYMMETRY_RTOL = 1e-8


@dataclass(frozen=True)
class SymmetricSpectrum:
    """Eigenpairs of a real symmetric matrix.

    ``eigenvalues`` are sorted in descending order and column ``j`` of
    ``eigenvectors`` is the unit eigenvector belonging to ``eigenvalues[j]``.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def __len__(self):
        return self.eigenvalues.shape[0]

    def reconstruct(self):
        V = self.eigenvectors
        return (V * self.eigenvalues) @ V.T

    def apply_function(self, func):
        """Return ``V diag(func(eigenvalues)) V^T``."""
        V = self.eigenvectors
        return (V * func(self.eigenvalues)) @ V.T


def check_symmetric(A, rtol=SYMMETRY_RTOL):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    scale = np.max(np.abs(A)) if A.size else 0.0
    defect = np.max(np.abs(A - A.T)) if A.size else 0.0
    if defect > rtol * scale:
        raise ValueError(f"matrix is not symmetric (defect {defect:.3g})")
    return A


def _fix_signs(V, tol=1e-10):
    # first entry with magnitude above tol is made positive
    mask = np.abs(V) > tol
    first = np.argmax(mask, axis=0)
    signs = np.sign(V[first, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def eigh_symmetric(A):
    """Eigendecomposition of a symmetric matrix, eigenvalues descending.

    The input is symmetrized as ``(A + A.T) / 2`` before the LAPACK
    divide-and-conquer solver runs. Eigenvector signs are fixed so that the
    first non-negligible component of each column is positive.
    """
    A = check_symmetric(A)
    if A.shape[0] == 0:
        return SymmetricSpectrum(np.zeros(0), np.zeros((0, 0)))
    A = 0.5 * (A + A.T)
    w, V = scipy.linalg.eigh(A, driver="evd", check_finite=False)
    w = w[::-1].copy()
    V = _fix_signs(V[:, ::-1])
    return SymmetricSpectrum(w, np.ascontiguousarray(V))


def operator_norm(A):
    """Spectral norm of a symmetric matrix (largest absolute eigenvalue)."""
    A = check_symmetric(A)
    if A.shape[0] == 0:
        return 0.0
    w = scipy.linalg.eigh(0.5 * (A + A.T), eigvals_only=True, check_finite=False)
    return float(np.max(np.abs(w)))


def psd_power(A, gamma, clamp_tol=1e-12):
    """``A**gamma`` for a symmetric PSD matrix, computed spectrally.

    Eigenvalues in ``[-clamp_tol, 0)`` are treated as roundoff and clamped
    to zero; anything more negative is rejected.
    """
    spec = eigh_symmetric(A)
    w = spec.eigenvalues
    if w.size and w[-1] < -clamp_tol:
        raise ValueError(f"matrix is not PSD (smallest eigenvalue {w[-1]:.3g})")
    w = np.clip(w, 0.0, None)
    return (spec.eigenvectors * w**gamma) @ spec.eigenvectors.T


@dataclass(frozen=True)
class InequalityGap:
    lhs: float
    rhs: float

    @property
    def holds(self):
        return self.lhs <= self.rhs


def power_inequality_gap(A, B, gamma, r=None):
    """Compare ``||A^g - B^g||`` against the operator power-difference bound.

    For ``gamma >= 1`` (spectra in ``[0, 1)``) the bound is
    ``2 * gamma * ||A - B||``. For ``0 < gamma < 1`` the caller passes the
    lower spectral edge ``r`` (spectra in ``[r, 1)``) and the bound is
    ``gamma * r**(gamma - 1) * ||A - B||``.
    """
    A = check_symmetric(A)
    B = check_symmetric(B)
    if A.shape != B.shape:
        raise ValueError("A and B must have the same shape")
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    tol = 1e-12
    specs = [eigh_symmetric(M).eigenvalues for M in (A, B)]
    if gamma >= 1:
        for w in specs:
            if w.size and (w[-1] < -tol or w[0] >= 1.0):
                raise ValueError("spectrum outside [0, 1)")
        factor = 2.0 * gamma
    else:
        if r is None or not 0 < r < 1:
            raise ValueError("fractional powers need a lower spectral edge 0 < r < 1")
        for w in specs:
            if w.size and (w[-1] < r - tol or w[0] >= 1.0):
                raise ValueError(f"spectrum outside [{r}, 1)")
        factor = gamma * r ** (gamma - 1.0)
    lhs = operator_norm(psd_power(A, gamma) - psd_power(B, gamma))
    rhs = factor * operator_norm(A - B)
    return InequalityGap(lhs, rhs)
