"""Kernel evaluation, kernel-matrix assembly and precomputed-kernel files."""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse

KINDS = ("discrete", "gaussian", "linear", "precomputed")
PRECOMPUTED_SYMMETRY_TOL = 1e-8
SPLIT_NAMES = ("train", "validation", "test")


class KernelFileError(ValueError):
    """Malformed or inconsistent precomputed-kernel input."""


@dataclass(frozen=True)
class KernelSpec:
    """Which kernel to evaluate.

    ``discrete`` is the indicator kernel ``1{x == x'}`` on integer points.
    ``gaussian`` uses ``exp(-|x - x'|^2 / (2 bandwidth^2))``. ``precomputed``
    looks points up as row/column indices of ``matrix``.
    """

    kind: str
    bandwidth: float | None = None
    matrix: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "gaussian":
            if self.bandwidth is None or not self.bandwidth > 0:
                raise ValueError("gaussian kernel needs a positive bandwidth")
        if self.kind == "precomputed":
            if self.matrix is None:
                raise ValueError("precomputed kernel needs a matrix")
            M = np.asarray(self.matrix, dtype=float)
            M.setflags(write=False)
            object.__setattr__(self, "matrix", M)

    @property
    def kappa_sq(self):
        """Sup of ``K(x, x)`` over the domain, where the kind fixes it."""
        if self.kind in ("discrete", "gaussian"):
            return 1.0
        if self.kind == "precomputed":
            return float(np.max(np.diag(self.matrix)))
        raise ValueError("linear kernel has no domain-free bound; use kappa_sq_of(points)")

    def kappa_sq_of(self, X):
        if self.kind == "linear":
            X = _as_points(self, X)
            return float(np.max(np.sum(X * X, axis=1))) if len(X) else 0.0
        return self.kappa_sq


def _as_points(spec, X):
    if spec.kind in ("discrete", "precomputed"):
        X = np.asarray(X)
        if X.ndim == 2 and X.shape[1] == 1:
            X = X[:, 0]
        if X.ndim != 1:
            raise ValueError(f"{spec.kind} kernel expects a 1-D sequence of integer points")
        if X.size and not np.all(np.isfinite(X.astype(float))):
            raise ValueError("points must be finite")
        Xi = X.astype(np.int64)
        if X.size and np.any(Xi != X):
            raise ValueError(f"{spec.kind} kernel expects integer points")
        if spec.kind == "precomputed" and Xi.size:
            n = spec.matrix.shape[0]
            if Xi.min() < 0 or Xi.max() >= n:
                raise IndexError(f"precomputed kernel index out of range [0, {n})")
        return Xi
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ValueError("expected points of shape (n,) or (n, d)")
    if not np.all(np.isfinite(X)):
        raise ValueError("points must be finite")
    return X


def cross_kernel(spec, X_train, X_new):
    """Kernel values with rows indexed by ``X_new`` and columns by ``X_train``."""
    A = _as_points(spec, X_new)
    B = _as_points(spec, X_train)
    with np.errstate(over="ignore", invalid="ignore"):
        K = _kernel_values(spec, A, B)
    if not np.all(np.isfinite(K)):
        raise FloatingPointError("kernel evaluation produced non-finite values")
    return K


def _kernel_values(spec, A, B):
    if spec.kind == "discrete":
        K = (A[:, None] == B[None, :]).astype(float)
    elif spec.kind == "precomputed":
        K = spec.matrix[np.ix_(A, B)].copy()
    elif spec.kind == "linear":
        K = A @ B.T
    else:
        sq = (
            np.sum(A * A, axis=1)[:, None]
            + np.sum(B * B, axis=1)[None, :]
            - 2.0 * (A @ B.T)
        )
        np.maximum(sq, 0.0, out=sq)
        K = np.exp(-sq / (2.0 * spec.bandwidth**2))
    return K


def kernel_matrix(spec, X):
    """Symmetric kernel matrix ``K[i, j] = K(x_i, x_j)``."""
    K = cross_kernel(spec, X, X)
    if spec.kind == "gaussian":
        np.fill_diagonal(K, 1.0)
    return 0.5 * (K + K.T) if spec.kind in ("gaussian", "linear") else K


def discrete_indicator(X_rows, X_cols):
    """Sparse ``1{x_row == x_col}`` for the discrete kernel."""
    rows = np.asarray(X_rows, dtype=np.int64).ravel()
    cols = np.asarray(X_cols, dtype=np.int64).ravel()
    order = np.argsort(cols, kind="stable")
    sorted_cols = cols[order]
    lo = np.searchsorted(sorted_cols, rows, side="left")
    hi = np.searchsorted(sorted_cols, rows, side="right")
    counts = hi - lo
    r = np.repeat(np.arange(rows.size), counts)
    starts = np.cumsum(counts) - counts
    pos = np.repeat(lo - starts, counts) + np.arange(r.size)
    c = order[pos]
    data = np.ones(r.size)
    return scipy.sparse.csr_matrix((data, (r, c)), shape=(rows.size, cols.size))


# --- precomputed kernel files ------------------------------------------------


@dataclass(frozen=True)
class Splits:
    train: np.ndarray
    validation: np.ndarray
    test: np.ndarray

    def sizes(self):
        return {name: int(getattr(self, name).size) for name in SPLIT_NAMES}


def read_kernel_file(path):
    lines = [ln.strip() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("n="):
        raise KernelFileError(f"{path}: first line must be 'n=<int>'")
    try:
        n = int(lines[0][2:])
    except ValueError as exc:
        raise KernelFileError(f"{path}: bad size line {lines[0]!r}") from exc
    if len(lines) - 1 != n:
        raise KernelFileError(f"{path}: expected {n} rows, found {len(lines) - 1}")
    try:
        M = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]], dtype=float)
    except ValueError as exc:
        raise KernelFileError(f"{path}: non-numeric entry") from exc
    if M.shape != (n, n):
        raise KernelFileError(f"{path}: rows must each have {n} entries")
    if not np.all(np.isfinite(M)):
        raise KernelFileError(f"{path}: non-finite entry")
    scale = max(np.max(np.abs(M)), 1.0) if n else 1.0
    defect = np.max(np.abs(M - M.T)) if n else 0.0
    if defect > PRECOMPUTED_SYMMETRY_TOL * scale:
        raise KernelFileError(f"{path}: kernel matrix not symmetric (defect {defect:.3g})")
    return M


def write_kernel_file(path, M):
    M = np.asarray(M, dtype=float)
    rows = [",".join(repr(float(v)) for v in row) for row in M]
    Path(path).write_text(f"n={M.shape[0]}\n" + "\n".join(rows) + "\n")


def read_splits_file(path, n):
    found = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line:
            continue
        name, sep, rest = line.partition(":")
        name = name.strip()
        if not sep or name not in SPLIT_NAMES:
            raise KernelFileError(f"{path}: unexpected line {line!r}")
        if name in found:
            raise KernelFileError(f"{path}: split {name!r} given twice")
        rest = rest.strip()
        try:
            idx = [int(v) for v in rest.split(",")] if rest else []
        except ValueError as exc:
            raise KernelFileError(f"{path}: bad index in split {name!r}") from exc
        found[name] = np.array(idx, dtype=np.int64)
    missing = [s for s in SPLIT_NAMES if s not in found]
    if missing:
        raise KernelFileError(f"{path}: missing splits {missing}")
    allidx = np.concatenate([found[s] for s in SPLIT_NAMES])
    if allidx.size and (allidx.min() < 0 or allidx.max() >= n):
        raise KernelFileError(f"{path}: index out of range [0, {n})")
    if np.unique(allidx).size != allidx.size:
        raise KernelFileError("overlapping splits")
    return Splits(**found)


def write_splits_file(path, splits):
    text = "".join(
        f"{name}:{','.join(str(int(i)) for i in getattr(splits, name))}\n" for name in SPLIT_NAMES
    )
    Path(path).write_text(text)


def read_labels_file(path, n=None):
    try:
        y = np.array(
            [float(ln) for ln in Path(path).read_text().splitlines() if ln.strip()], dtype=float
        )
    except ValueError as exc:
        raise KernelFileError(f"{path}: non-numeric label") from exc
    if n is not None and y.size != n:
        raise KernelFileError(f"{path}: expected {n} labels, found {y.size}")
    if not np.all(np.isfinite(y)):
        raise KernelFileError(f"{path}: non-finite label")
    return y


def load_precomputed(matrix_path, splits_path):
    """Read a kernel file and its split file; returns ``(KernelSpec, Splits)``."""
    M = read_kernel_file(matrix_path)
    splits = read_splits_file(splits_path, M.shape[0])
    return KernelSpec("precomputed", matrix=M), splits
