"""Kernel functions, Gram assembly, Gram centering and symmetric eigendecomposition.

Pairwise kernel assembly runs in the compiled ``_kernels_core`` extension when
it is importable and falls back to the numpy implementation otherwise. Set
``UWB_RANGER_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import contextlib
import contextvars
import os
from dataclasses import dataclass

import numpy as np

from .errors import DimError, EigError, InputError

if os.environ.get("UWB_RANGER_PURE_PYTHON", "") not in ("", "0"):
    from . import _kernels_py as _backend
    BACKEND = "python"
else:
    try:
        from . import _kernels_core as _backend
        BACKEND = "compiled"
    except ImportError:  # pragma: no cover - depends on the build
        from . import _kernels_py as _backend
        BACKEND = "python"

RANK_RTOL = 1e-10


# -- operation counters ------------------------------------------------------

@dataclass
class OpCounter:
    """Tallies kernel evaluations and multiply-adds inside a :func:`count_ops` block."""

    kernel_evals: int = 0
    flops: int = 0

    def add(self, kernel_evals: int = 0, flops: int = 0) -> None:
        self.kernel_evals += int(kernel_evals)
        self.flops += int(flops)


_counter: contextvars.ContextVar[OpCounter | None] = contextvars.ContextVar("uwb_op_counter", default=None)


@contextlib.contextmanager
def count_ops():
    counter = OpCounter()
    token = _counter.set(counter)
    try:
        yield counter
    finally:
        _counter.reset(token)


def record(kernel_evals: int = 0, flops: int = 0) -> None:
    c = _counter.get()
    if c is not None:
        c.add(kernel_evals, flops)


# -- kernels -----------------------------------------------------------------

def _as_points(x) -> np.ndarray:
    try:
        arr = np.asarray(x, dtype=float)
    except ValueError as exc:
        raise DimError("ragged point set") from exc
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise DimError("points must be a 2-D array (n_points, n_features)")
    return np.ascontiguousarray(arr)


def _check_pair(x, y):
    if x.shape[1] != y.shape[1]:
        raise DimError(f"dimension mismatch: {x.shape[1]} vs {y.shape[1]}")


class Kernel:
    """Common interface: ``cross(X, Y)``, ``gram(X)`` and ``diag(X)``."""

    def __call__(self, a, b) -> float:
        a, b = np.asarray(a, float), np.asarray(b, float)
        if a.shape != b.shape or a.ndim != 1:
            raise DimError(f"dimension mismatch: {a.shape} vs {b.shape}")
        return float(self.cross(a[None, :], b[None, :])[0, 0])

    def cross(self, x, y) -> np.ndarray:
        x, y = _as_points(x), _as_points(y)
        _check_pair(x, y)
        record(kernel_evals=x.shape[0] * y.shape[0])
        return self._cross(x, y)

    def gram(self, x) -> np.ndarray:
        x = _as_points(x)
        n = x.shape[0]
        if n == 0:
            raise InputError("gram needs at least one point")
        record(kernel_evals=n * (n + 1) // 2)
        return self._gram(x)

    def diag(self, x) -> np.ndarray:
        x = _as_points(x)
        record(kernel_evals=x.shape[0])
        return self._diag(x)


@dataclass(frozen=True)
class SqExpLinKernel(Kernel):
    """theta0 * exp(-theta1 |a - b|^2) + theta2 * a.b"""

    theta0: float
    theta1: float
    theta2: float

    def __post_init__(self):
        t = np.array([self.theta0, self.theta1, self.theta2], dtype=float)
        if not np.all(np.isfinite(t)) or np.any(t < 0):
            raise InputError(f"kernel hyperparameters must be finite and non-negative, got {t}")

    @property
    def theta(self) -> np.ndarray:
        return np.array([self.theta0, self.theta1, self.theta2])

    def _cross(self, x, y):
        return _backend.sqexp_lin(x, y, self.theta0, self.theta1, self.theta2)

    def _gram(self, x):
        return _backend.sqexp_lin_sym(x, self.theta0, self.theta1, self.theta2)

    def _diag(self, x):
        return self.theta0 + self.theta2 * np.einsum("ij,ij->i", x, x)

    def to_dict(self):
        return {"theta0": self.theta0, "theta1": self.theta1, "theta2": self.theta2}


@dataclass(frozen=True)
class PolyKernel(Kernel):
    """(a.b + 1)^c"""

    degree: int = 3

    def __post_init__(self):
        if int(self.degree) != self.degree or self.degree < 1:
            raise InputError("polynomial degree must be a positive integer")

    offset = 1.0

    def _cross(self, x, y):
        return _backend.poly(x, y, int(self.degree), self.offset)

    def _gram(self, x):
        return _backend.poly_sym(x, int(self.degree), self.offset)

    def _diag(self, x):
        return (np.einsum("ij,ij->i", x, x) + self.offset) ** int(self.degree)

    def to_dict(self):
        return {"degree": int(self.degree)}


@dataclass(frozen=True)
class LinearKernel(PolyKernel):
    """Plain a.b; kernel PCA with it is ordinary PCA."""

    degree: int = 1
    offset = 0.0

    def to_dict(self):
        return {"degree": 1, "linear": True}


def eval_sqexp_lin(k: SqExpLinKernel, a, b) -> float:
    return k(a, b)


def eval_poly(k: PolyKernel, a, b) -> float:
    return k(a, b)


def kernel_from_dict(d: dict) -> Kernel:
    if "theta0" in d:
        return SqExpLinKernel(float(d["theta0"]), float(d["theta1"]), float(d["theta2"]))
    if d.get("linear"):
        return LinearKernel()
    return PolyKernel(int(d["degree"]))


def gram(kernel: Kernel, points) -> np.ndarray:
    return kernel.gram(points)


def sq_distances(x, y=None) -> np.ndarray:
    x = _as_points(x)
    if y is None:
        return _backend.sqdist_sym(x)
    y = _as_points(y)
    _check_pair(x, y)
    return _backend.sqdist(x, y)


def is_psd(k: np.ndarray, rtol: float = 1e-8) -> bool:
    w = np.linalg.eigvalsh(0.5 * (k + k.T))
    return bool(w[0] >= -rtol * max(w[-1], 0.0))


# -- centering ---------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CenteringStats:
    col_means: np.ndarray
    grand_mean: float


def centering_stats(k: np.ndarray) -> CenteringStats:
    return CenteringStats(k.mean(axis=0), float(k.mean()))


def center_gram(k: np.ndarray) -> np.ndarray:
    """Double-centre a kernel matrix: K - 1K - K1 + 1K1 with 1 = ones/N."""
    k = np.asarray(k, dtype=float)
    if k.ndim != 2 or k.shape[0] != k.shape[1]:
        raise DimError("center_gram needs a square matrix")
    col = k.mean(axis=0)
    row = k.mean(axis=1)
    return k - col[None, :] - row[:, None] + k.mean()


def center_test_vector(k_test, col_means, grand_mean: float) -> np.ndarray:
    """Centre test kernel vectors (one per row) against training Gram statistics."""
    k_test = np.asarray(k_test, dtype=float)
    col_means = np.asarray(col_means, dtype=float)
    if k_test.shape[-1] != col_means.size:
        raise DimError(f"test kernel vector has length {k_test.shape[-1]}, expected {col_means.size}")
    return k_test - k_test.mean(axis=-1, keepdims=True) - col_means + grand_mean


# -- eigendecomposition ------------------------------------------------------

@dataclass(frozen=True, eq=False)
class EigenPairs:
    eigenvalues: np.ndarray  # descending
    eigenvectors: np.ndarray  # columns

    def rank(self, rtol: float = RANK_RTOL) -> int:
        top = self.eigenvalues[0] if self.eigenvalues.size else 0.0
        if top <= 0:
            return 0
        return int(np.count_nonzero(self.eigenvalues > rtol * top))


def sym_eig(k: np.ndarray) -> EigenPairs:
    """Full spectrum, eigenvalues descending, each vector's largest-|.| entry positive."""
    k = np.asarray(k, dtype=float)
    if k.ndim != 2 or k.shape[0] != k.shape[1]:
        raise DimError("sym_eig needs a square matrix")
    try:
        w, v = np.linalg.eigh(k)
    except np.linalg.LinAlgError as exc:
        raise EigError(str(exc)) from exc
    w = w[::-1].copy()
    v = v[:, ::-1].copy()
    pivot = np.argmax(np.abs(v), axis=0)
    signs = np.sign(v[pivot, np.arange(v.shape[1])])
    signs[signs == 0] = 1.0
    v *= signs
    return EigenPairs(w, v)
