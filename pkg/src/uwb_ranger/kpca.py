"""Kernel PCA ranging.

Training points are projected onto the leading eigenvectors of the centered
polynomial Gram matrix. Each projection is tied to distance by a
least-squares line, and a test point's range is the precision-weighted
combination of the per-component inversions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimError, EstimateError, FitError, InputError, RankError
from .kernels import (
    EigenPairs,
    PolyKernel,
    RANK_RTOL,
    center_gram,
    center_test_vector,
    kernel_from_dict,
    record,
    sym_eig,
)
from .records import RangeEstimate

SLOPE_RTOL = 1e-8


@dataclass(frozen=True, eq=False)
class Readouts:
    """Per-component linear model y_i = b1_i * d + b0_i + noise(sigma_y_i)."""

    b1: np.ndarray
    b0: np.ndarray
    sigma_y: np.ndarray


def fit_readouts(y: np.ndarray, d: np.ndarray) -> Readouts:
    """Ordinary least squares of every projection column against distance."""
    y = np.atleast_2d(np.asarray(y, dtype=float))
    d = np.asarray(d, dtype=float)
    n = d.size
    dc = d - d.mean()
    sdd = float(dc @ dc)
    if not sdd > 0:
        raise FitError("all training distances are equal; the read-out slope is undefined")
    yc = y - y.mean(axis=0)
    b1 = (dc @ yc) / sdd
    b0 = y.mean(axis=0) - b1 * d.mean()
    resid = y - (np.outer(d, b1) + b0)
    # Two fitted parameters per component.
    dof = max(n - 2, 1)
    sigma = np.sqrt(np.sum(resid ** 2, axis=0) / dof)
    # An exact fit would give infinite precision; floor at rounding level.
    floor = 1e-12 * np.maximum(np.abs(b1) * np.sqrt(sdd / n), np.finfo(float).tiny)
    return Readouts(b1, b0, np.maximum(sigma, floor))


def combine_readouts(y, b1, b0, sigma_y, slope_tol: float = 0.0) -> tuple[float, float]:
    """Precision-weighted inversion of the per-component lines.

    Components with |b1| <= slope_tol carry no range information and are
    skipped. Returns (estimate, variance).
    """
    y, b1, b0, s = (np.asarray(v, dtype=float) for v in (y, b1, b0, sigma_y))
    use = np.abs(b1) > slope_tol
    if not use.any():
        raise EstimateError("no component has a usable read-out slope")
    prec = b1[use] ** 2 / s[use] ** 2
    var = 1.0 / prec.sum()
    est = var * np.sum(b1[use] * (y[use] - b0[use]) / s[use] ** 2)
    return float(est), float(var)


@dataclass(eq=False)
class KpcaModel:
    kernel: PolyKernel
    train_inputs: np.ndarray
    col_means: np.ndarray
    grand_mean: float
    eigenvalues: np.ndarray  # retained Gram eigenvalues (lambda_n * N), descending
    axes: np.ndarray  # (N, M) eigenvectors scaled by 1/sqrt(eigenvalue)
    readouts: Readouts | None = None
    slope_tol: float = 0.0
    train_projections: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_components(self) -> int:
        return self.axes.shape[1]

    @property
    def n_train(self) -> int:
        return self.train_inputs.shape[0]

    def project_many(self, a, n_components: int | None = None) -> np.ndarray:
        m = self.n_components if n_components is None else int(n_components)
        if not 1 <= m <= self.n_components:
            raise DimError(f"requested {m} components, model retains {self.n_components}")
        a = np.atleast_2d(np.asarray(a, dtype=float))
        if a.shape[1] != self.train_inputs.shape[1]:
            raise DimError(f"expected {self.train_inputs.shape[1]} features, got {a.shape[1]}")
        k = self.kernel.cross(a, self.train_inputs)  # N kernel evaluations per query
        kc = center_test_vector(k, self.col_means, self.grand_mean)
        n = self.n_train
        record(flops=a.shape[0] * (n + m * n))
        return kc @ self.axes[:, :m]

    def project(self, a, n_components: int | None = None) -> np.ndarray:
        return self.project_many(np.asarray(a, dtype=float)[None, :], n_components)[0]

    def estimate_many(self, a) -> tuple[np.ndarray, np.ndarray]:
        if self.readouts is None:
            raise EstimateError("model was fitted without distances")
        y = self.project_many(a)
        r = self.readouts
        use = np.abs(r.b1) > self.slope_tol
        if not use.any():
            raise EstimateError("no component has a usable read-out slope")
        b1, b0, s2 = r.b1[use], r.b0[use], r.sigma_y[use] ** 2
        var = 1.0 / np.sum(b1 ** 2 / s2)
        est = var * ((y[:, use] - b0) @ (b1 / s2))
        record(flops=y.shape[0] * 2 * int(use.sum()))
        return est, np.full(est.shape, var)

    def to_dict(self) -> dict:
        out = {
            "kernel": self.kernel.to_dict(),
            "train_inputs": self.train_inputs.tolist(),
            "centering": {"col_means": self.col_means.tolist(), "grand_mean": self.grand_mean},
            "eigenvalues": self.eigenvalues.tolist(),
            "axes": self.axes.tolist(),
            "slope_tol": self.slope_tol,
        }
        if self.readouts is not None:
            out["readouts"] = {
                "b1": self.readouts.b1.tolist(),
                "b0": self.readouts.b0.tolist(),
                "sigma_y": self.readouts.sigma_y.tolist(),
            }
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "KpcaModel":
        r = d.get("readouts")
        return cls(
            kernel=kernel_from_dict(d["kernel"]),
            train_inputs=np.array(d["train_inputs"], dtype=float),
            col_means=np.array(d["centering"]["col_means"], dtype=float),
            grand_mean=float(d["centering"]["grand_mean"]),
            eigenvalues=np.array(d["eigenvalues"], dtype=float),
            axes=np.array(d["axes"], dtype=float),
            readouts=None if r is None else Readouts(*(np.array(r[k], dtype=float) for k in ("b1", "b0", "sigma_y"))),
            slope_tol=float(d.get("slope_tol", 0.0)),
        )


def fit_kpca(a_train, d_train=None, kernel: PolyKernel | None = None, n_components: int = 60,
             clip_to_rank: bool = False) -> KpcaModel:
    """Fit kernel PCA on ``a_train`` and, if distances are given, the read-outs.

    With ``clip_to_rank`` the component count is reduced to the numerical
    rank instead of raising :class:`RankError`.
    """
    kernel = kernel or PolyKernel(3)
    a = np.atleast_2d(np.asarray(a_train, dtype=float))
    n = a.shape[0]
    if n < 2:
        raise InputError("kernel PCA needs at least two training points")
    if n_components < 1:
        raise InputError("n_components must be at least 1")
    k = kernel.gram(a)
    col_means, grand = k.mean(axis=0), float(k.mean())
    eig: EigenPairs = sym_eig(center_gram(k))
    rank = eig.rank(RANK_RTOL)
    m = int(n_components)
    if m > rank:
        if not clip_to_rank or rank == 0:
            raise RankError(f"requested {m} components but the centered Gram matrix has rank {rank}")
        m = rank
    lam = eig.eigenvalues[:m]
    axes = eig.eigenvectors[:, :m] / np.sqrt(lam)
    # Training projections: centered Gram times axes = v_i * sqrt(lambda_i).
    y_train = eig.eigenvectors[:, :m] * np.sqrt(lam)
    model = KpcaModel(kernel, a, col_means, grand, lam.copy(), axes, train_projections=y_train)
    if d_train is not None:
        d = np.asarray(d_train, dtype=float)
        if d.size != n:
            raise DimError(f"{n} inputs but {d.size} distances")
        model.readouts = fit_readouts(y_train, d)
        model.slope_tol = SLOPE_RTOL * float(np.std(d))
    return model


def project(model: KpcaModel, a) -> np.ndarray:
    return model.project(a)


def estimate_kpca(model: KpcaModel, a) -> RangeEstimate:
    est, var = model.estimate_many(np.asarray(a, dtype=float)[None, :])
    return RangeEstimate(float(est[0]), float(var[0]), 1.0, "kpca")
