"""Gaussian process regression of range on standardized channel features.

Zero prior mean, squared-exponential plus linear covariance, Gaussian noise.
Hyperparameters are fitted by maximizing the log marginal likelihood with
L-BFGS-B in log-parameter space using the analytic gradient.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular
from scipy.optimize import minimize

from .errors import DimError, FitError, InputError, NumericalError
from .kernels import SqExpLinKernel, record, sq_distances

log = logging.getLogger(__name__)

LOG_2PI = math.log(2.0 * math.pi)
THETA_BOUNDS = (1e-6, 1e6)
SIGMA_BOUNDS = (1e-3, 1e2)


@dataclass
class OptConfig:
    restarts: int = 5
    seed: int = 0
    # Bound on the projected log-space gradient norm at the returned optimum.
    tol: float = 1e-2
    max_iter: int = 500
    # Restarts run on a random subsample of this size when N is larger; the
    # best restart is then refined on the full training set.
    search_subsample: int | None = 400
    theta_bounds: tuple[float, float] = THETA_BOUNDS
    sigma_bounds: tuple[float, float] = SIGMA_BOUNDS


def cholesky_jittered(c: np.ndarray) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of ``c``, adding diagonal jitter only if needed.

    Jitter starts at 1e-10 * trace/N and grows tenfold up to 1e-4 * trace/N.
    Returns the factor and the jitter actually added.
    """
    try:
        return cholesky(c, lower=True, check_finite=False), 0.0
    except LinAlgError:
        pass
    n = c.shape[0]
    scale = max(float(np.trace(c)) / n, np.finfo(float).tiny)
    jitter = 1e-10 * scale
    while jitter <= 1e-4 * scale * (1 + 1e-9):
        try:
            return cholesky(c + jitter * np.eye(n), lower=True, check_finite=False), jitter
        except LinAlgError:
            jitter *= 10.0
    raise NumericalError("covariance matrix is not positive definite even after jitter")


def _check_data(a, d):
    a = np.atleast_2d(np.asarray(a, dtype=float))
    d = np.asarray(d, dtype=float).ravel()
    if a.shape[0] != d.size:
        raise DimError(f"{a.shape[0]} inputs but {d.size} targets")
    if d.size == 0:
        raise InputError("empty training set")
    return a, d


def _check_hyper(theta, sigma):
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (3,) or np.any(theta < 0) or not np.all(np.isfinite(theta)):
        raise InputError(f"theta must be three non-negative finite values, got {theta}")
    if not sigma > 0:
        raise InputError("sigma_omega must be positive")
    return theta, float(sigma)


class _Terms:
    """Covariance pieces reused between the likelihood and its gradient."""

    def __init__(self, theta, sigma, a, d, dist=None, lin=None):
        self.theta, self.sigma = theta, sigma
        self.a, self.d = a, d
        self.dist = sq_distances(a) if dist is None else dist
        self.lin = a @ a.T if lin is None else lin
        self.expo = np.exp(-theta[1] * self.dist)
        c = theta[0] * self.expo + theta[2] * self.lin
        c[np.diag_indices_from(c)] += sigma ** 2
        self.chol, self.jitter = cholesky_jittered(c)
        self.alpha = cho_solve((self.chol, True), d, check_finite=False)

    def lml(self) -> float:
        n = self.d.size
        return float(
            -0.5 * self.d @ self.alpha
            - np.log(np.diag(self.chol)).sum()
            - 0.5 * n * LOG_2PI
        )

    def grad(self) -> np.ndarray:
        n = self.d.size
        c_inv = cho_solve((self.chol, True), np.eye(n), check_finite=False)
        w = np.outer(self.alpha, self.alpha) - c_inv
        t0, t1, _ = self.theta
        return 0.5 * np.array([
            np.sum(w * self.expo),
            np.sum(w * (-t0 * self.dist * self.expo)),
            np.sum(w * self.lin),
            2.0 * self.sigma * np.trace(w),
        ])


def log_marginal_likelihood(theta, sigma_omega, a_train, d_train) -> float:
    """log N(d; 0, K(theta) + sigma^2 I)."""
    a, d = _check_data(a_train, d_train)
    theta, sigma = _check_hyper(theta, sigma_omega)
    return _Terms(theta, sigma, a, d).lml()


def lml_gradient(theta, sigma_omega, a_train, d_train) -> np.ndarray:
    """Analytic gradient w.r.t. (theta0, theta1, theta2, sigma_omega)."""
    a, d = _check_data(a_train, d_train)
    theta, sigma = _check_hyper(theta, sigma_omega)
    return _Terms(theta, sigma, a, d).grad()


# -- fitting -----------------------------------------------------------------

def _bounds(cfg: OptConfig):
    lo_t, hi_t = np.log(cfg.theta_bounds)
    lo_s, hi_s = np.log(cfg.sigma_bounds)
    return [(lo_t, hi_t)] * 3 + [(lo_s, hi_s)]


def _projected_norm(u, g, bounds) -> float:
    """Norm of the ascent gradient after zeroing components blocked by active bounds."""
    g = g.copy()
    for i, (lo, hi) in enumerate(bounds):
        if (u[i] <= lo + 1e-9 and g[i] < 0) or (u[i] >= hi - 1e-9 and g[i] > 0):
            g[i] = 0.0
    return float(np.linalg.norm(g))


def _objective(a, d, dist, lin):
    def f(u):
        psi = np.exp(u)
        try:
            terms = _Terms(psi[:3], psi[3], a, d, dist, lin)
            val, g = terms.lml(), terms.grad()
        except NumericalError:
            return 1e300, np.zeros(4)
        # Chain rule for the log parameterization.
        return -val, -(g * psi)
    return f


def _initial_points(d, k_dim, cfg: OptConfig, rng: np.random.Generator):
    m2 = float(np.mean(d ** 2)) or 1.0
    sd = float(np.std(d)) or 1.0
    starts = [np.array([m2, 1.0 / (2.0 * k_dim), 1.0, 0.1 * sd])]
    for _ in range(max(cfg.restarts, 1) - 1):
        starts.append(np.array([
            m2 * 10 ** rng.uniform(-1, 1),
            10 ** rng.uniform(-3, 0),
            10 ** rng.uniform(-3, 1),
            sd * 10 ** rng.uniform(-2, 0),
        ]))
    lo = np.array([cfg.theta_bounds[0]] * 3 + [cfg.sigma_bounds[0]])
    hi = np.array([cfg.theta_bounds[1]] * 3 + [cfg.sigma_bounds[1]])
    return [np.log(np.clip(s, lo, hi)) for s in starts]


def _run(f, u0, bounds, cfg):
    res = minimize(
        f, u0, jac=True, method="L-BFGS-B", bounds=bounds,
        options={"maxiter": cfg.max_iter, "gtol": cfg.tol * 1e-2, "ftol": 1e-15},
    )
    return res


def fit_gpr(a_train, d_train, opt_config: OptConfig | None = None) -> "GprModel":
    cfg = opt_config or OptConfig()
    a, d = _check_data(a_train, d_train)
    if d.size < 2:
        raise InputError("fit_gpr needs at least two training samples")
    rng = np.random.default_rng(cfg.seed)
    bounds = _bounds(cfg)

    if cfg.search_subsample and d.size > cfg.search_subsample:
        idx = np.sort(rng.choice(d.size, cfg.search_subsample, replace=False))
        a_s, d_s = a[idx], d[idx]
    else:
        a_s, d_s = a, d
    f_s = _objective(a_s, d_s, sq_distances(a_s), a_s @ a_s.T)

    found = []
    for u0 in _initial_points(d_s, a.shape[1], cfg, rng):
        try:
            res = _run(f_s, u0, bounds, cfg)
        except (NumericalError, LinAlgError, ValueError) as exc:
            log.debug("GPR restart failed: %s", exc)
            continue
        if np.isfinite(res.fun) and res.fun < 1e300:
            found.append(res.x)
    if not found:
        raise FitError("all GPR restarts failed")

    dist, lin = sq_distances(a), a @ a.T
    f_full = _objective(a, d, dist, lin)
    # Subsample optima are ranked by the full-data likelihood before refining.
    u = min(found, key=lambda x: f_full(x)[0])
    if a_s is not a:
        res = _run(f_full, u, bounds, cfg)
        if np.isfinite(res.fun) and res.fun < 1e300:
            u = res.x
    val, g = f_full(u)
    if val >= 1e300:
        raise FitError("GPR covariance is singular at the fitted hyperparameters")
    grad_norm = _projected_norm(u, -g, bounds)
    if grad_norm >= cfg.tol:
        log.warning("GPR fit stopped with projected gradient norm %.3g (tol %.3g)", grad_norm, cfg.tol)
    psi = np.exp(u)
    model = GprModel(SqExpLinKernel(*map(float, psi[:3])), float(psi[3]), a, d)
    model.fit_info = {"lml": -float(val), "grad_norm": grad_norm, "converged": grad_norm < cfg.tol}
    return model


# -- model & prediction --------------------------------------------------------

@dataclass(frozen=True)
class GprPrediction:
    mean: float
    variance: float


@dataclass(eq=False)
class GprModel:
    kernel: SqExpLinKernel
    sigma_omega: float
    train_inputs: np.ndarray
    train_targets: np.ndarray
    chol_factor: np.ndarray = field(init=False, repr=False)
    alpha_weights: np.ndarray = field(init=False, repr=False)
    jitter: float = field(init=False, default=0.0)
    fit_info: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.train_inputs, self.train_targets = _check_data(self.train_inputs, self.train_targets)
        _check_hyper(self.kernel.theta, self.sigma_omega)
        c = self.kernel.gram(self.train_inputs)
        c[np.diag_indices_from(c)] += self.sigma_omega ** 2
        self.chol_factor, self.jitter = cholesky_jittered(c)
        self.alpha_weights = cho_solve((self.chol_factor, True), self.train_targets, check_finite=False)

    @property
    def n_train(self) -> int:
        return self.train_targets.size

    def predict_many(self, a) -> tuple[np.ndarray, np.ndarray]:
        """Posterior means and variances for each row of ``a``."""
        a = np.atleast_2d(np.asarray(a, dtype=float))
        n = self.n_train
        k = self.kernel.cross(a, self.train_inputs)  # n kernel evaluations per query
        mean = k @ self.alpha_weights
        v = solve_triangular(self.chol_factor, k.T, lower=True, check_finite=False)
        prior = self.sigma_omega ** 2 + self.kernel._diag(a)
        var = prior - np.einsum("ij,ij->j", v, v)
        # Tiny positive floor guards against cancellation for exact interpolation.
        var = np.maximum(var, np.finfo(float).eps * prior)
        record(flops=a.shape[0] * (n + n * (n + 1) // 2 + n))
        return mean, var

    def predict(self, a) -> GprPrediction:
        a = np.asarray(a, dtype=float)
        if a.ndim != 1 or a.size != self.train_inputs.shape[1]:
            raise DimError(f"expected a {self.train_inputs.shape[1]}-vector")
        m, v = self.predict_many(a[None, :])
        return GprPrediction(float(m[0]), float(v[0]))

    def to_dict(self) -> dict:
        return {
            "kernel": self.kernel.to_dict(),
            "sigma_omega": self.sigma_omega,
            "train_inputs": self.train_inputs.tolist(),
            "train_targets": self.train_targets.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GprModel":
        k = d["kernel"]
        return cls(
            SqExpLinKernel(float(k["theta0"]), float(k["theta1"]), float(k["theta2"])),
            float(d["sigma_omega"]),
            np.array(d["train_inputs"], dtype=float),
            np.array(d["train_targets"], dtype=float),
        )


def predict_gpr(model: GprModel, a) -> GprPrediction:
    return model.predict(a)
