"""Soft LOS/NLOS identification and its diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimError, FitError, InputError
from .records import Hypothesis, SoftDecision

LOG_2PI = math.log(2.0 * math.pi)


def _log(p: float) -> float:
    return math.log(p) if p > 0 else -math.inf


def _normalize(log_los, log_nlos):
    """Posterior p_los from unnormalized log weights, elementwise."""
    log_los = np.asarray(log_los, dtype=float)
    log_nlos = np.asarray(log_nlos, dtype=float)
    with np.errstate(invalid="ignore"):
        p = np.exp(log_los - np.logaddexp(log_los, log_nlos))
    return np.clip(p, 0.0, 1.0)


def _decision(p_los: float) -> SoftDecision:
    p = float(p_los)
    return SoftDecision(p, 1.0 - p)


@dataclass(frozen=True)
class RiseTimeClassifier:
    """Exponential rise-time likelihoods per hypothesis; rates in 1/ns."""

    lambda_los: float = 0.333
    lambda_nlos: float = 0.075
    prior_los: float = 0.5

    def __post_init__(self):
        if not (self.lambda_los > 0 and self.lambda_nlos > 0):
            raise InputError("decay rates must be positive")
        if not 0.0 <= self.prior_los <= 1.0:
            raise InputError("prior must be a probability")

    def p_los_many(self, rise_ns) -> np.ndarray:
        t = np.asarray(rise_ns, dtype=float)
        if np.any(t < 0):
            raise InputError("rise time must be non-negative")
        lo = math.log(self.lambda_los) - self.lambda_los * t + _log(self.prior_los)
        ln = math.log(self.lambda_nlos) - self.lambda_nlos * t + _log(1.0 - self.prior_los)
        return _normalize(lo, ln)

    def classify(self, rise_ns: float) -> SoftDecision:
        return _decision(self.p_los_many(rise_ns))

    @classmethod
    def fit(cls, rise_ns, is_nlos, prior_los: float = 0.5) -> "RiseTimeClassifier":
        """Maximum-likelihood exponential rates from labeled rise times."""
        t = np.asarray(rise_ns, dtype=float)
        lab = np.asarray(is_nlos, dtype=bool)
        if lab.all() or not lab.any():
            raise FitError("both LOS and NLOS samples are required")
        rates = []
        for sel in (~lab, lab):
            m = float(t[sel].mean())
            if not m > 0:
                raise FitError("mean rise time must be positive to fit an exponential rate")
            rates.append(1.0 / m)
        return cls(rates[0], rates[1], prior_los)

    def to_dict(self):
        return {"lambda_los": self.lambda_los, "lambda_nlos": self.lambda_nlos, "prior_los": self.prior_los}

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["lambda_los"]), float(d["lambda_nlos"]), float(d["prior_los"]))


def classify_rise_time(c: RiseTimeClassifier, rise_time_ns: float) -> SoftDecision:
    return c.classify(rise_time_ns)


@dataclass(frozen=True, eq=False)
class ProjectionClassifier:
    """Independent Gaussian class likelihoods on the first M' projections."""

    mu_los: np.ndarray
    sigma_los: np.ndarray
    mu_nlos: np.ndarray
    sigma_nlos: np.ndarray
    prior_los: float = 0.5

    def __post_init__(self):
        arrs = [np.atleast_1d(np.asarray(v, dtype=float)) for v in
                (self.mu_los, self.sigma_los, self.mu_nlos, self.sigma_nlos)]
        if len({a.shape for a in arrs}) != 1 or arrs[0].ndim != 1:
            raise DimError("class parameters must be 1-D arrays of equal length")
        if np.any(arrs[1] <= 0) or np.any(arrs[3] <= 0):
            raise InputError("class standard deviations must be positive")
        if not 0.0 <= self.prior_los <= 1.0:
            raise InputError("prior must be a probability")
        for name, a in zip(("mu_los", "sigma_los", "mu_nlos", "sigma_nlos"), arrs):
            object.__setattr__(self, name, a)

    @property
    def m_prime(self) -> int:
        return self.mu_los.size

    @staticmethod
    def _loglik(y, mu, sigma):
        z = (y - mu) / sigma
        return np.sum(-0.5 * z * z - np.log(sigma) - 0.5 * LOG_2PI, axis=-1)

    def p_los_many(self, y) -> np.ndarray:
        y = np.atleast_2d(np.asarray(y, dtype=float))
        if y.shape[1] < self.m_prime:
            raise DimError(f"need at least {self.m_prime} projections, got {y.shape[1]}")
        y = y[:, : self.m_prime]
        lo = self._loglik(y, self.mu_los, self.sigma_los) + _log(self.prior_los)
        ln = self._loglik(y, self.mu_nlos, self.sigma_nlos) + _log(1.0 - self.prior_los)
        return _normalize(lo, ln)

    def classify(self, y) -> SoftDecision:
        return _decision(self.p_los_many(np.asarray(y, dtype=float)[None, :])[0])

    def to_dict(self):
        return {
            "mu_los": self.mu_los.tolist(), "sigma_los": self.sigma_los.tolist(),
            "mu_nlos": self.mu_nlos.tolist(), "sigma_nlos": self.sigma_nlos.tolist(),
            "prior_los": self.prior_los,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(*(np.array(d[k], dtype=float) for k in ("mu_los", "sigma_los", "mu_nlos", "sigma_nlos")),
                   prior_los=float(d["prior_los"]))


def fit_projection_classifier(y_train, is_nlos, m_prime: int = 4, prior_los: float = 0.5) -> ProjectionClassifier:
    y = np.atleast_2d(np.asarray(y_train, dtype=float))
    lab = np.asarray(is_nlos, dtype=bool)
    if y.shape[0] != lab.size:
        raise DimError("projections and labels differ in length")
    if not 1 <= m_prime <= y.shape[1]:
        raise DimError(f"M' = {m_prime} exceeds the {y.shape[1]} available components")
    n_nlos = int(lab.sum())
    if n_nlos < 2 or lab.size - n_nlos < 2:
        raise FitError("each class needs at least two training samples")
    y = y[:, :m_prime]
    los, nlos = y[~lab], y[lab]
    return ProjectionClassifier(
        los.mean(axis=0), los.std(axis=0, ddof=1),
        nlos.mean(axis=0), nlos.std(axis=0, ddof=1),
        prior_los,
    )


def classify_projection(c: ProjectionClassifier, y) -> SoftDecision:
    return c.classify(y)


def overlap_metric(mu_l: float, sigma_l: float, mu_n: float, sigma_n: float) -> float:
    """sqrt(sigma_l * sigma_n) / |mu_l - mu_n|; +inf when the means coincide."""
    if not (sigma_l > 0 and sigma_n > 0):
        raise InputError("standard deviations must be positive")
    gap = abs(mu_l - mu_n)
    if gap == 0:
        return math.inf
    return math.sqrt(sigma_l * sigma_n) / gap


def hard_labels(p_los) -> np.ndarray:
    """Boolean NLOS decisions; p_los == 0.5 counts as LOS."""
    return ~(np.asarray(p_los, dtype=float) >= 0.5)


def misclassification_rate(decisions, labels) -> float:
    """Fraction of hard decisions that disagree with the labels.

    ``decisions`` may be SoftDecision objects or p_los values; ``labels`` may
    be Hypothesis values or booleans meaning NLOS.
    """
    decisions, labels = list(decisions), list(labels)
    if len(decisions) != len(labels):
        raise DimError("decisions and labels differ in length")
    if not decisions:
        raise InputError("no decisions to score")
    p = np.array([d.p_los if isinstance(d, SoftDecision) else float(d) for d in decisions])
    truth = np.array([lab is Hypothesis.NLOS if isinstance(lab, Hypothesis) else bool(lab) for lab in labels])
    return float(np.mean(hard_labels(p) != truth))
