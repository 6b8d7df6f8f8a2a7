"""Range estimators and the serializable model envelope that wraps them.

All estimators consume rows of the eight channel parameters in model units
(delays in ns, powers in dBm) and return per-row mean, variance and LOS
probability.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, FitError, InputError
from .features import FEATURE_SUBSETS, IDX_RISE, IDX_TOA, IDX_XED, FeatureScaler, FeatureTable, fit_scaler
from .gpr import GprModel, OptConfig, fit_gpr
from .kernels import PolyKernel, record
from .kpca import KpcaModel, fit_kpca
from .nlos import ProjectionClassifier, RiseTimeClassifier, fit_projection_classifier
from .records import RangeEstimate

SPEED_OF_LIGHT = 299_792_458.0
C_M_PER_NS = SPEED_OF_LIGHT * 1e-9

METHODS = ("toa-only", "toa-mitig", "gpr", "kpca", "kpca-plus", "kpca-plus-gpr")
FORMAT_VERSION = 1

# Fitted values for the reference tunnel environment.
TABLE2 = {
    "sigma_l": 0.16,
    "sigma_n": 1.61,
    "lambda_l": 0.333,
    "lambda_n": 0.075,
    "poly": (0.00087, -0.2, 11.72),
    "theta": (64.6, 0.57, 1.59),
    "sigma_omega": 0.5,
}


def mixture(p_los, mean_los, var_los, mean_nlos, var_nlos):
    """Mean and variance of a two-branch Gaussian mixture.

    The variance includes each branch's squared deviation from the mixture
    mean, so it never falls below the weighted branch variances.
    """
    p = np.asarray(p_los, dtype=float)
    q = 1.0 - p
    mean = p * mean_los + q * mean_nlos
    var = p * ((mean_los - mean) ** 2 + var_los) + q * ((mean_nlos - mean) ** 2 + var_nlos)
    return mean, var


def estimate_toa_only(toa_s: float, sigma_l: float | None = None) -> RangeEstimate:
    if toa_s < 0:
        raise InputError("TOA must be non-negative")
    var = 0.0 if sigma_l is None else sigma_l ** 2
    return RangeEstimate(SPEED_OF_LIGHT * toa_s, var, 1.0, "toa-only")


# -- TOA with soft NLOS mitigation -------------------------------------------------

@dataclass(frozen=True)
class MitigationModel:
    mu_l: float = 0.0
    sigma_l: float = TABLE2["sigma_l"]
    sigma_n: float = TABLE2["sigma_n"]
    poly: tuple[float, float, float] = TABLE2["poly"]  # (p2, p1, p0), ns -> m
    classifier: RiseTimeClassifier = field(default_factory=RiseTimeClassifier)

    def __post_init__(self):
        if not (self.sigma_l > 0 and self.sigma_n > 0):
            raise InputError("sigma_l and sigma_n must be positive")

    def nlos_bias(self, xed_ns):
        p2, p1, p0 = self.poly
        x = np.asarray(xed_ns, dtype=float)
        return p2 * x * x + p1 * x + p0

    def estimate_many(self, toa_ns, rise_ns, xed_ns, p_los=None):
        ctau = C_M_PER_NS * np.asarray(toa_ns, dtype=float)
        if p_los is None:
            p_los = self.classifier.p_los_many(rise_ns)
        mean, var = mixture(p_los, ctau - self.mu_l, self.sigma_l ** 2,
                            ctau - self.nlos_bias(xed_ns), self.sigma_n ** 2)
        return mean, var, np.broadcast_to(np.asarray(p_los, dtype=float), np.shape(mean))

    def to_dict(self):
        return {"mu_l": self.mu_l, "sigma_l": self.sigma_l, "sigma_n": self.sigma_n,
                "poly": list(self.poly), "classifier": self.classifier.to_dict()}

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["mu_l"]), float(d["sigma_l"]), float(d["sigma_n"]),
                   tuple(float(v) for v in d["poly"]), RiseTimeClassifier.from_dict(d["classifier"]))


def fit_mitigation(toa_ns, rise_ns, xed_ns, distance, is_nlos, mu_l: float = 0.0,
                   prior_los: float = 0.5) -> MitigationModel:
    """Fit the LOS spread, the NLOS bias polynomial and the rise-time rates."""
    ctau = C_M_PER_NS * np.asarray(toa_ns, dtype=float)
    d = np.asarray(distance, dtype=float)
    lab = np.asarray(is_nlos, dtype=bool)
    xed = np.asarray(xed_ns, dtype=float)
    if (~lab).sum() < 2 or lab.sum() < 4:
        raise FitError("mitigation fit needs >= 2 LOS and >= 4 NLOS samples")
    sigma_l = float(np.std(ctau[~lab] - d[~lab] - mu_l, ddof=1))
    bias = ctau[lab] - d[lab]
    poly = np.polyfit(xed[lab], bias, 2)
    resid = bias - np.polyval(poly, xed[lab])
    sigma_n = float(np.sqrt(np.sum(resid ** 2) / (lab.sum() - 3)))
    clf = RiseTimeClassifier.fit(rise_ns, lab, prior_los)
    return MitigationModel(mu_l, sigma_l, sigma_n, tuple(float(p) for p in poly), clf)


def estimate_toa_mitigated(m: MitigationModel, toa_s: float, rise_time_ns: float,
                           max_excess_delay_ns: float, p_los: float | None = None) -> RangeEstimate:
    if min(toa_s, rise_time_ns, max_excess_delay_ns) < 0:
        raise InputError("inputs must be non-negative")
    mean, var, p = m.estimate_many(toa_s * 1e9, rise_time_ns, max_excess_delay_ns, p_los)
    return RangeEstimate(float(mean), float(var), float(p), "toa-mitig")


# -- hybrid kPCA+ / kPCA+GPR -------------------------------------------------------

@dataclass(eq=False)
class HybridModel:
    kpca_full: KpcaModel
    classifier: ProjectionClassifier
    nlos_ranger: KpcaModel | GprModel
    mu_l: float = 0.0
    sigma_l: float = TABLE2["sigma_l"]
    n_nlos: int = 0

    @property
    def method(self) -> str:
        return "kpca-plus-gpr" if isinstance(self.nlos_ranger, GprModel) else "kpca-plus"

    def p_los_many(self, a) -> np.ndarray:
        y = self.kpca_full.project_many(a, self.classifier.m_prime)
        return self.classifier.p_los_many(y)

    def estimate_many(self, a, toa_ns, p_los=None):
        a = np.atleast_2d(np.asarray(a, dtype=float))
        if p_los is None:
            p_los = self.p_los_many(a)
        p_los = np.broadcast_to(np.asarray(p_los, dtype=float), (a.shape[0],))
        m_n, v_n = self.nlos_ranger.estimate_many(a) if isinstance(self.nlos_ranger, KpcaModel) \
            else self.nlos_ranger.predict_many(a)
        ctau = C_M_PER_NS * np.asarray(toa_ns, dtype=float)
        mean, var = mixture(p_los, ctau - self.mu_l, self.sigma_l ** 2, m_n, v_n)
        return mean, var, p_los

    def to_dict(self):
        ranger = self.nlos_ranger.to_dict()
        return {
            "kpca_full": self.kpca_full.to_dict(),
            "classifier": self.classifier.to_dict(),
            "nlos_ranger": {"kind": "gpr" if isinstance(self.nlos_ranger, GprModel) else "kpca", "model": ranger},
            "mu_l": self.mu_l,
            "sigma_l": self.sigma_l,
            "n_nlos": self.n_nlos,
        }

    @classmethod
    def from_dict(cls, d):
        nr = d["nlos_ranger"]
        ranger = GprModel.from_dict(nr["model"]) if nr["kind"] == "gpr" else KpcaModel.from_dict(nr["model"])
        return cls(KpcaModel.from_dict(d["kpca_full"]), ProjectionClassifier.from_dict(d["classifier"]),
                   ranger, float(d["mu_l"]), float(d["sigma_l"]), int(d["n_nlos"]))


def _branch_single(h: HybridModel, a, toa_s, p_los):
    a = np.asarray(a, dtype=float)
    mean, var, p = h.estimate_many(a[None, :], np.array([toa_s * 1e9]), p_los)
    return RangeEstimate(float(mean[0]), float(var[0]), float(p[0]), h.method)


def estimate_kpca_plus(h: HybridModel, a, toa_s: float, p_los: float | None = None) -> RangeEstimate:
    if not isinstance(h.nlos_ranger, KpcaModel):
        raise InputError("kPCA+ needs a kernel-PCA NLOS ranger")
    return _branch_single(h, a, toa_s, p_los)


def estimate_kpca_plus_gpr(h: HybridModel, a, toa_s: float, p_los: float | None = None) -> RangeEstimate:
    if not isinstance(h.nlos_ranger, GprModel):
        raise InputError("kPCA+GPR needs a GPR NLOS ranger")
    return _branch_single(h, a, toa_s, p_los)


# -- training configuration and envelope -----------------------------------------

@dataclass
class TrainConfig:
    degree: int = 3
    n_components: int = 60
    n_id_components: int = 4
    prior_los: float = 0.5
    mu_l: float = 0.0
    feature_subset: str = "all"
    clip_to_rank: bool = True
    gpr: OptConfig = field(default_factory=OptConfig)

    @property
    def columns(self) -> tuple[int, ...]:
        try:
            return FEATURE_SUBSETS[self.feature_subset]
        except KeyError:
            raise ConfigError(f"unknown feature subset {self.feature_subset!r}") from None


@dataclass(eq=False)
class RangingModel:
    """A trained estimator of any method plus the scaler its kernel parts use."""

    method: str
    columns: tuple[int, ...]
    scaler: FeatureScaler | None
    component: object
    metadata: dict = field(default_factory=dict)

    def _inputs(self, x):
        return self.scaler.transform(np.asarray(x, dtype=float)[:, list(self.columns)])

    def predict(self, x, p_los=None):
        """Mean, variance and LOS probability for each row of raw features ``x``."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        n = x.shape[0]
        toa = x[:, IDX_TOA]
        if self.method == "toa-only":
            record(flops=n)
            return C_M_PER_NS * toa, np.full(n, self.component.sigma_l ** 2), np.ones(n)
        if self.method == "toa-mitig":
            return self.component.estimate_many(toa, x[:, IDX_RISE], x[:, IDX_XED], p_los)
        a = self._inputs(x)
        if self.method == "gpr":
            m, v = self.component.predict_many(a)
            return m, v, np.ones(n)
        if self.method == "kpca":
            m, v = self.component.estimate_many(a)
            return m, v, np.ones(n)
        return self.component.estimate_many(a, toa, p_los)

    def estimates(self, x) -> list[RangeEstimate]:
        m, v, p = self.predict(x)
        return [RangeEstimate(float(a), float(b), float(c), self.method) for a, b, c in zip(m, v, p)]

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "method": self.method,
            "feature_columns": list(self.columns),
            "scaler": None if self.scaler is None else self.scaler.to_dict(),
            "components": self.component.to_dict(),
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RangingModel":
        if d.get("format_version") != FORMAT_VERSION:
            raise InputError(f"unsupported model format_version {d.get('format_version')!r}")
        method = d["method"]
        comp = d["components"]
        loaders = {
            "toa-only": MitigationModel.from_dict,
            "toa-mitig": MitigationModel.from_dict,
            "gpr": GprModel.from_dict,
            "kpca": KpcaModel.from_dict,
            "kpca-plus": HybridModel.from_dict,
            "kpca-plus-gpr": HybridModel.from_dict,
        }
        if method not in loaders:
            raise InputError(f"unknown method {method!r}")
        scaler = None if d["scaler"] is None else FeatureScaler.from_dict(d["scaler"])
        return cls(method, tuple(d["feature_columns"]), scaler, loaders[method](comp), d.get("metadata", {}))


def train(method: str, table: FeatureTable, config: TrainConfig | None = None) -> RangingModel:
    cfg = config or TrainConfig()
    if method not in METHODS:
        raise ConfigError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")
    if not table.labeled:
        raise InputError("training needs distance_m and is_nlos columns")
    x, d, lab = table.x, table.distance, np.asarray(table.is_nlos, dtype=bool)
    cols = cfg.columns
    meta = {"n_train": int(len(table)), "n_los": int((~lab).sum()), "n_nlos": int(lab.sum())}

    if method in ("toa-only", "toa-mitig"):
        mit = fit_mitigation(x[:, IDX_TOA], x[:, IDX_RISE], x[:, IDX_XED], d, lab, cfg.mu_l, cfg.prior_los)
        return RangingModel(method, cols, None, mit, meta)

    scaler = fit_scaler(x[:, list(cols)])
    a = scaler.transform(x[:, list(cols)])
    kernel = PolyKernel(cfg.degree)
    if method == "gpr":
        comp = fit_gpr(a, d, cfg.gpr)
        meta["fit"] = comp.fit_info
    elif method == "kpca":
        comp = fit_kpca(a, d, kernel, cfg.n_components, clip_to_rank=cfg.clip_to_rank)
        meta["n_components"] = comp.n_components
    else:
        if lab.sum() < 3 or (~lab).sum() < 2:
            raise FitError("hybrid methods need LOS and NLOS training samples")
        kfull = fit_kpca(a, None, kernel, max(cfg.n_components, cfg.n_id_components),
                         clip_to_rank=cfg.clip_to_rank)
        clf = fit_projection_classifier(kfull.train_projections, lab, cfg.n_id_components, cfg.prior_los)
        if method == "kpca-plus":
            ranger = fit_kpca(a[lab], d[lab], kernel, cfg.n_components, clip_to_rank=cfg.clip_to_rank)
        else:
            ranger = fit_gpr(a[lab], d[lab], cfg.gpr)
            meta["fit"] = ranger.fit_info
        ctau = C_M_PER_NS * x[~lab, IDX_TOA]
        sigma_l = float(np.std(ctau - d[~lab] - cfg.mu_l, ddof=1))
        kfull.train_projections = None
        comp = HybridModel(kfull, clf, ranger, cfg.mu_l, sigma_l, int(lab.sum()))
    return RangingModel(method, cols, scaler, comp, meta)
