"""Error statistics, evaluation reports and parameter sweeps."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InputError
from .estimators import METHODS, RangingModel, TrainConfig, train
from .features import FEATURE_SUBSETS, IDX_RISE, FeatureTable, fit_scaler
from .kernels import PolyKernel, count_ops
from .kpca import fit_kpca
from .nlos import RiseTimeClassifier, fit_projection_classifier, misclassification_rate
from .sim import split, stratified_subsample

FORMAT_VERSION = 1
PERCENTILES = (50, 90, 95)
ID_METHODS = ("toa-mitig", "kpca-plus", "kpca-plus-gpr")


def abs_errors(estimates, truth) -> np.ndarray:
    est = np.asarray(estimates, dtype=float).ravel()
    d = np.asarray(truth, dtype=float).ravel()
    if est.shape != d.shape:
        raise InputError(f"{est.size} estimates but {d.size} true distances")
    if est.size == 0:
        raise InputError("nothing to evaluate")
    return np.abs(est - d)


def error_cdf(errors) -> list[tuple[float, float]]:
    """Empirical CDF as (error, fraction <= error) at each distinct error."""
    e = np.sort(np.asarray(errors, dtype=float))
    vals, counts = np.unique(e, return_counts=True)
    frac = np.cumsum(counts) / e.size
    frac[-1] = 1.0
    return [(float(v), float(f)) for v, f in zip(vals, frac)]


def error_percentiles(errors, qs=PERCENTILES) -> dict[int, float]:
    # Inverted-CDF quantiles are actual sample errors, so they sit on the CDF.
    e = np.asarray(errors, dtype=float)
    return {int(q): float(np.percentile(e, q, method="inverted_cdf")) for q in qs}


@dataclass
class EvalReport:
    method: str
    n_test: int
    rmse: float
    percentiles: dict[int, float]
    cdf: list[tuple[float, float]] = field(repr=False)
    misclassification: float | None = None
    kernel_eval_count: int = 0
    flops: int = 0

    @property
    def kernel_evals_per_query(self) -> float:
        return self.kernel_eval_count / self.n_test

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "method": self.method,
            "n_test": self.n_test,
            "rmse": self.rmse,
            "percentiles": {str(k): v for k, v in self.percentiles.items()},
            "cdf": [list(p) for p in self.cdf],
            "misclassification": self.misclassification,
            "kernel_eval_count": self.kernel_eval_count,
            "kernel_evals_per_query": self.kernel_evals_per_query,
            "flops": self.flops,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        if d.get("format_version") != FORMAT_VERSION:
            raise InputError(f"unsupported report format_version {d.get('format_version')!r}")
        return cls(
            d["method"], int(d["n_test"]), float(d["rmse"]),
            {int(k): float(v) for k, v in d["percentiles"].items()},
            [(float(a), float(b)) for a, b in d["cdf"]],
            d.get("misclassification"), int(d["kernel_eval_count"]), int(d.get("flops", 0)),
        )


def report_from_estimates(method: str, estimates, truth, p_los=None, is_nlos=None,
                          kernel_evals: int = 0, flops: int = 0) -> EvalReport:
    e = abs_errors(estimates, truth)
    mis = None
    if p_los is not None and is_nlos is not None:
        mis = misclassification_rate(np.asarray(p_los, dtype=float), np.asarray(is_nlos, dtype=bool))
    return EvalReport(
        method, int(e.size), float(np.sqrt(np.mean(e ** 2))), error_percentiles(e), error_cdf(e),
        mis, int(kernel_evals), int(flops),
    )


def evaluate(model: RangingModel, table: FeatureTable) -> EvalReport:
    if not table.labeled:
        raise InputError("evaluation needs distance_m and is_nlos columns")
    with count_ops() as ops:
        mean, _, p_los = model.predict(table.x)
    with_id = model.method in ID_METHODS
    return report_from_estimates(
        model.method, mean, table.distance,
        p_los if with_id else None, table.is_nlos if with_id else None,
        ops.kernel_evals, ops.flops,
    )


# -- sweeps ------------------------------------------------------------------------

SWEEP_KINDS = ("degree_M", "Mprime", "train_size", "feature_subset")


def sweep_degree_m(train_t, test_t, degrees=(1, 2, 3, 4, 5), n_components=(20, 40, 60),
                   cfg: TrainConfig | None = None) -> list[dict]:
    """kPCA RMSE over polynomial degree and retained components (clipped to rank)."""
    cfg = cfg or TrainConfig()
    rows = []
    for c in degrees:
        for m in n_components:
            model = train("kpca", train_t, replace(cfg, degree=c, n_components=m, clip_to_rank=True))
            rep = evaluate(model, test_t)
            rows.append({"degree": c, "n_components": m,
                         "effective_components": model.component.n_components, "rmse": rep.rmse})
    return rows


def sweep_mprime(train_t, test_t, m_primes=tuple(range(1, 11)), cfg: TrainConfig | None = None) -> list[dict]:
    """Projection-classifier misclassification versus M', with the rise-time rule for reference."""
    cfg = cfg or TrainConfig()
    cols = list(cfg.columns)
    scaler = fit_scaler(train_t.x[:, cols])
    a_tr, a_te = scaler.transform(train_t.x[:, cols]), scaler.transform(test_t.x[:, cols])
    kp = fit_kpca(a_tr, None, PolyKernel(cfg.degree), max(m_primes), clip_to_rank=True)
    y_te = kp.project_many(a_te)
    rise = RiseTimeClassifier.fit(train_t.x[:, IDX_RISE], train_t.is_nlos, cfg.prior_los)
    rise_rate = misclassification_rate(rise.p_los_many(test_t.x[:, IDX_RISE]), test_t.is_nlos)
    rows = []
    for mp in m_primes:
        mp = min(mp, kp.n_components)
        clf = fit_projection_classifier(kp.train_projections, train_t.is_nlos, mp, cfg.prior_los)
        rate = misclassification_rate(clf.p_los_many(y_te), test_t.is_nlos)
        rows.append({"m_prime": mp, "misclassification": rate, "rise_time_misclassification": rise_rate})
    return rows


def sweep_train_size(train_t, test_t, sizes=(100, 225, 450, 900, 1800), methods=("gpr", "kpca-plus-gpr"),
                     cfg: TrainConfig | None = None, seed: int = 0) -> list[dict]:
    """Error percentiles versus training-set size under stratified subsampling."""
    cfg = cfg or TrainConfig()
    rows = []
    for n in sizes:
        sub = stratified_subsample(train_t, n, seed)
        for meth in methods:
            rep = evaluate(train(meth, sub, cfg), test_t)
            rows.append({"method": meth, "n_train": len(sub), "rmse": rep.rmse,
                         **{f"p{q}": v for q, v in rep.percentiles.items()}})
    return rows


def sweep_feature_subset(train_t, test_t, subsets=tuple(FEATURE_SUBSETS), methods=("gpr", "kpca"),
                         cfg: TrainConfig | None = None) -> list[dict]:
    cfg = cfg or TrainConfig()
    rows = []
    for s in subsets:
        for meth in methods:
            rep = evaluate(train(meth, train_t, replace(cfg, feature_subset=s)), test_t)
            rows.append({"feature_subset": s, "method": meth, "rmse": rep.rmse,
                         **{f"p{q}": v for q, v in rep.percentiles.items()}})
    return rows


def run_sweep(kind: str, table: FeatureTable, train_fraction: float = 0.5, seed: int = 0,
              cfg: TrainConfig | None = None, **kwargs) -> list[dict]:
    if kind not in SWEEP_KINDS:
        raise InputError(f"unknown sweep {kind!r}; choose from {', '.join(SWEEP_KINDS)}")
    for m in kwargs.get("methods", ()):
        if m not in METHODS:
            raise InputError(f"unknown method {m!r}")
    tr, te = split(table, train_fraction, True, seed)
    fn = {"degree_M": sweep_degree_m, "Mprime": sweep_mprime,
          "train_size": sweep_train_size, "feature_subset": sweep_feature_subset}[kind]
    if kind == "train_size":
        kwargs.setdefault("seed", seed)
    return fn(tr, te, cfg=cfg, **kwargs)


def rows_to_csv(rows: list[dict]) -> str:
    if not rows:
        raise InputError("sweep produced no rows")
    buf = io.StringIO()
    fields = ["format_version"] + list(rows[0])
    w = csv.DictWriter(buf, fields, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({"format_version": FORMAT_VERSION,
                    **{k: repr(v) if isinstance(v, float) else v for k, v in r.items()}})
    return buf.getvalue()
