"""Seeded generator of tunnel-like labeled ranging data.

TOA follows the LOS/NLOS bias model, rise time is exponential with a
class-dependent rate, and the remaining parameters come from class-conditional
affine models in (log10 d, max excess delay) with Gaussian noise. In ``pdp``
mode each sample is rendered as a tapped-delay-line power delay profile whose
first path, strongest path and last path realize the drawn TOA, rise time and
max excess delay.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, SplitError
from .estimators import C_M_PER_NS, TABLE2
from .features import FeatureTable
from .pdp import PowerDelayProfile


@dataclass(frozen=True)
class PdpConfig:
    dt_ns: float = 0.5
    n_bins: int = 800
    decay_db_per_ns: float = 0.5
    noise_floor_dbm: float = -120.0
    n_paths: int = 20
    # Detected paths stay within this many dB of the strongest one.
    dynamic_range_db: float = 25.0


# Class-conditional affine models for the auxiliary features:
# value = intercept + slope_logd * log10(d) + slope_xed * xed_ns + N(0, noise^2)
# (max_power is modelled relative to rss).
AUX_DEFAULTS = {
    "los": {
        "rss": (-40.0, -20.0, -0.02, 2.0),
        "max_power_rel": (-3.0, 0.0, -0.01, 1.0),
        "med": (1.0, 0.0, 0.15, 2.0),
        "rms": (1.0, 0.0, 0.12, 1.5),
        "kurtosis": (30.0, 0.0, -0.08, 4.0),
    },
    "nlos": {
        "rss": (-58.0, -20.0, -0.02, 2.5),
        "max_power_rel": (-14.0, 0.0, -0.01, 1.5),
        "med": (15.0, 0.0, 0.25, 3.0),
        "rms": (14.0, 0.0, 0.18, 2.5),
        "kurtosis": (6.0, 0.0, -0.02, 2.0),
    },
}


def _copy_aux(aux) -> dict:
    return {h: {k: tuple(float(v) for v in c) for k, c in d.items()} for h, d in aux.items()}


@dataclass(frozen=True)
class SimConfig:
    seed: int = 0
    n_samples: int = 3600
    p_nlos: float = 0.25
    d_range: tuple[float, float] = (1.0, 30.0)
    mu_l: float = 0.0
    sigma_l: float = TABLE2["sigma_l"]
    sigma_n: float = TABLE2["sigma_n"]
    lambda_l: float = TABLE2["lambda_l"]
    lambda_n: float = TABLE2["lambda_n"]
    poly: tuple[float, float, float] = TABLE2["poly"]
    xed_max_ns: float = 120.0
    mode: str = "features"
    pdp: PdpConfig = field(default_factory=PdpConfig)
    aux: dict = field(default_factory=lambda: _copy_aux(AUX_DEFAULTS))

    def __post_init__(self):
        if self.n_samples < 1:
            raise ConfigError("n_samples must be at least 1")
        if not 0.0 < self.p_nlos < 1.0:
            raise ConfigError("p_nlos must lie strictly between 0 and 1")
        lo, hi = self.d_range
        if not 0.0 <= lo < hi:
            raise ConfigError("d_range must satisfy 0 <= d_min < d_max")
        if self.sigma_l < 0 or self.sigma_n < 0:
            raise ConfigError("noise standard deviations must be non-negative")
        if not (self.lambda_l > 0 and self.lambda_n > 0):
            raise ConfigError("rise-time rates must be positive")
        if self.mode not in ("features", "pdp"):
            raise ConfigError(f"mode must be 'features' or 'pdp', got {self.mode!r}")
        if not self.xed_max_ns > 0:
            raise ConfigError("xed_max_ns must be positive")


def g_bias(poly, xed_ns):
    p2, p1, p0 = poly
    x = np.asarray(xed_ns, dtype=float)
    return p2 * x * x + p1 * x + p0


@dataclass
class SimResult:
    table: FeatureTable
    ctau: np.ndarray  # c * TOA in metres as drawn (before PDP quantization)
    xed_ns: np.ndarray
    pdps: list[PowerDelayProfile] | None = None


def _aux(rng, coef, logd, xed):
    b0, b_logd, b_xed, sd = coef
    return b0 + b_logd * logd + b_xed * xed + rng.normal(0.0, sd, size=logd.shape)


def simulate(config: SimConfig) -> SimResult:
    cfg = config
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n_samples
    n_nlos = int(round(cfg.p_nlos * n))
    is_nlos = np.zeros(n, dtype=bool)
    is_nlos[:n_nlos] = True
    is_nlos = rng.permutation(is_nlos)

    d = rng.uniform(*cfg.d_range, size=n)
    rise = np.where(is_nlos, rng.exponential(1.0 / cfg.lambda_n, n), rng.exponential(1.0 / cfg.lambda_l, n))
    xed = np.maximum(rng.uniform(0.0, cfg.xed_max_ns, size=n), rise)
    noise = rng.standard_normal(n)
    ctau = np.where(
        is_nlos,
        d + g_bias(cfg.poly, xed) + cfg.sigma_n * noise,
        d + cfg.mu_l + cfg.sigma_l * noise,
    )
    ctau = np.maximum(ctau, 0.0)
    toa_ns = ctau / C_M_PER_NS

    logd = np.log10(np.maximum(d, 1e-3))
    cols = {}
    for name in ("rss", "max_power_rel", "med", "rms", "kurtosis"):
        cols[name] = np.where(
            is_nlos,
            _aux(rng, cfg.aux["nlos"][name], logd, xed),
            _aux(rng, cfg.aux["los"][name], logd, xed),
        )
    rss = cols["rss"]
    max_power = rss + np.minimum(cols["max_power_rel"], 0.0)
    med = np.clip(cols["med"], 0.0, xed)
    rms = np.clip(cols["rms"], 0.0, 0.5 * xed)
    kurt = np.maximum(cols["kurtosis"], 1.0)

    x = np.column_stack([toa_ns, rss, max_power, med, xed, rms, rise, kurt])
    result = SimResult(FeatureTable(x, d, is_nlos), ctau, xed)
    if cfg.mode == "pdp":
        result.pdps = [
            render_pdp(rng, cfg.pdp, toa_ns[i], rise[i], xed[i], max_power[i], d[i] / C_M_PER_NS, bool(is_nlos[i]))
            for i in range(n)
        ]
    return result


def render_pdp(rng, pc: PdpConfig, toa_ns, rise_ns, xed_ns, peak_dbm, direct_ns, nlos) -> PowerDelayProfile:
    """Tapped-delay-line PDP with first path at ``toa_ns`` and peak ``rise_ns`` later."""
    nb, dt = pc.n_bins, pc.dt_ns
    floor = pc.noise_floor_dbm + rng.uniform(-3.0, 0.0, size=nb)
    lin = 10.0 ** (floor / 10.0)

    def add(tau_ns, p_dbm):
        i = int(round(tau_ns / dt))
        if 0 <= i < nb:
            lin[i] += 10.0 ** (p_dbm / 10.0)

    i_first = int(round(toa_ns / dt))
    i_peak = i_first + int(round(rise_ns / dt))
    i_last = max(i_first + int(round(xed_ns / dt)), i_peak)
    if i_last >= nb:
        raise ConfigError(f"PDP grid of {nb} bins too short for a path at bin {i_last}")
    span = pc.dynamic_range_db

    def rel(i):
        return -min(pc.decay_db_per_ns * abs(i - i_peak) * dt, span - 3.0)

    taus = {i_first, i_peak, i_last}
    extra = rng.integers(i_first, i_last + 1, size=max(pc.n_paths - 3, 0))
    taus.update(int(i) for i in extra)
    for i in sorted(taus):
        jitter = 0.0 if i in (i_first, i_peak, i_last) else rng.uniform(-2.0, 0.0)
        level = 0.0 if i == i_peak else min(rel(i) + jitter, -0.5)
        add(i * dt, peak_dbm + level)
    if nlos:
        # Blocked direct path: present but well below the detection threshold.
        add(direct_ns, peak_dbm - span - 20.0)
    return PowerDelayProfile(t0=0.0, dt=dt * 1e-9, power=10.0 * np.log10(lin))


# -- splitting -----------------------------------------------------------------

def split_indices(is_nlos, train_fraction: float, stratify: bool = True, seed: int = 0):
    if not 0.0 < train_fraction < 1.0:
        raise SplitError("train_fraction must lie strictly between 0 and 1")
    lab = np.asarray(is_nlos, dtype=bool)
    rng = np.random.default_rng(seed)
    groups = [np.flatnonzero(~lab), np.flatnonzero(lab)] if stratify else [np.arange(lab.size)]
    train, test = [], []
    for g in groups:
        g = rng.permutation(g)
        k = int(round(train_fraction * g.size))
        train.append(g[:k])
        test.append(g[k:])
    train, test = np.sort(np.concatenate(train)), np.sort(np.concatenate(test))
    for name, idx in (("train", train), ("test", test)):
        if stratify and (lab[idx].all() or not lab[idx].any()):
            raise SplitError(f"{name} side would lack one of the classes")
        if idx.size == 0:
            raise SplitError(f"{name} side would be empty")
    return train, test


def split(table: FeatureTable, train_fraction: float = 0.5, stratify: bool = True, seed: int = 0):
    tr, te = split_indices(table.is_nlos, train_fraction, stratify, seed)
    return table.subset(tr), table.subset(te)


def stratified_subsample(table: FeatureTable, n: int, seed: int = 0) -> FeatureTable:
    """``n`` rows drawn without replacement keeping the LOS:NLOS ratio."""
    if n >= len(table):
        return table
    idx, _ = split_indices(table.is_nlos, n / len(table), True, seed)
    return table.subset(idx)


# -- config files ----------------------------------------------------------------

def _parse_value(raw: str):
    raw = raw.strip()
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw.strip("'\"")


def load_config(path, **overrides) -> SimConfig:
    """Read ``key = value`` lines (``#`` comments; ``pdp.<field>`` for PDP settings).

    Values are JSON literals; lists are accepted for tuple fields.
    """
    top, pdp = {}, {}
    aux = _copy_aux(AUX_DEFAULTS)
    valid = {f.name for f in dataclasses.fields(SimConfig)} - {"pdp", "aux"}
    valid_pdp = {f.name for f in dataclasses.fields(PdpConfig)}
    if path is not None:
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
                key, val = (s.strip() for s in line.split("=", 1))
                value = _parse_value(val)
                if key.startswith("pdp."):
                    if key[4:] not in valid_pdp:
                        raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
                    pdp[key[4:]] = value
                elif key.startswith("aux."):
                    parts = key.split(".")
                    if len(parts) != 3 or parts[1] not in aux or parts[2] not in aux[parts[1]]:
                        raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
                    aux[parts[1]][parts[2]] = tuple(float(v) for v in value)
                elif key in valid:
                    top[key] = value
                else:
                    raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
    top.update({k: v for k, v in overrides.items() if v is not None})
    for k in ("d_range", "poly"):
        if k in top:
            top[k] = tuple(float(v) for v in top[k])
    try:
        return SimConfig(pdp=PdpConfig(**pdp), aux=aux, **top)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def dump_config(cfg: SimConfig) -> str:
    lines = []
    for f in dataclasses.fields(cfg):
        v = getattr(cfg, f.name)
        if f.name == "pdp":
            lines += [f"pdp.{k} = {json.dumps(val)}" for k, val in dataclasses.asdict(v).items()]
        elif f.name == "aux":
            lines += [f"aux.{h}.{k} = {json.dumps(list(val))}" for h, d in v.items() for k, val in d.items()]
        else:
            lines.append(f"{f.name} = {json.dumps(list(v) if isinstance(v, tuple) else v)}")
    return "\n".join(lines) + "\n"
