"""Channel parameter extraction and feature standardization."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateFeatureError, DimError, InputError
from .pdp import ThresholdedPdp, mw_to_dbm

FEATURE_NAMES = (
    "toa",
    "rss",
    "max_power",
    "mean_excess_delay",
    "max_excess_delay",
    "rms_delay_spread",
    "rise_time",
    "kurtosis",
)
CSV_COLUMNS = ("toa_ns", "rss_dbm", "max_power_dbm", "med_ns", "xed_ns", "rms_ns", "rise_ns", "kurtosis")
LABEL_COLUMNS = ("distance_m", "is_nlos")

# Named column subsets used by the feature-subset study.
FEATURE_SUBSETS = {
    "all": tuple(range(8)),
    "toa_rss_only": (0, 1),
    "no_toa_rss": (2, 3, 4, 5, 6, 7),
}

IDX_TOA = 0
IDX_XED = 4
IDX_RISE = 6


@dataclass(frozen=True)
class ChannelFeatures:
    """The eight channel parameters. Delays are in seconds, powers in dBm."""

    toa: float
    rss: float
    max_power: float
    mean_excess_delay: float
    max_excess_delay: float
    rms_delay_spread: float
    rise_time: float
    kurtosis: float

    def as_model_units(self) -> np.ndarray:
        """Canonical-order vector with delays in ns (the unit kernel methods see)."""
        return np.array([
            self.toa * 1e9,
            self.rss,
            self.max_power,
            self.mean_excess_delay * 1e9,
            self.max_excess_delay * 1e9,
            self.rms_delay_spread * 1e9,
            self.rise_time * 1e9,
            self.kurtosis,
        ])

    @classmethod
    def from_model_units(cls, row) -> "ChannelFeatures":
        r = [float(x) for x in row]
        if len(r) != 8:
            raise DimError(f"expected 8 feature values, got {len(r)}")
        return cls(r[0] * 1e-9, r[1], r[2], r[3] * 1e-9, r[4] * 1e-9, r[5] * 1e-9, r[6] * 1e-9, r[7])


def extract_features(tp: ThresholdedPdp) -> ChannelFeatures:
    mask = tp.mask
    tau = tp.delays[mask]
    p = tp.linear[mask]
    p_dbm = tp.power[mask]

    tau1 = tau[0]
    rel = tau - tau1
    total = p.sum()
    med = float(np.dot(p, rel) / total)
    rms = float(np.sqrt(max(np.dot(p, (rel - med) ** 2) / total, 0.0)))
    rise = float(tau[np.argmax(p_dbm)] - tau1)

    dev = p - p.mean()
    m2 = np.mean(dev ** 2)
    # Kurtosis of a constant sample is undefined; report 0 for it.
    kurt = float(np.mean(dev ** 4) / m2 ** 2) if m2 > 0 else 0.0

    return ChannelFeatures(
        toa=float(tau1),
        rss=float(mw_to_dbm(total)),
        max_power=float(p_dbm.max()),
        mean_excess_delay=med,
        max_excess_delay=float(rel[-1]),
        rms_delay_spread=rms,
        rise_time=rise,
        kurtosis=kurt,
    )


def feature_matrix(samples) -> np.ndarray:
    """Stack ChannelFeatures (or already-converted rows) into an (N, 8) array in model units."""
    rows = [s.as_model_units() if isinstance(s, ChannelFeatures) else np.asarray(s, float) for s in samples]
    if not rows:
        raise InputError("no samples")
    return np.vstack(rows)


@dataclass(frozen=True, eq=False)
class FeatureScaler:
    means: np.ndarray
    stds: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.means, dtype=float)
        s = np.asarray(self.stds, dtype=float)
        if m.shape != s.shape or m.ndim != 1:
            raise DimError("means and stds must be 1-D of equal length")
        if np.any(s <= 0):
            raise DegenerateFeatureError("standard deviations must be positive")
        object.__setattr__(self, "means", m)
        object.__setattr__(self, "stds", s)

    def transform(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.means.size:
            raise DimError(f"expected {self.means.size} features, got {x.shape[-1]}")
        return (x - self.means) / self.stds

    def to_dict(self) -> dict:
        return {"means": self.means.tolist(), "stds": self.stds.tolist()}

    @classmethod
    def from_dict(cls, d) -> "FeatureScaler":
        return cls(np.array(d["means"], float), np.array(d["stds"], float))


def fit_scaler(samples) -> FeatureScaler:
    """Per-feature sample mean and standard deviation (N-1 denominator)."""
    x = feature_matrix(samples) if not isinstance(samples, np.ndarray) else np.atleast_2d(samples)
    if x.shape[0] < 2:
        raise InputError("at least two samples are needed to fit a scaler")
    stds = x.std(axis=0, ddof=1)
    bad = np.flatnonzero(~(stds > 0))
    if bad.size:
        raise DegenerateFeatureError(f"zero-variance feature column(s): {bad.tolist()}")
    return FeatureScaler(x.mean(axis=0), stds)


def standardize(f, scaler: FeatureScaler) -> np.ndarray:
    x = f.as_model_units() if isinstance(f, ChannelFeatures) else f
    return scaler.transform(x)


# -- feature CSV -------------------------------------------------------------

@dataclass
class FeatureTable:
    """Rows of features in model units with optional ground truth."""

    x: np.ndarray
    distance: np.ndarray | None = None
    is_nlos: np.ndarray | None = None

    def __len__(self):
        return self.x.shape[0]

    @property
    def labeled(self) -> bool:
        return self.distance is not None

    def subset(self, idx) -> "FeatureTable":
        idx = np.asarray(idx)
        return FeatureTable(
            self.x[idx],
            None if self.distance is None else self.distance[idx],
            None if self.is_nlos is None else self.is_nlos[idx],
        )


def _fmt(v: float) -> str:
    return repr(float(v))


def write_feature_csv(table: FeatureTable, path) -> None:
    header = list(CSV_COLUMNS) + (list(LABEL_COLUMNS) if table.labeled else [])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i, row in enumerate(table.x):
            out = [_fmt(v) for v in row]
            if table.labeled:
                out += [_fmt(table.distance[i]), str(int(table.is_nlos[i]))]
            w.writerow(out)


def read_feature_csv(path) -> FeatureTable:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = tuple(c.strip() for c in next(reader))
        except StopIteration:
            raise InputError(f"{path}: empty file") from None
        rows = [row for row in reader if row]
    if header[:8] != CSV_COLUMNS or header[8:] not in ((), LABEL_COLUMNS):
        raise InputError(f"{path}: unexpected header {','.join(header)}")
    if not rows:
        raise InputError(f"{path}: no data rows")
    data = np.array([[float(c) for c in row] for row in rows], dtype=float)
    if data.shape[1] != len(header):
        raise InputError(f"{path}: ragged rows")
    if len(header) == 8:
        return FeatureTable(data)
    return FeatureTable(data[:, :8], data[:, 8], data[:, 9].astype(bool))

