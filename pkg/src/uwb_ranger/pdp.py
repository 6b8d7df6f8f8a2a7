"""Power delay profiles: frequency-domain ingestion, thresholding and CSV I/O."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EmptyPdpError, GridError, InputError

# Linear power is expressed in mW so that dBm = 10*log10(p).
_POWER_FLOOR_MW = 1e-30
GRID_RTOL = 1e-9


def dbm_to_mw(p_dbm):
    return np.power(10.0, np.asarray(p_dbm, dtype=float) / 10.0)


def mw_to_dbm(p_mw):
    return 10.0 * np.log10(np.maximum(np.asarray(p_mw, dtype=float), _POWER_FLOOR_MW))


@dataclass(frozen=True, eq=False)
class FrequencyResponse:
    """Complex channel gains sampled on a uniform frequency grid."""

    center_frequency: float
    frequencies: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.frequencies, dtype=float)
        v = np.asarray(self.values, dtype=complex)
        if f.ndim != 1 or f.shape != v.shape:
            raise InputError("frequencies and values must be 1-D and of equal length")
        if f.size < 2:
            raise InputError("a frequency response needs at least 2 points")
        df = np.diff(f)
        step = (f[-1] - f[0]) / (f.size - 1)
        if step <= 0 or np.any(np.abs(df - step) > GRID_RTOL * abs(step)):
            raise GridError("frequency grid must be strictly increasing and uniform")
        object.__setattr__(self, "frequencies", f)
        object.__setattr__(self, "values", v)

    @property
    def step(self) -> float:
        return float((self.frequencies[-1] - self.frequencies[0]) / (self.frequencies.size - 1))


@dataclass(frozen=True, eq=False)
class PowerDelayProfile:
    t0: float
    dt: float
    power: np.ndarray  # dBm per delay bin

    def __post_init__(self):
        p = np.asarray(self.power, dtype=float)
        if not self.dt > 0:
            raise InputError("dt must be positive")
        if p.ndim != 1 or p.size == 0:
            raise InputError("power must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(p)):
            raise InputError("power values must be finite")
        object.__setattr__(self, "power", p)

    @property
    def delays(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.power.size)

    @property
    def linear(self) -> np.ndarray:
        return dbm_to_mw(self.power)


@dataclass(frozen=True, eq=False)
class ThresholdedPdp(PowerDelayProfile):
    threshold_dbm: float = -np.inf
    mask: np.ndarray = field(init=False, default=None, repr=False)

    def __post_init__(self):
        super().__post_init__()
        mask = self.power > self.threshold_dbm
        if not mask.any():
            raise EmptyPdpError(
                f"no bin above threshold {self.threshold_dbm:.2f} dBm "
                f"(peak {self.power.max():.2f} dBm)"
            )
        object.__setattr__(self, "mask", mask)

    @property
    def masked_linear(self) -> np.ndarray:
        """Linear power with sub-threshold bins zeroed."""
        return np.where(self.mask, self.linear, 0.0)


def freq_response_to_pdp(fr: FrequencyResponse, window: str = "hann") -> PowerDelayProfile:
    """Window, inverse-transform and square a frequency response.

    The delay axis starts at 0 with spacing ``1 / (n * df)``, the bin spacing
    of an n-point inverse DFT. For a 3001-point, 2 GHz sweep that is
    0.49983 ns.
    """
    if window == "none":
        w = np.ones(fr.values.size)
    elif window == "hann":
        w = np.hanning(fr.values.size)
    else:
        raise InputError(f"unknown window {window!r}")
    h = np.fft.ifft(fr.values * w)
    n = fr.values.size
    dt = 1.0 / (n * fr.step)
    return PowerDelayProfile(t0=0.0, dt=dt, power=mw_to_dbm(np.abs(h) ** 2))


def estimate_noise_floor(pdp: PowerDelayProfile) -> float:
    # Most bins of a measured PDP are thermal noise.
    return float(np.median(pdp.power))


def default_threshold(pdp: PowerDelayProfile, noise_floor_dbm: float | None = None,
                      noise_margin_db: float = 6.0, dynamic_range_db: float = 30.0) -> float:
    """max(noise floor + margin, peak - dynamic range)."""
    if noise_floor_dbm is None:
        noise_floor_dbm = estimate_noise_floor(pdp)
    return max(noise_floor_dbm + noise_margin_db, float(pdp.power.max()) - dynamic_range_db)


def apply_threshold(pdp: PowerDelayProfile, p_th: float | None = None) -> ThresholdedPdp:
    """Keep bins strictly above ``p_th`` dBm; ``None`` selects :func:`default_threshold`."""
    if p_th is None:
        p_th = default_threshold(pdp)
    return ThresholdedPdp(t0=pdp.t0, dt=pdp.dt, power=pdp.power, threshold_dbm=float(p_th))


# -- CSV formats -------------------------------------------------------------

PDP_HEADER = ("delay_ns", "power_dbm")
FR_HEADER = ("freq_hz", "re", "im")


def _read_rows(path, header):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            first = next(reader)
        except StopIteration:
            raise InputError(f"{path}: empty file") from None
        if tuple(c.strip() for c in first) != header:
            raise InputError(f"{path}: expected header {','.join(header)}")
        rows = [[float(c) for c in row] for row in reader if row]
    if not rows:
        raise InputError(f"{path}: no data rows")
    return np.array(rows, dtype=float)


def read_pdp_csv(path) -> PowerDelayProfile:
    data = _read_rows(path, PDP_HEADER)
    delays = data[:, 0] * 1e-9
    if delays.size == 1:
        # A single bin carries no spacing information; any positive dt works.
        return PowerDelayProfile(t0=float(delays[0]), dt=1e-9, power=data[:, 1])
    steps = np.diff(delays)
    if np.any(steps <= 0):
        raise GridError(f"{path}: delays must be strictly increasing")
    dt = (delays[-1] - delays[0]) / (delays.size - 1)
    if np.any(np.abs(steps - dt) > 1e-6 * dt):
        raise GridError(f"{path}: delay grid must be uniform")
    return PowerDelayProfile(t0=float(delays[0]), dt=float(dt), power=data[:, 1])


def write_pdp_csv(pdp: PowerDelayProfile, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PDP_HEADER)
        for tau, p in zip(pdp.delays, pdp.power):
            w.writerow((repr(float(tau * 1e9)), repr(float(p))))


def read_freq_response_csv(path, center_frequency: float | None = None) -> FrequencyResponse:
    data = _read_rows(path, FR_HEADER)
    f = data[:, 0]
    if center_frequency is None:
        center_frequency = 0.5 * (f[0] + f[-1])
    return FrequencyResponse(center_frequency, f, data[:, 1] + 1j * data[:, 2])


def write_freq_response_csv(fr: FrequencyResponse, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FR_HEADER)
        for f, v in zip(fr.frequencies, fr.values):
            w.writerow((repr(float(f)), repr(float(v.real)), repr(float(v.imag))))


def read_pdp_any(path: Path) -> PowerDelayProfile:
    """Read either CSV format, converting frequency responses with a Hann window."""
    with open(path) as fh:
        head = fh.readline().strip()
    if head.replace(" ", "") == ",".join(FR_HEADER):
        return freq_response_to_pdp(read_freq_response_csv(path), window="hann")
    return read_pdp_csv(path)
