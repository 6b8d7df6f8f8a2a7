import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from uwb_ranger.errors import EmptyPdpError, GridError, InputError
from uwb_ranger.pdp import (
    FrequencyResponse,
    PowerDelayProfile,
    apply_threshold,
    default_threshold,
    freq_response_to_pdp,
    mw_to_dbm,
    read_freq_response_csv,
    read_pdp_any,
    read_pdp_csv,
    write_freq_response_csv,
    write_pdp_csv,
)


def fr_grid(n, f0=3.5e9, df=1e6, values=None):
    f = f0 + df * np.arange(n)
    return FrequencyResponse(f0, f, np.ones(n) if values is None else values)


def test_flat_response_is_impulse_at_zero():
    pdp = freq_response_to_pdp(fr_grid(4), window="none")
    assert np.argmax(pdp.power) == 0
    assert pdp.power[0] == pytest.approx(0.0, abs=1e-9)  # |h|^2 = 1 mW
    assert np.all(pdp.power[1:] < -200)


@pytest.mark.parametrize("n", [4, 16, 101])
def test_delay_theorem(n):
    df = 1e6
    f = 3.5e9 + df * np.arange(n)
    dt = 1.0 / (n * df)
    fr = FrequencyResponse(3.5e9, f, np.exp(-2j * np.pi * f * 3 * dt))
    pdp = freq_response_to_pdp(fr, window="none")
    assert pdp.dt == pytest.approx(dt, rel=1e-12)
    assert np.argmax(pdp.power) == 3


def test_table1_resolution():
    fr = FrequencyResponse(3.5e9, np.linspace(2.5e9, 4.5e9, 3001), np.ones(3001))
    pdp = freq_response_to_pdp(fr)
    assert pdp.power.size == 3001
    # n-point inverse DFT spacing; equals 1/span up to the factor n/(n-1).
    assert pdp.dt == pytest.approx(0.5e-9, rel=1 / 3000 + 1e-9)


def test_hann_window_keeps_peak_position():
    pdp = freq_response_to_pdp(fr_grid(64), window="hann")
    assert np.argmax(pdp.power) == 0


@given(st.integers(2, 64), st.integers(0, 2**31))
@settings(max_examples=40, deadline=None)
def test_parseval(n, seed):
    r = np.random.default_rng(seed)
    v = r.standard_normal(n) + 1j * r.standard_normal(n)
    pdp = freq_response_to_pdp(fr_grid(n, values=v), window="none")
    assert pdp.linear.sum() == pytest.approx(np.mean(np.abs(v) ** 2), rel=1e-6)


def test_bad_grids():
    with pytest.raises(GridError):
        FrequencyResponse(1.0, np.array([0.0, 1.0, 3.0]), np.ones(3))
    with pytest.raises(GridError):
        FrequencyResponse(1.0, np.array([2.0, 1.0]), np.ones(2))
    with pytest.raises(InputError):
        FrequencyResponse(1.0, np.array([1.0]), np.ones(1))
    with pytest.raises(InputError):
        freq_response_to_pdp(fr_grid(4), window="hamming")


def test_threshold_examples():
    pdp = PowerDelayProfile(0.0, 1e-9, np.array([-80.0, -60.0, -90.0]))
    assert apply_threshold(pdp, -70).mask.tolist() == [False, True, False]
    assert apply_threshold(pdp, -np.inf).mask.all()
    with pytest.raises(EmptyPdpError):
        apply_threshold(pdp, -50)


def test_threshold_is_strict():
    pdp = PowerDelayProfile(0.0, 1e-9, np.array([-70.0, -60.0]))
    assert apply_threshold(pdp, -70).mask.tolist() == [False, True]


powers = st.lists(st.floats(-120, 0, allow_nan=False), min_size=1, max_size=50)


@given(powers, st.floats(-130, 0), st.floats(0, 30))
def test_threshold_idempotent_and_monotone(p, th, raise_by):
    pdp = PowerDelayProfile(0.0, 1e-9, np.array(p))
    try:
        tp = apply_threshold(pdp, th)
    except EmptyPdpError:
        return
    assert np.array_equal(apply_threshold(tp, th).mask, tp.mask)
    try:
        higher = apply_threshold(pdp, th + raise_by)
    except EmptyPdpError:
        return
    assert not np.any(higher.mask & ~tp.mask)


def test_default_threshold():
    power = np.full(100, -120.0)
    power[10] = -50.0
    pdp = PowerDelayProfile(0.0, 1e-9, power)
    # peak - 30 dominates noise + 6
    assert default_threshold(pdp) == pytest.approx(-80.0)
    power[10] = -100.0
    assert default_threshold(PowerDelayProfile(0.0, 1e-9, power)) == pytest.approx(-114.0)


def test_pdp_validation():
    with pytest.raises(InputError):
        PowerDelayProfile(0.0, 0.0, np.array([1.0]))
    with pytest.raises(InputError):
        PowerDelayProfile(0.0, 1e-9, np.array([]))
    with pytest.raises(InputError):
        PowerDelayProfile(0.0, 1e-9, np.array([np.nan]))


def test_dbm_floor():
    assert mw_to_dbm(0.0) == pytest.approx(-300.0)


def test_pdp_csv_roundtrip(tmp_path):
    pdp = PowerDelayProfile(2e-9, 0.5e-9, np.array([-90.0, -50.5, -70.25]))
    path = tmp_path / "p.csv"
    write_pdp_csv(pdp, path)
    back = read_pdp_csv(path)
    assert back.t0 == pytest.approx(pdp.t0) and back.dt == pytest.approx(pdp.dt)
    assert np.array_equal(back.power, pdp.power)
    assert read_pdp_any(path).power.tolist() == pdp.power.tolist()


def test_pdp_csv_rejects_nonuniform(tmp_path):
    path = tmp_path / "p.csv"
    path.write_text("delay_ns,power_dbm\n0,-50\n1,-60\n3,-70\n")
    with pytest.raises(GridError):
        read_pdp_csv(path)
    path.write_text("delay,power\n0,-50\n")
    with pytest.raises(InputError):
        read_pdp_csv(path)


def test_freq_response_csv_converts(tmp_path):
    fr = fr_grid(32)
    path = tmp_path / "f.csv"
    write_freq_response_csv(fr, path)
    back = read_freq_response_csv(path)
    assert np.allclose(back.values, fr.values)
    pdp = read_pdp_any(path)
    assert np.argmax(pdp.power) == 0 and pdp.power.size == 32
