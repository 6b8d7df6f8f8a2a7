import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from uwb_ranger.errors import DegenerateFeatureError, EmptyPdpError, InputError
from uwb_ranger.features import (
    CSV_COLUMNS,
    FEATURE_NAMES,
    ChannelFeatures,
    FeatureTable,
    extract_features,
    fit_scaler,
    read_feature_csv,
    standardize,
    write_feature_csv,
)
from uwb_ranger.pdp import PowerDelayProfile, apply_threshold


def feats(power, dt_ns=1.0, t0_ns=0.0, p_th=-np.inf):
    pdp = PowerDelayProfile(t0_ns * 1e-9, dt_ns * 1e-9, np.asarray(power, dtype=float))
    return extract_features(apply_threshold(pdp, p_th))


def test_single_bin():
    f = feats([-50.0], t0_ns=10.0)
    assert f.toa == pytest.approx(10e-9)
    assert f.rss == pytest.approx(-50.0)
    assert f.max_power == pytest.approx(-50.0)
    assert f.mean_excess_delay == f.max_excess_delay == f.rms_delay_spread == f.rise_time == 0.0


def test_two_equal_bins():
    f = feats([-60.0, -200.0, -200.0, -200.0, -60.0], p_th=-100)
    assert f.mean_excess_delay == pytest.approx(2e-9)
    assert f.max_excess_delay == pytest.approx(4e-9)
    assert f.rms_delay_spread == pytest.approx(2e-9)
    assert f.rise_time == 0.0


def test_rise_time():
    f = feats([-60.0, -50.0], dt_ns=2.0)
    assert f.rise_time == pytest.approx(2e-9)


def test_rss_sums_linear_power():
    f = feats([-50.0, -50.0])
    assert f.rss == pytest.approx(-50.0 + 10 * np.log10(2))


def test_kurtosis_matches_population_moment():
    p = np.array([-50.0, -55.0, -53.0, -70.0])
    lin = 10 ** (p / 10)
    d = lin - lin.mean()
    assert feats(p).kurtosis == pytest.approx(np.mean(d ** 4) / np.mean(d ** 2) ** 2)


def test_empty_pdp_propagates():
    with pytest.raises(EmptyPdpError):
        feats([-80.0, -90.0], p_th=-10)


profile = st.lists(st.floats(-100, -40, allow_nan=False), min_size=2, max_size=30)


@given(profile, st.floats(0, 50), st.floats(-20, 20))
@settings(max_examples=60)
def test_shift_and_scale_invariance(p, shift_ns, gain_db):
    base = feats(p)
    shifted = feats(p, t0_ns=shift_ns)
    assert shifted.toa == pytest.approx(base.toa + shift_ns * 1e-9, abs=1e-15)
    scaled = feats(np.asarray(p) + gain_db)
    for f in (shifted, scaled):
        for name in ("mean_excess_delay", "max_excess_delay", "rms_delay_spread", "rise_time"):
            assert getattr(f, name) == pytest.approx(getattr(base, name), rel=1e-9, abs=1e-18)
        assert f.kurtosis == pytest.approx(base.kurtosis, rel=1e-7, abs=1e-9)
    assert scaled.rss == pytest.approx(base.rss + gain_db, abs=1e-9)
    assert scaled.max_power == pytest.approx(base.max_power + gain_db, abs=1e-9)


@given(profile)
@settings(max_examples=40)
def test_adding_subthreshold_bins_changes_nothing(p):
    th = min(p) - 1.0
    base = feats(p, p_th=th)
    padded = feats(list(p) + [th - 5.0, th - 20.0], p_th=th)
    assert padded == base


def test_model_units_roundtrip():
    f = ChannelFeatures(1e-8, -50, -55, 2e-9, 9e-9, 3e-9, 1e-9, 4.0)
    row = f.as_model_units()
    assert row[0] == pytest.approx(10.0) and row[4] == pytest.approx(9.0)
    back = ChannelFeatures.from_model_units(row)
    assert back.toa == pytest.approx(f.toa) and back.kurtosis == f.kurtosis
    assert len(FEATURE_NAMES) == len(CSV_COLUMNS) == 8


def test_scaler_two_points():
    x = np.array([[1.0] * 8, [3.0] * 8])
    x[:, 1] = [0.0, 2.0]
    s = fit_scaler(x)
    assert s.means[0] == pytest.approx(2.0) and s.stds[0] == pytest.approx(np.sqrt(2))
    assert s.means[1] == pytest.approx(1.0) and s.stds[1] == pytest.approx(np.sqrt(2))


def test_scaler_degenerate():
    with pytest.raises(DegenerateFeatureError):
        fit_scaler(np.ones((5, 8)))
    with pytest.raises(InputError):
        fit_scaler(np.ones((1, 8)))


def test_standardize_examples(rng):
    x = rng.standard_normal((30, 8)) * 5 + 3
    s = fit_scaler(x)
    assert np.allclose(standardize(s.means, s), 0.0)
    assert np.allclose(standardize(s.means + s.stds, s), 1.0)
    z = s.transform(x)
    assert np.all(np.abs(z.mean(axis=0)) < 1e-10)
    assert np.all(np.abs(z.std(axis=0, ddof=1) - 1) < 1e-10)
    f = ChannelFeatures.from_model_units(x[0])
    assert np.allclose(standardize(f, s), z[0])


def test_feature_csv_roundtrip(tmp_path, rng):
    t = FeatureTable(rng.standard_normal((5, 8)), rng.uniform(1, 30, 5), np.array([0, 1, 0, 1, 1], bool))
    p = tmp_path / "f.csv"
    write_feature_csv(t, p)
    assert p.read_text().splitlines()[0] == ",".join(CSV_COLUMNS) + ",distance_m,is_nlos"
    back = read_feature_csv(p)
    assert np.array_equal(back.x, t.x) and np.array_equal(back.distance, t.distance)
    assert np.array_equal(back.is_nlos, t.is_nlos)
    write_feature_csv(FeatureTable(t.x), p)
    assert not read_feature_csv(p).labeled


def test_feature_csv_rejects_bad_header(tmp_path):
    p = tmp_path / "f.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(InputError):
        read_feature_csv(p)
