import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import minimize_scalar

from uwb_ranger.errors import DimError, EstimateError, FitError, RankError
from uwb_ranger.kernels import LinearKernel, PolyKernel, count_ops
from uwb_ranger.kpca import KpcaModel, combine_readouts, estimate_kpca, fit_kpca, fit_readouts, project


def phi2(a):
    a1, a2 = a[..., 0], a[..., 1]
    s = np.sqrt(2.0)
    return np.stack([np.ones_like(a1), s * a1, s * a2, a1 ** 2, a2 ** 2, s * a1 * a2], axis=-1)


def explicit_pca_scores(f_train, f_test, m):
    mu = f_train.mean(axis=0)
    fc = f_train - mu
    w, u = np.linalg.eigh(fc.T @ fc)
    u = u[:, ::-1][:, :m]
    return (f_train - mu) @ u, (f_test - mu) @ u


def assert_equal_up_to_sign(got, want, tol):
    for i in range(want.shape[1]):
        s = np.sign(want[:, i] @ got[:, i]) or 1.0
        scale = max(np.abs(want[:, i]).max(), 1.0)
        assert np.max(np.abs(got[:, i] - s * want[:, i])) < tol * scale


def test_explicit_feature_map_identity(rng):
    a, b = rng.standard_normal((2, 10, 2))
    assert np.allclose(np.sum(phi2(a) * phi2(b), axis=1), (np.sum(a * b, axis=1) + 1) ** 2)


def test_matches_explicit_degree2_pca():
    r = np.random.default_rng(8)
    for n in (8, 20, 50):
        a = r.standard_normal((n, 2))
        q = r.standard_normal((6, 2))
        m = fit_kpca(a, kernel=PolyKernel(2), n_components=5)
        want_tr, want_te = explicit_pca_scores(phi2(a), phi2(q), 5)
        assert_equal_up_to_sign(m.train_projections, want_tr, 1e-8)
        assert_equal_up_to_sign(m.project_many(q), want_te, 1e-8)


def test_linear_kernel_is_pca(rng):
    a = rng.standard_normal((30, 4)) @ rng.standard_normal((4, 4))
    q = rng.standard_normal((5, 4))
    m = fit_kpca(a, kernel=LinearKernel(), n_components=4)
    want_tr, want_te = explicit_pca_scores(a, q, 4)
    assert_equal_up_to_sign(m.train_projections, want_tr, 1e-8)
    assert_equal_up_to_sign(m.project_many(q), want_te, 1e-8)


def test_collinear_linear_recovery():
    a = np.array([[0.0], [1.0], [3.0]])
    d = 2.5 * a[:, 0] + 4.0
    m = fit_kpca(a, d, LinearKernel(), 1)
    y = m.train_projections[:, 0]
    centered = a[:, 0] - a[:, 0].mean()
    assert np.allclose(y / y[-1], centered / centered[-1])
    # Unit-norm axis: projection equals the centered input up to sign.
    assert np.allclose(np.abs(y), np.abs(centered))
    assert abs(m.readouts.b1[0]) == pytest.approx(1 / 2.5, rel=1e-8)
    est, _ = m.estimate_many(np.array([[2.0]]))
    assert est[0] == pytest.approx(9.0, rel=1e-8)


def test_in_sample_consistency_and_centering(rng):
    a = rng.standard_normal((25, 3))
    m = fit_kpca(a, kernel=PolyKernel(3), n_components=10)
    y = m.project_many(a)
    assert np.allclose(y, m.train_projections, atol=1e-8)
    assert np.allclose(project(m, a[3]), y[3], atol=1e-10)
    assert np.all(np.abs(m.train_projections.mean(axis=0)) < 1e-8 * np.abs(m.train_projections).max())
    cov = np.cov(m.train_projections.T)
    off = cov - np.diag(np.diag(cov))
    assert np.max(np.abs(off)) < 1e-8 * np.max(np.diag(cov))


def test_rank_error_and_clip(rng):
    a = rng.standard_normal((10, 2))
    with pytest.raises(RankError):
        fit_kpca(a, kernel=LinearKernel(), n_components=3)
    m = fit_kpca(a, kernel=LinearKernel(), n_components=3, clip_to_rank=True)
    assert m.n_components == 2


def test_all_distances_equal(rng):
    with pytest.raises(FitError):
        fit_kpca(rng.standard_normal((10, 2)), np.full(10, 4.0), PolyKernel(2), 3)


def test_combine_examples():
    assert combine_readouts([3.0], [1.0], [0.0], [0.7]) == pytest.approx((3.0, 0.49))
    est, var = combine_readouts([1.0, 2.0], [1.0, 2.0], [0.0, 0.0], [1.0, 1.0])
    assert est == pytest.approx(1.0, abs=1e-12) and var == pytest.approx(0.2, abs=1e-12)
    est0, var0 = combine_readouts([1.0, 2.0, 9.0], [1.0, 2.0, 0.0], [0.0, 0.0, 1.0], [1.0, 1.0, 1.0], slope_tol=1e-12)
    assert (est0, var0) == (est, var)
    with pytest.raises(EstimateError):
        combine_readouts([1.0], [0.0], [0.0], [1.0], slope_tol=1e-9)


@given(st.integers(0, 10**6), st.integers(1, 6))
@settings(max_examples=60)
def test_combine_is_weighted_least_squares(seed, m):
    r = np.random.default_rng(seed)
    b1 = r.uniform(0.2, 3, m) * r.choice([-1, 1], m)
    b0, s, y = r.normal(0, 2, m), r.uniform(0.2, 2, m), r.normal(0, 5, m)
    est, var = combine_readouts(y, b1, b0, s)
    obj = lambda d: np.sum((y - b1 * d - b0) ** 2 / s ** 2)  # noqa: E731
    gold = minimize_scalar(obj, bracket=(est - 50, est + 50), method="golden", tol=1e-12).x
    assert est == pytest.approx(gold, abs=1e-6)
    if m > 1:
        _, var_less = combine_readouts(y[:-1], b1[:-1], b0[:-1], s[:-1])
        assert var <= var_less * (1 + 1e-12)


def test_readout_ols(rng):
    d = rng.uniform(1, 30, 40)
    y = np.column_stack([2 * d + 1 + 0.1 * rng.standard_normal(40), -0.5 * d + 3])
    r = fit_readouts(y, d)
    assert r.b1[0] == pytest.approx(2.0, abs=0.02) and r.b0[1] == pytest.approx(3.0)
    resid = y[:, 0] - (r.b1[0] * d + r.b0[0])
    assert r.sigma_y[0] == pytest.approx(np.sqrt(resid @ resid / 38))
    assert r.sigma_y[1] > 0


def test_axis_scaling_does_not_change_estimates(rng):
    a = rng.standard_normal((40, 3))
    d = 5 + 2 * a[:, 0] + a[:, 1] ** 2 + 0.1 * rng.standard_normal(40)
    m = fit_kpca(a, d, PolyKernel(2), 6)
    q = rng.standard_normal((8, 3))
    est, var = m.estimate_many(q)
    scale = rng.uniform(0.1, 10, 6)
    scaled = KpcaModel(m.kernel, m.train_inputs, m.col_means, m.grand_mean, m.eigenvalues,
                       m.axes * scale, fit_readouts(m.train_projections * scale, d), m.slope_tol)
    est2, var2 = scaled.estimate_many(q)
    assert np.allclose(est, est2, rtol=1e-9) and np.allclose(var, var2, rtol=1e-9)


def test_estimate_and_counts(rng):
    a = rng.standard_normal((30, 3))
    d = rng.uniform(1, 30, 30)
    m = fit_kpca(a, d, PolyKernel(3), 12)
    with count_ops() as ops:
        r = estimate_kpca(m, a[0])
    assert ops.kernel_evals == 30
    assert r.method == "kpca" and r.variance > 0
    with pytest.raises(DimError):
        m.project_many(a, 13)
    unfitted = fit_kpca(a, kernel=PolyKernel(3), n_components=4)
    with pytest.raises(EstimateError):
        unfitted.estimate_many(a)


def test_serialization_roundtrip(rng):
    a = rng.standard_normal((30, 3))
    d = rng.uniform(1, 30, 30)
    m = fit_kpca(a, d, PolyKernel(3), 12)
    back = KpcaModel.from_dict(m.to_dict())
    q = rng.standard_normal((4, 3))
    assert np.allclose(back.estimate_many(q)[0], m.estimate_many(q)[0], atol=1e-12)
