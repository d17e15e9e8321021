import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from ntype_phd.gaussian import (
    CovarianceError,
    GaussianComponent,
    batch_mvn_logpdf,
    batch_update_terms,
    gaussian_product_marginal,
    mvn_logpdf,
    predict_component,
    robust_cholesky,
    update_component,
)
from ntype_phd.phd import box_observation, cv_process_noise, cv_transition

# frozen from scipy.stats.multivariate_normal
MVN2_LOGPDF = -4.117684960377057
SCALAR_Q = 0.2196956447338612  # N(1; 0, 2)


def test_mvn_logpdf_golden():
    assert mvn_logpdf([1.0, 2.0], [0.0, 0.0], [[2.0, 0.5], [0.5, 1.0]]) == pytest.approx(MVN2_LOGPDF, abs=1e-12)


def test_mvn_logpdf_rejects_bad_input():
    with pytest.raises(ValueError):
        mvn_logpdf([1.0, 2.0], [0.0], np.eye(2))
    with pytest.raises(ValueError):
        mvn_logpdf([np.nan, 0.0], [0.0, 0.0], np.eye(2))


def test_scalar_kalman_update():
    c, q = update_component(GaussianComponent(0.7, [0.0], [[1.0]]), [1.0], [[1.0]], [[1.0]])
    assert c.mean[0] == pytest.approx(0.5, abs=1e-14)
    assert c.cov[0, 0] == pytest.approx(0.5, abs=1e-14)
    assert c.weight == 0.7
    assert q == pytest.approx(SCALAR_Q, abs=1e-14)


def test_box_update_golden():
    # hand-computed Kalman gain with P = diag(100,100,25,25,20,20), R = 36 I
    c = GaussianComponent(1.0, [100, 50, 0, 0, 20, 40], np.diag([100.0, 100, 25, 25, 20, 20]))
    post, q = update_component(c, [102, 51, 21, 39], box_observation(), 36 * np.eye(4))
    np.testing.assert_allclose(post.mean, [101.47058824, 50.73529412, 0, 0, 20.35714286, 39.64285714], atol=1e-7)
    np.testing.assert_allclose(np.diag(post.cov), [26.47058824, 26.47058824, 25, 25, 12.85714286, 12.85714286], atol=1e-7)
    assert q == pytest.approx(3.2075594527451504e-06, rel=1e-10)


def test_predict_football_matrices():
    c = GaussianComponent(0.5, [10, 20, 1, -2, 30, 60], np.diag([4.0, 4, 1, 1, 2, 2]))
    out = predict_component(c, cv_transition(), cv_process_noise(5.0), 0.99)
    assert out.weight == pytest.approx(0.495)
    np.testing.assert_allclose(out.mean, [11, 18, 1, -2, 30, 60])
    expected = np.zeros((6, 6))
    expected[[0, 1, 2, 3, 4, 5], [0, 1, 2, 3, 4, 5]] = [11.25, 11.25, 26, 26, 27, 27]
    expected[0, 2] = expected[2, 0] = expected[1, 3] = expected[3, 1] = 13.5
    np.testing.assert_allclose(out.cov, expected, atol=1e-12)


def test_predict_rejects_bad_survival():
    with pytest.raises(ValueError):
        predict_component(GaussianComponent(1, [0.0], [[1.0]]), [[1.0]], [[1.0]], 1.5)


def test_product_marginal_quadrature_golden():
    mean, cov = gaussian_product_marginal([[2.0]], [[0.5]], [1.0], [[0.3]])
    val = np.exp(mvn_logpdf([2.5], mean, cov))
    assert val == pytest.approx(0.2842838493259399, abs=1e-12)


@given(
    st.floats(-3, 3),
    st.floats(0.1, 4),
    st.floats(-5, 5),
    st.floats(0.1, 4),
    st.floats(-8, 8),
)
def test_product_marginal_matches_quadrature(M, P1, m2, P2, y):
    mean, cov = gaussian_product_marginal([[M]], [[P1]], [m2], [[P2]])
    closed = np.exp(mvn_logpdf([y], mean, cov))

    def f(x):
        return np.exp(-0.5 * (y - M * x) ** 2 / P1 - 0.5 * (x - m2) ** 2 / P2) / (2 * np.pi * np.sqrt(P1 * P2))

    num, _ = integrate.quad(f, m2 - 20 * np.sqrt(P2), m2 + 20 * np.sqrt(P2), epsabs=1e-13, epsrel=1e-12, limit=200)
    assert closed == pytest.approx(num, abs=1e-6)


def test_robust_cholesky_jitter_and_failure():
    # rank deficient but PSD: rescued by jitter
    v = np.array([1.0, 2.0, 3.0])
    L = robust_cholesky(np.outer(v, v))
    assert np.all(np.isfinite(L))
    with pytest.raises(CovarianceError):
        robust_cholesky(np.diag([1.0, -5.0]))


def test_batched_forms_agree_with_scalar(rng):
    H, R = box_observation(), 36 * np.eye(4)
    means = rng.normal(0, 5, size=(5, 6))
    A = rng.normal(size=(5, 6, 6))
    covs = A @ np.swapaxes(A, 1, 2) + 3 * np.eye(6)
    Z = rng.normal(0, 5, size=(3, 4))
    eta, L, K, P_post = batch_update_terms(means, covs, H, R)
    logq = batch_mvn_logpdf(Z, eta, L)
    for n in range(5):
        for m in range(3):
            post, q = update_component(GaussianComponent(1, means[n], covs[n]), Z[m], H, R)
            assert np.log(q) == pytest.approx(logq[m, n], abs=1e-9)
            np.testing.assert_allclose(means[n] + K[n] @ (Z[m] - eta[n]), post.mean, atol=1e-9)
        np.testing.assert_allclose(P_post[n], post.cov, atol=1e-9)


@given(st.integers(0, 10_000))
def test_update_keeps_covariance_valid(seed):
    r = np.random.default_rng(seed)
    A = r.normal(size=(6, 6))
    c = GaussianComponent(1.0, r.normal(size=6), A @ A.T + 1e-3 * np.eye(6))
    post, q = update_component(c, r.normal(size=4), box_observation(), np.eye(4) * r.uniform(0.1, 10))
    post.check()
    assert q >= 0
