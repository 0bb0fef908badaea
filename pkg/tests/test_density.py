import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from oracles import scalar_normal_logpdf
from regimehmm.core import GaussianComponent, GaussianMixture, ModelError
from regimehmm.density import (
    LOG_UNDERFLOW,
    floor_covariance,
    gm_logpdf,
    gm_moments,
    multinormal_logpdf,
    underflow_clamps,
    variance_floor,
)

finite = st.floats(-5, 5, allow_nan=False)


def _mixture(ws, mus, sds):
    return GaussianMixture(np.array(ws), tuple(GaussianComponent([m], [[s * s]]) for m, s in zip(mus, sds)))


def test_standard_normal_at_mean():
    assert multinormal_logpdf(0.0, GaussianComponent([0.0], [[1.0]])) == pytest.approx(-0.9189385332046727, abs=1e-15)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_identity_cov_at_mean(n):
    mean = np.arange(n, dtype=float)
    v = multinormal_logpdf(mean, GaussianComponent(mean, np.eye(n)))
    assert v == pytest.approx(-0.5 * n * np.log(2 * np.pi), abs=1e-13)


def test_state1_component_against_scalar_oracle():
    v = multinormal_logpdf(0.012, GaussianComponent([0.148], [[0.045**2]]))
    assert v == pytest.approx(scalar_normal_logpdf(0.012, 0.148, 0.045**2), rel=1e-12)
    assert v == pytest.approx(-2.3847593242397687, rel=1e-14)  # pin


def test_bivariate_against_scipy():
    from scipy.stats import multivariate_normal

    cov = np.array([[2.0, 0.3], [0.3, 0.5]])
    comp = GaussianComponent([0.1, -0.2], cov)
    x = np.array([[0.3, 0.4], [-1.0, 2.0]])
    np.testing.assert_allclose(multinormal_logpdf(x, comp), multivariate_normal([0.1, -0.2], cov).logpdf(x), rtol=1e-12)


def test_dimension_mismatch():
    with pytest.raises(ModelError):
        multinormal_logpdf([0.0, 1.0, 2.0], GaussianComponent([0.0, 0.0], np.eye(2)))


def test_non_pd_names_eigenvalue():
    comp = GaussianComponent([0.0, 0.0], [[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(ModelError, match="eigenvalue"):
        multinormal_logpdf([0.0, 0.0], comp)


def test_single_component_mixture_reduces():
    comp = GaussianComponent([0.3], [[0.2]])
    for x in [-1.0, 0.3, 2.0]:
        assert gm_logpdf(x, GaussianMixture(np.array([1.0]), (comp,))) == multinormal_logpdf(x, comp)


def test_equal_halves_equal_component():
    comp = GaussianComponent([0.3], [[0.2]])
    gm = GaussianMixture(np.array([0.5, 0.5]), (comp, comp))
    assert gm_logpdf(1.1, gm) == pytest.approx(multinormal_logpdf(1.1, comp), abs=1e-14)


def test_state1_mixture_linear_space_oracle(reference_model):
    gm = reference_model.emissions[0]
    lin = 0.88 * np.exp(scalar_normal_logpdf(0.13, 0.13, 0.045**2)) + 0.12 * np.exp(
        scalar_normal_logpdf(0.13, 0.28, 0.28**2)
    )
    assert gm_logpdf(0.13, gm) == pytest.approx(np.log(lin), rel=1e-12)
    assert gm_logpdf(0.13, gm) == pytest.approx(2.073128922740643, rel=1e-14)  # pin


def test_state1_moments(reference_model):
    mu, cov = gm_moments(reference_model.emissions[0])
    assert 100 * mu[0] == pytest.approx(0.88 * 13 + 0.12 * 28, abs=1e-12)
    oracle = np.sqrt(0.88 * 4.5**2 + 0.12 * 28**2 + 0.88 * (13 - 14.8) ** 2 + 0.12 * (28 - 14.8) ** 2)
    assert 100 * np.sqrt(cov[0, 0]) == pytest.approx(oracle, rel=1e-12)
    assert abs(100 * np.sqrt(cov[0, 0]) - 11.6) <= 0.1


def test_single_component_moments():
    comp = GaussianComponent([0.1, 0.2], [[1.0, 0.1], [0.1, 2.0]])
    mu, cov = gm_moments(GaussianMixture(np.array([1.0]), (comp,)))
    np.testing.assert_array_equal(mu, comp.mean)
    np.testing.assert_allclose(cov, comp.cov, atol=1e-15)


def test_moments_against_sampling():
    rng = np.random.default_rng(11)
    gm = _mixture([0.3, 0.7], [-1.0, 2.0], [0.5, 1.5])
    N = 10**6
    k = rng.random(N) < 0.3
    x = np.where(k, rng.normal(-1.0, 0.5, N), rng.normal(2.0, 1.5, N))
    mu, cov = gm_moments(gm)
    se_mean = np.sqrt(cov[0, 0] / N)
    assert abs(x.mean() - mu[0]) < 3 * se_mean
    m4 = np.mean((x - x.mean()) ** 4)
    se_var = np.sqrt((m4 - cov[0, 0] ** 2) / N)
    assert abs(x.var() - cov[0, 0]) < 3 * se_var


def test_underflow_clamp_counts():
    underflow_clamps.reset()
    v = multinormal_logpdf(1e6, GaussianComponent([0.0], [[1e-4]]))
    assert v == LOG_UNDERFLOW
    assert underflow_clamps.count >= 1
    underflow_clamps.reset()
    assert underflow_clamps.count == 0


def test_variance_floor_and_clamp():
    X = np.array([[1.0, 10.0], [2.0, 20.0], [3.0, 30.0]])
    med = np.median(X.var(axis=0))
    assert variance_floor(X, 1e-6) == pytest.approx(1e-6 * med)
    assert variance_floor(np.ones((4, 1)), 1e-6) == 1e-6
    cov = np.array([[1.0, 0.0], [0.0, 1e-12]])
    fl = floor_covariance(cov, 1e-4)
    assert np.linalg.eigvalsh(fl).min() == pytest.approx(1e-4)
    assert floor_covariance(np.eye(2), 1e-4) is not None
    np.testing.assert_array_equal(floor_covariance(np.eye(2), 1e-4), np.eye(2))


@settings(max_examples=30, deadline=None)
@given(
    w=st.floats(0.05, 0.95),
    m1=st.floats(-2, 2), m2=st.floats(-2, 2),
    s1=st.floats(0.2, 2), s2=st.floats(0.2, 2),
)
def test_mixture_integrates_to_one(w, m1, m2, s1, s2):
    gm = _mixture([w, 1 - w], [m1, m2], [s1, s2])
    mu, cov = gm_moments(gm)
    sd = np.sqrt(cov[0, 0])
    val, _ = integrate.quad(lambda x: np.exp(gm_logpdf(x, gm)), mu[0] - 10 * sd, mu[0] + 10 * sd, limit=200)
    assert abs(val - 1.0) < 1e-3


@settings(max_examples=50, deadline=None)
@given(x=finite, m1=finite, m2=finite, s1=st.floats(0.1, 3), s2=st.floats(0.1, 3), w=st.floats(0.01, 0.99))
def test_permutation_invariance(x, m1, m2, s1, s2, w):
    a = gm_logpdf(x, _mixture([w, 1 - w], [m1, m2], [s1, s2]))
    b = gm_logpdf(x, _mixture([1 - w, w], [m2, m1], [s2, s1]))
    assert a == pytest.approx(b, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(x1=finite, x2=finite, m1=finite, m2=finite, c=st.floats(-0.9, 0.9), s=st.floats(0.2, 3))
def test_symmetry_about_mean(x1, x2, m1, m2, c, s):
    cov = np.array([[s, c * np.sqrt(s)], [c * np.sqrt(s), 1.0]])
    comp = GaussianComponent([m1, m2], cov)
    x = np.array([x1, x2])
    a = multinormal_logpdf(x, comp)
    b = multinormal_logpdf(2 * comp.mean - x, comp)
    assert a == pytest.approx(b, rel=1e-12, abs=1e-12)
