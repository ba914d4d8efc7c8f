import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from selboot import randomization as rz
from selboot.randomization import FAMILIES, RandomizationDist

# frozen quadrature oracle: logistic(1) log-density at 1.3
LOGISTIC_LOGPDF_1_3 = -1.7820169076659844


@pytest.mark.parametrize("family,w,expected", [
    ("gaussian", 0.0, -0.5 * np.log(2 * np.pi)),
    ("laplace", 0.0, np.log(0.5)),
    ("logistic", 1.3, LOGISTIC_LOGPDF_1_3),
])
def test_log_density_values(family, w, expected):
    d = RandomizationDist(family, 1.0, 1)
    assert rz.log_density(d, [w]) == pytest.approx(expected, abs=1e-12)


def test_logistic_value_is_normalized_density():
    d = RandomizationDist("logistic", 1.0, 1)
    total, _ = integrate.quad(lambda x: np.exp(d.log_density([x])), -np.inf, np.inf)
    assert total == pytest.approx(1.0, abs=1e-8)
    # the frozen value is the normalized density, not an unnormalized kernel
    assert np.exp(LOGISTIC_LOGPDF_1_3) == pytest.approx(stats.logistic.pdf(1.3), rel=1e-12)


@pytest.mark.parametrize("family", FAMILIES)
@pytest.mark.parametrize("scale", [0.5, 1.0, 3.0])
def test_density_integrates_to_one(family, scale):
    d = RandomizationDist(family, scale, 1)
    total = sum(integrate.quad(lambda x: np.exp(d.log_density([x])), lo, hi, limit=200)[0]
                for lo, hi in ((-np.inf, 0), (0, np.inf)))
    assert total == pytest.approx(1.0, abs=1e-6)


def test_log_density_sums_coordinates():
    d = RandomizationDist("laplace", 2.0, 3)
    w = np.array([0.3, -1.0, 2.5])
    one = d.resized(1)
    assert d.log_density(w) == pytest.approx(sum(one.log_density([x]) for x in w))


@pytest.mark.parametrize("family,scale,w,expected", [
    ("gaussian", 2.0, [1.5, -3.0], [-1.5 / 4, 3.0 / 4]),
    ("logistic", 1.0, [0.0], [0.0]),
    ("laplace", 1.0, [2.0], [-1.0]),
    ("laplace", 1.0, [0.0], [0.0]),
])
def test_grad_log_density_values(family, scale, w, expected):
    d = RandomizationDist(family, scale, len(w))
    assert np.allclose(rz.grad_log_density(d, w), expected, atol=1e-12)


@pytest.mark.parametrize("family", FAMILIES)
def test_grad_matches_finite_differences(family):
    rng = np.random.default_rng(11)
    d = RandomizationDist(family, 1.7, 1)
    pts = rng.uniform(-6, 6, 100)
    pts = pts[np.abs(pts) > 1e-3]
    h = 1e-5
    fd = (d.log_density((pts + h)[:, None]) - d.log_density((pts - h)[:, None])) / (2 * h)
    an = d.grad_log_density(pts[:, None])[:, 0]
    assert np.allclose(an, fd, rtol=1e-5, atol=1e-8)


def test_dimension_mismatch_raises():
    d = RandomizationDist("gaussian", 1.0, 2)
    with pytest.raises(ValueError):
        d.log_density([1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        d.grad_log_density([1.0])


@pytest.mark.parametrize("bad", [dict(family="cauchy"), dict(family="gaussian", scale=0.0),
                                 dict(family="gaussian", scale=-1.0), dict(family="laplace", dim=0)])
def test_invalid_parameters(bad):
    with pytest.raises(ValueError):
        RandomizationDist(**{"scale": 1.0, "dim": 1, **bad})


@pytest.mark.parametrize("family", FAMILIES)
def test_survival_at_zero(family):
    assert rz.survival(RandomizationDist(family, 2.3), 0.0) == pytest.approx(0.5, abs=1e-15)


@pytest.mark.parametrize("family,scale,x,expected", [
    ("laplace", 1.0, np.log(2), 0.25),
    ("gaussian", 2.0, 2.0, 1 - stats.norm.cdf(1.0)),
])
def test_survival_values(family, scale, x, expected):
    d = RandomizationDist(family, scale)
    assert d.survival(x) == pytest.approx(expected, abs=1e-12)
    # quadrature of the density tail
    tail, _ = integrate.quad(lambda u: np.exp(d.log_density([u])), x, np.inf)
    assert tail == pytest.approx(expected, abs=1e-8)


@pytest.mark.parametrize("family,tol", [("gaussian", 1e-3), ("logistic", 1e-3), ("laplace", 1e-2)])
def test_survival_limits_and_monotone(family, tol):
    s = 1.5
    d = RandomizationDist(family, s)
    assert d.survival(-10 * s) == pytest.approx(1.0, abs=tol)
    assert d.survival(10 * s) == pytest.approx(0.0, abs=tol)
    xs = np.linspace(-8, 8, 401)
    assert np.all(np.diff(d.survival(xs)) < 0)


@given(x=st.floats(-50, 50), scale=st.floats(0.1, 10),
       family=st.sampled_from(FAMILIES))
@settings(max_examples=200, deadline=None)
def test_survival_symmetry_property(x, scale, family):
    d = RandomizationDist(family, scale)
    v = d.survival(x)
    assert 0.0 <= v <= 1.0
    assert v + d.survival(-x) == pytest.approx(1.0, abs=1e-12)
    assert np.exp(d.log_survival(x)) == pytest.approx(v, rel=1e-9, abs=1e-300)


def test_sample_determinism():
    d = RandomizationDist("logistic", 1.0, 5)
    a = rz.sample(d, np.random.default_rng(42))
    b = rz.sample(d, np.random.default_rng(42))
    assert a.shape == (5,)
    assert np.array_equal(a, b)


def test_sample_moments():
    rng = np.random.default_rng(3)
    g = RandomizationDist("gaussian", 1.0).sample(rng, 10**5)[:, 0]
    assert abs(g.mean()) < 0.02
    lap = RandomizationDist("laplace", 1.0).sample(rng, 10**5)[:, 0]
    assert abs(lap.var() - 2.0) < 0.1


@pytest.mark.parametrize("family", FAMILIES)
def test_sample_matches_survival(family):
    d = RandomizationDist(family, 0.8)
    x = d.sample(np.random.default_rng(5), 10**5)[:, 0]
    ks = stats.kstest(x, d.cdf).statistic
    assert ks < 0.01


@pytest.mark.parametrize("family,var", [("gaussian", 4.0), ("laplace", 8.0),
                                        ("logistic", np.pi**2 * 4 / 3)])
def test_variance_property(family, var):
    assert RandomizationDist(family, 2.0).variance == pytest.approx(var)


def test_lipschitz_constant_and_config():
    assert RandomizationDist("gaussian").lipschitz_constant == np.inf
    assert RandomizationDist("laplace", 2.0).lipschitz_constant == 0.5
    d = RandomizationDist.from_config({"family": "Laplace", "scale": 0.5}, dim=4)
    assert (d.family, d.scale, d.dim) == ("laplace", 0.5, 4)
    assert RandomizationDist.from_config(None).family == "logistic"
