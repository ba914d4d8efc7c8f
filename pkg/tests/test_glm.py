import numpy as np
import pytest
from scipy import optimize

from selboot import glm


@pytest.fixture
def design():
    rng = np.random.default_rng(4)
    X = rng.standard_normal((120, 3)) / np.sqrt(120)
    return rng, X


@pytest.mark.parametrize("loss", glm.LOSSES)
def test_gradient_and_hessian_finite_differences(design, loss):
    rng, X = design
    y = (rng.random(120) < 0.5).astype(float) if loss == "logistic" else rng.standard_normal(120)
    b = rng.standard_normal(3)
    w = rng.uniform(0.5, 2.0, 120)
    g = glm.gradient(X, y, b, loss, w)
    fd = optimize.approx_fprime(b, lambda v: glm.loss_value(X, y, v, loss, w), 1e-7)
    assert np.allclose(g, fd, atol=1e-5)
    H = glm.hessian(X, b, loss, w)
    Hfd = np.array([(glm.gradient(X, y, b + 1e-6 * e, loss, w) - glm.gradient(X, y, b - 1e-6 * e, loss, w))
                    / 2e-6 for e in np.eye(3)])
    assert np.allclose(H, Hfd, atol=1e-6)
    assert np.allclose(glm.hessian(X, b, loss, w, cols=[0, 2]), H[:, [0, 2]])


@pytest.mark.parametrize("loss", glm.LOSSES)
def test_fit_mle_zero_gradient(design, loss):
    rng, X = design
    eta = X @ np.array([3.0, -2.0, 0.0])
    y = (rng.random(120) < 1 / (1 + np.exp(-eta))).astype(float) if loss == "logistic" \
        else eta + rng.standard_normal(120)
    b = glm.fit_mle(X, y, loss)
    assert np.max(np.abs(glm.gradient(X, y, b, loss))) < 1e-8


def test_fit_mle_accepts_fractional_logistic_response(design):
    _, X = design
    mean = 1 / (1 + np.exp(-X @ np.array([1.0, 0.5, -1.0])))
    assert np.allclose(glm.fit_mle(X, mean, "logistic"), [1.0, 0.5, -1.0], atol=1e-8)


def test_rank_deficient_raises(design):
    _, X = design
    Xd = np.hstack([X, X[:, :1]])
    with pytest.raises(np.linalg.LinAlgError):
        glm.fit_mle(Xd, np.ones(120))


@pytest.mark.parametrize("loss", glm.LOSSES)
def test_batch_matches_single(design, loss):
    rng, X = design
    y = (rng.random(120) < 0.5).astype(float) if loss == "logistic" else rng.standard_normal(120)
    idx = rng.integers(0, 120, (5, 120))
    betas, ok = glm.fit_mle_batch(X[idx], y[idx], loss)
    assert ok.all()
    for b, rows in zip(betas, idx):
        assert np.allclose(b, glm.fit_mle(X[rows], y[rows], loss), atol=1e-7)


def test_batch_flags_separation():
    X = np.array([[-1.0], [-0.5], [0.5], [1.0]])
    y = np.array([0.0, 0.0, 1.0, 1.0])
    _, ok = glm.fit_mle_batch(X[None], y[None], "logistic")
    assert not ok[0]


def test_unknown_loss():
    with pytest.raises(ValueError):
        glm.check_loss("poisson")
