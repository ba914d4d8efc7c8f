import numpy as np
import pytest
from scipy import integrate, stats

from selboot import exact1d, harness, multiview
from selboot.constraints import NonNeg, ProductRegion, Unconstrained
from selboot.exact1d import SimpleExample
from selboot.randomization import RandomizationDist
from selboot.samplers import (ChainState, SamplerConfig, WeightedSample, ess, langevin_step,
                              run_chain, run_selective_sampler, run_weighted_optimization_sampler,
                              run_wild_bootstrap_sampler, sample_optimization_variables)
from selboot.targets import TargetSpec


def state(x, blocks, eta=0.1, seed=0):
    return ChainState(np.atleast_2d(np.asarray(x, dtype=float)), blocks, eta, 0,
                      np.random.default_rng(seed))


def test_step_without_force_or_noise_is_fixed_point():
    blocks = [("a", NonNeg(2)), ("b", Unconstrained(1))]
    s = state([0.5, 1.0, -2.0], blocks)
    out = langevin_step(s, lambda x: np.zeros_like(x), noise=np.zeros((1, 3)))
    assert np.array_equal(out.x, s.x) and out.iteration == 1


def test_step_projects_constrained_block():
    s = state([0.1], [("v", NonNeg(1))], eta=1.0)
    out = langevin_step(s, lambda x: np.full_like(x, -0.4), noise=np.zeros((1, 1)))
    assert out.x[0, 0] == 0.0
    out = langevin_step(s, lambda x: np.full_like(x, -0.4), noise=np.zeros((1, 1)), boundary="reflect")
    assert out.x[0, 0] == pytest.approx(0.3)


def test_step_nonfinite_gradient_names_block():
    s = state([1.0, 1.0], [("free", Unconstrained(1)), ("opt", NonNeg(1))])
    with pytest.raises(FloatingPointError, match="opt"):
        langevin_step(s, lambda x: np.array([[0.0, np.nan]]))


def test_unconstrained_gaussian_moments():
    cfg = SamplerConfig(n_samples=200000, burnin=10000, eta=0.05, n_chains=20, seed=1)
    draws, info = run_chain(np.zeros(1), [("x", Unconstrained(1))], lambda x: -x, cfg)
    assert draws.shape == (200000, 1) and info["eta"] == 0.05
    assert abs(draws.mean()) < 0.03
    assert abs(draws.var() - 1) < 0.05


@pytest.mark.parametrize("boundary,eta,tol", [("reflect", 0.02, 0.03), ("project", 0.02, 0.08)])
def test_truncated_bivariate_gaussian_mean(boundary, eta, tol):
    S = np.array([[1.0, 0.5], [0.5, 1.0]])
    P = np.linalg.inv(S)
    cfg = SamplerConfig(n_samples=100000, burnin=2000, eta=eta, n_chains=100, thin=2, seed=2,
                        boundary=boundary)
    draws, _ = run_chain(np.ones(2), [("x", NonNeg(2))], lambda x: -x @ P, cfg)
    dens = lambda b, a: stats.multivariate_normal(cov=S).pdf([a, b])
    Z = integrate.dblquad(dens, 0, 8, 0, 8)[0]
    m1 = integrate.dblquad(lambda b, a: a * dens(b, a), 0, 8, 0, 8)[0] / Z
    assert np.all(draws >= 0)
    # projection piles mass on the boundary, an O(sqrt(eta)) bias
    assert np.allclose(draws.mean(0), m1, atol=tol)


def test_chain_seed_determinism_and_halving():
    cfg = SamplerConfig(n_samples=500, burnin=50, n_chains=5, seed=9)
    a, _ = run_chain(np.zeros(2), [("x", Unconstrained(2))], lambda x: -x, cfg)
    b, _ = run_chain(np.zeros(2), [("x", Unconstrained(2))], lambda x: -x, cfg)
    assert np.array_equal(a, b)

    def blowup(x):
        g = -x
        g[np.abs(x[:, 0]) > 0.5] = np.nan
        return g

    cfg = SamplerConfig(n_samples=400, burnin=200, eta=4.0, n_chains=20, seed=0)
    draws, info = run_chain(np.zeros(1), [("x", Unconstrained(1))], blowup, cfg)
    assert info["halvings"] >= 1 and info["eta"] < 4.0
    assert np.all(np.abs(draws) <= 0.5)


def test_config_from_dict():
    cfg = SamplerConfig.from_dict({"steps": 100, "burnin": 5, "eta": 0.1, "min_ess": 50})
    assert (cfg.n_samples, cfg.burnin, cfg.eta, cfg.min_ess) == (100, 5, 0.1, 50)
    with pytest.raises(ValueError):
        SamplerConfig.from_dict({"stepsize": 1})
    with pytest.raises(ValueError):
        SamplerConfig(boundary="wrap")


def test_weighted_sample_normalization():
    lw = np.random.default_rng(0).normal(0, 3, 1000)
    s = WeightedSample(np.zeros(1000), lw, np.zeros(1))
    assert s.weights().sum() == pytest.approx(1.0, abs=1e-12)
    assert ess(np.zeros(10)) == pytest.approx(10)
    with pytest.raises(ValueError):
        WeightedSample(np.zeros(2), np.array([0.0, np.nan]), np.zeros(1))


# the one-dimensional thresholding geometry ----------------------------------------

def simple(threshold=1.0, family="logistic", scale=1.0, mu=0.0, n=100):
    return SimpleExample(n, threshold, mu, RandomizationDist(family, scale))


def flat_problem(theta=0.3):
    ex = simple(0.0, "gaussian", 1e6)
    target, recon = exact1d.simple_problem(ex, T_obs=0.3, v_obs=1.0)
    return ex, target.with_theta([theta]), recon


def test_selective_sampler_flat_randomization_recovers_gaussian():
    ex, target, recon = flat_problem(0.3)
    cfg = SamplerConfig(n_samples=200000, burnin=500, eta=0.05, n_chains=1000, seed=3)
    smp = run_selective_sampler(target, recon, ex.randomization, config=cfg)
    T = smp.target_draws[:, 0]
    assert abs(T.mean() - 0.3) < 0.03 and abs(T.var() - 1) < 0.05
    assert np.all(smp.log_weights == 0)


def test_selective_sampler_determinism():
    ex = simple()
    target, recon = exact1d.simple_problem(ex)
    cfg = SamplerConfig(n_samples=1000, burnin=100, n_chains=10, seed=4)
    a = run_selective_sampler(target, recon, ex.randomization, config=cfg)
    b = run_selective_sampler(target, recon, ex.randomization, config=cfg)
    assert np.array_equal(a.target_draws, b.target_draws)
    assert np.array_equal(a.opt_draws, b.opt_draws)
    assert np.all(a.opt_draws >= ex.threshold)


@pytest.mark.parametrize("family", ["logistic", "laplace", "gaussian"])
def test_selective_sampler_matches_oracle(family):
    ex = simple(1.0, family)
    target, recon = exact1d.simple_problem(ex)
    cfg = SamplerConfig(n_samples=50000, burnin=1000, eta=0.02, n_chains=500, thin=2, seed=5)
    smp = run_selective_sampler(target, recon, ex.randomization, config=cfg)
    ts = np.arange(-2.0, 3.0)
    emp = np.array([np.mean(smp.target_draws[:, 0] <= t) for t in ts])
    assert np.max(np.abs(emp - exact1d.exact_plugin_cdf(ex, ts))) < 0.02


def test_weighted_sampler_flat_weights_equal():
    ex, target, recon = flat_problem(0.3)
    cfg = SamplerConfig(n_samples=2000, burnin=100, n_chains=20, seed=6)
    wg = run_weighted_optimization_sampler(target, recon, ex.randomization, [[0.3]], config=cfg)
    w = np.exp(wg.log_weights[0] - wg.log_weights[0].max())
    assert np.allclose(w, 1.0, atol=1e-6)
    assert wg.ess[0] == pytest.approx(2000, rel=1e-6)


def test_weighted_sampler_matches_oracle_per_theta():
    ex = simple(1.0)
    target, recon = exact1d.simple_problem(ex)
    cfg = SamplerConfig(n_samples=50000, burnin=1000, eta=0.01, n_chains=500, thin=2, seed=7)
    mus = np.array([-0.1, 0.0, 0.1])
    wg = run_weighted_optimization_sampler(target, recon, ex.randomization,
                                           (np.sqrt(ex.n) * mus)[:, None], config=cfg)
    ts = np.arange(-2.0, 3.0)
    for i, mu in enumerate(mus):
        exact = exact1d.exact_plugin_cdf(ex.with_mu(mu), ts)
        assert np.max(np.abs(wg.cdf(ts + np.sqrt(ex.n) * mu, i) - exact)) < 0.02


def test_weighted_pivot_monotone_in_theta_gaussian():
    ex = simple(0.5, "gaussian")
    target, recon = exact1d.simple_problem(ex, T_obs=0.8)
    grid = np.linspace(-3, 3, 61)[:, None]
    cfg = SamplerConfig(n_samples=20000, burnin=500, eta=0.02, n_chains=200, seed=8)
    wg = run_weighted_optimization_sampler(target, recon, ex.randomization, grid, config=cfg)
    piv = wg.one_sided_pivots()
    # the oracle is strictly decreasing; the weighted estimate is up to MC noise
    assert np.all(np.diff(piv) <= 0.01)
    assert piv[0] - piv[-1] > 0.9
    assert np.all(wg.low_ess == (wg.ess < cfg.min_ess))
    # the oracle at each theta: P(Z <= T_obs - theta | selection, mu = theta / sqrt(n))
    exact = [exact1d.exact_plugin_cdf(ex.with_mu(th / 10), 0.8 - th) for th in grid[:, 0]]
    assert np.all(np.diff(exact) < 0)
    assert np.max(np.abs(piv - exact)) < 0.03


def test_weighted_sampler_validation():
    ex = simple()
    target, recon = exact1d.simple_problem(ex)
    with pytest.raises(ValueError):
        run_weighted_optimization_sampler(target, recon, ex.randomization, np.zeros((0, 1)))
    with pytest.raises(ValueError):
        run_weighted_optimization_sampler(target, recon, ex.randomization, None, "pairs_bootstrap")


def test_optimization_chain_respects_constraints():
    ex = simple(2.0)
    _, recon = exact1d.simple_problem(ex, T_obs=0.0)
    cfg = SamplerConfig(n_samples=3000, burnin=100, n_chains=30, seed=1)
    V, info = sample_optimization_variables(recon, ex.randomization, config=cfg)
    assert V.shape == (3000, 1) and np.all(V >= 2.0)
    assert info["chain_length"] == 30 * (100 + 100)


def _wild_fixture(y, threshold=1.0, scale=1.0):
    ex = SimpleExample(len(y), threshold, 0.0, RandomizationDist("logistic", scale), y)
    target, recon = exact1d.simple_problem(ex)
    W = ((y - y.mean()) / np.sqrt(len(y)))[None, :]
    return ex, target, recon, W


def test_wild_sampler_flat_randomization_moments():
    y = np.random.default_rng(0).standard_normal(30)
    ex, target, recon, W = _wild_fixture(y, scale=1e6)
    cfg = SamplerConfig(n_samples=100000, burnin=500, eta=0.05, n_chains=500, seed=2)
    smp = run_wild_bootstrap_sampler(W, target, recon, ex.randomization, config=cfg)
    assert not smp.info["degenerate"]
    assert abs(smp.target_draws.mean()) < 0.03
    assert abs(smp.target_draws.var() - W @ W.T) < 0.05


def test_wild_sampler_degenerate_residuals():
    ex, target, recon, W = _wild_fixture(np.full(20, 0.4))
    smp = run_wild_bootstrap_sampler(W, target, recon, ex.randomization,
                                     config=SamplerConfig(n_samples=200, burnin=10, seed=0))
    assert smp.info["degenerate"]
    assert np.allclose(smp.target_draws, target.theta, atol=1e-12)
    with pytest.raises(ValueError, match="smooth"):
        run_wild_bootstrap_sampler(W, target, recon, ex.randomization, "mammen")


def test_wild_sampler_matches_weighted_bootstrap_oracle():
    y = np.random.default_rng(11).standard_normal(200)
    ex, *_ = _wild_fixture(y)
    ts = np.arange(-2.0, 3.0)
    cfg = SamplerConfig(n_samples=50000, burnin=1000, eta="auto", n_chains=500, thin=2, seed=3)
    wild = exact1d.simple_wild_cdf(ex, ts, "langevin", config=cfg)
    boot = exact1d.exact_boot_cdf(ex, ts, B=20000, rng=4)
    assert np.max(np.abs(wild - boot)) < 0.03


@pytest.mark.slow
def test_cross_sampler_agreement_on_lasso_fixture():
    sc = harness.Scenario(n=100, p=10, signals={"k": 3, "size": 0.3}, replicates=100,
                          views=[{"procedure": "lasso", "lam": 2.0}])
    cfg = SamplerConfig(n_samples=40000, n_chains=200, thin=5, eta="auto", burnin=1000)
    for seed in range(3):
        rng = np.random.default_rng(seed)
        X, y, _ = harness.generate(sc, rng)
        vr = multiview.run_views(X, y, harness._plan(sc), rng)
        kw = dict(config=cfg, rng=1, grid_points=0, bootstrap_reps=500)
        a = multiview.infer(X, y, vr.recon, vr.active, method="weighted", **kw)
        b = multiview.infer(X, y, vr.recon, vr.active, method="plugin", **kw)
        assert max(abs(r.pivot - s.pivot) for r, s in zip(a, b)) < 0.03
