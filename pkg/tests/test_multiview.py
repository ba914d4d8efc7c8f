import numpy as np
import pytest
from scipy import stats

from selboot import harness, multiview, selectors
from selboot.multiview import ViewPlan
from selboot.randomization import RandomizationDist
from selboot.samplers import SamplerConfig


def data(n=100, p=6, seed=0, signal=(3.0, 0, 0, 0, 0, 0)):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    X = (X - X.mean(0)) / X.std(0) / np.sqrt(n)
    y = X @ (np.sqrt(n) * np.asarray(signal)[:p] / 3) + rng.standard_normal(n)
    return X, y


@pytest.mark.parametrize("bad", [{"views": []}, {"views": [{"procedure": "ridge"}]},
                                 {"views": [{}], "final_model_rule": "majority"}])
def test_plan_validation(bad):
    with pytest.raises(ValueError):
        ViewPlan.from_dict(bad)


def test_plan_roundtrip():
    plan = ViewPlan.from_dict({"views": [{"procedure": "lasso", "lam": 1.0},
                                         {"procedure": "screen", "c": 2.0}],
                               "final_model_rule": (0, 2)})
    assert plan.to_dict()["final_model_rule"] == [0, 2]
    assert ViewPlan.from_dict(plan.to_dict()).to_dict() == plan.to_dict()


def test_single_view_matches_direct_solve():
    X, y = data()
    vr = multiview.run_views(X, y, ViewPlan([{"procedure": "lasso", "lam": 1.5}]), rng=3)
    omega = RandomizationDist("logistic", 1.0, X.shape[1]).sample(np.random.default_rng(3))
    out, rec = selectors.solve_randomized_lasso(X, y, 1.5, None, omega)
    assert np.array_equal(vr.active, out.active_set)
    only = vr.recon.views[0]
    assert np.allclose(only.M, rec.M) and np.allclose(only.observed_opt, rec.observed_opt)
    D, V = rec.observed_data, rec.observed_opt
    assert vr.recon.log_density(D, V) == pytest.approx(
        RandomizationDist("logistic", 1.0, X.shape[1]).log_density(rec.omega(D, V)) + rec.jacobian_log)


def test_two_views_union_and_additive_density():
    X, y = data(p=6, signal=(3.0, 2.0, 0, 0, 0, 0))
    plan = ViewPlan([{"procedure": "lasso", "lam": 1.0}, {"procedure": "lasso", "lam": 1.0}])
    vr = multiview.run_views(X, y, plan, rng=1)
    sets = vr.info["view_active_sets"]
    assert vr.active.tolist() == sorted(set(sets[0]) | set(sets[1]))
    assert max(vr.info["reconstruction_errors"]) <= 1e-7
    D, V = vr.recon.observed_data, vr.recon.observed_opt
    parts = sum(dist.log_density(v.omega(D, V[sl])) + v.jacobian_log
                for v, dist, sl in zip(vr.recon.views, vr.recon.dists, vr.recon.slices))
    assert vr.recon.log_density(D, V) == pytest.approx(parts)
    inter = multiview.run_views(X, y, ViewPlan(plan.views, "intersection"), rng=1)
    assert inter.active.tolist() == sorted(set(sets[0]) & set(sets[1]))


def test_empty_model_error():
    X, y = data()
    vr = multiview.run_views(X, y, ViewPlan([{"procedure": "lasso", "lam": 1.0}]), rng=0)
    with pytest.raises(ValueError, match="empty"):
        multiview.infer(X, y, vr.recon, [], "gaussian")
    with pytest.raises(ValueError):
        multiview.run_views(X, y, ViewPlan([{"procedure": "lasso", "lam": 1.0}], [7]), rng=0)


def test_view_order_invariance():
    X, y = data(n=100, p=5, seed=4, signal=(3.0, 0, 0, 0, 0))
    omega_a = RandomizationDist("logistic", 1.0, 5).sample(np.random.default_rng(10))
    omega_b = RandomizationDist("logistic", 1.0, 5).sample(np.random.default_rng(11))
    (oa, ra), (ob, rb) = [selectors.solve_randomized_lasso(X, y, 1.0, None, w)
                          for w in (omega_a, omega_b)]
    E = np.union1d(oa.active_set, ob.active_set)
    g = RandomizationDist("logistic", 1.0)
    cfg = SamplerConfig(n_samples=20000, burnin=1000, n_chains=200, thin=2, eta="auto")
    res = []
    for views in ([ra, rb], [rb, ra]):
        recon = selectors.compose_views(views, g)
        res.append(multiview.infer(X, y, recon, E, coords=[0], config=cfg, rng=5,
                                   bootstrap_reps=2000, grid_points=0)[0])
    assert res[0].pivot == pytest.approx(res[1].pivot, abs=0.02)


def test_split_cross_covariance_small():
    rng = np.random.default_rng(6)
    n, p = 400, 4
    X = rng.standard_normal((n, p))
    X = (X - X.mean(0)) / X.std(0) / np.sqrt(n)
    prob = 1 / (1 + np.exp(-X @ np.array([8.0, 0, 0, 0])))
    y = (rng.random(n) < prob).astype(float)
    plan = ViewPlan([{"procedure": "carve", "rho": 0.5, "lam": 0.5, "loss": "logistic",
                      "bootstrap_reps": 300}] * 2)
    vr = multiview.run_views(X, y, plan, rng=7)
    # independent splits: the true cross-covariance is zero, so this is sampling noise
    assert vr.info["split_cross_cov_max_rel"] < 4.5 / np.sqrt(300)


@pytest.mark.slow
def test_two_carving_views_null_pivots_uniform():
    sc = harness.Scenario(name="two-carves", n=400, p=5, loss="logistic", replicates=300,
                          views=[{"procedure": "carve", "rho": 0.5, "bootstrap_reps": 300}] * 2,
                          bootstrap_reps=300, seed=11,
                          sampler={"n_samples": 2000, "n_chains": 20, "burnin": 500})
    out = harness.uniformity_experiment(sc)
    assert out["n_qualifying"] == 300
    assert out["ks_pass"], out["ks_stat"]
    assert stats.kstest(out["pivot_samples"], "uniform").statistic == pytest.approx(out["ks_stat"])
