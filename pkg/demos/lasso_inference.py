"""Randomized LASSO on a simulated regression, then selective CIs.

Three of ten predictors matter. The randomized LASSO picks a model; we
then ask for 90% intervals for each selected coefficient, once naively
and once conditional on the selection.
"""

import numpy as np
from scipy import stats

from selboot import cli, multiview, targets
from selboot.harness import Scenario, generate, population_target
from selboot.samplers import SamplerConfig

scenario = Scenario(n=100, p=10, signals={"k": 3, "size": 0.3}, replicates=100)
rng = np.random.default_rng(7)
X, y, mean = generate(scenario, rng)

plan = multiview.ViewPlan([{"procedure": "lasso", "lam": 2.0,
                            "randomization": {"family": "logistic", "scale": 1.0}}])
cfg = SamplerConfig(n_samples=5000, burnin=1000, n_chains=50, thin=5, eta="auto")
views, results = multiview.run_and_infer(X, y, plan, rng, config=cfg, bootstrap_reps=1000)
E = views.active
print("selected predictors:", E.tolist())
print("reconstruction error:", f"{views.info['reconstruction_errors'][0]:.1e}")

# naive intervals from the selected-model OLS fit
D, beta_bar = targets.data_vector(X, y, E)
resid = y - X[:, E] @ beta_bar
sigma2 = resid @ resid / (len(y) - len(E))
se = np.sqrt(np.diag(np.linalg.inv(X[:, E].T @ X[:, E])) * sigma2)
truth = population_target(X, mean, E, "gaussian")
z = stats.norm.ppf(0.95)

print()
print(cli.report(results, "table").decode())
print(f"{'coef':<6}{'truth':>9}{'naive lo':>10}{'naive hi':>10}{'sel lo':>10}{'sel hi':>10}")
for j, r in enumerate(results):
    print(f"{r.coef:<6}{truth[j]:>9.3f}{beta_bar[j] - z * se[j]:>10.3f}"
          f"{beta_bar[j] + z * se[j]:>10.3f}{r.ci_lo:>10.3f}{r.ci_hi:>10.3f}")
