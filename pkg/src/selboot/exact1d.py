"""Exact and bootstrap pivots for a one-dimensional selection event.

Data y_1..y_n have unit variance and mean mu; the analyst reports only when
sqrt(n) * ybar + omega > threshold. With Z = sqrt(n)(ybar - mu) the
conditional law of Z has density proportional to

    phi(z) * Gbar(threshold - sqrt(n) mu - z),

where Gbar is the randomization survival function.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate, special, stats

from .constraints import Box, ProductRegion
from .errors import RareEventError
from .randomization import RandomizationDist
from .selectors import AffineReconstruction
from .targets import TargetSpec, bootstrap_weights

Z_WINDOW = 12.0
RARE_EVENT_PROB = 1e-4


@dataclass
class SimpleExample:
    n: int
    threshold: float
    mu: float = 0.0
    randomization: RandomizationDist = RandomizationDist("logistic", 1.0, 1)
    y: np.ndarray | None = None

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("need n >= 2")
        if self.randomization.dim != 1:
            self.randomization = self.randomization.resized(1)
        if self.y is not None:
            self.y = np.asarray(self.y, dtype=float)
            if self.y.shape != (self.n,):
                raise ValueError("y must have length n")

    @property
    def delta(self):
        return np.sqrt(self.n) * self.mu

    @property
    def offset(self):
        """Distance threshold - sqrt(n) mu from the mean of sqrt(n) ybar to the cut."""
        return self.threshold - self.delta

    @property
    def T_obs(self):
        return np.sqrt(self.n) * float(np.mean(self.y))

    def with_mu(self, mu):
        return SimpleExample(self.n, self.threshold, mu, self.randomization, self.y)


def selection_probability(ex: SimpleExample):
    """P(Z + sqrt(n) mu + omega > threshold) for Z ~ N(0, 1)."""
    g = ex.randomization
    if g.family == "gaussian":
        return float(special.ndtr(-ex.offset / np.sqrt(1 + g.scale**2)))
    val, _ = integrate.quad(lambda z: g.survival(ex.offset - z) * stats.norm.pdf(z),
                            -Z_WINDOW, Z_WINDOW, epsabs=1e-14, epsrel=1e-12, limit=200)
    return val


def check_regime(ex: SimpleExample):
    """Refuse Gaussian randomization far from the selection boundary.

    Gaussian randomization only supports local alternatives; the guard trips
    when the offset exceeds 12 (1 + scale) or the selection probability drops
    below ``RARE_EVENT_PROB``.
    """
    g = ex.randomization
    if g.family != "gaussian":
        return
    if abs(ex.offset) > Z_WINDOW * (1 + g.scale):
        raise RareEventError(f"offset {ex.offset:.3g} is outside the Gaussian-randomization regime")
    prob = selection_probability(ex)
    if prob < RARE_EVENT_PROB:
        raise RareEventError(
            f"selection probability {prob:.3g} < {RARE_EVENT_PROB:g} under Gaussian randomization")


def _integrand(ex):
    g = ex.randomization
    off = ex.offset
    return lambda z: g.survival(off - z) * stats.norm.pdf(z)


def exact_plugin_cdf(ex: SimpleExample, t):
    """P(Z <= t | selection) by adaptive quadrature on [-12, 12]."""
    check_regime(ex)
    f = _integrand(ex)
    # split at the point where the survival factor changes fastest
    kink = float(np.clip(ex.offset, -Z_WINDOW, Z_WINDOW))
    opts = dict(epsabs=1e-10, epsrel=1e-12, limit=200)
    den = sum(integrate.quad(f, lo, hi, **opts)[0]
              for lo, hi in ((-Z_WINDOW, kink), (kink, Z_WINDOW)) if hi > lo)
    if den < 1e-300:
        raise RareEventError(f"selection probability {den:.3g} underflows")
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.empty_like(t_arr)
    for i, ti in enumerate(t_arr):
        if ti <= -Z_WINDOW:
            out[i] = 0.0
            continue
        top = min(ti, Z_WINDOW)
        num = 0.0
        for lo, hi in ((-Z_WINDOW, min(kink, top)), (max(kink, -Z_WINDOW), top)):
            if hi > lo:
                num += integrate.quad(f, lo, hi, **opts)[0]
        out[i] = min(max(num / den, 0.0), 1.0)
    return out if np.ndim(t) else float(out[0])


def exact_pivot(ex: SimpleExample):
    """The exact pivot evaluated at the observed statistic sqrt(n)(ybar - mu)."""
    return exact_plugin_cdf(ex, ex.T_obs - ex.delta)


def _weighted_ecdf(stats_, weights, t):
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    order = np.argsort(stats_)
    s_sorted, cw = stats_[order], np.cumsum(weights[order])
    tot = cw[-1]
    if not tot > 0:
        raise RareEventError("all bootstrap selection weights underflow")
    k = np.searchsorted(s_sorted, t_arr, side="right")
    out = np.where(k > 0, cw[np.maximum(k - 1, 0)], 0.0) / tot
    return out if np.ndim(t) else float(out[0])


def boot_samples(ex: SimpleExample, B=2000, rng=None):
    """Pairs-bootstrap statistics sqrt(n)(ybar* - ybar) and their selection weights."""
    if ex.y is None:
        raise ValueError("bootstrap CDFs need data y")
    if B < 1000:
        raise ValueError("need at least 1000 bootstrap replicates")
    rng = np.random.default_rng(rng)
    idx = rng.integers(0, ex.n, size=(B, ex.n))
    s = np.sqrt(ex.n) * (ex.y[idx].mean(axis=1) - ex.y.mean())
    w = ex.randomization.survival(ex.offset - s)
    return s, w


def exact_boot_cdf(ex: SimpleExample, t, B=2000, rng=0):
    """Selection-probability-weighted bootstrap CDF of sqrt(n)(ybar* - ybar)."""
    s, w = boot_samples(ex, B, rng)
    return _weighted_ecdf(s, w, t)


def wild_samples(ex: SimpleExample, B=20000, rng=None, weights="normal"):
    if ex.y is None:
        raise ValueError("wild bootstrap CDFs need data y")
    rng = np.random.default_rng(rng)
    alpha = bootstrap_weights(weights, rng, (B, ex.n))
    s = alpha @ (ex.y - ex.y.mean()) / np.sqrt(ex.n)
    return s, ex.randomization.survival(ex.offset - s)


def simple_wild_cdf(ex: SimpleExample, t, method="direct", B=20000, rng=0, weights="normal",
                    config=None):
    """Wild-bootstrap CDF with density prod h(alpha_i) * Gbar(offset - T(alpha)).

    ``method='direct'`` weights i.i.d. multiplier draws by the selection
    probability; ``method='langevin'`` samples (alpha, v) with a projected
    Langevin chain.
    """
    if method == "direct":
        s, w = wild_samples(ex, B, rng, weights)
        return _weighted_ecdf(s, w, t)
    if method != "langevin":
        raise ValueError("method must be 'direct' or 'langevin'")
    from .samplers import SamplerConfig, run_wild_bootstrap_sampler

    if config is None:
        config = SamplerConfig(n_samples=B, n_chains=100, thin=5, eta="auto", seed=rng)
    target, recon = simple_problem(ex)
    W = ((ex.y - ex.y.mean()) / np.sqrt(ex.n))[None, :]
    sample = run_wild_bootstrap_sampler(W, target, recon, ex.randomization, weights,
                                        config=config)
    s = sample.target_draws[:, 0] - ex.delta
    return _weighted_ecdf(s, np.ones_like(s), t)


def simple_problem(ex: SimpleExample, T_obs=None, v_obs=None, omega=None):
    """The example written as a target plus a one-block reconstruction.

    T = sqrt(n) ybar with null sqrt(n) mu and unit variance; the optimization
    variable v = T + omega lives in [threshold, inf) and omega = v - T.
    """
    if T_obs is None:
        T_obs = ex.T_obs if ex.y is not None else max(ex.threshold, ex.delta)
    if omega is not None:
        v_obs = T_obs + omega
    if v_obs is None:
        v_obs = max(T_obs, ex.threshold) + 1.0
    target = TargetSpec(np.array([T_obs]), np.array([ex.delta]), np.eye(1), np.eye(1),
                        np.array([T_obs]))
    region = ProductRegion([("v", Box(np.array([ex.threshold]), np.array([np.inf])))])
    recon = AffineReconstruction(-np.eye(1), np.zeros((1, 0)), np.eye(1), np.zeros(1), region,
                                 np.array([T_obs]), np.array([v_obs]),
                                 np.array([v_obs - T_obs]), in_target=True)
    return target, recon


def simulate_selected(n, threshold, mu, randomization, n_selected, rng, loss_chunk=100000):
    """Draw sqrt(n)(ybar - mu) from replicates that pass selection.

    Uses the exact sufficient-statistic law Z ~ N(0, 1) of Gaussian data.
    """
    rng = np.random.default_rng(rng)
    out = []
    total = 0
    g = randomization.resized(1)
    attempts = 0
    while total < n_selected:
        z = rng.standard_normal(loss_chunk)
        w = g.sample(rng, loss_chunk)[:, 0]
        keep = z[np.sqrt(n) * mu + z + w > threshold]
        out.append(keep)
        total += keep.size
        attempts += loss_chunk
        if attempts > 1e9:
            raise RareEventError("selection is too rare to simulate")
    return np.concatenate(out)[:n_selected]
