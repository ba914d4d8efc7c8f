"""Pivots, p-values and confidence intervals from weighted draws."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateError
from .samplers import WeightedSample, ess


@dataclass
class InferenceResult:
    coef: object
    estimate: float
    null: float
    pivot: float
    p_value: float
    ci_lo: float
    ci_hi: float
    level: float
    diagnostics: dict = field(default_factory=dict)

    FIELDS = ("coef", "estimate", "null", "pivot", "p_value", "ci_lo", "ci_hi", "level")

    def to_dict(self):
        out = {k: _plain(getattr(self, k)) for k in self.FIELDS}
        out["diagnostics"] = {k: _plain(v) for k, v in sorted(self.diagnostics.items())}
        return out

    @classmethod
    def from_dict(cls, d):
        # JSON writes NaN as null
        vals = [float("nan") if d[k] is None and k != "coef" else d[k] for k in cls.FIELDS]
        return cls(*vals, diagnostics=dict(d.get("diagnostics", {})))


def _plain(v):
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    return v


def _normalized(samples: WeightedSample):
    lw = samples.log_weights
    if lw.size == 0:
        raise ValueError("no samples")
    m = np.max(lw)
    if not np.isfinite(m):
        raise DegenerateError("all weights are zero: the selection region is unreachable")
    w = np.exp(lw - m)
    return w / w.sum()


def plugin_pivot(samples: WeightedSample, T_obs, theta=None, Sigma_T=None):
    """Weighted survival of the standardized distance to theta.

    Returns (pivot, one_sided), where ``one_sided`` is the weighted fraction
    of draws with T <= T_obs for 1-D targets and None otherwise.
    """
    w = _normalized(samples)
    T = samples.target_draws
    T_obs = np.atleast_1d(np.asarray(T_obs, dtype=float))
    theta = samples.theta if theta is None else np.atleast_1d(np.asarray(theta, dtype=float))
    Sigma_T = np.eye(T.shape[1]) if Sigma_T is None else np.atleast_2d(Sigma_T)
    R = np.linalg.cholesky(np.linalg.inv(Sigma_T))
    stat = np.linalg.norm((T - theta) @ R, axis=1)
    obs = np.linalg.norm((T_obs - theta) @ R)
    pivot = float(np.clip(np.sum(w * (stat >= obs)), 0.0, 1.0))
    one_sided = None
    if T.shape[1] == 1:
        one_sided = float(np.clip(np.sum(w * (T[:, 0] <= T_obs[0])), 0.0, 1.0))
    return pivot, one_sided


def bootstrap_pivot_weighted(boot_stats, selection_probs, observed_stat, one_sided=False):
    """Selection-probability-weighted bootstrap survival sum p 1{stat >= obs} / sum p.

    Vector statistics are compared through their Euclidean norms.
    ``one_sided=True`` returns the weighted CDF form sum p 1{stat <= obs} / sum p.
    """
    stats_ = np.asarray(boot_stats, dtype=float)
    probs = np.asarray(selection_probs, dtype=float)
    if stats_.shape[0] != probs.shape[0]:
        raise ValueError("need one selection probability per bootstrap statistic")
    if np.any((probs < 0) | (probs > 1)):
        raise ValueError("selection probabilities must lie in [0, 1]")
    tot = probs.sum()
    if not tot > 0:
        raise DegenerateError("all bootstrap selection probabilities are zero")
    obs = np.asarray(observed_stat, dtype=float)
    if stats_.ndim > 1:
        stats_ = np.linalg.norm(stats_.reshape(stats_.shape[0], -1), axis=1)
        obs = np.linalg.norm(obs)
    ind = stats_ <= obs if one_sided else stats_ >= obs
    return float(np.clip(np.sum(probs * ind) / tot, 0.0, 1.0))


def two_sided_p(one_sided):
    return float(np.clip(2 * min(one_sided, 1 - one_sided), 0.0, 1.0))


@dataclass
class ConfidenceInterval:
    lo: float
    hi: float
    accepted: np.ndarray
    empty: bool = False
    noncontiguous: bool = False

    def __iter__(self):
        return iter((self.lo, self.hi))


def ci_grid(T_obs, Sigma_T, n_points=200, width=6.0):
    sd = np.sqrt(float(np.atleast_2d(Sigma_T)[0, 0]))
    return float(np.atleast_1d(T_obs)[0]) + np.linspace(-width * sd, width * sd, n_points)


def invert_ci(pivot_fn, grid, alpha):
    """Grid values whose pivot lies in [alpha/2, 1 - alpha/2].

    ``pivot_fn`` is either a callable theta -> pivot or an array of pivot
    values on ``grid``. An empty acceptance set gives a degenerate interval
    at the grid point whose pivot is nearest 1/2; gaps inside the accepted
    set are filled (convex hull) and flagged.
    """
    grid = np.asarray(grid, dtype=float)
    if np.any(np.diff(grid) < 0):
        raise ValueError("grid must be sorted")
    if callable(pivot_fn):
        piv = np.array([float(pivot_fn(th)) for th in grid])
    else:
        piv = np.asarray(pivot_fn, dtype=float)
    acc = (piv >= alpha / 2) & (piv <= 1 - alpha / 2)
    if not acc.any():
        i = int(np.argmin(np.abs(piv - 0.5)))
        return ConfidenceInterval(grid[i], grid[i], acc, empty=True)
    idx = np.flatnonzero(acc)
    gaps = idx[-1] - idx[0] + 1 != idx.size
    return ConfidenceInterval(grid[idx[0]], grid[idx[-1]], acc, noncontiguous=bool(gaps))


def tilt_reuse(samples: WeightedSample, theta_new, Sigma_T, min_ess=200.0):
    """Gaussian tilt of draws made at ``samples.theta`` to a new null value."""
    theta_new = np.atleast_1d(np.asarray(theta_new, dtype=float))
    Sinv = np.linalg.inv(np.atleast_2d(Sigma_T))
    T = samples.target_draws
    d_new = T - theta_new
    d_ref = T - samples.theta
    adj = -0.5 * np.einsum("ni,ij,nj->n", d_new, Sinv, d_new) \
        + 0.5 * np.einsum("ni,ij,nj->n", d_ref, Sinv, d_ref)
    lw = samples.log_weights + adj
    e = float(ess(lw))
    info = dict(samples.info, ess=e, low_ess=e < min_ess, tilted_from=samples.theta.tolist())
    return WeightedSample(T, lw, theta_new, samples.opt_draws, info)
