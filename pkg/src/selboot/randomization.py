"""Randomization laws added to selection objectives.

All families are symmetric with i.i.d. coordinates, so a law is fully
described by its family, a common scale and the dimension.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import special

FAMILIES = ("gaussian", "laplace", "logistic")


@dataclass(frozen=True)
class RandomizationDist:
    family: str
    scale: float = 1.0
    dim: int = 1

    def __post_init__(self):
        family = self.family.lower()
        if family not in FAMILIES:
            raise ValueError(f"unknown randomization family {self.family!r}; choose from {FAMILIES}")
        object.__setattr__(self, "family", family)
        if not np.isfinite(self.scale) or self.scale <= 0:
            raise ValueError(f"scale must be positive, got {self.scale}")
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"dim must be a positive integer, got {self.dim}")
        object.__setattr__(self, "dim", int(self.dim))

    def resized(self, dim: int) -> "RandomizationDist":
        return replace(self, dim=dim)

    def _check(self, w):
        w = np.asarray(w, dtype=float)
        if w.ndim == 0 or w.shape[-1] != self.dim:
            raise ValueError(f"expected trailing dimension {self.dim}, got shape {w.shape}")
        return w

    # per-coordinate pieces -------------------------------------------------

    def _logpdf1(self, x):
        s = self.scale
        if self.family == "gaussian":
            return -0.5 * (x / s) ** 2 - 0.5 * np.log(2 * np.pi) - np.log(s)
        if self.family == "laplace":
            return -np.abs(x) / s - np.log(2 * s)
        a = np.abs(x) / s
        return -a - 2 * np.log1p(np.exp(-a)) - np.log(s)

    def _score1(self, x):
        s = self.scale
        if self.family == "gaussian":
            return -x / s**2
        if self.family == "laplace":
            # np.sign gives 0 at the kink
            return -np.sign(x) / s
        return -np.tanh(x / (2 * s)) / s

    # public interface ------------------------------------------------------

    def log_density(self, w):
        """Sum of coordinate log-densities over the last axis."""
        w = self._check(w)
        return self._logpdf1(w).sum(axis=-1)

    def grad_log_density(self, w):
        w = self._check(w)
        return self._score1(w)

    def survival(self, x):
        """P(omega_j > x) for a single coordinate, elementwise in x."""
        x = np.asarray(x, dtype=float)
        z = x / self.scale
        if self.family == "gaussian":
            return special.ndtr(-z)
        if self.family == "laplace":
            return np.where(z >= 0, 0.5 * np.exp(-np.abs(z)), 1 - 0.5 * np.exp(-np.abs(z)))
        return special.expit(-z)

    def log_survival(self, x):
        x = np.asarray(x, dtype=float)
        z = x / self.scale
        if self.family == "gaussian":
            return special.log_ndtr(-z)
        if self.family == "laplace":
            return np.where(z >= 0, np.log(0.5) - np.abs(z), np.log1p(-0.5 * np.exp(-np.abs(z))))
        return -np.logaddexp(0.0, z)

    def cdf(self, x):
        return self.survival(-np.asarray(x, dtype=float))

    def sample(self, rng: np.random.Generator, size=None):
        shape = (self.dim,) if size is None else tuple(np.atleast_1d(size)) + (self.dim,)
        if self.family == "gaussian":
            return rng.normal(0.0, self.scale, shape)
        if self.family == "laplace":
            return rng.laplace(0.0, self.scale, shape)
        return rng.logistic(0.0, self.scale, shape)

    @property
    def variance(self) -> float:
        s = self.scale
        return {"gaussian": s**2, "laplace": 2 * s**2, "logistic": np.pi**2 * s**2 / 3}[self.family]

    @property
    def lipschitz_constant(self) -> float:
        """Lipschitz constant K_g of the negative log-density (inf for Gaussian)."""
        if self.family == "gaussian":
            return np.inf
        return 1.0 / self.scale

    @property
    def curvature_bound(self) -> float:
        """Upper bound on the second derivative of the negative log-density.

        Laplace has a kink at zero; its bound is reported as 0 away from the
        kink, which is what a gradient-based step size sees almost surely.
        """
        s = self.scale
        return {"gaussian": 1 / s**2, "laplace": 0.0, "logistic": 1 / (2 * s**2)}[self.family]

    @classmethod
    def from_config(cls, cfg: dict | None, dim: int = 1) -> "RandomizationDist":
        cfg = cfg or {}
        return cls(cfg.get("family", "logistic"), float(cfg.get("scale", 1.0)), dim)


def log_density(dist: RandomizationDist, w):
    return dist.log_density(w)


def grad_log_density(dist: RandomizationDist, w):
    return dist.grad_log_density(w)


def survival(dist: RandomizationDist, x):
    return dist.survival(x)


def sample(dist: RandomizationDist, rng: np.random.Generator, size=None):
    return dist.sample(rng, size)
