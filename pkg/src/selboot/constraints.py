"""Convex constraint sets for optimization variables.

Every region acts on the last axis of its input, so a batch of chain states
of shape ``(n_chains, dim)`` is projected in one call.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class Region:
    dim: int
    kind: str = "region"

    def project(self, x):
        raise NotImplementedError

    def contains(self, x, tol: float = 1e-10):
        raise NotImplementedError

    def reflect(self, x):
        """Mirror x through its projection, 2 P(x) - x, when that point is feasible.

        Near a smooth face this is the reflection in the face; otherwise
        the projection is returned.
        """
        x = np.asarray(x, dtype=float)
        p = self.project(x)
        r = 2 * p - x
        ok = self.contains(r)
        return np.where(np.asarray(ok)[..., None], r, p)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "dim": self.dim}


@dataclass(frozen=True)
class Unconstrained(Region):
    dim: int
    kind: str = field(default="free", init=False)

    def project(self, x):
        return np.array(x, dtype=float, copy=True)

    def contains(self, x, tol=1e-10):
        return np.all(np.isfinite(x), axis=-1)


@dataclass(frozen=True)
class Orthant(Region):
    """{x : signs * x >= 0}."""

    signs: np.ndarray
    kind: str = field(default="orthant", init=False)

    def __post_init__(self):
        s = np.asarray(self.signs, dtype=float).reshape(-1)
        if not np.all(np.isin(s, (-1.0, 1.0))):
            raise ValueError("orthant signs must be +-1")
        object.__setattr__(self, "signs", s)

    @property
    def dim(self):
        return self.signs.shape[0]

    def project(self, x):
        x = np.asarray(x, dtype=float)
        return self.signs * np.maximum(self.signs * x, 0.0)

    def contains(self, x, tol=1e-10):
        return np.all(self.signs * np.asarray(x) >= -tol, axis=-1)

    def reflect(self, x):
        return self.signs * np.abs(np.asarray(x, dtype=float))

    def to_dict(self):
        return {"kind": self.kind, "dim": self.dim, "signs": self.signs.tolist()}


class NonNeg(Orthant):
    kind = "nonneg"

    def __init__(self, dim: int):
        super().__init__(np.ones(dim))


@dataclass(frozen=True)
class Box(Region):
    """{x : lo <= x <= hi}; infinite bounds allowed."""

    lo: np.ndarray
    hi: np.ndarray
    kind: str = field(default="box", init=False)

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        lo, hi = np.broadcast_arrays(lo, hi)
        if np.any(lo > hi):
            raise ValueError("box lower bound exceeds upper bound")
        object.__setattr__(self, "lo", lo.copy())
        object.__setattr__(self, "hi", hi.copy())

    @classmethod
    def cube(cls, dim: int, radius: float = 1.0):
        return cls(np.full(dim, -radius), np.full(dim, radius))

    @property
    def dim(self):
        return self.lo.shape[0]

    def project(self, x):
        return np.clip(np.asarray(x, dtype=float), self.lo, self.hi)

    def reflect(self, x):
        x = np.asarray(x, dtype=float)
        lo, hi = self.lo, self.hi
        out = x.copy()
        fin = np.isfinite(lo) & np.isfinite(hi)
        w = np.where(fin & (hi > lo), hi - lo, 1.0)
        # fold repeatedly across both faces of finite intervals
        y = np.mod(x - lo, 2 * w)
        folded = lo + np.where(y > w, 2 * w - y, y)
        out = np.where(fin, folded, out)
        out = np.where(~fin & np.isfinite(lo) & (out < lo), 2 * lo - out, out)
        out = np.where(~fin & np.isfinite(hi) & (out > hi), 2 * hi - out, out)
        # degenerate intervals collapse to the point
        return np.where(fin & (hi == lo), lo, out)

    def contains(self, x, tol=1e-10):
        x = np.asarray(x)
        return np.all((x >= self.lo - tol) & (x <= self.hi + tol), axis=-1)

    def to_dict(self):
        return {"kind": self.kind, "dim": self.dim, "lo": self.lo.tolist(), "hi": self.hi.tolist()}


@dataclass(frozen=True)
class LinfNormalCone(Region):
    """Normal cone of the l1 ball at the vertex ``sign * e_pivot``.

    The cone is {z : sign * z[pivot] >= max_i |z_i|}.
    """

    dim: int
    pivot_index: int
    sign: float
    kind: str = field(default="linf_normal_cone", init=False)

    def __post_init__(self):
        if not 0 <= self.pivot_index < self.dim:
            raise ValueError("pivot index outside the cone dimension")
        if self.sign not in (-1, 1, -1.0, 1.0):
            raise ValueError("cone sign must be +-1")

    def contains(self, x, tol=1e-10):
        x = np.asarray(x, dtype=float)
        t = self.sign * x[..., self.pivot_index]
        return t >= np.max(np.abs(x), axis=-1) - tol

    def project(self, x):
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1, self.dim)
        j = self.pivot_index
        a = self.sign * flat[:, j]
        others = np.delete(flat, j, axis=1)
        # minimise (t - a)^2 + sum_i (|z_i| - t)_+^2 over t >= 0: the
        # derivative is piecewise linear, so locate the active piece exactly
        b = -np.sort(-np.abs(others), axis=1)
        m = b.shape[1]
        csum = np.concatenate([np.zeros((flat.shape[0], 1)), np.cumsum(b, axis=1)], axis=1)
        k = np.arange(m + 1)
        cand = (a[:, None] + csum) / (k + 1)
        upper = np.concatenate([np.full((flat.shape[0], 1), np.inf), b], axis=1)
        lower = np.concatenate([b, np.full((flat.shape[0], 1), -np.inf)], axis=1)
        valid = (cand <= upper) & (cand >= lower)
        first = np.argmax(valid, axis=1)
        t = np.maximum(cand[np.arange(flat.shape[0]), first], 0.0)
        out = np.clip(flat, -t[:, None], t[:, None])
        out[:, j] = self.sign * t
        return out.reshape(x.shape)

    def to_dict(self):
        return {"kind": self.kind, "dim": self.dim, "pivot_index": int(self.pivot_index),
                "sign": int(self.sign)}


class ProductRegion(Region):
    """Cartesian product of labelled blocks laid out contiguously."""

    kind = "product"

    def __init__(self, blocks):
        self.blocks = [(str(label), region) for label, region in blocks]
        self.slices = []
        start = 0
        for _, region in self.blocks:
            self.slices.append(slice(start, start + region.dim))
            start += region.dim
        self.dim = start

    @property
    def labels(self):
        return [label for label, _ in self.blocks]

    def project(self, x):
        x = np.array(x, dtype=float, copy=True)
        for sl, (_, region) in zip(self.slices, self.blocks):
            if sl.stop > sl.start:
                x[..., sl] = region.project(x[..., sl])
        return x

    def reflect(self, x):
        x = np.array(x, dtype=float, copy=True)
        for sl, (_, region) in zip(self.slices, self.blocks):
            if sl.stop > sl.start:
                x[..., sl] = region.reflect(x[..., sl])
        return x

    def contains(self, x, tol=1e-10):
        x = np.asarray(x, dtype=float)
        ok = np.ones(x.shape[:-1], dtype=bool)
        for sl, (_, region) in zip(self.slices, self.blocks):
            if sl.stop > sl.start:
                ok &= region.contains(x[..., sl], tol)
        return ok

    def to_dict(self):
        return {"kind": self.kind, "dim": self.dim,
                "blocks": [dict(label=label, **region.to_dict()) for label, region in self.blocks]}

    def __repr__(self):
        inner = ", ".join(f"{label}:{region.kind}[{region.dim}]" for label, region in self.blocks)
        return f"ProductRegion({inner})"


def region_from_dict(d: dict) -> Region:
    kind = d["kind"]
    if kind == "free":
        return Unconstrained(d["dim"])
    if kind == "orthant":
        return Orthant(np.asarray(d["signs"]))
    if kind == "nonneg":
        return NonNeg(d["dim"])
    if kind == "box":
        return Box(np.asarray(d["lo"], dtype=float), np.asarray(d["hi"], dtype=float))
    if kind == "linf_normal_cone":
        return LinfNormalCone(d["dim"], d["pivot_index"], d["sign"])
    if kind == "product":
        return ProductRegion([(b["label"], region_from_dict(b)) for b in d["blocks"]])
    raise ValueError(f"unknown region kind {kind!r}")
