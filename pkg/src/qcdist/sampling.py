"""Boxes, deterministic sample sets, and random test-matrix generators.

Sup-norms over chart domains are approximated throughout the package by
maxima over deterministic low-discrepancy (Halton) sample sets; certificates
report the sample count they used. Randomized sweeps draw from a single
seeded generator so runs are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError

_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def halton(count: int, dim: int, skip: int = 20) -> np.ndarray:
    """First `count` points of the Halton sequence in [0, 1)^dim.

    The leading `skip` points are dropped; they cluster near the origin.
    """
    if dim > len(_PRIMES):
        raise DimensionMismatchError(f"halton supports dim <= {len(_PRIMES)}")
    idx = np.arange(skip + 1, skip + count + 1)
    out = np.empty((count, dim))
    for d in range(dim):
        base = _PRIMES[d]
        i = idx.copy()
        f = np.ones(count)
        r = np.zeros(count)
        while np.any(i > 0):
            f = f / base
            r = r + f * (i % base)
            i = i // base
        out[:, d] = r
    return out


@dataclass(frozen=True)
class Box:
    """Axis-aligned box in R^n."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise DimensionMismatchError("box bounds must be 1-d arrays of equal length")
        if np.any(hi <= lo):
            raise ValueError("box must have positive extent on every axis")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def n(self) -> int:
        return self.lo.shape[0]

    @property
    def extent(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    def contains(self, pts: np.ndarray, pad: float = 0.0) -> np.ndarray:
        """Boolean mask of points inside the box (shrunk by `pad` per axis)."""
        pts = np.asarray(pts, dtype=float)
        lo = self.lo + pad * self.extent
        hi = self.hi - pad * self.extent
        return np.all((pts >= lo) & (pts <= hi), axis=-1)

    def halton_points(self, count: int, pad: float = 0.0) -> np.ndarray:
        """Deterministic low-discrepancy sample of the (padded) box interior."""
        u = halton(count, self.n)
        lo = self.lo + pad * self.extent
        hi = self.hi - pad * self.extent
        return lo + u * (hi - lo)

    def midpoint_grid(self, resolution) -> tuple[np.ndarray, float]:
        """Tensor-product midpoint nodes and the common cell volume.

        `resolution` is one int per axis (or a single int for all axes).
        Returns an (m_1*...*m_n, n) node array; resolution 0 on any axis
        yields an empty node list.
        """
        res = np.broadcast_to(np.asarray(resolution, dtype=int), (self.n,))
        if np.any(res < 0):
            raise ValueError("resolution must be nonnegative")
        if np.any(res == 0):
            return np.empty((0, self.n)), 0.0
        axes = [
            self.lo[d] + (np.arange(res[d]) + 0.5) * (self.extent[d] / res[d])
            for d in range(self.n)
        ]
        mesh = np.meshgrid(*axes, indexing="ij")
        nodes = np.stack([m.ravel() for m in mesh], axis=-1)
        vol = float(np.prod(self.extent / res))
        return nodes, vol

    def to_dict(self) -> dict:
        return {"lo": self.lo.tolist(), "hi": self.hi.tolist()}


@dataclass(frozen=True)
class BallRegion:
    """Round ball used as a quadrature region (images of Mobius maps)."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.center, dtype=float))
        object.__setattr__(self, "center", c)
        if self.radius <= 0:
            raise ValueError("ball radius must be positive")

    @property
    def n(self) -> int:
        return self.center.shape[0]

    def polar_midpoint_grid(self, resolution: int) -> tuple[np.ndarray, np.ndarray]:
        """Midpoint nodes in polar coordinates with their quadrature weights.

        Only n = 2 is supported; the radial direction carries the order-2
        midpoint error while the periodic angular direction is spectrally
        accurate, so total quadrature error decays as O(resolution^-2).
        """
        if self.n != 2:
            raise DimensionMismatchError("polar quadrature is implemented for n = 2 only")
        m = int(resolution)
        if m <= 0:
            return np.empty((0, 2)), np.empty(0)
        dr = self.radius / m
        dth = 2.0 * np.pi / (4 * m)
        rho = (np.arange(m) + 0.5) * dr
        theta = (np.arange(4 * m) + 0.5) * dth
        rr, tt = np.meshgrid(rho, theta, indexing="ij")
        nodes = np.stack(
            [self.center[0] + rr * np.cos(tt), self.center[1] + rr * np.sin(tt)],
            axis=-1,
        ).reshape(-1, 2)
        weights = (rr * dr * dth).ravel()
        return nodes, weights


def random_spd(rng: np.random.Generator, n: int, log_spread: float = 2.0) -> np.ndarray:
    """Random SPD matrix Q diag(exp(u)) Q^T with |u| <= log_spread.

    Condition number is bounded by exp(2 * log_spread), keeping sweeps clear
    of numerically degenerate metrics.
    """
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    w = np.exp(rng.uniform(-log_spread, log_spread, size=n))
    return (q * w) @ q.T


def random_spd_batch(
    rng: np.random.Generator, count: int, n: int, log_spread: float = 2.0
) -> np.ndarray:
    """Stack of `count` random SPD matrices (vectorized)."""
    a = rng.standard_normal((count, n, n))
    q, _ = np.linalg.qr(a)
    w = np.exp(rng.uniform(-log_spread, log_spread, size=(count, n)))
    return np.einsum("bij,bj,bkj->bik", q, w, q)


def random_invertible(
    rng: np.random.Generator, n: int, log_cond: float = 2.0
) -> np.ndarray:
    """Random invertible matrix with condition number about exp(log_cond)."""
    u, _ = np.linalg.qr(rng.standard_normal((n, n)))
    v, _ = np.linalg.qr(rng.standard_normal((n, n)))
    s = np.exp(rng.uniform(-0.5 * log_cond, 0.5 * log_cond, size=n))
    return (u * s) @ v.T


def random_symmetric(rng: np.random.Generator, n: int, scale: float = 1.0) -> np.ndarray:
    a = rng.standard_normal((n, n))
    return scale * 0.5 * (a + a.T)
