"""Geometry of the unit-determinant SPD matrices.

The typical fiber of the conformal-structure bundle is the space of
symmetric positive definite n x n matrices with determinant one, carrying
the inner product tr(A^{-1} X A^{-1} Y) on tangent vectors (trace-free
symmetric matrices). It is complete, simply connected and nonpositively
curved, so exp/log are global inverses, geodesics are unique, and every
finite point set has a unique minimal enclosing ball.

Heavy lifting is delegated to :mod:`qcdist.kernels`; this module adds
validation, normalization, and result containers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DimensionMismatchError, NotSPDError
from .tensor import as_spd, as_sym

DET_TOL = 1e-10  # unit-determinant admission after renormalization
TRACE_TOL = 1e-10  # tangent trace condition after projection


@dataclass(frozen=True)
class SolverConfig:
    """Enclosing-ball solver parameters.

    `tol` bounds the tangent recentering step at convergence (which bounds
    the distance to the true center up to a curvature-dependent constant
    close to one); `max_iter` caps total iterations; `bc_steps` is the
    length of the harmonic farthest-point warmup.
    """

    tol: float = 1e-9
    max_iter: int = 100_000
    bc_steps: int = 8


@dataclass(frozen=True)
class Ball:
    center: np.ndarray
    radius: float


@dataclass(frozen=True)
class BallResult:
    """Output of a minimal-enclosing-ball solve."""

    center: np.ndarray
    radius: float
    iterations: int
    converged: bool
    residual: float


def fiber_point(a: np.ndarray) -> np.ndarray:
    """Validate SPD and renormalize to determinant one."""
    a = as_spd(a)
    n = a.shape[0]
    d = float(np.linalg.det(a))
    out = a * d ** (-1.0 / n)
    if abs(np.linalg.det(out) - 1.0) > DET_TOL:
        raise NotSPDError("determinant renormalization failed")
    return out


def tangent_at(a: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Project symmetric `x` onto the tangent space at `a` (tr(a^{-1} x) = 0)."""
    a = as_spd(a)
    x = as_sym(x)
    if a.shape != x.shape:
        raise DimensionMismatchError("base point and tangent vector dimensions differ")
    n = a.shape[0]
    t = float(np.trace(np.linalg.solve(a, x))) / n
    out = x - t * a
    if abs(np.trace(np.linalg.solve(a, out))) > TRACE_TOL * max(1.0, np.linalg.norm(out)):
        raise NotSPDError("tangent projection failed")
    return out


def fiber_inner(a: np.ndarray, x: np.ndarray, y: np.ndarray) -> float:
    """Fiber metric tr(a^{-1} x a^{-1} y) at base point `a`."""
    a = as_spd(a)
    x = as_sym(x)
    y = as_sym(y)
    if not (a.shape == x.shape == y.shape):
        raise DimensionMismatchError("base point mismatch in fiber inner product")
    ax = np.linalg.solve(a, x)
    ay = np.linalg.solve(a, y)
    return float(np.trace(ax @ ay))


def exp_map(at: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Manifold exponential at `at` applied to tangent vector `x`."""
    at = fiber_point(at)
    x = as_sym(x)
    if at.shape != x.shape:
        raise DimensionMismatchError("base point and tangent vector dimensions differ")
    return kernels.fiber_exp(np.ascontiguousarray(at), np.ascontiguousarray(x))


def log_map(at: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Inverse of exp_map; defined for every pair by nonpositive curvature."""
    at = fiber_point(at)
    b = fiber_point(b)
    return kernels.fiber_log(np.ascontiguousarray(at), np.ascontiguousarray(b))


def distance(a: np.ndarray, b: np.ndarray) -> float:
    """Geodesic distance sqrt(sum_i log(mu_i)^2), mu_i eigenvalues of a^{-1} b."""
    a = fiber_point(a)
    b = fiber_point(b)
    return float(kernels.fiber_distance(np.ascontiguousarray(a), np.ascontiguousarray(b)))


def geodesic(a: np.ndarray, b: np.ndarray, t: float) -> np.ndarray:
    """Point at parameter t on the geodesic from a to b."""
    a = fiber_point(a)
    b = fiber_point(b)
    x = kernels.fiber_log(np.ascontiguousarray(a), np.ascontiguousarray(b))
    return kernels.fiber_exp(np.ascontiguousarray(a), t * x)


def gl_action(z: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Isometric action |det z|^{-2/n} z^T a z of an invertible matrix."""
    z = np.asarray(z, dtype=float)
    a = fiber_point(a)
    n = a.shape[0]
    if z.shape != (n, n):
        raise DimensionMismatchError("action matrix dimension mismatch")
    dz = float(np.linalg.det(z))
    if dz == 0.0 or not np.isfinite(dz):
        raise NotSPDError("action matrix is singular")
    out = abs(dz) ** (-2.0 / n) * (z.T @ a @ z)
    return fiber_point(out)


def minimal_enclosing_ball(
    points,
    cfg: SolverConfig | None = None,
    init: np.ndarray | None = None,
) -> BallResult:
    """Unique smallest ball containing the given fiber points.

    Deterministic: the iteration starts at the first point of the list
    (or at `init` when supplied; any fiber point is admissible and leads to
    the same center within solver tolerance, by uniqueness of the ball).
    Exceeding the iteration cap returns the best iterate with
    ``converged=False`` rather than raising.
    """
    cfg = cfg or SolverConfig()
    pts = [fiber_point(p) for p in points]
    if not pts:
        raise ValueError("need at least one point")
    n = pts[0].shape[0]
    if any(p.shape != (n, n) for p in pts):
        raise DimensionMismatchError("points have mixed dimensions")
    arr = np.ascontiguousarray(np.stack(pts))
    start = fiber_point(init) if init is not None else pts[0]
    center, radius, iters, conv = kernels.meb_solve(
        arr, np.ascontiguousarray(start), cfg.tol, cfg.max_iter, cfg.bc_steps
    )
    resid = ball_residual(Ball(center=center, radius=float(radius)), pts)
    return BallResult(
        center=center,
        radius=float(radius),
        iterations=int(iters),
        converged=bool(conv),
        residual=resid,
    )


def ball_residual(ball: Ball, points) -> float:
    """Certificate max_i d(center, p_i) - radius."""
    dmax = 0.0
    for p in points:
        dmax = max(dmax, distance(ball.center, p))
    return float(dmax - ball.radius)
