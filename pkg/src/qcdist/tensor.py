"""Pointwise distortion algebra for metric pairs.

A metric pair (g, h) of SPD matrices at a point carries an invariant
normalized trace (1/n) tr(g^{-1} h), an invariant determinant det(g^{-1} h),
and the distortion quantity K^2 = trace^n / det. Both scalars are unchanged
when g and h are conjugated by the same invertible matrix, which is what
makes them usable in arbitrary frames. K^2 is at least 1 and equals 1
exactly when h is a positive multiple of g.

All operations here are pure functions of their arguments; callers may
evaluate grids in parallel freely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, NotSPDError

# Admission and comparison tolerances for the whole package.
SPD_EIG_RATIO = 1e-12  # smallest eigenvalue must exceed this times the largest
REL_TOL = 1e-9  # relative slack for inequality certificates
ABS_TOL = 1e-12  # absolute slack for inequality certificates
MAX_DIM = 8


def leq_cert(lhs: float, rhs: float) -> bool:
    """Certified inequality lhs <= rhs with standard numerical slack."""
    return lhs <= rhs * (1.0 + REL_TOL) + ABS_TOL


def as_sym(t: np.ndarray) -> np.ndarray:
    """Validate and return an exactly symmetric copy of `t`.

    Accepts matrices symmetric up to roundoff and mirrors the halves;
    anything further from symmetric is rejected.
    """
    t = np.asarray(t, dtype=float)
    if t.ndim != 2 or t.shape[0] != t.shape[1]:
        raise DimensionMismatchError(f"expected a square matrix, got shape {t.shape}")
    n = t.shape[0]
    if n < 2:
        raise DimensionMismatchError("dimension must be at least 2")
    if n > MAX_DIM:
        raise DimensionMismatchError(f"dimension cap is {MAX_DIM}, got {n}")
    scale = np.max(np.abs(t)) or 1.0
    if np.max(np.abs(t - t.T)) > 1e-8 * scale:
        raise DimensionMismatchError("matrix is not symmetric")
    return 0.5 * (t + t.T)


def as_spd(g: np.ndarray) -> np.ndarray:
    """Validate symmetry and positive definiteness; return a symmetric copy.

    Admission rule: smallest eigenvalue > SPD_EIG_RATIO * largest, which
    excludes numerically degenerate metrics before they poison ratios.
    """
    g = as_sym(g)
    w = np.linalg.eigvalsh(g)
    if w[-1] <= 0.0 or w[0] <= SPD_EIG_RATIO * w[-1]:
        raise NotSPDError(f"matrix is not positive definite (eigenvalues {w})")
    return g


def _check_pair(g: np.ndarray, t: np.ndarray) -> None:
    if g.shape != t.shape:
        raise DimensionMismatchError(f"dimension mismatch: {g.shape} vs {t.shape}")


@dataclass(frozen=True)
class DistortionValue:
    """K^2 of a pair together with its building blocks.

    `k_squared` is +inf when the invariant determinant is not positive
    (never NaN); `eigenvalues` are the ascending solutions of
    det(t - lambda g) = 0.
    """

    n: int
    k_squared: float
    trace_part: float
    det_part: float
    eigenvalues: np.ndarray

    @property
    def is_finite(self) -> bool:
        return math.isfinite(self.k_squared)


def invariant_trace(g: np.ndarray, t: np.ndarray) -> float:
    """Invariant normalized trace (1/n) tr(g^{-1} t)."""
    g = as_spd(g)
    t = as_sym(t)
    _check_pair(g, t)
    n = g.shape[0]
    return float(np.trace(np.linalg.solve(g, t))) / n


def invariant_det(g: np.ndarray, t: np.ndarray) -> float:
    """Invariant determinant det(g^{-1} t)."""
    g = as_spd(g)
    t = as_sym(t)
    _check_pair(g, t)
    return float(np.linalg.det(np.linalg.solve(g, t)))


def distortion_eigenvalues(g: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Ascending real roots of det(t - lambda g) = 0.

    Solved through Cholesky whitening g = L L^T and the symmetric
    eigenproblem of L^{-1} t L^{-T}, which preserves realness and ordering
    by construction.
    """
    g = as_spd(g)
    t = as_sym(t)
    _check_pair(g, t)
    return _whitened_eigenvalues(g, t)


def _whitened_eigenvalues(g: np.ndarray, t: np.ndarray) -> np.ndarray:
    el = np.linalg.cholesky(g)
    y = np.linalg.solve(el, t)
    w = np.linalg.solve(el, y.T).T
    return np.linalg.eigvalsh(0.5 * (w + w.T))


def distortion_k2(g: np.ndarray, h: np.ndarray) -> DistortionValue:
    """Distortion K^2(g, h) = Tr_g(h)^n / Det_g(h) with its eigenvalue data.

    Always >= 1 for SPD pairs (arithmetic-geometric mean inequality over the
    eigenvalues); equals 1 exactly when h is a scalar multiple of g, and is
    invariant under separate positive scalings of g and h.
    """
    g = as_spd(g)
    h = as_sym(h)
    _check_pair(g, h)
    n = g.shape[0]
    lam = _whitened_eigenvalues(g, h)
    trace_part = float(np.mean(lam))
    det_part = float(np.prod(lam))
    if det_part <= 0.0:
        k2 = math.inf
    else:
        k2 = trace_part**n / det_part
    return DistortionValue(
        n=n, k_squared=k2, trace_part=trace_part, det_part=det_part, eigenvalues=lam
    )


def check_ratio_bound(d: DistortionValue) -> bool:
    """Certificate lambda_max / lambda_min <= n^n K^2.

    Holds for every valid pair; a False return signals an internal
    numerical fault rather than an interesting input.
    """
    if d.det_part <= 0.0:
        raise ValueError("ratio bound requires a positive invariant determinant")
    ratio = d.eigenvalues[-1] / d.eigenvalues[0]
    return leq_cert(ratio, float(d.n) ** d.n * d.k_squared)


def check_submultiplicativity(g: np.ndarray, h: np.ndarray, k: np.ndarray) -> bool:
    """Certificate K^2(g, k) <= n^n K^2(g, h) K^2(h, k)."""
    lhs = distortion_k2(g, k)
    rhs = distortion_k2(g, h).k_squared * distortion_k2(h, k).k_squared
    n = lhs.n
    return leq_cert(lhs.k_squared, float(n) ** n * rhs)


def check_inverse_bound(g: np.ndarray, h: np.ndarray) -> bool:
    """Certificate K^2(g, h) <= K^2(h, g)^(n-1)."""
    fwd = distortion_k2(g, h)
    rev = distortion_k2(h, g)
    return leq_cert(fwd.k_squared, rev.k_squared ** (fwd.n - 1))


def conformal_factor(g: np.ndarray, h: np.ndarray, tol: float) -> float | None:
    """Scalar c with h = c g, when the pair is conformal to tolerance.

    Returns Tr_g(h) if K^2(g, h) <= 1 + tol and the reconstruction satisfies
    ||h - c g||_F <= tol ||h||_F; otherwise None. The explicit residual
    check is needed because K^2 - 1 scales quadratically in the deviation.
    """
    d = distortion_k2(g, h)
    if not d.is_finite or d.k_squared > 1.0 + tol:
        return None
    g = as_spd(g)
    h = as_sym(h)
    c = float(np.trace(np.linalg.solve(g, h))) / g.shape[0]
    if np.linalg.norm(h - c * g) > tol * np.linalg.norm(h):
        return None
    return c


def metric_norm(g: np.ndarray, t: np.ndarray) -> float:
    """Tensor norm ||t||_g = sqrt(tr(g^{-1} t g^{-1} t)) for symmetric t."""
    g = as_spd(g)
    t = as_sym(t)
    _check_pair(g, t)
    a = np.linalg.solve(g, t)
    return float(np.sqrt(max(np.trace(a @ a), 0.0)))


# Batched versions used by randomized sweeps and grid evaluations. These
# take stacks (..., n, n) and skip per-matrix validation; they are checked
# against the scalar operations in the test suite.


def whitened_eigenvalues_batch(g: np.ndarray, t: np.ndarray) -> np.ndarray:
    el = np.linalg.cholesky(g)
    y = np.linalg.solve(el, t)
    w = np.linalg.solve(el, np.swapaxes(y, -1, -2))
    w = np.swapaxes(w, -1, -2)
    return np.linalg.eigvalsh(0.5 * (w + np.swapaxes(w, -1, -2)))


def distortion_k2_batch(g: np.ndarray, h: np.ndarray) -> np.ndarray:
    """K^2 over stacks of SPD pairs; +inf where the determinant is not positive."""
    n = g.shape[-1]
    lam = whitened_eigenvalues_batch(g, h)
    trace_part = np.mean(lam, axis=-1)
    det_part = np.prod(lam, axis=-1)
    out = np.full(det_part.shape, np.inf)
    ok = det_part > 0.0
    out[ok] = trace_part[ok] ** n / det_part[ok]
    return out
