"""Analytic catalogs: metric fields, scalar fields, and vector fields.

Metric fields evaluate to an SPD matrix at every interior point of their
domain box and are C^1 there. Scalar fields carry analytic gradients and
vector fields analytic Jacobians; every vector field in the catalog is a
polynomial of degree at most two, which is what lets the flow integrator
hand it to a compiled kernel as three coefficient arrays.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatchError, DomainError, ValidationError
from .sampling import Box
from .tensor import as_spd

METRIC_KINDS = (
    "euclidean",
    "conformal_flat",
    "hyperbolic_halfspace",
    "round_sphere_stereographic",
    "constant_spd",
    "custom_polynomial",
)


class MetricField:
    """A Riemannian metric on a chart domain, from a parametric catalog.

    Calling the field with points of shape (..., n) returns SPD matrices of
    shape (..., n, n). The domain box governs sampling and finite-difference
    stencils; evaluation outside it is permitted wherever the formula stays
    finite and positive definite (analytic continuation), since group orbits
    routinely leave the sampled chart.
    """

    def __init__(self, kind: str, n: int, params: dict | None = None, domain: Box | None = None):
        if kind not in METRIC_KINDS:
            raise ValidationError(f"unknown metric kind '{kind}'")
        self.kind = kind
        self.n = int(n)
        self.params = dict(params or {})
        if domain is None:
            domain = Box(lo=-np.ones(n), hi=np.ones(n))
        if domain.n != n:
            raise DimensionMismatchError("metric domain dimension mismatch")
        self.domain = domain
        self._setup()
        self._spot_check()

    def _setup(self):
        n = self.n
        k = self.kind
        if k == "conformal_flat":
            self.params.setdefault("c0", 0.0)
            lin = np.asarray(self.params.get("lin", np.zeros(n)), dtype=float)
            if lin.shape != (n,):
                raise DimensionMismatchError("conformal_flat linear coefficients")
            self.params["lin"] = lin
            self.params.setdefault("quad", 0.0)
        elif k == "hyperbolic_halfspace":
            if self.domain.lo[-1] <= 0:
                raise ValidationError("hyperbolic half-space domain needs x_n > 0")
        elif k == "constant_spd":
            self.params["matrix"] = as_spd(np.asarray(self.params["matrix"], dtype=float))
        elif k == "custom_polynomial":
            a0 = np.asarray(self.params.get("a0", np.eye(n)), dtype=float)
            alin = np.asarray(self.params.get("alin", np.zeros((n, n, n))), dtype=float)
            if a0.shape != (n, n) or alin.shape != (n, n, n):
                raise DimensionMismatchError("custom_polynomial coefficient shapes")
            self.params["a0"] = a0
            self.params["alin"] = alin
            mu = float(self.params.get("mu", 0.1))
            if mu <= 0:
                raise ValidationError("custom_polynomial needs mu > 0 to stay SPD")
            self.params["mu"] = mu

    def _spot_check(self):
        pts = self.domain.halton_points(16, pad=1e-3)
        vals = self(pts)
        w = np.linalg.eigvalsh(vals)
        if np.any(w[..., 0] <= 0):
            raise ValidationError(f"metric '{self.kind}' is not SPD on its domain")

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        if pts.shape[-1] != self.n:
            raise DimensionMismatchError("point dimension mismatch")
        n = self.n
        lead = pts.shape[:-1]
        eye = np.eye(n)
        k = self.kind
        if k == "euclidean":
            return np.broadcast_to(eye, lead + (n, n)).copy()
        if k == "conformal_flat":
            lam = (
                self.params["c0"]
                + pts @ self.params["lin"]
                + self.params["quad"] * np.einsum("...i,...i->...", pts, pts)
            )
            return np.exp(2.0 * lam)[..., None, None] * eye
        if k == "hyperbolic_halfspace":
            xn = pts[..., -1]
            if np.any(xn <= 0):
                raise DomainError("hyperbolic half-space metric needs x_n > 0")
            return (xn**-2)[..., None, None] * eye
        if k == "round_sphere_stereographic":
            r2 = np.einsum("...i,...i->...", pts, pts)
            return (4.0 / (1.0 + r2) ** 2)[..., None, None] * eye
        if k == "constant_spd":
            return np.broadcast_to(self.params["matrix"], lead + (n, n)).copy()
        if k == "custom_polynomial":
            m = self.params["a0"] + np.einsum("...k,kij->...ij", pts, self.params["alin"])
            mt = np.swapaxes(m, -1, -2)
            return mt @ m + self.params["mu"] * eye
        raise ValidationError(k)

    def sqrt_det(self, pts: np.ndarray) -> np.ndarray:
        """Riemannian volume density sqrt(det g) at the given points."""
        return np.sqrt(np.linalg.det(self(pts)))

    def valid_mask(self, pts: np.ndarray) -> np.ndarray:
        """Where the metric formula is defined and finite (beyond the box)."""
        pts = np.asarray(pts, dtype=float)
        mask = np.all(np.isfinite(pts), axis=-1)
        if self.kind == "hyperbolic_halfspace":
            mask = mask & (pts[..., -1] > 0)
        return mask

    def __repr__(self):
        return f"MetricField(kind={self.kind!r}, n={self.n})"


SCALAR_KINDS = ("affine", "coordinate", "quadratic", "gaussian")


class ScalarField:
    """Scalar field with an analytic gradient, for gradient/substitution checks."""

    def __init__(self, kind: str, n: int, params: dict | None = None):
        if kind not in SCALAR_KINDS:
            raise ValidationError(f"unknown scalar field kind '{kind}'")
        self.kind = kind
        self.n = int(n)
        self.params = dict(params or {})
        k = kind
        if k == "affine":
            self.params["a"] = np.asarray(self.params.get("a", np.ones(n)), dtype=float)
            self.params.setdefault("b", 0.0)
        elif k == "coordinate":
            self.params.setdefault("index", 0)
        elif k == "quadratic":
            s = np.asarray(self.params.get("s", np.eye(n)), dtype=float)
            self.params["s"] = 0.5 * (s + s.T)
            self.params["a"] = np.asarray(self.params.get("a", np.zeros(n)), dtype=float)
            self.params.setdefault("b", 0.0)
        elif k == "gaussian":
            self.params["mu"] = np.asarray(self.params.get("mu", np.zeros(n)), dtype=float)
            self.params.setdefault("sigma", 1.0)
            self.params.setdefault("amplitude", 1.0)

    def value(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        k = self.kind
        p = self.params
        if k == "affine":
            return pts @ p["a"] + p["b"]
        if k == "coordinate":
            return pts[..., p["index"]].copy()
        if k == "quadratic":
            return np.einsum("...i,ij,...j->...", pts, p["s"], pts) + pts @ p["a"] + p["b"]
        if k == "gaussian":
            d = pts - p["mu"]
            r2 = np.einsum("...i,...i->...", d, d)
            return p["amplitude"] * np.exp(-0.5 * r2 / p["sigma"] ** 2)
        raise ValidationError(k)

    def gradient(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        k = self.kind
        p = self.params
        lead = pts.shape[:-1]
        if k == "affine":
            return np.broadcast_to(p["a"], lead + (self.n,)).copy()
        if k == "coordinate":
            e = np.zeros(self.n)
            e[p["index"]] = 1.0
            return np.broadcast_to(e, lead + (self.n,)).copy()
        if k == "quadratic":
            return 2.0 * pts @ p["s"] + p["a"]
        if k == "gaussian":
            d = pts - p["mu"]
            return -self.value(pts)[..., None] * d / p["sigma"] ** 2
        raise ValidationError(k)


VECTOR_KINDS = ("linear", "conformal_killing", "killing_rotation", "polynomial")


class VectorField:
    """Vector field from the catalog; polynomial of degree at most two.

    Exposes `poly_coefficients()` = (c, A, Q) with
    X_i(x) = c_i + A_ij x_j + Q_ijk x_j x_k (Q symmetric in its last two
    indices), which both the analytic Jacobian and the flow kernel consume.
    The Jacobian is validated against central finite differences on the
    domain box at construction.
    """

    def __init__(self, kind: str, n: int, params: dict | None = None, domain: Box | None = None):
        if kind not in VECTOR_KINDS:
            raise ValidationError(f"unknown vector field kind '{kind}'")
        self.kind = kind
        self.n = int(n)
        self.params = dict(params or {})
        if domain is None:
            domain = Box(lo=-np.ones(n), hi=np.ones(n))
        self.domain = domain
        self._coeffs = self._build_coeffs()
        self._validate()

    def _build_coeffs(self):
        n = self.n
        k = self.kind
        c = np.zeros(n)
        a = np.zeros((n, n))
        q = np.zeros((n, n, n))
        if k == "linear":
            a = np.asarray(self.params["matrix"], dtype=float)
            if a.shape != (n, n):
                raise DimensionMismatchError("linear field matrix shape")
        elif k == "killing_rotation":
            omega = np.asarray(self.params["omega"], dtype=float)
            if omega.shape != (n, n) or np.max(np.abs(omega + omega.T)) > 1e-12:
                raise ValidationError("killing_rotation needs a skew-symmetric generator")
            a = omega
        elif k == "conformal_killing":
            # full conformal algebra of flat space: translation, rotation,
            # dilation, and special conformal part 2(b.x)x - |x|^2 b
            c = np.asarray(self.params.get("translation", np.zeros(n)), dtype=float)
            omega = np.asarray(self.params.get("omega", np.zeros((n, n))), dtype=float)
            if np.max(np.abs(omega + omega.T)) > 1e-12:
                raise ValidationError("conformal_killing rotation part must be skew")
            scale = float(self.params.get("scale", 0.0))
            a = omega + scale * np.eye(n)
            b = np.asarray(self.params.get("special", np.zeros(n)), dtype=float)
            eye = np.eye(n)
            for i in range(n):
                for j in range(n):
                    for kk in range(n):
                        q[i, j, kk] = b[j] * eye[i, kk] + b[kk] * eye[i, j] - b[i] * eye[j, kk]
        elif k == "polynomial":
            c = np.asarray(self.params.get("const", np.zeros(n)), dtype=float)
            a = np.asarray(self.params.get("lin", np.zeros((n, n))), dtype=float)
            q = np.asarray(self.params.get("quad", np.zeros((n, n, n))), dtype=float)
            q = 0.5 * (q + np.swapaxes(q, 1, 2))
        return (
            np.ascontiguousarray(c, dtype=float),
            np.ascontiguousarray(a, dtype=float),
            np.ascontiguousarray(q, dtype=float),
        )

    def poly_coefficients(self):
        return self._coeffs

    def value(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        c, a, q = self._coeffs
        return c + pts @ a.T + np.einsum("ijk,...j,...k->...i", q, pts, pts)

    def jacobian(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        _, a, q = self._coeffs
        qs = q + np.swapaxes(q, 1, 2)
        return a + np.einsum("ijk,...k->...ij", qs, pts)

    def _validate(self):
        pts = self.domain.halton_points(100, pad=1e-3)
        jac = self.jacobian(pts)
        fd = np.empty_like(jac)
        h = 1e-6 * max(1.0, float(np.max(np.abs(pts))))
        for j in range(self.n):
            e = np.zeros(self.n)
            e[j] = h
            fd[..., :, j] = (self.value(pts + e) - self.value(pts - e)) / (2.0 * h)
        scale = np.maximum(np.abs(jac).max(), 1e-12)
        if np.max(np.abs(jac - fd)) > 1e-6 * scale:
            raise ValidationError("vector field Jacobian disagrees with finite differences")
