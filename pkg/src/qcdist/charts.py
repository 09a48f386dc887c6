"""Differentiable maps between chart domains, with analytic Jacobians.

Maps come from a closed catalog (identity, linear, translation, Mobius
transformation of the unit ball, radial stretch, compositions, and
explicitly declared forward/inverse pairs) rather than a general expression
parser: Jacobians stay exact and composition stays closed.

Every construction validates its analytic Jacobian against central finite
differences on a deterministic sample of the source box and checks that the
Jacobian determinant keeps a constant sign there.
"""

from __future__ import annotations

import numpy as np

from .errors import (
    DimensionMismatchError,
    DomainError,
    InverseUnavailableError,
    ValidationError,
)
from .sampling import Box

JAC_FD_RTOL = 1e-6
VALIDATION_POINTS = 100


class ChartMap:
    """A map of the catalog together with its analytic Jacobian.

    Evaluation and `jacobian` are vectorized over leading axes: points have
    shape (..., n), Jacobians (..., n, n). `inverse` is None unless the kind
    supports it (or one was declared); `jac_sign` is the constant sign of
    det(Jacobian) on the sampled source box.
    """

    def __init__(
        self,
        kind: str,
        n: int,
        params: dict | None = None,
        source_box: Box | None = None,
        target_box: Box | None = None,
        _validation_points: np.ndarray | None = None,
        _inverse: "ChartMap | None" = None,
        _skip_inverse: bool = False,
    ):
        self.kind = kind
        self.n = int(n)
        self.params = dict(params or {})
        self.source_box = source_box
        self.target_box = target_box
        self._setup()
        pts = _validation_points
        if pts is None:
            if source_box is None:
                raise ValidationError(f"chart '{kind}' needs a source box or validation points")
            pts = source_box.halton_points(VALIDATION_POINTS, pad=1e-3)
        self._validation_points = np.asarray(pts, dtype=float)
        self._validate()
        if _inverse is not None:
            self.inverse: ChartMap | None = _inverse
        elif _skip_inverse:
            self.inverse = None
        else:
            self.inverse = self._build_inverse()

    # -- catalog construction ------------------------------------------------

    @classmethod
    def identity(cls, n: int, box: Box) -> "ChartMap":
        return cls("identity", n, source_box=box, target_box=box)

    @classmethod
    def linear(cls, matrix, box: Box, target_box: Box | None = None) -> "ChartMap":
        matrix = np.asarray(matrix, dtype=float)
        return cls("linear", matrix.shape[0], {"matrix": matrix}, box, target_box)

    @classmethod
    def translation(cls, offset, box: Box, target_box: Box | None = None) -> "ChartMap":
        offset = np.asarray(offset, dtype=float)
        return cls("translation", offset.shape[0], {"offset": offset}, box, target_box)

    @classmethod
    def mobius_ball(cls, a, box: Box) -> "ChartMap":
        """Mobius self-map of the unit ball sending `a` to the origin."""
        a = np.asarray(a, dtype=float)
        return cls("mobius_ball", a.shape[0], {"a": a}, box)

    @classmethod
    def radial_stretch(cls, eps: float, n: int, box: Box) -> "ChartMap":
        """x |x|^(eps-1); quasiconformal for eps != 0, singular at the origin.

        eps = -1 is the sphere inversion x / |x|^2 (conformal, undefined at
        the origin); these compose by exponent multiplication, so the
        inverse is the stretch with exponent 1/eps.
        """
        return cls("radial_stretch", n, {"eps": float(eps)}, box)

    @classmethod
    def composition(cls, parts: list["ChartMap"], source_box: Box | None = None) -> "ChartMap":
        """Apply `parts` in list order (parts[0] first)."""
        if not parts:
            raise ValidationError("composition needs at least one part")
        n = parts[0].n
        if any(p.n != n for p in parts):
            raise DimensionMismatchError("composition parts have mixed dimensions")
        box = source_box if source_box is not None else parts[0].source_box
        return cls("composition", n, {"parts": list(parts)}, box, parts[-1].target_box)

    @classmethod
    def declared_inverse(cls, forward: "ChartMap", inverse: "ChartMap") -> "ChartMap":
        """Glue an explicit inverse onto a map, validating the roundtrip."""
        pts = forward._validation_points
        back = inverse(forward(pts))
        err = np.max(np.linalg.norm(back - pts, axis=-1))
        scale = max(1.0, float(np.max(np.linalg.norm(pts, axis=-1))))
        if err > 1e-8 * scale:
            raise ValidationError(f"declared inverse fails roundtrip (error {err:.3e})")
        out = cls(
            forward.kind,
            forward.n,
            forward.params,
            forward.source_box,
            forward.target_box,
            _validation_points=forward._validation_points,
            _inverse=inverse,
        )
        return out

    # -- evaluation ----------------------------------------------------------

    def _setup(self):
        n = self.n
        kind = self.kind
        if kind == "identity":
            pass
        elif kind == "linear":
            m = np.asarray(self.params["matrix"], dtype=float)
            if m.shape != (n, n):
                raise DimensionMismatchError("linear matrix has wrong shape")
            if abs(np.linalg.det(m)) < 1e-14:
                raise ValidationError("linear chart matrix is singular")
            self.params["matrix"] = m
        elif kind == "translation":
            b = np.asarray(self.params["offset"], dtype=float)
            if b.shape != (n,):
                raise DimensionMismatchError("translation offset has wrong shape")
            self.params["offset"] = b
        elif kind == "mobius_ball":
            a = np.asarray(self.params["a"], dtype=float)
            if a.shape != (n,):
                raise DimensionMismatchError("mobius parameter has wrong shape")
            if np.linalg.norm(a) >= 1.0:
                raise ValidationError("mobius parameter must lie inside the unit ball")
            self.params["a"] = a
        elif kind == "radial_stretch":
            if self.params["eps"] == 0:
                raise ValidationError("radial stretch exponent must be nonzero")
        elif kind == "composition":
            pass
        else:
            raise ValidationError(f"unknown chart kind '{kind}'")

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        if pts.shape[-1] != self.n:
            raise DimensionMismatchError("point dimension mismatch")
        kind = self.kind
        if kind == "identity":
            return pts.copy()
        if kind == "linear":
            return pts @ self.params["matrix"].T
        if kind == "translation":
            return pts + self.params["offset"]
        if kind == "mobius_ball":
            return self._mobius_value(pts)
        if kind == "radial_stretch":
            eps = self.params["eps"]
            r = np.linalg.norm(pts, axis=-1, keepdims=True)
            with np.errstate(divide="ignore", invalid="ignore"):
                fac = np.where(r > 0, r ** (eps - 1.0), 0.0)
            out = pts * fac
            if eps < 0:
                out = np.where(r > 0, out, np.nan)
            return out
        if kind == "composition":
            out = pts
            for part in self.params["parts"]:
                out = part(out)
            return out
        raise ValidationError(kind)

    def jacobian(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        if pts.shape[-1] != self.n:
            raise DimensionMismatchError("point dimension mismatch")
        n = self.n
        kind = self.kind
        lead = pts.shape[:-1]
        if kind == "identity":
            return np.broadcast_to(np.eye(n), lead + (n, n)).copy()
        if kind == "linear":
            return np.broadcast_to(self.params["matrix"], lead + (n, n)).copy()
        if kind == "translation":
            return np.broadcast_to(np.eye(n), lead + (n, n)).copy()
        if kind == "mobius_ball":
            return self._mobius_jacobian(pts)
        if kind == "radial_stretch":
            eps = self.params["eps"]
            r = np.linalg.norm(pts, axis=-1, keepdims=True)
            origin_fac = 1.0 if eps == 1.0 else (0.0 if eps > 1.0 else np.nan)
            with np.errstate(divide="ignore", invalid="ignore"):
                xhat = np.where(r > 0, pts / r, 0.0)
                fac = np.where(r > 0, r ** (eps - 1.0), origin_fac)
            outer = xhat[..., :, None] * xhat[..., None, :]
            return fac[..., None] * (np.eye(n) + (eps - 1.0) * outer)
        if kind == "composition":
            x = pts
            jac = None
            for part in self.params["parts"]:
                jp = part.jacobian(x)
                jac = jp if jac is None else jp @ jac
                x = part(x)
            return jac
        raise ValidationError(kind)

    def _mobius_value(self, pts):
        a = self.params["a"]
        aa = float(a @ a)
        ax = pts @ a
        xx = np.einsum("...i,...i->...", pts, pts)
        den = 1.0 - 2.0 * ax + aa * xx
        if np.any(den <= 0):
            raise DomainError("mobius map evaluated outside its domain")
        diff = pts - a
        dd = np.einsum("...i,...i->...", diff, diff)
        num = (1.0 - aa) * diff - dd[..., None] * a
        return num / den[..., None]

    def _mobius_jacobian(self, pts):
        a = self.params["a"]
        n = self.n
        aa = float(a @ a)
        ax = pts @ a
        xx = np.einsum("...i,...i->...", pts, pts)
        den = 1.0 - 2.0 * ax + aa * xx
        if np.any(den <= 0):
            raise DomainError("mobius map evaluated outside its domain")
        diff = pts - a
        dd = np.einsum("...i,...i->...", diff, diff)
        num = (1.0 - aa) * diff - dd[..., None] * a
        # d(num) = (1-aa) I - 2 a (x-a)^T ; d(den) = -2a + 2 aa x
        dnum = (1.0 - aa) * np.eye(n) - 2.0 * a[:, None] * diff[..., None, :]
        dden = -2.0 * a + 2.0 * aa * pts
        return dnum / den[..., None, None] - (
            num[..., :, None] * dden[..., None, :]
        ) / (den**2)[..., None, None]

    # -- inverses ------------------------------------------------------------

    def _build_inverse(self) -> "ChartMap | None":
        img = self(self._validation_points)
        kw = dict(_validation_points=img, _skip_inverse=True)
        inv: ChartMap | None = None
        if self.kind == "identity":
            inv = ChartMap("identity", self.n, source_box=self.source_box, **kw)
        elif self.kind == "linear":
            m = np.linalg.inv(self.params["matrix"])
            inv = ChartMap("linear", self.n, {"matrix": m}, self.target_box, self.source_box, **kw)
        elif self.kind == "translation":
            inv = ChartMap(
                "translation",
                self.n,
                {"offset": -self.params["offset"]},
                self.target_box,
                self.source_box,
                **kw,
            )
        elif self.kind == "mobius_ball":
            inv = ChartMap("mobius_ball", self.n, {"a": -self.params["a"]}, None, None, **kw)
        elif self.kind == "radial_stretch":
            inv = ChartMap(
                "radial_stretch", self.n, {"eps": 1.0 / self.params["eps"]}, None, None, **kw
            )
        elif self.kind == "composition":
            parts = self.params["parts"]
            if any(p.inverse is None for p in parts):
                return None
            inv_parts = [p.inverse for p in reversed(parts)]
            inv = ChartMap("composition", self.n, {"parts": inv_parts}, None, None, **kw)
        if inv is not None:
            inv.inverse = self
        return inv

    def require_inverse(self) -> "ChartMap":
        if self.inverse is None:
            raise InverseUnavailableError(f"chart '{self.kind}' has no declared inverse")
        return self.inverse

    # -- validation ----------------------------------------------------------

    def _validate(self):
        pts = self._validation_points
        if self.kind == "radial_stretch":
            # the origin is a genuine singular point; finite differences are
            # meaningless there, so validation keeps clear of it
            scale = max(1e-9, float(np.max(np.linalg.norm(pts, axis=-1))))
            pts = pts[np.linalg.norm(pts, axis=-1) > 0.05 * scale]
        jac = self.jacobian(pts)
        fd = self._fd_jacobian(pts)
        scale = np.maximum(np.abs(jac).max(axis=(-2, -1)), 1e-12)
        err = np.abs(jac - fd).max(axis=(-2, -1)) / scale
        if np.max(err) > JAC_FD_RTOL:
            raise ValidationError(
                f"chart '{self.kind}': analytic Jacobian disagrees with finite "
                f"differences (max relative error {np.max(err):.3e})"
            )
        dets = np.linalg.det(jac)
        if np.any(dets > 0) and np.any(dets < 0):
            raise ValidationError(f"chart '{self.kind}': Jacobian determinant changes sign")
        self.jac_sign = 1 if np.all(dets >= 0) else -1

    def _fd_jacobian(self, pts):
        n = self.n
        out = np.empty(pts.shape[:-1] + (n, n))
        scale = max(1.0, float(np.max(np.abs(pts))))
        h = 1e-6 * scale
        for j in range(n):
            e = np.zeros(n)
            e[j] = h
            out[..., :, j] = (self(pts + e) - self(pts - e)) / (2.0 * h)
        return out

    def __repr__(self):
        return f"ChartMap(kind={self.kind!r}, n={self.n})"


def compose(*parts: ChartMap, source_box: Box | None = None) -> ChartMap:
    """Composition applying the given charts left to right."""
    return ChartMap.composition(list(parts), source_box=source_box)
