"""Pullback metrics, per-map distortion, and the map-level certificates.

Given a chart map phi: (M, g) -> (N, h) from the catalog, the pullback
metric is phi*h = Dphi^T (h o phi) Dphi and the distortion of phi at a point
is K^2(g, phi*h). Everything the bundle of inequality certificates needs
(localization, composition, inverse, gradient, substitution, convergence)
is evaluated pointwise on deterministic sample sets; sup-norms are sampled
sups, and certificates carry their sample counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import manifold
from .charts import ChartMap
from .errors import DimensionMismatchError, DomainError, SingularJacobianError
from .fields import MetricField, ScalarField
from .sampling import BallRegion, Box
from .tensor import (
    ABS_TOL,
    REL_TOL,
    DistortionValue,
    as_spd,
    distortion_k2,
    distortion_k2_batch,
    leq_cert,
)

SINGULAR_DET_RATIO = 1e-12  # |det J| below this times ||J||_F^n counts as singular


@dataclass(frozen=True)
class DistortionReport:
    """Distortion data of a map at one point."""

    point: np.ndarray
    k_squared: float
    eigenvalues: np.ndarray
    jac_sign: int
    riem_jacobian: float
    certificates: dict = field(default_factory=dict)

    @property
    def is_finite(self) -> bool:
        return math.isfinite(self.k_squared)


@dataclass(frozen=True)
class CheckReport:
    """Outcome of a sampled inequality certificate.

    `worst` is the largest ratio lhs/rhs encountered (<= 1 within tolerance
    when the certificate holds); `samples` counts points actually used and
    `excluded` those skipped for near-singular Jacobians.
    """

    ok: bool
    worst: float
    samples: int
    excluded: int = 0


def _jacobian_ok(jac: np.ndarray) -> np.ndarray:
    """Mask of points where the Jacobian is safely nonsingular."""
    n = jac.shape[-1]
    det = np.abs(np.linalg.det(jac))
    scale = np.linalg.norm(jac, axis=(-2, -1)) ** n
    return (det > SINGULAR_DET_RATIO * scale) & np.isfinite(det)


def pullback_metric(
    chart: ChartMap, h: MetricField, p: np.ndarray, check_domain: bool = True
) -> np.ndarray:
    """phi*h at p: Dphi(p)^T h(phi(p)) Dphi(p). Vectorized over leading axes."""
    p = np.asarray(p, dtype=float)
    if check_domain and chart.source_box is not None:
        if not np.all(chart.source_box.contains(p)):
            raise DomainError("point outside the chart's source box")
    q = chart(p)
    if check_domain and not np.all(np.isfinite(q)):
        raise DomainError("map image is not finite")
    if check_domain and chart.target_box is not None:
        if not np.all(chart.target_box.contains(q)):
            raise DomainError("image outside the chart's target box")
    jac = chart.jacobian(p)
    hq = h(q)
    return np.swapaxes(jac, -1, -2) @ hq @ jac


def adjoint_differential(
    chart: ChartMap, g: MetricField, h: MetricField, p: np.ndarray, check_domain: bool = True
) -> np.ndarray:
    """Adjoint of the differential: g(p)^{-1} Dphi(p)^T h(phi(p)).

    Satisfies g(adjoint u, v) = h(u, Dphi v) for all u, v.
    """
    p = np.asarray(p, dtype=float)
    if check_domain and chart.source_box is not None:
        if not np.all(chart.source_box.contains(p)):
            raise DomainError("point outside the chart's source box")
    q = chart(p)
    if check_domain and chart.target_box is not None:
        if not np.all(chart.target_box.contains(q)):
            raise DomainError("image outside the chart's target box")
    jac = chart.jacobian(p)
    hq = h(q)
    gp = g(p)
    return np.linalg.solve(gp, np.swapaxes(jac, -1, -2) @ hq)


def map_distortion(
    chart: ChartMap, g: MetricField, h: MetricField, p: np.ndarray
) -> DistortionReport:
    """Distortion report of the map at a single point p (n,)."""
    p = np.asarray(p, dtype=float)
    if p.ndim != 1:
        raise DimensionMismatchError("map_distortion takes a single point")
    jac = chart.jacobian(p)
    pb = pullback_metric(chart, h, p)
    gp = as_spd(g(p))
    n = gp.shape[0]
    det_j = float(np.linalg.det(jac))
    sign = int(np.sign(det_j)) if det_j != 0.0 else chart.jac_sign
    if not _jacobian_ok(jac[None])[0]:
        return DistortionReport(
            point=p,
            k_squared=math.inf,
            eigenvalues=np.zeros(n),
            jac_sign=sign,
            riem_jacobian=0.0,
            certificates={"nonsingular": False},
        )
    dv = distortion_k2(gp, pb)
    certs = {
        "nonsingular": True,
        "ratio_bound": _ratio_ok(dv),
    }
    return DistortionReport(
        point=p,
        k_squared=dv.k_squared,
        eigenvalues=dv.eigenvalues,
        jac_sign=sign,
        riem_jacobian=float(np.sqrt(max(dv.det_part, 0.0))),
        certificates=certs,
    )


def _ratio_ok(dv: DistortionValue) -> bool:
    if dv.det_part <= 0:
        return False
    ratio = dv.eigenvalues[-1] / dv.eigenvalues[0]
    return leq_cert(ratio, float(dv.n) ** dv.n * dv.k_squared)


def k2_field(
    chart: ChartMap, g: MetricField, h: MetricField, pts: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Batched K^2(g, phi*h) over points (B, n).

    Returns (values, used_mask); points with near-singular Jacobians are
    masked out and their entries set to +inf.
    """
    pts = np.asarray(pts, dtype=float)
    jac = chart.jacobian(pts)
    ok = _jacobian_ok(jac)
    vals = np.full(pts.shape[:-1], np.inf)
    if np.any(ok):
        sub = pts[ok]
        pb = pullback_metric(chart, h, sub, check_domain=False)
        vals[ok] = distortion_k2_batch(g(sub), pb)
    return vals, ok


def sampled_sup_k2(chart: ChartMap, g: MetricField, h: MetricField, pts: np.ndarray) -> float:
    vals, ok = k2_field(chart, g, h, pts)
    if not np.any(ok):
        raise SingularJacobianError("no usable sample points (all Jacobians singular)")
    return float(np.max(vals[ok]))


def normalized_pullback(
    chart: ChartMap, g: MetricField, p: np.ndarray, a: np.ndarray
) -> np.ndarray:
    """Determinant-normalized pullback of the fiber point `a` at phi(p) to p.

    Fiber points are represented in the orthonormal frame of g at their base
    point (plain determinant one). In those frames the normalized pullback
    is exactly the isometric action of M = L(phi(p))^T Dphi(p) L(p)^{-T},
    where g = L L^T is the Cholesky factorization; the determinant
    normalization Det_g(phi*g)^{1/n} coincides with |det M|^{2/n}.
    """
    m = trivialized_differential(chart, g, p)
    return manifold.gl_action(m, a)


def trivialized_differential(chart: ChartMap, g: MetricField, p: np.ndarray) -> np.ndarray:
    """M(p) = L(phi(p))^T Dphi(p) L(p)^{-T} expressing Dphi between orthonormal frames."""
    p = np.asarray(p, dtype=float)
    jac = chart.jacobian(p)
    if not np.all(_jacobian_ok(jac.reshape((-1,) + jac.shape[-2:]))):
        raise SingularJacobianError("Jacobian is numerically singular")
    lq = np.linalg.cholesky(g(chart(p)))
    lp = np.linalg.cholesky(g(p))
    rhs = np.swapaxes(lq, -1, -2) @ jac
    return np.swapaxes(np.linalg.solve(lp, np.swapaxes(rhs, -1, -2)), -1, -2)


# -- sampled inequality certificates ----------------------------------------


def check_localization_bound(
    chart_map: ChartMap,
    g: MetricField,
    h: MetricField,
    chart_g: ChartMap,
    chart_h: ChartMap,
    samples: np.ndarray,
) -> CheckReport:
    """Coordinate-representation distortion against n^{2n} K1^2 K^2 K2^2.

    The Euclidean-pair distortion of chart_h o map o chart_g^{-1} at every
    sample must not exceed n^{2n} times the sampled sups K1^2 of
    K^2(chart_g* euclidean, g), K^2 of K^2(g, map* h), and K2^2 of
    K^2(h, chart_h* euclidean).
    """
    samples = np.asarray(samples, dtype=float)
    n = g.n
    chart_g.require_inverse()
    euc = MetricField("euclidean", n)
    jg = chart_g.jacobian(samples)
    jm = chart_map.jacobian(samples)
    q = chart_map(samples)
    jh = chart_h.jacobian(q)
    ok = _jacobian_ok(jg) & _jacobian_ok(jm) & _jacobian_ok(jh)
    excluded = int(np.sum(~ok))
    sub = samples[ok]
    # sampled sups entering the bound
    k1 = np.max(distortion_k2_batch(pullback_metric(chart_g, euc, sub, False), g(sub)))
    kmid = np.max(distortion_k2_batch(g(sub), pullback_metric(chart_map, h, sub, False)))
    qq = chart_map(sub)
    k2c = np.max(distortion_k2_batch(h(qq), pullback_metric(chart_h, euc, qq, False)))
    # Euclidean distortion of the coordinate representation, by chain rule
    j_rep = jh[ok] @ jm[ok] @ np.linalg.inv(jg[ok])
    rep_pb = np.swapaxes(j_rep, -1, -2) @ j_rep
    lhs = distortion_k2_batch(np.broadcast_to(np.eye(n), rep_pb.shape).copy(), rep_pb)
    rhs = float(n) ** (2 * n) * k1 * kmid * k2c
    worst = float(np.max(lhs / rhs))
    ok_all = bool(np.all(lhs <= rhs * (1.0 + REL_TOL) + ABS_TOL))
    return CheckReport(ok=ok_all, worst=worst, samples=int(np.sum(ok)), excluded=excluded)


def check_composition_bound(
    map1: ChartMap,
    map2: ChartMap,
    g: MetricField,
    h: MetricField,
    k: MetricField,
    samples: np.ndarray,
) -> CheckReport:
    """K^2(g, (map2 o map1)* k) <= n^n sup K^2(g, map1* h) sup K^2(h, map2* k)."""
    samples = np.asarray(samples, dtype=float)
    n = g.n
    j1 = map1.jacobian(samples)
    q = map1(samples)
    j2 = map2.jacobian(q)
    ok = _jacobian_ok(j1) & _jacobian_ok(j2)
    excluded = int(np.sum(~ok))
    sub = samples[ok]
    qs = q[ok]
    k_sup = np.max(distortion_k2_batch(g(sub), pullback_metric(map1, h, sub, False)))
    kp_sup = np.max(distortion_k2_batch(h(qs), pullback_metric(map2, k, qs, False)))
    jc = j2[ok] @ j1[ok]
    comp_pb = np.swapaxes(jc, -1, -2) @ k(map2(qs)) @ jc
    lhs = distortion_k2_batch(g(sub), comp_pb)
    rhs = float(n) ** n * k_sup * kp_sup
    worst = float(np.max(lhs / rhs))
    ok_all = bool(np.all(lhs <= rhs * (1.0 + REL_TOL) + ABS_TOL))
    return CheckReport(ok=ok_all, worst=worst, samples=int(np.sum(ok)), excluded=excluded)


def check_inverse_bound_map(
    chart: ChartMap, g: MetricField, h: MetricField, samples: np.ndarray
) -> CheckReport:
    """K^2(h, (phi^{-1})* g) <= (sup K^2(g, phi* h))^{n-1}, sampled at phi(samples)."""
    inv = chart.require_inverse()
    samples = np.asarray(samples, dtype=float)
    n = g.n
    jac = chart.jacobian(samples)
    ok = _jacobian_ok(jac)
    excluded = int(np.sum(~ok))
    sub = samples[ok]
    k_sup = np.max(distortion_k2_batch(g(sub), pullback_metric(chart, h, sub, False)))
    q = chart(sub)
    inv_pb = pullback_metric(inv, g, q, False)
    lhs = distortion_k2_batch(h(q), inv_pb)
    rhs = k_sup ** (n - 1)
    worst = float(np.max(lhs / rhs))
    ok_all = bool(np.all(lhs <= rhs * (1.0 + REL_TOL) + ABS_TOL))
    return CheckReport(ok=ok_all, worst=worst, samples=int(np.sum(ok)), excluded=excluded)


def check_gradient_bound(
    chart: ChartMap,
    g: MetricField,
    h: MetricField,
    u: ScalarField,
    samples: np.ndarray,
) -> CheckReport:
    """|d(u o phi)|_g^n <= n^n K Det(Dphi) (|du|_h^n o phi), K the sampled sup of K."""
    samples = np.asarray(samples, dtype=float)
    n = g.n
    jac = chart.jacobian(samples)
    ok = _jacobian_ok(jac)
    excluded = int(np.sum(~ok))
    sub = samples[ok]
    q = chart(sub)
    pb = pullback_metric(chart, h, sub, False)
    gp = g(sub)
    k2 = distortion_k2_batch(gp, pb)
    k_sup = float(np.sqrt(np.max(k2)))
    det_part = np.linalg.det(pb) / np.linalg.det(gp)
    riem_jac = np.sqrt(np.maximum(det_part, 0.0))
    du = u.gradient(q)
    d_comp = np.einsum("...ji,...j->...i", jac[ok], du)
    lhs2 = np.einsum("...i,...i->...", d_comp, np.linalg.solve(gp, d_comp[..., None])[..., 0])
    hq = h(q)
    du_h2 = np.einsum("...i,...i->...", du, np.linalg.solve(hq, du[..., None])[..., 0])
    lhs = np.maximum(lhs2, 0.0) ** (n / 2.0)
    rhs = float(n) ** n * k_sup * riem_jac * np.maximum(du_h2, 0.0) ** (n / 2.0)
    ok_all = bool(np.all(lhs <= rhs * (1.0 + REL_TOL) + ABS_TOL))
    scale = np.maximum(rhs, ABS_TOL)
    worst = float(np.max(lhs / scale))
    return CheckReport(ok=ok_all, worst=worst, samples=int(np.sum(ok)), excluded=excluded)


# -- integration by substitution ---------------------------------------------


@dataclass(frozen=True)
class SubstitutionResult:
    lhs: float
    rhs: float
    relerr: float
    resolution: int


def _image_box(chart: ChartMap, box: Box) -> Box:
    """Exact image of a box, for the affine box-to-box catalog kinds."""
    if chart.kind == "identity":
        return box
    if chart.kind == "translation":
        b = chart.params["offset"]
        return Box(lo=box.lo + b, hi=box.hi + b)
    if chart.kind == "linear":
        m = chart.params["matrix"]
        if np.max(np.abs(m - np.diag(np.diag(m)))) > 1e-14:
            raise DomainError("box regions need an axis-aligned (diagonal) linear map")
        d = np.diag(m)
        lo = np.minimum(d * box.lo, d * box.hi)
        hi = np.maximum(d * box.lo, d * box.hi)
        return Box(lo=lo, hi=hi)
    raise DomainError(
        f"chart kind '{chart.kind}' does not map boxes to boxes; use a ball region"
    )


def _image_ball(chart: ChartMap, ball: BallRegion) -> BallRegion:
    """Exact image of a ball under a sphere-preserving (Mobius) chart, n = 2.

    The image circle is the circumcircle of three mapped boundary points;
    extra boundary points certify the image really is a circle.
    """
    if ball.n != 2:
        raise DimensionMismatchError("image balls are implemented for n = 2 only")
    theta = np.array([0.0, 2.0 * np.pi / 3.0, 4.0 * np.pi / 3.0])
    bd = ball.center + ball.radius * np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    q = chart(bd)
    (x1, y1), (x2, y2), (x3, y3) = q
    a = np.array([[2 * (x2 - x1), 2 * (y2 - y1)], [2 * (x3 - x1), 2 * (y3 - y1)]])
    rhs = np.array([x2**2 - x1**2 + y2**2 - y1**2, x3**2 - x1**2 + y3**2 - y1**2])
    center = np.linalg.solve(a, rhs)
    radius = float(np.linalg.norm(q[0] - center))
    check = np.linspace(0.0, 2.0 * np.pi, 17)[:-1]
    bd2 = ball.center + ball.radius * np.stack([np.cos(check), np.sin(check)], axis=-1)
    q2 = chart(bd2)
    err = np.max(np.abs(np.linalg.norm(q2 - center, axis=-1) - radius))
    if err > 1e-9 * radius:
        raise DomainError("chart does not map the ball boundary to a circle")
    return BallRegion(center=center, radius=radius)


def substitution_check(
    chart: ChartMap,
    g: MetricField,
    h: MetricField,
    f: ScalarField,
    region,
    resolution: int,
) -> SubstitutionResult:
    """Midpoint-quadrature check of integration by substitution.

    Left side integrates (f o phi) Det(Dphi) against the g-volume over the
    source region; the right side integrates f against the h-volume over the
    exact image region on its own fresh grid. The mismatch decays at order
    two in the per-axis resolution. The chart must be a declared
    diffeomorphism (carry an inverse).
    """
    chart.require_inverse()
    if isinstance(region, Box):
        nodes, w = region.midpoint_grid(resolution)
        weights = np.full(nodes.shape[0], w)
        img = _image_box(chart, region)
        inodes, iw = img.midpoint_grid(resolution)
        iweights = np.full(inodes.shape[0], iw)
    elif isinstance(region, BallRegion):
        nodes, weights = region.polar_midpoint_grid(resolution)
        img = _image_ball(chart, region)
        inodes, iweights = img.polar_midpoint_grid(resolution)
    else:
        raise DimensionMismatchError("region must be a Box or a BallRegion")
    if nodes.shape[0] == 0:
        return SubstitutionResult(lhs=0.0, rhs=0.0, relerr=0.0, resolution=resolution)
    jac = chart.jacobian(nodes)
    pb = pullback_metric(chart, h, nodes, check_domain=False)
    gp = g(nodes)
    det_part = np.linalg.det(pb) / np.linalg.det(gp)
    riem_jac = np.sqrt(np.maximum(det_part, 0.0))
    lhs_vals = f.value(chart(nodes)) * riem_jac * np.sqrt(np.linalg.det(gp))
    lhs = float(np.sum(lhs_vals * weights))
    rhs_vals = f.value(inodes) * np.sqrt(np.linalg.det(h(inodes)))
    rhs = float(np.sum(rhs_vals * iweights))
    denom = max(abs(rhs), 1e-300)
    return SubstitutionResult(
        lhs=lhs, rhs=rhs, relerr=abs(lhs - rhs) / denom, resolution=resolution
    )


# -- convergence demonstration -----------------------------------------------


@dataclass(frozen=True)
class ConvergenceReport:
    """Sup distances to the limit map and sampled distortions along a sequence."""

    sup_distances: np.ndarray
    k2_sups: np.ndarray
    limit_k2_sup: float
    certificate_ok: bool


def uniform_convergence_demo(
    maps: list[ChartMap],
    limit_map: ChartMap,
    g: MetricField,
    h: MetricField,
    samples: np.ndarray,
    k2_bound: float | None = None,
) -> ConvergenceReport:
    """Track sup |phi_j - phi| and sampled K^2 along a uniformly converging sequence.

    Certificate: the limit's sampled distortion does not exceed the sequence's
    uniform distortion bound (plus tolerance), the numerical face of the
    closure of distortion bounds under uniform limits. `k2_bound` is that
    declared bound; when omitted, the max over the provided terms stands in
    for it (appropriate when the terms attain their sup, e.g. constant
    sequences, but a finite monotone-increasing sample understates the sup
    of the full sequence).
    """
    samples = np.asarray(samples, dtype=float)
    lim_vals = limit_map(samples)
    sup_d = np.array(
        [float(np.max(np.linalg.norm(m(samples) - lim_vals, axis=-1))) for m in maps]
    )
    k2s = np.array([sampled_sup_k2(m, g, h, samples) for m in maps])
    lim_k2 = sampled_sup_k2(limit_map, g, h, samples)
    bound = float(np.max(k2s)) if k2_bound is None else float(k2_bound)
    ok = lim_k2 <= bound * (1.0 + REL_TOL) + ABS_TOL
    return ConvergenceReport(
        sup_distances=sup_d, k2_sups=k2s, limit_k2_sup=lim_k2, certificate_ok=bool(ok)
    )


# -- conformal catalog ---------------------------------------------------------


@dataclass(frozen=True)
class ConformalCase:
    """A catalog pairing (map, g, h) that is exactly conformal, with the factor."""

    name: str
    chart: ChartMap
    g: MetricField
    h: MetricField
    factor: object  # callable pts (B, n) -> (B,)


def _rotation2(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


def conformal_catalog_cases() -> list[ConformalCase]:
    """Map/metric pairings with K^2 identically 1 and known conformal factors.

    Used by the rigidity certificates: sampled distortion must stay within
    tolerance of 1 over the whole source box, and the recovered conformal
    factor must match the closed form.
    """
    cases: list[ConformalCase] = []
    box = Box(lo=[-0.4, -0.3], hi=[0.35, 0.4])
    euc = MetricField("euclidean", 2, domain=Box(lo=[-50, -50], hi=[50, 50]))
    sph = MetricField("round_sphere_stereographic", 2, domain=Box(lo=[-50, -50], hi=[50, 50]))
    hyp = MetricField("hyperbolic_halfspace", 2, params={}, domain=Box(lo=[-50, 0.01], hi=[50, 50]))
    cf = MetricField(
        "conformal_flat", 2, params={"c0": 0.2, "lin": [0.3, -0.1], "quad": 0.05},
        domain=Box(lo=[-50, -50], hi=[50, 50]),
    )
    ident = ChartMap.identity(2, box)
    cases.append(ConformalCase("identity-euclidean", ident, euc, euc, lambda p: np.ones(len(p))))
    cases.append(
        ConformalCase(
            "identity-conformal-flat",
            ChartMap.identity(2, box),
            euc,
            cf,
            lambda p: np.exp(2.0 * (0.2 + p @ np.array([0.3, -0.1]) + 0.05 * np.sum(p * p, axis=-1))),
        )
    )
    trans = ChartMap.translation([0.3, -0.2], box)
    cases.append(ConformalCase("translation-euclidean", trans, euc, euc, lambda p: np.ones(len(p))))
    rotscale = ChartMap.linear(1.7 * _rotation2(0.7), box)
    cases.append(
        ConformalCase(
            "rotation-scale-euclidean", rotscale, euc, euc, lambda p: np.full(len(p), 1.7**2)
        )
    )
    a = np.array([0.3, 0.1])
    mob = ChartMap.mobius_ball(a, box)
    aa = float(a @ a)

    def mobius_factor(p):
        den = 1.0 - 2.0 * (p @ a) + aa * np.sum(p * p, axis=-1)
        return ((1.0 - aa) / den) ** 2

    cases.append(ConformalCase("mobius-euclidean", mob, euc, euc, mobius_factor))

    def mobius_sphere_factor(p):
        den = 1.0 - 2.0 * (p @ a) + aa * np.sum(p * p, axis=-1)
        mu2 = ((1.0 - aa) / den) ** 2
        q = mob(p)
        return mu2 * (1.0 + np.sum(p * p, axis=-1)) ** 2 / (1.0 + np.sum(q * q, axis=-1)) ** 2

    cases.append(
        ConformalCase(
            "mobius-sphere",
            ChartMap.mobius_ball(a, box),
            sph,
            sph,
            mobius_sphere_factor,
        )
    )
    hyp_box = Box(lo=[-0.5, 0.4], hi=[0.5, 1.4])
    dil = ChartMap.linear(2.0 * np.eye(2), hyp_box)
    cases.append(
        ConformalCase("dilation-hyperbolic", dil, hyp, hyp, lambda p: np.ones(len(p)))
    )
    htrans = ChartMap.translation([0.7, 0.0], hyp_box)
    cases.append(
        ConformalCase(
            "horizontal-translation-hyperbolic", htrans, hyp, hyp, lambda p: np.ones(len(p))
        )
    )
    box3 = Box(lo=[-0.5, -0.5, -0.5], hi=[0.5, 0.5, 0.5])
    euc3 = MetricField("euclidean", 3, domain=Box(lo=-50 * np.ones(3), hi=50 * np.ones(3)))
    rot3 = np.eye(3)
    rot3[:2, :2] = _rotation2(0.4)
    scale3 = ChartMap.linear(1.3 * rot3, box3)
    cases.append(
        ConformalCase(
            "rotation-scale-euclidean-3d", scale3, euc3, euc3, lambda p: np.full(len(p), 1.3**2)
        )
    )
    return cases
