"""Invariant conformal structures for finite quasiconformal groups.

Construction: at every grid node p, collect the orbit of the base metric
under determinant-normalized pullbacks of the group elements (a finite set
of unit-determinant SPD matrices in the orthonormal frame of g at p), then
take the center of its unique minimal enclosing ball. Because normalized
pullbacks act on the fibers by isometries and permute the orbit sets, the
centers are mapped onto each other, so the resulting metric field h
satisfies the conformal invariance phi* h = c h up to solver tolerance.

Groups are supplied as explicit element lists; closure, inverses, identity
membership, and the distortion bound are verified pointwise rather than
computed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .charts import ChartMap
from .errors import (
    DimensionMismatchError,
    GroupValidationError,
    NumericalFaultError,
    SingularJacobianError,
)
from .fields import MetricField
from .manifold import SolverConfig
from .pullback import SINGULAR_DET_RATIO
from .tensor import ABS_TOL, REL_TOL

MATCH_TOL = 1e-9  # pointwise agreement for closure/inverse/identity checks
ORBIT_MATCH_TOL = 1e-8  # nearest-neighbor tolerance in orbit invariance


def _sym_batch(a):
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def _inv_sqrt_batch(a):
    w, v = np.linalg.eigh(a)
    return _sym_batch((v / np.sqrt(w)[..., None, :]) @ np.swapaxes(v, -1, -2))


def distance_batch(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Fiber distance over stacks of SPD matrices."""
    si = _inv_sqrt_batch(a)
    mu = np.linalg.eigvalsh(_sym_batch(si @ b @ si))
    return np.sqrt(np.sum(np.log(mu) ** 2, axis=-1))


def gl_action_batch(z: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Batched |det z|^{-2/n} z^T a z, renormalized to determinant one."""
    n = a.shape[-1]
    out = np.swapaxes(z, -1, -2) @ a @ z
    d = np.abs(np.linalg.det(out))
    return _sym_batch(out * d[..., None, None] ** (-1.0 / n))


class QCGroup:
    """A finite group of quasiconformal chart maps with a shared bound.

    `elements` is the explicit element list (closed under composition and
    inverse), `k_bound` the common quasiconformality constant K >= 1, and
    `metric` the base metric the distortion bound refers to. Everything is
    verified pointwise on `check_points` at construction.
    """

    def __init__(
        self,
        elements: list[ChartMap],
        k_bound: float,
        metric: MetricField,
        check_points: np.ndarray,
    ):
        if not elements:
            raise GroupValidationError("group needs at least one element")
        self.elements = list(elements)
        self.k_bound = float(k_bound)
        self.metric = metric
        self.n = elements[0].n
        if any(e.n != self.n for e in elements):
            raise DimensionMismatchError("group elements have mixed dimensions")
        if self.k_bound < 1.0:
            raise GroupValidationError("quasiconformality bound must be >= 1")
        pts = np.asarray(check_points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] < 2:
            raise GroupValidationError("need a set of verification points")
        self._verify(pts)

    def _match_element(self, values: np.ndarray, pts: np.ndarray) -> int | None:
        scale = max(1.0, float(np.max(np.abs(pts))))
        for j, e in enumerate(self.elements):
            if np.max(np.abs(e(pts) - values)) <= MATCH_TOL * scale:
                return j
        return None

    def _verify(self, pts: np.ndarray):
        scale = max(1.0, float(np.max(np.abs(pts))))
        self.identity_index = self._match_element(pts, pts)
        if self.identity_index is None:
            raise GroupValidationError("group does not contain the identity")
        for j, e in enumerate(self.elements):
            inv = e.inverse
            if inv is None:
                raise GroupValidationError(f"element {j} has no declared inverse")
            if self._match_element(inv(pts), pts) is None:
                raise GroupValidationError(f"inverse of element {j} is not in the list")
        for i, ei in enumerate(self.elements):
            img = ei(pts)
            for j, ej in enumerate(self.elements):
                if self._match_element(ej(img), pts) is None:
                    raise GroupValidationError(
                        f"composition of elements {j} o {i} is not in the list"
                    )
        # distortion bound of every element against k_bound
        from .pullback import k2_field

        bound = self.k_bound**2 * (1.0 + REL_TOL) + ABS_TOL
        for j, e in enumerate(self.elements):
            vals, ok = k2_field(e, self.metric, self.metric, pts)
            if not np.any(ok):
                raise GroupValidationError(f"element {j} is singular on the check set")
            if float(np.max(vals[ok])) > bound:
                raise GroupValidationError(
                    f"element {j} violates the distortion bound "
                    f"(K^2 reaches {float(np.max(vals[ok])):.6g} > {bound:.6g})"
                )

    def diameter_bound(self) -> float:
        """Orbit diameter bound 2 sqrt(n) log(n^n K^2)."""
        n = self.n
        return 2.0 * np.sqrt(n) * np.log(float(n) ** n * self.k_bound**2)


@dataclass(frozen=True)
class OrbitSet:
    """Orbit of the normalized base metric in the fiber over one point."""

    point: np.ndarray
    members: np.ndarray  # (m, n, n), unit determinant, orthonormal-frame rep
    diameter: float


@dataclass(frozen=True)
class InvariantStructure:
    """Solved invariant conformal structure on a grid.

    `h_triv` holds the fiber centers in the orthonormal frame of g (unit
    determinant); `h_coord` the same tensors in chart coordinates.
    `residuals[b, j]` is the fiber distance between the pullback of the
    center at element_j(node_b) and the center at node_b; `beltrami[b, j]`
    the relative Frobenius defect of phi_j* h = c h. Skipped nodes carry
    NaN rows.
    """

    nodes: np.ndarray
    h_triv: np.ndarray
    h_coord: np.ndarray
    radii: np.ndarray
    iterations: np.ndarray
    converged: np.ndarray
    skipped: np.ndarray
    residuals: np.ndarray
    conformal_factors: np.ndarray
    beltrami: np.ndarray
    mapped_centers: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def max_residual(self) -> float:
        vals = self.residuals[~self.skipped]
        return float(np.max(vals)) if vals.size else 0.0

    @property
    def max_beltrami(self) -> float:
        vals = self.beltrami[~self.skipped]
        return float(np.max(vals)) if vals.size else 0.0


def _element_frame_data(element: ChartMap, g: MetricField, nodes: np.ndarray):
    """Trivialized differentials M = L(phi(p))^T Dphi(p) L(p)^{-T} at many nodes.

    Returns (M, ok): rows where the image is invalid for g or the Jacobian is
    numerically singular are masked out and left as identity in M.
    """
    b, n = nodes.shape
    q = element(nodes)
    ok = np.all(np.isfinite(q), axis=-1) & g.valid_mask(q)
    jac = element.jacobian(nodes)
    # NaN Jacobian rows (singular points) simply fail the mask
    with np.errstate(invalid="ignore"):
        det = np.abs(np.linalg.det(jac))
        ok &= np.isfinite(det) & (
            det > SINGULAR_DET_RATIO * np.linalg.norm(jac, axis=(-2, -1)) ** n
        )
    m = np.tile(np.eye(n), (b, 1, 1))
    if np.any(ok):
        lq = np.linalg.cholesky(g(q[ok]))
        lp = np.linalg.cholesky(g(nodes[ok]))
        rhs = np.swapaxes(lq, -1, -2) @ jac[ok]
        m[ok] = np.swapaxes(np.linalg.solve(lp, np.swapaxes(rhs, -1, -2)), -1, -2)
    return m, ok


def _orbit_members(group: QCGroup, g: MetricField, nodes: np.ndarray):
    """Orbit matrices (B, m, n, n) plus per-element frame maps and node mask."""
    b, n = nodes.shape
    m = len(group.elements)
    frames = np.empty((b, m, n, n))
    ok = np.ones(b, dtype=bool)
    for j, e in enumerate(group.elements):
        fj, okj = _element_frame_data(e, g, nodes)
        frames[:, j] = fj
        ok &= okj
    members = gl_action_batch(
        frames.reshape(-1, n, n), np.tile(np.eye(n), (b * m, 1, 1))
    ).reshape(b, m, n, n)
    return members, frames, ok


def _orbit_diameters(members: np.ndarray) -> np.ndarray:
    """Max pairwise fiber distance per node over (B, m, n, n)."""
    b, m = members.shape[:2]
    diam = np.zeros(b)
    for i in range(m):
        for j in range(i + 1, m):
            diam = np.maximum(diam, distance_batch(members[:, i], members[:, j]))
    return diam


def _enforce_diameter(group: QCGroup, diam: np.ndarray, where: str):
    bound = group.diameter_bound() * (1.0 + REL_TOL) + ABS_TOL
    worst = float(np.max(diam)) if diam.size else 0.0
    if worst > bound:
        raise NumericalFaultError(
            f"orbit diameter {worst:.6g} exceeds the bound {bound:.6g} at {where}; "
            "either the group violates its distortion bound or numerics are broken"
        )


def build_orbit(group: QCGroup, g: MetricField, p: np.ndarray) -> OrbitSet:
    """Orbit set at a single point; hard error if the diameter bound fails."""
    p = np.asarray(p, dtype=float).reshape(1, -1)
    members, _, ok = _orbit_members(group, g, p)
    if not ok[0]:
        raise SingularJacobianError("a group element is singular or invalid at this point")
    diam = float(_orbit_diameters(members)[0])
    _enforce_diameter(group, np.array([diam]), "the requested point")
    return OrbitSet(point=p[0], members=members[0], diameter=diam)


def check_orbit_invariance(group: QCGroup, g: MetricField, p: np.ndarray) -> bool:
    """Whether the pulled-back orbit at phi(p) matches the orbit at p, per element."""
    p = np.asarray(p, dtype=float)
    base = build_orbit(group, g, p)
    for j, e in enumerate(group.elements):
        q = e(p)
        away = build_orbit(group, g, q)
        frame, ok = _element_frame_data(e, g, p.reshape(1, -1))
        if not ok[0]:
            raise SingularJacobianError("singular element in orbit invariance check")
        pulled = gl_action_batch(np.tile(frame[0], (len(away.members), 1, 1)), away.members)
        for row in pulled:
            dmin = float(np.min(distance_batch(np.tile(row, (len(base.members), 1, 1)), base.members)))
            if dmin > ORBIT_MATCH_TOL:
                return False
        for row in base.members:
            dmin = float(np.min(distance_batch(np.tile(row, (len(pulled), 1, 1)), pulled)))
            if dmin > ORBIT_MATCH_TOL:
                return False
    return True


def solve_invariant_structure(
    group: QCGroup,
    g: MetricField,
    nodes: np.ndarray,
    cfg: SolverConfig | None = None,
) -> InvariantStructure:
    """Per-node enclosing-ball centers of the orbit sets, with certificates.

    For every node, h is the center of the minimal enclosing ball of the
    orbit; for every non-identity element the center at the mapped point is
    solved as well (warm-started at its equivariant prediction, so the solver
    re-verifies first-order optimality there) and the invariance residual is
    the fiber distance between its pullback and the center at the node.
    Nodes where any element is singular are skipped and flagged.
    """
    cfg = cfg or SolverConfig()
    nodes = np.asarray(nodes, dtype=float)
    if nodes.ndim != 2:
        raise DimensionMismatchError("nodes must be an array of points (B, n)")
    b, n = nodes.shape
    m = len(group.elements)
    members, frames, ok = _orbit_members(group, g, nodes)
    skipped = ~ok
    diameters = _orbit_diameters(members[ok])
    _enforce_diameter(group, diameters, "grid nodes")
    h_triv = np.full((b, n, n), np.nan)
    radii = np.full(b, np.nan)
    iters = np.zeros(b, dtype=np.int64)
    conv = np.zeros(b, dtype=bool)
    mapped_centers = np.full((b, m, n, n), np.nan)
    residuals = np.full((b, m), np.nan)
    beltrami = np.full((b, m), np.nan)
    if np.any(ok):
        pts_ok = np.ascontiguousarray(members[ok])
        inits = np.ascontiguousarray(members[ok][:, 0])
        centers, rad, its, cv = kernels.meb_solve_batch(
            pts_ok, inits, cfg.tol, cfg.max_iter, cfg.bc_steps
        )
        h_triv[ok] = centers
        radii[ok] = rad
        iters[ok] = its
        conv[ok] = cv.astype(bool)
    # conformal factors c = Det_g(phi* g)^{1/n} = |det M|^{2/n}
    conformal_factors = np.abs(np.linalg.det(frames)) ** (2.0 / n)
    # mapped centers and invariance residuals, element by element
    idx_ok = np.flatnonzero(ok)
    for j, e in enumerate(group.elements):
        if j == group.identity_index:
            mapped_centers[ok, j] = h_triv[ok]
            residuals[ok, j] = 0.0
            continue
        q = e(nodes[ok])
        members_q, _, ok_q = _orbit_members(group, g, q)
        _enforce_diameter(group, _orbit_diameters(members_q[ok_q]), "mapped nodes")
        inv_frames = np.linalg.inv(frames[ok, j])
        warm = gl_action_batch(inv_frames, h_triv[ok])
        sub = np.flatnonzero(ok_q)
        if sub.size:
            centers_q, _, _, cv_q = kernels.meb_solve_batch(
                np.ascontiguousarray(members_q[sub]),
                np.ascontiguousarray(warm[sub]),
                cfg.tol,
                cfg.max_iter,
                0,
            )
            rows = idx_ok[sub]
            mapped_centers[rows, j] = centers_q
            pulled = gl_action_batch(frames[rows, j], centers_q)
            residuals[rows, j] = distance_batch(pulled, h_triv[rows])
            conv[rows] &= cv_q.astype(bool)
        bad = idx_ok[np.flatnonzero(~ok_q)]
        skipped[bad] = True
    lp = np.linalg.cholesky(g(nodes))
    h_coord = lp @ h_triv @ np.swapaxes(lp, -1, -2)
    meta = {
        "tol": cfg.tol,
        "residual_budget": 10.0 * cfg.tol,
        "diameter_bound": group.diameter_bound(),
        "max_orbit_diameter": float(np.max(diameters)) if diameters.size else 0.0,
        "skipped_nodes": int(np.sum(skipped)),
        "elements": m,
    }
    structure = InvariantStructure(
        nodes=nodes,
        h_triv=h_triv,
        h_coord=h_coord,
        radii=radii,
        iterations=iters,
        converged=conv,
        skipped=skipped,
        residuals=residuals,
        conformal_factors=conformal_factors,
        beltrami=beltrami,
        mapped_centers=mapped_centers,
        meta=meta,
    )
    beltrami[:] = beltrami_residual(structure, group, g)
    return structure


def beltrami_residual(structure: InvariantStructure, group: QCGroup, g: MetricField) -> np.ndarray:
    """Relative Frobenius defect ||phi* h - c h|| / ||h|| per node and element.

    phi* h at a node uses the solved center at the mapped point (in chart
    coordinates) and the element's Jacobian; c = Det_g(phi* g)^{1/n}. NaN on
    skipped nodes.
    """
    b, m = structure.residuals.shape
    out = np.full((b, m), np.nan)
    h_coord = structure.h_coord
    for j, e in enumerate(group.elements):
        rows = np.flatnonzero(
            ~structure.skipped
            & np.all(np.isfinite(structure.mapped_centers[:, j]), axis=(1, 2))
        )
        if not rows.size:
            continue
        pn = structure.nodes[rows]
        q = e(pn)
        lq = np.linalg.cholesky(g(q))
        h_at_q = lq @ structure.mapped_centers[rows, j] @ np.swapaxes(lq, -1, -2)
        jac = e.jacobian(pn)
        pb = np.swapaxes(jac, -1, -2) @ h_at_q @ jac
        diff = pb - structure.conformal_factors[rows, j, None, None] * h_coord[rows]
        out[rows, j] = np.linalg.norm(diff, axis=(-2, -1)) / np.linalg.norm(
            h_coord[rows], axis=(-2, -1)
        )
    return out
