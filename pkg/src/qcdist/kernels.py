"""Hot numeric kernels.

Fiber geometry of unit-determinant SPD matrices (exp/log/distance), the
minimal-enclosing-ball solver, and the polynomial vector-field flow
integrator live here. These are the inner loops that dominate runtime for
grid solves, so they are compiled with numba's ``@njit`` unless the
``QCDIST_PURE_NUMPY`` environment flag selects the interpreted fallback
(see :mod:`qcdist._accel`). The source is written once and runs on both
paths.

All functions take and return plain float64 arrays and never mutate their
inputs. Higher-level validation (symmetry, SPD admission, determinant
normalization of inputs) happens in the wrapper modules.
"""

import numpy as np

from ._accel import njit


@njit(cache=True)
def sym_part(a):
    """Exactly symmetric part (a + a^T)/2."""
    return 0.5 * (a + a.T)


@njit(cache=True)
def spd_sqrt_pair(a):
    """Principal square root and inverse square root of an SPD matrix."""
    w, v = np.linalg.eigh(a)
    sw = np.sqrt(w)
    s = (v * sw) @ v.T
    si = (v / sw) @ v.T
    return sym_part(s), sym_part(si)


@njit(cache=True)
def fiber_exp(a, x):
    """Exponential map at `a` applied to symmetric `x`, renormalized to det 1.

    a^{1/2} expm(a^{-1/2} x a^{-1/2}) a^{1/2}; the determinant renormalization
    absorbs floating-point drift (it is exact when tr(a^{-1} x) = 0).
    """
    n = a.shape[0]
    s, si = spd_sqrt_pair(a)
    w, v = np.linalg.eigh(sym_part(si @ x @ si))
    em = (v * np.exp(w)) @ v.T
    out = sym_part(s @ em @ s)
    d = np.linalg.det(out)
    return out * d ** (-1.0 / n)


@njit(cache=True)
def fiber_log(a, b):
    """Logarithm map a^{1/2} logm(a^{-1/2} b a^{-1/2}) a^{1/2}."""
    s, si = spd_sqrt_pair(a)
    w, v = np.linalg.eigh(sym_part(si @ b @ si))
    lm = (v * np.log(w)) @ v.T
    return sym_part(s @ lm @ s)


@njit(cache=True)
def whitened_log(si, b):
    """Log map expressed in the orthonormal frame of the base point.

    `si` is the inverse square root of the base point; the Frobenius norm of
    the result equals the fiber distance from the base point to `b`.
    """
    w, v = np.linalg.eigh(sym_part(si @ b @ si))
    return (v * np.log(w)) @ v.T


@njit(cache=True)
def fiber_distance(a, b):
    """Geodesic distance: sqrt(sum_i log(mu_i)^2), mu_i eigenvalues of a^{-1}b."""
    w, v = np.linalg.eigh(a)
    si = (v / np.sqrt(w)) @ v.T
    mu = np.linalg.eigvalsh(sym_part(si @ b @ si))
    acc = 0.0
    for i in range(mu.shape[0]):
        acc += np.log(mu[i]) ** 2
    return np.sqrt(acc)


@njit(cache=True)
def max_fiber_dist(c, pts):
    """Largest distance from `c` to the rows of `pts`, with first-max index."""
    best = -1.0
    idx = 0
    for i in range(pts.shape[0]):
        di = fiber_distance(c, pts[i])
        if di > best:
            best = di
            idx = i
    return best, idx


@njit(cache=True)
def geodesic_midpoint(a, b):
    x = fiber_log(a, b)
    return fiber_exp(a, 0.5 * x)


@njit(cache=True)
def euclidean_meb(q):
    """Smallest enclosing ball of points q (m, d) in Euclidean space.

    Away-step Frank-Wolfe with exact line search on the dual
    max_{lambda in simplex} sum lambda_i |q_i|^2 - |sum lambda_i q_i|^2.
    The Frank-Wolfe gap equals max_i |c - q_i|^2 - dual value, so it
    certifies optimality directly. Returns (center, gap). Deterministic:
    ties resolve to the lowest index.
    """
    m, d = q.shape
    c = q[0].copy()
    if m == 1:
        return c, 0.0
    b = np.empty(m)
    for i in range(m):
        s = 0.0
        for j in range(d):
            s += q[i, j] * q[i, j]
        b[i] = s
    scale = 0.0
    for i in range(m):
        s = 0.0
        for j in range(d):
            t = q[i, j] - q[0, j]
            s += t * t
        if s > scale:
            scale = s
    if scale <= 0.0:
        return c, 0.0
    tol = 1e-14 * scale
    lam = np.zeros(m)
    lam[0] = 1.0
    grad = np.empty(m)
    gap_fw = 0.0
    max_iter = 128 * m + 1024
    for _ in range(max_iter):
        for i in range(m):
            s = 0.0
            for j in range(d):
                s += q[i, j] * c[j]
            grad[i] = b[i] - 2.0 * s
        s_idx = 0
        s_val = grad[0]
        for i in range(1, m):
            if grad[i] > s_val:
                s_val = grad[i]
                s_idx = i
        a_idx = 0
        a_val = np.inf
        for i in range(m):
            if lam[i] > 0.0 and grad[i] < a_val:
                a_val = grad[i]
                a_idx = i
        lg = 0.0
        for i in range(m):
            lg += lam[i] * grad[i]
        gap_fw = s_val - lg
        gap_aw = lg - a_val
        if gap_fw <= tol:
            break
        if gap_fw >= gap_aw:
            num = gap_fw
            den = 0.0
            for j in range(d):
                t = q[s_idx, j] - c[j]
                den += t * t
            den *= 2.0
            gamma = 1.0
            if den > 0.0:
                gamma = num / den
                if gamma > 1.0:
                    gamma = 1.0
            if gamma <= 0.0:
                break
            for i in range(m):
                lam[i] *= 1.0 - gamma
            lam[s_idx] += gamma
            for j in range(d):
                c[j] = (1.0 - gamma) * c[j] + gamma * q[s_idx, j]
        else:
            la = lam[a_idx]
            if la >= 1.0:
                break
            gmax = la / (1.0 - la)
            num = gap_aw
            den = 0.0
            for j in range(d):
                t = c[j] - q[a_idx, j]
                den += t * t
            den *= 2.0
            gamma = gmax
            if den > 0.0:
                gamma = num / den
                if gamma > gmax:
                    gamma = gmax
            if gamma <= 0.0:
                break
            drop = gamma >= gmax * (1.0 - 1e-15)
            for i in range(m):
                lam[i] *= 1.0 + gamma
            lam[a_idx] -= gamma
            if drop or lam[a_idx] < 0.0:
                lam[a_idx] = 0.0
            for j in range(d):
                c[j] = (1.0 + gamma) * c[j] - gamma * q[a_idx, j]
    return c, gap_fw


@njit(cache=True)
def meb_solve(pts, init, tol, max_iter, bc_steps):
    """Minimal enclosing ball of fiber points pts (m, n, n).

    Two phases: harmonic-step farthest-point iterations (the classical
    enclosing-ball sweep, kept for its global behaviour), then tangent-space
    recentering, whose fixed points are exactly the first-order optimality
    condition of the minimax problem: the Euclidean enclosing ball of the
    whitened log images must be centered at the origin. Valid in nonpositive
    curvature; one- and two-point inputs are closed form.

    Returns (center, radius, iterations, converged_flag). The best iterate
    seen is returned when the iteration budget runs out (flag 0).
    """
    m = pts.shape[0]
    n = pts.shape[1]
    if m == 1:
        return pts[0].copy(), 0.0, 0, 1
    if m == 2:
        c = geodesic_midpoint(pts[0], pts[1])
        r, _ = max_fiber_dist(c, pts)
        return c, r, 1, 1
    c = init.copy()
    best_c = c.copy()
    best_r, _ = max_fiber_dist(c, pts)
    iters = 0
    for k in range(1, bc_steps + 1):
        if iters >= max_iter:
            break
        r, f = max_fiber_dist(c, pts)
        if r < best_r:
            best_r = r
            best_c[:] = c
        x = fiber_log(c, pts[f])
        c = fiber_exp(c, x * (1.0 / (k + 1.0)))
        iters += 1
    r0, _ = max_fiber_dist(c, pts)
    if r0 < best_r:
        best_r = r0
        best_c[:] = c
    c = best_c.copy()
    d = n * n
    logs = np.empty((m, d))
    zmat = np.empty((n, n))
    while iters < max_iter:
        s, si = spd_sqrt_pair(c)
        rcur = 0.0
        for i in range(m):
            lm = whitened_log(si, pts[i])
            acc = 0.0
            for aa in range(n):
                for bb in range(n):
                    logs[i, aa * n + bb] = lm[aa, bb]
                    acc += lm[aa, bb] * lm[aa, bb]
            di = np.sqrt(acc)
            if di > rcur:
                rcur = di
        if rcur < best_r:
            best_r = rcur
            best_c[:] = c
        z, _ = euclidean_meb(logs)
        zn = 0.0
        for j in range(d):
            zn += z[j] * z[j]
        zn = np.sqrt(zn)
        if zn <= max(tol, 4e-14 * (1.0 + rcur)):
            # optimality residual measured at the current center
            return c, rcur, iters, 1
        # curvature-aware damping: the differential of the log map grows
        # like s coth(s), s = sqrt(kappa) r with kappa = 1/2 the curvature
        # bound of this metric, so scaling the step by tanh(s)/s keeps the
        # recentering iteration stable at any radius (factor 1 as r -> 0)
        s_curv = np.sqrt(0.5) * rcur
        theta = 1.0
        if s_curv > 1e-8:
            theta = np.tanh(s_curv) / s_curv
        for aa in range(n):
            for bb in range(n):
                zmat[aa, bb] = theta * 0.5 * (z[aa * n + bb] + z[bb * n + aa])
        w2, v2 = np.linalg.eigh(zmat)
        em = (v2 * np.exp(w2)) @ v2.T
        c = sym_part(s @ em @ s)
        dd = np.linalg.det(c)
        c = c * dd ** (-1.0 / n)
        iters += 1
    r_fin, _ = max_fiber_dist(best_c, pts)
    return best_c.copy(), r_fin, iters, 0


@njit(cache=True)
def meb_solve_batch(pts, inits, tol, max_iter, bc_steps):
    """Independent enclosing-ball solves over a batch (B, m, n, n)."""
    batch = pts.shape[0]
    n = pts.shape[2]
    centers = np.empty((batch, n, n))
    radii = np.empty(batch)
    iters = np.empty(batch, dtype=np.int64)
    conv = np.empty(batch, dtype=np.int64)
    for b in range(batch):
        c, r, it, cv = meb_solve(pts[b], inits[b], tol, max_iter, bc_steps)
        centers[b] = c
        radii[b] = r
        iters[b] = it
        conv[b] = cv
    return centers, radii, iters, conv


@njit(cache=True)
def poly_field_value(x, c0, a1, q2):
    """Value of the quadratic-polynomial field c0 + a1 x + q2[x, x]."""
    n = x.shape[0]
    out = np.empty(n)
    for i in range(n):
        acc = c0[i]
        for j in range(n):
            acc += a1[i, j] * x[j]
        for j in range(n):
            qx = 0.0
            for k in range(n):
                qx += q2[i, j, k] * x[k]
            acc += qx * x[j]
        out[i] = acc
    return out


@njit(cache=True)
def poly_field_jac(x, a1, q2):
    """Jacobian of the quadratic-polynomial field at x."""
    n = x.shape[0]
    out = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            acc = a1[i, j]
            for k in range(n):
                acc += (q2[i, j, k] + q2[i, k, j]) * x[k]
            out[i, j] = acc
    return out


@njit(cache=True)
def flow_rk4(x0, c0, a1, q2, t_max, steps):
    """Classic fourth-order integration of trajectories and their differentials.

    Integrates dx/dt = X(x) together with the variational equation
    dD/dt = DX(x) D, D(0) = I, for every starting point in x0 (P, n).
    Returns positions (P, steps+1, n) and differentials (P, steps+1, n, n).
    """
    p_count, n = x0.shape
    xs = np.empty((p_count, steps + 1, n))
    ds = np.empty((p_count, steps + 1, n, n))
    dt = t_max / steps
    for p in range(p_count):
        x = x0[p].copy()
        dmat = np.eye(n)
        xs[p, 0] = x
        ds[p, 0] = dmat
        for s in range(steps):
            k1x = poly_field_value(x, c0, a1, q2)
            k1d = poly_field_jac(x, a1, q2) @ dmat
            x2 = x + 0.5 * dt * k1x
            k2x = poly_field_value(x2, c0, a1, q2)
            k2d = poly_field_jac(x2, a1, q2) @ (dmat + 0.5 * dt * k1d)
            x3 = x + 0.5 * dt * k2x
            k3x = poly_field_value(x3, c0, a1, q2)
            k3d = poly_field_jac(x3, a1, q2) @ (dmat + 0.5 * dt * k2d)
            x4 = x + dt * k3x
            k4x = poly_field_value(x4, c0, a1, q2)
            k4d = poly_field_jac(x4, a1, q2) @ (dmat + dt * k3d)
            x = x + (dt / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
            dmat = dmat + (dt / 6.0) * (k1d + 2.0 * k2d + 2.0 * k3d + k4d)
            xs[p, s + 1] = x
            ds[p, s + 1] = dmat
    return xs, ds
