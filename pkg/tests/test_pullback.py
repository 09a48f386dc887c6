"""Tests for pullback metrics, per-map distortion, and map-level certificates."""

import numpy as np
import pytest

from qcdist import (
    ChartMap,
    MetricField,
    ScalarField,
    adjoint_differential,
    check_composition_bound,
    check_gradient_bound,
    check_inverse_bound_map,
    check_localization_bound,
    compose,
    conformal_catalog_cases,
    distance,
    distortion_k2,
    fiber_point,
    map_distortion,
    normalized_pullback,
    pullback_metric,
    substitution_check,
    uniform_convergence_demo,
)
from qcdist.pullback import sampled_sup_k2, trivialized_differential
from qcdist.sampling import BallRegion, Box, random_spd

BOX = Box(lo=[-0.4, -0.4], hi=[0.4, 0.4])
BIG = Box(lo=[-50.0, -50.0], hi=[50.0, 50.0])
EUC = MetricField("euclidean", 2, domain=BIG)


def halton_samples(count=100, box=BOX):
    return box.halton_points(count)


class TestPullbackMetric:
    def test_identity_returns_h(self):
        h = MetricField("round_sphere_stereographic", 2, domain=BIG)
        ident = ChartMap.identity(2, BOX)
        p = np.array([0.2, -0.1])
        np.testing.assert_allclose(pullback_metric(ident, h, p), h(p), atol=1e-15)

    def test_linear_euclidean(self):
        c = ChartMap.linear(np.diag([2.0, 1.0]), BOX)
        np.testing.assert_allclose(
            pullback_metric(c, EUC, np.array([0.1, 0.1])), np.diag([4.0, 1.0])
        )

    def test_chain_rule_oracle(self):
        # (psi o phi)* h == phi* (psi* h) pointwise
        rng = np.random.default_rng(0)
        phi = ChartMap.linear(np.array([[1.2, 0.4], [0.0, 0.8]]), BOX)
        psi = ChartMap.mobius_ball([0.15, -0.1], Box(lo=[-0.9, -0.9], hi=[0.9, 0.9]))
        comp = compose(phi, psi, source_box=BOX)
        h = MetricField("round_sphere_stereographic", 2, domain=BIG)
        pts = rng.uniform(-0.35, 0.35, size=(100, 2))
        lhs = pullback_metric(comp, h, pts, check_domain=False)
        # pull h back through psi at phi(p), then through phi
        jphi = phi.jacobian(pts)
        inner = pullback_metric(psi, h, phi(pts), check_domain=False)
        rhs = np.swapaxes(jphi, -1, -2) @ inner @ jphi
        np.testing.assert_allclose(lhs, rhs, rtol=1e-10, atol=1e-12)

    def test_domain_violation_raises(self):
        from qcdist import DomainError

        c = ChartMap.identity(2, BOX)
        with pytest.raises(DomainError):
            pullback_metric(c, EUC, np.array([3.0, 0.0]))


class TestAdjointDifferential:
    def test_euclidean_adjoint_is_transpose(self):
        m = np.array([[2.0, 1.0], [0.5, 1.5]])
        c = ChartMap.linear(m, BOX)
        adj = adjoint_differential(c, EUC, EUC, np.array([0.1, 0.0]))
        np.testing.assert_allclose(adj, m.T, atol=1e-14)

    def test_defining_identity(self):
        # g(adj u, v) == h(u, Dphi v) for random u, v
        rng = np.random.default_rng(1)
        g = MetricField("conformal_flat", 2, params={"c0": 0.1, "lin": [0.3, 0.2]}, domain=BIG)
        h = MetricField("round_sphere_stereographic", 2, domain=BIG)
        c = ChartMap.mobius_ball([0.2, 0.1], BOX)
        p = np.array([0.05, -0.2])
        adj = adjoint_differential(c, g, h, p)
        jac = c.jacobian(p)
        gp, hq = g(p), h(c(p))
        for _ in range(100):
            u = rng.standard_normal(2)
            v = rng.standard_normal(2)
            lhs = (adj @ u) @ gp @ v
            rhs = u @ hq @ (jac @ v)
            assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-12)

    def test_trace_identity(self):
        # tr(adj Dphi)/n equals the invariant trace of the pullback pair
        from qcdist import invariant_trace

        g = MetricField("conformal_flat", 2, params={"c0": -0.2, "lin": [0.1, 0.4]}, domain=BIG)
        h = MetricField("round_sphere_stereographic", 2, domain=BIG)
        c = ChartMap.linear(np.array([[1.5, 0.2], [0.1, 0.9]]), BOX)
        p = np.array([0.15, 0.05])
        adj = adjoint_differential(c, g, h, p)
        jac = c.jacobian(p)
        lhs = np.trace(adj @ jac) / 2
        rhs = invariant_trace(g(p), pullback_metric(c, h, p))
        assert lhs == pytest.approx(rhs, rel=1e-12)


class TestMapDistortion:
    def test_linear_diagonal(self):
        c = ChartMap.linear(np.diag([2.0, 1.0]), BOX)
        rep = map_distortion(c, EUC, EUC, np.array([0.1, -0.1]))
        assert rep.k_squared == pytest.approx(25.0 / 16.0, rel=1e-12)
        assert rep.jac_sign == 1
        assert rep.riem_jacobian == pytest.approx(2.0, rel=1e-12)
        assert rep.certificates["ratio_bound"]

    def test_conformal_catalog_all_one(self):
        for case in conformal_catalog_cases():
            pts = case.chart.source_box.halton_points(64)
            for p in pts[:8]:
                rep = map_distortion(case.chart, case.g, case.h, p)
                assert rep.k_squared == pytest.approx(1.0, abs=1e-9), case.name

    def test_radial_stretch_closed_form(self):
        eps = 0.6
        box = Box(lo=[0.2, 0.2], hi=[1.0, 1.0])
        c = ChartMap.radial_stretch(eps, 2, box)
        p = np.array([0.5, 0.3])
        r = np.linalg.norm(p)
        rep = map_distortion(c, EUC, EUC, p)
        expected = np.sort([eps**2 * r ** (2 * eps - 2), r ** (2 * eps - 2)])
        np.testing.assert_allclose(rep.eigenvalues, expected, rtol=1e-11)
        assert rep.k_squared == pytest.approx(((1 + eps**2) / 2) ** 2 / eps**2, rel=1e-11)

    def test_singular_jacobian_flags_infinite(self):
        box = Box(lo=[-0.5, -0.5], hi=[0.5, 0.5])
        c = ChartMap.radial_stretch(3.0, 2, box)
        rep = map_distortion(c, EUC, EUC, np.zeros(2))
        assert not rep.is_finite
        assert not rep.certificates["nonsingular"]


class TestFunctoriality:
    def test_distortion_commutes_with_pullback(self):
        # K^2(phi* h, phi* k)(p) == K^2(h, k)(phi(p))
        rng = np.random.default_rng(2)
        h = MetricField("round_sphere_stereographic", 2, domain=BIG)
        k = MetricField("conformal_flat", 2, params={"c0": 0.3, "lin": [-0.2, 0.1]}, domain=BIG)
        hc = MetricField("constant_spd", 2, params={"matrix": [[2.0, 0.3], [0.3, 1.0]]}, domain=BIG)
        phi = ChartMap.mobius_ball([0.25, -0.15], Box(lo=[-0.6, -0.6], hi=[0.6, 0.6]))
        pts = rng.uniform(-0.45, 0.45, size=(1000, 2))
        for target in (k, hc):
            ph = pullback_metric(phi, h, pts, check_domain=False)
            pk = pullback_metric(phi, target, pts, check_domain=False)
            q = phi(pts)
            for i in range(0, 1000, 37):
                lhs = distortion_k2(ph[i], pk[i]).k_squared
                rhs = distortion_k2(h(q[i]), target(q[i])).k_squared
                assert lhs == pytest.approx(rhs, rel=1e-9)


class TestNormalizedPullback:
    def test_identity_map_fixes_fibers(self):
        rng = np.random.default_rng(3)
        ident = ChartMap.identity(2, BOX)
        g = MetricField("conformal_flat", 2, params={"c0": 0.2, "lin": [0.1, -0.3]}, domain=BIG)
        a = fiber_point(random_spd(rng, 2))
        p = np.array([0.1, 0.2])
        np.testing.assert_allclose(normalized_pullback(ident, g, p, a), a, atol=1e-12)

    def test_unit_determinant(self):
        rng = np.random.default_rng(4)
        c = ChartMap.mobius_ball([0.2, 0.2], BOX)
        g = MetricField("round_sphere_stereographic", 2, domain=BIG)
        for _ in range(20):
            a = fiber_point(random_spd(rng, 2))
            out = normalized_pullback(c, g, np.array([0.05, -0.1]), a)
            assert np.linalg.det(out) == pytest.approx(1.0, abs=1e-10)

    def test_product_rule(self):
        # psi*_N o phi*_N == (phi o psi)*_N
        rng = np.random.default_rng(5)
        g = MetricField("conformal_flat", 2, params={"c0": 0.1, "lin": [0.2, 0.1]}, domain=BIG)
        psi = ChartMap.linear(np.array([[0.9, 0.2], [-0.1, 1.1]]), BOX)
        phi = ChartMap.mobius_ball([0.1, -0.2], Box(lo=[-0.8, -0.8], hi=[0.8, 0.8]))
        comp = compose(psi, phi, source_box=BOX)
        for _ in range(30):
            p = BOX.halton_points(40)[rng.integers(0, 40)]
            a = fiber_point(random_spd(rng, 2))
            inner = normalized_pullback(phi, g, psi(p), a)
            lhs = normalized_pullback(psi, g, p, inner)
            rhs = normalized_pullback(comp, g, p, a)
            np.testing.assert_allclose(lhs, rhs, atol=1e-10)

    def test_fiber_isometry(self):
        rng = np.random.default_rng(6)
        c = ChartMap.mobius_ball([0.3, 0.05], BOX)
        g = MetricField("round_sphere_stereographic", 2, domain=BIG)
        p = np.array([0.12, -0.07])
        for _ in range(100):
            a = fiber_point(random_spd(rng, 2))
            b = fiber_point(random_spd(rng, 2))
            da = distance(
                normalized_pullback(c, g, p, a), normalized_pullback(c, g, p, b)
            )
            assert da == pytest.approx(distance(a, b), rel=1e-9, abs=1e-11)

    def test_trivialized_differential_normalization(self):
        # |det M|^{2/n} equals Det_g(phi* g)^{1/n}
        from qcdist import invariant_det

        c = ChartMap.linear(np.array([[2.0, 0.0], [0.4, 0.5]]), BOX)
        g = MetricField("conformal_flat", 2, params={"c0": -0.1, "lin": [0.3, 0.0]}, domain=BIG)
        p = np.array([0.2, 0.1])
        m = trivialized_differential(c, g, p)
        lhs = abs(np.linalg.det(m)) ** (2.0 / 2.0)
        rhs = invariant_det(g(p), pullback_metric(c, g, p)) ** (1.0 / 2.0)
        assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_direct_coordinate_formula_oracle(self):
        # the frame-action route must reproduce phi* A / Det_g(phi* g)^{1/n}
        # computed directly in chart coordinates
        from qcdist import invariant_det

        rng = np.random.default_rng(21)
        g = MetricField(
            "custom_polynomial",
            2,
            params={"a0": np.eye(2), "alin": 0.2 * rng.standard_normal((2, 2, 2)), "mu": 0.3},
            domain=BIG,
        )
        c = ChartMap.mobius_ball([0.15, -0.2], BOX)
        for _ in range(20):
            p = BOX.halton_points(32)[rng.integers(0, 32)]
            q = c(p)
            a_triv = fiber_point(random_spd(rng, 2))
            lq = np.linalg.cholesky(g(q))
            a_coord = lq @ a_triv @ lq.T
            jac = c.jacobian(p)
            s = invariant_det(g(p), pullback_metric(c, g, p)) ** 0.5
            direct_coord = jac.T @ a_coord @ jac / s
            lp = np.linalg.cholesky(g(p))
            direct_triv = np.linalg.solve(lp, np.linalg.solve(lp, direct_coord.T).T)
            via_action = normalized_pullback(c, g, p, a_triv)
            np.testing.assert_allclose(via_action, direct_triv, rtol=1e-10, atol=1e-12)


class TestLocalizationBound:
    def test_trivial_euclidean(self):
        ident = ChartMap.identity(2, BOX)
        c = ChartMap.linear(np.diag([2.0, 1.0]), BOX)
        rep = check_localization_bound(c, EUC, EUC, ident, ident, halton_samples())
        assert rep.ok
        assert rep.samples == 100

    def test_hyperbolic_with_mobius_isometry(self):
        hyp_box = Box(lo=[-0.5, 0.4], hi=[0.5, 1.4])
        hyp = MetricField("hyperbolic_halfspace", 2, domain=Box(lo=[-80, 1e-3], hi=[80, 90]))
        ident = ChartMap.identity(2, hyp_box)
        dil = compose(
            ChartMap.linear(2.0 * np.eye(2), hyp_box),
            ChartMap.translation([0.3, 0.0], Box(lo=[-2, 0.5], hi=[2, 3.2])),
            source_box=hyp_box,
        )
        rep = check_localization_bound(dil, hyp, hyp, ident, ident, hyp_box.halton_points(1000))
        assert rep.ok

    def test_random_linear_charts_constant_metrics(self):
        rng = np.random.default_rng(7)
        for _ in range(5):
            g = MetricField("constant_spd", 2, params={"matrix": random_spd(rng, 2)}, domain=BIG)
            h = MetricField("constant_spd", 2, params={"matrix": random_spd(rng, 2)}, domain=BIG)
            chart_g = ChartMap.linear(
                rng.standard_normal((2, 2)) + 2 * np.eye(2), BOX
            )
            chart_h = ChartMap.linear(
                rng.standard_normal((2, 2)) + 2 * np.eye(2), Box(lo=[-3, -3], hi=[3, 3])
            )
            mapc = ChartMap.linear(rng.standard_normal((2, 2)) + 2 * np.eye(2), BOX)
            rep = check_localization_bound(mapc, g, h, chart_g, chart_h, halton_samples())
            assert rep.ok


class TestCompositionBound:
    def test_conformal_slack(self):
        mob = ChartMap.mobius_ball([0.2, 0.1], BOX)
        lin = ChartMap.linear(np.diag([1.5, 0.5]), Box(lo=[-0.9, -0.9], hi=[0.9, 0.9]))
        rep = check_composition_bound(mob, lin, EUC, EUC, EUC, halton_samples())
        assert rep.ok
        assert rep.worst <= 1.0 / 4.0 + 1e-9  # slack factor n^n

    def test_two_linear_maps_exact(self):
        phi = ChartMap.linear(np.diag([2.0, 1.0]), BOX)
        psi = ChartMap.linear(np.diag([1.0, 3.0]), Box(lo=[-1, -1], hi=[1, 1]))
        rep = check_composition_bound(phi, psi, EUC, EUC, EUC, halton_samples())
        assert rep.ok
        comp_k2 = distortion_k2(np.eye(2), np.diag([4.0, 9.0])).k_squared
        assert comp_k2 == pytest.approx((13.0 / 2.0) ** 2 / 36.0, rel=1e-12)
        bound = 4.0 * (25.0 / 16.0) * (25.0 / 9.0)
        assert comp_k2 <= bound

    def test_catalog_sweep(self):
        rng = np.random.default_rng(8)
        inner_box = Box(lo=[-0.9, -0.9], hi=[0.9, 0.9])
        g = MetricField("conformal_flat", 2, params={"c0": 0.1, "lin": [0.2, -0.1]}, domain=BIG)
        h = MetricField("round_sphere_stereographic", 2, domain=BIG)
        k = MetricField("constant_spd", 2, params={"matrix": random_spd(rng, 2)}, domain=BIG)
        pairs = [
            (ChartMap.mobius_ball([0.2, -0.1], BOX), ChartMap.linear(np.diag([2.0, 0.7]), inner_box)),
            (ChartMap.linear(np.array([[1.0, 0.5], [0.0, 1.0]]), BOX), ChartMap.mobius_ball([0.1, 0.1], inner_box)),
            (ChartMap.translation([0.1, 0.2], BOX), ChartMap.mobius_ball([-0.2, 0.3], inner_box)),
        ]
        for m1, m2 in pairs:
            rep = check_composition_bound(m1, m2, g, h, k, BOX.halton_points(1000))
            assert rep.ok


class TestInverseBoundMap:
    def test_conformal_map(self):
        mob = ChartMap.mobius_ball([0.3, 0.1], BOX)
        rep = check_inverse_bound_map(mob, EUC, EUC, halton_samples())
        assert rep.ok
        assert rep.worst <= 1.0 + 1e-9

    def test_linear_equality_in_2d(self):
        # n - 1 = 1: inverse distortion equals the forward sup at matched points
        c = ChartMap.linear(np.diag([2.0, 1.0]), BOX)
        rep = check_inverse_bound_map(c, EUC, EUC, halton_samples())
        assert rep.ok
        assert rep.worst == pytest.approx(1.0, rel=1e-9)

    def test_mobius_linear_composition_sweep(self):
        comp = compose(
            ChartMap.mobius_ball([0.15, 0.2], BOX),
            ChartMap.linear(np.array([[1.4, 0.2], [0.0, 0.8]]), Box(lo=[-1, -1], hi=[1, 1])),
            source_box=BOX,
        )
        rep = check_inverse_bound_map(comp, EUC, EUC, BOX.halton_points(1000))
        assert rep.ok

    def test_requires_declared_inverse(self):
        from qcdist import InverseUnavailableError

        fwd = ChartMap.linear(np.diag([2.0, 1.0]), BOX)
        orphan = ChartMap(
            "linear",
            2,
            {"matrix": np.diag([2.0, 1.0])},
            BOX,
            _skip_inverse=True,
        )
        assert fwd.inverse is not None
        with pytest.raises(InverseUnavailableError):
            check_inverse_bound_map(orphan, EUC, EUC, halton_samples())


class TestGradientBound:
    def test_constant_field(self):
        u = ScalarField("affine", 2, {"a": [0.0, 0.0], "b": 3.0})
        c = ChartMap.linear(np.diag([2.0, 1.0]), BOX)
        rep = check_gradient_bound(c, EUC, EUC, u, halton_samples())
        assert rep.ok

    def test_coordinate_closed_form(self):
        # u = y_1, phi = diag(2, 1): lhs = 4, rhs = 4 K Det = 8 * 5/4 = 10
        u = ScalarField("coordinate", 2, {"index": 0})
        c = ChartMap.linear(np.diag([2.0, 1.0]), BOX)
        rep = check_gradient_bound(c, EUC, EUC, u, halton_samples())
        assert rep.ok
        assert rep.worst == pytest.approx(4.0 / 10.0, rel=1e-9)

    def test_random_sweep(self):
        rng = np.random.default_rng(9)
        g = MetricField("conformal_flat", 2, params={"c0": 0.1, "lin": [0.1, 0.2]}, domain=BIG)
        h = MetricField("round_sphere_stereographic", 2, domain=BIG)
        for _ in range(4):
            s = rng.standard_normal((2, 2))
            u = ScalarField("quadratic", 2, {"s": s + s.T, "a": rng.standard_normal(2)})
            chart = ChartMap.mobius_ball(rng.uniform(-0.3, 0.3, 2), BOX)
            rep = check_gradient_bound(chart, g, h, u, BOX.halton_points(1000))
            assert rep.ok


class TestSubstitution:
    def test_identity_exact(self):
        f = ScalarField("gaussian", 2, {"mu": [0.0, 0.0], "sigma": 0.6})
        g = MetricField("conformal_flat", 2, params={"c0": 0.2, "lin": [0.1, 0.0]}, domain=BIG)
        ident = ChartMap.identity(2, BOX)
        res = substitution_check(ident, g, g, f, BOX, 32)
        assert res.relerr <= 1e-14

    def test_linear_unit_density(self):
        f = ScalarField("affine", 2, {"a": [0.0, 0.0], "b": 1.0})
        c = ChartMap.linear(np.diag([2.0, 1.0]), Box(lo=[0.0, 0.0], hi=[1.0, 1.0]))
        res = substitution_check(c, EUC, EUC, f, Box(lo=[0.0, 0.0], hi=[1.0, 1.0]), 16)
        assert res.lhs == pytest.approx(2.0, rel=1e-14)
        assert res.rhs == pytest.approx(2.0, rel=1e-14)
        assert res.relerr <= 1e-14

    def test_mobius_order_two_convergence(self):
        mob = ChartMap.mobius_ball([0.3, 0.1], Box(lo=[-0.6, -0.6], hi=[0.6, 0.6]))
        f = ScalarField("gaussian", 2, {"mu": [-0.15, 0.0], "sigma": 0.5})
        ball = BallRegion(center=[0.1, 0.05], radius=0.3)
        errs = [substitution_check(mob, EUC, EUC, f, ball, m).relerr for m in (16, 32, 64)]
        assert errs[0] / errs[1] == pytest.approx(4.0, abs=0.5)
        assert errs[1] / errs[2] == pytest.approx(4.0, abs=0.5)


class TestUniformConvergence:
    def test_constant_sequence(self):
        c = ChartMap.linear(np.diag([2.0, 1.0]), BOX)
        rep = uniform_convergence_demo([c, c, c], c, EUC, EUC, halton_samples())
        assert rep.certificate_ok
        assert np.all(rep.sup_distances == 0.0)
        np.testing.assert_allclose(rep.k2_sups, rep.limit_k2_sup)

    def test_monotone_linear_sequence(self):
        maps = [
            ChartMap.linear(np.diag([2.0 - 1.0 / j, 1.0]), BOX) for j in range(1, 9)
        ]
        limit = ChartMap.linear(np.diag([2.0, 1.0]), BOX)
        rep = uniform_convergence_demo(
            maps, limit, EUC, EUC, halton_samples(), k2_bound=25.0 / 16.0
        )
        assert rep.certificate_ok
        assert rep.limit_k2_sup == pytest.approx(25.0 / 16.0, rel=1e-12)
        assert np.all(np.diff(rep.k2_sups) > 0)
        assert np.all(np.diff(rep.sup_distances) < 0)
        expected = np.array(
            [((a**2 + 1) / 2) ** 2 / a**2 for a in (2.0 - 1.0 / np.arange(1, 9))]
        )
        np.testing.assert_allclose(rep.k2_sups, expected, rtol=1e-11)

    def test_mobius_parameter_sequence(self):
        target = np.array([0.2, 0.1])
        maps = [
            ChartMap.mobius_ball(target + 0.2 / j * np.array([1.0, -0.5]), BOX)
            for j in range(1, 7)
        ]
        limit = ChartMap.mobius_ball(target, BOX)
        rep = uniform_convergence_demo(maps, limit, EUC, EUC, halton_samples())
        assert rep.certificate_ok
        assert rep.limit_k2_sup == pytest.approx(1.0, abs=1e-9)
        assert np.all(np.diff(rep.sup_distances) < 0)


class TestConformalCatalog:
    def test_k2_within_tolerance_everywhere(self):
        for case in conformal_catalog_cases():
            pts = case.chart.source_box.halton_points(512)
            sup = sampled_sup_k2(case.chart, case.g, case.h, pts)
            assert 1.0 - 1e-12 <= sup <= 1.0 + 1e-8, case.name

    def test_conformal_factor_recovery(self):
        from qcdist import conformal_factor

        for case in conformal_catalog_cases():
            pts = case.chart.source_box.halton_points(32)
            expected = case.factor(pts)
            for i in range(0, 32, 5):
                got = conformal_factor(
                    case.g(pts[i]),
                    pullback_metric(case.chart, case.h, pts[i], check_domain=False),
                    1e-8,
                )
                assert got is not None, case.name
                assert got == pytest.approx(expected[i], rel=1e-9), case.name
