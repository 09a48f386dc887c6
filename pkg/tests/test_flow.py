"""Tests for flow integration, the Ahlfors operator, and the growth bound."""

import numpy as np
import pytest

from qcdist import (
    DomainError,
    MetricField,
    VectorField,
    ahlfors_operator,
    integrate_flow,
    kdot_identity_check,
    invariant_trace,
    lie_derivative_metric,
)
from qcdist.flow import pullback_naturality_residual
from qcdist.sampling import Box

BIG = Box(lo=[-3.0, -3.0], hi=[3.0, 3.0])
EUC = MetricField("euclidean", 2, domain=BIG)
HYPERBOLIC_FIELD = VectorField("linear", 2, {"matrix": [[1.0, 0.0], [0.0, -1.0]]}, domain=BIG)
ROTATION = VectorField("killing_rotation", 2, {"omega": [[0.0, -1.0], [1.0, 0.0]]}, domain=BIG)


def sample_square(count=32, half=0.5):
    return Box(lo=[-half, -half], hi=[half, half]).halton_points(count)


class TestLieDerivative:
    def test_killing_rotation_vanishes(self):
        out = lie_derivative_metric(ROTATION, EUC, np.array([0.3, 0.4]))
        assert np.max(np.abs(out)) <= 1e-9

    def test_hyperbolic_field_closed_form(self):
        out = lie_derivative_metric(HYPERBOLIC_FIELD, EUC, np.array([0.2, -0.1]))
        np.testing.assert_allclose(out, 2.0 * np.diag([1.0, -1.0]), atol=1e-10)

    def test_radial_field_closed_form(self):
        radial = VectorField("linear", 2, {"matrix": np.eye(2)}, domain=BIG)
        out = lie_derivative_metric(radial, EUC, np.array([0.5, 0.1]))
        np.testing.assert_allclose(out, 2.0 * np.eye(2), atol=1e-10)

    def test_stencil_boundary_error(self):
        with pytest.raises(DomainError):
            lie_derivative_metric(ROTATION, EUC, np.array([3.0, 0.0]))


class TestAhlfors:
    def test_conformal_killing_in_kernel(self):
        ck = VectorField(
            "conformal_killing",
            2,
            {"translation": [0.3, -0.1], "omega": [[0.0, 0.5], [-0.5, 0.0]], "scale": 0.4,
             "special": [0.2, -0.3]},
            domain=BIG,
        )
        out = ahlfors_operator(ck, EUC, np.array([0.25, 0.1]))
        assert np.max(np.abs(out)) <= 1e-9

    def test_hyperbolic_field_already_trace_free(self):
        out = ahlfors_operator(HYPERBOLIC_FIELD, EUC, np.array([0.1, 0.2]))
        np.testing.assert_allclose(out, 2.0 * np.diag([1.0, -1.0]), atol=1e-10)

    def test_output_is_trace_free(self):
        rng = np.random.default_rng(0)
        g = MetricField(
            "conformal_flat", 2, params={"c0": 0.1, "lin": [0.3, -0.2]}, domain=BIG
        )
        for _ in range(10):
            f = VectorField(
                "polynomial",
                2,
                {
                    "const": rng.standard_normal(2),
                    "lin": rng.standard_normal((2, 2)),
                    "quad": 0.4 * rng.standard_normal((2, 2, 2)),
                },
                domain=BIG,
            )
            p = rng.uniform(-0.5, 0.5, 2)
            out = ahlfors_operator(f, g, p)
            assert abs(invariant_trace(g(p), out)) <= 1e-10 * max(1.0, np.abs(out).max())


class TestIntegrateFlow:
    def test_k_at_zero_is_one(self):
        trace = integrate_flow(HYPERBOLIC_FIELD, EUC, 0.5, 100, sample_square(16))
        assert trace.k_of_t[0] == pytest.approx(1.0, abs=1e-12)

    def test_conformal_killing_flow_stays_conformal(self):
        ck = VectorField(
            "conformal_killing",
            2,
            {"omega": [[0.0, 0.6], [-0.6, 0.0]], "scale": 0.3, "special": [0.1, -0.05]},
            domain=BIG,
        )
        trace = integrate_flow(ck, EUC, 0.5, 500, sample_square(16, half=0.3))
        assert not trace.truncated
        np.testing.assert_allclose(trace.k_of_t, 1.0, atol=1e-7)
        assert trace.sx_sup <= 1e-8

    def test_hyperbolic_closed_form(self):
        trace = integrate_flow(HYPERBOLIC_FIELD, EUC, 1.0, 1000, sample_square(32))
        assert not trace.truncated
        expected = np.cosh(2.0 * trace.times)
        np.testing.assert_allclose(trace.k_of_t, expected, rtol=1e-6)
        assert trace.sx_sup == pytest.approx(2.0 * np.sqrt(2.0), rel=1e-12)
        np.testing.assert_allclose(
            trace.bound_of_t, np.exp(2.0 * np.sqrt(2.0) * trace.times), rtol=1e-12
        )
        assert trace.gronwall_ok

    def test_gronwall_certificate_margin(self):
        trace = integrate_flow(HYPERBOLIC_FIELD, EUC, 1.0, 500, sample_square(16))
        assert np.all(trace.k_of_t <= trace.bound_of_t * (1 + 1e-6))
        # strict margin away from t = 0
        assert np.all(trace.k_of_t[10:] < trace.bound_of_t[10:])

    def test_domain_exit_truncates(self):
        pts = np.array([[2.5, 0.1], [0.1, 0.1]])
        trace = integrate_flow(HYPERBOLIC_FIELD, EUC, 1.0, 200, pts)
        assert trace.truncated
        assert trace.times[-1] < 1.0
        assert trace.times.shape[0] >= 2

    def test_variational_equation_consistency(self):
        # integrated differential vs finite differences of the trajectories
        from qcdist import kernels

        c0, a1, q2 = HYPERBOLIC_FIELD.poly_coefficients()
        p = np.array([[0.2, 0.3]])
        delta = 1e-4
        _, ds = kernels.flow_rk4(p, c0, a1, q2, 1.0, 1000)
        fd = np.empty((2, 2))
        for j in range(2):
            e = np.zeros(2)
            e[j] = delta
            xs_p, _ = kernels.flow_rk4(p + e, c0, a1, q2, 1.0, 1000)
            xs_m, _ = kernels.flow_rk4(p - e, c0, a1, q2, 1.0, 1000)
            fd[:, j] = (xs_p[0, -1] - xs_m[0, -1]) / (2 * delta)
        np.testing.assert_allclose(ds[0, -1], fd, atol=1e-5)

    def test_quadratic_field_flow(self):
        f = VectorField(
            "polynomial",
            2,
            {"lin": [[0.3, 0.0], [0.0, -0.2]], "quad": 0.2 * np.ones((2, 2, 2))},
            domain=BIG,
        )
        trace = integrate_flow(f, EUC, 0.6, 300, sample_square(16, half=0.3))
        assert trace.gronwall_ok

    def test_rotation_is_isometry_of_sphere_metric(self):
        # rotations fix the stereographic sphere metric, so the flow stays
        # conformal even though the metric is curved (exercises the spatial
        # finite-difference path of the Lie derivative)
        sphere = MetricField("round_sphere_stereographic", 2, domain=BIG)
        trace = integrate_flow(ROTATION, sphere, 1.0, 400, sample_square(16, half=0.4))
        assert trace.sx_sup <= 1e-8
        np.testing.assert_allclose(trace.k_of_t, 1.0, atol=1e-7)

    def test_curved_metric_hyperbolic_field(self):
        cf = MetricField(
            "conformal_flat", 2, params={"c0": 0.1, "lin": [0.2, -0.1]}, domain=BIG
        )
        trace = integrate_flow(HYPERBOLIC_FIELD, cf, 0.8, 400, sample_square(16, half=0.4))
        assert trace.gronwall_ok
        resid = kdot_identity_check(trace, HYPERBOLIC_FIELD, cf)
        assert resid <= 1e-3


class TestKdotIdentity:
    def test_conformal_killing_residual_tiny(self):
        ck = VectorField(
            "conformal_killing", 2, {"omega": [[0.0, 0.4], [-0.4, 0.0]], "scale": 0.2},
            domain=BIG,
        )
        trace = integrate_flow(ck, EUC, 0.5, 500, sample_square(8, half=0.3))
        resid = kdot_identity_check(trace, ck, EUC)
        assert resid <= 1e-5

    def test_closed_form_residual_small(self):
        trace = integrate_flow(HYPERBOLIC_FIELD, EUC, 1.0, 1000, sample_square(8))
        resid = kdot_identity_check(trace, HYPERBOLIC_FIELD, EUC)
        assert resid <= 1e-4

    def test_second_order_decay(self):
        resids = []
        for steps in (250, 500, 1000):
            trace = integrate_flow(HYPERBOLIC_FIELD, EUC, 1.0, steps, sample_square(8))
            resids.append(kdot_identity_check(trace, HYPERBOLIC_FIELD, EUC))
        assert resids[0] / resids[1] == pytest.approx(4.0, abs=0.5)
        assert resids[1] / resids[2] == pytest.approx(4.0, abs=0.5)

    def test_too_few_samples_rejected(self):
        trace = integrate_flow(HYPERBOLIC_FIELD, EUC, 0.01, 1, sample_square(4))
        with pytest.raises(ValueError):
            kdot_identity_check(trace, HYPERBOLIC_FIELD, EUC)


class TestPullbackNaturality:
    def test_identity_along_flow(self):
        g = MetricField(
            "conformal_flat", 2, params={"c0": 0.05, "lin": [0.2, -0.1]}, domain=BIG
        )
        f = VectorField("linear", 2, {"matrix": [[0.5, 0.1], [0.0, -0.4]]}, domain=BIG)
        trace = integrate_flow(f, g, 0.8, 400, sample_square(16, half=0.4))
        for idx in (100, 200, 400):
            assert pullback_naturality_residual(trace, f, g, idx) <= 1e-6
