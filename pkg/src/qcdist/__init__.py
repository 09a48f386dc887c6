"""qcdist: coordinate-invariant quasiconformal distortion toolkit.

Pointwise distortion algebra for metric pairs, the geometry of
unit-determinant SPD fibers (with minimal enclosing balls), chart/metric
catalogs with pullback certificates, invariant conformal structures for
finite quasiconformal groups, and vector-field flow experiments.
"""

from ._accel import USING_NUMBA
from .charts import ChartMap, compose
from .errors import (
    ConfigError,
    DimensionMismatchError,
    DomainError,
    GroupValidationError,
    InverseUnavailableError,
    NotSPDError,
    NumericalFaultError,
    QcdistError,
    SingularJacobianError,
    ValidationError,
)
from .fields import MetricField, ScalarField, VectorField
from .flow import (
    FlowTrace,
    ahlfors_operator,
    integrate_flow,
    kdot_identity_check,
    lie_derivative_metric,
)
from .groups import (
    InvariantStructure,
    OrbitSet,
    QCGroup,
    beltrami_residual,
    build_orbit,
    check_orbit_invariance,
    solve_invariant_structure,
)
from .manifold import (
    Ball,
    BallResult,
    SolverConfig,
    ball_residual,
    distance,
    exp_map,
    fiber_inner,
    fiber_point,
    geodesic,
    gl_action,
    log_map,
    minimal_enclosing_ball,
    tangent_at,
)
from .pullback import (
    CheckReport,
    DistortionReport,
    adjoint_differential,
    check_composition_bound,
    check_gradient_bound,
    check_inverse_bound_map,
    check_localization_bound,
    conformal_catalog_cases,
    map_distortion,
    normalized_pullback,
    pullback_metric,
    substitution_check,
    uniform_convergence_demo,
)
from .sampling import BallRegion, Box, halton
from .tensor import (
    DistortionValue,
    check_inverse_bound,
    check_ratio_bound,
    check_submultiplicativity,
    conformal_factor,
    distortion_eigenvalues,
    distortion_k2,
    invariant_det,
    invariant_trace,
    metric_norm,
)

__version__ = "0.1.0"
