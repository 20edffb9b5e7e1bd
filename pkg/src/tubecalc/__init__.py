"""Numerics for distribution calculus along closed embedded submanifolds."""

from .errors import (
    CodimUnsupported,
    DimUnsupported,
    ExpansionUnavailable,
    IllConditioned,
    IoError,
    NoConvergence,
    NotConverged,
    OnManifold,
    OrderTooHigh,
    RankDeficient,
    SchemaError,
    ShapeUnsupported,
    SupportExceedsTube,
    TubecalcError,
)
from .geometry import (
    NormalFrame,
    Submanifold,
    TubularCoordinates,
    embed,
    embed_points,
    frame,
    frame_vectors,
    grad_rho,
    project,
    tube_coords,
)
from .tangent import (
    SecondFundamentalData,
    SurfaceFunction,
    b_coeff,
    delta_derivative,
    delta_derivative_omega,
    jacobian_pi,
    normal_derivative,
    second_fundamental,
    theta,
    theta_vector,
)
from .expansion import (
    Expansion,
    ThickTestFunction,
    expand_derivative,
    expansion_from_testfn,
    extract_coeffs,
    partial_derivative,
    taylor_coeffs_smooth,
    validate_strong_expansion,
)
from .quadrature import (
    QuadConfig,
    QuadratureRule,
    fiber_rule,
    fp_radial,
    integrate_tube,
    sigma_rule,
    unit_sphere_measure,
)
from .catalog import (
    Multiplier,
    catalog_test_functions,
    density_one,
    density_omega,
    density_theta,
    make_bump,
    make_flat_normal_component,
    make_laurent,
    make_smooth_poly,
    mult_const,
    mult_coordinate,
    mult_rho,
    mult_theta,
    multiply_testfn,
    radial_cutoff,
)
from .distributions import (
    LinearCombination,
    Multiplied,
    PairingResult,
    PfPsi,
    PfRhoLambda,
    ThickDelta,
    ThickDeltaDerivative,
    ThickDistribution,
    apply_multiplier,
    combination,
    derivative,
    leibniz,
    pair,
    project_pair,
    residue,
)
from .shapes import ShapeOracle, make_circle3d, make_sphere, sphere_delta_derivative_oracle

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
