"""Contravariant Levi-Civita geometry of Poisson manifolds and Poisson warped products."""
from .connection import (
    ConnectionCoefficients,
    PointwiseGeometry,
    SingularCometricError,
    apply_connection,
    compatibility_residual,
    curvature,
    curvature_at,
    hessian,
    laplacian,
    levi_civita,
    ricci,
    ricci_at,
    scalar_curvature,
)
from .einstein import (
    EinsteinVerdict,
    SolverError,
    WarpSolution,
    einstein_check,
    einstein_conditions,
    grw_ricci_flat_check,
    solve_constant_scalar,
    solve_einstein_warp,
)
from .expr import DomainError, ParseError, ScalarField, UnknownIdentifierError, differentiate, evaluate, parse, to_text
from .geometry import (
    BivectorField,
    Chart,
    Cometric,
    CovectorField,
    GeometryError,
    VectorField,
    is_casimir,
    j_endomorphism,
    jacobi_residual,
    koszul_bracket,
    sample_points,
    sharp,
)
from .manifest import Manifest, ManifestError, load_manifest
from .report import Check, VerificationReport
from .warped import (
    PoissonManifold,
    WarpedSpace,
    WarpError,
    build_warped,
    oracle_connection,
    oracle_curvature,
    oracle_ricci,
    oracle_scalar,
    sharp_decomposition_check,
    verify_decomposition,
)

__version__ = "0.1.0"
