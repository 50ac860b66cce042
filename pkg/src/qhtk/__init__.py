"""Quasihyperbolic metric toolkit: distances, geodesics, balls, induced norms."""

from .geometry import (
    AxisPointFamily,
    BallPrimitive,
    BoxPrimitive,
    CertificationError,
    DomainSpec,
    DomainViolationError,
    EUCLIDEAN,
    HalfSpace,
    InvalidInputError,
    NormSpec,
    Polygon,
    Polyline,
    QHError,
    RemovedPoint,
    RemovedSegment,
    Slab,
    StarlikeDomain3D,
    half_plane,
    l2_example_distance,
    l2_section,
    norm_eval,
    prolongation_polygon,
    punctured_space,
    strip,
    symmetric_box,
    unit_ball,
)
from .metric import (
    DEFAULT_QUADRATURE,
    EvaluationError,
    QuadratureConfig,
    halfplane_distance_oracle,
    punctured_distance_oracle,
    qh_lower_bound,
    qh_path_length,
)
from .solver import (
    CenterEvaluator,
    DEFAULT_SOLVER,
    GeodesicResult,
    NoPathError,
    RefinementConfig,
    SolverConfig,
    SolverStalledError,
    geodesic_multiplicity,
    grid_init,
    qh_distance,
    refine_path,
)

__version__ = "0.1.0"
