"""thetalab: a numerical laboratory for Riemann theta functions,
KP-type bilinear identities, Kummer flex tests, and the direction-data
searches that connect them."""

from .bilinear import (
    DirectionJet,
    ResidualReport,
    as_riemann_matrix,
    baker_akhiezer,
    build_report,
    gauge_balance,
    gauge_normalize,
    gauge_rescale,
    hierarchy_residual,
    hierarchy_scan,
    hirota_residual,
    kp_field_u,
    kp_standard_time_direction,
    longeq_residual,
    p_AB_residual,
    p_residual,
    sweep_residual,
)
from .divisor import (
    DivisorKind,
    DivisorPoint,
    SamplePlan,
    SamplingNote,
    UnderSampledWarning,
    sample_D1_theta,
    sample_theta_divisor,
    sample_theta_intersection,
    weil_check,
)
from .engine import (
    AbelianPoint,
    BatchThetaEvaluator,
    Characteristic,
    RiemannMatrix,
    ThetaJet,
    as_point,
    canonical_request,
    lattice_coords,
    reduce_point,
    theta_char_eval,
    theta_eval,
)
from .errors import (
    DegenerateJetError,
    DegenerateSampleError,
    InvalidInputError,
    NotOnDivisorError,
    PoleError,
    PrecisionUnreachableError,
    TauNotPositiveDefiniteError,
    TauNotSymmetricError,
    ThetaLabError,
    UnsupportedGenusError,
)
from .kummer import (
    FlexReport,
    HalfCandidate,
    KummerPoint,
    decomposability_indicator,
    even_characteristics,
    flex_scan,
    flex_test,
    half_points,
    kummer_map,
)
from .search import (
    SearchProblem,
    SearchResult,
    fit,
    fit_hierarchy,
)

__all__ = [
    "AbelianPoint",
    "BatchThetaEvaluator",
    "Characteristic",
    "DegenerateJetError",
    "DegenerateSampleError",
    "DirectionJet",
    "DivisorKind",
    "DivisorPoint",
    "FlexReport",
    "HalfCandidate",
    "InvalidInputError",
    "KummerPoint",
    "NotOnDivisorError",
    "PoleError",
    "PrecisionUnreachableError",
    "ResidualReport",
    "RiemannMatrix",
    "SamplePlan",
    "SamplingNote",
    "SearchProblem",
    "SearchResult",
    "TauNotPositiveDefiniteError",
    "TauNotSymmetricError",
    "ThetaJet",
    "ThetaLabError",
    "UnderSampledWarning",
    "UnsupportedGenusError",
    "as_point",
    "as_riemann_matrix",
    "baker_akhiezer",
    "build_report",
    "canonical_request",
    "decomposability_indicator",
    "even_characteristics",
    "fit",
    "fit_hierarchy",
    "flex_scan",
    "flex_test",
    "gauge_balance",
    "gauge_normalize",
    "gauge_rescale",
    "half_points",
    "hierarchy_residual",
    "hierarchy_scan",
    "hirota_residual",
    "kp_field_u",
    "kp_standard_time_direction",
    "kummer_map",
    "lattice_coords",
    "longeq_residual",
    "p_AB_residual",
    "p_residual",
    "reduce_point",
    "sample_D1_theta",
    "sample_theta_divisor",
    "sample_theta_intersection",
    "sweep_residual",
    "theta_char_eval",
    "theta_eval",
    "weil_check",
]

__version__ = "0.1.0"
