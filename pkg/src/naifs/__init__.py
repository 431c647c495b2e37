"""Topological entropy and pressure of non-autonomous iterated function systems."""

from .core import NaifsSchedule, Word, WordEnsemble, apply_word, blocked, bowen_distance, \
    derive_seed, in_dynamical_ball, orbit, orbit_matrix, shifted, words
from .entropy import (
    AsymptoticEntropy,
    CountRecord,
    EntropyPointProbe,
    NonwanderingReport,
    RateEstimate,
    asymptotic_entropy,
    averaged_counts,
    cover_count,
    entropy_estimate,
    entropy_point_probe,
    nonwandering_set,
    separated_count,
    spanning_count,
)
from .errors import (
    InputError,
    NaifsError,
    PreconditionError,
    ResolutionError,
    SaturationError,
    UnderResolvedError,
    UnsupportedCapabilityError,
)
from .maps import CircleAffine, CompositeMap, Identity, IntervalAffine, MapBase, \
    PomeauManneville, Power, Tabulated, TorusEndo, make_map
from .pressure import (
    Potential,
    PressureRecord,
    averaged_pressure,
    birkhoff_sum,
    cover_pressure_sum,
    fixed_scale_pressure,
    make_potential,
    pressure_estimate,
    variation,
    weighted_separated_sup,
    weighted_spanning_inf,
)
from .properties import (
    ExactnessReport,
    ExpansivityCertificate,
    NotExpansiveVerdict,
    SpecInstance,
    TraceReport,
    exactness_N,
    expansivity_check,
    inverse_branch_compose,
    trace_specification,
    verify_trace,
)
from .spaces import Grid, Space, ball_points, distance, grid_points

__version__ = "0.1.0"
