"""Plane-wave models in Brinkmann coordinates: explicit similarity-group
actions, finite-difference curvature checks, compact-quotient criteria,
and invariant conformal gauges."""

__version__ = "0.1.0"

from .lie_core import (
    ConfGroupElement,
    Derivation,
    HeisAlgebraElement,
    HeisAutomorphism,
    HeisElement,
    bracket,
    conjugate_to_linear,
    contraction_test,
    exp_derivation,
    group_inv,
    group_mul,
    heis_exp,
    heis_inv,
    heis_log,
    heis_mul,
    rho_k,
    spectral_type,
)
from .geometry import (
    BrinkmannPoint,
    ConstantProfile,
    FlatnessReport,
    MetricAtPoint,
    ModelSpec,
    SampledProfile,
    check_parallel,
    conformal_flatness,
    curvature_at,
    inverse_metric_at,
    metric_at,
)
from .chart_action import (
    ChartMap,
    SimilarityReport,
    compose,
    pullback_metric,
    realize_conf_element,
    realize_conf_flow,
    realize_flip,
    realize_heis,
    realize_K,
    realize_translation_flow,
    similarity_factor,
)
from .quotient_lab import (
    BuiltExample,
    GammaSpec,
    LatticeReport,
    PropernessReport,
    build_example,
    lattice_preservation,
    malcev_closure,
    membership,
    orbit_separation,
    properness_check,
)
from .conformal_gauge import (
    GaugeFunction,
    GaugeReport,
    GaugeSpec,
    build_gauge,
    measure_gauge_data,
    rescaled_metric_at,
    verify_gauge,
)
from .sampling import brinkmann_samples
