"""pointproc: simulate point processes, analyze spatial point patterns.

Temporal side: homogeneous and non-homogeneous Poisson processes and
self-exciting Hawkes processes, all on a finite horizon.  Spatial side:
complete spatial randomness, density surfaces, distance statistics with
Monte Carlo envelopes, and hotspot/cluster detection on grids.
"""

__version__ = "0.1.0"

from .core import (
    CountGrid,
    DegenerateDataError,
    EnvelopeError,
    EventTimes,
    GridSpec,
    InsufficientDataError,
    ParameterError,
    Region,
    RngStream,
    SpaceTimeEvents,
    SpatialPattern,
    exponential_draw,
    inter_arrival_times,
)
from .detect import (
    Cylinder,
    ScanResult,
    ZScoreGrid,
    aggregate_to_grid,
    gi_star,
    rss,
    space_time_scan,
)
from .spatial import (
    NNI_MAX_HEX,
    DensitySurface,
    EnvelopeResult,
    QuadratResult,
    csr_envelope,
    dispersion_by_block,
    f_function,
    g_function,
    kde_surface,
    mean_min_distance,
    nni,
    quadrat_counts,
    ripleys_k,
    simulate_csr,
)
from .temporal import (
    Branching,
    ExponentialKernel,
    HawkesModel,
    IntensityFn,
    PowerLawKernel,
    branching_factor,
    expected_cluster_size,
    hawkes_intensity,
    nhpp_mean,
    poisson_count_pmf,
    simulate_hawkes,
    simulate_hpp,
    simulate_nhpp,
)

__all__ = [
    "Branching",
    "CountGrid",
    "Cylinder",
    "DegenerateDataError",
    "DensitySurface",
    "EnvelopeError",
    "EnvelopeResult",
    "EventTimes",
    "ExponentialKernel",
    "GridSpec",
    "HawkesModel",
    "InsufficientDataError",
    "IntensityFn",
    "NNI_MAX_HEX",
    "ParameterError",
    "PowerLawKernel",
    "QuadratResult",
    "Region",
    "RngStream",
    "ScanResult",
    "SpaceTimeEvents",
    "SpatialPattern",
    "ZScoreGrid",
    "aggregate_to_grid",
    "branching_factor",
    "csr_envelope",
    "dispersion_by_block",
    "expected_cluster_size",
    "exponential_draw",
    "f_function",
    "g_function",
    "gi_star",
    "hawkes_intensity",
    "inter_arrival_times",
    "kde_surface",
    "mean_min_distance",
    "nhpp_mean",
    "nni",
    "poisson_count_pmf",
    "quadrat_counts",
    "ripleys_k",
    "rss",
    "simulate_csr",
    "simulate_hawkes",
    "simulate_hpp",
    "simulate_nhpp",
    "space_time_scan",
    "__version__",
]
