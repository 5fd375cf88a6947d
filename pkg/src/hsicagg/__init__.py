"""Aggregated HSIC independence tests with Gaussian kernels."""

__version__ = "0.1.0"

from .aggregation import (  # noqa: E402
    AggregatedOutcome,
    WeightedCollection,
    aggregated_test,
    diagonal_collection,
    dyadic_anisotropic_collection,
    dyadic_isotropic_collection,
    estimate_u_alpha,
    scaled_grid_collection,
    singleton_collection,
    unit_grid_collection,
)
from .errors import (  # noqa: E402
    DegenerateSampleError,
    EmptyCollectionError,
    HsicError,
    InvalidArgumentError,
    SampleTooSmallError,
)
from .estimator import hsic_bruteforce, hsic_fast, hsic_permuted, hsic_statistics  # noqa: E402
from .kernels import (  # noqa: E402
    Bandwidths,
    GramPair,
    Sample,
    check_assumption_a2,
    compute_grams,
    empirical_bandwidths,
    gaussian_kernel_value,
    nikolskii_optimal_bandwidths,
    sobolev_optimal_bandwidths,
)
from .permutation import (  # noqa: E402
    SingleTestOutcome,
    draw_permutations,
    permutation_quantile,
    single_permuted_test,
)
from .theoretical import NullSampler, mc_null_statistics, theoretical_aggregated_test  # noqa: E402
