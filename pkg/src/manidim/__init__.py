"""Correlation-dimension analysis for trajectories of discrete distributions.

The toolkit treats a sequence of probability vectors as a path on the
statistical manifold, measures recurrence through pairwise Fisher-Rao
(or Euclidean) distances, and estimates the correlation dimension as
the log-log slope of the cumulative pair-distance curve. It ships
seeded generators for reference processes (Markov chains, Dirichlet
noise, uniform manifold noise, preferential-attachment growth), exact
numerical checks of the marginalization-distortion theorems, and a
bit-exact binary file format for probability sequences.
"""

from .corrdim import (
    CorrelationCurve,
    DimensionEstimate,
    DistanceHistogram,
    EpsilonGrid,
    EstimateResult,
    EstimationError,
    FilterTooStrictError,
    auto_grid,
    correlation_curve,
    estimate,
    fit_dimension,
    pairwise_histogram,
)
from .metrics import (
    EUCLIDEAN,
    FISHER_RAO,
    SqrtEmbedding,
    bhattacharyya_coeff,
    euclidean,
    fisher_rao,
    sqrt_embed,
)
from .prob import (
    FilterSpec,
    InvalidDistributionError,
    RowViolation,
    apply_filter,
    entropy_bits,
    renormalize,
    require_valid,
    shannon_entropy,
    validate,
)
from .processes import (
    DirichletSpec,
    GrowthNetConfig,
    GrowthNetState,
    MarkovChain,
    gen_dirichlet_iid,
    gen_growth_net,
    gen_markov,
    gen_uniform_sphere_noise,
)
from .pseq import (
    PseqFormatError,
    PseqHeader,
    read_jsonl,
    read_pseq,
    read_sequence,
    write_pseq,
)
from .reduce import ReductionSpec, modulo_project, project_sequence
from .theory import (
    AbsorbingMarkovPair,
    AbsorbingPairError,
    ClosedTextDistribution,
    DistortionReport,
    GammaExperiment,
    LimitProbe,
    cos_half_dfr_x,
    distortion_rate,
    enumerate_closed_texts,
    gamma_merge_experiment,
    phi_linearity_check,
    probe_distortion_limit,
    random_absorbing_pair,
)

__version__ = "0.1.0"
