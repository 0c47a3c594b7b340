"""Set-based evaluation of generated-image grids against target
exemplars: browsing-model metrics over sampled viewing trajectories,
diversity and distribution-distance baselines, and statistics for
validating metrics against human preference annotations."""

from .baselines import (
    GaussianSummary,
    diversity,
    frechet_distance,
    gaussian_summary,
    population_fid_report,
)
from .errors import (
    CapabilityError,
    ConfigError,
    DegenerateSampleError,
    EmptySampleError,
    GridEvalError,
    IngestionError,
    InputError,
    InvalidInputError,
    NumericalError,
    PartialFailure,
    UndefinedKappaError,
)
from .io import (
    CaseManifest,
    SCHEMA_VERSION,
    build_case,
    build_cases,
    dumps_canonical,
    load_annotations,
    load_embeddings,
    load_manifests,
    save_annotations,
    save_embeddings,
    save_manifests,
    write_report,
)
from .metrics import (
    case_rng,
    cosine_similarity,
    err,
    exact_expected_metric,
    expected_metric,
    novelty_discount,
    pairwise_similarity_matrix,
    rbp,
    relevance,
    relevance_vector,
    sample_trajectories,
    sample_trajectory,
)
from .runner import (
    render_compare_markdown,
    render_score_markdown,
    run_compare,
    run_score,
)
from .stats import (
    AnnotationRecord,
    ConsensusLabel,
    Direction,
    NO_CONSENSUS,
    agreement_rate,
    collapse_to_direction,
    consensus,
    fleiss_kappa,
    ratings_to_count_table,
    wilcoxon_signed_rank,
)
from .types import (
    Embedding,
    GridCase,
    GridImage,
    MetricConfig,
    MetricResult,
    Trajectory,
    VARIANTS,
    register_satiation,
    resolve_satiation,
)

__version__ = "0.1.0"

__all__ = [
    "AnnotationRecord",
    "CapabilityError",
    "CaseManifest",
    "ConfigError",
    "ConsensusLabel",
    "DegenerateSampleError",
    "Direction",
    "Embedding",
    "EmptySampleError",
    "GaussianSummary",
    "GridCase",
    "GridEvalError",
    "GridImage",
    "IngestionError",
    "InputError",
    "InvalidInputError",
    "MetricConfig",
    "MetricResult",
    "NO_CONSENSUS",
    "NumericalError",
    "PartialFailure",
    "SCHEMA_VERSION",
    "Trajectory",
    "UndefinedKappaError",
    "VARIANTS",
    "agreement_rate",
    "build_case",
    "build_cases",
    "case_rng",
    "collapse_to_direction",
    "consensus",
    "cosine_similarity",
    "diversity",
    "dumps_canonical",
    "err",
    "exact_expected_metric",
    "expected_metric",
    "fleiss_kappa",
    "frechet_distance",
    "gaussian_summary",
    "load_annotations",
    "load_embeddings",
    "load_manifests",
    "novelty_discount",
    "pairwise_similarity_matrix",
    "population_fid_report",
    "ratings_to_count_table",
    "rbp",
    "register_satiation",
    "relevance",
    "relevance_vector",
    "render_compare_markdown",
    "render_score_markdown",
    "resolve_satiation",
    "run_compare",
    "run_score",
    "sample_trajectories",
    "sample_trajectory",
    "save_annotations",
    "save_embeddings",
    "save_manifests",
    "wilcoxon_signed_rank",
    "write_report",
]
