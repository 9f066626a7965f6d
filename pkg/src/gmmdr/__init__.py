"""Dimension reduction and feature selection for Gaussian-mixture clustering."""

from .errors import (
    AllFitsFailedError,
    ArchiveError,
    DataFormatError,
    DegenerateComponentError,
    GmmdrError,
    InvalidModelError,
    SingularCovarianceError,
)
from .mixture import (
    FitConfig,
    GaussianMixture,
    MixtureFit,
    SearchResult,
    bic,
    em_fit,
    entropy,
    map_classify,
    model_search,
)
from .models import (
    EQUAL_COVARIANCE_MODELS,
    MULTIVARIATE_MODELS,
    UNIVARIATE_MODELS,
    count_params,
    covariance_param_count,
    is_equal_covariance,
    model_names,
)
from .subspace import (
    GMMDR,
    DrBasis,
    GridDensity,
    KernelSet,
    between_cluster_cov,
    build_kernels,
    combined_kernel,
    covariance_variation,
    density_grid,
    eigenvalue_contributions,
    estimate_directions,
    generalized_eigendecomp,
    project_data,
    project_params,
    total_covariance,
)
from .selection import (
    GMMDRPipeline,
    PipelineResult,
    SelectionConfig,
    SelectionTrace,
    bic_difference,
    bic_reg,
    entropy_prefix_select,
    gmmdr_pipeline,
    greedy_select,
)
from .metrics import (
    adjusted_rand_index,
    canonicalize_labels,
    confusion_matrix,
    correlation_pca,
    error_rate,
    pca_gmm,
)
from .datasets import (
    LabeledDataset,
    ScenarioSpec,
    gen_chang,
    gen_model,
    gen_synthetic_vvv,
    generate,
    load_crabs,
    load_wine,
)

__version__ = "0.1.0"
