"""De-biased estimation of linear functionals of eigenvectors.

Plug-in estimates of <a, u_l> built from a noisy symmetric matrix or a
sample covariance are systematically shrunk towards zero; this package
computes the multiplicative corrections that remove the shrinkage, the
matching eigenvalue corrections, exact overlap identities for verification,
two-point lower-bound constructions, and a deterministic simulation
harness with a CLI.
"""

from .core import (
    Ordering,
    SpectralDecomposition,
    SymmetricMatrix,
    check_interlacing,
    dist,
    eigendecompose,
    orthonormal_complement,
    read_matrix,
    read_symmetric,
    read_vector,
    write_matrix,
    write_vector,
)
from .denoise import (
    FunctionalEstimate,
    GroundTruthDenoising,
    OracleBiasDiagnosticsMD,
    TheoryBoundsMD,
    bounds_md,
    debias_factor_md,
    estimate_functional_md,
    estimate_noise_md,
    estimate_rank,
    gamma_oracle,
    generate_noise,
    observe,
    semicircle_b,
)
from .errors import (
    DegenerateSpectrum,
    InvalidInput,
    IoError,
    NumericalFailure,
    OutsideBulkRequired,
)
from .harness import (
    ExperimentConfig,
    ExperimentResult,
    InstanceSpec,
    SummaryRow,
    TrialRecord,
    fit_error_slope,
    load_config,
    parse_config,
    read_records,
    run_experiment,
    slope_loglog,
    write_records,
)
from .laws import LawKind, NoiseSpectrumLaw
from .lowerbounds import (
    HypothesisPair,
    PairKind,
    PluginLowerReport,
    direction_pair,
    gaussian_kl,
    minimax_sample_size,
    plugin_lower_experiment,
    rotation_pair,
)
from .master import (
    AngleDecomposition,
    GeneralMasterReport,
    MasterSuiteResult,
    VectorMasterReport,
    angle_decompose,
    random_orthonormal,
    random_symmetric,
    random_unit,
    resolvent_margin,
    run_master_suite,
    verify_general_master,
    verify_vector_master,
)
from .pca import (
    Branch,
    FunctionalEstimatePCA,
    OracleBiasDiagnosticsPCA,
    SpikedModel,
    TheoryBoundsPCA,
    beta_oracle,
    bounds_pca,
    debias_factor_pca,
    estimate_functional_pca,
    estimate_noise_pca,
    mp_debias,
    sample,
    sample_covariance,
    shrink_eigenvalue,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
