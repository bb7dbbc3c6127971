"""Photocount and quadrature statistics of multimode photon-subtracted
thermal light, with fiducial / conditional-MLE / Bayesian grid inference."""

from .distributions import (
    CountHistogram,
    DarkCountConfig,
    ModelParams,
    Pmf,
    compound_poisson_pmf,
    convolved_pmf,
    dark_count_convolve,
    generating_function,
    mpsts_pmf,
    mu0_from_mean,
    polya_pmf,
    quadrature_pdf,
)
from .estimation import (
    EstimateSummary,
    GridAxes,
    InfoMatrix,
    ParameterGrid,
    PriorSpec,
    bayesian_fit,
    build_prior,
    build_prior_quadrature,
    condition_number,
    conditional_mle,
    fiducial_grid,
    fisher_information,
    log_likelihood_photocount,
    log_likelihood_quadrature,
    posterior_grid,
    posterior_information,
    posterior_moments,
    quadrature_posterior,
    required_sample_size,
)
from .pipeline import (
    BinRecord,
    BinSequence,
    GroupedDataset,
    PipelineConfig,
    TimeTrace,
    bin_trace,
    group_and_select,
    thin_bins,
)
from .rng import SeededStream
from .sampling import (
    OracleResult,
    physical_subtraction_oracle,
    sample_photocounts,
    sample_quadratures,
    synthesize_trace,
)

__version__ = "0.1.0"

__all__ = [
    "BinRecord",
    "BinSequence",
    "CountHistogram",
    "DarkCountConfig",
    "EstimateSummary",
    "GridAxes",
    "GroupedDataset",
    "InfoMatrix",
    "ModelParams",
    "OracleResult",
    "ParameterGrid",
    "PipelineConfig",
    "Pmf",
    "PriorSpec",
    "SeededStream",
    "TimeTrace",
    "bayesian_fit",
    "build_prior",
    "build_prior_quadrature",
    "bin_trace",
    "compound_poisson_pmf",
    "condition_number",
    "conditional_mle",
    "convolved_pmf",
    "dark_count_convolve",
    "fiducial_grid",
    "fisher_information",
    "generating_function",
    "group_and_select",
    "log_likelihood_photocount",
    "log_likelihood_quadrature",
    "mpsts_pmf",
    "mu0_from_mean",
    "physical_subtraction_oracle",
    "polya_pmf",
    "posterior_grid",
    "posterior_information",
    "posterior_moments",
    "quadrature_pdf",
    "quadrature_posterior",
    "required_sample_size",
    "sample_photocounts",
    "sample_quadratures",
    "synthesize_trace",
    "thin_bins",
]
