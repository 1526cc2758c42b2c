"""depkit: dependence measures and independence tests beyond Pearson's rho.

Covers the classical correlations (Pearson, Spearman, Kendall, van der
Waerden), empirical-distribution functionals (Cramer-von Mises,
Kolmogorov-Smirnov, Moebius subset statistics), distance covariance, HSIC,
density divergences, locally aggregated tests (BDS, HHG, CANOVA), pointwise
dependence descriptors, and the local Gaussian correlation, all with
seeded resampling inference and synthetic-data generators.
"""

__version__ = "0.1.0"

from .classical import (
    QuadrantMap,
    Region,
    acf,
    conditional_correlation,
    hoeffding_covariance_identity_check,
    kendall,
    pearson,
    quadrant_map,
    spearman,
    van_der_waerden,
)
from .datagen import GeneratorSpec, generate
from .density import DivergenceKind, KdeSpec, density_test, divergence_estimate, kde
from .distance import (
    CenteredDistanceMatrix,
    VectorSample,
    dcov,
    dcov_dcor,
    dcov_population_mc,
    dcov_terms,
    dcov_test,
    distance_matrix,
    double_center,
)
from .ecdf_stats import (
    CvmNullSpec,
    SubsetIndex,
    cvm_lag_aggregate,
    cvm_null_quantile,
    cvm_statistic,
    cvm_test,
    ks_statistic,
    moebius_statistic,
)
from .hsic import KernelSpec, gram_matrix, hsic_statistic, hsic_test, median_heuristic_sigma
from .lgc import (
    LgcFit,
    LgcMap,
    LgcParams,
    LgcTestSpec,
    bandwidth_cv,
    bandwidth_plugin,
    copula_diagonal_rho,
    lgc_fit_point,
    lgc_map,
    lgc_test,
    local_loglik,
    to_z_scale,
)
from .local_measures import CurveEstimate, LdfGrid, correlation_curve, local_dependence_function
from .local_tests import (
    EmbeddingSpec,
    bds_statistic,
    bds_test,
    canova_statistic,
    canova_test,
    correlation_integral,
    hhg_statistic,
    hhg_test,
)
from .resampling import TestReport, block_bootstrap, iid_bootstrap, permute_test
from .samples import (
    PairedSample,
    ScoreVector,
    SeriesSample,
    ecdf,
    lag_pairs,
    normal_scores,
    ranks,
    standardize,
    uniform_scores,
)
