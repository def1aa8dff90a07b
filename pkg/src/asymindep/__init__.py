"""Tail orders and pairwise, k-wise and mutual asymptotic independence of copulas."""

from .archimedean import (
    ArchimedeanModel,
    Generator,
    acig_generator,
    acig_tail_orders,
    amh_generator,
    arch_copula_eval,
    arch_mutual_condition,
    clayton_generator,
    frank_generator,
    gumbel_generator,
    independence_generator,
    log_generator,
    make_generator,
    theta1_estimate,
)
from .classify import RatioTrace, classify_model, counterexample_model, ratio_trace
from .core import (
    ClassificationReport,
    CorrelationMatrix,
    Evidence,
    IndexSubset,
    RateParameterSet,
    TailOrderResult,
    enumerate_subsets,
    validate_correlation,
    validate_rates,
)
from .empirical import (
    SampleMatrix,
    TailFitResult,
    empirical_copula,
    empirical_survival_diagonal,
    fit_tail_order,
    sample_clayton,
    sample_gaussian,
)
from .exceptions import FitError, NumericError, ParseError, PrecisionError, ValidationError
from .gaussian import (
    GaussianCopulaModel,
    example_matrix,
    gaussian_mutual_check,
    gaussian_survival_diagonal,
    gaussian_tail_order,
    mvn_rectangle,
)
from .marshall_olkin import (
    MOModel,
    mo_classify,
    mo_diagonal_exponent,
    mo_equal,
    mo_pairwise_exponent,
    mo_proportional,
    mo_survival,
)
from .qp import QPSolution, solve_active_set, solve_bruteforce
from .survival import (
    ComonotoneCopula,
    CopulaModel,
    IndependenceCopula,
    PrecisionRequest,
    diagonal_section,
    survival_inclusion_exclusion,
)

__version__ = "0.1.0"
