"""Grid-quadrature adaptive testing engine for graded response models.

Scores respondents with Bayesian posteriors on a fixed ability grid and
selects items by six interchangeable criteria, including a softmax sampler
over expected posterior entropies that trades a negligible accuracy cost
for full item-bank exposure.
"""

from .errors import (
    BankLoadError,
    ExhaustedBankError,
    GridcatError,
    InvalidArgumentError,
    NumericalDegeneracyError,
)
from .grid import (
    AbilityGrid,
    Density,
    build_grid,
    entropy,
    gaussian_prior,
    kl_divergence,
    mean,
    normalized_density,
    sd,
    trapezoid,
    uniform_density,
    variance,
)
from .items import (
    ItemBank,
    ItemParameters,
    ResponseRecord,
    fisher_information,
    full_bank_posterior,
    grm_category_probs,
    posterior_update,
    predictive_mass,
)
from .selectors import (
    ItemScore,
    SelectionProbabilities,
    SelectorKind,
    SelectorSpec,
    global_information_direct,
    loo_identity_terms,
    model_implied_marginal,
    score_bayesian_fisher,
    score_bayesian_variance,
    score_entropy_criterion,
    score_fisher,
    score_global_information,
    select_next,
    stochastic_weights,
)
from .session import (
    ExposureLedger,
    SessionState,
    StoppingRule,
    estimate,
    merge_ledgers,
    next_item,
    record_session,
    recompute_posterior,
    start_session,
    submit_response,
    unique_exposed,
)
from .simulate import (
    RespondentGenerator,
    SimulationConfig,
    SimulationReport,
    ability_band,
    exposure_study,
    generate_responses,
    run_batch,
    run_cell,
    synthetic_bank,
)

__version__ = "0.1.0"

__all__ = [
    "AbilityGrid",
    "BankLoadError",
    "Density",
    "ExhaustedBankError",
    "ExposureLedger",
    "GridcatError",
    "InvalidArgumentError",
    "ItemBank",
    "ItemParameters",
    "ItemScore",
    "NumericalDegeneracyError",
    "RespondentGenerator",
    "ResponseRecord",
    "SelectionProbabilities",
    "SelectorKind",
    "SelectorSpec",
    "SessionState",
    "SimulationConfig",
    "SimulationReport",
    "StoppingRule",
    "ability_band",
    "build_grid",
    "entropy",
    "estimate",
    "exposure_study",
    "fisher_information",
    "full_bank_posterior",
    "gaussian_prior",
    "generate_responses",
    "global_information_direct",
    "grm_category_probs",
    "kl_divergence",
    "loo_identity_terms",
    "mean",
    "merge_ledgers",
    "model_implied_marginal",
    "next_item",
    "normalized_density",
    "posterior_update",
    "predictive_mass",
    "recompute_posterior",
    "record_session",
    "run_batch",
    "run_cell",
    "score_bayesian_fisher",
    "score_bayesian_variance",
    "score_entropy_criterion",
    "score_fisher",
    "score_global_information",
    "sd",
    "select_next",
    "start_session",
    "stochastic_weights",
    "submit_response",
    "synthetic_bank",
    "trapezoid",
    "uniform_density",
    "unique_exposed",
    "variance",
]
