"""Enriched mixture-of-normals regression: truncation bounds, a blocked
Gibbs sampler, a marginal Polya-urn sampler, and predictive inference."""

from .blocked import ChainConfig, iter_chain, resolve_truncation, run_chain
from .bounds import (BoundQuery, BoundResult, exact_bound_mc, l1_bound,
                     l1_bound_varying, min_truncation)
from .chains import (Chain, ChainDraw, ChainWriter, iter_chain_file,
                     read_chain, write_chain)
from .core import (Dataset, GibbsState, Hyperparameters, StickWeights,
                   Truncation, default_hyperparameters, stick_break)
from .errors import (ConfigError, DomainError, EdpmError, InvalidStickError,
                     MatrixError, NumericalError)
from .predict import (PredictiveSummary, conditional_density,
                      conditional_mean, prediction_errors, predictive_summary,
                      predictive_values)
from .simstudy import (DgpConfig, StudyConfig, batch_mixing_stats,
                       generate_covariates, generate_dataset,
                       generate_response, mixing_weight, run_study,
                       true_conditional_mean)
from .urn import UrnState, init_urn_state, iter_pu_chain, run_pu_chain

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
