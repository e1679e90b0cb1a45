"""Gaussian-Bernoulli RBM training toolkit.

Maximum-likelihood learners (S-DCP, CD-k, PCD) for RBMs with Gaussian
visible units, exact and AIS-based log-likelihood evaluation, and the
data/CLI plumbing around them.  `GaussianBernoulliRBM` is the
scikit-learn style entry point; the submodules expose the functional
core.
"""

from .data import Dataset, WhiteningTransform, load_csv, load_idx, standardize, synth_mixture
from .errors import (
    CapacityError,
    ConfigError,
    DomainError,
    FormatError,
    GbrbmError,
    NumericalError,
    ShapeError,
)
from .estimator import GaussianBernoulliRBM
from .evaluation import AisConfig, LogZEstimate, ais_log_partition, avg_log_likelihood
from .gradients import ParamGrad, grad_f_estimate, grad_f_exact, grad_g, grad_logvar
from .model import (
    LseQProblem,
    ModelDims,
    RbmParams,
    energy,
    exact_log_partition,
    free_energy_g,
    hidden_activation,
    lse_q_value_grad,
    visible_conditional_mean,
)
from .sampling import ChainState, RngStream, gibbs_chain, sample_hidden, sample_visible
from .training import TrainConfig, TrainState, cost_model, init_params, train_epoch

__version__ = "0.1.0"

__all__ = [
    "AisConfig",
    "CapacityError",
    "ChainState",
    "ConfigError",
    "Dataset",
    "DomainError",
    "FormatError",
    "GaussianBernoulliRBM",
    "GbrbmError",
    "LogZEstimate",
    "LseQProblem",
    "ModelDims",
    "NumericalError",
    "ParamGrad",
    "RbmParams",
    "RngStream",
    "ShapeError",
    "TrainConfig",
    "TrainState",
    "WhiteningTransform",
    "ais_log_partition",
    "avg_log_likelihood",
    "cost_model",
    "energy",
    "exact_log_partition",
    "free_energy_g",
    "gibbs_chain",
    "grad_f_estimate",
    "grad_f_exact",
    "grad_g",
    "grad_logvar",
    "hidden_activation",
    "init_params",
    "load_csv",
    "load_idx",
    "lse_q_value_grad",
    "sample_hidden",
    "sample_visible",
    "standardize",
    "synth_mixture",
    "train_epoch",
    "visible_conditional_mean",
]
