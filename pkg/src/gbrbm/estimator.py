"""Scikit-learn style estimator wrapping the functional training core."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .data import Dataset
from .evaluation import AisConfig, ais_log_partition, avg_log_likelihood, generate_samples
from .model import ENUM_MAX_HIDDEN, ModelDims, exact_log_partition, free_energy_g, hidden_activation
from .sampling import RngStream, sample_hidden, sample_visible
from .training import STREAM_SAMPLE, TrainConfig, init_train_state, train_epoch


class GaussianBernoulliRBM(TransformerMixin, BaseEstimator):
    """Gaussian-Bernoulli restricted Boltzmann machine.

    Continuous Gaussian visible units with per-unit variances, binary
    hidden units.  Maximum-likelihood training by stochastic
    difference-of-convex programming (S-DCP, the default), CD-k, or PCD;
    the visible bias is fixed to the training-data mean and the variances
    are learnt only when `learn_variance` is set.

    The estimator does not rescale its input; standardize (or whiten)
    beforehand, e.g. with :func:`gbrbm.data.standardize`.

    Parameters
    ----------
    n_components : int
        Number of binary hidden units.
    algorithm : {'sdcp', 'cd', 'pcd', 'sdcp_var'}
        Training algorithm.  'sdcp_var' is S-DCP with variance learning.
    learning_rate : float
        Ascent step size for every parameter update.
    batch_size : int
        Mini-batch size (clipped to the dataset size).
    n_epochs : int
        Full passes over the training data.
    k : int
        Gibbs steps per update for CD/PCD.
    d, k_prime : int
        Inner iterations and Gibbs steps per iteration for S-DCP;
        k = d * k_prime gives roughly CD-k compute per mini-batch.
    learn_variance : bool
        Update the visible log-variances once per mini-batch.
    variance_lr_scale : float
        Extra factor on the variance learning rate.
    tau : float
        Initial hidden-unit activity level used by the bias initializer.
    random_state : int
        Seed for all randomness (initialization, sampling, shuffling).

    Attributes
    ----------
    weights_ : ndarray of shape (n_features, n_components)
    intercept_visible_ : ndarray of shape (n_features,)
        Fixed visible bias (the training-data mean).
    intercept_hidden_ : ndarray of shape (n_components,)
    log_var_ : ndarray of shape (n_features,)
        Per-visible-unit log variances.

    Examples
    --------
    >>> from gbrbm import GaussianBernoulliRBM
    >>> import numpy as np
    >>> X = np.random.default_rng(0).normal(size=(200, 8))
    >>> rbm = GaussianBernoulliRBM(n_components=4, n_epochs=2).fit(X)
    >>> rbm.transform(X).shape
    (200, 4)
    """

    def __init__(self, n_components=64, algorithm="sdcp", learning_rate=0.01,
                 batch_size=100, n_epochs=10, k=1, d=1, k_prime=1,
                 learn_variance=False, variance_lr_scale=1.0, tau=0.01,
                 random_state=0):
        self.n_components = n_components
        self.algorithm = algorithm
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.n_epochs = n_epochs
        self.k = k
        self.d = d
        self.k_prime = k_prime
        self.learn_variance = learn_variance
        self.variance_lr_scale = variance_lr_scale
        self.tau = tau
        self.random_state = random_state

    def _train_config(self, n_samples: int) -> TrainConfig:
        return TrainConfig(algorithm=self.algorithm, eta=self.learning_rate,
                           batch_size=min(self.batch_size, n_samples), epochs=self.n_epochs,
                           seed=self.random_state, k=self.k, d=self.d, k_prime=self.k_prime,
                           learn_variance=self.learn_variance,
                           variance_lr_scale=self.variance_lr_scale)

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        data = Dataset(X, split_tag="train")
        config = self._train_config(len(data))
        dims = ModelDims(data.num_features, self.n_components)
        state = init_train_state(dims, data, config, tau=self.tau)
        for _ in range(config.epochs):
            state = train_epoch(state, data, config)
        self.train_state_ = state
        self.params_ = state.params
        self.weights_ = state.params.weights
        self.intercept_visible_ = state.params.vbias
        self.intercept_hidden_ = state.params.hbias
        self.log_var_ = state.params.log_var
        self.n_features_in_ = data.num_features
        self._sample_rng = RngStream(self.random_state, (STREAM_SAMPLE,))
        self._log_z_cache = None
        return self

    def _check_input(self, X) -> np.ndarray:
        check_is_fitted(self, "params_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return X

    def transform(self, X) -> np.ndarray:
        """Hidden-unit activation probabilities p(h=1 | v), shape (N, n_components)."""
        X = self._check_input(X)
        return hidden_activation(self.params_, X)

    def gibbs(self, X) -> np.ndarray:
        """One full block-Gibbs transition pair started from the given visibles."""
        X = self._check_input(X)
        h = sample_hidden(self.params_, X, self._sample_rng)
        return sample_visible(self.params_, h, self._sample_rng)

    def sample(self, n_samples: int = 1, n_steps: int = 200) -> np.ndarray:
        """Generate visible samples by Gibbs sampling from random starts."""
        check_is_fitted(self, "params_")
        return generate_samples(self.params_, n_samples, n_steps, self._sample_rng)

    def log_partition(self, method: str = "auto", ais_particles: int = 100,
                      ais_temps: int = 10000) -> float:
        """log Z of the fitted model, exact when n_components <= 20, else AIS."""
        check_is_fitted(self, "params_")
        if method == "auto":
            method = "exact" if self.n_components <= ENUM_MAX_HIDDEN else "ais"
        if method == "exact":
            return exact_log_partition(self.params_)
        est = ais_log_partition(self.params_,
                                AisConfig(ais_particles, ais_temps, self.random_state))
        return est.log_z

    def score_samples(self, X) -> np.ndarray:
        """Per-sample log-likelihood log p(v)."""
        X = self._check_input(X)
        if self._log_z_cache is None:
            self._log_z_cache = self.log_partition()
        return free_energy_g(self.params_, X) - self._log_z_cache

    def score(self, X, y=None) -> float:
        """Average log-likelihood of X under the fitted model."""
        X = self._check_input(X)
        if self._log_z_cache is None:
            self._log_z_cache = self.log_partition()
        return avg_log_likelihood(self.params_, X, self._log_z_cache)
