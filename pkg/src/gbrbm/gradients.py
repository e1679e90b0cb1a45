"""Analytic gradients of the data term g and the log partition f.

Conventions: gradients are taken only in the trainable coordinates
(weights W, hidden bias c, optionally log-variance z).  The visible bias
b is never trained and no operation here produces or consumes a gradient
for it.  Batch reductions go through numpy's pairwise summation, so
results do not depend on accumulation order.
"""

from __future__ import annotations

import dataclasses
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError, ShapeError
from .model import (
    RbmParams,
    exact_log_partition,
    free_energy_g,
    hidden_activation,
    hidden_marginal,
)
from .sampling import ChainState


@dataclasses.dataclass(frozen=True)
class ParamGrad:
    """Gradient container over the trainable parameter subset.

    d_logvar is present only when the caller asked for the variance
    direction; there is deliberately no slot for a visible-bias gradient.
    """

    d_weights: np.ndarray
    d_hbias: np.ndarray
    d_logvar: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "d_weights", np.asarray(self.d_weights, dtype=np.float64))
        object.__setattr__(self, "d_hbias", np.asarray(self.d_hbias, dtype=np.float64))
        if self.d_logvar is not None:
            object.__setattr__(self, "d_logvar", np.asarray(self.d_logvar, dtype=np.float64))


def _as_batch(params: RbmParams, batch, what: str) -> np.ndarray:
    """Normalize a batch argument to a nonempty (s, m) float array."""
    batch = np.asarray(batch, dtype=np.float64)
    if batch.size == 0:
        raise DomainError(f"empty {what}")
    if batch.ndim == 1:
        batch = batch[None, :]
    m = params.weights.shape[0]
    if batch.ndim != 2 or batch.shape[1] != m:
        raise ShapeError(f"{what} must have shape (s, {m}), got {batch.shape}")
    return batch


def _logvar_term(params: RbmParams, v_rows: np.ndarray) -> np.ndarray:
    """Per-sample z-direction term, shape (s, m).

    term_i(v) = exp(-z_i) * [ (v_i - b_i)^2 / 2 - v_i * sum_j w_ij p(h_j=1|v) ].
    This is d g(theta, v) / d z_i; its model expectation is d f / d z_i.
    """
    inv_var = np.exp(-params.log_var)
    p = hidden_activation(params, v_rows)
    cross = v_rows * (p @ params.weights.T)
    return inv_var * ((v_rows - params.vbias) ** 2 / 2.0 - cross)


def grad_g(params: RbmParams, v_batch, include_logvar: bool = False) -> ParamGrad:
    """Batch-mean analytic gradient of g in (W, c) and optionally z.

    dg/dw_ij = (v_i / sigma_i^2) p(h_j=1|v) and dg/dc_j = p(h_j=1|v),
    averaged over the batch.
    """
    v = _as_batch(params, v_batch, "batch")
    inv_var = np.exp(-params.log_var)
    p = hidden_activation(params, v)
    d_w = (v * inv_var).T @ p / v.shape[0]
    d_c = p.mean(axis=0)
    d_z = _logvar_term(params, v).mean(axis=0) if include_logvar else None
    return ParamGrad(d_w, d_c, d_z)


def _chain_visibles(params: RbmParams, chain_ends) -> np.ndarray:
    if isinstance(chain_ends, Sequence) and len(chain_ends) > 0 and isinstance(chain_ends[0], ChainState):
        chain_ends = np.stack([c.visible for c in chain_ends])
    return _as_batch(params, chain_ends, "chain-end set")


def grad_f_estimate(params: RbmParams, chain_ends) -> ParamGrad:
    """MCMC estimate of grad f from chain-end visible states.

    Hidden units are marginalized analytically (the estimate uses
    p(h_j=1|v~) rather than sampled h), which has the same expectation as
    the sampled version at lower variance.  Accepts ChainState sequences
    or an (s, m) array of visibles.
    """
    v = _chain_visibles(params, chain_ends)
    if not np.isfinite(v).all():
        raise DomainError("non-finite chain-end visible states")
    return grad_g(params, v)


def grad_f_exact(params: RbmParams, include_logvar: bool = False) -> ParamGrad:
    """Exact gradient of log Z by enumerating hidden states (n <= 20).

    With p(h) the exact hidden marginal and s = W h:
    df/dw_ij = E[h_j (b_i + s_i)] / sigma_i^2, df/dc_j = E[h_j],
    df/dz_i = 1/2 - exp(-z_i) E[s_i (s_i/2 + b_i)].
    """
    states, probs = hidden_marginal(params)
    inv_var = np.exp(-params.log_var)
    s = states @ params.weights.T  # (2^n, m)
    weighted_states = probs[:, None] * states
    d_w = ((params.vbias + s) * inv_var).T @ weighted_states
    d_c = probs @ states
    d_z = None
    if include_logvar:
        d_z = 0.5 - inv_var * (probs @ (s * (s / 2.0 + params.vbias)))
    return ParamGrad(d_w, d_c, d_z)


def grad_logvar(params: RbmParams, data_batch, model_batch) -> np.ndarray:
    """Stochastic log-variance gradient: data-term mean minus model-term mean."""
    data = _as_batch(params, data_batch, "data batch")
    model = _as_batch(params, model_batch, "model batch")
    return _logvar_term(params, data).mean(axis=0) - _logvar_term(params, model).mean(axis=0)


def grad_logvar_exact(params: RbmParams, data_batch) -> np.ndarray:
    """Log-variance gradient with the model term computed by exact enumeration."""
    data = _as_batch(params, data_batch, "data batch")
    exact_model_term = grad_f_exact(params, include_logvar=True).d_logvar
    return _logvar_term(params, data).mean(axis=0) - exact_model_term


def numerical_gradient(params: RbmParams, v, epsilon: float = 1e-5) -> ParamGrad:
    """Central-difference oracle for the exact log-likelihood g(theta, v) - f(theta).

    Perturbs every W, c and z coordinate in turn; requires n <= 20 for the
    exact partition function.
    """
    if not (1e-7 <= epsilon <= 1e-3):
        raise DomainError(f"epsilon must lie in [1e-7, 1e-3], got {epsilon}")
    v = np.asarray(v, dtype=np.float64)

    def loglik(p: RbmParams) -> float:
        return free_energy_g(p, v) - exact_log_partition(p)

    def central(make) -> float:
        return (loglik(make(epsilon)) - loglik(make(-epsilon))) / (2.0 * epsilon)

    m, n = params.weights.shape
    d_w = np.zeros((m, n))
    for i in range(m):
        for j in range(n):
            def bump_w(eps, i=i, j=j):
                w = params.weights.copy()
                w[i, j] += eps
                return params.replace(weights=w)

            d_w[i, j] = central(bump_w)
    d_c = np.zeros(n)
    for j in range(n):
        def bump_c(eps, j=j):
            c = params.hbias.copy()
            c[j] += eps
            return params.replace(hbias=c)

        d_c[j] = central(bump_c)
    d_z = np.zeros(m)
    for i in range(m):
        def bump_z(eps, i=i):
            z = params.log_var.copy()
            z[i] += eps
            return params.replace(log_var=z)

        d_z[i] = central(bump_z)
    return ParamGrad(d_w, d_c, d_z)
