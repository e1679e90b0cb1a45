"""CD-k, PCD, and the two-loop S-DCP learners, plus the epoch driver.

All learners perform gradient ascent on the log-likelihood g - f in the
weights W and hidden biases c.  The visible bias b is fixed to the data
mean at initialization and never updated; the log-variance z is updated
only in variance-learning mode, once per mini-batch and outside any inner
loop.

S-DCP exploits that both g and f are convex in (W, c) at fixed b and z:
each mini-batch linearizes g at the incoming parameters and takes d
stochastic gradient steps on the convex surrogate f - <theta, grad g>,
re-estimating grad f from K' fresh Gibbs transitions per step while the
chains warm-start across the inner iterations.
"""

from __future__ import annotations

import dataclasses
from typing import Optional

import numpy as np

from .data import Dataset, shuffle_epoch
from .errors import ConfigError, DomainError
from .gradients import grad_f_estimate, grad_f_exact, grad_g, grad_logvar
from .model import ModelDims, RbmParams
from .sampling import ChainState, RngStream, block_gibbs

ALGORITHMS = ("cd", "pcd", "sdcp", "sdcp_var")

# Derivation tags keeping the per-purpose random streams disjoint.
_STREAM_INIT = 0
_STREAM_SHUFFLE = 1
_STREAM_BATCH = 2
STREAM_EVAL = 3
STREAM_SAMPLE = 4


@dataclasses.dataclass(frozen=True)
class TrainConfig:
    """Run hyperparameters.

    `k` is the Gibbs step count for CD/PCD; `d` and `k_prime` are the
    inner iteration count and per-iteration Gibbs steps for S-DCP.  The
    matched-compute rule k = d * k_prime makes CD-k and S-DCP cost about
    the same per mini-batch.
    """

    algorithm: str
    eta: float
    batch_size: int
    epochs: int
    seed: int = 0
    k: int = 1
    d: int = 1
    k_prime: int = 1
    learn_variance: bool = False
    variance_lr_scale: float = 1.0

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}, expected one of {ALGORITHMS}")
        if self.eta < 0:
            # eta == 0 is allowed as a degenerate no-op step (useful in tests)
            raise ConfigError(f"learning rate must be nonnegative, got {self.eta}")
        if self.batch_size < 1 or self.epochs < 1:
            raise ConfigError("batch_size and epochs must be >= 1")
        if self.algorithm in ("cd", "pcd") and self.k < 1:
            raise ConfigError("CD/PCD needs k >= 1 Gibbs steps")
        if self.algorithm in ("sdcp", "sdcp_var") and (self.d < 1 or self.k_prime < 1):
            raise ConfigError("S-DCP needs d >= 1 and k_prime >= 1")
        if self.algorithm == "sdcp_var":
            object.__setattr__(self, "learn_variance", True)


@dataclasses.dataclass(frozen=True)
class TrainState:
    """Evolving training state; step functions return updated copies."""

    params: RbmParams
    rng: RngStream
    epoch: int = 0
    update_count: int = 0
    persistent_chains: Optional[tuple[ChainState, ...]] = None

    def advance(self, params: RbmParams, updates: int,
                chains: Optional[tuple[ChainState, ...]] = None) -> "TrainState":
        return dataclasses.replace(
            self, params=params, update_count=self.update_count + updates,
            persistent_chains=self.persistent_chains if chains is None else chains)


def init_params(dims: ModelDims, data: Dataset, tau: float = 0.01,
                rng: Optional[RngStream] = None) -> RbmParams:
    """Data-dependent initialization.

    Weights are uniform on [-a, a] with a = 6 / sqrt(m + n); the visible
    bias is the per-dimension data mean (never trained afterwards); each
    hidden bias starts at c_j = -(|b - W_j|^2 - |b|^2)/2 + log(tau) so the
    hidden units begin nearly off; log-variances start at zero.
    """
    if len(data) < 1:
        raise DomainError("cannot initialize from an empty dataset")
    if data.num_features != dims.m:
        raise DomainError(f"dataset has {data.num_features} features, model expects {dims.m}")
    if tau <= 0:
        raise DomainError(f"tau must be positive, got {tau}")
    if rng is None:
        rng = RngStream(0, (_STREAM_INIT,))
    a = 6.0 / np.sqrt(dims.m + dims.n)
    weights = (rng.uniform((dims.m, dims.n)) * 2.0 - 1.0) * a
    vbias = data.samples.mean(axis=0)
    col_dist = ((vbias[:, None] - weights) ** 2).sum(axis=0)
    hbias = -(col_dist - vbias @ vbias) / 2.0 + np.log(tau)
    return RbmParams(weights=weights, vbias=vbias, hbias=hbias, log_var=np.zeros(dims.m))


def init_train_state(dims: ModelDims, data: Dataset, config: TrainConfig,
                     tau: float = 0.01) -> TrainState:
    """Fresh training state with parameters seeded from config.seed."""
    root = RngStream(config.seed)
    params = init_params(dims, data, tau=tau, rng=root.child(_STREAM_INIT))
    return TrainState(params=params, rng=root)


def _batch_array(batch) -> np.ndarray:
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim == 1:
        batch = batch[None, :]
    if batch.shape[0] < 1:
        raise DomainError("empty mini-batch")
    return batch


def _step_rng(state: TrainState, rng: Optional[RngStream]) -> RngStream:
    if rng is not None:
        return rng
    return state.rng.child(_STREAM_BATCH, state.epoch, state.update_count)


def _apply_ascent(params: RbmParams, eta: float, pos, neg,
                  d_logvar: Optional[np.ndarray] = None, lv_step: float = 0.0) -> RbmParams:
    new_w = params.weights + eta * (pos.d_weights - neg.d_weights)
    new_c = params.hbias + eta * (pos.d_hbias - neg.d_hbias)
    new_z = params.log_var if d_logvar is None else params.log_var + lv_step * d_logvar
    return params.replace(weights=new_w, hbias=new_c, log_var=new_z)


def cd_step(state: TrainState, batch, config: TrainConfig, persistent: bool = False,
            rng: Optional[RngStream] = None) -> TrainState:
    """One CD-k (or PCD-k) parameter update from a mini-batch.

    Chains start at the batch (CD) or continue from the stored chain ends
    (PCD; the first call seeds one chain per batch slot).  In variance-
    learning mode z moves in the same update, scaled by
    eta * variance_lr_scale.
    """
    batch = _batch_array(batch)
    rng = _step_rng(state, rng)
    params = state.params

    if persistent and state.persistent_chains is not None:
        if len(state.persistent_chains) != batch.shape[0]:
            raise ConfigError(
                f"{len(state.persistent_chains)} persistent chains but batch of {batch.shape[0]}")
        v0 = np.stack([c.visible for c in state.persistent_chains])
        base_steps = state.persistent_chains[0].step_count
    else:
        v0 = batch
        base_steps = 0

    positive = grad_g(params, batch)
    v_end, h_end = block_gibbs(params, v0, config.k, rng)
    negative = grad_f_estimate(params, v_end)
    d_z = None
    if config.learn_variance:
        d_z = grad_logvar(params, batch, v_end)
    new_params = _apply_ascent(params, config.eta, positive, negative,
                               d_z, config.eta * config.variance_lr_scale)

    chains = None
    if persistent:
        chains = tuple(ChainState(v, h, base_steps + config.k) for v, h in zip(v_end, h_end))
    return state.advance(new_params, updates=1, chains=chains)


def sdcp_step(state: TrainState, batch, config: TrainConfig,
              rng: Optional[RngStream] = None) -> TrainState:
    """One S-DCP mini-batch update: d inner ascent steps on the linearized objective.

    grad g is computed once at the incoming parameters and held fixed;
    each inner iteration runs k_prime Gibbs transition pairs per batch
    slot (chains warm-start across iterations, re-initialized from the
    data at every new mini-batch) and applies one (W, c) update.
    """
    new_params, _, _ = _sdcp_inner(state, batch, config, rng)
    return state.advance(new_params, updates=config.d)


def sdcp_var_step(state: TrainState, batch, config: TrainConfig,
                  rng: Optional[RngStream] = None) -> TrainState:
    """S-DCP update followed by one variance update outside the inner loop.

    The z gradient uses the final inner-loop chain ends as model samples,
    evaluated at the freshly updated (W, c).
    """
    params, v_end, rng = _sdcp_inner(state, batch, config, rng)
    batch = _batch_array(batch)
    d_z = grad_logvar(params, batch, v_end)
    new_z = params.log_var + config.eta * config.variance_lr_scale * d_z
    return state.advance(params.replace(log_var=new_z), updates=config.d)


def _sdcp_inner(state: TrainState, batch, config: TrainConfig,
                rng: Optional[RngStream]) -> tuple[RbmParams, np.ndarray, RngStream]:
    batch = _batch_array(batch)
    rng = _step_rng(state, rng)
    held_g = grad_g(state.params, batch)
    params = state.params
    v = batch
    for _ in range(config.d):
        v, _ = block_gibbs(params, v, config.k_prime, rng)
        negative = grad_f_estimate(params, v)
        params = _apply_ascent(params, config.eta, held_g, negative)
    return params, v, rng


def train_epoch(state: TrainState, data: Dataset, config: TrainConfig) -> TrainState:
    """One full pass over the data in mini-batches of exactly batch_size.

    The data order is reshuffled deterministically from the run stream at
    epoch start; a short final remainder is dropped so every update sees a
    full batch.
    """
    if len(data) < config.batch_size:
        raise DomainError(
            f"dataset of {len(data)} samples is smaller than one batch ({config.batch_size})")
    perm = shuffle_epoch(data, state.rng.child(_STREAM_SHUFFLE, state.epoch))
    num_batches = len(data) // config.batch_size
    for b in range(num_batches):
        idx = perm[b * config.batch_size:(b + 1) * config.batch_size]
        batch = data.samples[idx]
        rng = state.rng.child(_STREAM_BATCH, state.epoch, b)
        if config.algorithm == "cd":
            state = cd_step(state, batch, config, persistent=False, rng=rng)
        elif config.algorithm == "pcd":
            state = cd_step(state, batch, config, persistent=True, rng=rng)
        elif config.algorithm == "sdcp":
            state = sdcp_step(state, batch, config, rng=rng)
        else:
            state = sdcp_var_step(state, batch, config, rng=rng)
    return dataclasses.replace(state, epoch=state.epoch + 1)


def dca_exact_step(params: RbmParams, batch, eta: float, inner_iters: int) -> RbmParams:
    """One deterministic DCA outer iteration with the exact f gradient.

    Diagnostic-scale variant (n <= 20): linearize g at the incoming
    parameters, then take `inner_iters` exact gradient steps on the convex
    surrogate.  With enough inner steps and a small eta, the exact
    log-likelihood is non-decreasing across outer iterations.
    """
    batch = _batch_array(batch)
    held_g = grad_g(params, batch)
    for _ in range(inner_iters):
        negative = grad_f_exact(params)
        params = _apply_ascent(params, eta, held_g, negative)
    return params


def cost_model(k: int, d: int, k_prime: int, batch_size: int,
               t_gibbs: float, l_grad: float) -> tuple[float, float]:
    """Per-mini-batch cost of CD-k versus S-DCP.

    With T the cost of one Gibbs transition and L of one gradient
    evaluation: CD costs N_B (k T + 2 L); S-DCP costs
    d N_B (k' T + L) + N_B L.  They coincide at d = 1, k' = k.
    """
    if min(k, d, k_prime, batch_size) < 1 or t_gibbs <= 0 or l_grad < 0:
        raise DomainError("cost model inputs must be positive counts and costs")
    cd = batch_size * (k * t_gibbs + 2.0 * l_grad)
    sdcp = d * batch_size * (k_prime * t_gibbs + l_grad) + batch_size * l_grad
    return cd, sdcp
