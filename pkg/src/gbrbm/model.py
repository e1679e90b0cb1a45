"""Gaussian-Bernoulli RBM parameterization, energy, and exact enumeration oracles.

The model has m Gaussian visible units and n Bernoulli hidden units.  Its
energy for a visible vector v and binary hidden vector h is

    E(v, h) = sum_i (v_i - b_i)^2 / (2 sigma_i^2)
            - sum_{ij} w_ij v_i h_j / sigma_i^2
            - sum_j c_j h_j

with per-unit variances sigma_i^2 = exp(z_i).  Everything here is a pure
function of its inputs; parameters are treated as read-only.
"""

from __future__ import annotations

import dataclasses

import numpy as np
from scipy.special import expit, logsumexp

from .errors import CapacityError, DomainError, ShapeError

# Exact enumeration over hidden configurations is limited to 2^20 terms.
ENUM_MAX_HIDDEN = 20


def softplus(x):
    """Overflow-safe log(1 + exp(x))."""
    return np.logaddexp(0.0, x)


sigmoid = expit


@dataclasses.dataclass(frozen=True)
class ModelDims:
    """Visible/hidden layer sizes."""

    m: int
    n: int

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise DomainError(f"layer sizes must be >= 1, got m={self.m}, n={self.n}")


@dataclasses.dataclass(frozen=True)
class RbmParams:
    """Model parameters (W, b, c, z) with sigma_i^2 = exp(z_i).

    weights has shape (m, n) with weights[i, j] coupling visible unit i to
    hidden unit j.  The visible bias b is held fixed during training; the
    log-variance z keeps sigma^2 positive by construction.
    """

    weights: np.ndarray
    vbias: np.ndarray
    hbias: np.ndarray
    log_var: np.ndarray

    def __post_init__(self):
        for name in ("weights", "vbias", "hbias", "log_var"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.float64)
            object.__setattr__(self, name, arr)
        if self.weights.ndim != 2:
            raise ShapeError(f"weights must be 2-D, got shape {self.weights.shape}")
        m, n = self.weights.shape
        if self.vbias.shape != (m,):
            raise ShapeError(f"vbias must have shape ({m},), got {self.vbias.shape}")
        if self.hbias.shape != (n,):
            raise ShapeError(f"hbias must have shape ({n},), got {self.hbias.shape}")
        if self.log_var.shape != (m,):
            raise ShapeError(f"log_var must have shape ({m},), got {self.log_var.shape}")
        ModelDims(m, n)
        for name in ("weights", "vbias", "hbias", "log_var"):
            if not np.isfinite(getattr(self, name)).all():
                raise DomainError(f"non-finite entries in {name}")

    @property
    def dims(self) -> ModelDims:
        return ModelDims(*self.weights.shape)

    @property
    def sigma2(self) -> np.ndarray:
        """Per-visible-unit variance exp(z), positive by construction."""
        return np.exp(self.log_var)

    @classmethod
    def zeros(cls, m: int, n: int) -> "RbmParams":
        return cls(np.zeros((m, n)), np.zeros(m), np.zeros(n), np.zeros(m))

    def replace(self, **changes) -> "RbmParams":
        return dataclasses.replace(self, **changes)


def _check_visible(params: RbmParams, v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    m = params.weights.shape[0]
    if v.shape[-1:] != (m,) or v.ndim not in (1, 2):
        raise ShapeError(f"visible input must have trailing dimension {m}, got shape {v.shape}")
    return v


def _check_hidden(params: RbmParams, h) -> np.ndarray:
    h = np.asarray(h, dtype=np.float64)
    n = params.weights.shape[1]
    if h.shape[-1:] != (n,) or h.ndim not in (1, 2):
        raise ShapeError(f"hidden input must have trailing dimension {n}, got shape {h.shape}")
    return h


def energy(params: RbmParams, v, h) -> float:
    """Joint energy E(v, h) for one visible/hidden configuration."""
    v = _check_visible(params, v)
    h = _check_hidden(params, h)
    if v.ndim != 1 or h.ndim != 1:
        raise ShapeError("energy expects single vectors, not batches")
    if not (np.isfinite(v).all() and np.isfinite(h).all()):
        raise DomainError("non-finite input to energy")
    inv_var = np.exp(-params.log_var)
    quad = float(np.sum((v - params.vbias) ** 2 * inv_var) / 2.0)
    coupling = float((v * inv_var) @ params.weights @ h)
    return quad - coupling - float(params.hbias @ h)


def hidden_pre_activation(params: RbmParams, v) -> np.ndarray:
    """c_j + sum_i w_ij v_i / sigma_i^2, the hidden-unit input field."""
    v = _check_visible(params, v)
    return (v * np.exp(-params.log_var)) @ params.weights + params.hbias


def hidden_activation(params: RbmParams, v) -> np.ndarray:
    """p(h_j = 1 | v), elementwise over hidden units.

    Accepts a single visible vector (m,) or a batch (s, m); the result has
    matching leading shape.
    """
    return sigmoid(hidden_pre_activation(params, v))


def visible_conditional_mean(params: RbmParams, h) -> np.ndarray:
    """Mean of the Gaussian conditional p(v | h): b + W h."""
    h = _check_hidden(params, h)
    return params.vbias + h @ params.weights.T


def free_energy_g(params: RbmParams, v):
    """Hidden-marginalized unnormalized log density g(theta, v).

    Closed form of log sum_h exp(-E(v, h)): the hidden units factorize, so

        g = -sum_i (v_i - b_i)^2 / (2 sigma_i^2) + sum_j softplus(pre_j(v)).

    Returns a scalar for a single vector, a (s,) array for a batch.
    """
    v = _check_visible(params, v)
    inv_var = np.exp(-params.log_var)
    quad = np.sum((v - params.vbias) ** 2 * inv_var, axis=-1) / 2.0
    sp = softplus(hidden_pre_activation(params, v)).sum(axis=-1)
    out = sp - quad
    return float(out) if out.ndim == 0 else out


def enumerate_hidden_states(n: int) -> np.ndarray:
    """All 2^n binary hidden vectors as a (2^n, n) float matrix.

    Row k is the binary expansion of k, least-significant bit first.
    """
    if n < 1:
        raise DomainError(f"need at least one hidden unit, got n={n}")
    if n > ENUM_MAX_HIDDEN:
        raise CapacityError(
            f"enumeration over 2^{n} hidden states exceeds the n <= {ENUM_MAX_HIDDEN} guard"
        )
    codes = np.arange(2**n, dtype=np.uint32)
    return ((codes[:, None] >> np.arange(n)) & 1).astype(np.float64)


def free_energy_g_enum(params: RbmParams, v) -> float:
    """Brute-force oracle for free_energy_g: log-sum over all 2^n hidden states."""
    v = _check_visible(params, v)
    if v.ndim != 1:
        raise ShapeError("free_energy_g_enum expects a single visible vector")
    states = enumerate_hidden_states(params.weights.shape[1])
    inv_var = np.exp(-params.log_var)
    quad = float(np.sum((v - params.vbias) ** 2 * inv_var) / 2.0)
    # -E(v, h^k) for all k at once
    exponents = states @ (params.weights.T @ (v * inv_var)) + states @ params.hbias - quad
    return float(logsumexp(exponents))


def hidden_log_weights(params: RbmParams) -> np.ndarray:
    """Unnormalized log p(h) over all 2^n hidden states (visible integrated out).

    Entry k is c.h^k + sum_i s_i (s_i / 2 + b_i) / sigma_i^2 with s = W h^k.
    """
    states = enumerate_hidden_states(params.weights.shape[1])
    s = states @ params.weights.T  # (2^n, m)
    inv_var = np.exp(-params.log_var)
    return states @ params.hbias + ((s / 2.0 + params.vbias) * s * inv_var).sum(axis=1)


def log_partition_constant(params: RbmParams) -> float:
    """Gaussian-integral constant (m/2) log(2 pi) + (1/2) sum_i z_i."""
    m = params.weights.shape[0]
    return float(m / 2.0 * np.log(2.0 * np.pi) + 0.5 * params.log_var.sum())


def exact_log_partition(params: RbmParams) -> float:
    """Exact log Z via enumeration of hidden states (n <= 20)."""
    return log_partition_constant(params) + float(logsumexp(hidden_log_weights(params)))


def log_partition_zero_weights(params: RbmParams) -> float:
    """Closed-form log Z of the model with W set to 0 (b, c, z kept).

    With no coupling the hidden sum factorizes into softplus terms and the
    visible integral is the Gaussian constant.  Used as the analytic base
    of the annealing path in AIS.
    """
    return log_partition_constant(params) + float(softplus(params.hbias).sum())


def hidden_marginal(params: RbmParams) -> tuple[np.ndarray, np.ndarray]:
    """All hidden states and their exact marginal probabilities p(h)."""
    states = enumerate_hidden_states(params.weights.shape[1])
    logw = hidden_log_weights(params)
    p = np.exp(logw - logsumexp(logw))
    return states, p / p.sum()


@dataclasses.dataclass(frozen=True)
class LseQProblem:
    """A log-sum-exponential-quadratic instance.

    Represents u -> log sum_i beta_i exp(u^T A_i u / 2 + a_i^T u) with
    symmetric PSD matrices A_i, vectors a_i, and coefficients beta_i >= 0.
    """

    quad_terms: tuple[np.ndarray, ...]
    lin_terms: tuple[np.ndarray, ...]
    coeffs: tuple[float, ...]
    psd_tol: float = 1e-10

    def __post_init__(self):
        quads = tuple(np.asarray(a, dtype=np.float64) for a in self.quad_terms)
        lins = tuple(np.asarray(a, dtype=np.float64) for a in self.lin_terms)
        coeffs = tuple(float(b) for b in self.coeffs)
        object.__setattr__(self, "quad_terms", quads)
        object.__setattr__(self, "lin_terms", lins)
        object.__setattr__(self, "coeffs", coeffs)
        if not (len(quads) == len(lins) == len(coeffs)) or len(quads) < 1:
            raise ShapeError("quad_terms, lin_terms and coeffs must have equal length >= 1")
        d = lins[0].shape[0]
        for k, (A, a) in enumerate(zip(quads, lins)):
            if a.shape != (d,) or A.shape != (d, d):
                raise ShapeError(f"term {k}: expected shapes ({d}, {d}) and ({d},)")
            if not np.allclose(A, A.T, atol=1e-10):
                raise DomainError(f"term {k}: quadratic matrix is not symmetric")
            if np.linalg.eigvalsh(A).min() < -self.psd_tol:
                raise DomainError(f"term {k}: quadratic matrix is not PSD")
        for k, b in enumerate(coeffs):
            if b < 0:
                raise DomainError(f"term {k}: coefficient {b} is negative")

    @property
    def dim(self) -> int:
        return self.lin_terms[0].shape[0]


def lse_q_value_grad(problem: LseQProblem, u) -> tuple[float, np.ndarray]:
    """Value and gradient of the log-sum-exponential-quadratic function.

    The gradient is sum_i gamma_i (A_i u + a_i) with gamma the softmax of
    the per-term exponents; terms with coefficient 0 drop out.  Raises
    DomainError when every coefficient is zero (log of zero).
    """
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (problem.dim,):
        raise ShapeError(f"expected point of shape ({problem.dim},), got {u.shape}")
    if not np.isfinite(u).all():
        raise DomainError("non-finite evaluation point")
    exps = []
    dirs = []
    for A, a, b in zip(problem.quad_terms, problem.lin_terms, problem.coeffs):
        if b == 0.0:
            continue
        exps.append(np.log(b) + 0.5 * u @ A @ u + a @ u)
        dirs.append(A @ u + a)
    if not exps:
        raise DomainError("all coefficients are zero; log-sum is -inf")
    exps = np.asarray(exps)
    value = float(logsumexp(exps))
    gamma = np.exp(exps - value)
    grad = gamma @ np.asarray(dirs)
    return value, grad
