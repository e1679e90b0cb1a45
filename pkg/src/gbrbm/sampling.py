"""Block Gibbs sampling with reproducible, splittable random streams.

Randomness is organized around :class:`RngStream`: a counter-based Philox
generator keyed by a 64-bit seed plus a derivation path.  Rebuilding a
stream from the same (seed, path) replays the identical sequence, and
distinct paths give statistically independent streams, so training loops
can hand every epoch/batch its own stream and stay bit-reproducible.

Gaussian draws use numpy's ziggurat standard_normal; Bernoulli draws
compare a uniform against the activation probability.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .errors import DomainError
from .model import RbmParams, hidden_activation, visible_conditional_mean


@dataclasses.dataclass(eq=False)
class RngStream:
    """A deterministic random stream identified by (seed, path).

    The stream state advances as values are drawn; the position in the
    sequence is the Philox counter.  `child` derives an independent stream
    without consuming any randomness from the parent.
    """

    seed: int
    path: tuple[int, ...] = ()

    def __post_init__(self):
        self.path = tuple(int(p) for p in self.path)
        ss = np.random.SeedSequence(self.seed, spawn_key=self.path)
        self.generator = np.random.Generator(np.random.Philox(ss))

    def child(self, *subpath: int) -> "RngStream":
        """Independent stream keyed by this stream's path extended with subpath."""
        return RngStream(self.seed, self.path + tuple(int(p) for p in subpath))

    def uniform(self, shape=None) -> np.ndarray:
        return self.generator.random(shape)

    def standard_normal(self, shape=None) -> np.ndarray:
        return self.generator.standard_normal(shape)

    def permutation(self, n: int) -> np.ndarray:
        return self.generator.permutation(n)

    def state(self) -> dict:
        """Raw bit-generator state (counter, key, buffer) for diagnostics."""
        return self.generator.bit_generator.state


@dataclasses.dataclass(frozen=True)
class ChainState:
    """Current configuration of one block-Gibbs chain."""

    visible: np.ndarray
    hidden: np.ndarray
    step_count: int = 0

    def __post_init__(self):
        object.__setattr__(self, "visible", np.asarray(self.visible, dtype=np.float64))
        object.__setattr__(self, "hidden", np.asarray(self.hidden, dtype=np.float64))
        if self.step_count < 0:
            raise DomainError("step_count must be nonnegative")


def sample_hidden(params: RbmParams, v, rng: RngStream) -> np.ndarray:
    """Draw h ~ p(h | v): independent Bernoullis with p = hidden_activation.

    Accepts a single (m,) vector or an (s, m) batch; returns 0/1 floats of
    shape (n,) or (s, n).
    """
    p = hidden_activation(params, v)
    return (rng.uniform(p.shape) < p).astype(np.float64)


def sample_visible(params: RbmParams, h, rng: RngStream) -> np.ndarray:
    """Draw v ~ p(v | h): independent Gaussians N(b + W h, exp(z))."""
    mean = visible_conditional_mean(params, h)
    sigma = np.exp(0.5 * params.log_var)
    return mean + sigma * rng.standard_normal(mean.shape)


def block_gibbs(params: RbmParams, v0, k: int, rng: RngStream) -> tuple[np.ndarray, np.ndarray]:
    """Run k (hidden, visible) transition pairs from visible state(s) v0.

    Works on a single chain (m,) or a batch of chains (s, m) in lockstep.
    Returns the final visible and hidden states.
    """
    if k < 1:
        raise DomainError(f"need at least one Gibbs step, got k={k}")
    v = np.asarray(v0, dtype=np.float64)
    h = None
    for _ in range(k):
        h = sample_hidden(params, v, rng)
        v = sample_visible(params, h, rng)
    return v, h


def gibbs_chain(params: RbmParams, init_v, k: int, rng: RngStream) -> ChainState:
    """Advance one chain by exactly k block-Gibbs transition pairs.

    `init_v` may be a visible vector (step_count starts at 0) or a prior
    ChainState to continue from (step_count accumulates).
    """
    if isinstance(init_v, ChainState):
        start, base_steps = init_v.visible, init_v.step_count
    else:
        start, base_steps = np.asarray(init_v, dtype=np.float64), 0
    if start.ndim != 1:
        raise DomainError("gibbs_chain tracks a single chain; use block_gibbs for batches")
    v, h = block_gibbs(params, start, k, rng)
    return ChainState(visible=v, hidden=h, step_count=base_steps + k)
