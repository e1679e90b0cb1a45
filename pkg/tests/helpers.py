"""Shared test utilities: parameter factories and finite-difference oracles."""

import numpy as np

from gbrbm.model import RbmParams, free_energy_g


def make_params(rng, m, n, scale=1.0, z_scale=1.0):
    """Random parameters with entries U[-scale, scale] and z in U[-z_scale, z_scale]."""
    return RbmParams(
        weights=rng.uniform(-scale, scale, (m, n)),
        vbias=rng.uniform(-scale, scale, m),
        hbias=rng.uniform(-scale, scale, n),
        log_var=rng.uniform(-z_scale, z_scale, m),
    )


def fd_grad_g(params, v, eps=1e-6):
    """Central finite differences of free_energy_g in (W, c)."""
    m, n = params.weights.shape
    d_w = np.zeros((m, n))
    for i in range(m):
        for j in range(n):
            w_hi, w_lo = params.weights.copy(), params.weights.copy()
            w_hi[i, j] += eps
            w_lo[i, j] -= eps
            d_w[i, j] = (free_energy_g(params.replace(weights=w_hi), v)
                         - free_energy_g(params.replace(weights=w_lo), v)) / (2 * eps)
    d_c = np.zeros(n)
    for j in range(n):
        c_hi, c_lo = params.hbias.copy(), params.hbias.copy()
        c_hi[j] += eps
        c_lo[j] -= eps
        d_c[j] = (free_energy_g(params.replace(hbias=c_hi), v)
                  - free_energy_g(params.replace(hbias=c_lo), v)) / (2 * eps)
    return d_w, d_c


def assert_grad_close(actual, expected, rtol=1e-5, atol=1e-8):
    """Gradient comparison at relative tolerance with an absolute floor for near-zero entries."""
    np.testing.assert_allclose(actual, expected, rtol=rtol, atol=atol)
