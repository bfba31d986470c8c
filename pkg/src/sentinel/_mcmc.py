"""Compiled inner loops for the random-walk Metropolis sampler.

These kernels operate on transformed parameter vectors
x = [ln A, B, t0, ln tau_fall, ln tau_rise, ln sigma_int] and evaluate the
unnormalized posterior: Gaussian observation likelihood with total variance
(A * sigma_int)^2 + sigma_D^2 around the rise/fall flux model, plus a
Gaussian prior over x. They are kept free of Python objects so numba can
compile them once (cache=True) and reuse the machine code across processes.
"""

from __future__ import annotations

import numpy as np
from numba import njit

LOG_2PI = float(np.log(2.0 * np.pi))
NEG_INF = -1.0e300


@njit(cache=True)
def log_posterior(X, t, D, sD, mu, prec, prior_const, sigma_floor):
    """Unnormalized log posterior for a batch of transformed parameter rows.

    X: (k, 6); t, D, sD: (n,) observation arrays (n may be 0 for a
    prior-only target); mu/prec: prior mean and precision in transformed
    space; prior_const: Gaussian prior normalization constant.
    """
    k = X.shape[0]
    n = t.shape[0]
    out = np.empty(k)
    for j in range(k):
        A = np.exp(X[j, 0])
        B = X[j, 1]
        t0 = X[j, 2]
        tau_fall = np.exp(X[j, 3])
        tau_rise = np.exp(X[j, 4])
        sigma_int = np.exp(X[j, 5])
        if sigma_int < sigma_floor:
            sigma_int = sigma_floor
        # exp() underflow would divide by zero below; such proposals are dead
        if tau_fall < 1e-12 or tau_rise < 1e-12 or not np.isfinite(A):
            out[j] = NEG_INF
            continue
        var_int = (A * sigma_int) ** 2
        ll = 0.0
        for i in range(n):
            u = t[i] - t0
            if u >= 0.0:
                core = np.exp(-u / tau_fall) / (1.0 + np.exp(-u / tau_rise))
            else:
                core = np.exp(u / tau_rise - u / tau_fall) / (1.0 + np.exp(u / tau_rise))
            f = A * core + B
            v = var_int + sD[i] * sD[i]
            r = D[i] - f
            ll += -0.5 * (LOG_2PI + np.log(v) + r * r / v)
        q = 0.0
        for a in range(6):
            s = 0.0
            for b in range(6):
                s += prec[a, b] * (X[j, b] - mu[b])
            q += (X[j, a] - mu[a]) * s
        total = ll + prior_const - 0.5 * q
        out[j] = total if np.isfinite(total) else NEG_INF
    return out


@njit(cache=True)
def metropolis_segment(x, lp, t, D, sD, mu, prec, prior_const, sigma_floor,
                       prop_chol, scale, n_iter, seed):
    """Advance k parallel chains n_iter steps with a fixed Gaussian proposal.

    Mutates x (k, 6) and lp (k,) in place; returns the visited states
    (n_iter, k, 6), their log posteriors (n_iter, k), and the accept count.
    """
    np.random.seed(seed)
    k = x.shape[0]
    states = np.empty((n_iter, k, 6))
    lps = np.empty((n_iter, k))
    n_accept = 0
    prop = np.empty((k, 6))
    for it in range(n_iter):
        z = np.random.standard_normal((k, 6))
        for j in range(k):
            for a in range(6):
                step = 0.0
                for b in range(6):
                    step += prop_chol[a, b] * z[j, b]
                prop[j, a] = x[j, a] + scale * step
        lpp = log_posterior(prop, t, D, sD, mu, prec, prior_const, sigma_floor)
        for j in range(k):
            if np.log(np.random.random()) < lpp[j] - lp[j]:
                for a in range(6):
                    x[j, a] = prop[j, a]
                lp[j] = lpp[j]
                n_accept += 1
            states[it, j] = x[j]
            lps[it, j] = lp[j]
    return states, lps, n_accept
