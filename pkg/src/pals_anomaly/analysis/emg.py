"""
Exponential decay convolved with a Gaussian timing response.

For delay ``u = t - t0``, rate ``lam`` and response width ``sigma`` the
survival function of the convolved density is

    S(u) = Phi(-u/sigma) + exp(-lam*u + lam^2 sigma^2 / 2) * Phi(u/sigma - lam*sigma)

and the second term is evaluated through ``erfcx`` where the direct form
would overflow. Bin contents are differences of ``S`` at the bin edges.

An exponential delay of the start signal (rate ``mu``) subtracted from the
decay time turns the decay into a two-sided exponential: a forward branch
of weight ``mu/(lam+mu)`` and a backward branch of rate ``mu`` and weight
``lam/(lam+mu)``.
"""
from __future__ import annotations

import numpy as np
from scipy.special import erfcx, ndtr

SQRT2 = np.sqrt(2.0)
INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def _tail_term(u, lam, sigma):
    """``exp(-lam u + lam^2 sigma^2/2) Phi(u/sigma - lam sigma)``, overflow-safe."""
    u = np.asarray(u, dtype=float)
    x = (lam * sigma - u / sigma) / SQRT2
    out = np.zeros_like(u)
    fin = np.isfinite(u)
    neg = fin & (x < 0)
    pos = fin & ~neg
    out[pos] = 0.5 * np.exp(-0.5 * (u[pos] / sigma) ** 2) * erfcx(x[pos])
    out[neg] = np.exp(-lam * u[neg] + 0.5 * (lam * sigma) ** 2) * ndtr(u[neg] / sigma - lam * sigma)
    return out


def survival(u, lam, sigma):
    """Probability that the smeared delay exceeds ``u``."""
    u = np.asarray(u, dtype=float)
    return ndtr(-u / sigma) + _tail_term(u, lam, sigma)


def survival_derivatives(u, lam, sigma):
    """Return ``S, dS/dlam, dS/dsigma, dS/du`` at each ``u`` (infinite ``u`` allowed)."""
    u = np.asarray(u, dtype=float)
    g = _tail_term(u, lam, sigma)
    with np.errstate(invalid="ignore", over="ignore"):
        z = np.where(np.isfinite(u), u / sigma, 0.0)
        phi = INV_SQRT_2PI * np.exp(-0.5 * z * z)
        s = ndtr(-u / sigma) + g
        d_lam = (lam * sigma ** 2 - np.where(np.isfinite(u), u, 0.0)) * g - sigma * phi
        d_sigma = lam ** 2 * sigma * g - lam * phi
        d_u = -lam * g
    fin = np.isfinite(u)
    return s, np.where(fin, d_lam, 0.0), np.where(fin, d_sigma, 0.0), np.where(fin, d_u, 0.0)


def delayed_survival(u, lam, sigma, start_delay=0.0):
    """Survival with a start delay of mean ``start_delay`` subtracted."""
    return delayed_survival_derivatives(u, lam, sigma, start_delay)[0]


def delayed_survival_derivatives(u, lam, sigma, start_delay=0.0):
    """Like :func:`survival_derivatives` for the start-delayed decay."""
    if start_delay <= 0:
        return survival_derivatives(u, lam, sigma)
    u = np.asarray(u, dtype=float)
    mu = 1.0 / start_delay
    wf = mu / (lam + mu)
    s, d_lam, d_sig, d_u = survival_derivatives(u, lam, sigma)
    sb_neg, _, dsb_sig, dsb_u = survival_derivatives(-u, mu, sigma)
    back = 1.0 - sb_neg
    total = wf * s + (1.0 - wf) * back
    dw = mu / (lam + mu) ** 2
    return (total,
            dw * (back - s) + wf * d_lam,
            wf * d_sig - (1.0 - wf) * dsb_sig,
            wf * d_u + (1.0 - wf) * dsb_u)


def bin_fractions(edges, lam, sigma, t0=0.0, start_delay=0.0):
    """Share of a unit-area decay landing in each bin between consecutive ``edges``."""
    s = delayed_survival(np.asarray(edges, dtype=float) - t0, lam, sigma, start_delay)
    return s[:-1] - s[1:]


def density(t, lam, sigma, t0=0.0):
    """Convolved probability density at ``t`` (ns^-1)."""
    return lam * _tail_term(np.asarray(t, dtype=float) - t0, lam, sigma)
