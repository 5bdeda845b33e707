"""Scalar sampling kernels, pure-Python backend.

Reference implementation of the kernels that `_kernels.pyx` compiles. Both
backends consume the same BitGenerator primitives in the same order and use
the same scipy special functions, so a chain run on either backend produces
bit-identical draws. Keep every formula here textually in sync with the
.pyx twin; any reordering of floating-point operations breaks parity.
"""

from __future__ import annotations

from math import expm1, log1p, nextafter, sqrt

from scipy.special import gammainc, gammaincinv, ndtr, ndtri

BACKEND_NAME = "python"

# Standardized bound beyond which the inverse-CDF route loses accuracy and
# the Rayleigh tail sampler takes over.
_TAIL = 0.66


def _tail_draw(gen, l, u):
    # Exact accept-reject for the standard normal truncated to [l, u],
    # 0.66 <= l < u <= inf, via exponential proposals on x = z^2/2.
    c = 0.5 * l * l
    if not (c < 1e306):
        # Interval narrower than one ulp of l; point mass to double precision.
        return l
    f = expm1(c - 0.5 * u * u)
    while True:
        x = c - log1p(gen.random() * f)
        w = gen.random()
        if w * w * x <= c:
            return sqrt(2.0 * x)


def truncnorm(gen, mu, sd, lo, hi):
    """One draw from N(mu, sd^2) truncated to [lo, hi].

    lo == hi returns the bound exactly; open sign boundaries are kept
    strict (a draw never lands exactly on a finite bound).
    """
    if lo == hi:
        return lo
    l = (lo - mu) / sd
    u = (hi - mu) / sd
    if l == u:
        x = l
    elif l > _TAIL:
        x = _tail_draw(gen, l, u)
    elif u < -_TAIL:
        x = -_tail_draw(gen, -u, -l)
    else:
        pl = ndtr(l)
        pu = ndtr(u)
        pr = pl + gen.random() * (pu - pl)
        if pr < 1e-300:
            pr = 1e-300
        if pr > 0.9999999999999999:
            pr = 0.9999999999999999
        x = ndtri(pr)
    if x < l:
        x = l
    if x > u:
        x = u
    v = mu + sd * x
    if v <= lo:
        v = nextafter(lo, hi)
    if v >= hi:
        v = nextafter(hi, lo)
    return v


def truncnorm_many(gen, out, mu, sd, lo, hi):
    """Fill `out` with independent truncated-normal draws, elementwise."""
    for i in range(out.shape[0]):
        out[i] = truncnorm(gen, mu[i], sd[i], lo[i], hi[i])


def _trunc_exp(gen, rate, ub):
    # Inverse CDF of Exp(rate) truncated to (0, ub].
    uu = gen.random()
    rb = rate * ub
    if rb < 1e-8:
        x = uu * ub
    else:
        x = -log1p(uu * expm1(-rb)) / rate
    if x <= 0.0:
        x = 0.5 * ub
    if x > ub:
        x = ub
    return x


def _trunc_gamma(gen, shape, rate, ub):
    # Inverse CDF of Gamma(shape, rate) truncated to (0, ub]. Degenerate
    # rate (or deep underflow of the gamma CDF) falls back to the prior
    # slice, density proportional to x^(shape-1) on (0, ub].
    uu = gen.random()
    rb = rate * ub
    pmax = 0.0
    if rb >= 1e-8:
        pmax = gammainc(shape, rb)
    if pmax <= 0.0:
        x = ub * uu ** (1.0 / shape)
    else:
        pr = uu * pmax
        if pr < 1e-300:
            pr = 1e-300
        x = gammaincinv(shape, pr) / rate
    if x <= 0.0:
        x = 0.5 * ub
    if x > ub:
        x = ub
    return x


def horseshoe_local_row(gen, psi2, phi, sigma2, tau2):
    """Slice-update every local shrinkage scale of one equation, in place.

    psi2 holds squared scales; each update draws the slice level given the
    current scale, then the scale given the slice (truncated exponential
    in eta = 1/psi2).
    """
    k = psi2.shape[0]
    inv_st = 1.0 / (2.0 * sigma2 * tau2)
    for j in range(k):
        eta = 1.0 / psi2[j]
        uu = gen.random() / (1.0 + eta)
        if uu < 1e-300:
            uu = 1e-300
        ub = (1.0 - uu) / uu
        if ub < 1e-300:
            ub = 1e-300
        rate = phi[j] * phi[j] * inv_st
        psi2[j] = 1.0 / _trunc_exp(gen, rate, ub)


def horseshoe_global(gen, tau2, phi, psi2, sigma2):
    """Slice-update the global shrinkage scale of one equation.

    Returns the new squared scale. The slice target in xi = 1/tau2 is a
    Gamma((k+1)/2, rate) truncated to the slice interval.
    """
    k = phi.shape[0]
    xi = 1.0 / tau2
    uu = gen.random() / (1.0 + xi)
    if uu < 1e-300:
        uu = 1e-300
    ub = (1.0 - uu) / uu
    if ub < 1e-300:
        ub = 1e-300
    s = 0.0
    for j in range(k):
        s += phi[j] * phi[j] / psi2[j]
    rate = s / (2.0 * sigma2)
    shape = 0.5 * (k + 1.0)
    return 1.0 / _trunc_gamma(gen, shape, rate, ub)


def lambda_row_gibbs(gen, lam, mean, prec, lo, hi):
    """One Gibbs sweep over the active loadings of one equation, in place.

    Each cell is drawn from its exact univariate conditional within the
    row posterior N(mean, prec^-1), truncated to [lo, hi). Sweep order is
    fixed (left to right) so runs are reproducible.
    """
    q = lam.shape[0]
    for j in range(q):
        pjj = prec[j, j]
        s = 0.0
        for m in range(q):
            if m != j:
                s += prec[j, m] * (lam[m] - mean[m])
        cm = mean[j] - s / pjj
        csd = 1.0 / sqrt(pjj)
        lam[j] = truncnorm(gen, cm, csd, lo[j], hi[j])
