# cython: boundscheck=False, wraparound=False, cdivision=True
"""Scalar sampling kernels, compiled backend.

Twin of _purepy.py; keep formulas textually in sync. Randomness comes from
the same BitGenerator primitives the Generator methods wrap, so a given
stream state yields the same draw on either backend.
"""

from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport expm1, log1p, nextafter, pow, sqrt
from numpy.random cimport bitgen_t
from numpy.random.c_distributions cimport random_standard_uniform
from scipy.special.cython_special cimport gammainc, gammaincinv, ndtr, ndtri

BACKEND_NAME = "cython"

cdef double _TAIL = 0.66

cdef const char *_CAPSULE = "BitGenerator"


cdef inline bitgen_t *_bg(object gen) except NULL:
    return <bitgen_t *> PyCapsule_GetPointer(gen.bit_generator.capsule, _CAPSULE)


cdef double _tail_draw(bitgen_t *bg, double l, double u) noexcept nogil:
    # Exact accept-reject for the standard normal truncated to [l, u],
    # 0.66 <= l < u <= inf, via exponential proposals on x = z^2/2.
    cdef double c = 0.5 * l * l
    cdef double f, x, w
    if not (c < 1e306):
        # Interval narrower than one ulp of l; point mass to double precision.
        return l
    f = expm1(c - 0.5 * u * u)
    while True:
        x = c - log1p(random_standard_uniform(bg) * f)
        w = random_standard_uniform(bg)
        if w * w * x <= c:
            return sqrt(2.0 * x)


cdef double _truncnorm_c(bitgen_t *bg, double mu, double sd, double lo, double hi) noexcept nogil:
    cdef double l, u, x, pl, pu, pr, v
    if lo == hi:
        return lo
    l = (lo - mu) / sd
    u = (hi - mu) / sd
    if l == u:
        x = l
    elif l > _TAIL:
        x = _tail_draw(bg, l, u)
    elif u < -_TAIL:
        x = -_tail_draw(bg, -u, -l)
    else:
        pl = ndtr(l)
        pu = ndtr(u)
        pr = pl + random_standard_uniform(bg) * (pu - pl)
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


def truncnorm(object gen, double mu, double sd, double lo, double hi):
    """One draw from N(mu, sd^2) truncated to [lo, hi]."""
    cdef bitgen_t *bg = _bg(gen)
    return _truncnorm_c(bg, mu, sd, lo, hi)


def truncnorm_many(object gen, double[::1] out, double[::1] mu, double[::1] sd,
                   double[::1] lo, double[::1] hi):
    """Fill `out` with independent truncated-normal draws, elementwise."""
    cdef bitgen_t *bg = _bg(gen)
    cdef Py_ssize_t i, n = out.shape[0]
    with nogil:
        for i in range(n):
            out[i] = _truncnorm_c(bg, mu[i], sd[i], lo[i], hi[i])


cdef double _trunc_exp(bitgen_t *bg, double rate, double ub) noexcept nogil:
    # Inverse CDF of Exp(rate) truncated to (0, ub].
    cdef double uu = random_standard_uniform(bg)
    cdef double rb = rate * ub
    cdef double x
    if rb < 1e-8:
        x = uu * ub
    else:
        x = -log1p(uu * expm1(-rb)) / rate
    if x <= 0.0:
        x = 0.5 * ub
    if x > ub:
        x = ub
    return x


cdef double _trunc_gamma(bitgen_t *bg, double shape, double rate, double ub) noexcept nogil:
    # Inverse CDF of Gamma(shape, rate) truncated to (0, ub]. Degenerate
    # rate (or deep underflow of the gamma CDF) falls back to the prior
    # slice, density proportional to x^(shape-1) on (0, ub].
    cdef double uu = random_standard_uniform(bg)
    cdef double rb = rate * ub
    cdef double pmax = 0.0
    cdef double pr, x
    if rb >= 1e-8:
        pmax = gammainc(shape, rb)
    if pmax <= 0.0:
        x = ub * pow(uu, 1.0 / shape)
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


def horseshoe_local_row(object gen, double[::1] psi2, double[::1] phi,
                        double sigma2, double tau2):
    """Slice-update every local shrinkage scale of one equation, in place."""
    cdef bitgen_t *bg = _bg(gen)
    cdef Py_ssize_t j, k = psi2.shape[0]
    cdef double inv_st = 1.0 / (2.0 * sigma2 * tau2)
    cdef double eta, uu, ub, rate
    with nogil:
        for j in range(k):
            eta = 1.0 / psi2[j]
            uu = random_standard_uniform(bg) / (1.0 + eta)
            if uu < 1e-300:
                uu = 1e-300
            ub = (1.0 - uu) / uu
            if ub < 1e-300:
                ub = 1e-300
            rate = phi[j] * phi[j] * inv_st
            psi2[j] = 1.0 / _trunc_exp(bg, rate, ub)


def horseshoe_global(object gen, double tau2, double[::1] phi, double[::1] psi2,
                     double sigma2):
    """Slice-update the global shrinkage scale of one equation; returns tau2."""
    cdef bitgen_t *bg = _bg(gen)
    cdef Py_ssize_t j, k = phi.shape[0]
    cdef double xi = 1.0 / tau2
    cdef double uu, ub, s, rate, shape, out
    with nogil:
        uu = random_standard_uniform(bg) / (1.0 + xi)
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
        out = 1.0 / _trunc_gamma(bg, shape, rate, ub)
    return out


def lambda_row_gibbs(object gen, double[::1] lam, double[::1] mean,
                     double[:, ::1] prec, double[::1] lo, double[::1] hi):
    """One Gibbs sweep over the active loadings of one equation, in place."""
    cdef bitgen_t *bg = _bg(gen)
    cdef Py_ssize_t j, m, q = lam.shape[0]
    cdef double pjj, s, cm, csd
    with nogil:
        for j in range(q):
            pjj = prec[j, j]
            s = 0.0
            for m in range(q):
                if m != j:
                    s += prec[j, m] * (lam[m] - mean[m])
            cm = mean[j] - s / pjj
            csd = 1.0 / sqrt(pjj)
            lam[j] = _truncnorm_c(bg, cm, csd, lo[j], hi[j])
