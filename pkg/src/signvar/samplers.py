"""Public sampling primitives with a compiled fast path.

The scalar-heavy kernels live in `_kernels` (Cython) with a pure-Python
twin in `_purepy`; whichever is available is picked at import time. Set
SIGNVAR_BACKEND=python or =cython to force one. Matrix-variate draws are
numpy on both backends. All randomness flows through `RngStream`.
"""

from __future__ import annotations

import os
from typing import Optional

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .core import NumericalError, ValidationError
from .rng import RngStream

__all__ = [
    "BACKEND",
    "kernels",
    "sample_truncated_normal",
    "sample_gaussian_posterior_fast",
    "slice_update_local",
    "slice_update_global",
    "sample_inverse_gamma",
]

_requested = os.environ.get("SIGNVAR_BACKEND", "")
if _requested == "python":
    from . import _purepy as kernels
elif _requested == "cython":
    from . import _kernels as kernels  # type: ignore[no-redef]
else:
    try:
        from . import _kernels as kernels  # type: ignore[no-redef]
    except ImportError:
        from . import _purepy as kernels  # type: ignore[no-redef]

BACKEND: str = kernels.BACKEND_NAME

# Alias so tests can assert which dense factorizations get formed.
_cholesky = np.linalg.cholesky


def sample_truncated_normal(mu, sigma, lower, upper, stream: RngStream):
    """Draw from N(mu, sigma^2) truncated to [lower, upper].

    Scalars give a float; array arguments broadcast and give an array.
    Point intervals (lower == upper) return the bound exactly. The
    sampler is exact for any placement of the interval, including far
    tails.
    """
    mu_a, sd_a, lo_a, hi_a = np.broadcast_arrays(
        np.asarray(mu, dtype=np.float64),
        np.asarray(sigma, dtype=np.float64),
        np.asarray(lower, dtype=np.float64),
        np.asarray(upper, dtype=np.float64),
    )
    if np.any(sd_a <= 0) or np.any(np.isnan(sd_a)):
        raise ValidationError("sigma must be strictly positive")
    if np.any(lo_a > hi_a) or np.any(np.isnan(lo_a)) or np.any(np.isnan(hi_a)):
        raise ValidationError("need lower <= upper")
    gen = stream.generator
    if mu_a.ndim == 0:
        return float(kernels.truncnorm(gen, float(mu_a), float(sd_a), float(lo_a), float(hi_a)))
    shape = mu_a.shape
    out = np.empty(mu_a.size)
    kernels.truncnorm_many(
        gen,
        out,
        np.ascontiguousarray(mu_a, dtype=np.float64).ravel(),
        np.ascontiguousarray(sd_a, dtype=np.float64).ravel(),
        np.ascontiguousarray(lo_a, dtype=np.float64).ravel(),
        np.ascontiguousarray(hi_a, dtype=np.float64).ravel(),
    )
    return out.reshape(shape)


def gaussian_posterior_route(k: int, t_eff: int) -> str:
    """Which algorithm `sample_gaussian_posterior_fast` uses for a shape.

    "woodbury" (cost T^2 k, no k x k factorization) when k > T_eff,
    "direct" (one k x k Cholesky) otherwise.
    """
    return "woodbury" if k > t_eff else "direct"


def sample_gaussian_posterior_fast(
    x: np.ndarray,
    y: np.ndarray,
    sigma2: float,
    prior_var: np.ndarray,
    stream: RngStream,
    xtx: Optional[np.ndarray] = None,
    xty: Optional[np.ndarray] = None,
) -> np.ndarray:
    """One draw from the Gaussian regression posterior of one equation.

    Model y = x @ beta + e, e ~ N(0, sigma2 I), prior beta ~ N(0,
    diag(prior_var)). The posterior is N(V (x'y)/sigma2, V) with
    V^-1 = diag(1/prior_var) + x'x / sigma2. Two exact routes select on
    shape (see `gaussian_posterior_route`); both sample the identical
    distribution.

    `xtx` and `xty` may carry precomputed x'x and x'y for the direct
    route; they are ignored on the Woodbury route.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 2 or y.ndim != 1 or y.shape[0] != x.shape[0]:
        raise ValidationError(f"bad shapes x={x.shape} y={y.shape}")
    t_eff, k = x.shape
    d = np.asarray(prior_var, dtype=np.float64)
    if d.shape != (k,):
        raise ValidationError(f"prior_var must have shape ({k},), got {d.shape}")
    if not np.all(d > 0) or not float(sigma2) > 0:
        raise ValidationError("variances must be strictly positive")
    gen = stream.generator
    try:
        if gaussian_posterior_route(k, t_eff) == "woodbury":
            # Woodbury route: O(T^2 k), never forms a k x k matrix.
            sd = np.sqrt(sigma2)
            phi_s = x / sd
            alpha = y / sd
            u = gen.standard_normal(k) * np.sqrt(d)
            delta = gen.standard_normal(t_eff)
            v = phi_s @ u + delta
            m = (phi_s * d) @ phi_s.T
            m[np.diag_indices_from(m)] += 1.0
            cl = _cholesky(m)
            w = cho_solve((cl, True), alpha - v)
            return u + d * (phi_s.T @ w)
        if xtx is None:
            xtx = x.T @ x
        if xty is None:
            xty = x.T @ y
        a = xtx / sigma2
        a[np.diag_indices_from(a)] += 1.0 / d
        cl = _cholesky(a)
        mean = cho_solve((cl, True), xty / sigma2)
        z = gen.standard_normal(k)
        return mean + solve_triangular(cl, z, trans="T", lower=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"posterior precision not positive definite: {exc}") from exc


def slice_update_local(
    psi2: np.ndarray, phi: np.ndarray, sigma2: float, tau: float, stream: RngStream
) -> np.ndarray:
    """Slice-update the local shrinkage scales of one equation.

    Takes and returns squared scales; `tau` is the unsquared global
    scale. Returns a new array, one update per coefficient.
    """
    psi2 = np.array(psi2, dtype=np.float64)
    phi = np.ascontiguousarray(phi, dtype=np.float64)
    if psi2.shape != phi.shape or psi2.ndim != 1:
        raise ValidationError(f"bad shapes psi2={psi2.shape} phi={phi.shape}")
    if not np.all(psi2 > 0) or not float(sigma2) > 0 or not float(tau) > 0:
        raise ValidationError("scales must be strictly positive")
    kernels.horseshoe_local_row(stream.generator, psi2, phi, float(sigma2), float(tau) ** 2)
    return psi2


def slice_update_global(
    tau: float, phi: np.ndarray, psi2: np.ndarray, sigma2: float, stream: RngStream
) -> float:
    """Slice-update the global shrinkage scale of one equation.

    Takes and returns the unsquared scale.
    """
    phi = np.ascontiguousarray(phi, dtype=np.float64)
    psi2 = np.ascontiguousarray(psi2, dtype=np.float64)
    if psi2.shape != phi.shape or psi2.ndim != 1:
        raise ValidationError(f"bad shapes psi2={psi2.shape} phi={phi.shape}")
    if not np.all(psi2 > 0) or not float(sigma2) > 0 or not float(tau) > 0:
        raise ValidationError("scales must be strictly positive")
    tau2 = kernels.horseshoe_global(
        stream.generator, float(tau) ** 2, phi, psi2, float(sigma2)
    )
    return float(np.sqrt(tau2))


def sample_inverse_gamma(shape, scale, stream: RngStream):
    """Draw from the inverse gamma IG(shape, scale).

    Parameterized so the density is proportional to
    x^-(shape+1) exp(-scale/x); the mean is scale/(shape-1) for
    shape > 1. Scalars give a float; arrays broadcast.
    """
    sh = np.asarray(shape, dtype=np.float64)
    sc = np.asarray(scale, dtype=np.float64)
    if np.any(sh <= 0) or np.any(sc <= 0):
        raise ValidationError("shape and scale must be strictly positive")
    g = stream.generator.standard_gamma(sh)
    out = sc / g
    if out.ndim == 0:
        return float(out)
    return out
