"""Gibbs sampler for a VAR whose disturbances load on sign-restricted factors.

Model: y_t = Phi x_t + Lambda f_t + v_t with f_t ~ N(0, I_r) and diagonal
idiosyncratic variance. Sign/zero restrictions on the loadings (the impact
responses) are imposed exactly inside the chain by truncated draws, so
every iteration satisfies the pattern; there is no accept-reject step.

Block order per iteration: VAR coefficients per equation, shrinkage scales
per equation, loadings per equation, factor path (then orthonormalized),
idiosyncratic variances. Equation blocks may run on a thread pool; each
equation owns a dedicated RNG stream, so results are identical for any
thread count.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.linalg import solve_triangular

from . import samplers
from .core import (
    MINUS,
    PLUS,
    ZERO,
    Dataset,
    McmcConfig,
    NumericalError,
    ParameterState,
    PriorConfig,
    SignPattern,
    ValidationError,
    build_regressors,
    check_identification,
)
from .rng import EQUATION_STREAM_BASE, FACTOR_STREAM, RngStream

__all__ = [
    "ChainOutput",
    "run_chain",
    "step_phi",
    "step_horseshoe",
    "step_lambda",
    "step_factors",
    "step_sigma",
    "orthonormalize_factors",
    "initial_state",
]

logger = logging.getLogger(__name__)


@dataclass
class ChainOutput:
    """Stored draws plus run metadata.

    meta keys: n_iterations, n_kept, n_discarded_nonstationary, p, r,
    seconds_elapsed, backend, seed.
    """

    draws: list[ParameterState]
    meta: dict = field(default_factory=dict)

    def stack(self, name: str) -> np.ndarray:
        """All stored values of one state field as a (n_draws, ...) array."""
        return np.stack([getattr(d, name) for d in self.draws])


def orthonormalize_factors(factors: np.ndarray) -> np.ndarray:
    """Gram-Schmidt the factor columns and scale each to unit variance.

    Moments are taken about zero (the factors are mean zero by model
    design): column j is made orthogonal to columns < j, then divided by
    its root mean square. The span of the leading j columns is unchanged
    for every j. Raises NumericalError on a collinear draw.
    """
    f = np.asarray(factors, dtype=np.float64)
    if f.ndim != 2:
        raise ValidationError(f"factors must be 2-d, got {f.shape}")
    t_eff, r = f.shape
    out = np.empty_like(f)
    for j in range(r):
        v = f[:, j].copy()
        for m in range(j):
            q = out[:, m]
            v -= (q @ v) / (q @ q) * q
        norm0 = float(np.linalg.norm(f[:, j]))
        norm_v = float(np.linalg.norm(v))
        if norm_v <= 1e-10 * max(norm0, 1e-300):
            raise NumericalError(f"factor column {j} is collinear with earlier columns")
        out[:, j] = v / (norm_v / np.sqrt(t_eff))
    return out


def _prior_variances(state: ParameterState, prior: PriorConfig, i: int) -> np.ndarray:
    if prior.mode == "diffuse":
        return np.full(state.phi.shape[1], prior.diffuse_scale)
    return state.sigma2[i] * state.tau[i] ** 2 * state.psi2[i]


def step_phi(
    state: ParameterState,
    x: np.ndarray,
    y_eff: np.ndarray,
    prior: PriorConfig,
    streams: Sequence[RngStream],
    xtx: Optional[np.ndarray] = None,
    xty: Optional[np.ndarray] = None,
    equations: Optional[Sequence[int]] = None,
) -> None:
    """Redraw the VAR coefficients of each equation, in place.

    Conditions on the current loadings and factor path; the common
    component is subtracted from the target before the regression draw.
    """
    n = state.phi.shape[0]
    common = state.factors @ state.loadings.T
    xtf = x.T @ state.factors if xty is not None else None
    for i in equations if equations is not None else range(n):
        d = _prior_variances(state, prior, i)
        ytil = y_eff[:, i] - common[:, i]
        xty_i = xty[:, i] - xtf @ state.loadings[i] if xty is not None else None
        state.phi[i] = samplers.sample_gaussian_posterior_fast(
            x, ytil, state.sigma2[i], d, streams[i], xtx=xtx, xty=xty_i
        )


def step_horseshoe(
    state: ParameterState,
    prior: PriorConfig,
    streams: Sequence[RngStream],
    equations: Optional[Sequence[int]] = None,
) -> None:
    """Slice-update local and global shrinkage scales, in place.

    No-op (and no stream consumption) under the diffuse prior.
    """
    if prior.mode == "diffuse":
        return
    n = state.phi.shape[0]
    for i in equations if equations is not None else range(n):
        gen = streams[i].generator
        tau2 = state.tau[i] ** 2
        samplers.kernels.horseshoe_local_row(
            gen, state.psi2[i], state.phi[i], state.sigma2[i], tau2
        )
        tau2 = samplers.kernels.horseshoe_global(
            gen, tau2, state.phi[i], state.psi2[i], state.sigma2[i]
        )
        state.tau[i] = np.sqrt(tau2)


def step_lambda(
    state: ParameterState,
    resid: np.ndarray,
    pattern: SignPattern,
    prior: PriorConfig,
    streams: Sequence[RngStream],
    ftf: Optional[np.ndarray] = None,
    fte: Optional[np.ndarray] = None,
    equations: Optional[Sequence[int]] = None,
) -> None:
    """Redraw each restricted loading row, in place.

    `resid` is y_eff - x @ phi', the disturbance the factors explain.
    Zero cells stay exactly zero; sign cells are drawn from exact
    truncated conditionals, so the pattern holds after every call.
    """
    n, r = state.loadings.shape
    lo_all, hi_all = pattern.bounds()
    if ftf is None:
        ftf = state.factors.T @ state.factors
    if fte is None:
        fte = state.factors.T @ resid
    for i in equations if equations is not None else range(n):
        active = np.flatnonzero(pattern.codes[i] != ZERO)
        state.loadings[i, pattern.codes[i] == ZERO] = 0.0
        if active.size == 0:
            continue
        s2 = state.sigma2[i]
        prec = np.ascontiguousarray(ftf[np.ix_(active, active)]) / s2
        prec[np.diag_indices_from(prec)] += 1.0 / prior.h_loading
        c = fte[active, i] / s2
        try:
            mean = np.linalg.solve(prec, c)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"loading precision singular in equation {i}") from exc
        row = np.ascontiguousarray(state.loadings[i, active])
        samplers.kernels.lambda_row_gibbs(
            streams[i].generator,
            row,
            mean,
            prec,
            np.ascontiguousarray(lo_all[i, active]),
            np.ascontiguousarray(hi_all[i, active]),
        )
        state.loadings[i, active] = row


def step_factors(state: ParameterState, resid: np.ndarray, stream: RngStream) -> None:
    """Redraw the whole factor path from its Gaussian posterior, in place.

    Does not orthonormalize; the chain applies `orthonormalize_factors`
    right after.
    """
    t_eff, r = state.factors.shape
    lam_w = state.loadings / state.sigma2[:, None]
    prec = np.eye(r) + state.loadings.T @ lam_w
    rhs = resid @ lam_w
    try:
        cl = np.linalg.cholesky(prec)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("factor posterior precision not positive definite") from exc
    mean = solve_triangular(cl.T, solve_triangular(cl, rhs.T, lower=True), lower=False)
    z = stream.generator.standard_normal((t_eff, r))
    state.factors = mean.T + solve_triangular(cl, z.T, trans="T", lower=True).T


def step_sigma(
    state: ParameterState,
    resid: np.ndarray,
    prior: PriorConfig,
    streams: Sequence[RngStream],
    t_eff: Optional[int] = None,
) -> None:
    """Redraw the idiosyncratic variances, in place.

    Conjugate update: shape T_eff/2 + rho, scale kappa + SSR/2, where the
    sum of squared residuals nets out both the VAR part (`resid` is
    y_eff - x @ phi') and the current common component.
    """
    u = resid - state.factors @ state.loadings.T
    ssr = np.einsum("ti,ti->i", u, u)
    t_eff = resid.shape[0] if t_eff is None else t_eff
    shape = 0.5 * t_eff + prior.rho
    for i in range(state.sigma2.shape[0]):
        state.sigma2[i] = samplers.sample_inverse_gamma(
            shape, prior.kappa + 0.5 * ssr[i], streams[i]
        )


def initial_state(
    y_eff: np.ndarray,
    x: np.ndarray,
    r: int,
    pattern: SignPattern,
    prior: PriorConfig,
) -> ParameterState:
    """Deterministic starting point inside the restricted region.

    Ridge least squares for the VAR part, principal components of its
    residuals for loadings and factors (reflected/zeroed into the sign
    pattern), residual variances for sigma2, unit shrinkage scales.
    """
    t_eff, n = y_eff.shape
    k = x.shape[1]
    xtx = x.T @ x
    ridge = 1e-4 * max(np.trace(xtx) / k, 1e-8)
    a = xtx + ridge * np.eye(k)
    phi = np.ascontiguousarray(np.linalg.solve(a, x.T @ y_eff).T)
    e0 = y_eff - x @ phi.T
    u, _, _ = np.linalg.svd(e0, full_matrices=False)
    f0 = np.sqrt(t_eff) * u[:, :r]
    lam = (e0.T @ f0) / t_eff
    floor = 1e-6
    plus = pattern.codes == PLUS
    minus = pattern.codes == MINUS
    lam[plus] = np.maximum(np.abs(lam[plus]), floor)
    lam[minus] = -np.maximum(np.abs(lam[minus]), floor)
    lam[pattern.codes == ZERO] = 0.0
    resid0 = e0 - f0 @ lam.T
    sigma2 = np.maximum(np.mean(resid0**2, axis=0), 1e-8)
    lam_w = lam / sigma2[:, None]
    prec = np.eye(r) + lam.T @ lam_w
    factors = np.ascontiguousarray(np.linalg.solve(prec, (e0 @ lam_w).T).T)
    return ParameterState(
        phi=phi,
        loadings=lam,
        factors=factors,
        sigma2=sigma2,
        psi2=np.ones((n, k)),
        tau=np.ones(n),
    )


def _equation_blocks(n: int, n_threads: int) -> list[np.ndarray]:
    return [b for b in np.array_split(np.arange(n), max(n_threads, 1)) if b.size]


def run_chain(
    data: Dataset,
    p: int,
    r: int,
    pattern: SignPattern,
    prior: PriorConfig,
    mcmc: McmcConfig,
    n_threads: int = 1,
    iteration_hook: Optional[Callable[[int, ParameterState], None]] = None,
) -> ChainOutput:
    """Run the full sampler and return stored draws.

    Stores floor((total - burn) / thin) draws: iterations burn + thin,
    burn + 2 thin, ... With `stationarity_filter` on, stored draws whose
    companion spectral radius is >= 1 are dropped afterwards (count in
    meta). `iteration_hook`, if given, sees every post-sweep state; it
    must not consume the chain's RNG streams.
    """
    from .structural import companion_spectral_radius

    y = data.observations
    if pattern.n_vars != y.shape[1]:
        raise ValidationError(
            f"pattern has {pattern.n_vars} rows for {y.shape[1]} variables"
        )
    if r != pattern.n_shocks:
        raise ValidationError(f"r={r} but pattern has {pattern.n_shocks} shock columns")
    report = check_identification(y.shape[1], r)
    if report.warning:
        logger.warning(report.warning)
    y_eff, x = build_regressors(y, p)
    t_eff, n = y_eff.shape
    if t_eff < r + 1:
        raise ValidationError(f"T_eff={t_eff} too short for r={r} factors")

    eq_streams = [RngStream(mcmc.seed, EQUATION_STREAM_BASE + i) for i in range(n)]
    fac_stream = RngStream(mcmc.seed, FACTOR_STREAM)
    state = initial_state(y_eff, x, r, pattern, prior)

    xtx = x.T @ x
    xty = x.T @ y_eff
    n_threads = max(int(n_threads), 1)
    blocks = _equation_blocks(n, n_threads) if n_threads > 1 else None
    pool = ThreadPoolExecutor(max_workers=n_threads) if blocks else None

    draws: list[ParameterState] = []
    start = time.perf_counter()
    try:
        for it in range(1, mcmc.total_draws + 1):
            if pool is not None:
                futs = [
                    pool.submit(
                        _phi_block, state, x, y_eff, prior, eq_streams, xtx, xty, b
                    )
                    for b in blocks
                ]
                for f in futs:
                    f.result()
            else:
                step_phi(state, x, y_eff, prior, eq_streams, xtx=xtx, xty=xty)
                step_horseshoe(state, prior, eq_streams)
            resid = y_eff - x @ state.phi.T
            ftf = state.factors.T @ state.factors
            fte = state.factors.T @ resid
            if pool is not None:
                futs = [
                    pool.submit(
                        step_lambda, state, resid, pattern, prior, eq_streams, ftf, fte, b
                    )
                    for b in blocks
                ]
                for f in futs:
                    f.result()
            else:
                step_lambda(state, resid, pattern, prior, eq_streams, ftf=ftf, fte=fte)
            step_factors(state, resid, fac_stream)
            state.factors = orthonormalize_factors(state.factors)
            step_sigma(state, resid, prior, eq_streams, t_eff=t_eff)
            if iteration_hook is not None:
                iteration_hook(it, state)
            if it > mcmc.burn_in and (it - mcmc.burn_in) % mcmc.thin == 0:
                draws.append(state.copy())
    finally:
        if pool is not None:
            pool.shutdown(wait=True)
    elapsed = time.perf_counter() - start

    n_discarded = 0
    if mcmc.stationarity_filter:
        kept = [d for d in draws if companion_spectral_radius(d.phi) < 1.0]
        n_discarded = len(draws) - len(kept)
        draws = kept

    return ChainOutput(
        draws=draws,
        meta={
            "n_iterations": mcmc.total_draws,
            "n_vars": n,
            "t_eff": t_eff,
            "n_kept": len(draws),
            "n_discarded_nonstationary": n_discarded,
            "p": p,
            "r": r,
            "seconds_elapsed": elapsed,
            "backend": samplers.BACKEND,
            "seed": mcmc.seed,
        },
    )


def _phi_block(state, x, y_eff, prior, streams, xtx, xty, equations) -> None:
    # One thread's share of the coefficient + shrinkage phase.
    step_phi(state, x, y_eff, prior, streams, xtx=xtx, xty=xty, equations=equations)
    step_horseshoe(state, prior, streams, equations=equations)
