"""Impulse responses, stationarity checks, and model comparison."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import NumericalError, ParameterState, ValidationError

__all__ = [
    "IrfResult",
    "compute_irf",
    "companion_matrix",
    "companion_spectral_radius",
    "irf_quantiles",
    "impact_matrix_pseudo_inverse",
    "log_likelihood",
    "marginal_log_likelihood",
    "compute_dic",
]


@dataclass(frozen=True)
class IrfResult:
    """Responses of every variable to every shock over horizons 0..H.

    responses[h, i, m] is the reaction of variable i to shock m after h
    periods; horizon 0 is the impact response (the loading matrix).
    """

    responses: np.ndarray

    @property
    def horizon(self) -> int:
        return self.responses.shape[0] - 1


def _split_lags(phi: np.ndarray) -> list[np.ndarray]:
    phi = np.asarray(phi, dtype=np.float64)
    if phi.ndim != 2:
        raise ValidationError(f"phi must be 2-d, got {phi.shape}")
    n, k = phi.shape
    if (k - 1) % n != 0 or k < 1 + n:
        raise ValidationError(f"phi shape {phi.shape} is not (n, 1 + n*p)")
    p = (k - 1) // n
    return [phi[:, 1 + j * n : 1 + (j + 1) * n] for j in range(p)]


def compute_irf(phi: np.ndarray, loadings: np.ndarray, horizon: int) -> IrfResult:
    """Impulse responses by direct recursion on the moving-average weights.

    Psi_0 = I and Psi_h = sum_{j<=min(h,p)} Psi_{h-j} A_j, where A_j is
    the j-th lag block of `phi` (intercept excluded); the response at
    horizon h is Psi_h @ loadings.
    """
    if horizon < 0:
        raise ValidationError(f"horizon must be >= 0, got {horizon}")
    lags = _split_lags(phi)
    lam = np.asarray(loadings, dtype=np.float64)
    n = phi.shape[0]
    if lam.ndim != 2 or lam.shape[0] != n:
        raise ValidationError(f"loadings shape {lam.shape} does not match n={n}")
    psi = [np.eye(n)]
    for h in range(1, horizon + 1):
        acc = np.zeros((n, n))
        for j in range(1, min(h, len(lags)) + 1):
            acc += psi[h - j] @ lags[j - 1]
        psi.append(acc)
    responses = np.stack([ps @ lam for ps in psi])
    return IrfResult(responses=responses)


def companion_matrix(phi: np.ndarray) -> np.ndarray:
    """Companion form of the lag blocks, shape (n*p, n*p)."""
    lags = _split_lags(phi)
    n = phi.shape[0]
    p = len(lags)
    comp = np.zeros((n * p, n * p))
    comp[:n, :] = np.hstack(lags)
    if p > 1:
        comp[n:, : n * (p - 1)] = np.eye(n * (p - 1))
    return comp


def companion_spectral_radius(phi: np.ndarray) -> float:
    """Largest eigenvalue modulus of the companion matrix (< 1: stationary)."""
    return float(np.max(np.abs(np.linalg.eigvals(companion_matrix(phi)))))


def irf_quantiles(
    draws: Sequence[ParameterState],
    horizon: int,
    levels: Sequence[float],
) -> dict[float, np.ndarray]:
    """Pointwise posterior quantiles of the impulse responses.

    Returns {level: array of shape (horizon+1, n, r)} for each requested
    level in (0, 1).
    """
    if not draws:
        raise ValidationError("no draws to summarize")
    levels = [float(q) for q in levels]
    for q in levels:
        if not 0.0 < q < 1.0:
            raise ValidationError(f"quantile level {q} outside (0, 1)")
    all_irfs = np.stack(
        [compute_irf(d.phi, d.loadings, horizon).responses for d in draws]
    )
    out = {}
    for q in levels:
        out[q] = np.quantile(all_irfs, q, axis=0)
    return out


def impact_matrix_pseudo_inverse(loadings: np.ndarray) -> np.ndarray:
    """Left pseudo-inverse (L'L)^-1 L' of the impact matrix.

    Maps reduced-form disturbances to the implied shock estimates; for
    orthonormal columns it reduces to L'.
    """
    lam = np.asarray(loadings, dtype=np.float64)
    if lam.ndim != 2:
        raise ValidationError(f"loadings must be 2-d, got {lam.shape}")
    gram = lam.T @ lam
    try:
        cl = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("loading matrix is rank deficient") from exc
    return np.linalg.solve(gram, lam.T)


def log_likelihood(
    state: ParameterState,
    y_eff: np.ndarray,
    x: np.ndarray,
    equation_subset: Optional[Sequence[int]] = None,
) -> float:
    """Gaussian log density of the data given one full parameter draw.

    Conditions on the draw's own factor path; with an equation subset,
    only those equations' terms enter.
    """
    u = y_eff - x @ state.phi.T - state.factors @ state.loadings.T
    s2 = state.sigma2
    if equation_subset is not None:
        idx = np.asarray(list(equation_subset), dtype=int)
        u = u[:, idx]
        s2 = s2[idx]
    t_eff = u.shape[0]
    ssr = np.einsum("ti,ti->i", u, u)
    return float(
        -0.5 * t_eff * np.sum(np.log(2.0 * np.pi * s2)) - 0.5 * np.sum(ssr / s2)
    )


def marginal_log_likelihood(
    state: ParameterState,
    y_eff: np.ndarray,
    x: np.ndarray,
    equation_subset: Optional[Sequence[int]] = None,
) -> float:
    """Gaussian log density of the data with the factors folded in.

    The disturbance y_t - Phi x_t carries the common component, so its
    covariance is Lambda Lambda' + diag(sigma2). An equation subset
    evaluates the corresponding marginal block.
    """
    phi = state.phi
    lam = state.loadings
    s2 = state.sigma2
    if equation_subset is not None:
        idx = np.asarray(list(equation_subset), dtype=int)
        if idx.size == 0 or idx.min() < 0 or idx.max() >= phi.shape[0]:
            raise ValidationError(f"equation subset {idx.tolist()} out of range")
        phi = phi[idx]
        lam = lam[idx]
        s2 = s2[idx]
        y_eff = y_eff[:, idx]
    u = y_eff - x @ phi.T
    omega = lam @ lam.T + np.diag(s2)
    try:
        chol = np.linalg.cholesky(omega)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            "disturbance covariance is not positive definite"
        ) from exc
    t_eff, m = u.shape
    half_logdet = float(np.sum(np.log(np.diag(chol))))
    w = np.linalg.solve(chol, u.T)
    quad = float(np.sum(w * w))
    return -0.5 * t_eff * m * np.log(2.0 * np.pi) - t_eff * half_logdet - 0.5 * quad


def compute_dic(
    draws: Sequence[ParameterState],
    y_eff: np.ndarray,
    x: np.ndarray,
    equation_subset: Optional[Sequence[int]] = None,
) -> float:
    """Deviance information criterion over stored draws.

    DIC = -4 E[log f(y | theta)] + 2 log f(y | theta_hat), where f is
    the marginal density with the factor path integrated out and the
    plug-in theta_hat is the element-wise posterior mean. Scoring draws
    marginally keeps surplus factor columns from buying fit with their
    pathwise tracking of idiosyncratic noise. Lower is better. A
    degenerate chain (all draws equal) gives exactly
    -2 log f(y | theta_hat).
    """
    if not draws:
        raise ValidationError("no draws to evaluate")
    lls = np.array(
        [marginal_log_likelihood(d, y_eff, x, equation_subset) for d in draws]
    )
    mean_state = ParameterState(
        phi=np.mean([d.phi for d in draws], axis=0),
        loadings=np.mean([d.loadings for d in draws], axis=0),
        factors=np.mean([d.factors for d in draws], axis=0),
        sigma2=np.mean([d.sigma2 for d in draws], axis=0),
        psi2=np.mean([d.psi2 for d in draws], axis=0),
        tau=np.mean([d.tau for d in draws], axis=0),
    )
    ll_hat = marginal_log_likelihood(mean_state, y_eff, x, equation_subset)
    return float(-4.0 * np.mean(lls) + 2.0 * ll_hat)
