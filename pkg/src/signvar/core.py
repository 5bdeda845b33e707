"""Shared data containers and model-setup helpers.

Pure data plus small deterministic transforms; no sampling code lives here.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "SignVarError",
    "ValidationError",
    "NumericalError",
    "ParseError",
    "PLUS",
    "MINUS",
    "ZERO",
    "FREE",
    "Dataset",
    "SignPattern",
    "PriorConfig",
    "McmcConfig",
    "ParameterState",
    "IdentificationReport",
    "build_regressors",
    "apply_tcode",
    "check_identification",
]


class SignVarError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(SignVarError):
    """Invalid dimensions, options, or configuration values."""


class NumericalError(SignVarError):
    """Numerical failure (singular matrix, non-finite values, ...)."""


class ParseError(SignVarError):
    """Malformed input file."""


# Sign-pattern cell codes. ZERO matches the on-disk token "0"; FREE cells
# impose no restriction.
PLUS = 1
MINUS = -1
ZERO = 0
FREE = 2

_VALID_CODES = frozenset((PLUS, MINUS, ZERO, FREE))


@dataclass
class Dataset:
    """A multivariate time series in model units.

    Parameters
    ----------
    observations : ndarray, shape (T, n)
        One row per period, one column per variable. Must be finite.
    names : sequence of str, optional
        Variable names; defaults to ``var1..varN``.
    tcodes : sequence of int, optional
        Transformation code already applied to each column (1 levels,
        5 log first difference). Informational once data is loaded.
    """

    observations: np.ndarray
    names: Optional[Sequence[str]] = None
    tcodes: Optional[Sequence[int]] = None

    def __post_init__(self) -> None:
        obs = np.asarray(self.observations, dtype=np.float64)
        if obs.ndim != 2:
            raise ValidationError(f"observations must be 2-d, got shape {obs.shape}")
        if obs.shape[0] < 1 or obs.shape[1] < 1:
            raise ValidationError(f"observations must be non-empty, got shape {obs.shape}")
        if not np.all(np.isfinite(obs)):
            raise ValidationError("observations contain non-finite values")
        self.observations = obs
        if self.names is None:
            self.names = [f"var{i + 1}" for i in range(obs.shape[1])]
        else:
            self.names = list(self.names)
            if len(self.names) != obs.shape[1]:
                raise ValidationError(
                    f"{len(self.names)} names for {obs.shape[1]} columns"
                )
        if self.tcodes is not None:
            self.tcodes = list(self.tcodes)
            if len(self.tcodes) != obs.shape[1]:
                raise ValidationError(
                    f"{len(self.tcodes)} tcodes for {obs.shape[1]} columns"
                )

    @property
    def n_obs(self) -> int:
        return self.observations.shape[0]

    @property
    def n_vars(self) -> int:
        return self.observations.shape[1]


@dataclass
class SignPattern:
    """Sign/zero restrictions on the impact responses of ``n`` variables to
    ``r`` shocks.

    ``codes[i, m]`` constrains the loading of variable ``i`` on shock ``m``:
    PLUS (> 0), MINUS (< 0), ZERO (== 0), or FREE (unrestricted).
    """

    codes: np.ndarray

    def __post_init__(self) -> None:
        codes = np.asarray(self.codes)
        if codes.ndim != 2 or codes.shape[0] < 1 or codes.shape[1] < 1:
            raise ValidationError(f"pattern must be a non-empty 2-d grid, got {codes.shape}")
        bad = set(np.unique(codes)) - _VALID_CODES
        if bad:
            raise ValidationError(f"invalid pattern codes {sorted(bad)}")
        self.codes = codes.astype(np.int8)

    @property
    def n_vars(self) -> int:
        return self.codes.shape[0]

    @property
    def n_shocks(self) -> int:
        return self.codes.shape[1]

    @property
    def n_restricted(self) -> int:
        """Number of cells carrying any restriction (non-FREE)."""
        return int(np.sum(self.codes != FREE))

    def has_zero(self) -> bool:
        return bool(np.any(self.codes == ZERO))

    def is_all_free(self) -> bool:
        return bool(np.all(self.codes == FREE))

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Truncation intervals (lo, hi) implied by the codes.

        PLUS -> (0, inf), MINUS -> (-inf, 0), ZERO -> (0, 0),
        FREE -> (-inf, inf).
        """
        lo = np.where(self.codes == PLUS, 0.0, -np.inf)
        hi = np.where(self.codes == MINUS, 0.0, np.inf)
        zero = self.codes == ZERO
        lo = np.where(zero, 0.0, lo)
        hi = np.where(zero, 0.0, hi)
        return lo, hi

    def satisfied_by(self, loadings: np.ndarray) -> bool:
        """True if a loading matrix obeys every cell restriction.

        Zero cells must be exactly 0.0; sign cells must be strict.
        """
        lam = np.asarray(loadings)
        if lam.shape != self.codes.shape:
            raise ValidationError(
                f"loadings shape {lam.shape} vs pattern {self.codes.shape}"
            )
        ok_plus = np.all(lam[self.codes == PLUS] > 0.0)
        ok_minus = np.all(lam[self.codes == MINUS] < 0.0)
        ok_zero = np.all(lam[self.codes == ZERO] == 0.0)
        return bool(ok_plus and ok_minus and ok_zero)

    @classmethod
    def all_free(cls, n_vars: int, n_shocks: int) -> "SignPattern":
        return cls(np.full((n_vars, n_shocks), FREE, dtype=np.int8))

    @classmethod
    def from_loadings(cls, loadings: np.ndarray) -> "SignPattern":
        """Pattern restricting every cell to the sign of the given matrix."""
        lam = np.asarray(loadings, dtype=np.float64)
        codes = np.where(lam > 0, PLUS, np.where(lam < 0, MINUS, ZERO))
        return cls(codes.astype(np.int8))


@dataclass
class PriorConfig:
    """Prior settings for one estimation.

    mode "horseshoe" puts a horseshoe shrinkage prior on the VAR
    coefficients; "diffuse" uses a fixed wide normal prior instead.
    """

    mode: str = "horseshoe"
    h_loading: float = 100.0
    rho: float = 1.0
    kappa: float = 0.01
    diffuse_scale: float = 1.0e6

    def __post_init__(self) -> None:
        if self.mode not in ("horseshoe", "diffuse"):
            raise ValidationError(f"unknown prior mode {self.mode!r}")
        for name in ("h_loading", "rho", "kappa", "diffuse_scale"):
            v = float(getattr(self, name))
            if not np.isfinite(v) or v <= 0:
                raise ValidationError(f"prior.{name} must be positive, got {v}")
            setattr(self, name, v)


@dataclass
class McmcConfig:
    total_draws: int = 550_000
    burn_in: int = 50_000
    thin: int = 100
    seed: int = 0
    stationarity_filter: bool = False
    parallel_equations: bool = False

    def __post_init__(self) -> None:
        if self.total_draws < 1 or self.burn_in < 0 or self.thin < 1:
            raise ValidationError(
                f"bad chain lengths total={self.total_draws} "
                f"burn={self.burn_in} thin={self.thin}"
            )
        if self.n_kept < 1:
            raise ValidationError(
                f"no draws kept: total={self.total_draws} "
                f"burn={self.burn_in} thin={self.thin}"
            )

    @property
    def n_kept(self) -> int:
        """Number of stored draws: floor((total - burn) / thin)."""
        return (self.total_draws - self.burn_in) // self.thin


@dataclass
class ParameterState:
    """One full draw of the sampler.

    phi : (n, k) VAR coefficients, equation per row, intercept in column 0.
    loadings : (n, r) impact responses of variables to shocks.
    factors : (T_eff, r) latent shock path.
    sigma2 : (n,) idiosyncratic variances.
    psi2 : (n, k) local shrinkage scales (squared), horseshoe mode only.
    tau : (n,) global shrinkage scales (not squared).
    """

    phi: np.ndarray
    loadings: np.ndarray
    factors: np.ndarray
    sigma2: np.ndarray
    psi2: np.ndarray
    tau: np.ndarray

    def copy(self) -> "ParameterState":
        return ParameterState(
            phi=self.phi.copy(),
            loadings=self.loadings.copy(),
            factors=self.factors.copy(),
            sigma2=self.sigma2.copy(),
            psi2=self.psi2.copy(),
            tau=self.tau.copy(),
        )


@dataclass(frozen=True)
class IdentificationReport:
    """Static identification check for an (n, r) factor structure."""

    n_vars: int
    n_shocks: int
    common_component_identified: bool
    rotation_restrictions_needed: int
    warning: Optional[str] = None


def build_regressors(y: np.ndarray, p: int) -> tuple[np.ndarray, np.ndarray]:
    """Stack a VAR(p) design matrix.

    Returns ``(y_eff, x)`` where ``y_eff`` is ``y`` with the first ``p``
    rows dropped (shape (T-p, n)) and ``x[t] = (1, y[t-1], ..., y[t-p])``
    in original units (shape (T-p, 1+n*p)).
    """
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 2:
        raise ValidationError(f"y must be 2-d, got shape {y.shape}")
    t_obs, n = y.shape
    if p < 1:
        raise ValidationError(f"lag order must be >= 1, got {p}")
    if t_obs <= p:
        raise ValidationError(f"need more than p={p} observations, got {t_obs}")
    t_eff = t_obs - p
    x = np.empty((t_eff, 1 + n * p))
    x[:, 0] = 1.0
    for j in range(1, p + 1):
        x[:, 1 + (j - 1) * n : 1 + j * n] = y[p - j : t_obs - j, :]
    return y[p:, :].copy(), x


def apply_tcode(series: np.ndarray, code: int) -> np.ndarray:
    """Apply a transformation code to one series.

    Code 1 returns the series unchanged; code 5 returns the log first
    difference (length shrinks by one). Other codes are rejected.
    """
    s = np.asarray(series, dtype=np.float64)
    if s.ndim != 1:
        raise ValidationError(f"series must be 1-d, got shape {s.shape}")
    if code == 1:
        return s.copy()
    if code == 5:
        if s.size < 2:
            raise ValidationError("log difference needs at least 2 observations")
        if np.any(s <= 0):
            raise ValidationError("log difference requires strictly positive values")
        return np.diff(np.log(s))
    raise ValidationError(f"unsupported transformation code {code}")


def check_identification(n_vars: int, n_shocks: int) -> IdentificationReport:
    """Static identification bookkeeping for an exact factor structure.

    The common component is identified when r <= (n - 1) / 2. Separating
    the individual shocks additionally requires r(r-1)/2 restrictions
    (sign/zero cells supply them). Pure function; never raises on a
    merely unidentified configuration, only on impossible ones.
    """
    if n_shocks < 1 or n_shocks > n_vars:
        raise ValidationError(f"need 1 <= r <= n, got n={n_vars} r={n_shocks}")
    identified = n_shocks <= (n_vars - 1) / 2
    warning = None
    if not identified:
        warning = (
            f"r={n_shocks} exceeds (n-1)/2={((n_vars - 1) / 2):g}: "
            "common component not identified from second moments"
        )
    return IdentificationReport(
        n_vars=n_vars,
        n_shocks=n_shocks,
        common_component_identified=identified,
        rotation_restrictions_needed=n_shocks * (n_shocks - 1) // 2,
        warning=warning,
    )
