"""High-precision reference quantities shared by several test modules."""

import mpmath as mp
import numpy as np

from signvar.rng import RngStream
from signvar.samplers import sample_truncated_normal


def truncated_normal_moments(mu, sd, lo, hi):
    """Exact mean, variance, and fourth central moment of a truncated normal.

    Evaluated at 50 decimal digits so far-tail intervals (8+ standard
    deviations out) lose nothing to cancellation.
    """
    with mp.workdps(50):
        sd_m = mp.mpf(sd)
        mu_m = mp.mpf(mu)
        a = mp.mpf("-inf") if np.isneginf(lo) else (mp.mpf(lo) - mu_m) / sd_m
        b = mp.mpf("+inf") if np.isposinf(hi) else (mp.mpf(hi) - mu_m) / sd_m
        z = mp.ncdf(b) - mp.ncdf(a)

        def edge(x, k):
            if not mp.isfinite(x):
                return mp.mpf(0)
            return x**k * mp.npdf(x)

        # Standardized non-central moments by recursion:
        # M_k = (k-1) M_{k-2} + (a^{k-1} pdf(a) - b^{k-1} pdf(b)) / Z.
        m = [mp.mpf(1), (edge(a, 0) - edge(b, 0)) / z]
        for k in range(2, 5):
            m.append((k - 1) * m[k - 2] + (edge(a, k - 1) - edge(b, k - 1)) / z)
        mean = m[1]
        var = m[2] - m[1] ** 2
        mu4 = m[4] - 4 * m[3] * m[1] + 6 * m[2] * m[1] ** 2 - 3 * m[1] ** 4
        return (
            float(mu_m + sd_m * mean),
            float(sd_m**2 * var),
            float(sd_m**4 * mu4),
        )


def truncation_fuzz_cases(n_cases, seed):
    """Randomized (mu, sd, lo, hi) tuples covering the hard placements.

    Roughly a fifth of the cases put the interval 8 or more standard
    deviations into one tail; the rest mix two-sided, one-sided, and
    effectively unrestricted intervals.
    """
    gen = np.random.default_rng(seed)
    cases = []
    for i in range(n_cases):
        mu = float(gen.uniform(-3.0, 3.0))
        sd = float(np.exp(gen.uniform(np.log(0.1), np.log(10.0))))
        kind = i % 5
        if kind == 0:
            off = float(gen.uniform(8.0, 10.0))
            width = float(gen.uniform(0.5, 2.0))
            side = 1.0 if gen.random() < 0.5 else -1.0
            lo = mu + side * off * sd
            hi = lo + width * sd
            if side < 0:
                lo, hi = hi - 2 * width * sd, hi - width * sd
        elif kind == 1:
            cut = float(gen.uniform(-2.0, 9.0))
            if gen.random() < 0.5:
                lo, hi = mu + cut * sd, np.inf
            else:
                lo, hi = -np.inf, mu - cut * sd
        elif kind == 2:
            a, b = np.sort(gen.uniform(-4.0, 4.0, 2))
            lo, hi = mu + a * sd, mu + b * sd
        elif kind == 3:
            lo, hi = -1e8, 1e8
        else:
            center = float(gen.uniform(-2.0, 2.0))
            half = float(gen.uniform(0.01, 0.2))
            lo, hi = mu + (center - half) * sd, mu + (center + half) * sd
        cases.append((mu, sd, float(lo), float(hi)))
    return cases


def run_truncation_fuzz(n_cases, n_draws, seed):
    """Worst absolute z-scores of empirical mean/variance over the fuzz.

    Returns (max_mean_z, max_var_z); both should sit below 3 if the
    sampler matches the closed-form moments.
    """
    cases = truncation_fuzz_cases(n_cases, seed)
    max_mean_z = max_var_z = 0.0
    for idx, (mu, sd, lo, hi) in enumerate(cases):
        mean, var, mu4 = truncated_normal_moments(mu, sd, lo, hi)
        draws = sample_truncated_normal(
            np.full(n_draws, mu), sd, lo, hi, RngStream(seed + 1, idx)
        )
        se_mean = np.sqrt(var / n_draws) + 1e-12 * sd
        se_var = np.sqrt(max(mu4 - var**2, 0.0) / n_draws) + 1e-12 * sd**2
        max_mean_z = max(max_mean_z, abs(draws.mean() - mean) / se_mean)
        max_var_z = max(max_var_z, abs(draws.var(ddof=1) - var) / se_var)
    return max_mean_z, max_var_z
