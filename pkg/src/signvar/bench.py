"""Timing comparison between the compiled and pure-Python kernel backends.

Each backend exposes the same scalar kernels; here they are timed on
identical workloads, and a short chain is rerun under each to confirm
the two produce bit-identical draws.
"""

from __future__ import annotations

import time
from contextlib import contextmanager
from typing import Optional

import numpy as np

from . import samplers
from .core import McmcConfig, PriorConfig, SignPattern
from .rng import RngStream


def available_backends() -> dict[str, object]:
    """Importable kernel modules keyed by name; compiled one may be absent."""
    from . import _purepy

    out: dict[str, object] = {"python": _purepy}
    try:
        from . import _kernels

        out["cython"] = _kernels
    except ImportError:
        pass
    return out


@contextmanager
def _active_backend(module):
    # samplers resolves `kernels` at call time, so a temporary swap
    # redirects every downstream caller.
    saved_mod, saved_name = samplers.kernels, samplers.BACKEND
    samplers.kernels, samplers.BACKEND = module, module.BACKEND_NAME
    try:
        yield
    finally:
        samplers.kernels, samplers.BACKEND = saved_mod, saved_name


def _time_call(fn, min_seconds: float) -> float:
    """Seconds per call, averaged over enough repeats to fill the budget."""
    fn()
    reps, spent = 0, 0.0
    start = time.perf_counter()
    while spent < min_seconds:
        fn()
        reps += 1
        spent = time.perf_counter() - start
    return spent / max(reps, 1)


def _kernel_workloads(module, budget: float) -> dict[str, float]:
    gen = np.random.default_rng(12345)
    size = 20_000
    mu = np.zeros(size)
    sigma = np.ones(size)
    lo = gen.uniform(-2.0, 1.0, size)
    hi = lo + gen.uniform(0.1, 3.0, size)
    lo[::7] = -np.inf
    hi[::11] = np.inf
    out = np.empty(size)

    k = 60
    phi_row = gen.normal(size=k)

    q = 4
    a = gen.normal(size=(q, q))
    prec = a @ a.T + q * np.eye(q)
    mean_row = gen.normal(size=q)
    lo_b = np.array([0.0, -np.inf, -np.inf, 0.0])
    hi_b = np.array([np.inf, 0.0, np.inf, np.inf])

    share = budget / 3.0
    times = {}
    times["truncated_normal"] = _time_call(
        lambda: module.truncnorm_many(
            np.random.default_rng(1), out, mu, sigma, lo, hi
        ),
        share,
    ) / size
    times["horseshoe_row"] = _time_call(
        lambda: module.horseshoe_local_row(
            np.random.default_rng(2), np.ones(k), phi_row, 1.0, 0.5
        ),
        share,
    ) / k
    times["loading_row"] = _time_call(
        lambda: module.lambda_row_gibbs(
            np.random.default_rng(3), np.zeros(q), mean_row, prec, lo_b, hi_b
        ),
        share,
    ) / q
    return times


def _chain_workload(module) -> tuple[float, np.ndarray]:
    from .dgp import DgpSpec, generate_var_data
    from .gibbs import run_chain

    lam = np.array([[1.0], [0.6], [-0.8], [0.4]])
    spec = DgpSpec(
        phi=np.hstack([np.zeros((4, 1)), 0.5 * np.eye(4)]),
        loadings=lam,
        sigma2=np.full(4, 0.3),
        t_out=150,
        burn_obs=200,
    )
    data, _ = generate_var_data(spec, RngStream(7, 101))
    pattern = SignPattern(np.array([[1], [2], [-1], [2]], dtype=np.int8))
    mcmc = McmcConfig(total_draws=600, burn_in=100, thin=5, seed=7)
    with _active_backend(module):
        start = time.perf_counter()
        out = run_chain(data, 1, 1, pattern, PriorConfig(), mcmc)
        elapsed = time.perf_counter() - start
    return elapsed, out.stack("loadings")


def compare_backends(
    budget_seconds: float = 3.0, run_chain_check: bool = True
) -> dict:
    """Time every kernel under each available backend.

    Returns per-call seconds for the scalar kernels, wall time for a
    short reference chain, and whether the backends' chain draws are
    bit-identical.
    """
    backends = available_backends()
    report: dict = {"active": samplers.BACKEND, "backends": {}}
    chain_draws = {}
    for name, module in backends.items():
        entry: dict = {
            "kernels_sec_per_draw": _kernel_workloads(
                module, budget_seconds / len(backends)
            )
        }
        if run_chain_check:
            elapsed, draws = _chain_workload(module)
            entry["chain_seconds"] = elapsed
            chain_draws[name] = draws
        report["backends"][name] = entry
    if len(chain_draws) == 2:
        a, b = chain_draws.values()
        report["chains_identical"] = bool(np.array_equal(a, b))
    if len(backends) == 2:
        py = report["backends"]["python"]["kernels_sec_per_draw"]
        cy = report["backends"]["cython"]["kernels_sec_per_draw"]
        report["speedup"] = {k: py[k] / cy[k] for k in py if cy[k] > 0}
    return report


def format_report(report: dict) -> str:
    lines = [f"active backend: {report['active']}"]
    for name, entry in report["backends"].items():
        lines.append(f"[{name}]")
        for kernel, sec in entry["kernels_sec_per_draw"].items():
            lines.append(f"  {kernel}: {sec * 1e9:.0f} ns/draw")
        if "chain_seconds" in entry:
            lines.append(f"  reference chain: {entry['chain_seconds']:.3f} s")
    if "speedup" in report:
        for kernel, ratio in report["speedup"].items():
            lines.append(f"speedup {kernel}: {ratio:.1f}x")
    if "chains_identical" in report:
        lines.append(f"chain draws bit-identical: {report['chains_identical']}")
    return "\n".join(lines) + "\n"


if __name__ == "__main__":
    import sys

    budget = float(sys.argv[1]) if len(sys.argv) > 1 else 3.0
    sys.stdout.write(format_report(compare_backends(budget_seconds=budget)))
