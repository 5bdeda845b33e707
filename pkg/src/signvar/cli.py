"""Command-line front end.

Subcommands: estimate (fit one dataset), simulate (generate synthetic
data), mc (replicated generate-estimate studies), bench (restricted
Gibbs vs. rotation accept-reject throughput), backends (compiled vs.
pure-Python kernel timings).

Exit codes: 0 success, 1 numerical failure, 2 I/O or parse failure,
3 validation failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from datetime import datetime, timezone
from typing import Optional

import numpy as np

from . import files
from .baseline import benchmark_throughput
from .bench import compare_backends, format_report
from .core import (
    Dataset,
    NumericalError,
    ParseError,
    SignPattern,
    SignVarError,
    ValidationError,
    apply_tcode,
    build_regressors,
)
from .dgp import (
    CALIBRATED_LOADINGS,
    CALIBRATED_SIGNS,
    DgpSpec,
    generate_var_data,
    run_monte_carlo,
    speed_test_dgp,
    standard_mc_cases,
)
from .files import _PATTERN_TOKENS
from .gibbs import run_chain
from .rng import RngStream
from .structural import compute_dic, irf_quantiles

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_IO = 2
EXIT_VALIDATION = 3

_DGP_PARAM_STREAM = 100
_DGP_DATA_STREAM = 101


def _utcnow() -> datetime:
    return datetime.now(timezone.utc)


def _quantile_label(q: float) -> str:
    return f"{100.0 * q:.10g}"


def _apply_tcodes(data: Dataset, tcodes: list[int]) -> Dataset:
    if len(tcodes) != data.n_vars:
        raise ValidationError(f"{len(tcodes)} tcodes for {data.n_vars} variables")
    cols = [
        apply_tcode(data.observations[:, i], c) for i, c in enumerate(tcodes)
    ]
    t_min = min(len(c) for c in cols)
    obs = np.column_stack([c[-t_min:] for c in cols])
    return Dataset(obs, names=data.names, tcodes=tcodes)


def _n_threads(arg_threads: Optional[int], parallel_flag: bool) -> int:
    if arg_threads is not None:
        if arg_threads < 1:
            raise ValidationError(f"--threads must be >= 1, got {arg_threads}")
        return arg_threads
    if parallel_flag:
        return max(1, min(os.cpu_count() or 1, 8))
    return 1


def cmd_estimate(args: argparse.Namespace) -> int:
    started = _utcnow()
    cfg = files.load_config(args.config)
    if args.seed is not None:
        cfg.mcmc = replace(cfg.mcmc, seed=args.seed)
    data, _ = files.read_dataset_csv(args.data)
    pattern = files.read_pattern_csv(args.pattern)
    if cfg.tcodes is not None:
        data = _apply_tcodes(data, cfg.tcodes)
    os.makedirs(args.out, exist_ok=True)

    threads = _n_threads(args.threads, cfg.mcmc.parallel_equations)
    logger.info(
        "estimating: n=%d T=%d p=%d r=%d, %d iterations, %d thread(s)",
        data.n_vars, data.n_obs, cfg.p, cfg.r, cfg.mcmc.total_draws, threads,
    )
    out = run_chain(data, cfg.p, cfg.r, pattern, cfg.prior, cfg.mcmc, n_threads=threads)
    logger.info(
        "chain done: %d draws kept in %.1f s (%s backend)",
        out.meta["n_kept"], out.meta["seconds_elapsed"], out.meta["backend"],
    )

    outputs = []
    bin_path, txt_path = files.write_draw_archive(
        os.path.join(args.out, "draws"), out.draws, cfg.save_factors
    )
    outputs += [bin_path, txt_path]

    levels = sorted(set(cfg.quantiles) | {0.5})
    quants = irf_quantiles(out.draws, cfg.horizon, levels)
    med_path = os.path.join(args.out, "irf_median.csv")
    files.write_irf_csv(med_path, quants[0.5], data.names)
    outputs.append(med_path)
    for q in levels:
        if q == 0.5:
            continue
        q_path = os.path.join(args.out, f"irf_q{_quantile_label(q)}.csv")
        files.write_irf_csv(q_path, quants[q], data.names)
        outputs.append(q_path)

    y_eff, x = build_regressors(data.observations, cfg.p)
    dic = compute_dic(out.draws, y_eff, x)
    dic_path = os.path.join(args.out, "dic.txt")
    with open(dic_path, "w", encoding="utf-8") as fh:
        fh.write(f"DIC: {dic!r}\n")
    outputs.append(dic_path)

    files.write_manifest(
        os.path.join(args.out, "manifest.json"),
        command="estimate",
        config_snapshot=cfg.snapshot(),
        seed=cfg.mcmc.seed,
        inputs={"data": args.data, "pattern": args.pattern, "config": args.config},
        outputs=outputs,
        started=started,
    )
    logger.info("DIC %.2f; outputs in %s", dic, args.out)
    return EXIT_OK


def _load_json(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ValidationError("config root must be an object")
    return raw


def _decaying_diag_phi(n: int, p: int) -> np.ndarray:
    # Lag-j block 0.5^j I; absolute row sums < 1, so always stationary.
    phi = np.zeros((n, 1 + n * p))
    for j in range(1, p + 1):
        phi[:, 1 + (j - 1) * n : 1 + j * n] = 0.5**j * np.eye(n)
    return phi


def _build_dgp(sec: dict, seed: int) -> tuple[DgpSpec, Optional[SignPattern]]:
    """Resolve the config's dgp section to a spec plus optional pattern."""
    if not isinstance(sec, dict):
        raise ValidationError("config section 'dgp' must be an object")
    preset = sec.get("preset")
    if preset == "calibrated":
        n, r = CALIBRATED_LOADINGS.shape
        p = int(sec.get("p", 1))
        spec = DgpSpec(
            phi=_decaying_diag_phi(n, p),
            loadings=CALIBRATED_LOADINGS,
            sigma2=np.full(n, float(sec.get("sigma2", 1.0))),
            t_out=int(sec.get("t_out", 516)),
            burn_obs=int(sec.get("burn_obs", 1000)),
        )
        return spec, SignPattern(CALIBRATED_SIGNS)
    if preset == "speed":
        spec, pattern = speed_test_dgp(
            n=int(sec.get("n", 15)),
            r=int(sec.get("r", 3)),
            t_out=int(sec.get("t_out", 200)),
            stream=RngStream(seed, _DGP_PARAM_STREAM),
        )
        if "burn_obs" in sec:
            spec = replace(spec, burn_obs=int(sec["burn_obs"]))
        return spec, pattern
    if preset is not None:
        raise ValidationError(f"unknown dgp preset {preset!r}")
    for key in ("phi", "loadings", "sigma2", "t_out"):
        if key not in sec:
            raise ValidationError(f"dgp section missing {key!r}")
    spec = DgpSpec(
        phi=np.asarray(sec["phi"], dtype=np.float64),
        loadings=np.asarray(sec["loadings"], dtype=np.float64),
        sigma2=np.asarray(sec["sigma2"], dtype=np.float64),
        t_out=int(sec["t_out"]),
        burn_obs=int(sec.get("burn_obs", 1000)),
    )
    return spec, None


def cmd_simulate(args: argparse.Namespace) -> int:
    started = _utcnow()
    raw = _load_json(args.config)
    unknown = set(raw) - {"dgp"}
    if unknown:
        raise ValidationError(f"unknown config sections: {sorted(unknown)}")
    if "dgp" not in raw:
        raise ValidationError("config must have a 'dgp' section")
    seed = args.seed if args.seed is not None else int(raw["dgp"].get("seed", 0))
    spec, pattern = _build_dgp(raw["dgp"], seed)
    data, shocks = generate_var_data(spec, RngStream(seed, _DGP_DATA_STREAM))
    os.makedirs(args.out, exist_ok=True)

    outputs = []
    data_path = os.path.join(args.out, "data.csv")
    files.write_dataset_csv(data_path, data)
    outputs.append(data_path)
    shocks_path = os.path.join(args.out, "shocks.csv")
    files.write_dataset_csv(
        shocks_path,
        Dataset(shocks, names=[f"shock{j + 1}" for j in range(shocks.shape[1])]),
    )
    outputs.append(shocks_path)
    if pattern is not None:
        pat_path = os.path.join(args.out, "pattern.csv")
        files.write_pattern_csv(pat_path, pattern)
        outputs.append(pat_path)

    files.write_manifest(
        os.path.join(args.out, "manifest.json"),
        command="simulate",
        config_snapshot={"dgp": raw["dgp"], "seed": seed},
        seed=seed,
        inputs={"config": args.config},
        outputs=outputs,
        started=started,
    )
    logger.info(
        "wrote %d x %d dataset and true shocks to %s",
        data.n_obs, data.n_vars, args.out,
    )
    return EXIT_OK


def _pattern_from_grid(grid: list) -> SignPattern:
    rows = []
    for row in grid:
        cells = []
        for cell in row:
            token = str(cell).strip().upper()
            if token not in _PATTERN_TOKENS:
                raise ValidationError(
                    f"pattern cell {cell!r} is not one of +1, -1, 0, NA"
                )
            cells.append(_PATTERN_TOKENS[token])
        rows.append(cells)
    return SignPattern(np.array(rows, dtype=np.int8))


def cmd_mc(args: argparse.Namespace) -> int:
    started = _utcnow()
    raw = _load_json(args.config)
    allowed = {"dgp", "cases", "model", "pattern", "mc", "prior", "mcmc"}
    unknown = set(raw) - allowed
    if unknown:
        raise ValidationError(f"unknown config sections: {sorted(unknown)}")
    if "dgp" not in raw:
        raise ValidationError("config must have a 'dgp' section")

    mc_sec = raw.get("mc", {})
    if not isinstance(mc_sec, dict):
        raise ValidationError("config section 'mc' must be an object")
    n_reps = int(mc_sec.get("n_reps", 20))
    if n_reps < 1:
        raise ValidationError(f"mc.n_reps must be >= 1, got {n_reps}")
    horizon = int(mc_sec.get("horizon", 20))
    band = float(mc_sec.get("band", 0.90))
    dic_eqs = mc_sec.get("dic_equations")
    if dic_eqs is not None:
        dic_eqs = [int(i) for i in dic_eqs]

    prior = files.parse_prior_section(raw.get("prior", {}))
    mcmc = files.parse_mcmc_section(raw.get("mcmc", {}))
    if args.seed is not None:
        mcmc = replace(mcmc, seed=args.seed)
    seed = mcmc.seed
    spec, _ = _build_dgp(raw["dgp"], seed)

    stock = standard_mc_cases()
    cases = []
    if "cases" in raw:
        for name in raw["cases"]:
            if name not in stock:
                raise ValidationError(
                    f"unknown case {name!r}; stock cases: {sorted(stock)}"
                )
            cases.append(stock[name])
    else:
        model = raw.get("model", {})
        if "pattern" not in raw or "p" not in model:
            raise ValidationError(
                "config needs either 'cases' or 'model.p' plus a 'pattern' grid"
            )
        pattern = _pattern_from_grid(raw["pattern"])
        from .dgp import EstimationCase

        cases.append(EstimationCase("custom", int(model["p"]), pattern))

    threads = _n_threads(args.threads, mcmc.parallel_equations)
    os.makedirs(args.out, exist_ok=True)
    outputs = []
    summary_rows = []
    for case in cases:
        logger.info("case %s: %d replications", case.name, n_reps)
        result = run_monte_carlo(
            spec,
            case.pattern,
            case.p,
            n_reps,
            prior=prior,
            mcmc=mcmc,
            horizon=horizon,
            band=band,
            var_subset=case.var_subset,
            dic_equations=dic_eqs,
            n_threads=threads,
        )
        n_case = case.pattern.n_vars
        names = (
            [f"var{i + 1}" for i in range(n_case)]
            if case.var_subset is None
            else [f"var{i + 1}" for i in case.var_subset]
        )
        for stem, arr in (
            ("irf_median", result.pooled_median),
            ("irf_lower", result.pooled_lower),
            ("irf_upper", result.pooled_upper),
        ):
            path = os.path.join(args.out, f"{case.name}_{stem}.csv")
            files.write_irf_csv(path, arr, names)
            outputs.append(path)
        dic_path = os.path.join(args.out, f"{case.name}_dics.csv")
        with open(dic_path, "w", encoding="utf-8") as fh:
            fh.write("replication,dic\n")
            for i, d in enumerate(result.dics):
                fh.write(f"{i},{d!r}\n")
        outputs.append(dic_path)
        summary_rows.append(
            (
                case.name,
                result.coverage,
                float(np.mean(result.dics)),
                float(np.median(result.dics)),
                result.n_failed,
            )
        )
        logger.info(
            "case %s: coverage %.3f, mean DIC %.2f, %d failed",
            case.name, result.coverage, float(np.mean(result.dics)), result.n_failed,
        )

    summary_path = os.path.join(args.out, "mc_summary.csv")
    with open(summary_path, "w", encoding="utf-8") as fh:
        fh.write("case,coverage,mean_dic,median_dic,n_failed\n")
        for name, cov, mean_d, med_d, failed in summary_rows:
            fh.write(f"{name},{cov!r},{mean_d!r},{med_d!r},{failed}\n")
    outputs.append(summary_path)

    files.write_manifest(
        os.path.join(args.out, "manifest.json"),
        command="mc",
        config_snapshot=raw,
        seed=seed,
        inputs={"config": args.config},
        outputs=outputs,
        started=started,
    )
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    started = _utcnow()
    data, _ = files.read_dataset_csv(args.data)
    pattern = files.read_pattern_csv(args.pattern)
    seed = args.seed if args.seed is not None else 0
    report = benchmark_throughput(
        data, args.lags, pattern, args.budget, seed=seed
    )
    os.makedirs(args.out, exist_ok=True)
    json_path = os.path.join(args.out, "benchmark.json")
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(report.as_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    txt_path = os.path.join(args.out, "benchmark.txt")
    text = report.summary()
    with open(txt_path, "w", encoding="utf-8") as fh:
        fh.write(text)
    sys.stdout.write(text)
    files.write_manifest(
        os.path.join(args.out, "manifest.json"),
        command="bench",
        config_snapshot={"lags": args.lags, "budget": args.budget},
        seed=seed,
        inputs={"data": args.data, "pattern": args.pattern},
        outputs=[json_path, txt_path],
        started=started,
    )
    return EXIT_OK


def cmd_backends(args: argparse.Namespace) -> int:
    report = compare_backends(budget_seconds=args.budget)
    text = format_report(report)
    sys.stdout.write(text)
    if args.out is not None:
        os.makedirs(args.out, exist_ok=True)
        with open(
            os.path.join(args.out, "backends.json"), "w", encoding="utf-8"
        ) as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
        with open(
            os.path.join(args.out, "backends.txt"), "w", encoding="utf-8"
        ) as fh:
            fh.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="signvar",
        description="Factor-based sign-restricted VAR estimation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", help="fit one dataset and write IRF tables")
    est.add_argument("--data", required=True, help="dataset CSV")
    est.add_argument("--pattern", required=True, help="sign-restriction CSV")
    est.add_argument("--config", required=True, help="run configuration JSON")
    est.add_argument("--out", required=True, help="output directory")
    est.add_argument("--seed", type=int, default=None, help="override config seed")
    est.add_argument("--threads", type=int, default=None)
    est.set_defaults(func=cmd_estimate)

    sim = sub.add_parser("simulate", help="generate synthetic data")
    sim.add_argument("--config", required=True)
    sim.add_argument("--out", required=True)
    sim.add_argument("--seed", type=int, default=None)
    sim.set_defaults(func=cmd_simulate)

    mc = sub.add_parser("mc", help="replicated generate-estimate study")
    mc.add_argument("--config", required=True)
    mc.add_argument("--out", required=True)
    mc.add_argument("--seed", type=int, default=None)
    mc.add_argument("--threads", type=int, default=None)
    mc.set_defaults(func=cmd_mc)

    ben = sub.add_parser(
        "bench", help="restricted Gibbs vs rotation accept-reject throughput"
    )
    ben.add_argument("--data", required=True)
    ben.add_argument("--pattern", required=True)
    ben.add_argument("--out", required=True)
    ben.add_argument("--budget", type=float, default=10.0, help="seconds per method")
    ben.add_argument("--lags", type=int, default=1)
    ben.add_argument("--seed", type=int, default=None)
    ben.set_defaults(func=cmd_bench)

    back = sub.add_parser("backends", help="compare compiled and pure-Python kernels")
    back.add_argument("--out", default=None)
    back.add_argument("--budget", type=float, default=3.0)
    back.set_defaults(func=cmd_backends)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    if not logging.getLogger().handlers:
        logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except SignVarError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
