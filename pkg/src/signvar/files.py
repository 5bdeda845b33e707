"""On-disk formats: dataset and pattern CSVs, config JSON, draw archives,
and run manifests.

All CSV numerics are written with Python's shortest round-trip float
representation, so reading a file back reproduces the in-memory values
bit for bit.
"""

from __future__ import annotations

import csv
import hashlib
import importlib.metadata
import json
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Optional, Sequence

import numpy as np

from .core import (
    Dataset,
    FREE,
    MINUS,
    McmcConfig,
    PLUS,
    ParameterState,
    ParseError,
    PriorConfig,
    SignPattern,
    ValidationError,
    ZERO,
)

try:
    _VERSION = importlib.metadata.version("signvar")
except importlib.metadata.PackageNotFoundError:
    _VERSION = "unknown"

_PATTERN_TOKENS = {"+1": PLUS, "1": PLUS, "-1": MINUS, "0": ZERO, "NA": FREE}
_CODE_TOKENS = {PLUS: "+1", MINUS: "-1", ZERO: "0", FREE: "NA"}

PRIOR_KEYS = ["mode", "h_loading", "rho", "kappa", "diffuse_scale"]
MCMC_KEYS = ["total", "burn", "thin", "seed", "stationarity_filter", "parallel_equations"]


def read_dataset_csv(path: str) -> tuple[Dataset, Optional[list[str]]]:
    """Load a dataset CSV: header of names, one row per period.

    A first column literally named ``date`` is carried back as labels
    and excluded from the numeric block.
    """
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ParseError(f"cannot read dataset file {path}: {exc}") from exc
    if len(rows) < 2:
        raise ParseError(f"{path}: need a header row and at least one data row")
    header = [c.strip() for c in rows[0]]
    has_dates = bool(header) and header[0].lower() == "date"
    names = header[1:] if has_dates else header
    if not names:
        raise ParseError(f"{path}: no variable columns")
    dates: Optional[list[str]] = [] if has_dates else None
    values = []
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ParseError(
                f"{path}: row {i} has {len(row)} cells, expected {len(header)}"
            )
        cells = row[1:] if has_dates else row
        if has_dates:
            dates.append(row[0].strip())
        try:
            values.append([float(c) for c in cells])
        except ValueError as exc:
            raise ParseError(f"{path}: non-numeric cell in row {i}: {exc}") from exc
    return Dataset(np.array(values, dtype=np.float64), names=names), dates


def write_dataset_csv(
    path: str, data: Dataset, dates: Optional[Sequence[str]] = None
) -> None:
    if dates is not None and len(dates) != data.n_obs:
        raise ValidationError(f"{len(dates)} dates for {data.n_obs} rows")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = (["date"] if dates is not None else []) + list(data.names)
        writer.writerow(header)
        for t in range(data.n_obs):
            row = [dates[t]] if dates is not None else []
            row += [repr(float(v)) for v in data.observations[t]]
            writer.writerow(row)


def read_pattern_csv(path: str) -> SignPattern:
    """Load a sign-restriction grid whose cells are +1, -1, 0, or NA."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if r]
    except OSError as exc:
        raise ParseError(f"cannot read pattern file {path}: {exc}") from exc
    if not rows:
        raise ParseError(f"{path}: empty pattern file")
    codes = np.empty((len(rows), len(rows[0])), dtype=np.int8)
    for i, row in enumerate(rows):
        if len(row) != len(rows[0]):
            raise ParseError(
                f"{path}: row {i + 1} has {len(row)} cells, expected {len(rows[0])}"
            )
        for j, cell in enumerate(row):
            token = cell.strip().upper()
            if token not in _PATTERN_TOKENS:
                raise ParseError(
                    f"{path}: row {i + 1} col {j + 1}: {cell!r} is not one of "
                    "+1, -1, 0, NA"
                )
            codes[i, j] = _PATTERN_TOKENS[token]
    return SignPattern(codes)


def write_pattern_csv(path: str, pattern: SignPattern) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        for row in pattern.codes:
            writer.writerow([_CODE_TOKENS[int(c)] for c in row])


@dataclass
class RunConfig:
    """Fully resolved run configuration with all defaults applied."""

    p: int
    r: int
    prior: PriorConfig = field(default_factory=PriorConfig)
    mcmc: McmcConfig = field(default_factory=McmcConfig)
    tcodes: Optional[list[int]] = None
    quantiles: list[float] = field(default_factory=lambda: [0.16, 0.5, 0.84])
    horizon: int = 20
    save_factors: bool = False

    def snapshot(self) -> dict:
        """JSON-ready dictionary capturing every resolved setting."""
        return {
            "model": {"p": self.p, "r": self.r, "tcodes": self.tcodes},
            "prior": {
                "mode": self.prior.mode,
                "h_loading": self.prior.h_loading,
                "rho": self.prior.rho,
                "kappa": self.prior.kappa,
                "diffuse_scale": self.prior.diffuse_scale,
            },
            "mcmc": {
                "total": self.mcmc.total_draws,
                "burn": self.mcmc.burn_in,
                "thin": self.mcmc.thin,
                "seed": self.mcmc.seed,
                "stationarity_filter": self.mcmc.stationarity_filter,
                "parallel_equations": self.mcmc.parallel_equations,
            },
            "output": {
                "quantiles": self.quantiles,
                "horizon": self.horizon,
                "save_factors": self.save_factors,
            },
        }


def _section(raw: dict, name: str, allowed: Sequence[str]) -> dict:
    sec = raw.get(name, {})
    if not isinstance(sec, dict):
        raise ValidationError(f"config section {name!r} must be an object")
    unknown = set(sec) - set(allowed)
    if unknown:
        raise ValidationError(
            f"unknown keys in config section {name!r}: {sorted(unknown)}"
        )
    return sec


def parse_prior_section(sec: dict) -> PriorConfig:
    sec = _section({"prior": sec}, "prior", PRIOR_KEYS)
    try:
        return PriorConfig(**sec)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"invalid prior setting: {exc}") from exc


def parse_mcmc_section(sec: dict) -> McmcConfig:
    sec = _section({"mcmc": sec}, "mcmc", MCMC_KEYS)
    kwargs = {
        {"total": "total_draws", "burn": "burn_in"}.get(key, key): value
        for key, value in sec.items()
    }
    try:
        for key in ("total_draws", "burn_in", "thin", "seed"):
            if key in kwargs:
                kwargs[key] = int(kwargs[key])
        for key in ("stationarity_filter", "parallel_equations"):
            if key in kwargs:
                kwargs[key] = bool(kwargs[key])
        return McmcConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"invalid mcmc setting: {exc}") from exc


def parse_config(raw: dict) -> RunConfig:
    """Resolve a parsed JSON document against the defaults."""
    if not isinstance(raw, dict):
        raise ValidationError("config root must be an object")
    unknown = set(raw) - {"model", "prior", "mcmc", "output"}
    if unknown:
        raise ValidationError(f"unknown config sections: {sorted(unknown)}")
    model = _section(raw, "model", ["p", "r", "tcodes"])
    if "p" not in model or "r" not in model:
        raise ValidationError("config must set model.p and model.r")
    prior = parse_prior_section(raw.get("prior", {}))
    mcmc = parse_mcmc_section(raw.get("mcmc", {}))
    out_raw = _section(raw, "output", ["quantiles", "horizon", "save_factors"])
    try:
        cfg = RunConfig(
            p=int(model["p"]),
            r=int(model["r"]),
            prior=prior,
            mcmc=mcmc,
            tcodes=None if model.get("tcodes") is None else list(model["tcodes"]),
            quantiles=[float(q) for q in out_raw.get("quantiles", [0.16, 0.5, 0.84])],
            horizon=int(out_raw.get("horizon", 20)),
            save_factors=bool(out_raw.get("save_factors", False)),
        )
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"invalid config value: {exc}") from exc
    if cfg.p < 1 or cfg.r < 1:
        raise ValidationError(f"model.p and model.r must be >= 1, got {cfg.p}, {cfg.r}")
    if cfg.horizon < 0:
        raise ValidationError(f"output.horizon must be >= 0, got {cfg.horizon}")
    for q in cfg.quantiles:
        if not 0.0 < q < 1.0:
            raise ValidationError(f"output quantile {q} outside (0, 1)")
    return cfg


def load_config(path: str) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path} is not valid JSON: {exc}") from exc
    return parse_config(raw)


def write_draw_archive(
    basepath: str,
    draws: Sequence[ParameterState],
    save_factors: bool = False,
) -> tuple[str, str]:
    """Write draws to ``<basepath>.bin`` plus a ``.txt`` sidecar.

    The binary file is a flat stream of little-endian float64, one draw
    after another, blocks in the order phi, lambda, sigma2, then the
    factor path when requested. The sidecar records the dimensions
    needed to slice it back apart.
    """
    if not draws:
        raise ValidationError("no draws to archive")
    first = draws[0]
    n, k = first.phi.shape
    r = first.loadings.shape[1]
    t_eff = first.factors.shape[0]
    bin_path, txt_path = basepath + ".bin", basepath + ".txt"
    with open(bin_path, "wb") as fh:
        for d in draws:
            fh.write(np.ascontiguousarray(d.phi, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(d.loadings, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(d.sigma2, dtype="<f8").tobytes())
            if save_factors:
                fh.write(np.ascontiguousarray(d.factors, dtype="<f8").tobytes())
    blocks = [f"phi {n} {k}", f"lambda {n} {r}", f"sigma2 {n} 1"]
    if save_factors:
        blocks.append(f"factors {t_eff} {r}")
    lines = [
        "format: flat float64 little-endian, draw-major, row-major blocks",
        f"n_draws: {len(draws)}",
    ] + [f"block: {b}" for b in blocks]
    with open(txt_path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    return bin_path, txt_path


def read_draw_archive(basepath: str) -> dict[str, np.ndarray]:
    """Slice an archive back into stacked arrays keyed by block name."""
    bin_path, txt_path = basepath + ".bin", basepath + ".txt"
    try:
        with open(txt_path, encoding="utf-8") as fh:
            lines = [ln.strip() for ln in fh if ln.strip()]
        raw = np.fromfile(bin_path, dtype="<f8")
    except OSError as exc:
        raise ParseError(f"cannot read draw archive {basepath}: {exc}") from exc
    n_draws = None
    blocks: list[tuple[str, int, int]] = []
    for ln in lines:
        if ln.startswith("n_draws:"):
            n_draws = int(ln.split(":", 1)[1])
        elif ln.startswith("block:"):
            name, rows, cols = ln.split(":", 1)[1].split()
            blocks.append((name, int(rows), int(cols)))
    if n_draws is None or not blocks:
        raise ParseError(f"{txt_path}: missing n_draws or block lines")
    per_draw = sum(rows * cols for _, rows, cols in blocks)
    if raw.size != n_draws * per_draw:
        raise ParseError(
            f"{bin_path}: {raw.size} values, expected {n_draws * per_draw}"
        )
    raw = raw.reshape(n_draws, per_draw)
    out = {}
    offset = 0
    for name, rows, cols in blocks:
        size = rows * cols
        chunk = raw[:, offset : offset + size].reshape(n_draws, rows, cols)
        out[name] = chunk[:, :, 0].copy() if cols == 1 else chunk.copy()
        offset += size
    return out


def write_irf_csv(
    path: str,
    responses: np.ndarray,
    var_names: Sequence[str],
    shock_names: Optional[Sequence[str]] = None,
) -> None:
    """Write one (horizon+1, n, r) response array in long format."""
    h1, n, r = responses.shape
    if shock_names is None:
        shock_names = [f"shock{j + 1}" for j in range(r)]
    if len(var_names) != n or len(shock_names) != r:
        raise ValidationError("name lengths do not match response dimensions")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["horizon", "variable", "shock", "value"])
        for h in range(h1):
            for i in range(n):
                for j in range(r):
                    writer.writerow(
                        [h, var_names[i], shock_names[j], repr(float(responses[h, i, j]))]
                    )


def read_irf_csv(path: str) -> tuple[np.ndarray, list[str], list[str]]:
    """Invert write_irf_csv; labels come back in first-appearance order."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    if not rows or rows[0] != ["horizon", "variable", "shock", "value"]:
        raise ParseError(f"{path}: not a long-format response table")
    var_names: list[str] = []
    shock_names: list[str] = []
    entries = []
    for row in rows[1:]:
        if len(row) != 4:
            raise ParseError(f"{path}: malformed row {row!r}")
        h, var, shock, val = int(row[0]), row[1], row[2], float(row[3])
        if var not in var_names:
            var_names.append(var)
        if shock not in shock_names:
            shock_names.append(shock)
        entries.append((h, var_names.index(var), shock_names.index(shock), val))
    h_max = max(e[0] for e in entries)
    arr = np.full((h_max + 1, len(var_names), len(shock_names)), np.nan)
    for h, i, j, val in entries:
        arr[h, i, j] = val
    if np.any(np.isnan(arr)):
        raise ParseError(f"{path}: incomplete response grid")
    return arr, var_names, shock_names


def file_sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(
    path: str,
    command: str,
    config_snapshot: dict,
    seed: int,
    inputs: dict[str, str],
    outputs: Sequence[str],
    started: datetime,
) -> dict:
    """Record everything needed to reproduce a run bitwise.

    Inputs and outputs are stored with SHA-256 digests; output paths are
    recorded relative to the manifest's own directory.
    """
    out_dir = os.path.dirname(os.path.abspath(path))
    manifest = {
        "version": _VERSION,
        "command": command,
        "seed": seed,
        "config": config_snapshot,
        "inputs": {
            name: {"path": os.path.abspath(p), "sha256": file_sha256(p)}
            for name, p in inputs.items()
        },
        "outputs": [
            {
                "path": os.path.relpath(os.path.abspath(p), out_dir),
                "sha256": file_sha256(p),
            }
            for p in outputs
        ],
        "started": started.isoformat(),
        "finished": datetime.now(timezone.utc).isoformat(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest
