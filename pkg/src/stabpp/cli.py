"""Command-line driver: constants tables, sampling, simulation, probes, rate fits.

Configuration is a single JSON document validated against a strict schema
(unknown keys are rejected).  Precedence for shared settings is flags over
config over ``STABPP_*`` environment variables.  Reports embed the artifact
version, the seed, and a SHA-256 of the canonical config; wall-clock fields
live only in the ``meta`` block so the numeric ``payload`` is byte-identical
across reruns with the same seed.

Exit codes: 0 success, 1 runtime or check failure, 2 usage/config error.
"""

from __future__ import annotations

import argparse
import datetime
import hashlib
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .experiments import (DEFAULT_T_GRID, ExperimentPlan, ExperimentReport,
                          fit_rate, run_experiment)
from .functionals import (DIRECTED_NN, KNN_UNDIRECTED, FunctionalSpec,
                          TestFunctionSpec, stabilization_probe)
from .point_process import (DensitySpec, sample_binomial,
                            sample_homogeneous_line, sample_poisson)
from .regions import Box, Region
from .special import delta_alpha, exp_moment, v_alpha

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2

_ENV_PREFIX = "STABPP_"


class ConfigError(ValueError):
    """Schema violation in the experiment configuration."""


def _fmt(x) -> str:
    if x is None:
        return ""
    return format(float(x), ".17g")


# ---------------------------------------------------------------------------
# config parsing

def _require_keys(obj: dict, where: str, required: tuple[str, ...],
                  optional: tuple[str, ...] = ()):
    for key in obj:
        if key not in required and key not in optional:
            raise ConfigError(f'unknown key "{key}" in {where}')
    for key in required:
        if key not in obj:
            raise ConfigError(f'missing required key "{key}" in {where}')


def _parse_box(obj: dict, where: str, dimension: int) -> Box:
    _require_keys(obj, where, ("lower", "upper"))
    lo, hi = obj["lower"], obj["upper"]
    if len(lo) != dimension or len(hi) != dimension:
        raise ConfigError(f"{where}: box bounds must have length {dimension}")
    return Box(tuple(float(v) for v in lo), tuple(float(v) for v in hi))


def _parse_region(boxes: list, where: str, dimension: int) -> Region:
    if not isinstance(boxes, list) or not boxes:
        raise ConfigError(f"{where} must be a nonempty list of boxes")
    return Region(dimension=dimension,
                  boxes=tuple(_parse_box(b, f"{where}[{i}]", dimension)
                              for i, b in enumerate(boxes)))


def _parse_density(obj: dict, dimension: int) -> DensitySpec:
    _require_keys(obj, "density", ("boxes",),
                  ("weights", "homogeneous", "normalized"))
    region = _parse_region(obj["boxes"], "density.boxes", dimension)
    if obj.get("homogeneous", False):
        if "weights" in obj:
            raise ConfigError('density: "homogeneous" and "weights" conflict')
        return DensitySpec.homogeneous(region)
    if "weights" not in obj:
        raise ConfigError('missing required key "weights" in density')
    weights = tuple(float(w) for w in obj["weights"])
    return DensitySpec(region=region, weights=weights,
                       normalized=bool(obj.get("normalized", False)))


def _parse_functional(obj: dict) -> FunctionalSpec:
    _require_keys(obj, "functional", ("family",), ("k", "alpha"))
    family = obj["family"]
    if family not in (DIRECTED_NN, KNN_UNDIRECTED):
        raise ConfigError(
            f'functional.family must be "{DIRECTED_NN}" or "{KNN_UNDIRECTED}"')
    return FunctionalSpec(family=family, k=int(obj.get("k", 1)),
                          alpha=float(obj.get("alpha", 1.0)))


def _parse_test_function(obj: dict, region: Region, where: str) -> TestFunctionSpec:
    _require_keys(obj, where, ("kind",), ("values",))
    kind = obj["kind"]
    if kind == "indicator":
        return TestFunctionSpec(region=region)
    if kind == "piecewise":
        if "values" not in obj:
            raise ConfigError(f'missing required key "values" in {where}')
        return TestFunctionSpec(region=region, kind="piecewise",
                                values=tuple(float(v) for v in obj["values"]))
    raise ConfigError(f'{where}: kind must be "indicator" or "piecewise"')


_TOP_KEYS_REQUIRED = ("dimension", "density", "regions", "functional",
                      "lambda_grid", "replicates")
_TOP_KEYS_OPTIONAL = ("seed", "test_functions", "t_grid", "probe", "check")


def parse_plan(config: dict, seed_override: int | None = None) -> ExperimentPlan:
    """Validate a simulate config and build the experiment plan."""
    _require_keys(config, "config", _TOP_KEYS_REQUIRED, _TOP_KEYS_OPTIONAL)
    dimension = int(config["dimension"])
    if dimension < 1:
        raise ConfigError("dimension must be >= 1")
    density = _parse_density(config["density"], dimension)
    regions = tuple(_parse_region(r, f"regions[{i}]", dimension)
                    for i, r in enumerate(config["regions"]))
    functional = _parse_functional(config["functional"])
    if "test_functions" in config:
        tf_cfg = config["test_functions"]
        if len(tf_cfg) != len(regions):
            raise ConfigError("need one test function per region")
        fs = tuple(_parse_test_function(o, r, f"test_functions[{i}]")
                   for i, (o, r) in enumerate(zip(tf_cfg, regions)))
    else:
        fs = tuple(TestFunctionSpec(region=r) for r in regions)
    seed = seed_override if seed_override is not None else int(config.get("seed", 0))
    try:
        return ExperimentPlan(
            density=density,
            regions=regions,
            test_functions=fs,
            functional=functional,
            lambda_grid=tuple(float(v) for v in config["lambda_grid"]),
            replicates=int(config["replicates"]),
            seed=seed,
            t_grid=tuple(float(v) for v in config.get("t_grid", DEFAULT_T_GRID)),
        )
    except ValueError as err:
        raise ConfigError(str(err)) from err


def _load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    except json.JSONDecodeError as err:
        raise ConfigError(
            f"malformed JSON in {path}: line {err.lineno} column {err.colno}: "
            f"{err.msg}") from err


def _config_hash(config: dict) -> str:
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def _env(name: str, cast, default=None):
    raw = os.environ.get(_ENV_PREFIX + name)
    if raw is None:
        return default
    try:
        return cast(raw)
    except ValueError as err:
        raise ConfigError(f"bad {_ENV_PREFIX}{name}={raw!r}: {err}") from err


def _resolve(flag_value, config_value, env_value, default):
    for v in (flag_value, config_value, env_value):
        if v is not None:
            return v
    return default


# ---------------------------------------------------------------------------
# report emission

def _write_report(out_dir: str, payload: dict, meta: dict) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "report.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"meta": meta, "payload": payload}, fh,
                  sort_keys=True, indent=1)
        fh.write("\n")
    return path


def _write_tables(out_dir: str, payload: dict):
    m = max((len(lr["regions"]) for lr in payload["per_lambda"]), default=0)
    table = os.path.join(out_dir, "table.csv")
    with open(table, "w", encoding="utf-8") as fh:
        corr_cols = [f"corr_{j}" for j in range(m)]
        fh.write(",".join(
            ["lambda", "region", "mean", "se_mean", "scaled_mean", "var",
             "se_var", "scaled_var", "target_mean", "target_var", "ks",
             "joint_discrepancy"] + corr_cols) + "\n")
        for lr in payload["per_lambda"]:
            for rs in lr["regions"]:
                corr = [_fmt(lr["correlations"][rs["index"]][j]) for j in range(m)]
                fh.write(",".join(
                    [_fmt(lr["lambda"]), str(rs["index"]), _fmt(rs["mean"]),
                     _fmt(rs["se_mean"]), _fmt(rs["scaled_mean"]), _fmt(rs["var"]),
                     _fmt(rs["se_var"]), _fmt(rs["scaled_var"]),
                     _fmt(rs["target_mean"]), _fmt(rs["target_var"]),
                     _fmt(rs["ks"]), _fmt(lr["joint_discrepancy"])] + corr) + "\n")
    rate = os.path.join(out_dir, "rate.csv")
    with open(rate, "w", encoding="utf-8") as fh:
        fh.write("lambda,joint_discrepancy,used_in_fit\n")
        censored = set(payload.get("censored_lambdas", []))
        for lr in payload["per_lambda"]:
            used = "0" if lr["lambda"] in censored else "1"
            fh.write(f'{_fmt(lr["lambda"])},{_fmt(lr["joint_discrepancy"])},{used}\n')
        fit = payload.get("rate_fit")
        if fit is not None:
            fh.write("slope,intercept,r_squared\n")
            fh.write(f'{_fmt(fit["slope"])},{_fmt(fit["intercept"])},'
                     f'{_fmt(fit["r_squared"])}\n')
    return table, rate


def _meta(config: dict, seed: int, started: float) -> dict:
    return {
        "artifact_version": __version__,
        "config_sha256": _config_hash(config),
        "seed": int(seed),
        "wall_clock_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "elapsed_seconds": time.time() - started,
    }


# ---------------------------------------------------------------------------
# subcommands

def _cmd_constants(args) -> int:
    alphas = [float(a) for a in args.alpha]
    if any(a <= 0 for a in alphas):
        print("error: alpha values must be positive", file=sys.stderr)
        return EXIT_USAGE
    rows = []
    for a in alphas:
        d = delta_alpha(a)
        rows.append({"alpha": a, "v_alpha": v_alpha(a), "delta_alpha": d,
                     "delta_alpha_sq": d * d, "mean_coeff": exp_moment(a)})
    if args.json:
        print(json.dumps(rows, sort_keys=True))
        return EXIT_OK
    header = f'{"alpha":>8} {"V_alpha":>22} {"delta_alpha":>22} {"delta_alpha^2":>22} {"mean_coeff":>22}'
    print(header)
    for r in rows:
        print(f'{r["alpha"]:>8g} {r["v_alpha"]:>22.15g} {r["delta_alpha"]:>22.15g} '
              f'{r["delta_alpha_sq"]:>22.15g} {r["mean_coeff"]:>22.15g}')
    return EXIT_OK


def _cmd_sample(args) -> int:
    config = _load_config(args.config)
    _require_keys(config, "config", _TOP_KEYS_REQUIRED, _TOP_KEYS_OPTIONAL)
    dimension = int(config["dimension"])
    density = _parse_density(config["density"], dimension)
    seed = _resolve(args.seed, config.get("seed"), _env("SEED", int), 0)
    lam = args.lam if args.lam is not None else float(config["lambda_grid"][0])
    if args.process == "poisson":
        cfg = sample_poisson(density, lam, seed, stream=0)
    elif args.process == "binomial":
        n = args.n if args.n is not None else int(round(lam))
        cfg = sample_binomial(density.region, n, seed, stream=0)
    else:
        if dimension != 1 or len(density.region.boxes) != 1:
            print("error: homogeneous sampling needs a single 1-d window",
                  file=sys.stderr)
            return EXIT_USAGE
        cfg = sample_homogeneous_line(lam, density.region.boxes[0], seed, stream=0)
    if args.json:
        print(json.dumps({"seed": seed, "lambda": lam, "count": len(cfg),
                          "points": cfg.points.tolist()}))
        return EXIT_OK
    out_dir = _resolve(args.out, None, _env("OUT", str), ".")
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "points.csv")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(f"x{j}" for j in range(dimension)) + "\n")
        for row in cfg.points:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    print(f"wrote {len(cfg)} points to {path}")
    return EXIT_OK


def _run_check(report: ExperimentReport, multiplier: float) -> list[str]:
    failures = []
    last = report.lambda_reports[-1]
    for rs in last.regions:
        if rs.target_mean is None or rs.scaled_mean is None:
            continue
        if abs(rs.scaled_mean - rs.target_mean) > multiplier * rs.se_scaled_mean:
            failures.append(
                f"region {rs.index}: scaled mean {rs.scaled_mean:.6g} misses "
                f"target {rs.target_mean:.6g} by more than "
                f"{multiplier:g} SE ({rs.se_scaled_mean:.3g})")
        if abs(rs.scaled_var - rs.target_var) > multiplier * rs.se_scaled_var:
            failures.append(
                f"region {rs.index}: scaled variance {rs.scaled_var:.6g} misses "
                f"target {rs.target_var:.6g} by more than "
                f"{multiplier:g} SE ({rs.se_scaled_var:.3g})")
    return failures


def _cmd_simulate(args) -> int:
    started = time.time()
    config = _load_config(args.config)
    seed = _resolve(args.seed, config.get("seed"), _env("SEED", int), 0)
    workers = _resolve(args.workers, None, _env("WORKERS", int), 1)
    out_dir = _resolve(args.out, None, _env("OUT", str), ".")
    plan = parse_plan(config, seed_override=seed)
    if "check" in config:
        _require_keys(config["check"], "check", (), ("se_multiplier",))

    def progress(lam, lambda_report):
        print(f"lambda={lam:g}: joint discrepancy "
              f"{lambda_report.joint_discrepancy:.5f}", file=sys.stderr)

    report = run_experiment(plan, workers=workers, progress=progress)
    payload = report.to_dict()
    meta = _meta(config, seed, started)
    path = _write_report(out_dir, payload, meta)
    _write_tables(out_dir, payload)
    if args.json:
        print(json.dumps(payload, sort_keys=True))
    else:
        print(f"wrote {path}")
    if args.check:
        mult = float(config.get("check", {}).get("se_multiplier", 3.0))
        failures = _run_check(report, mult)
        if failures:
            for line in failures:
                print(f"check failed: {line}", file=sys.stderr)
            return EXIT_RUNTIME
        print("check passed", file=sys.stderr)
    return EXIT_OK


def _cmd_stab_probe(args) -> int:
    started = time.time()
    config = _load_config(args.config)
    _require_keys(config, "config",
                  ("dimension", "density", "functional", "probe"),
                  ("seed", "regions", "lambda_grid", "replicates",
                   "test_functions", "t_grid", "check"))
    _require_keys(config["probe"], "probe", ("count", "lambda"),
                  ("resamples",))
    probe_count = int(config["probe"]["count"])
    if probe_count < 1:
        print("error: probe.count must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    dimension = int(config["dimension"])
    density = _parse_density(config["density"], dimension)
    functional = _parse_functional(config["functional"])
    seed = _resolve(args.seed, config.get("seed"), _env("SEED", int), 0)
    out_dir = _resolve(args.out, None, _env("OUT", str), ".")
    result = stabilization_probe(
        density, float(config["probe"]["lambda"]), functional,
        probe_count=probe_count,
        resample_count=int(config["probe"].get("resamples", 5)),
        seed=seed)
    payload = {
        "decay_slope": result.decay_slope,
        "r_squared": result.r_squared,
        "fit_window": list(result.fit_window),
        "censored_count": int(result.censored.sum()),
        "tail": [{"t": float(t), "tail_prob": float(p)}
                 for t, p in zip(result.t_grid, result.tail_probs)],
    }
    meta = _meta(config, seed, started)
    path = _write_report(out_dir, payload, meta)
    with open(os.path.join(out_dir, "tail.csv"), "w", encoding="utf-8") as fh:
        fh.write("t,tail_prob,censored_count\n")
        cens = int(result.censored.sum())
        for t, p in zip(result.t_grid, result.tail_probs):
            fh.write(f"{_fmt(t)},{_fmt(p)},{cens}\n")
    if args.json:
        print(json.dumps(payload, sort_keys=True))
    else:
        print(f"wrote {path} (decay slope {result.decay_slope:.4f}, "
              f"R^2 {result.r_squared:.4f})")
    return EXIT_OK


def _cmd_rate(args) -> int:
    try:
        with open(args.report, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as err:
        print(f"error: cannot read report {args.report}: {err}", file=sys.stderr)
        return EXIT_USAGE
    payload = doc.get("payload", doc)
    per_lambda = payload.get("per_lambda")
    if not per_lambda:
        print("error: report has no per_lambda block", file=sys.stderr)
        return EXIT_USAGE
    lams = [lr["lambda"] for lr in per_lambda]
    ds = [lr["joint_discrepancy"] for lr in per_lambda]
    floor = 1.0 / np.sqrt(float(payload.get("replicates", 1)))
    keep = [i for i, d in enumerate(ds) if d >= floor]
    if len(keep) < 3:
        print(f"error: only {len(keep)} intensities above the noise floor "
              f"{floor:.4g}; cannot refit", file=sys.stderr)
        return EXIT_RUNTIME
    fit = fit_rate([lams[i] for i in keep], [ds[i] for i in keep])
    out = {"slope": fit.slope, "intercept": fit.intercept,
           "r_squared": fit.r_squared, "lambdas_used": list(fit.lambdas_used)}
    if args.json:
        print(json.dumps(out, sort_keys=True))
    else:
        print(f"slope {fit.slope:.4f}  intercept {fit.intercept:.4f}  "
              f"R^2 {fit.r_squared:.4f}  (lambdas {list(fit.lambdas_used)})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stabpp",
        description="Monte Carlo toolkit for nearest-neighbour functionals "
                    "of Poisson point processes")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("constants", help="closed-form asymptotic constants")
    p.add_argument("--alpha", nargs="+", required=True, type=float)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_constants)

    p = sub.add_parser("sample", help="draw one point configuration")
    p.add_argument("--config", required=True)
    p.add_argument("--process", choices=["poisson", "binomial", "homogeneous"],
                   default="poisson")
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("simulate", help="run the Monte Carlo experiment")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--out")
    p.add_argument("--check", action="store_true",
                   help="exit 1 if scaled moments miss their targets")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("stab-probe", help="empirical stabilization radii")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_stab_probe)

    p = sub.add_parser("rate", help="refit the convergence rate from a report")
    p.add_argument("--report", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_rate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as err:  # runtime failure contract: exit 1
        print(f"error: {err}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
