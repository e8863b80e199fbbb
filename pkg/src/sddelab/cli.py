"""Command-line entry point.

One config file describes one run; flags only override the master seed, the
output directory and the worker count.  Subcommands: ``fbm`` (sample a driver
path), ``frac`` (fractional-calculus operations on a CSV path), ``solve``
(one SDDE solve), ``experiment`` (Monte Carlo studies).

Exit codes: 0 success and all configured pass criteria hold; 1 criteria
failed; 2 config parse error; 3 constraint violation; 4 solver explosion;
5 I/O error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__, fraccalc
from .config import (
    FLAVOR_ALIASES,
    ConfigError,
    LoadedConfig,
    load_config,
)
from .core import ParamError
from .drivers import FbmParams, sample_fbm, sample_wiener
from .experiments import ExperimentConfig, run_experiment
from .grid import GridError, GridPath, SeedSpec
from .solver import (
    MollifiedDrift,
    SolverExplosionError,
    coefficient_evaluator,
    euler_ito_sdde,
    euler_mixed_sdde,
)

__all__ = ["main", "RunConfig"]

EXIT_OK = 0
EXIT_CRITERIA_FAILED = 1
EXIT_PARSE = 2
EXIT_CONSTRAINT = 3
EXIT_EXPLOSION = 4
EXIT_IO = 5

OUTPUT_DIR_ENV = "SDDELAB_OUT"


@dataclass(frozen=True)
class RunConfig:
    """Resolved invocation: subcommand, config path and the flag overrides."""

    subcommand: str
    config_path: Path
    output_dir: Path
    seed_override: int | None
    workers: int | None
    verbose: bool


def _dump_json(path: Path, obj: dict) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def _write_csv(path: Path, grid: GridPath, header: str) -> None:
    lines = [header]
    times = grid.times
    for k in range(grid.n_points):
        row = ",".join(repr(float(v)) for v in grid.values[k])
        lines.append(f"{float(times[k])!r},{row}")
    path.write_text("\n".join(lines) + "\n")


def _read_csv(path: Path) -> GridPath:
    lines = [ln for ln in Path(path).read_text().strip().splitlines() if ln]
    if len(lines) < 3:
        raise ConfigError(f"{path}: need a header and at least two rows")
    rows = [[float(x) for x in ln.split(",")] for ln in lines[1:]]
    arr = np.asarray(rows)
    times, values = arr[:, 0], arr[:, 1:]
    steps = np.diff(times)
    if steps.min() <= 0 or steps.max() - steps.min() > 1e-9 * max(1.0, steps.max()):
        raise ConfigError(f"{path}: time column is not a uniform grid")
    return GridPath(float(times[0]), float(steps.mean()), values)


def _resolve_out(flag: str | None) -> Path:
    if flag:
        return Path(flag)
    env = os.environ.get(OUTPUT_DIR_ENV)
    return Path(env) if env else Path.cwd()


def _cmd_fbm(loaded: LoadedConfig, run: RunConfig) -> int:
    params, seed = loaded.payload
    if run.seed_override is not None:
        seed = SeedSpec(run.seed_override, seed.stream_index)
        loaded.resolved["seed"]["master"] = run.seed_override
    path = sample_fbm(params, seed)
    out = run.output_dir
    _write_csv(out / "fbm_path.csv", path, "time,value")
    _dump_json(
        out / "fbm_path.json",
        {"code_version": __version__, "config": loaded.resolved},
    )
    if run.verbose:
        print(f"wrote {out / 'fbm_path.csv'} ({path.n_points} nodes)")
    return EXIT_OK


def _cmd_frac(loaded: LoadedConfig, run: RunConfig) -> int:
    f = loaded.payload
    csv_path = Path(f["input_csv"])
    if not csv_path.is_absolute():
        csv_path = run.config_path.parent / csv_path
    grid = _read_csv(csv_path)
    op = f["operation"]
    alpha = f["alpha"]
    interval = tuple(f["interval"]) if f["interval"] is not None else None
    if op in ("gls", "rs", "young_love") and grid.dim != 2:
        raise ConfigError(f"operation {op!r} needs a two-column CSV (f and g)")
    if op == "norms":
        bundle = fraccalc.fractional_norms(grid, alpha, interval, f.get("lambda"))
        result = {
            "norm_1_alpha": bundle.norm_1_alpha,
            "seminorm_0_alpha": bundle.seminorm_0_alpha,
            "sup_norm": bundle.sup_norm,
            "holder": bundle.holder,
        }
    elif op == "delay_norms":
        bundle = fraccalc.delay_norms(grid, alpha, f["delay"], f["t"])
        result = {
            "norm_inf_t": bundle.norm_inf_t,
            "norm_1_t": bundle.norm_1_t,
            "norm_t": bundle.norm_t,
        }
    else:
        fp = GridPath(grid.t0, grid.dt, grid.values[:, 0])
        gp = GridPath(grid.t0, grid.dt, grid.values[:, 1])
        if interval is not None:
            fp, gp = fp.window(*interval), gp.window(*interval)
        if op == "gls":
            result = {"value": fraccalc.gls_integral(fp, gp, alpha)}
        elif op == "rs":
            result = {"value": fraccalc.riemann_stieltjes_integral(fp, gp, f.get("rule", "left"))}
        else:
            result = {
                "bound": fraccalc.young_love_bound(fp, gp, f["lambda"], f["mu"])
            }
    payload = {"code_version": __version__, "config": loaded.resolved, "result": result}
    _dump_json(run.output_dir / "frac_result.json", payload)
    print(json.dumps(result, sort_keys=True))
    return EXIT_OK


def _cmd_solve(loaded: LoadedConfig, run: RunConfig) -> int:
    scfg, holder, spec, initial, seed, method, level = loaded.payload
    if run.seed_override is not None:
        seed = SeedSpec(run.seed_override, seed.stream_index)
        loaded.resolved["seed"]["master"] = run.seed_override
    started = time.perf_counter()
    w = sample_wiener(scfg.n_steps, scfg.horizon, spec.n_wiener, seed.child(0))
    fbm = FbmParams(holder.hurst, scfg.n_steps, scfg.horizon, method)
    z = sample_fbm(fbm, seed.child(1))
    if scfg.scheme == "euler_mixed":
        path = euler_mixed_sdde(spec, initial, w, z, scfg)
    else:
        drift = MollifiedDrift(spec, z, int(level))
        path = euler_ito_sdde(
            drift, coefficient_evaluator(spec, "b"), initial, w, scfg,
            guarded=(drift.guard,),
        )
    runtime = time.perf_counter() - started
    out = run.output_dir
    header = "time," + ",".join(f"v{i + 1}" for i in range(path.dim))
    _write_csv(out / "solution.csv", path, header)
    _dump_json(
        out / "solution_meta.json",
        {
            "code_version": __version__,
            "config": loaded.resolved,
            "dims": {"d": spec.dim, "m": spec.n_wiener, "l": spec.n_holder},
            "scheme": scfg.scheme,
            "seed": {"master": seed.master_seed, "stream": seed.stream_index},
            "runtime_seconds": runtime,
        },
    )
    if run.verbose:
        print(f"wrote {out / 'solution.csv'} in {runtime:.2f}s")
    return EXIT_OK


def _cmd_experiment(loaded: LoadedConfig, run: RunConfig, requested: str | None) -> int:
    cfg: ExperimentConfig = loaded.payload
    if requested is not None and FLAVOR_ALIASES[requested] != cfg.kind:
        raise ConfigError(
            f"experiment subcommand {requested!r} does not match config flavor "
            f"{cfg.kind!r}"
        )
    overrides = {}
    if run.seed_override is not None:
        overrides["seed"] = run.seed_override
        loaded.resolved["seed"]["master"] = run.seed_override
    if run.workers is not None:
        overrides["workers"] = run.workers
    if overrides:
        from dataclasses import replace

        cfg = replace(cfg, **overrides)
    report = run_experiment(cfg)
    out = run.output_dir
    report_dict = {
        "code_version": __version__,
        "config": loaded.resolved,
        "report": report.to_dict(),
    }
    _dump_json(out / "report.json", report_dict)
    _dump_json(
        out / "run_meta.json",
        {
            "runtime_seconds": report.runtime_seconds,
            "workers": cfg.workers,
        },
    )
    if cfg.emit_distances and hasattr(report, "levels"):
        lines = ["level,replica,distance"]
        for lv in report.levels:
            for i, d in enumerate(lv.distances):
                lines.append(f"{lv.level!r},{i},{d!r}")
        (out / "distances.csv").write_text("\n".join(lines) + "\n")
    if run.verbose or not report.passed:
        status = "PASS" if report.passed else "FAIL"
        print(f"{cfg.kind}: {status}")
        for reason in report.reasons:
            print(f"  - {reason}")
    return EXIT_OK if report.passed else EXIT_CRITERIA_FAILED


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sddelab",
        description="Mixed stochastic delay differential equation laboratory",
    )
    parser.add_argument("--version", action="version", version=f"sddelab {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--out", default=None, help=f"output directory (default ${OUTPUT_DIR_ENV} or cwd)")
        p.add_argument("--seed", type=int, default=None, help="override the master seed")
        p.add_argument("--workers", type=int, default=None, help="override the worker count")
        p.add_argument("-v", "--verbose", action="store_true")

    for name in ("fbm", "frac", "solve"):
        add_common(sub.add_parser(name))
    exp = sub.add_parser("experiment")
    exp.add_argument("flavor", nargs="?", choices=sorted(FLAVOR_ALIASES), default=None)
    add_common(exp)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    run = RunConfig(
        subcommand=args.subcommand,
        config_path=Path(args.config),
        output_dir=_resolve_out(args.out),
        seed_override=args.seed,
        workers=args.workers,
        verbose=args.verbose,
    )
    try:
        loaded = load_config(run.config_path)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"config parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (ConfigError, ParamError) as exc:
        print(f"config constraint violation: {exc}", file=sys.stderr)
        return EXIT_CONSTRAINT

    try:
        run.output_dir.mkdir(parents=True, exist_ok=True)
        if run.subcommand == "fbm":
            if loaded.kind != "fbm":
                raise ConfigError(f"subcommand fbm got a {loaded.kind!r} config")
            return _cmd_fbm(loaded, run)
        if run.subcommand == "frac":
            if loaded.kind != "frac":
                raise ConfigError(f"subcommand frac got a {loaded.kind!r} config")
            return _cmd_frac(loaded, run)
        if run.subcommand == "solve":
            if loaded.kind != "solve":
                raise ConfigError(f"subcommand solve got a {loaded.kind!r} config")
            return _cmd_solve(loaded, run)
        if loaded.kind != "experiment":
            raise ConfigError(f"subcommand experiment got a {loaded.kind!r} config")
        return _cmd_experiment(loaded, run, args.flavor)
    except (ConfigError, ParamError, GridError) as exc:
        print(f"constraint violation: {exc}", file=sys.stderr)
        return EXIT_CONSTRAINT
    except SolverExplosionError as exc:
        print(f"solver explosion: {exc}", file=sys.stderr)
        return EXIT_EXPLOSION
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
