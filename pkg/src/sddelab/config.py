"""Strict JSON configuration: parsing, validation, canonical serialization.

One config file describes one run.  Unknown keys fail loudly, and none of the
physically meaningful parameters (Hurst index, exponents, mesh, taps, Monte
Carlo size) has a silent default.  Every parsed config can be serialized back
to a canonical dict that round-trips losslessly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import (
    CoeffBlock,
    CoefficientSpec,
    HolderParams,
    InitialCondition,
    ParamError,
    constant_initial,
)
from .drivers import FbmParams
from .experiments import EXPERIMENT_KINDS, ExperimentConfig, ExperimentError
from .grid import GridPath, SeedSpec
from .solver import SolverConfig

__all__ = [
    "ConfigError",
    "LoadedConfig",
    "load_config",
    "parse_config",
    "config_to_dict",
]

# CLI short names for experiment flavors.
FLAVOR_ALIASES = {
    "coeff": "coeff_convergence",
    "delay": "vanishing_delay",
    "euler": "euler_refinement",
    "ito": "ito_limit",
    "moments": "moments",
    "quasi": "quasi_contract",
}

_FRAC_OPS = ("norms", "delay_norms", "gls", "rs", "young_love")


class ConfigError(ValueError):
    """A config violates the schema or an admissibility constraint."""


def _require_keys(d: dict, required: tuple, optional: tuple, context: str) -> None:
    if not isinstance(d, dict):
        raise ConfigError(f"{context}: expected an object, got {type(d).__name__}")
    unknown = set(d) - set(required) - set(optional)
    if unknown:
        raise ConfigError(f"{context}: unknown keys {sorted(unknown)}")
    missing = set(required) - set(d)
    if missing:
        raise ConfigError(f"{context}: missing required keys {sorted(missing)}")


def _number(d: dict, key: str, context: str) -> float:
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{context}.{key}: expected a number, got {v!r}")
    return float(v)


def _integer(d: dict, key: str, context: str) -> int:
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{context}.{key}: expected an integer, got {v!r}")
    return v


def _parse_holder(d: dict) -> HolderParams:
    _require_keys(d, ("gamma", "alpha", "beta", "theta", "hurst"), (), "holder")
    try:
        return HolderParams(
            gamma=_number(d, "gamma", "holder"),
            alpha=_number(d, "alpha", "holder"),
            beta=_number(d, "beta", "holder"),
            theta=_number(d, "theta", "holder"),
            hurst=_number(d, "hurst", "holder"),
        )
    except ParamError as exc:
        raise ConfigError(f"holder: {exc}") from exc


def _parse_block(d: dict | None, channels: int, dim: int, context: str) -> CoeffBlock:
    if d is None:
        d = {}
    _require_keys(d, (), ("gain_now", "gain_delay", "const", "time_modulation"), context)
    try:
        return CoeffBlock.build(
            channels,
            dim,
            gain_now=d.get("gain_now", 0.0),
            gain_delay=d.get("gain_delay", 0.0),
            const=d.get("const", 0.0),
            time_modulation=d.get("time_modulation", "none"),
        )
    except ParamError as exc:
        raise ConfigError(f"{context}: {exc}") from exc


def _parse_coefficients(d: dict) -> CoefficientSpec:
    _require_keys(
        d,
        ("family", "dim", "n_wiener", "n_holder"),
        ("tau", "delay_span", "drift", "diffusion", "zdrive", "constants"),
        "coefficients",
    )
    family = d["family"]
    dim = _integer(d, "dim", "coefficients")
    m = _integer(d, "n_wiener", "coefficients")
    l = _integer(d, "n_holder", "coefficients")
    if family in ("linear", "pointwise_delay") and "tau" not in d:
        raise ConfigError(f"coefficients: family {family!r} requires an explicit tau")
    if family == "distributed_delay" and "delay_span" not in d:
        raise ConfigError("coefficients: distributed_delay requires an explicit delay_span")
    try:
        spec = CoefficientSpec(
            family=family,
            dim=dim,
            n_wiener=m,
            n_holder=l,
            drift=_parse_block(d.get("drift"), 1, dim, "coefficients.drift"),
            diffusion=_parse_block(d.get("diffusion"), m, dim, "coefficients.diffusion"),
            zdrive=_parse_block(d.get("zdrive"), l, dim, "coefficients.zdrive"),
            tau=float(d.get("tau", 0.0)),
            delay_span=float(d.get("delay_span", 0.0)),
        )
    except ParamError as exc:
        raise ConfigError(f"coefficients: {exc}") from exc
    constants = d.get("constants")
    if constants is not None:
        _require_keys(constants, (), ("K", "K_R", "beta"), "coefficients.constants")
        tol = 1e-9
        if "K" in constants and constants["K"] < spec.growth_constant() - tol:
            raise ConfigError(
                f"coefficients.constants.K={constants['K']} is below the closed-form "
                f"growth constant {spec.growth_constant():.6g} of this family"
            )
        if "K_R" in constants and constants["K_R"] < spec.lipschitz_constant() - tol:
            raise ConfigError(
                f"coefficients.constants.K_R={constants['K_R']} is below the "
                f"closed-form Lipschitz constant {spec.lipschitz_constant():.6g}"
            )
    return spec


def _parse_initial(d: dict, spec: CoefficientSpec) -> InitialCondition:
    _require_keys(d, ("theta",), ("constant", "delay", "t0", "dt", "values"), "initial")
    theta = _number(d, "theta", "initial")
    try:
        if "constant" in d:
            _require_keys(d, ("theta", "constant", "delay"), ("dt",), "initial")
            r = _number(d, "delay", "initial")
            value = d["constant"]
            dt = float(d.get("dt", r / 64 if r > 0 else 1.0))
            eta = constant_initial(value, r, dt)
            return InitialCondition(eta.eta, theta)
        _require_keys(d, ("theta", "t0", "dt", "values"), (), "initial")
        path = GridPath(_number(d, "t0", "initial"), _number(d, "dt", "initial"),
                        np.asarray(d["values"], dtype=float))
        return InitialCondition(path, theta)
    except (ParamError, ValueError) as exc:
        raise ConfigError(f"initial: {exc}") from exc


def _parse_seed(d: dict) -> SeedSpec:
    _require_keys(d, ("master",), ("stream",), "seed")
    try:
        return SeedSpec(_integer(d, "master", "seed"), int(d.get("stream", 0)))
    except ValueError as exc:
        raise ConfigError(f"seed: {exc}") from exc


def _parse_driver(d: dict | None) -> str:
    if d is None:
        return "cholesky"
    _require_keys(d, (), ("method",), "driver")
    method = d.get("method", "cholesky")
    if method not in ("cholesky", "davies_harte"):
        raise ConfigError(f"driver.method must be cholesky or davies_harte, got {method!r}")
    return method


@dataclass(frozen=True)
class LoadedConfig:
    """A validated run: ``kind`` plus the domain objects the run needs."""

    kind: str
    payload: object
    resolved: dict  # canonical dict form, embedded into reports


def _parse_fbm(doc: dict) -> LoadedConfig:
    _require_keys(doc, ("kind", "fbm", "seed"), (), "config")
    f = doc["fbm"]
    _require_keys(f, ("hurst", "n_steps", "horizon"), ("method",), "fbm")
    try:
        params = FbmParams(
            hurst=_number(f, "hurst", "fbm"),
            n_steps=_integer(f, "n_steps", "fbm"),
            horizon=_number(f, "horizon", "fbm"),
            method=f.get("method", "cholesky"),
        )
    except ValueError as exc:
        raise ConfigError(f"fbm: {exc}") from exc
    seed = _parse_seed(doc["seed"])
    resolved = {
        "kind": "fbm",
        "fbm": {
            "hurst": params.hurst,
            "n_steps": params.n_steps,
            "horizon": params.horizon,
            "method": params.method,
        },
        "seed": {"master": seed.master_seed, "stream": seed.stream_index},
    }
    return LoadedConfig("fbm", (params, seed), resolved)


def _parse_frac(doc: dict) -> LoadedConfig:
    _require_keys(doc, ("kind", "frac"), (), "config")
    f = doc["frac"]
    _require_keys(
        f,
        ("operation", "input_csv", "alpha"),
        ("lambda", "mu", "interval", "rule", "delay", "t"),
        "frac",
    )
    op = f["operation"]
    if op not in _FRAC_OPS:
        raise ConfigError(f"frac.operation must be one of {_FRAC_OPS}, got {op!r}")
    alpha = _number(f, "alpha", "frac")
    if not 0.0 < alpha < 1.0:
        raise ConfigError(f"frac.alpha must lie in (0, 1), got {alpha}")
    if op == "young_love" and not ("lambda" in f and "mu" in f):
        raise ConfigError("frac: young_love requires explicit lambda and mu")
    if op == "delay_norms" and not ("delay" in f and "t" in f):
        raise ConfigError("frac: delay_norms requires explicit delay and t")
    interval = f.get("interval")
    if interval is not None:
        if not (isinstance(interval, list) and len(interval) == 2):
            raise ConfigError("frac.interval must be a [a, b] pair")
        interval = (float(interval[0]), float(interval[1]))
    resolved = {
        "kind": "frac",
        "frac": {
            "operation": op,
            "input_csv": str(f["input_csv"]),
            "alpha": alpha,
            "lambda": f.get("lambda"),
            "mu": f.get("mu"),
            "interval": list(interval) if interval is not None else None,
            "rule": f.get("rule", "left"),
            "delay": f.get("delay"),
            "t": f.get("t"),
        },
    }
    return LoadedConfig("frac", resolved["frac"], resolved)


def _block_to_dict(block: CoeffBlock) -> dict:
    return {
        "gain_now": block.gain_now.tolist(),
        "gain_delay": block.gain_delay.tolist(),
        "const": block.const.tolist(),
        "time_modulation": block.time_modulation,
    }


def _spec_to_dict(spec: CoefficientSpec) -> dict:
    return {
        "family": spec.family,
        "dim": spec.dim,
        "n_wiener": spec.n_wiener,
        "n_holder": spec.n_holder,
        "tau": spec.tau,
        "delay_span": spec.delay_span,
        "drift": _block_to_dict(spec.drift),
        "diffusion": _block_to_dict(spec.diffusion),
        "zdrive": _block_to_dict(spec.zdrive),
        "constants": {
            "K": spec.growth_constant(),
            "K_R": spec.lipschitz_constant(),
            "beta": 1.0,
        },
    }


def _initial_to_dict(initial: InitialCondition) -> dict:
    return {
        "t0": initial.eta.t0,
        "dt": initial.eta.dt,
        "values": initial.eta.values.tolist(),
        "theta": initial.holder_theta,
    }


def _holder_to_dict(p: HolderParams) -> dict:
    return {"gamma": p.gamma, "alpha": p.alpha, "beta": p.beta,
            "theta": p.theta, "hurst": p.hurst}


def _parse_solve(doc: dict) -> LoadedConfig:
    _require_keys(
        doc, ("kind", "solve", "holder", "coefficients", "initial", "seed"),
        ("driver",), "config",
    )
    s = doc["solve"]
    _require_keys(
        s, ("scheme", "horizon", "n_steps"),
        ("delay", "explosion_threshold", "mollifier_level"), "solve",
    )
    holder = _parse_holder(doc["holder"])
    spec = _parse_coefficients(doc["coefficients"])
    initial = _parse_initial(doc["initial"], spec)
    seed = _parse_seed(doc["seed"])
    method = _parse_driver(doc.get("driver"))
    try:
        scfg = SolverConfig(
            n_steps=_integer(s, "n_steps", "solve"),
            horizon=_number(s, "horizon", "solve"),
            delay=float(s.get("delay", initial.r)),
            scheme=s["scheme"],
            explosion_threshold=float(s.get("explosion_threshold", 1e8)),
        )
    except ValueError as exc:
        raise ConfigError(f"solve: {exc}") from exc
    if abs(scfg.delay - initial.r) > 1e-9 * max(1.0, scfg.delay):
        raise ConfigError(
            f"solve.delay={scfg.delay} does not match the initial-condition "
            f"window [-{initial.r}, 0]"
        )
    level = s.get("mollifier_level")
    if scfg.scheme == "euler_ito" and level is None:
        raise ConfigError("solve: scheme euler_ito requires mollifier_level")
    resolved = {
        "kind": "solve",
        "solve": {
            "scheme": scfg.scheme,
            "horizon": scfg.horizon,
            "n_steps": scfg.n_steps,
            "delay": scfg.delay,
            "explosion_threshold": scfg.explosion_threshold,
            "mollifier_level": level,
        },
        "holder": _holder_to_dict(holder),
        "coefficients": _spec_to_dict(spec),
        "initial": _initial_to_dict(initial),
        "driver": {"method": method},
        "seed": {"master": seed.master_seed, "stream": seed.stream_index},
    }
    payload = (scfg, holder, spec, initial, seed, method, level)
    return LoadedConfig("solve", payload, resolved)


def _parse_experiment(doc: dict) -> LoadedConfig:
    _require_keys(
        doc, ("kind", "experiment", "holder", "coefficients", "initial", "seed"),
        ("driver", "criteria"), "config",
    )
    e = doc["experiment"]
    # worker count is run machinery, not experiment identity: flag-only, so
    # that reports are byte-identical across worker counts
    _require_keys(
        e,
        ("flavor", "levels", "replicas", "epsilon", "horizon", "n_steps"),
        ("perturbation", "reference", "m_trunc", "r_trunc", "moment_p",
         "emit_distances"),
        "experiment",
    )
    flavor = e["flavor"]
    if flavor not in EXPERIMENT_KINDS:
        raise ConfigError(
            f"experiment.flavor must be one of {EXPERIMENT_KINDS}, got {flavor!r}"
        )
    criteria = doc.get("criteria") or {}
    _require_keys(
        criteria, (),
        ("max_final_exceedance", "min_decreasing_steps", "ratio_bound", "heavy_tail_fails"),
        "criteria",
    )
    holder = _parse_holder(doc["holder"])
    spec = _parse_coefficients(doc["coefficients"])
    initial = _parse_initial(doc["initial"], spec)
    seed = _parse_seed(doc["seed"])
    method = _parse_driver(doc.get("driver"))
    levels = e["levels"]
    if not isinstance(levels, list) or not levels:
        raise ConfigError("experiment.levels must be a non-empty list")
    try:
        cfg = ExperimentConfig(
            kind=flavor,
            spec=spec,
            params=holder,
            initial=initial,
            horizon=_number(e, "horizon", "experiment"),
            n_steps=_integer(e, "n_steps", "experiment"),
            levels=tuple(levels),
            replicas=_integer(e, "replicas", "experiment"),
            epsilon=_number(e, "epsilon", "experiment"),
            seed=seed.master_seed,
            driver_method=method,
            perturbation=e.get("perturbation", "none"),
            reference=e.get("reference", "closed_form"),
            m_trunc=float(e.get("m_trunc", 10.0)),
            r_trunc=float(e.get("r_trunc", 1e3)),
            moment_p=e.get("moment_p"),
            max_final_exceedance=float(criteria.get("max_final_exceedance", 0.05)),
            min_decreasing_steps=criteria.get("min_decreasing_steps"),
            ratio_bound=float(criteria.get("ratio_bound", 10.0)),
            heavy_tail_fails=bool(criteria.get("heavy_tail_fails", False)),
            emit_distances=bool(e.get("emit_distances", False)),
        )
    except (ExperimentError, ValueError) as exc:
        raise ConfigError(f"experiment: {exc}") from exc
    resolved = {
        "kind": "experiment",
        "experiment": {
            "flavor": cfg.kind,
            "levels": [float(x) for x in cfg.levels],
            "replicas": cfg.replicas,
            "epsilon": cfg.epsilon,
            "horizon": cfg.horizon,
            "n_steps": cfg.n_steps,
            "perturbation": cfg.perturbation,
            "reference": cfg.reference,
            "m_trunc": cfg.m_trunc,
            "r_trunc": cfg.r_trunc,
            "moment_p": cfg.moment_p,
            "emit_distances": cfg.emit_distances,
        },
        "criteria": {
            "max_final_exceedance": cfg.max_final_exceedance,
            "min_decreasing_steps": cfg.min_decreasing_steps,
            "ratio_bound": cfg.ratio_bound,
            "heavy_tail_fails": cfg.heavy_tail_fails,
        },
        "holder": _holder_to_dict(holder),
        "coefficients": _spec_to_dict(spec),
        "initial": _initial_to_dict(initial),
        "driver": {"method": method},
        "seed": {"master": seed.master_seed, "stream": seed.stream_index},
    }
    return LoadedConfig("experiment", cfg, resolved)


_PARSERS = {
    "fbm": _parse_fbm,
    "frac": _parse_frac,
    "solve": _parse_solve,
    "experiment": _parse_experiment,
}


def parse_config(doc: dict) -> LoadedConfig:
    """Validate a decoded config document and build the domain objects."""
    if not isinstance(doc, dict) or "kind" not in doc:
        raise ConfigError("config must be an object with a 'kind' key")
    kind = doc["kind"]
    if kind not in _PARSERS:
        raise ConfigError(f"kind must be one of {sorted(_PARSERS)}, got {kind!r}")
    return _PARSERS[kind](doc)


def load_config(path: str | Path) -> LoadedConfig:
    """Read and validate a JSON config file."""
    text = Path(path).read_text()
    doc = json.loads(text)
    return parse_config(doc)


def config_to_dict(loaded: LoadedConfig) -> dict:
    """Canonical dict form of a parsed config (round-trips losslessly)."""
    return loaded.resolved
