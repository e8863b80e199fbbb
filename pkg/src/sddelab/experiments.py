"""Monte Carlo harness: convergence statements as falsifiable checks.

Each experiment couples all comparison levels to the same driver realizations
(common random numbers): drivers are sampled once per replica on the finest
grid involved and restricted to coarser dyadic grids.  Convergence in
probability is rendered as a family of exceedance estimates
``P(sup |X_level - X_ref| > epsilon)`` with Wilson intervals, plus
pre-registered pass criteria (decreasing trend, final-level threshold).

Replicas are independent; reports are reduced in replica order, so the same
configuration produces identical reports for any worker count.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import fraccalc
from .core import (
    CoeffBlock,
    CoefficientSpec,
    HolderParams,
    InitialCondition,
)
from .drivers import FbmParams, sample_fbm, sample_wiener
from .grid import GridPath, SeedSpec, stack_paths
from .solver import (
    MollifiedDrift,
    SolverConfig,
    coefficient_evaluator,
    euler_ito_sdde,
    euler_mixed_sdde,
    geometric_closed_form,
)

__all__ = [
    "ExperimentConfig",
    "ExceedanceEstimate",
    "LevelResult",
    "ConvergenceReport",
    "MomentReport",
    "QuasiReport",
    "estimate_exceedance",
    "run_experiment",
    "run_coefficient_convergence",
    "run_vanishing_delay",
    "run_euler_refinement",
    "run_ito_limit",
    "estimate_moments",
    "estimate_quasi_contractivity",
    "lognormal_terminal_second_moment",
    "quasi_contraction_order",
    "EXPERIMENT_KINDS",
]

EXPERIMENT_KINDS = (
    "coeff_convergence",
    "vanishing_delay",
    "euler_refinement",
    "ito_limit",
    "moments",
    "quasi_contract",
)
PERTURBATIONS = ("none", "drift_shift", "gain_shift", "initial_shift")
_WILSON_Z = 1.959963984540054  # two-sided 95%


class ExperimentError(ValueError):
    """Configuration or runtime inconsistency inside the harness."""


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    """One Monte Carlo study: equation, level schedule, budget, criteria.

    ``levels`` is interpreted per kind: perturbation indices n for
    coefficient convergence, delay taps for vanishing delay, mesh sizes for
    Euler refinement, mollifier levels for the Ito limit, moment orders p for
    the moment study and driver perturbation sizes for quasi-contractivity.
    """

    kind: str
    spec: CoefficientSpec
    params: HolderParams
    initial: InitialCondition
    horizon: float
    n_steps: int
    levels: tuple
    replicas: int
    epsilon: float
    seed: int
    workers: int = 1
    driver_method: str = "cholesky"
    perturbation: str = "none"
    reference: str = "closed_form"
    m_trunc: float = 10.0
    r_trunc: float = 1e3
    moment_p: float | None = None
    max_final_exceedance: float = 0.05
    min_decreasing_steps: int | None = None
    ratio_bound: float = 10.0
    heavy_tail_fails: bool = False
    emit_distances: bool = False

    def __post_init__(self) -> None:
        if self.kind not in EXPERIMENT_KINDS:
            raise ExperimentError(f"unknown experiment kind {self.kind!r}")
        if self.replicas < 30:
            raise ExperimentError(
                f"replicas must be at least 30 for interval estimates, got {self.replicas}"
            )
        if not self.epsilon > 0:
            raise ExperimentError("epsilon must be positive")
        if len(self.levels) < 1:
            raise ExperimentError("need at least one level")
        diffs = np.diff(np.asarray(self.levels, dtype=float))
        if not (np.all(diffs > 0) or np.all(diffs < 0)):
            raise ExperimentError("level schedule must be strictly monotone")
        if self.perturbation not in PERTURBATIONS:
            raise ExperimentError(f"unknown perturbation {self.perturbation!r}")
        if self.workers < 1:
            raise ExperimentError("workers must be positive")

    @property
    def solver_config(self) -> SolverConfig:
        return SolverConfig(
            n_steps=self.n_steps, horizon=self.horizon, delay=self.initial.r
        )


@dataclass(frozen=True)
class ExceedanceEstimate:
    """Wilson 95% interval around an exceedance fraction."""

    estimate: float
    ci_low: float
    ci_high: float
    n_samples: int


def estimate_exceedance(distances, epsilon: float) -> ExceedanceEstimate:
    """Fraction of per-path sup distances above epsilon, with Wilson 95% CI."""
    d = np.asarray(distances, dtype=float)
    n = d.size
    if n < 30:
        raise ExperimentError(f"need at least 30 samples, got {n}")
    hits = int(np.sum(d > epsilon))
    p_hat = hits / n
    z2 = _WILSON_Z**2
    denom = 1.0 + z2 / n
    center = (p_hat + z2 / (2 * n)) / denom
    half = (
        _WILSON_Z * np.sqrt(p_hat * (1 - p_hat) / n + z2 / (4 * n * n)) / denom
    )
    return ExceedanceEstimate(
        float(p_hat), float(max(0.0, center - half)), float(min(1.0, center + half)), n
    )


@dataclass(frozen=True)
class LevelResult:
    level: float
    exceedance: ExceedanceEstimate
    mean_distance: float
    median_distance: float
    distances: tuple = ()

    def to_dict(self, include_distances: bool = False) -> dict:
        d = {
            "level": self.level,
            "exceedance": self.exceedance.estimate,
            "ci_low": self.exceedance.ci_low,
            "ci_high": self.exceedance.ci_high,
            "n_samples": self.exceedance.n_samples,
            "mean_distance": self.mean_distance,
            "median_distance": self.median_distance,
        }
        if include_distances:
            d["distances"] = list(self.distances)
        return d


@dataclass(frozen=True)
class ConvergenceReport:
    kind: str
    epsilon: float
    replicas: int
    master_seed: int
    levels: tuple[LevelResult, ...]
    passed: bool
    reasons: tuple[str, ...]
    reference: str = ""
    runtime_seconds: float = 0.0

    def to_dict(self, include_distances: bool = False) -> dict:
        return {
            "kind": self.kind,
            "epsilon": self.epsilon,
            "replicas": self.replicas,
            "master_seed": self.master_seed,
            "reference": self.reference,
            "levels": [lv.to_dict(include_distances) for lv in self.levels],
            "passed": self.passed,
            "reasons": list(self.reasons),
        }


@dataclass(frozen=True)
class MomentReport:
    p_values: tuple[float, ...]
    sup_moments: tuple[float, ...]
    truncated_moments: tuple[float, ...]
    m_trunc: float
    trunc_fraction: float
    stability_p: float
    stability_rel_change: float
    survival_thresholds: tuple[float, ...]
    survival_probs: tuple[float, ...]
    heavy_tail_share: float
    heavy_tail_alarm: bool
    oracle_second_moment: float | None
    oracle_gap_se: float | None
    replicas: int
    master_seed: int
    passed: bool
    reasons: tuple[str, ...]
    runtime_seconds: float = 0.0

    def to_dict(self) -> dict:
        return {
            "kind": "moments",
            "p_values": list(self.p_values),
            "sup_moments": list(self.sup_moments),
            "truncated_moments": list(self.truncated_moments),
            "m_trunc": self.m_trunc,
            "trunc_fraction": self.trunc_fraction,
            "stability_p": self.stability_p,
            "stability_rel_change": self.stability_rel_change,
            "survival_thresholds": list(self.survival_thresholds),
            "survival_probs": list(self.survival_probs),
            "heavy_tail_share": self.heavy_tail_share,
            "heavy_tail_alarm": self.heavy_tail_alarm,
            "oracle_second_moment": self.oracle_second_moment,
            "oracle_gap_se": self.oracle_gap_se,
            "replicas": self.replicas,
            "master_seed": self.master_seed,
            "passed": self.passed,
            "reasons": list(self.reasons),
        }


@dataclass(frozen=True)
class QuasiReport:
    epsilons: tuple[float, ...]
    ratios: tuple[float | None, ...]
    numerators: tuple[float, ...]
    denominators: tuple[float, ...]
    indicator_counts: tuple[int, ...]
    p: float
    m_trunc: float
    r_trunc: float
    replicas: int
    master_seed: int
    passed: bool
    reasons: tuple[str, ...]
    runtime_seconds: float = 0.0

    def to_dict(self) -> dict:
        return {
            "kind": "quasi_contract",
            "epsilons": list(self.epsilons),
            "ratios": list(self.ratios),
            "numerators": list(self.numerators),
            "denominators": list(self.denominators),
            "indicator_counts": list(self.indicator_counts),
            "p": self.p,
            "m_trunc": self.m_trunc,
            "r_trunc": self.r_trunc,
            "replicas": self.replicas,
            "master_seed": self.master_seed,
            "passed": self.passed,
            "reasons": list(self.reasons),
        }


# --------------------------------------------------------------------------
# driver sampling and spec perturbations


def _sample_drivers(cfg: ExperimentConfig, replica: int, n_steps: int):
    seed = SeedSpec(cfg.seed, replica)
    w = sample_wiener(n_steps, cfg.horizon, cfg.spec.n_wiener, seed.child(0))
    fbm = FbmParams(cfg.params.hurst, n_steps, cfg.horizon, cfg.driver_method)
    if cfg.spec.n_holder == 1:
        z = sample_fbm(fbm, seed.child(1))
    else:
        z = stack_paths(
            [sample_fbm(fbm, seed.child(1).child(j)) for j in range(cfg.spec.n_holder)]
        )
    return w, z


def _perturbed_spec(spec: CoefficientSpec, perturbation: str, n: float) -> CoefficientSpec:
    if perturbation in ("none", "initial_shift"):
        return spec
    shift = 1.0 / n
    drift = spec.drift
    if perturbation == "drift_shift":
        new_drift = CoeffBlock(
            drift.gain_now, drift.gain_delay, drift.const + shift, drift.time_modulation
        )
    else:  # gain_shift
        bump = shift * np.eye(spec.dim)[None, :, :]
        new_drift = CoeffBlock(
            drift.gain_now + bump, drift.gain_delay, drift.const, drift.time_modulation
        )
    return CoefficientSpec(
        spec.family, spec.dim, spec.n_wiener, spec.n_holder,
        new_drift, spec.diffusion, spec.zdrive, spec.tau, spec.delay_span,
    )


def _sup_distance(x: GridPath, y: GridPath) -> float:
    diff = x.values - y.values
    if diff.shape[1] == 1:
        return float(np.abs(diff[:, 0]).max())
    return float(np.linalg.norm(diff, axis=1).max())


# --------------------------------------------------------------------------
# per-replica work, one function per experiment kind (module level so the
# process pool can pickle them)


def _replica_coeff(cfg: ExperimentConfig, replica: int) -> np.ndarray:
    w, z = _sample_drivers(cfg, replica, cfg.n_steps)
    scfg = cfg.solver_config
    base = euler_mixed_sdde(cfg.spec, cfg.initial, w, z, scfg)
    out = np.empty(len(cfg.levels))
    for i, n in enumerate(cfg.levels):
        spec_n = _perturbed_spec(cfg.spec, cfg.perturbation, n)
        eta_n = (
            cfg.initial.shifted(1.0 / n)
            if cfg.perturbation == "initial_shift"
            else cfg.initial
        )
        level_path = euler_mixed_sdde(spec_n, eta_n, w, z, scfg)
        out[i] = _sup_distance(level_path, base)
    return out


def _replica_delay(cfg: ExperimentConfig, replica: int) -> np.ndarray:
    w, z = _sample_drivers(cfg, replica, cfg.n_steps)
    scfg = cfg.solver_config
    base = euler_mixed_sdde(cfg.spec.merge_delay(), cfg.initial, w, z, scfg)
    out = np.empty(len(cfg.levels))
    for i, tau in enumerate(cfg.levels):
        level_path = euler_mixed_sdde(cfg.spec.with_tau(tau), cfg.initial, w, z, scfg)
        out[i] = _sup_distance(level_path, base)
    return out


def _geometric_triple(cfg: ExperimentConfig):
    spec = cfg.spec
    ok = (
        spec.family == "no_delay"
        and spec.dim == spec.n_wiener == spec.n_holder == 1
        and not np.any(spec.drift.const)
        and not np.any(spec.diffusion.const)
        and not np.any(spec.zdrive.const)
        and all(
            b.time_modulation == "none"
            for b in (spec.drift, spec.diffusion, spec.zdrive)
        )
    )
    if not ok:
        return None
    return (
        float(spec.drift.gain_now[0, 0, 0]),
        float(spec.diffusion.gain_now[0, 0, 0]),
        float(spec.zdrive.gain_now[0, 0, 0]),
    )


def _replica_euler(cfg: ExperimentConfig, replica: int) -> np.ndarray:
    finest = int(max(cfg.levels))
    use_closed = cfg.reference == "closed_form"
    n_driver = finest if use_closed else 4 * finest
    w, z = _sample_drivers(cfg, replica, n_driver)
    x0 = float(cfg.initial.eta.values[-1, 0])
    if use_closed:
        triple = _geometric_triple(cfg)
        if triple is None:
            raise ExperimentError(
                "closed-form reference requires a scalar pure-gain no_delay spec"
            )
        reference = geometric_closed_form(*triple, x0, w, z)
    else:
        fine_cfg = SolverConfig(n_steps=n_driver, horizon=cfg.horizon)
        reference = euler_mixed_sdde(cfg.spec, cfg.initial, w, z, fine_cfg)
    out = np.empty(len(cfg.levels))
    for i, n in enumerate(cfg.levels):
        n = int(n)
        step = n_driver // n
        scfg = SolverConfig(n_steps=n, horizon=cfg.horizon)
        level_path = euler_mixed_sdde(
            cfg.spec, cfg.initial, w.restrict(step), z.restrict(step), scfg
        )
        out[i] = _sup_distance(level_path, reference.restrict(step))
    return out


def _replica_ito(cfg: ExperimentConfig, replica: int) -> np.ndarray:
    w, z = _sample_drivers(cfg, replica, cfg.n_steps)
    scfg = cfg.solver_config
    mixed = euler_mixed_sdde(cfg.spec, cfg.initial, w, z, scfg)
    diffusion = coefficient_evaluator(cfg.spec, "b")
    out = np.empty(len(cfg.levels))
    for i, level in enumerate(cfg.levels):
        drift = MollifiedDrift(cfg.spec, z, int(level))
        ito = euler_ito_sdde(drift, diffusion, cfg.initial, w, scfg, guarded=(drift.guard,))
        out[i] = _sup_distance(ito, mixed)
    return out


def _replica_moments(cfg: ExperimentConfig, replica: int) -> np.ndarray:
    w, z = _sample_drivers(cfg, replica, cfg.n_steps)
    scfg = cfg.solver_config
    x = euler_mixed_sdde(cfg.spec, cfg.initial, w, z, scfg)
    sup_mag = float(fraccalc._mags(x.values).max())
    dn = fraccalc.delay_norms(x, cfg.params.alpha, cfg.initial.r, cfg.horizon)
    z_semi = fraccalc._seminorm_0_alpha(z.values, z.dt, cfg.params.alpha)
    return np.array([sup_mag, dn.norm_t, z_semi])


def _replica_quasi(cfg: ExperimentConfig, replica: int) -> np.ndarray:
    w, z1 = _sample_drivers(cfg, replica, cfg.n_steps)
    scfg = cfg.solver_config
    alpha = cfg.params.alpha
    y1 = euler_mixed_sdde(cfg.spec, cfg.initial, w, z1, scfg)
    z1_semi = fraccalc._seminorm_0_alpha(z1.values, z1.dt, alpha)
    y1_norm = fraccalc.delay_norms(y1, alpha, cfg.initial.r, cfg.horizon).norm_t
    ramp = z1.times[:, None]
    out = np.empty((len(cfg.levels), 3))
    for i, eps in enumerate(cfg.levels):
        z2 = GridPath(z1.t0, z1.dt, z1.values + eps * ramp)
        y2 = euler_mixed_sdde(cfg.spec, cfg.initial, w, z2, scfg)
        z2_semi = fraccalc._seminorm_0_alpha(z2.values, z2.dt, alpha)
        y2_norm = fraccalc.delay_norms(y2, alpha, cfg.initial.r, cfg.horizon).norm_t
        indicator = (
            z1_semi <= cfg.m_trunc
            and z2_semi <= cfg.m_trunc
            and y1_norm <= cfg.r_trunc
            and y2_norm <= cfg.r_trunc
        )
        diff_semi = fraccalc._seminorm_0_alpha(z2.values - z1.values, z1.dt, alpha)
        p = quasi_contraction_order(alpha) if cfg.moment_p is None else cfg.moment_p
        num = _sup_distance(y1, y2) ** p if indicator else 0.0
        den = diff_semi**p if indicator else 0.0
        out[i] = (num, den, 1.0 if indicator else 0.0)
    return out


_REPLICA_FNS = {
    "coeff_convergence": _replica_coeff,
    "vanishing_delay": _replica_delay,
    "euler_refinement": _replica_euler,
    "ito_limit": _replica_ito,
    "moments": _replica_moments,
    "quasi_contract": _replica_quasi,
}


def _run_one(args) -> np.ndarray:
    cfg, replica = args
    return _REPLICA_FNS[cfg.kind](cfg, replica)


def _map_replicas(cfg: ExperimentConfig) -> list[np.ndarray]:
    tasks = [(cfg, i) for i in range(cfg.replicas)]
    if cfg.workers == 1:
        return [_run_one(t) for t in tasks]
    chunk = max(1, cfg.replicas // (4 * cfg.workers))
    with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
        return list(pool.map(_run_one, tasks, chunksize=chunk))


# --------------------------------------------------------------------------
# reduction and pass criteria


def _monotone_violations(levels: tuple[LevelResult, ...]) -> list[str]:
    """Strict exceedance increases whose Wilson intervals do not overlap."""
    reasons = []
    for prev, cur in zip(levels, levels[1:]):
        if (
            cur.exceedance.estimate > prev.exceedance.estimate
            and cur.exceedance.ci_low > prev.exceedance.ci_high
        ):
            reasons.append(
                f"exceedance rose from {prev.exceedance.estimate:.3f} at level "
                f"{prev.level:g} to {cur.exceedance.estimate:.3f} at level "
                f"{cur.level:g} with disjoint intervals"
            )
    return reasons


def _reduce_convergence(cfg: ExperimentConfig, rows: list[np.ndarray], started: float,
                        reference: str = "") -> ConvergenceReport:
    table = np.vstack(rows)  # (replicas, levels)
    level_results = []
    for i, level in enumerate(cfg.levels):
        dist = table[:, i]
        level_results.append(
            LevelResult(
                level=float(level),
                exceedance=estimate_exceedance(dist, cfg.epsilon),
                mean_distance=float(dist.mean()),
                median_distance=float(np.median(dist)),
                distances=tuple(float(x) for x in dist) if cfg.emit_distances else (),
            )
        )
    levels = tuple(level_results)
    reasons = _monotone_violations(levels)
    final = levels[-1].exceedance.estimate
    if final >= cfg.max_final_exceedance:
        reasons.append(
            f"final-level exceedance {final:.3f} >= {cfg.max_final_exceedance}"
        )
    if cfg.kind == "euler_refinement":
        means = [lv.mean_distance for lv in levels]
        drops = sum(1 for a, b in zip(means, means[1:]) if b <= a)
        need = (
            cfg.min_decreasing_steps
            if cfg.min_decreasing_steps is not None
            else max(len(means) - 2, 1)
        )
        if drops < need:
            reasons.append(f"mean distance decreased in only {drops} steps, need {need}")
    if cfg.kind == "ito_limit":
        means = [lv.mean_distance for lv in levels]
        if any(b >= a for a, b in zip(means, means[1:])):
            reasons.append("mean distance not strictly decreasing across mollifier levels")
    return ConvergenceReport(
        kind=cfg.kind,
        epsilon=cfg.epsilon,
        replicas=cfg.replicas,
        master_seed=cfg.seed,
        levels=levels,
        passed=not reasons,
        reasons=tuple(reasons),
        reference=reference,
        runtime_seconds=time.perf_counter() - started,
    )


def lognormal_terminal_second_moment(
    a: float, b: float, c: float, x0: float, horizon: float, hurst: float
) -> float:
    """E[X(T)^2] of the scalar linear mixed equation.

    The Wiener part is geometric Brownian motion and the rough part is a
    lognormal factor with variance T^(2H):
    ``x0^2 exp((2a + b^2) T + 2 c^2 T^(2H))``.
    """
    return x0**2 * np.exp((2 * a + b * b) * horizon + 2 * c * c * horizon ** (2 * hurst))


def quasi_contraction_order(alpha: float) -> float:
    """Smallest even integer p with p >= 4 / (1 - 2 alpha)."""
    lo = 4.0 / (1.0 - 2.0 * alpha)
    p = int(np.ceil(lo))
    return float(p if p % 2 == 0 else p + 1)


def run_coefficient_convergence(cfg: ExperimentConfig) -> ConvergenceReport:
    """Solutions under level-n coefficient perturbations versus the base equation."""
    if cfg.kind != "coeff_convergence":
        raise ExperimentError(f"config kind is {cfg.kind!r}")
    started = time.perf_counter()
    return _reduce_convergence(cfg, _map_replicas(cfg), started, reference="base_spec")


def run_vanishing_delay(cfg: ExperimentConfig) -> ConvergenceReport:
    """Pointwise-delay solutions as the tap shrinks versus the no-delay equation."""
    if cfg.kind != "vanishing_delay":
        raise ExperimentError(f"config kind is {cfg.kind!r}")
    if cfg.spec.family != "pointwise_delay":
        raise ExperimentError("vanishing delay needs a pointwise_delay spec")
    dt = cfg.horizon / cfg.n_steps
    for tau in cfg.levels:
        if abs(round(tau / dt) * dt - tau) > 1e-9 * max(1.0, tau):
            raise ExperimentError(f"tap {tau} is not aligned with the mesh (dt={dt})")
    started = time.perf_counter()
    return _reduce_convergence(cfg, _map_replicas(cfg), started, reference="no_delay_limit")


def run_euler_refinement(cfg: ExperimentConfig) -> ConvergenceReport:
    """Euler paths across dyadic meshes versus the closed form (or a 4x-finer solve)."""
    if cfg.kind != "euler_refinement":
        raise ExperimentError(f"config kind is {cfg.kind!r}")
    levels = [int(n) for n in cfg.levels]
    finest = max(levels)
    for n in levels:
        if finest % n != 0:
            raise ExperimentError("mesh levels must divide the finest mesh")
    if cfg.reference not in ("closed_form", "fine_euler"):
        raise ExperimentError(f"unknown reference {cfg.reference!r}")
    if cfg.reference == "closed_form" and _geometric_triple(cfg) is None:
        raise ExperimentError(
            "closed-form reference unavailable for this spec; use reference='fine_euler'"
        )
    started = time.perf_counter()
    return _reduce_convergence(cfg, _map_replicas(cfg), started, reference=cfg.reference)


def run_ito_limit(cfg: ExperimentConfig) -> ConvergenceReport:
    """Mollified-drift Ito solutions versus the mixed solution as the level grows."""
    if cfg.kind != "ito_limit":
        raise ExperimentError(f"config kind is {cfg.kind!r}")
    dt = cfg.horizon / cfg.n_steps
    if dt > 1.0 / (4.0 * max(cfg.levels)):
        raise ExperimentError(
            f"mesh dt={dt} too coarse for mollifier level {max(cfg.levels)}"
        )
    started = time.perf_counter()
    return _reduce_convergence(cfg, _map_replicas(cfg), started, reference="euler_mixed")


def estimate_moments(cfg: ExperimentConfig) -> MomentReport:
    """Monte Carlo moment estimates of the sup norm and the truncated delay norm."""
    if cfg.kind != "moments":
        raise ExperimentError(f"config kind is {cfg.kind!r}")
    started = time.perf_counter()
    rows = np.vstack(_map_replicas(cfg))
    sup, delay_norm, z_semi = rows[:, 0], rows[:, 1], rows[:, 2]
    inside = z_semi <= cfg.m_trunc
    p_values = tuple(float(p) for p in cfg.levels)
    sup_moments = tuple(float(np.mean(sup**p)) for p in p_values)
    truncated = tuple(float(np.mean((delay_norm**p) * inside)) for p in p_values)

    stability_p = 4.0 if 4.0 in p_values else p_values[-1]
    half = sup[: cfg.replicas // 2]
    est_half = float(np.mean(half**stability_p))
    est_full = float(np.mean(sup**stability_p))
    rel_change = abs(est_full - est_half) / est_full if est_full > 0 else 0.0

    p_top = max(p_values)
    contrib = np.sort(sup**p_top)
    k_top = max(1, int(np.ceil(0.01 * cfg.replicas)))
    share = float(contrib[-k_top:].sum() / contrib.sum()) if contrib.sum() > 0 else 0.0
    alarm = share > 0.5

    thresholds = tuple(float(q) for q in np.quantile(sup, [0.5, 0.75, 0.9, 0.95, 0.99]))
    survival = tuple(float(np.mean(sup > thr)) for thr in thresholds)

    reasons = []
    oracle = None
    gap_se = None
    triple = _geometric_triple(cfg)
    if triple is not None and 2.0 in p_values:
        x0 = float(cfg.initial.eta.values[-1, 0])
        oracle = lognormal_terminal_second_moment(
            *triple, x0, cfg.horizon, cfg.params.hurst
        )
        se = float(np.std(sup**2.0, ddof=1) / np.sqrt(cfg.replicas))
        gap_se = (sup_moments[p_values.index(2.0)] - oracle) / se if se > 0 else np.inf
        if sup_moments[p_values.index(2.0)] < oracle - 3.0 * se:
            reasons.append(
                f"sup second moment {sup_moments[p_values.index(2.0)]:.4f} below the "
                f"terminal-moment lower bound {oracle:.4f} by more than 3 SE"
            )
    if rel_change >= 0.10:
        reasons.append(
            f"half-sample p={stability_p:g} estimate moved by {rel_change:.1%} (>= 10%)"
        )
    if alarm and cfg.heavy_tail_fails:
        reasons.append(f"top-1% of samples carries {share:.1%} of the p={p_top:g} moment")

    return MomentReport(
        p_values=p_values,
        sup_moments=sup_moments,
        truncated_moments=truncated,
        m_trunc=cfg.m_trunc,
        trunc_fraction=float(np.mean(inside)),
        stability_p=stability_p,
        stability_rel_change=rel_change,
        survival_thresholds=thresholds,
        survival_probs=survival,
        heavy_tail_share=share,
        heavy_tail_alarm=alarm,
        oracle_second_moment=oracle,
        oracle_gap_se=None if gap_se is None else float(gap_se),
        replicas=cfg.replicas,
        master_seed=cfg.seed,
        passed=not reasons,
        reasons=tuple(reasons),
        runtime_seconds=time.perf_counter() - started,
    )


def estimate_quasi_contractivity(cfg: ExperimentConfig) -> QuasiReport:
    """Ratio of p-th moment solution distances to driver distances, on the
    truncation event, across a schedule of driver perturbation sizes."""
    if cfg.kind != "quasi_contract":
        raise ExperimentError(f"config kind is {cfg.kind!r}")
    started = time.perf_counter()
    p = quasi_contraction_order(cfg.params.alpha) if cfg.moment_p is None else cfg.moment_p
    if p < 4.0 / (1.0 - 2.0 * cfg.params.alpha) - 1e-12:
        raise ExperimentError(
            f"moment order p={p} below the admissible range 4/(1-2 alpha)"
        )
    rows = np.stack(_map_replicas(cfg))  # (replicas, levels, 3)
    sums = rows.sum(axis=0)
    ratios: list[float | None] = []
    for num, den, _ in sums:
        ratios.append(float(num / den) if den > 0 else None)
    finite = [r for r in ratios if r is not None and r > 0]
    reasons = []
    if not finite:
        reasons.append("indicator event empty in every level: inconclusive")
    elif max(finite) / min(finite) >= cfg.ratio_bound:
        reasons.append(
            f"ratio spread {max(finite) / min(finite):.2f} exceeds bound {cfg.ratio_bound}"
        )
    return QuasiReport(
        epsilons=tuple(float(e) for e in cfg.levels),
        ratios=tuple(ratios),
        numerators=tuple(float(v) for v in sums[:, 0]),
        denominators=tuple(float(v) for v in sums[:, 1]),
        indicator_counts=tuple(int(v) for v in sums[:, 2]),
        p=p,
        m_trunc=cfg.m_trunc,
        r_trunc=cfg.r_trunc,
        replicas=cfg.replicas,
        master_seed=cfg.seed,
        passed=not reasons,
        reasons=tuple(reasons),
        runtime_seconds=time.perf_counter() - started,
    )


_RUNNERS = {
    "coeff_convergence": run_coefficient_convergence,
    "vanishing_delay": run_vanishing_delay,
    "euler_refinement": run_euler_refinement,
    "ito_limit": run_ito_limit,
    "moments": estimate_moments,
    "quasi_contract": estimate_quasi_contractivity,
}


def run_experiment(cfg: ExperimentConfig):
    """Dispatch a configured experiment to its runner."""
    return _RUNNERS[cfg.kind](cfg)
