"""Time-stepping engines for mixed and Ito-type delay equations.

``euler_mixed_sdde`` advances the explicit Euler recursion with left-point
coefficient evaluation for both noise terms: the Wiener increment enters in
the Ito sense, the rough-driver increment as a left-point Young sum.  The
raw increment of Z is used directly; the mollified driver Z^N exists only to
re-express the equation as an Ito equation with random drift, which
``euler_ito_sdde`` integrates.

All solves are pure functions of their inputs: identical arguments give
bit-identical output paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import CoefficientSpec, InitialCondition, eval_coefficient
from .grid import GridError, GridPath

__all__ = [
    "SolverConfig",
    "MollifierParams",
    "SolverExplosionError",
    "AdaptednessError",
    "euler_mixed_sdde",
    "euler_ito_sdde",
    "geometric_closed_form",
    "mollify_driver",
    "GuardedDriver",
    "MollifiedDrift",
    "coefficient_evaluator",
]


class SolverExplosionError(RuntimeError):
    """The discrete path left the configured trust region."""

    def __init__(self, time: float, magnitude: float, threshold: float):
        super().__init__(
            f"solution magnitude {magnitude:.3e} exceeded the explosion "
            f"threshold {threshold:.3e} at t={time:.6g}"
        )
        self.time = time
        self.magnitude = magnitude


class AdaptednessError(RuntimeError):
    """A random coefficient tried to read driver values from the future."""


@dataclass(frozen=True)
class SolverConfig:
    """Uniform-grid solve on [0, horizon] with look-back window ``delay``.

    ``dims`` optionally pins the expected (d, m, l) triple; when present the
    solve rejects specs or drivers with other shapes.
    """

    n_steps: int
    horizon: float
    delay: float = 0.0
    scheme: str = "euler_mixed"
    explosion_threshold: float = 1e8
    dims: tuple[int, int, int] | None = None

    def __post_init__(self) -> None:
        if self.n_steps < 1:
            raise ValueError("n_steps must be positive")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if self.delay < 0:
            raise ValueError("delay must be non-negative")
        if self.scheme not in ("euler_mixed", "euler_ito"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        q = round(self.delay / self.dt)
        if abs(q * self.dt - self.delay) > 1e-9 * max(1.0, self.delay):
            raise ValueError(
                f"delay {self.delay} is not a multiple of the step {self.dt}"
            )

    @property
    def dt(self) -> float:
        return self.horizon / self.n_steps

    @property
    def delay_steps(self) -> int:
        return round(self.delay / self.dt)


@dataclass(frozen=True)
class MollifierParams:
    """Level of the moving-average smoothing of the rough driver.

    The level N sets both the window width 1/N and the norm clamp applied to
    the driver values; the clamped window average is Lipschitz with constant
    at most 2 N^2.
    """

    level: int

    def __post_init__(self) -> None:
        if self.level < 1:
            raise ValueError("mollifier level must be a positive integer")

    @property
    def window(self) -> float:
        return 1.0 / self.level

    @property
    def truncation(self) -> float:
        return float(self.level)


def _align_driver(path: GridPath, cfg: SolverConfig, dim: int, name: str) -> GridPath:
    if abs(path.t0) > 1e-9:
        raise GridError(f"{name} must start at time 0, starts at {path.t0}")
    if path.dim != dim:
        raise GridError(f"{name} has dimension {path.dim}, expected {dim}")
    if abs(path.end_time - cfg.horizon) > 1e-9 * max(1.0, cfg.horizon):
        raise GridError(
            f"{name} covers [0, {path.end_time}], expected [0, {cfg.horizon}]"
        )
    step = round(cfg.dt / path.dt)
    if step < 1 or abs(step * path.dt - cfg.dt) > 1e-9 * cfg.dt:
        raise GridError(
            f"{name} grid (dt={path.dt}) is not a refinement of the solver grid "
            f"(dt={cfg.dt})"
        )
    return path if step == 1 else path.restrict(step)


def _history_values(eta: InitialCondition, cfg: SolverConfig) -> np.ndarray:
    q = cfg.delay_steps
    if q == 0:
        return eta.eta.values[-1:].copy()
    path = eta.eta
    if abs(path.t0 + cfg.delay) > 1e-9 * max(1.0, cfg.delay):
        raise GridError(
            f"initial condition covers [{path.t0}, 0], solver needs [-{cfg.delay}, 0]"
        )
    ratio = round(cfg.dt / path.dt)
    if ratio > 1:
        path = path.restrict(ratio)
    if path.n_points != q + 1 or abs(path.dt - cfg.dt) > 1e-9 * cfg.dt:
        raise GridError("initial condition grid does not match the solver grid")
    return path.values.copy()


class _StepView:
    """Segment protocol over the in-progress solution buffer (no copies)."""

    __slots__ = ("_buf", "anchor", "lookback", "dt")

    def __init__(self, buf: np.ndarray, anchor: int, lookback: int, dt: float):
        self._buf = buf
        self.anchor = anchor
        self.lookback = lookback
        self.dt = dt

    @property
    def values(self) -> np.ndarray:
        return self._buf[self.anchor - self.lookback : self.anchor + 1]

    def value_at(self, u: float) -> np.ndarray:
        k = round(u / self.dt)
        if not -self.lookback <= k <= 0:
            raise GridError(f"segment argument {u} outside the window")
        return self._buf[self.anchor + k]

    def sup_norm(self) -> float:
        vals = self.values
        if vals.shape[1] == 1:
            return float(np.abs(vals[:, 0]).max())
        return float(np.linalg.norm(vals, axis=1).max())


def _tap_steps(spec: CoefficientSpec, cfg: SolverConfig) -> int:
    if spec.family not in ("linear", "pointwise_delay"):
        return 0
    q_tau = round(spec.tau / cfg.dt)
    if abs(q_tau * cfg.dt - spec.tau) > 0.5 * cfg.dt * (1 + 1e-9):
        raise GridError(f"tap {spec.tau} too far from any grid node (dt={cfg.dt})")
    if q_tau > cfg.delay_steps:
        raise GridError(
            f"tap {spec.tau} exceeds the delay horizon {cfg.delay} of the solve"
        )
    return q_tau


def _scalar_fast_path(spec: CoefficientSpec) -> bool:
    return (
        spec.dim == 1
        and spec.n_wiener == 1
        and spec.n_holder == 1
        and spec.family != "distributed_delay"
    )


def euler_mixed_sdde(
    spec: CoefficientSpec,
    eta: InitialCondition,
    W: GridPath,
    Z: GridPath,
    cfg: SolverConfig,
) -> GridPath:
    """Explicit Euler path of the mixed delay equation on [-delay, horizon].

    On [-delay, 0] the output equals the initial condition bitwise.  Each step
    advances ``X += a dt + b dW + c dZ`` with all three coefficients frozen at
    the left node and the segment of the discrete solution there.
    """
    if cfg.dims is not None and cfg.dims != (spec.dim, spec.n_wiener, spec.n_holder):
        raise GridError(
            f"config dims {cfg.dims} != spec dims "
            f"{(spec.dim, spec.n_wiener, spec.n_holder)}"
        )
    w = _align_driver(W, cfg, spec.n_wiener, "W")
    z = _align_driver(Z, cfg, spec.n_holder, "Z")
    hist = _history_values(eta, cfg)
    if hist.shape[1] != spec.dim:
        raise GridError(
            f"initial condition dimension {hist.shape[1]} != spec dim {spec.dim}"
        )
    n, q, dt = cfg.n_steps, cfg.delay_steps, cfg.dt
    q_tau = _tap_steps(spec, cfg)
    buf = np.empty((q + n + 1, spec.dim))
    buf[: q + 1] = hist
    threshold = cfg.explosion_threshold

    if _scalar_fast_path(spec):
        gna, gda, ca = spec.drift.gain_now[0, 0, 0], spec.drift.gain_delay[0, 0, 0], spec.drift.const[0, 0]
        gnb, gdb, cb = spec.diffusion.gain_now[0, 0, 0], spec.diffusion.gain_delay[0, 0, 0], spec.diffusion.const[0, 0]
        gnc, gdc, cc = spec.zdrive.gain_now[0, 0, 0], spec.zdrive.gain_delay[0, 0, 0], spec.zdrive.const[0, 0]
        mods = [b.time_modulation == "sin" for b in (spec.drift, spec.diffusion, spec.zdrive)]
        dw = np.diff(w.values[:, 0])
        dz = np.diff(z.values[:, 0])
        col = buf[:, 0]
        for k in range(n):
            i = q + k
            t = k * dt
            x = col[i]
            xd = col[i - q_tau]
            ma = math.sin(t) if mods[0] else 1.0
            mb = math.sin(t) if mods[1] else 1.0
            mc = math.sin(t) if mods[2] else 1.0
            a = (gna * x + gda * xd + ca) * ma
            b = (gnb * x + gdb * xd + cb) * mb
            c = (gnc * x + gdc * xd + cc) * mc
            x_new = x + a * dt + b * dw[k] + c * dz[k]
            if abs(x_new) > threshold:
                raise SolverExplosionError((k + 1) * dt, abs(x_new), threshold)
            col[i + 1] = x_new
        return GridPath(-cfg.delay, dt, buf)

    dw = np.diff(w.values, axis=0)
    dz = np.diff(z.values, axis=0)
    for k in range(n):
        i = q + k
        t = k * dt
        psi = _StepView(buf, i, q, dt)
        a = eval_coefficient(spec, "a", t, psi)
        b = eval_coefficient(spec, "b", t, psi)
        c = eval_coefficient(spec, "c", t, psi)
        x_new = buf[i] + a * dt + b @ dw[k] + c @ dz[k]
        mag = float(np.linalg.norm(x_new))
        if mag > threshold:
            raise SolverExplosionError((k + 1) * dt, mag, threshold)
        buf[i + 1] = x_new
    return GridPath(-cfg.delay, dt, buf)


def coefficient_evaluator(spec: CoefficientSpec, which: str):
    """Bind one coefficient of a spec as a plain ``(t, psi) -> array`` callable."""

    def evaluate(t: float, psi):
        return eval_coefficient(spec, which, t, psi)

    return evaluate


def euler_ito_sdde(
    drift,
    diffusion,
    theta: InitialCondition,
    W: GridPath,
    cfg: SolverConfig,
    guarded: tuple = (),
) -> GridPath:
    """Euler-Maruyama path of an Ito delay equation with (possibly random)
    coefficients ``drift(t, psi)`` and ``diffusion(t, psi)``.

    Random coefficients must be adapted: any :class:`GuardedDriver` listed in
    ``guarded`` is advanced to the current step time before evaluation, so an
    evaluator that asks for future driver values raises
    :class:`AdaptednessError`.
    """
    n, q, dt = cfg.n_steps, cfg.delay_steps, cfg.dt
    hist = _history_values(theta, cfg)
    dim = hist.shape[1]
    w = _align_driver(W, cfg, W.dim, "W")
    dw = np.diff(w.values, axis=0)
    buf = np.empty((q + n + 1, dim))
    buf[: q + 1] = hist
    threshold = cfg.explosion_threshold
    for k in range(n):
        i = q + k
        t = k * dt
        for guard in guarded:
            guard.advance(t)
        psi = _StepView(buf, i, q, dt)
        f = np.asarray(drift(t, psi), dtype=float).reshape(dim)
        g = np.asarray(diffusion(t, psi), dtype=float).reshape(dim, w.dim)
        x_new = buf[i] + f * dt + g @ dw[k]
        mag = float(np.linalg.norm(x_new))
        if mag > threshold:
            raise SolverExplosionError((k + 1) * dt, mag, threshold)
        buf[i + 1] = x_new
    return GridPath(-cfg.delay, dt, buf)


def geometric_closed_form(
    a: float, b: float, c: float, x0: float, W: GridPath, Z: GridPath
) -> GridPath:
    """Pathwise solution of the scalar linear mixed equation.

    The Wiener integral is an Ito integral (hence the -b^2/2 correction); the
    rough integral obeys the pathwise chain rule with no correction:
    ``X(t) = x0 exp((a - b^2/2) t + b W(t) + c Z(t))``.
    """
    if not W.same_grid(Z):
        raise GridError("W and Z must live on a common grid")
    t = W.times
    vals = x0 * np.exp((a - 0.5 * b * b) * t + b * W.scalar_values() + c * Z.scalar_values())
    return GridPath(W.t0, W.dt, vals)


def _clamp(values: np.ndarray, level: float) -> np.ndarray:
    mags = np.linalg.norm(values, axis=1)
    factor = np.ones_like(mags)
    over = mags > level
    factor[over] = level / mags[over]
    return values * factor[:, None]


def mollify_driver(Z: GridPath, level: int) -> GridPath:
    """Moving window average of the norm-clamped driver.

    ``Z^N(t) = N * integral over [max(t - 1/N, 0), t] of clamp_N(Z(s)) ds``
    on the grid of Z, with the window boundary handled by an exact fractional
    first cell.  The output is absolutely continuous (Lipschitz) and
    converges to Z uniformly as the level grows.
    """
    params = MollifierParams(level)
    if abs(Z.t0) > 1e-9:
        raise GridError("driver must start at time 0")
    if Z.dt > params.window / 4.0:
        raise GridError(
            f"grid step {Z.dt} too coarse for mollifier level {level}: "
            f"need dt <= {params.window / 4.0}"
        )
    n = Z.n_points - 1
    dt = Z.dt
    h = _clamp(Z.values, float(level))
    cum = np.vstack(
        [np.zeros((1, Z.dim)), np.cumsum(0.5 * (h[:-1] + h[1:]) * dt, axis=0)]
    )
    k = np.arange(n + 1)
    s0 = k * dt - params.window
    out = np.empty_like(h)
    inside = s0 <= 0.0
    out[inside] = cum[k[inside]]
    if np.any(~inside):
        kk = k[~inside]
        j0 = np.floor(s0[~inside] / dt).astype(int)
        theta = s0[~inside] / dt - j0
        h_s0 = h[j0] + theta[:, None] * (h[j0 + 1] - h[j0])
        partial = 0.5 * (h_s0 + h[j0 + 1]) * ((j0 + 1) * dt - s0[~inside])[:, None]
        out[~inside] = partial + cum[kk] - cum[j0 + 1]
    return GridPath(0.0, dt, float(level) * out)


class GuardedDriver:
    """Clock-gated, interpolating, read-only view of a driver path."""

    def __init__(self, path: GridPath):
        self._path = path
        self._clock = -np.inf

    def advance(self, t: float) -> None:
        self._clock = t

    def value(self, s: float) -> np.ndarray:
        if s > self._clock + 1e-12:
            raise AdaptednessError(
                f"driver value at s={s} requested while the clock is at {self._clock}"
            )
        s = min(max(s, self._path.t0), self._path.end_time)
        pos = (s - self._path.t0) / self._path.dt
        j = min(int(pos), self._path.n_points - 2)
        theta = pos - j
        vals = self._path.values
        return vals[j] + theta * (vals[j + 1] - vals[j])


class MollifiedDrift:
    """Random drift ``f(t, psi) = a(t, psi) + c(t, psi) @ dZ^N/dt (t)``.

    This is the coefficient that turns the mixed equation into an Ito delay
    equation: the derivative of the mollified driver is
    ``N (clamp_N Z(t) - clamp_N Z(max(t - 1/N, 0)))``.
    """

    def __init__(self, spec: CoefficientSpec, Z: GridPath, level: int):
        self.spec = spec
        self.level = MollifierParams(level)
        self.guard = GuardedDriver(Z)

    def zdot(self, t: float) -> np.ndarray:
        now = self.guard.value(t)
        past = self.guard.value(max(t - self.level.window, 0.0))
        lvl = float(self.level.level)
        return lvl * (_clamp(now[None, :], lvl)[0] - _clamp(past[None, :], lvl)[0])

    def __call__(self, t: float, psi) -> np.ndarray:
        a = eval_coefficient(self.spec, "a", t, psi)
        c = eval_coefficient(self.spec, "c", t, psi)
        return a + c @ self.zdot(t)
