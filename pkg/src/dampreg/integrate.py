"""Fixed-step RK4 and adaptive Dormand-Prince 5(4) integration of any ``SystemId``.

Regularized systems run in fictitious time with the physical time carried
as the last state component; by default they stop when that component
reaches ``t_end``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

from .conserved import ConservedSet, evaluate_conserved
from .transforms import SystemParams
from .dynamics import CollisionError, RhsContext, SystemId, coord_dim, is_regularized, is_singular, make_rhs, state_dim


class Method(str, Enum):
    RK4 = "RK4"
    ADAPTIVE_RK45 = "AdaptiveRK45"


class Status(str, Enum):
    COMPLETED = "Completed"
    COLLISION_ABORT = "CollisionAbort"
    STEP_UNDERFLOW = "StepUnderflow"
    MAX_STEPS = "MaxSteps"

    @property
    def failed(self) -> bool:
        return self in (Status.COLLISION_ABORT, Status.STEP_UNDERFLOW)


@dataclass(frozen=True)
class IntegratorConfig:
    """Step sizes are in the system's own independent variable.

    ``stop_on="physical"`` ends regularized runs when the co-integrated
    physical time reaches ``t_end``; ``"native"`` ends them at ``tau = t_end``.
    """

    method: Method = Method.ADAPTIVE_RK45
    rel_tol: float = 1e-12
    abs_tol: float = 1e-12
    h_init: float = 1e-3
    h_min: float = 1e-14
    h_max: float = 0.5
    t_end: float = 10.0
    max_steps: int = 1_000_000
    collision_r: float = 1e-8
    stop_on: str = "physical"

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if not (0 < self.h_min <= self.h_init <= self.h_max):
            raise ValueError(f"need 0 < h_min <= h_init <= h_max, got {self.h_min}, {self.h_init}, {self.h_max}")
        if self.max_steps <= 0:
            raise ValueError("max_steps must be positive")
        if self.stop_on not in ("physical", "native"):
            raise ValueError(f"stop_on must be 'physical' or 'native', got {self.stop_on!r}")


@dataclass
class Trajectory:
    """Accepted samples of one run.

    ``s`` is the independent variable (``t`` for direct systems, ``tau``
    for regularized ones), ``y`` the states and ``dy`` the vector field at
    each sample (kept for Hermite resampling).
    """

    sys: SystemId
    s: np.ndarray
    y: np.ndarray
    dy: np.ndarray
    status: Status
    ctx: RhsContext
    steps_rejected: int = 0
    _conserved: list | None = field(default=None, repr=False)

    @property
    def t(self) -> np.ndarray:
        """Physical time at each sample."""
        return self.y[:, -1] if is_regularized(self.sys) else self.s

    @property
    def q(self) -> np.ndarray:
        return self.y[:, : coord_dim(self.sys)]

    @property
    def v(self) -> np.ndarray:
        d = coord_dim(self.sys)
        return self.y[:, d : 2 * d]

    def __len__(self) -> int:
        return len(self.s)

    @property
    def conserved(self) -> list[ConservedSet]:
        if self._conserved is None:
            self._conserved = [evaluate_conserved(self.sys, s, y, self.ctx) for s, y in zip(self.s, self.y)]
        return self._conserved

    @property
    def samples(self):
        return list(zip(self.s, self.y, self.conserved))


# Dormand-Prince 5(4)
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4


def _dp_step(f, s, y, k1, h):
    ks = [k1]
    for i in range(1, 7):
        yi = y + h * sum(a * kj for a, kj in zip(_A[i], ks) if a != 0.0)
        ks.append(f(s + _C[i] * h, yi))
    y_new = y + h * sum(b * kj for b, kj in zip(_B5, ks) if b != 0.0)  # equals the 7th stage input
    err = h * sum(e * kj for e, kj in zip(_E, ks))
    return y_new, ks[6], err


def _rk4_step(f, s, y, k1, h):
    k2 = f(s + h / 2, y + h / 2 * k1)
    k3 = f(s + h / 2, y + h / 2 * k2)
    k4 = f(s + h, y + h * k3)
    y_new = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return y_new, f(s + h, y_new)


class _Recorder:
    def __init__(self, s0, y0, dy0):
        self.s, self.y, self.dy = [s0], [y0], [dy0]

    def push(self, s, y, dy):
        self.s.append(s)
        self.y.append(y)
        self.dy.append(dy)


def integrate(sys: SystemId, y0, ctx: RhsContext, cfg: IntegratorConfig, s0: float = 0.0) -> Trajectory:
    """Integrate ``sys`` from state ``y0`` at independent variable ``s0``.

    Singular systems stop with ``CollisionAbort`` when ``r < cfg.collision_r``
    (or when the vector field itself refuses a collision state); adaptive
    runs stop with ``StepUnderflow`` when the step would drop below ``h_min``.
    """
    sys = SystemId(sys)
    y0 = np.asarray(y0, dtype=float)
    if y0.shape != (state_dim(sys),):
        raise ValueError(f"{sys.value} expects a state of length {state_dim(sys)}, got shape {y0.shape}")
    f = make_rhs(sys, ctx)
    d = coord_dim(sys)
    singular = is_singular(sys, ctx.params)
    physical_stop = is_regularized(sys) and cfg.stop_on == "physical"

    def collided(y):
        return singular and math.sqrt(float(y[:d] @ y[:d])) < cfg.collision_r

    def finish(rec, status, rejected=0):
        return Trajectory(sys, np.array(rec.s), np.array(rec.y), np.array(rec.dy), status, ctx, rejected)

    try:
        dy0 = f(s0, y0)
    except CollisionError:
        return finish(_Recorder(s0, y0, np.full_like(y0, np.nan)), Status.COLLISION_ABORT)
    rec = _Recorder(s0, y0, dy0)
    if collided(y0):
        return finish(rec, Status.COLLISION_ABORT)

    def progress(s, y):
        return y[-1] if physical_stop else s

    if progress(s0, y0) >= cfg.t_end:
        return finish(rec, Status.COMPLETED)
    if cfg.method is Method.RK4:
        return _run_rk4(f, s0, y0, dy0, cfg, rec, finish, collided, physical_stop)
    return _run_adaptive(f, s0, y0, dy0, cfg, rec, finish, collided, physical_stop)


def _land_on_physical_time(step, s, y, dy, h, t_end):
    """Step size that lands the co-integrated time (last component) on ``t_end``."""
    lo, hi = 0.0, h
    y_hi, dy_hi = step(s, y, dy, h)[:2]
    h_try = h * (t_end - y[-1]) / (y_hi[-1] - y[-1])
    best = (hi, y_hi, dy_hi)
    for _ in range(60):
        h_try = min(max(h_try, lo), hi)
        y_n, dy_n = step(s, y, dy, h_try)[:2]
        gap = y_n[-1] - t_end
        best = (h_try, y_n, dy_n)
        if abs(gap) <= 4 * np.finfo(float).eps * max(1.0, abs(t_end)):
            break
        if gap > 0:
            hi = h_try
        else:
            lo = h_try
        rate = dy_n[-1]
        newton = h_try - gap / rate if rate > 0 else 0.5 * (lo + hi)
        h_try = newton if lo < newton < hi else 0.5 * (lo + hi)
        if hi - lo <= 1e-15 * max(1.0, abs(h)):
            break
    # the root solve leaves t a few ulp off; snap so the last sample is exactly t_end
    h_best, y_best, dy_best = best
    y_best = y_best.copy()
    y_best[-1] = t_end
    return h_best, y_best, dy_best


def _run_rk4(f, s, y, dy, cfg, rec, finish, collided, physical_stop):
    h = cfg.h_init
    step = lambda s_, y_, dy_, h_: _rk4_step(f, s_, y_, dy_, h_)
    for _ in range(cfg.max_steps):
        h_step, last = h, False
        if not physical_stop and s + h_step >= cfg.t_end - 1e-12 * max(1.0, abs(cfg.t_end)):
            h_step, last = cfg.t_end - s, True
        try:
            y_new, dy_new = step(s, y, dy, h_step)
            if physical_stop and y_new[-1] >= cfg.t_end:
                h_step, y_new, dy_new = _land_on_physical_time(step, s, y, dy, h_step, cfg.t_end)
                last = True
        except CollisionError:
            return finish(rec, Status.COLLISION_ABORT)
        s = cfg.t_end if (last and not physical_stop) else s + h_step
        y, dy = y_new, dy_new
        rec.push(s, y, dy)
        if collided(y):
            return finish(rec, Status.COLLISION_ABORT)
        if last:
            return finish(rec, Status.COMPLETED)
    return finish(rec, Status.MAX_STEPS)


_SAFETY = 0.9
_ALPHA = 0.7 / 5
_BETA = 0.4 / 5


def _run_adaptive(f, s, y, dy, cfg, rec, finish, collided, physical_stop):
    h = min(cfg.h_init, cfg.h_max)
    err_prev = 1e-4
    rejected = 0
    step = lambda s_, y_, dy_, h_: _dp_step(f, s_, y_, dy_, h_)
    for _ in range(cfg.max_steps):
        last = False
        if not physical_stop and s + h >= cfg.t_end:
            h = cfg.t_end - s
            last = True
        try:
            y_new, dy_new, err = step(s, y, dy, h)
            scale = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
            en = math.sqrt(float(np.mean((err / scale) ** 2)))
        except CollisionError:
            en = math.inf
        if not math.isfinite(en):
            en = math.inf
        if en <= 1.0:
            if physical_stop and y_new[-1] >= cfg.t_end:
                h, y_new, dy_new = _land_on_physical_time(step, s, y, dy, h, cfg.t_end)
                last = True
            s = cfg.t_end if (last and not physical_stop) else s + h
            y, dy = y_new, dy_new
            rec.push(s, y, dy)
            if collided(y):
                return finish(rec, Status.COLLISION_ABORT, rejected)
            if last:
                return finish(rec, Status.COMPLETED, rejected)
            factor = _SAFETY * max(en, 1e-10) ** -_ALPHA * err_prev**_BETA
            h = min(h * min(5.0, max(0.2, factor)), cfg.h_max)
            err_prev = max(en, 1e-4)
        else:
            rejected += 1
            factor = 0.2 if not math.isfinite(en) else max(0.2, _SAFETY * en ** -0.2)
            h *= factor
        if h < cfg.h_min:
            return finish(rec, Status.STEP_UNDERFLOW, rejected)
    return finish(rec, Status.MAX_STEPS, rejected)


# --- paired direct / regularized runs ---------------------------------------------------


def hermite(s0, s1, y0, y1, d0, d1, s):
    """Cubic Hermite interpolant on ``[s0, s1]`` from values and derivatives."""
    h = s1 - s0
    x = (s - s0) / h
    h00 = (1 + 2 * x) * (1 - x) ** 2
    h10 = x * (1 - x) ** 2
    h01 = x * x * (3 - 2 * x)
    h11 = x * x * (x - 1)
    return h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1


def _invert_time(s0, s1, t0, t1, r0, r1, target):
    """Solve ``t(s) = target`` on one step, with ``t`` the Hermite cubic of (t, dt/ds)."""
    lo, hi = s0, s1
    x = s0 + (s1 - s0) * (target - t0) / (t1 - t0) if t1 > t0 else s0
    for _ in range(60):
        val = hermite(s0, s1, t0, t1, r0, r1, x) - target
        if val > 0:
            hi = x
        else:
            lo = x
        eps = 1e-9 * (s1 - s0)
        slope = (hermite(s0, s1, t0, t1, r0, r1, x + eps) - hermite(s0, s1, t0, t1, r0, r1, x - eps)) / (2 * eps)
        nxt = x - val / slope if slope > 0 else 0.5 * (lo + hi)
        if not lo <= nxt <= hi:
            nxt = 0.5 * (lo + hi)
        if abs(nxt - x) <= 1e-16 * max(1.0, abs(x)) or hi - lo <= 1e-16 * max(1.0, abs(x)):
            return nxt
        x = nxt
    return x


@dataclass(frozen=True)
class Scenario:
    """Initial condition in autonomous coordinates at ``t = 0`` plus run settings.

    ``family`` picks the regularization (LC, GenLC or KS); ``direct`` picks
    whether the reference leg is the autonomous or the original damped system.
    """

    family: str
    params: "SystemParams"
    q0: tuple
    v0: tuple
    t_end: float = 20.0
    tol: float = 1e-12
    direct: str = "autonomous"
    max_steps: int = 1_000_000


@dataclass
class PairResult:
    direct: Trajectory
    regularized: Trajectory
    t: np.ndarray
    q_direct: np.ndarray
    q_mapped: np.ndarray
    v_direct: np.ndarray
    v_mapped: np.ndarray
    script_e: float

    @property
    def max_position_error(self) -> float:
        if len(self.t) == 0:
            return math.inf
        return float(np.max(np.linalg.norm(self.q_direct - self.q_mapped, axis=1)))

    @property
    def max_velocity_error(self) -> float:
        if len(self.t) == 0:
            return math.inf
        return float(np.max(np.linalg.norm(self.v_direct - self.v_mapped, axis=1)))


def _systems_for(family):
    from .transforms import Regularization

    fam = Regularization(family)
    return {
        Regularization.LC: (SystemId.AUTONOMOUS_KEPLER_2D, SystemId.DAMPED_KEPLER_2D, SystemId.REGULARIZED_LC, "kepler"),
        Regularization.GEN_LC: (SystemId.AUTONOMOUS_POWER_LAW_2D, SystemId.DAMPED_POWER_LAW_2D, SystemId.REGULARIZED_GEN_LC, "power_law"),
        Regularization.KS: (SystemId.AUTONOMOUS_KEPLER_3D, SystemId.DAMPED_KEPLER_3D, SystemId.REGULARIZED_KS, "kepler"),
    }[fam]


def regularize_initial_state(family, q0, v0, p, t0: float = 0.0):
    """Regularized state ``[u | u' | t0]`` and per-mass energy for an autonomous-frame state."""
    from .conserved import script_e
    from .transforms import (
        PhaseState, Regularization, gen_lc_inverse, gen_lc_velocity_map, ks_inverse,
        ks_velocity_map, lc_inverse, lc_velocity_map,
    )

    fam = Regularization(family)
    q0, v0 = np.asarray(q0, dtype=float), np.asarray(v0, dtype=float)
    eps = script_e(_systems_for(fam)[3], PhaseState(q0, v0, t0), p)
    if fam is Regularization.LC:
        u = lc_inverse(q0, p.gamma)
        up = lc_velocity_map(u, v0, p)
    elif fam is Regularization.GEN_LC:
        u = gen_lc_inverse(q0, p.n_power)
        up = gen_lc_velocity_map(u, v0, p.n_power)
    else:
        u = ks_inverse(q0)
        up = ks_velocity_map(u, v0, p)
    return np.concatenate((u, up, (t0,))), eps


def map_back(family, u, up, p):
    """Autonomous-frame position and velocity of a regularized state."""
    from .transforms import (
        Regularization, gen_lc_forward, gen_lc_velocity_inverse, ks_forward, ks_velocity_inverse,
        lc_forward, lc_velocity_inverse,
    )

    fam = Regularization(family)
    if fam is Regularization.LC:
        return lc_forward(u, p.gamma), lc_velocity_inverse(u, up, p)
    if fam is Regularization.GEN_LC:
        return gen_lc_forward(u, p.n_power), gen_lc_velocity_inverse(u, up, p.n_power)
    return ks_forward(u), ks_velocity_inverse(u, up)


def resample_regularized(traj: Trajectory, times: np.ndarray):
    """Regularized states at the given physical times (Hermite in ``tau``).

    Times outside the covered range are dropped; returns ``(times, states)``.
    """
    t = traj.t
    times = np.asarray(times, dtype=float)
    keep = (times >= t[0]) & (times <= t[-1])
    times = times[keep]
    idx = np.clip(np.searchsorted(t, times, side="right") - 1, 0, len(t) - 2)
    out = np.empty((len(times), traj.y.shape[1]))
    for j, (ti, k) in enumerate(zip(times, idx)):
        s0, s1 = traj.s[k], traj.s[k + 1]
        tau = _invert_time(s0, s1, t[k], t[k + 1], traj.dy[k, -1], traj.dy[k + 1, -1], ti)
        out[j] = hermite(s0, s1, traj.y[k], traj.y[k + 1], traj.dy[k], traj.dy[k + 1], tau)
        out[j, -1] = ti
    return times, out


def integrate_pair(scenario: Scenario) -> PairResult:
    """Run the direct and the regularized system from equivalent initial data and compare.

    The regularized leg is resampled onto the direct leg's time grid and
    mapped back (forward coordinate map, inverse velocity map, and for
    ``direct="damped"`` the inverse point transform).
    """
    from .transforms import PhaseState, autonomous_to_damp

    p = scenario.params
    auto_sys, damped_sys, reg_sys, _ = _systems_for(scenario.family)
    q0 = np.asarray(scenario.q0, dtype=float)
    v0 = np.asarray(scenario.v0, dtype=float)
    y_reg0, eps = regularize_initial_state(scenario.family, q0, v0, p)

    if scenario.direct == "damped":
        direct_sys = damped_sys
        start = autonomous_to_damp(PhaseState(q0, v0, 0.0), p)
        y_dir0 = np.concatenate((start.q, start.v))
    elif scenario.direct == "autonomous":
        direct_sys = auto_sys
        y_dir0 = np.concatenate((q0, v0))
    else:
        raise ValueError(f"direct must be 'autonomous' or 'damped', got {scenario.direct!r}")

    cfg = IntegratorConfig(
        rel_tol=scenario.tol, abs_tol=scenario.tol, t_end=scenario.t_end,
        h_init=1e-3, h_max=0.5, max_steps=scenario.max_steps,
    )
    direct = integrate(direct_sys, y_dir0, RhsContext(p), cfg)
    reg = integrate(reg_sys, y_reg0, RhsContext(p, energy_script_e=eps), cfg)

    times, states = resample_regularized(reg, direct.s)
    d_reg = coord_dim(reg_sys)
    d_dir = coord_dim(direct_sys)
    qm = np.empty((len(times), d_dir))
    vm = np.empty((len(times), d_dir))
    for j, (ti, st) in enumerate(zip(times, states)):
        x, xd = map_back(scenario.family, st[:d_reg], st[d_reg : 2 * d_reg], p)
        if direct_sys is damped_sys:
            ph = autonomous_to_damp(PhaseState(x, xd, ti), p)
            x, xd = ph.q, ph.v
        qm[j], vm[j] = x, xd
    mask = np.isin(direct.s, times)
    return PairResult(direct, reg, times, direct.q[mask], qm, direct.v[mask], vm, eps)
