"""Executable equivalence checks and the standard verification suite.

Each :class:`CheckSpec` names a check function, its scenario settings and a
tolerance. :func:`run_check` never raises: failures inside a check are
reported as errors in the entry.
"""

from __future__ import annotations

import json
import math
import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Callable, Iterable

import numpy as np

from . import algebra as alg
from . import conserved as cons
from . import transforms as tf
from .dynamics import RhsContext, SystemId, lagrangian_residual, rhs, state_dim
from .integrate import (
    IntegratorConfig,
    Method,
    Scenario,
    Status,
    hermite,
    integrate,
    integrate_pair,
    map_back,
    regularize_initial_state,
    resample_regularized,
)
from .transforms import Regularization, RegularizedState, SystemParams

DEFAULT_SEED = 0xC0FFEE


class CheckKind(str, Enum):
    ROUND_TRIP = "RoundTrip"
    CONSERVATION_DRIFT = "ConservationDrift"
    LIMIT_REDUCTION = "LimitReduction"
    COLLISION_PASSAGE = "CollisionPassage"
    ALGEBRAIC_IDENTITY = "AlgebraicIdentity"
    HAMILTONIAN_EQUIVALENCE = "HamiltonianEquivalence"
    BOHLIN_ENERGY = "BohlinEnergy"
    INTEGRATOR_ORDER = "IntegratorOrder"


@dataclass(frozen=True)
class CheckSpec:
    name: str
    kind: CheckKind
    check: str
    tolerance: float
    scenario: dict = field(default_factory=dict, hash=False)
    systems: tuple[SystemId, ...] = ()

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError(f"{self.name}: tolerance must be positive")


@dataclass
class ReportEntry:
    name: str
    kind: str
    measured: float | None
    tolerance: float
    passed: bool
    seconds: float
    detail: dict = field(default_factory=dict)
    error: str | None = None

    def as_dict(self) -> dict:
        out = {
            "name": self.name,
            "kind": self.kind,
            "measured": _json_float(self.measured),
            "tolerance": self.tolerance,
            "pass": self.passed,
            "seconds": self.seconds,
            "detail": {k: _json_value(v) for k, v in self.detail.items()},
        }
        if self.error is not None:
            out["error"] = self.error
        return out


def _json_float(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else str(x)


def _json_value(v):
    if isinstance(v, (float, np.floating)):
        return _json_float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (list, tuple)):
        return [_json_value(x) for x in v]
    if isinstance(v, Enum):
        return v.value
    return v


REPORT_SCHEMA = {
    "type": "array",
    "items": {
        "type": "object",
        "required": ["name", "kind", "measured", "tolerance", "pass", "seconds"],
        "properties": {
            "name": {"type": "string"},
            "kind": {"type": "string", "enum": [k.value for k in CheckKind]},
            "measured": {"type": ["number", "string", "null"]},
            "tolerance": {"type": "number", "exclusiveMinimum": 0},
            "pass": {"type": "boolean"},
            "seconds": {"type": "number", "minimum": 0},
            "detail": {"type": "object"},
            "error": {"type": "string"},
        },
    },
}


# --- helpers -------------------------------------------------------------------------------


def sample_vectors(rng: np.random.Generator, n: int, dim: int, lo: float = 1e-3, hi: float = 1e3) -> np.ndarray:
    """Random directions with log-uniform magnitudes in ``[lo, hi]``."""
    d = rng.normal(size=(n, dim))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    mags = np.exp(rng.uniform(math.log(lo), math.log(hi), size=(n, 1)))
    return d * mags


def kepler_orbit(q0, v0, mu: float, t: float) -> np.ndarray:
    """Analytic position on an undamped elliptic Kepler orbit at time ``t`` (f and g functions)."""
    q0 = np.asarray(q0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    r0 = float(np.linalg.norm(q0))
    a = 1.0 / (2.0 / r0 - float(v0 @ v0) / mu)
    if a <= 0:
        raise ValueError("kepler_orbit handles elliptic orbits only")
    n = math.sqrt(mu / a**3)
    sig = float(q0 @ v0) / math.sqrt(mu)
    sa = math.sqrt(a)
    m = n * t

    def kepler(de):
        return de + sig / sa * (1 - math.cos(de)) - (1 - r0 / a) * math.sin(de) - m

    de = m
    for _ in range(100):
        fval = kepler(de)
        deriv = 1 + sig / sa * math.sin(de) - (1 - r0 / a) * math.cos(de)
        step = fval / deriv
        de -= step
        if abs(step) < 1e-16 * max(1.0, abs(de)):
            break
    f = 1 - a / r0 * (1 - math.cos(de))
    g = t + (math.sin(de) - de) / n
    return f * q0 + g * v0


def characteristic_period(q0, v0, p: SystemParams, power_law: bool = False) -> float:
    """Kepler period of the undamped orbit, or the circular period at ``r0`` for power laws."""
    r0 = float(np.linalg.norm(q0))
    if power_law:
        a_exp = 2.0 * p.n_power / (p.n_power + 1)
        return 2 * math.pi * math.sqrt(r0 ** (a_exp + 2) / (a_exp * p.mu))
    v0 = np.asarray(v0, dtype=float)
    a = 1.0 / (2.0 / r0 - float(v0 @ v0) / p.mu)
    return 2 * math.pi * math.sqrt(a**3 / p.mu)


def _params(sc: dict) -> SystemParams:
    return SystemParams.from_mapping(sc.get("params", {}))


def _scenario(sc: dict) -> Scenario:
    return Scenario(
        family=sc["family"],
        params=_params(sc),
        q0=tuple(sc["q0"]),
        v0=tuple(sc["v0"]),
        t_end=sc.get("t_end", 20.0),
        tol=sc.get("tol", 1e-12),
        direct=sc.get("direct", "autonomous"),
    )


@lru_cache(maxsize=64)
def _cached_pair(scenario: Scenario):
    return integrate_pair(scenario)


@lru_cache(maxsize=64)
def _cached_regularized(family: str, params: SystemParams, q0: tuple, v0: tuple, t_end: float, tol: float):
    reg_sys = {"LC": SystemId.REGULARIZED_LC, "GenLC": SystemId.REGULARIZED_GEN_LC, "KS": SystemId.REGULARIZED_KS}[family]
    y0, eps = regularize_initial_state(family, q0, v0, params)
    ctx = RhsContext(params, energy_script_e=eps)
    traj = integrate(reg_sys, y0, ctx, IntegratorConfig(rel_tol=tol, abs_tol=tol, t_end=t_end))
    return traj, eps


def _regularized_states(traj) -> list[RegularizedState]:
    d = (traj.y.shape[1] - 1) // 2
    return [RegularizedState(y[:d], y[d : 2 * d], s, y[-1]) for s, y in zip(traj.s, traj.y)]


def _ks_fiber_direction(u: np.ndarray) -> np.ndarray:
    # tangent of the K-S fiber through u; the bilinear form is (J u) . du
    return np.array([-u[3], u[2], -u[1], u[0]])


def invert_along(family: str, positions, p: SystemParams, u_start=None) -> np.ndarray:
    """Invert a sequence of positions, picking at each sample the preimage closest to the previous one.

    LC and GenLC choose among the finitely many roots; K-S rotates along the
    fiber to the point nearest the previous preimage.
    """
    fam = Regularization(family)
    out = []
    prev = None if u_start is None else np.asarray(u_start, dtype=float)
    for x in np.asarray(positions, dtype=float):
        if fam is Regularization.LC:
            base = tf.lc_inverse(x, p.gamma)
            cands = [base, -base]
        elif fam is Regularization.GEN_LC:
            base = complex(*tf.gen_lc_inverse(x, p.n_power))
            n1 = p.n_power + 1
            cands = [np.array([(base * w).real, (base * w).imag])
                     for w in (np.exp(2j * math.pi * j / n1) for j in range(n1))]
        elif fam is Regularization.KS:
            base = tf.ks_inverse(x)
            if prev is None:
                cands = [base]
            else:
                jb = _ks_fiber_direction(base)
                phi = math.atan2(float(jb @ prev), float(base @ prev))
                cands = [math.cos(phi) * base + math.sin(phi) * jb]
        else:
            raise ValueError(f"no inverse map for {fam.value}")
        u = cands[0] if prev is None else min(cands, key=lambda c: float(np.linalg.norm(c - prev)))
        out.append(u)
        prev = u
    return np.array(out)


# --- algebraic identities -------------------------------------------------------------------


def _chk_lc_orthogonality(sc, rng):
    worst = 0.0
    for u in sample_vectors(rng, sc.get("samples", 1000), 2):
        a = alg.lc_matrix(u)
        r = float(u @ u)
        worst = max(worst, float(np.max(np.abs(a.T @ a - r * np.eye(2)))) / r)
    return worst, {}


def _chk_ks_orthogonality(sc, rng):
    worst = 0.0
    for u in sample_vectors(rng, sc.get("samples", 1000), 4):
        a = alg.ks_matrix(u)
        r = float(u @ u)
        worst = max(worst, float(np.max(np.abs(a.T @ a - r * np.eye(4)))) / r)
    return worst, {}


def _chk_uhat_scaling(sc, rng):
    worst = 0.0
    for u in sample_vectors(rng, sc.get("samples", 1000), 2):
        r2 = float(u @ u)
        for n in range(sc.get("max_n", 4) + 1):
            mat = alg.uhat_n(u, n)
            target = r2**n * np.eye(2)
            gap = max(np.max(np.abs(mat.T @ mat - target)), np.max(np.abs(mat @ mat.T - target)))
            worst = max(worst, float(gap) / r2**n)
    return worst, {}


def _chk_permutation_orthonormality(sc, rng):
    worst = 0.0
    for fam, dim in (("2D", 2), ("4D", 4)):
        idx = alg.permutation_indices(fam)
        for i in idx:
            pi = alg.permutation_matrix(fam, i)
            worst = max(worst, float(np.max(np.abs(pi.T @ pi - np.eye(dim)))))
        for u in sample_vectors(rng, sc.get("samples", 1000), dim):
            r = float(u @ u)
            cols = [alg.permutation_apply(fam, i, u) for i in idx]
            gram = np.array([[ci @ cj for cj in cols] for ci in cols])
            worst = max(worst, float(np.max(np.abs(gram - r * np.eye(len(idx))))) / r)
    return worst, {}


def _chk_permutation_commutation(sc, rng):
    p1, p2 = alg.permutation_matrix("2D", 1), alg.permutation_matrix("2D", 2)
    comm_2d = float(np.max(np.abs(p1 @ p2 - p2 @ p1)))
    pair = None
    for i in alg.permutation_indices("4D"):
        for j in alg.permutation_indices("4D"):
            a, b = alg.permutation_matrix("4D", i), alg.permutation_matrix("4D", j)
            c = float(np.max(np.abs(a @ b - b @ a)))
            if c > 0 and pair is None:
                pair = (i, j, c)
    detail = {"commutator_2d": comm_2d, "noncommuting_4d_pair": None if pair is None else [pair[0], pair[1]]}
    if pair is None:
        return math.inf, detail
    return comm_2d, detail


def _chk_ks_columns(sc, rng):
    worst = 0.0
    for u in sample_vectors(rng, sc.get("samples", 1000), 4):
        a = alg.ks_matrix(u)
        r = float(u @ u)
        for j in range(4):
            worst = max(worst, float(np.max(np.abs(a[:, j] - alg.permutation_apply("4D", j, u)))) / math.sqrt(r))
    return worst, {}


def _chk_ks_quaternion(sc, rng):
    worst = 0.0
    for u in sample_vectors(rng, sc.get("samples", 1000), 4):
        prod = np.array(alg.quat_mul(u, alg.quat_star(u)))
        x = tf.ks_forward(u)
        r = float(u @ u)
        worst = max(worst, float(np.max(np.abs(prod[:3] - x))) / r, abs(prod[3]) / r)
        worst = max(worst, abs(float(np.linalg.norm(x)) - r) / r)
    return worst, {}


def _chk_uhat_power(sc, rng):
    worst = 0.0
    for u in sample_vectors(rng, sc.get("samples", 1000), 2):
        uc = complex(u[0], u[1])
        for n in range(sc.get("max_n", 4) + 1):
            z = tf.gen_lc_forward(u, n)
            ref = uc ** (n + 1)
            worst = max(worst, abs(complex(z[0], z[1]) - ref) / abs(ref))
    return worst, {}


def _chk_inverse_roundtrips(sc, rng):
    worst = 0.0
    for z in sample_vectors(rng, sc.get("samples", 1000), 2):
        rz = float(np.linalg.norm(z))
        worst = max(worst, float(np.linalg.norm(tf.lc_forward(tf.lc_inverse(z, 2.0), 2.0) - z)) / rz)
        for n in range(4):
            worst = max(worst, float(np.linalg.norm(tf.gen_lc_forward(tf.gen_lc_inverse(z, n), n) - z)) / rz)
    for x in sample_vectors(rng, sc.get("samples", 1000), 3):
        rx = float(np.linalg.norm(x))
        worst = max(worst, float(np.linalg.norm(tf.ks_forward(tf.ks_inverse(x)) - x)) / rx)
    return worst, {}


def _chk_ks_velocity_bilinear(sc, rng):
    worst = 0.0
    us = sample_vectors(rng, sc.get("samples", 1000), 4, 1e-1, 1e1)
    xds = sample_vectors(rng, len(us), 3, 1e-1, 1e1)
    for u, xd in zip(us, xds):
        up = tf.ks_velocity_map(u, xd)
        scale = float(np.linalg.norm(u) * np.linalg.norm(up))
        worst = max(worst, abs(tf.bilinear_constraint(u, up)) / scale)
        # velocity inverse recovers Xdot
        worst = max(worst, float(np.linalg.norm(tf.ks_velocity_inverse(u, up) - xd)) / float(np.linalg.norm(xd)))
    return worst, {}


def _random_state(rng, sys: SystemId, p: SystemParams) -> np.ndarray:
    y = rng.uniform(-1.5, 1.5, size=state_dim(sys))
    return y


def _chk_lagrangian(sc, rng):
    """Euler-Lagrange residual of each Lagrangian at exact vector-field accelerations."""
    p = _params(sc)
    worst = 0.0
    per = {}
    for sys in SystemId:
        ctx = RhsContext(p.with_(n_power=2) if "POWER" in sys.name or sys is SystemId.REGULARIZED_GEN_LC else p,
                         energy_script_e=0.7, kepler_energy=0.9)
        d = (state_dim(sys)) // 2
        w = 0.0
        for _ in range(sc.get("samples", 20)):
            y = _random_state(rng, sys, ctx.params)
            s = float(rng.uniform(0, 2))
            dy = rhs(sys, s, y, ctx)
            acc = dy[d : 2 * d]
            res = lagrangian_residual(sys, s, y[:d], y[d : 2 * d], acc, ctx)
            scale = ctx.params.m * max(1.0, float(np.linalg.norm(acc))) * math.exp(ctx.params.lam * s)
            w = max(w, res / scale)
        per[sys.value] = w
        worst = max(worst, w)
    return worst, {"per_system": per}


# --- round trips ------------------------------------------------------------------------------


def _pair_detail(res) -> dict:
    return {
        "direct_status": res.direct.status.value,
        "regularized_status": res.regularized.status.value,
        "compared_samples": int(len(res.t)),
        "max_velocity_error": res.max_velocity_error,
        "script_e": res.script_e,
    }


def _chk_roundtrip(sc, rng):
    res = _cached_pair(_scenario(sc))
    detail = _pair_detail(res)
    ok = res.direct.status is Status.COMPLETED and res.regularized.status is Status.COMPLETED
    return (res.max_position_error if ok else math.inf), detail


def _chk_kepler_ellipse(sc, rng):
    """Regularized orbit (lam = 0) mapped back against the closed-form Kepler ellipse."""
    p = _params(sc)
    fam = sc["family"]
    traj, eps = _cached_regularized(fam, p, tuple(sc["q0"]), tuple(sc["v0"]), sc.get("t_end", 20.0), sc.get("tol", 1e-12))
    d = (traj.y.shape[1] - 1) // 2
    worst = 0.0
    for y in traj.y:
        x, _ = map_back(fam, y[:d], y[d : 2 * d], p)
        worst = max(worst, float(np.linalg.norm(x - kepler_orbit(sc["q0"], sc["v0"], p.mu, y[-1]))))
    return worst, {"samples": len(traj), "status": traj.status.value}


# --- collision passage -----------------------------------------------------------------------


def _chk_collision(sc, rng):
    p = _params(sc)
    fam = sc["family"]
    q0, v0 = np.asarray(sc["q0"], float), np.asarray(sc["v0"], float)
    t_end = sc.get("t_end", 3.0)
    direct_sys = SystemId(sc["direct_system"])
    start = tf.autonomous_to_damp(tf.PhaseState(q0, v0), p)
    direct = integrate(direct_sys, np.concatenate((start.q, start.v)), RhsContext(p), IntegratorConfig(t_end=t_end))
    traj, eps = _cached_regularized(fam, p, tuple(sc["q0"]), tuple(sc["v0"]), t_end, 1e-12)
    d = (traj.y.shape[1] - 1) // 2
    fam_r = Regularization(fam)
    h = np.array([c.h_oscillator for c in traj.conserved])
    h_ref = cons.oscillator_hamiltonian_value(fam_r, p)
    drift = float(np.max(np.abs(h - h_ref))) / abs(h_ref)
    u_norm = float(np.max(np.linalg.norm(traj.y[:, :d], axis=1)))
    up_norm = float(np.max(np.linalg.norm(traj.y[:, d : 2 * d], axis=1)))
    r_min = float(np.min(np.sum(traj.y[:, :d] ** 2, axis=1)))
    bound = sc.get("bound", 100.0)
    detail = {
        "direct_status": direct.status.value,
        "direct_final_t": float(direct.s[-1]),
        "regularized_status": traj.status.value,
        "max_u": u_norm,
        "max_u_prime": up_norm,
        "min_r_regularized": r_min,
        "hamiltonian_reference": h_ref,
    }
    ok = (
        direct.status.failed
        and direct.s[-1] < t_end
        and traj.status is Status.COMPLETED
        and u_norm < bound
        and up_norm < bound
        and r_min < sc.get("passage_r", 1e-4)
    )
    return (drift if ok else math.inf), detail


# --- limits ----------------------------------------------------------------------------------


def _chk_genlc_vs_lc(sc, rng):
    p = _params(sc)
    p_lc = p.with_(c=0.25, gamma=1.0)
    p_gen = p.with_(n_power=1)
    worst = 0.0
    for _ in range(sc.get("samples", 1000)):
        y = np.concatenate((rng.uniform(-1.5, 1.5, 4), (0.0,)))
        eps = float(rng.uniform(-2, 2))
        a = rhs(SystemId.REGULARIZED_LC, 0.0, y, RhsContext(p_lc, energy_script_e=eps))
        b = rhs(SystemId.REGULARIZED_GEN_LC, 0.0, y, RhsContext(p_gen, energy_script_e=eps))
        worst = max(worst, float(np.max(np.abs(a - b))))
    return worst, {}


def _chk_sho_field(sc, rng):
    """At lam = 0 the regularized fields are linear oscillators."""
    p = _params(sc).with_(lam=0.0)
    fam = sc["family"]
    sys = SystemId.REGULARIZED_LC if fam == "LC" else SystemId.REGULARIZED_KS
    d = 2 if fam == "LC" else 4
    worst = 0.0
    for _ in range(sc.get("samples", 1000)):
        y = np.concatenate((rng.uniform(-1.5, 1.5, 2 * d), (0.0,)))
        eps = float(rng.uniform(0.05, 2))
        freq_sq = (p.m * eps) / (2 * p.m * p.c**2) if fam == "LC" else 8 * eps
        acc = rhs(sys, 0.0, y, RhsContext(p, energy_script_e=eps))[d : 2 * d]
        worst = max(worst, float(np.max(np.abs(acc + freq_sq * y[:d]))) / max(1.0, freq_sq * float(np.max(np.abs(y[:d])))))
    return worst, {}


def _chk_damped_limit(sc, rng):
    """Damped fields at lam = 0 equal the undamped Kepler / oscillator fields."""
    p = _params(sc).with_(lam=0.0)
    worst = 0.0
    for _ in range(sc.get("samples", 200)):
        s = float(rng.uniform(0, 5))
        for sys, dim in ((SystemId.DAMPED_KEPLER_2D, 2), (SystemId.DAMPED_KEPLER_3D, 3)):
            y = rng.uniform(-1.5, 1.5, 2 * dim)
            q = y[:dim]
            ref = -p.mu * q / float(np.linalg.norm(q)) ** 3
            acc = rhs(sys, s, y, RhsContext(p))[dim:]
            worst = max(worst, float(np.max(np.abs(acc - ref))) / float(np.max(np.abs(ref))))
        y = np.concatenate((rng.uniform(-1.5, 1.5, 4), (0.0,)))
        acc = rhs(SystemId.DAMPED_HO_2D, s, y, RhsContext(p))[2:4]
        worst = max(worst, float(np.max(np.abs(acc + p.omega**2 * y[:2]))))
    return worst, {}


# --- conservation ----------------------------------------------------------------------------


def _chk_conservation(sc, rng):
    p = _params(sc)
    sys = SystemId(sc["system"])
    q0, v0 = np.asarray(sc["q0"], float), np.asarray(sc["v0"], float)
    power = sys in (SystemId.AUTONOMOUS_POWER_LAW_2D, SystemId.DAMPED_POWER_LAW_2D)
    period = characteristic_period(q0, v0, p, power_law=power)
    t_end = sc.get("periods", 10) * period
    tol = sc.get("tol", 1e-12)
    if sys in (SystemId.DAMPED_KEPLER_2D, SystemId.DAMPED_KEPLER_3D, SystemId.DAMPED_POWER_LAW_2D):
        st = tf.autonomous_to_damp(tf.PhaseState(q0, v0), p)
        q0, v0 = st.q, st.v
    traj = integrate(sys, np.concatenate((q0, v0)), RhsContext(p), IntegratorConfig(rel_tol=tol, abs_tol=tol, t_end=t_end))
    cs = traj.conserved
    e = np.array([c.script_e for c in cs])
    ang = np.array([np.atleast_1d(c.ang_mom) for c in cs], dtype=float)
    e_drift = float(np.max(np.abs(e - e[0]))) / abs(e[0])
    l_drift = float(np.max(np.linalg.norm(ang - ang[0], axis=1))) / float(np.linalg.norm(ang[0]))
    detail = {"t_end": t_end, "samples": len(traj), "status": traj.status.value,
              "script_e_relative_drift": e_drift, "ang_mom_relative_drift": l_drift}
    if traj.status is not Status.COMPLETED:
        return math.inf, detail
    return max(e_drift, l_drift), detail


def _chk_bilinear_drift(sc, rng):
    p = _params(sc)
    traj, eps = _cached_regularized("KS", p, tuple(sc["q0"]), tuple(sc["v0"]), sc.get("t_end", 20.0), 1e-12)
    bl = np.array([c.bilinear for c in traj.conserved])
    h = np.array([c.h_oscillator for c in traj.conserved])
    detail = {"initial_bilinear": float(bl[0]), "h_relative_drift": float(np.max(np.abs(h - h[0])) / abs(h[0]))}
    return float(np.max(np.abs(bl - bl[0]))), detail


def _chk_escript_cross(sc, rng):
    """Energy from (U, U') against the energy of the mapped-back autonomous state, per sample."""
    p = _params(sc)
    fam = sc["family"]
    traj, eps = _cached_regularized(fam, p, tuple(sc["q0"]), tuple(sc["v0"]), sc.get("t_end", 20.0), 1e-12)
    family = "power_law" if fam == "GenLC" else "kepler"
    worst = 0.0
    drift = 0.0
    for st in _regularized_states(traj):
        e_u = cons.script_e_in_regularized_coords(fam, st, p)
        x, xd = map_back(fam, st.u, st.u_prime, p)
        e_x = cons.script_e(family, tf.PhaseState(x, xd, st.t), p)
        worst = max(worst, abs(e_u - e_x))
        drift = max(drift, abs(e_u - eps) / abs(eps))
    return worst, {"script_e": eps, "script_e_relative_drift": drift, "samples": len(traj)}


def _chk_branch_continuity(sc, rng):
    """Continuous inversion of the mapped-back orbit recovers the regularized coordinates."""
    p = _params(sc)
    fam = sc["family"]
    traj, _ = _cached_regularized(fam, p, tuple(sc["q0"]), tuple(sc["v0"]), sc.get("t_end", 20.0), 1e-12)
    d = (traj.y.shape[1] - 1) // 2
    us = traj.y[:, :d]
    xs = [map_back(fam, y[:d], y[d : 2 * d], p)[0] for y in traj.y]
    inv = invert_along(fam, xs, p, u_start=us[0])
    scale = np.linalg.norm(us, axis=1)
    gap = float(np.max(np.linalg.norm(inv - us, axis=1) / scale))
    fwd = {"LC": lambda u: tf.lc_forward(u, p.gamma), "GenLC": lambda u: tf.gen_lc_forward(u, p.n_power),
           "KS": tf.ks_forward}[fam]
    forward = max(float(np.linalg.norm(fwd(u) - x)) / float(np.linalg.norm(x)) for u, x in zip(inv, xs))
    jumps = float(np.max(np.linalg.norm(np.diff(inv, axis=0), axis=1)))
    return max(gap, forward), {"max_gap_to_trajectory": gap, "max_forward_residual": forward, "max_step_jump": jumps}


# --- Hamiltonian equivalence -----------------------------------------------------------------


def _homogeneous_report(sc):
    p = _params(sc)
    traj, eps = _cached_regularized("KS", p, tuple(sc["q0"]), tuple(sc["v0"]), sc.get("t_end", 20.0), 1e-12)
    return cons.homogeneous_equivalence_check(_regularized_states(traj), p, eps), p


def _chk_sextic_constancy(sc, rng):
    rep, _ = _homogeneous_report(sc)
    return rep["sextic_h_relative_drift"], rep


def _chk_homogeneous_4k(sc, rng):
    rep, p = _homogeneous_report(sc)
    scale = 4 * abs(p.k)
    measured = max(
        rep["minus_p_s_relative_error"],
        rep["max_identity_gap"] / scale,
        rep["max_homogeneous_gap"] / scale,
        rep["max_abs_homogeneous_3d"] / scale,
    )
    return measured, rep


# --- Bohlin chain ----------------------------------------------------------------------------


@lru_cache(maxsize=8)
def _bohlin_run(params: SystemParams, q0: tuple, v0: tuple, tau_end: float):
    ctx = RhsContext(params)
    y0 = np.array([*q0, *v0, 0.0])
    cfg = IntegratorConfig(t_end=tau_end, stop_on="native")
    return integrate(SystemId.DAMPED_HO_2D, y0, ctx, cfg)


def _shifted_samples(traj, p):
    """Shifted-oscillator states ``(x, x', x'')`` from damped-oscillator samples."""
    out = []
    for tau, y, dy in zip(traj.s, traj.y, traj.dy):
        g = math.exp(0.5 * p.lam * tau)
        q, qp, qpp = y[:2], y[2:4], dy[2:4]
        x = q * g
        xp = (qp + 0.5 * p.lam * q) * g
        xpp = (qpp + p.lam * qp + 0.25 * p.lam**2 * q) * g
        out.append((x, xp, xpp))
    return out


def _bohlin_setup(sc):
    p = _params(sc)
    traj = _bohlin_run(p, tuple(sc["q0"]), tuple(sc["v0"]), sc.get("tau_end", 10.0))
    samples = _shifted_samples(traj, p)
    x0, xp0, _ = samples[0]
    energies = cons.appendix_energies(tf.PhaseState(x0, xp0), p)
    return p, traj, samples, energies


def _chk_bohlin_energy(sc, rng):
    p, traj, samples, en = _bohlin_setup(sc)
    worst = 0.0
    e_drift = 0.0
    for x, xp, _ in samples:
        e_k = cons.image_kepler_energy(x, xp, en.k_identified, p.m)
        worst = max(worst, abs(e_k - en.e_kepler_predicted))
        e_drift = max(e_drift, abs(cons.appendix_energies(tf.PhaseState(x, xp), p).e_shifted - en.e_shifted))
    detail = {"e_kepler_predicted": en.e_kepler_predicted, "e_shifted": en.e_shifted,
              "e_shifted_drift": e_drift, "samples": len(samples), "status": traj.status.value}
    return worst, detail


def _chk_bohlin_strength(sc, rng):
    """Kepler strength read off the image acceleration, ``k = -m Zddot |Z|^3 / Z``, against ``E/4``."""
    p, traj, samples, en = _bohlin_setup(sc)
    worst = 0.0
    for x, xp, xpp in samples:
        w, wp, wpp = complex(*x), complex(*xp), complex(*xpp)
        wb, wpb = w.conjugate(), wp.conjugate()
        zdd = (wpp / (2 * wb) - wp * wpb / (2 * wb * wb)) / (4 * abs(w) ** 2)
        z = w * w
        k_meas = -p.m * zdd * abs(z) ** 3 / z
        worst = max(worst, abs(k_meas - en.k_identified), abs(k_meas.imag))
    return worst, {"k_identified": en.k_identified, "e_shifted": en.e_shifted}


def _chk_bohlin_orbit(sc, rng):
    """Direct Kepler integration of the image against the mapped oscillator orbit."""
    p, traj, samples, en = _bohlin_setup(sc)
    x0, xp0, _ = samples[0]
    z0 = tf.bohlin_forward(x0)
    zd0 = tf.bohlin_velocity_map(x0, xp0)
    t_end = float(traj.y[-1, -1])
    ctx_k = RhsContext(p.with_(lam=0.0), kepler_energy=en.e_shifted)
    kep = integrate(SystemId.BOHLIN_KEPLER_2D, np.concatenate((z0, zd0)), ctx_k, IntegratorConfig(t_end=t_end))
    # the undamped shifted oscillator, started from the mapped state, must track the mapped damped one
    sho = integrate(SystemId.SHIFTED_HO_2D, np.array([*x0, *xp0, 0.0]), RhsContext(p),
                    IntegratorConfig(t_end=float(traj.s[-1]), stop_on="native"))
    # a Trajectory of shifted states on the damped run's tau grid, for Hermite resampling in t
    shifted_y = np.array([[*x, *xp, y[-1]] for (x, xp, _), y in zip(samples, traj.y)])
    shifted_dy = np.array([[*xp, *xpp, dy[-1]] for (x, xp, xpp), dy in zip(samples, traj.dy)])
    from .integrate import Trajectory

    shifted = Trajectory(SystemId.SHIFTED_HO_2D, traj.s, shifted_y, shifted_dy, traj.status, RhsContext(p))
    times, states = resample_regularized(shifted, kep.s)
    mask = np.isin(kep.s, times)
    z_map = np.array([tf.bohlin_forward(st[:2]) for st in states])
    orbit_gap = float(np.max(np.linalg.norm(kep.q[mask] - z_map, axis=1)))
    idx = np.clip(np.searchsorted(sho.s, traj.s, side="right") - 1, 0, len(sho.s) - 2)
    sho_gap = 0.0
    for tau, y_sh, k in zip(traj.s, shifted_y, idx):
        est = hermite(sho.s[k], sho.s[k + 1], sho.y[k], sho.y[k + 1], sho.dy[k], sho.dy[k + 1], tau)
        sho_gap = max(sho_gap, float(np.max(np.abs(est[:4] - y_sh[:4]))))
    detail = {"kepler_status": kep.status.value, "compared_samples": int(mask.sum()),
              "shifted_oscillator_gap": sho_gap, "t_end": t_end}
    if kep.status is not Status.COMPLETED:
        return math.inf, detail
    return max(orbit_gap, sho_gap), detail


# --- integrator order ------------------------------------------------------------------------


def _chk_rk4_order(sc, rng):
    eps = sc.get("script_e", 0.125)
    ctx = RhsContext(SystemParams(lam=0.0), energy_script_e=eps)
    u0 = np.array([1.0, 0.0, 0.0, 0.0])
    omega = math.sqrt(8 * eps)
    # a generic end point: at multiples of the period the phase error cancels from U alone
    tau_end = sc.get("tau_end", 5.0)
    exact = lambda tau: np.concatenate((math.cos(omega * tau) * u0, -omega * math.sin(omega * tau) * u0))
    errs = []
    for n in sc.get("steps", (40, 80)):
        h = tau_end / n
        cfg = IntegratorConfig(method=Method.RK4, h_init=h, h_min=h / 2, h_max=h, t_end=tau_end, stop_on="native")
        tr = integrate(SystemId.REGULARIZED_KS, np.concatenate((u0, np.zeros(4), (0.0,))), ctx, cfg)
        errs.append(float(np.linalg.norm(tr.y[-1, :8] - exact(tau_end))))
    ratio = errs[0] / errs[1]
    return abs(ratio - 16.0), {"errors": errs, "ratio": ratio}


_CHECKS: dict[str, Callable] = {
    "lc_orthogonality": _chk_lc_orthogonality,
    "ks_orthogonality": _chk_ks_orthogonality,
    "uhat_scaling": _chk_uhat_scaling,
    "permutation_orthonormality": _chk_permutation_orthonormality,
    "permutation_commutation": _chk_permutation_commutation,
    "ks_columns": _chk_ks_columns,
    "ks_quaternion": _chk_ks_quaternion,
    "uhat_power": _chk_uhat_power,
    "inverse_roundtrips": _chk_inverse_roundtrips,
    "ks_velocity_bilinear": _chk_ks_velocity_bilinear,
    "lagrangian": _chk_lagrangian,
    "roundtrip": _chk_roundtrip,
    "kepler_ellipse": _chk_kepler_ellipse,
    "collision": _chk_collision,
    "genlc_vs_lc": _chk_genlc_vs_lc,
    "sho_field": _chk_sho_field,
    "damped_limit": _chk_damped_limit,
    "conservation": _chk_conservation,
    "bilinear_drift": _chk_bilinear_drift,
    "escript_cross": _chk_escript_cross,
    "branch_continuity": _chk_branch_continuity,
    "sextic_constancy": _chk_sextic_constancy,
    "homogeneous_4k": _chk_homogeneous_4k,
    "bohlin_energy": _chk_bohlin_energy,
    "bohlin_strength": _chk_bohlin_strength,
    "bohlin_orbit": _chk_bohlin_orbit,
    "rk4_order": _chk_rk4_order,
}


def run_check(spec: CheckSpec, seed: int = DEFAULT_SEED) -> ReportEntry:
    """Execute one check; exceptions become an errored (failed) entry."""
    rng = np.random.default_rng([seed, zlib.crc32(spec.name.encode())])
    start = time.perf_counter()
    try:
        fn = _CHECKS[spec.check]
        measured, detail = fn(spec.scenario, rng)
        measured = float(measured)
        passed = bool(math.isfinite(measured) and measured <= spec.tolerance)
        error = None
    except Exception as exc:  # reported, never propagated
        measured, detail, passed = None, {}, False
        error = f"{type(exc).__name__}: {exc}"
    return ReportEntry(
        spec.name, spec.kind.value, measured, spec.tolerance, passed,
        time.perf_counter() - start, detail, error,
    )


# --- the standard suite ----------------------------------------------------------------------

ELLIPTIC_2D = {"q0": [1.0, 0.0], "v0": [0.0, 0.8]}
ELLIPTIC_3D = {"q0": [0.8, 0.4, 0.3], "v0": [-0.3, 0.7, 0.35]}
RADIAL_2D = {"q0": [1.0, 0.0], "v0": [0.0, 0.0]}
RADIAL_3D = {"q0": [0.6, -0.5, 0.4], "v0": [0.0, 0.0, 0.0]}
UNIT = {"m": 1.0, "k": 1.0}

S = SystemId
K = CheckKind


def standard_suite() -> list[CheckSpec]:
    suite: list[CheckSpec] = []
    add = suite.append
    ident = {"samples": 1000}
    add(CheckSpec("algebra.lc_matrix_orthogonality", K.ALGEBRAIC_IDENTITY, "lc_orthogonality", 1e-13, ident))
    add(CheckSpec("algebra.ks_matrix_orthogonality", K.ALGEBRAIC_IDENTITY, "ks_orthogonality", 1e-13, ident))
    add(CheckSpec("algebra.uhat_scaling", K.ALGEBRAIC_IDENTITY, "uhat_scaling", 1e-13, {**ident, "max_n": 4}))
    add(CheckSpec("algebra.permutation_orthonormality", K.ALGEBRAIC_IDENTITY, "permutation_orthonormality", 1e-13, ident))
    add(CheckSpec("algebra.permutation_commutation", K.ALGEBRAIC_IDENTITY, "permutation_commutation", 1e-15, {}))
    add(CheckSpec("algebra.ks_columns_are_permutations", K.ALGEBRAIC_IDENTITY, "ks_columns", 1e-13, ident))
    add(CheckSpec("algebra.ks_forward_is_quaternion_product", K.ALGEBRAIC_IDENTITY, "ks_quaternion", 1e-13, ident))
    add(CheckSpec("algebra.uhat_is_complex_power", K.ALGEBRAIC_IDENTITY, "uhat_power", 1e-13, {**ident, "max_n": 4}))
    add(CheckSpec("transforms.inverse_roundtrips", K.ROUND_TRIP, "inverse_roundtrips", 1e-13, ident))
    add(CheckSpec("transforms.ks_velocity_bilinear", K.ALGEBRAIC_IDENTITY, "ks_velocity_bilinear", 1e-13, ident))
    add(CheckSpec("dynamics.lagrangian_residuals", K.ALGEBRAIC_IDENTITY, "lagrangian", 1e-10,
                  {"params": {**UNIT, "lambda": 0.3, "omega": 1.3}, "samples": 10}, tuple(SystemId)))

    for lam in (0.0, 0.01, 0.1):
        add(CheckSpec(f"roundtrip.lc.lambda={lam}", K.ROUND_TRIP, "roundtrip", 1e-6,
                      {"family": "LC", "params": {**UNIT, "lambda": lam, "c": 0.25}, **ELLIPTIC_2D},
                      (S.AUTONOMOUS_KEPLER_2D, S.REGULARIZED_LC)))
    for n in (0, 1, 2, 3):
        add(CheckSpec(f"roundtrip.genlc.N={n}", K.ROUND_TRIP, "roundtrip", 1e-6,
                      {"family": "GenLC", "params": {**UNIT, "lambda": 0.01, "n_power": n}, **ELLIPTIC_2D},
                      (S.AUTONOMOUS_POWER_LAW_2D, S.REGULARIZED_GEN_LC)))
    add(CheckSpec("roundtrip.ks.lambda=0.01", K.ROUND_TRIP, "roundtrip", 1e-6,
                  {"family": "KS", "params": {**UNIT, "lambda": 0.01}, **ELLIPTIC_3D},
                  (S.AUTONOMOUS_KEPLER_3D, S.REGULARIZED_KS)))
    add(CheckSpec("roundtrip.lc.damped_original", K.ROUND_TRIP, "roundtrip", 1e-6,
                  {"family": "LC", "params": {**UNIT, "lambda": 0.1}, "direct": "damped", **ELLIPTIC_2D},
                  (S.DAMPED_KEPLER_2D, S.REGULARIZED_LC)))
    add(CheckSpec("roundtrip.genlc.damped_original.N=2", K.ROUND_TRIP, "roundtrip", 1e-6,
                  {"family": "GenLC", "params": {**UNIT, "lambda": 0.1, "n_power": 2}, "direct": "damped", **ELLIPTIC_2D},
                  (S.DAMPED_POWER_LAW_2D, S.REGULARIZED_GEN_LC)))
    add(CheckSpec("roundtrip.ks.damped_original", K.ROUND_TRIP, "roundtrip", 1e-6,
                  {"family": "KS", "params": {**UNIT, "lambda": 0.1}, "direct": "damped", **ELLIPTIC_3D},
                  (S.DAMPED_KEPLER_3D, S.REGULARIZED_KS)))

    add(CheckSpec("collision.lc_2d", K.COLLISION_PASSAGE, "collision", 1e-6,
                  {"family": "LC", "params": {**UNIT, "lambda": 0.01}, "direct_system": "DampedKepler2D", **RADIAL_2D},
                  (S.DAMPED_KEPLER_2D, S.REGULARIZED_LC)))
    add(CheckSpec("collision.ks_3d", K.COLLISION_PASSAGE, "collision", 1e-6,
                  {"family": "KS", "params": {**UNIT, "lambda": 0.01}, "direct_system": "DampedKepler3D", **RADIAL_3D},
                  (S.DAMPED_KEPLER_3D, S.REGULARIZED_KS)))

    add(CheckSpec("limit.genlc_n1_equals_lc", K.LIMIT_REDUCTION, "genlc_vs_lc", 1e-12,
                  {"params": {**UNIT, "lambda": 0.1}, "samples": 1000}, (S.REGULARIZED_GEN_LC, S.REGULARIZED_LC)))
    add(CheckSpec("limit.lc_field_is_sho", K.LIMIT_REDUCTION, "sho_field", 1e-13,
                  {"family": "LC", "params": {**UNIT, "c": 0.25}}, (S.REGULARIZED_LC,)))
    add(CheckSpec("limit.ks_field_is_sho", K.LIMIT_REDUCTION, "sho_field", 1e-13,
                  {"family": "KS", "params": UNIT}, (S.REGULARIZED_KS,)))
    add(CheckSpec("limit.damped_fields_undamped", K.LIMIT_REDUCTION, "damped_limit", 1e-13,
                  {"params": UNIT}, (S.DAMPED_KEPLER_2D, S.DAMPED_KEPLER_3D, S.DAMPED_HO_2D)))
    add(CheckSpec("limit.lc_kepler_ellipse", K.LIMIT_REDUCTION, "kepler_ellipse", 1e-6,
                  {"family": "LC", "params": {**UNIT, "lambda": 0.0}, **ELLIPTIC_2D}, (S.REGULARIZED_LC,)))
    add(CheckSpec("limit.ks_kepler_ellipse", K.LIMIT_REDUCTION, "kepler_ellipse", 1e-6,
                  {"family": "KS", "params": {**UNIT, "lambda": 0.0}, **ELLIPTIC_3D}, (S.REGULARIZED_KS,)))

    for name, sys, ic, extra in (
        ("kepler_2d", S.AUTONOMOUS_KEPLER_2D, ELLIPTIC_2D, {}),
        ("power_law_2d.N=1", S.AUTONOMOUS_POWER_LAW_2D, ELLIPTIC_2D, {"n_power": 1}),
        ("power_law_2d.N=2", S.AUTONOMOUS_POWER_LAW_2D, ELLIPTIC_2D, {"n_power": 2}),
        ("power_law_2d.N=3", S.AUTONOMOUS_POWER_LAW_2D, ELLIPTIC_2D, {"n_power": 3}),
        ("kepler_3d", S.AUTONOMOUS_KEPLER_3D, ELLIPTIC_3D, {}),
        ("damped_kepler_2d", S.DAMPED_KEPLER_2D, ELLIPTIC_2D, {}),
    ):
        add(CheckSpec(f"conservation.{name}", K.CONSERVATION_DRIFT, "conservation", 1e-9,
                      {"system": sys.value, "params": {**UNIT, "lambda": 0.01, **extra}, "periods": 10, "tol": 1e-13, **ic}, (sys,)))
    add(CheckSpec("conservation.ks_bilinear", K.CONSERVATION_DRIFT, "bilinear_drift", 1e-10,
                  {"params": {**UNIT, "lambda": 0.01}, **ELLIPTIC_3D}, (S.REGULARIZED_KS,)))
    for fam, sys, ic, extra in (
        ("LC", S.REGULARIZED_LC, ELLIPTIC_2D, {}),
        ("GenLC", S.REGULARIZED_GEN_LC, ELLIPTIC_2D, {"n_power": 2}),
        ("KS", S.REGULARIZED_KS, ELLIPTIC_3D, {}),
    ):
        add(CheckSpec(f"conservation.script_e_cross_coords.{fam}", K.CONSERVATION_DRIFT, "escript_cross", 1e-10,
                      {"family": fam, "params": {**UNIT, "lambda": 0.01, **extra}, **ic}, (sys,)))

    for fam, sys, ic, extra in (
        ("LC", S.REGULARIZED_LC, ELLIPTIC_2D, {}),
        ("GenLC", S.REGULARIZED_GEN_LC, ELLIPTIC_2D, {"n_power": 2}),
        ("KS", S.REGULARIZED_KS, ELLIPTIC_3D, {}),
    ):
        add(CheckSpec(f"transforms.branch_continuity.{fam}", K.ROUND_TRIP, "branch_continuity", 1e-12,
                      {"family": fam, "params": {**UNIT, "lambda": 0.01, **extra}, **ic}, (sys,)))

    ks_ham = {"params": {**UNIT, "lambda": 0.01}, **ELLIPTIC_3D}
    add(CheckSpec("hamiltonian.sextic_constancy", K.HAMILTONIAN_EQUIVALENCE, "sextic_constancy", 1e-9, ks_ham, (S.REGULARIZED_KS,)))
    add(CheckSpec("hamiltonian.homogeneous_4k", K.HAMILTONIAN_EQUIVALENCE, "homogeneous_4k", 1e-8, ks_ham, (S.REGULARIZED_KS,)))

    bohlin = {"params": {"m": 1.0, "omega": 1.0, "lambda": 0.2}, "q0": [1.0, 0.0], "v0": [0.0, 0.8], "tau_end": 10.0}
    add(CheckSpec("bohlin.kepler_energy", K.BOHLIN_ENERGY, "bohlin_energy", 1e-8, bohlin, (S.DAMPED_HO_2D,)))
    add(CheckSpec("bohlin.strength_identification", K.BOHLIN_ENERGY, "bohlin_strength", 1e-8, bohlin, (S.DAMPED_HO_2D,)))
    add(CheckSpec("bohlin.kepler_orbit", K.BOHLIN_ENERGY, "bohlin_orbit", 1e-6, bohlin,
                  (S.DAMPED_HO_2D, S.SHIFTED_HO_2D, S.BOHLIN_KEPLER_2D)))

    add(CheckSpec("integrator.rk4_order", K.INTEGRATOR_ORDER, "rk4_order", 4.0,
                  {"script_e": 0.125, "steps": [40, 80]}, (S.REGULARIZED_KS,)))
    return suite


def select(suite: Iterable[CheckSpec], pattern: str | None) -> list[CheckSpec]:
    """Checks whose name contains ``pattern`` (all when ``pattern`` is empty)."""
    suite = list(suite)
    if not pattern:
        return suite
    return [c for c in suite if pattern in c.name]


def run_suite(specs: Iterable[CheckSpec], seed: int = DEFAULT_SEED, threads: int = 1) -> list[ReportEntry]:
    specs = list(specs)
    if threads <= 1:
        return [run_check(s, seed) for s in specs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda s: run_check(s, seed), specs))


def report_json(entries: Iterable[ReportEntry]) -> str:
    return json.dumps([e.as_dict() for e in entries], indent=2)
