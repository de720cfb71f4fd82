"""Vector fields for the damped, autonomous and regularized systems.

Every state is a flat array ``[q | v]`` for direct systems (independent
variable: physical time ``t``) and ``[u | u' | t]`` for regularized systems
(independent variable: fictitious time ``tau``, physical time co-integrated
as the last component).

All energies ``energy_script_e`` are per unit mass, with bound orbits
having a positive value (``-E/m``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Callable

import numpy as np

from .transforms import Regularization, SingularInputError, SystemParams

COLLISION_R = 1e-10


class CollisionError(SingularInputError):
    """The separation of a singular system dropped below ``COLLISION_R``."""


class SystemId(str, Enum):
    DAMPED_KEPLER_2D = "DampedKepler2D"
    AUTONOMOUS_KEPLER_2D = "AutonomousKepler2D"
    DAMPED_POWER_LAW_2D = "DampedPowerLaw2D"
    AUTONOMOUS_POWER_LAW_2D = "AutonomousPowerLaw2D"
    REGULARIZED_LC = "RegularizedLC"
    REGULARIZED_GEN_LC = "RegularizedGenLC"
    DAMPED_KEPLER_3D = "DampedKepler3D"
    AUTONOMOUS_KEPLER_3D = "AutonomousKepler3D"
    REGULARIZED_KS = "RegularizedKS"
    DAMPED_HO_2D = "DampedHO2D"
    SHIFTED_HO_2D = "ShiftedHO2D"
    BOHLIN_KEPLER_2D = "BohlinKepler2D"


@dataclass(frozen=True)
class _Meta:
    dim: int
    regularized: bool  # independent variable is tau, physical t appended to the state
    explicit_time: bool
    singular: bool
    needs: str | None = None


_META = {
    SystemId.DAMPED_KEPLER_2D: _Meta(2, False, True, True),
    SystemId.AUTONOMOUS_KEPLER_2D: _Meta(2, False, False, True),
    SystemId.DAMPED_POWER_LAW_2D: _Meta(2, False, True, True),
    SystemId.AUTONOMOUS_POWER_LAW_2D: _Meta(2, False, False, True),
    SystemId.REGULARIZED_LC: _Meta(2, True, False, False, "energy_script_e"),
    SystemId.REGULARIZED_GEN_LC: _Meta(2, True, False, False, "energy_script_e"),
    SystemId.DAMPED_KEPLER_3D: _Meta(3, False, True, True),
    SystemId.AUTONOMOUS_KEPLER_3D: _Meta(3, False, False, True),
    SystemId.REGULARIZED_KS: _Meta(4, True, False, False, "energy_script_e"),
    SystemId.DAMPED_HO_2D: _Meta(2, True, True, False),
    SystemId.SHIFTED_HO_2D: _Meta(2, True, False, False),
    SystemId.BOHLIN_KEPLER_2D: _Meta(2, False, False, True, "kepler_energy"),
}

REGULARIZATION_OF = {
    SystemId.REGULARIZED_LC: Regularization.LC,
    SystemId.REGULARIZED_GEN_LC: Regularization.GEN_LC,
    SystemId.REGULARIZED_KS: Regularization.KS,
    SystemId.DAMPED_HO_2D: Regularization.BOHLIN,
    SystemId.SHIFTED_HO_2D: Regularization.BOHLIN,
}


def coord_dim(sys: SystemId) -> int:
    return _META[SystemId(sys)].dim


def is_regularized(sys: SystemId) -> bool:
    return _META[SystemId(sys)].regularized


def is_singular(sys: SystemId, params: SystemParams | None = None) -> bool:
    sys = SystemId(sys)
    if sys in (SystemId.DAMPED_POWER_LAW_2D, SystemId.AUTONOMOUS_POWER_LAW_2D):
        # N = 0 is a constant potential: no force, nothing singular
        return params is None or params.n_power > 0
    return _META[sys].singular


def has_explicit_time(sys: SystemId) -> bool:
    return _META[SystemId(sys)].explicit_time


def state_dim(sys: SystemId) -> int:
    meta = _META[SystemId(sys)]
    return 2 * meta.dim + (1 if meta.regularized else 0)


@dataclass(frozen=True)
class RhsContext:
    """Parameters plus the fixed energy labels some vector fields need.

    ``energy_script_e`` is the conserved per-mass energy of the autonomous
    system (regularized tags). ``kepler_energy`` is the conserved energy of
    the shifted oscillator; it sets the Kepler strength ``k = E/4`` of the
    Bohlin image.
    """

    params: SystemParams
    energy_script_e: float | None = None
    kepler_energy: float | None = None

    def require(self, sys: SystemId) -> None:
        need = _META[SystemId(sys)].needs
        if need and getattr(self, need) is None:
            raise ValueError(f"{SystemId(sys).value} needs RhsContext.{need}")


def _split(sys: SystemId, y: np.ndarray):
    d = _META[sys].dim
    y = np.asarray(y, dtype=float)
    if y.shape != (state_dim(sys),):
        raise ValueError(f"{sys.value} expects a state of length {state_dim(sys)}, got shape {y.shape}")
    return y[:d], y[d : 2 * d]


def _radius(q: np.ndarray, sys: SystemId) -> float:
    r = math.sqrt(float(q @ q))
    if r < COLLISION_R:
        raise CollisionError(f"{sys.value}: r = {r:.3e} below collision radius {COLLISION_R:g}")
    return r


def _power_exponents(n: int) -> tuple[float, float]:
    """(2N/(N+1), (4N+2)/(N+1)): potential exponent and force denominator exponent."""
    return 2.0 * n / (n + 1), (4.0 * n + 2.0) / (n + 1)


def _kepler_damped(sys, s, y, ctx):
    q, v = _split(sys, y)
    p = ctx.params
    r = _radius(q, sys)
    acc = -p.lam * v - p.mu * math.exp(-1.5 * p.lam * s) * q / r**3
    return np.concatenate((v, acc))


def _kepler_autonomous(sys, s, y, ctx):
    q, v = _split(sys, y)
    p = ctx.params
    r = _radius(q, sys)
    acc = 0.25 * p.lam**2 * q - p.mu * q / r**3
    return np.concatenate((v, acc))


def _power_damped(sys, s, y, ctx):
    q, v = _split(sys, y)
    p = ctx.params
    n = p.n_power
    acc = -p.lam * v
    if n > 0:
        a, b = _power_exponents(n)
        r = _radius(q, sys)
        acc = acc - a * p.mu * math.exp(-(2 * n + 1) / (n + 1) * p.lam * s) * q / r**b
    return np.concatenate((v, acc))


def _power_autonomous(sys, s, y, ctx):
    q, v = _split(sys, y)
    p = ctx.params
    n = p.n_power
    acc = 0.25 * p.lam**2 * q
    if n > 0:
        a, b = _power_exponents(n)
        r = _radius(q, sys)
        acc = acc - a * p.mu * q / r**b
    return np.concatenate((v, acc))


def _regularized_lc(sys, s, y, ctx):
    u, up = _split(sys, y)
    p = ctx.params
    u2 = float(u @ u)
    coef = ctx.energy_script_e / (2 * p.c**2) - 3 * p.lam**2 * p.gamma**2 * u2 * u2 / (16 * p.c**2)
    return np.concatenate((up, -coef * u, (p.gamma * u2 / p.c,)))


def _regularized_gen_lc(sys, s, y, ctx):
    u, up = _split(sys, y)
    p = ctx.params
    n = p.n_power
    r2 = float(u @ u)
    n1sq = (n + 1) ** 2
    acc = 0.25 * p.lam**2 * (2 * n + 1) * n1sq * r2 ** (2 * n) * u
    if n > 0:
        acc = acc - ctx.energy_script_e * 2 * n * n1sq * r2 ** (n - 1) * u
    return np.concatenate((up, acc, (n1sq * r2**n,)))


def _regularized_ks(sys, s, y, ctx):
    u, up = _split(sys, y)
    p = ctx.params
    u2 = float(u @ u)
    acc = -(8 * ctx.energy_script_e - 3 * p.lam**2 * u2 * u2) * u
    return np.concatenate((up, acc, (4 * u2,)))


def _damped_ho(sys, s, y, ctx):
    q, v = _split(sys, y)
    p = ctx.params
    acc = -p.lam * v - p.omega**2 * q
    # Kepler time of the Bohlin image: dt/dtau = 4|omega|^2 with omega = q e^{lam tau/2}
    return np.concatenate((v, acc, (4 * float(q @ q) * math.exp(p.lam * s),)))


def _shifted_ho(sys, s, y, ctx):
    x, v = _split(sys, y)
    p = ctx.params
    return np.concatenate((v, -p.omega_shifted_sq * x, (4 * float(x @ x),)))


def _bohlin_kepler(sys, s, y, ctx):
    z, v = _split(sys, y)
    p = ctx.params
    r = _radius(z, sys)
    return np.concatenate((v, -(ctx.kepler_energy / (4 * p.m)) * z / r**3))


_RHS: dict[SystemId, Callable] = {
    SystemId.DAMPED_KEPLER_2D: _kepler_damped,
    SystemId.DAMPED_KEPLER_3D: _kepler_damped,
    SystemId.AUTONOMOUS_KEPLER_2D: _kepler_autonomous,
    SystemId.AUTONOMOUS_KEPLER_3D: _kepler_autonomous,
    SystemId.DAMPED_POWER_LAW_2D: _power_damped,
    SystemId.AUTONOMOUS_POWER_LAW_2D: _power_autonomous,
    SystemId.REGULARIZED_LC: _regularized_lc,
    SystemId.REGULARIZED_GEN_LC: _regularized_gen_lc,
    SystemId.REGULARIZED_KS: _regularized_ks,
    SystemId.DAMPED_HO_2D: _damped_ho,
    SystemId.SHIFTED_HO_2D: _shifted_ho,
    SystemId.BOHLIN_KEPLER_2D: _bohlin_kepler,
}


def rhs(sys: SystemId, s: float, y, ctx: RhsContext) -> np.ndarray:
    """Derivative of the state ``y`` with respect to the system's independent variable ``s``.

    Raises :class:`CollisionError` for singular systems at ``r < COLLISION_R``.
    """
    sys = SystemId(sys)
    ctx.require(sys)
    return _RHS[sys](sys, float(s), y, ctx)


def make_rhs(sys: SystemId, ctx: RhsContext) -> Callable[[float, np.ndarray], np.ndarray]:
    """Bind ``sys`` and ``ctx`` into an ``f(s, y)`` callable for the integrators."""
    sys = SystemId(sys)
    ctx.require(sys)
    fn = _RHS[sys]
    return lambda s, y: fn(sys, s, y, ctx)


# --- Lagrangian cross-check --------------------------------------------------------------


@lru_cache(maxsize=None)
def _euler_lagrange(sys: SystemId, n_power: int):
    """Compile the Euler-Lagrange residual of ``sys``'s Lagrangian with sympy."""
    import sympy as sp

    d = _META[sys].dim
    s = sp.Symbol("s", real=True)
    q = sp.symbols(f"q0:{d}", real=True)
    v = sp.symbols(f"v0:{d}", real=True)
    a = sp.symbols(f"a0:{d}", real=True)
    m, k, lam, c, gam, om, eps, ekep = sp.symbols("m k lam c gamma Omega eps E", real=True)
    qq = sum(x**2 for x in q)
    vv = sum(x**2 for x in v)
    qv = sum(x * y for x, y in zip(q, v))
    r = sp.sqrt(qq)
    nn = sp.Integer(n_power)
    expo = 2 * nn / (nn + 1)

    if sys in (SystemId.DAMPED_KEPLER_2D, SystemId.DAMPED_KEPLER_3D):
        lag = sp.exp(lam * s) * (m / 2 * vv + k * sp.exp(-3 * lam * s / 2) / r)
    elif sys in (SystemId.AUTONOMOUS_KEPLER_2D, SystemId.AUTONOMOUS_KEPLER_3D):
        lag = m / 2 * vv + m * lam**2 / 8 * qq - m * lam / 2 * qv + k / r
    elif sys is SystemId.DAMPED_POWER_LAW_2D:
        lag = sp.exp(lam * s) * (m / 2 * vv + k * sp.exp(-(2 * nn + 1) / (nn + 1) * lam * s) * qq ** (-expo / 2))
    elif sys is SystemId.AUTONOMOUS_POWER_LAW_2D:
        lag = m / 2 * vv + m * lam**2 / 8 * qq - m * lam / 2 * qv + k * qq ** (-expo / 2)
    elif sys is SystemId.REGULARIZED_LC:
        lag = m / 2 * vv - m * eps / (4 * c**2) * qq + m * lam**2 * gam**2 / (32 * c**2) * qq**3
    elif sys is SystemId.REGULARIZED_GEN_LC:
        lag = m / 2 * vv - eps * m * (nn + 1) ** 2 * qq**nn + lam**2 / 8 * m * (nn + 1) ** 2 * qq ** (2 * nn + 1)
    elif sys is SystemId.REGULARIZED_KS:
        lag = m / 2 * vv - 4 * m * eps * qq + m * lam**2 / 2 * qq**3
    elif sys is SystemId.DAMPED_HO_2D:
        lag = sp.exp(lam * s) * m / 2 * (vv - om**2 * qq)
    elif sys is SystemId.SHIFTED_HO_2D:
        lag = m / 2 * vv - m / 2 * (om**2 - lam**2 / 4) * qq - m * lam / 2 * qv
    else:  # BohlinKepler2D, strength k = E/4
        lag = m / 2 * vv + ekep / 4 / r

    res = []
    for i in range(d):
        dl_dv = sp.diff(lag, v[i])
        total = sp.diff(dl_dv, s)
        total += sum(sp.diff(dl_dv, q[j]) * v[j] + sp.diff(dl_dv, v[j]) * a[j] for j in range(d))
        res.append(sp.simplify(total - sp.diff(lag, q[i])))
    args = (s, *q, *v, *a, m, k, lam, c, gam, om, eps, ekep)
    return sp.lambdify(args, res, "math")


def lagrangian_residual(sys: SystemId, s: float, q, v, a, ctx: RhsContext) -> float:
    """Norm of the Euler-Lagrange expression of the system's Lagrangian at one sample.

    ``a`` is the (typically finite-difference) acceleration; for a true
    trajectory the result is zero up to the accuracy of ``a``.
    """
    sys = SystemId(sys)
    p = ctx.params
    fn = _euler_lagrange(sys, p.n_power)
    nan = float("nan")
    eps = ctx.energy_script_e if ctx.energy_script_e is not None else nan
    ekep = ctx.kepler_energy if ctx.kepler_energy is not None else nan
    vals = fn(
        float(s), *map(float, q), *map(float, v), *map(float, a),
        p.m, p.k, p.lam, p.c, p.gamma, p.omega, eps, ekep,
    )
    return float(np.linalg.norm(np.asarray(vals, dtype=float)))
