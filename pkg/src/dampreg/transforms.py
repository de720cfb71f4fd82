"""Coordinate, velocity and time maps between damped, autonomous and regularized systems.

Conventions
-----------
* Planar vectors double as complex numbers, ``(x1, x2) <-> x1 + i x2``.
* The point transform ``X = x exp(lam t / 2)`` turns the damped equations into
  autonomous ones; velocities follow from the chain rule.
* Primes denote derivatives with respect to the fictitious time ``tau``;
  ``time_rate`` returns ``dt/dtau`` for each regularization.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Mapping

import numpy as np

from .algebra import ks_matrix, lc_matrix, uhat_n


class SingularInputError(ValueError):
    """A map was evaluated where it is undefined (the collision point ``U = 0``)."""


class Regularization(str, Enum):
    LC = "LC"
    GEN_LC = "GenLC"
    KS = "KS"
    BOHLIN = "Bohlin"


@dataclass(frozen=True)
class SystemParams:
    """Physical constants of one scenario.

    ``lam`` is the damping coefficient (``lambda`` in configs), ``n_power``
    selects the potential ``r**(-2N/(N+1))``, ``c`` and ``gamma`` are the
    Levi-Civita time and length scales and ``omega`` the oscillator
    frequency of the Bohlin chain.
    """

    m: float = 1.0
    k: float = 1.0
    lam: float = 0.0
    n_power: int = 1
    c: float = 0.25
    gamma: float = 1.0
    omega: float = 1.0

    def __post_init__(self):
        if not self.m > 0:
            raise ValueError(f"m must be positive, got {self.m}")
        if not self.lam >= 0:
            raise ValueError(f"lambda must be non-negative, got {self.lam}")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if not self.c > 0:
            raise ValueError(f"c must be positive, got {self.c}")
        if isinstance(self.n_power, bool) or int(self.n_power) != self.n_power or self.n_power < 0:
            raise ValueError(f"n_power must be a non-negative integer, got {self.n_power!r}")
        object.__setattr__(self, "n_power", int(self.n_power))
        for name in ("m", "k", "lam", "c", "gamma", "omega"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value}")
            object.__setattr__(self, name, value)

    @property
    def mu(self) -> float:
        return self.k / self.m

    @property
    def omega_shifted_sq(self) -> float:
        """Squared frequency of the shifted oscillator, ``omega**2 - lam**2 / 4``."""
        return self.omega**2 - self.lam**2 / 4.0

    def with_(self, **changes) -> "SystemParams":
        return replace(self, **changes)

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "SystemParams":
        data = dict(data)
        if "lambda" in data:
            data["lam"] = data.pop("lambda")
        return cls(**data)

    def to_mapping(self) -> dict[str, float]:
        return {
            "m": self.m,
            "k": self.k,
            "lambda": self.lam,
            "n_power": self.n_power,
            "c": self.c,
            "gamma": self.gamma,
            "omega": self.omega,
        }


def _vec(x) -> np.ndarray:
    return np.array(x, dtype=float)


@dataclass(frozen=True)
class PhaseState:
    """Position ``q``, velocity ``v`` and time ``t`` of a direct (unregularized) system."""

    q: np.ndarray
    v: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        q, v = _vec(self.q), _vec(self.v)
        if q.shape != v.shape or q.ndim != 1:
            raise ValueError(f"q and v must be 1-D with equal shape, got {q.shape} and {v.shape}")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "t", float(self.t))

    @property
    def r(self) -> float:
        return float(np.linalg.norm(self.q))


@dataclass(frozen=True)
class RegularizedState:
    """Regularized coordinates ``u``, ``u' = du/dtau``, fictitious time and physical time."""

    u: np.ndarray
    u_prime: np.ndarray
    tau: float = 0.0
    t: float = 0.0
    bilinear: float | None = field(default=None, compare=False)

    def __post_init__(self):
        u, up = _vec(self.u), _vec(self.u_prime)
        if u.shape != up.shape or u.ndim != 1:
            raise ValueError(f"u and u_prime must be 1-D with equal shape, got {u.shape} and {up.shape}")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "u_prime", up)
        object.__setattr__(self, "tau", float(self.tau))
        object.__setattr__(self, "t", float(self.t))
        if u.shape == (4,) and self.bilinear is None:
            object.__setattr__(self, "bilinear", bilinear_constraint(u, up))


# --- time-dependent point transform -------------------------------------------------


def damp_to_autonomous(s: PhaseState, p: SystemParams) -> PhaseState:
    """``X = x e^{lam t/2}``, ``Xdot = (xdot + lam x / 2) e^{lam t/2}``."""
    g = math.exp(0.5 * p.lam * s.t)
    return PhaseState(s.q * g, (s.v + 0.5 * p.lam * s.q) * g, s.t)


def autonomous_to_damp(s: PhaseState, p: SystemParams) -> PhaseState:
    g = math.exp(-0.5 * p.lam * s.t)
    x = s.q * g
    return PhaseState(x, s.v * g - 0.5 * p.lam * x, s.t)


# --- Levi-Civita -----------------------------------------------------------------------


def _c(v) -> complex:
    a, b = (float(x) for x in v)
    return complex(a, b)


def _v(z: complex) -> np.ndarray:
    return np.array([z.real, z.imag])


def lc_forward(u, gamma: float = 1.0) -> np.ndarray:
    """``Z = gamma U**2``, i.e. ``gamma * lc_matrix(U) @ U``."""
    u1, u2 = (float(x) for x in u)
    return np.array([gamma * (u1 * u1 - u2 * u2), gamma * 2.0 * u1 * u2])


def _principal(w: complex) -> complex:
    # branch: real part >= 0, imaginary part >= 0 on the imaginary axis
    re, im = w.real, w.imag
    if re < 0:
        re, im = -re, -im
    if re == 0.0:
        re, im = 0.0, abs(im)
    return complex(re, im)


def lc_inverse(z, gamma: float = 1.0) -> np.ndarray:
    """Principal square root of ``Z / gamma``."""
    return _v(_principal(cmath.sqrt(_c(z) / gamma)))


def _require_nonzero(u: np.ndarray, what: str) -> None:
    if not np.any(u):
        raise SingularInputError(f"{what} is undefined at U = 0 (collision point)")


def lc_velocity_map(u, zdot, p: SystemParams) -> np.ndarray:
    """``U' = dU/dtau`` from the autonomous velocity ``Zdot``.

    ``dZ/dtau = (r/c) Zdot`` with ``r = gamma |U|^2`` and ``dZ/dtau = 2 gamma U U'``.
    """
    u = _vec(u)
    _require_nonzero(u, "lc_velocity_map")
    r = p.gamma * float(u @ u)
    dz_dtau = (r / p.c) * _c(zdot)
    return _v(dz_dtau / (2.0 * p.gamma * _c(u)))


def lc_velocity_inverse(u, u_prime, p: SystemParams) -> np.ndarray:
    """``Zdot = (c/r) dZ/dtau`` for a regularized L-C state."""
    u = _vec(u)
    _require_nonzero(u, "lc_velocity_inverse")
    r = p.gamma * float(u @ u)
    return _v((p.c / r) * 2.0 * p.gamma * _c(u) * _c(u_prime))


def gen_lc_forward(u, n: int) -> np.ndarray:
    """``Z = Uhat_N U`` (the complex power ``U**(N+1)``)."""
    u = _vec(u)
    mat = uhat_n(u, n)
    # elementwise rather than BLAS matmul, so N = 1 agrees bit for bit with lc_forward
    return mat[:, 0] * u[0] + mat[:, 1] * u[1]


def gen_lc_inverse(z, n: int) -> np.ndarray:
    """Principal ``(N+1)``-th root of ``Z``."""
    zc = _c(z)
    if zc == 0:
        return np.zeros(2)
    arg = math.atan2(zc.imag + 0.0, zc.real)
    rad = abs(zc) ** (1.0 / (n + 1))
    w = cmath.rect(rad, arg / (n + 1))
    return _v(w)


def gen_lc_velocity_map(u, zdot, n: int) -> np.ndarray:
    """``U'`` from ``Zdot`` under ``dt/dtau = (N+1)^2 r^{2N/(N+1)}``: ``U' = (N+1) conj(U)^N Zdot``."""
    u = _vec(u)
    if n > 0:
        _require_nonzero(u, "gen_lc_velocity_map")
    return _v((n + 1) * _c(u).conjugate() ** n * _c(zdot))


def gen_lc_velocity_inverse(u, u_prime, n: int) -> np.ndarray:
    u = _vec(u)
    if n > 0:
        _require_nonzero(u, "gen_lc_velocity_inverse")
    uc = _c(u)
    r2n = abs(uc) ** (2 * n)
    return _v(uc**n * _c(u_prime) / ((n + 1) * r2n))


# --- Kustaanheimo-Stiefel ----------------------------------------------------------------


def ks_forward(u) -> np.ndarray:
    u0, u1, u2, u3 = (float(x) for x in u)
    return np.array(
        [
            u0 * u0 - u1 * u1 - u2 * u2 + u3 * u3,
            2.0 * (u0 * u1 - u2 * u3),
            2.0 * (u0 * u2 + u1 * u3),
        ]
    )


def ks_inverse(x) -> np.ndarray:
    """One point of the K-S fibre over ``X``.

    Gauge ``U3 = 0`` when ``X0 >= 0`` and ``U2 = 0`` otherwise, so the
    leading square root is never taken of a near-cancelling difference.
    """
    x0, x1, x2 = (float(v) for v in x)
    r = math.sqrt(x0 * x0 + x1 * x1 + x2 * x2)
    if r == 0.0:
        return np.zeros(4)
    if x0 >= 0:
        u0 = math.sqrt(0.5 * (r + x0))
        return np.array([u0, x1 / (2 * u0), x2 / (2 * u0), 0.0])
    u1 = math.sqrt(0.5 * (r - x0))
    return np.array([x1 / (2 * u1), u1, 0.0, x2 / (2 * u1)])


def ks_velocity_map(u, xdot, p: SystemParams | None = None) -> np.ndarray:
    """``U' = 2 A(U)^T (Xdot, 0)``; the result always satisfies the bilinear constraint.

    ``p`` is accepted for signature symmetry with the L-C map; K-S uses ``dt/dtau = 4r``.
    """
    u = _vec(u)
    _require_nonzero(u, "ks_velocity_map")
    xd = np.zeros(4)
    xd[:3] = _vec(xdot)
    return 2.0 * ks_matrix(u).T @ xd


def ks_momentum_map(u, p_tilde, full: bool = False) -> np.ndarray:
    """``P = A(U) p~ / (2r)``, ``r = |U|^2``.

    The fourth component vanishes when ``(U, p~)`` obeys the bilinear
    constraint; ``full=True`` returns it for inspection.
    """
    u = _vec(u)
    _require_nonzero(u, "ks_momentum_map")
    r = float(u @ u)
    out = ks_matrix(u) @ _vec(p_tilde) / (2.0 * r)
    return out if full else out[:3]


def ks_velocity_inverse(u, u_prime) -> np.ndarray:
    """``Xdot = X' / (4r) = A(U) U' / (2r)``; same map as the momenta with ``p~ = U'``."""
    return ks_momentum_map(u, u_prime)


def bilinear_constraint(u, u_prime) -> float:
    u0, u1, u2, u3 = (float(x) for x in u)
    w0, w1, w2, w3 = (float(x) for x in u_prime)
    return u0 * w3 - u3 * w0 + u2 * w1 - u1 * w2


# --- Bohlin ------------------------------------------------------------------------------


def bohlin_forward(omega_c) -> np.ndarray:
    """``Z = omega**2`` (complex square)."""
    return lc_forward(omega_c, 1.0)


def bohlin_velocity_map(omega_c, omega_c_prime) -> np.ndarray:
    """``dZ/dt = (d omega / d tau) / (2 conj(omega))`` under ``dt/dtau = 4 |omega|^2``."""
    w = _vec(omega_c)
    _require_nonzero(w, "bohlin_velocity_map")
    return _v(_c(omega_c_prime) / (2.0 * _c(w).conjugate()))


# --- time reparametrization ------------------------------------------------------------


def time_rate(system, r: float, p: SystemParams) -> float:
    """``dt/dtau`` for a regularization at separation ``r``.

    ``r`` is the physical distance ``|Z|`` (or ``|omega|^2`` for Bohlin).
    """
    if r < 0:
        raise ValueError(f"r must be non-negative, got {r}")
    system = Regularization(system)
    if system is Regularization.LC:
        return r / p.c
    if system is Regularization.GEN_LC:
        n = p.n_power
        return (n + 1) ** 2 * r ** (2.0 * n / (n + 1))
    return 4.0 * r
