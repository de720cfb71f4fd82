"""Conserved quantities, oscillator Hamiltonians and energy identifications.

``script_e`` is always per unit mass and signed so that bound orbits give a
positive value: ``-script_e = v^2/2 - lam^2 |q|^2 / 8 - mu / r^a``. Multiply
by ``m`` to get the mass-carrying form used for the 2-D Kepler problem.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .dynamics import REGULARIZATION_OF, RhsContext, SystemId, coord_dim, is_regularized
from .transforms import (
    PhaseState,
    Regularization,
    RegularizedState,
    SingularInputError,
    SystemParams,
    bilinear_constraint,
    damp_to_autonomous,
    gen_lc_forward,
    gen_lc_velocity_inverse,
    ks_forward,
    ks_velocity_inverse,
    lc_forward,
    lc_velocity_inverse,
)

KEPLER = "kepler"
POWER_LAW = "power_law"


@dataclass(frozen=True)
class ConservedSet:
    script_e: float | None = None
    ang_mom: float | tuple[float, float, float] | None = None
    h_oscillator: float | None = None
    bilinear: float | None = None
    kepler_energy: float | None = None

    def as_dict(self) -> dict:
        return {
            "script_e": self.script_e,
            "ang_mom": self.ang_mom,
            "h_oscillator": self.h_oscillator,
            "bilinear": self.bilinear,
            "kepler_energy": self.kepler_energy,
        }


def _potential_exponent(family: str, p: SystemParams) -> float:
    if family == KEPLER:
        return 1.0
    if family == POWER_LAW:
        return 2.0 * p.n_power / (p.n_power + 1)
    raise ValueError(f"unknown family {family!r}; expected {KEPLER!r} or {POWER_LAW!r}")


def script_e(family: str, state: PhaseState, p: SystemParams) -> float:
    """Per-mass conserved energy of the autonomous system at ``state`` (autonomous coordinates)."""
    a = _potential_exponent(family, p)
    r = state.r
    if a > 0 and r == 0:
        raise SingularInputError("script_e is undefined at r = 0")
    kinetic = 0.5 * float(state.v @ state.v)
    potential = p.mu / r**a if a > 0 else p.mu
    return -(kinetic - p.lam**2 / 8.0 * r * r - potential)


def angular_momentum(state: PhaseState, p: SystemParams):
    """``X x P`` with canonical momentum ``P = m Xdot - (lam/2) m X`` (scalar in 2-D)."""
    mom = p.m * state.v - 0.5 * p.lam * p.m * state.q
    x = state.q
    if x.shape == (2,):
        return float(x[0] * mom[1] - x[1] * mom[0])
    if x.shape == (3,):
        return tuple(float(c) for c in np.cross(x, mom))
    raise ValueError(f"angular momentum needs a 2-D or 3-D state, got shape {x.shape}")


def script_e_in_regularized_coords(family, state: RegularizedState, p: SystemParams) -> float:
    """Per-mass energy computed from ``(U, U')`` alone."""
    family = Regularization(family)
    u, up = state.u, state.u_prime
    u2 = float(u @ u)
    if u2 == 0:
        raise SingularInputError("script_e is undefined at U = 0")
    upsq = float(up @ up)
    if family is Regularization.LC:
        g = p.gamma
        return -(2 * p.c**2 * upsq / u2 - p.lam**2 * g * g * u2 * u2 / 8 - p.mu / (g * u2))
    if family is Regularization.GEN_LC:
        n = p.n_power
        r2n = u2**n
        return -(0.5 * upsq / ((n + 1) ** 2 * r2n) - p.lam**2 / 8 * u2 ** (n + 1) - p.mu / r2n)
    if family is Regularization.KS:
        return -(2 * upsq - 2 * p.lam**2 * u2**3 - 16 * p.mu) / (16 * u2)
    raise ValueError(f"no regularized energy for {family.value}")


def oscillator_hamiltonian(family, state: RegularizedState, ctx: RhsContext) -> float:
    """Hamiltonian of the regularized oscillator with momenta ``p = m U'``."""
    family = Regularization(family)
    p = ctx.params
    eps = ctx.energy_script_e
    u, up = state.u, state.u_prime
    u2 = float(u @ u)
    kin = 0.5 * p.m * float(up @ up)
    if family is Regularization.LC:
        return kin + p.m * eps * u2 / (4 * p.c**2) - p.m * p.lam**2 * p.gamma**2 * u2**3 / (32 * p.c**2)
    if family is Regularization.GEN_LC:
        n1sq = (p.n_power + 1) ** 2
        return kin + p.m * eps * n1sq * u2**p.n_power - p.m * p.lam**2 / 8 * n1sq * u2 ** (2 * p.n_power + 1)
    if family is Regularization.KS:
        return kin + 4 * p.m * eps * u2 - 0.5 * p.m * p.lam**2 * u2**3
    raise ValueError(f"no oscillator Hamiltonian for {family.value}")


def oscillator_hamiltonian_value(family, p: SystemParams) -> float:
    """Value the oscillator Hamiltonian takes on the energy surface it was built for."""
    family = Regularization(family)
    if family is Regularization.LC:
        return p.k / (4 * p.gamma * p.c**2)
    if family is Regularization.GEN_LC:
        return p.k * (p.n_power + 1) ** 2
    if family is Regularization.KS:
        return 4 * p.k
    raise ValueError(f"no oscillator Hamiltonian for {family.value}")


def ho_frequency_from_energy(energy: float, m: float) -> float:
    """Oscillator frequency ``w0`` with ``4E = m w0^2 / 2``; needs ``E > 0``."""
    if energy <= 0:
        raise ValueError(f"frequency identification needs E > 0, got {energy}")
    return math.sqrt(8 * energy / m)


def homogeneous_equivalence_check(states: Sequence[RegularizedState], p: SystemParams, energy_script_e: float) -> dict:
    """Compare the damped-Kepler homogeneous Hamiltonian with the sextic oscillator along K-S samples.

    With ``P_t = E = m script_e`` and ``p_s = -4k``:

    * ``homogeneous_3d``: ``4r (H(X, P) + P_t)`` evaluated in the original
      coordinates after mapping each sample back;
    * ``homogeneous_4d``: the same quantity written in ``(U, p~)``;
    * ``sextic_h``: the oscillator Hamiltonian, which must stay at ``-p_s = 4k``.
    """
    m, lam, k = p.m, p.lam, p.k
    e_big = m * energy_script_e
    p_t, p_s = e_big, -4.0 * k
    identity, h3d_abs, sextic, hom_diff = [], [], [], []
    for st in states:
        u = st.u
        r = float(u @ u)
        pt = m * st.u_prime
        kin4 = float(pt @ pt) / (2 * m)
        sextic_big_h = kin4 + 4 * m * energy_script_e * r - 0.5 * m * lam**2 * r**3
        sextic_small_h = kin4 + 4 * e_big * r - 0.5 * lam**2 * m * r**3
        hom_4d = sextic_small_h + p_s
        x = ks_forward(u)
        mom = ks_velocity_inverse(u, pt)
        rx = float(np.linalg.norm(x))
        ham = float(mom @ mom) / (2 * m) - m * lam**2 / 8 * float(x @ x) - k / rx
        hom_3d = 4 * rx * (ham + p_t)
        identity.append(abs(sextic_big_h - sextic_small_h))
        h3d_abs.append(abs(hom_3d))
        hom_diff.append(abs(hom_3d - hom_4d))
        sextic.append(sextic_big_h)
    sextic = np.asarray(sextic)
    return {
        "samples": len(sextic),
        "max_identity_gap": max(identity, default=0.0),
        "max_homogeneous_gap": max(hom_diff, default=0.0),
        "max_abs_homogeneous_3d": max(h3d_abs, default=0.0),
        "sextic_h_relative_drift": float(np.max(np.abs(sextic - sextic[0])) / abs(sextic[0])) if len(sextic) else 0.0,
        "minus_p_s_relative_error": float(np.max(np.abs(sextic + p_s)) / abs(p_s)) if len(sextic) else 0.0,
        "predicted_minus_p_s": -p_s,
    }


class AppendixEnergies(NamedTuple):
    e_shifted: float
    e_kepler_predicted: float
    k_identified: float


def appendix_energies(state_ho: PhaseState, p: SystemParams) -> AppendixEnergies:
    """Energies of the Bohlin chain for a shifted-oscillator state ``(x, x')``."""
    x, xp = state_ho.q, state_ho.v
    e_shifted = 0.5 * p.m * float(xp @ xp) + 0.5 * p.m * p.omega_shifted_sq * float(x @ x)
    return AppendixEnergies(e_shifted, -p.m / 8 * p.omega_shifted_sq, e_shifted / 4)


def image_kepler_energy(omega_c, omega_prime, k: float, m: float) -> float:
    """``(m/2)|Zdot|^2 - k/|Z|`` for the Bohlin image of an oscillator state."""
    w = np.asarray(omega_c, dtype=float)
    w2 = float(w @ w)
    if w2 == 0:
        raise SingularInputError("Kepler image energy is undefined at omega = 0")
    wp = np.asarray(omega_prime, dtype=float)
    # |Zdot| = |omega'| / (2 |omega|), |Z| = |omega|^2
    return 0.5 * m * float(wp @ wp) / (4 * w2) - k / w2


# --- per-sample evaluation used by the integrator -----------------------------------------


def _map_back(reg: Regularization, u, up, p: SystemParams):
    if reg is Regularization.LC:
        return lc_forward(u, p.gamma), lc_velocity_inverse(u, up, p)
    if reg is Regularization.GEN_LC:
        return gen_lc_forward(u, p.n_power), gen_lc_velocity_inverse(u, up, p.n_power)
    return ks_forward(u), ks_velocity_inverse(u, up)


def evaluate_conserved(sys: SystemId, s: float, y, ctx: RhsContext) -> ConservedSet:
    sys = SystemId(sys)
    p = ctx.params
    d = coord_dim(sys)
    y = np.asarray(y, dtype=float)
    q, v = y[:d], y[d : 2 * d]
    try:
        if sys in (SystemId.SHIFTED_HO_2D, SystemId.DAMPED_HO_2D):
            st = PhaseState(q, v, s)
            if sys is SystemId.DAMPED_HO_2D:
                st = damp_to_autonomous(st, p)
            en = appendix_energies(st, p)
            e_fixed = ctx.kepler_energy if ctx.kepler_energy is not None else en.e_shifted
            kep = image_kepler_energy(st.q, st.v, e_fixed / 4, p.m) if np.any(st.q) else None
            return ConservedSet(ang_mom=p.m * float(st.q[0] * st.v[1] - st.q[1] * st.v[0]), h_oscillator=en.e_shifted, kepler_energy=kep)
        if sys is SystemId.BOHLIN_KEPLER_2D:
            r = float(np.linalg.norm(q))
            e_k = 0.5 * p.m * float(v @ v) - ctx.kepler_energy / 4 / r
            return ConservedSet(script_e=-e_k / p.m, ang_mom=p.m * float(q[0] * v[1] - q[1] * v[0]), kepler_energy=e_k)
        if is_regularized(sys):
            reg = REGULARIZATION_OF[sys]
            st = RegularizedState(q, v, s, y[-1])
            h = oscillator_hamiltonian(reg, st, ctx)
            bl = st.bilinear if reg is Regularization.KS else None
            if not np.any(q):
                return ConservedSet(h_oscillator=h, bilinear=bl)
            eps = script_e_in_regularized_coords(reg, st, p)
            x, xd = _map_back(reg, q, v, p)
            lam_free = p.with_(lam=0.0)  # P = m Xdot - lam m X / 2 leaves X x P unchanged
            return ConservedSet(eps, angular_momentum(PhaseState(x, xd), lam_free), h, bl)
        st = PhaseState(q, v, s)
        if sys in (SystemId.DAMPED_KEPLER_2D, SystemId.DAMPED_KEPLER_3D, SystemId.DAMPED_POWER_LAW_2D):
            st = damp_to_autonomous(st, p)
        family = POWER_LAW if sys in (SystemId.DAMPED_POWER_LAW_2D, SystemId.AUTONOMOUS_POWER_LAW_2D) else KEPLER
        return ConservedSet(script_e(family, st, p), angular_momentum(st, p))
    except SingularInputError:
        return ConservedSet()


def bilinear_of(state: RegularizedState) -> float:
    return bilinear_constraint(state.u, state.u_prime)
