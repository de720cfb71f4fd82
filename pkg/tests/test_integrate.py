import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dampreg.dynamics import RhsContext, SystemId
from dampreg.integrate import (
    IntegratorConfig, Method, Scenario, Status, hermite, integrate, integrate_pair,
    regularize_initial_state, resample_regularized,
)
from dampreg.transforms import SystemParams
from dampreg.verify import kepler_orbit

P0 = SystemParams(lam=0.0)


def ellipse_at_perihelion(a, e, mu, t):
    """Position on an ellipse started at perihelion on the +x axis, moving +y."""
    n = math.sqrt(mu / a**3)
    m = n * t
    ecc = m
    for _ in range(50):
        ecc -= (ecc - e * math.sin(ecc) - m) / (1 - e * math.cos(ecc))
    return np.array([a * (math.cos(ecc) - e), a * math.sqrt(1 - e * e) * math.sin(ecc)])


class TestConfig:
    @pytest.mark.parametrize("kw", [
        {"rel_tol": 0}, {"abs_tol": -1}, {"h_min": 0}, {"h_init": 1.0, "h_max": 0.5},
        {"max_steps": 0}, {"stop_on": "never"}, {"method": "Euler"},
    ])
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            IntegratorConfig(**kw)

    def test_method_from_string(self):
        assert IntegratorConfig(method="RK4").method is Method.RK4

    def test_state_shape(self):
        with pytest.raises(ValueError):
            integrate(SystemId.REGULARIZED_KS, np.zeros(8), RhsContext(P0, energy_script_e=1.0), IntegratorConfig())


def test_circular_orbit_period():
    traj = integrate(SystemId.AUTONOMOUS_KEPLER_2D, np.array([1.0, 0, 0, 1.0]), RhsContext(P0),
                     IntegratorConfig(t_end=2 * math.pi))
    assert traj.status is Status.COMPLETED
    assert traj.s[-1] == 2 * math.pi
    assert np.linalg.norm(traj.q[-1] - [1, 0]) < 1e-7


def test_ks_returns_after_two_pi():
    # circular orbit, eps = 1/2, so U'' = -4U; U -> -U is one orbit, so tau = 2 pi spans four
    y0, eps = regularize_initial_state("KS", (1.0, 0, 0), (0, 1.0, 0), P0)
    traj = integrate(SystemId.REGULARIZED_KS, y0, RhsContext(P0, energy_script_e=eps),
                     IntegratorConfig(t_end=2 * math.pi, stop_on="native"))
    assert traj.s[-1] == 2 * math.pi
    assert np.linalg.norm(traj.y[-1, :8] - y0[:8]) < 1e-8
    assert traj.t[-1] == pytest.approx(8 * math.pi, rel=1e-10)


def test_eccentric_orbit_matches_ellipse():
    a, e = 1.0, 0.6
    rp = a * (1 - e)
    vp = math.sqrt((1 + e) / rp)
    traj = integrate(SystemId.AUTONOMOUS_KEPLER_2D, np.array([rp, 0, 0, vp]), RhsContext(P0), IntegratorConfig(t_end=15.0))
    err = max(np.linalg.norm(q - ellipse_at_perihelion(a, e, 1.0, t)) for t, q in zip(traj.t, traj.q))
    assert err < 1e-8


class TestStatus:
    def test_radial_fall_aborts(self):
        traj = integrate(SystemId.AUTONOMOUS_KEPLER_2D, np.array([1.0, 0, 0, 0]), RhsContext(P0),
                         IntegratorConfig(collision_r=1e-6))
        assert traj.status is Status.COLLISION_ABORT
        assert np.linalg.norm(traj.q[-1]) < 1e-6
        # free fall from rest at r = 1 reaches the centre at t = pi / 2^(3/2)
        assert traj.t[-1] == pytest.approx(math.pi / 2**1.5, rel=1e-6)

    def test_radial_fall_default_is_a_failure(self):
        traj = integrate(SystemId.AUTONOMOUS_KEPLER_2D, np.array([1.0, 0, 0, 0]), RhsContext(P0), IntegratorConfig())
        assert traj.status.failed

    def test_start_at_collision(self):
        traj = integrate(SystemId.AUTONOMOUS_KEPLER_2D, np.zeros(4), RhsContext(P0), IntegratorConfig())
        assert traj.status is Status.COLLISION_ABORT and len(traj) == 1

    def test_regularized_passes_through_collision(self):
        y0, eps = regularize_initial_state("LC", (1.0, 0), (0, 0), P0)
        traj = integrate(SystemId.REGULARIZED_LC, y0, RhsContext(P0, energy_script_e=eps), IntegratorConfig(t_end=3.0))
        assert traj.status is Status.COMPLETED
        # the radial orbit goes through the centre and out the other side
        assert np.min(traj.q[:, 0]) < -0.5 and np.all(traj.q[:, 1] == 0)

    @pytest.mark.parametrize("method", list(Method))
    def test_max_steps(self, method):
        traj = integrate(SystemId.AUTONOMOUS_KEPLER_2D, np.array([1.0, 0, 0, 1.0]), RhsContext(P0),
                         IntegratorConfig(method=method, max_steps=10))
        assert traj.status is Status.MAX_STEPS and len(traj) == 11

    def test_completed_is_not_failed(self):
        assert not Status.COMPLETED.failed and not Status.MAX_STEPS.failed


@pytest.mark.parametrize("family,sys,q0,v0", [
    ("LC", SystemId.REGULARIZED_LC, (1.0, 0), (0, 0.8)),
    ("KS", SystemId.REGULARIZED_KS, (0.8, 0.4, 0.3), (-0.3, 0.7, 0.35)),
])
@pytest.mark.parametrize("method", list(Method))
def test_physical_time_landing(family, sys, q0, v0, method):
    p = SystemParams(lam=0.05)
    y0, eps = regularize_initial_state(family, q0, v0, p)
    traj = integrate(sys, y0, RhsContext(p, energy_script_e=eps), IntegratorConfig(method=method, t_end=7.5, h_init=0.01))
    assert traj.status is Status.COMPLETED
    assert traj.t[-1] == 7.5
    assert np.all(np.diff(traj.s) > 0)
    assert np.all(np.diff(traj.t) > 0)


def test_rk4_convergence_order():
    # harmonic KS leg, lambda = 0: exact solution is a rotation in (U, U'/w)
    y0, eps = regularize_initial_state("KS", (1.0, 0, 0), (0, 0.8, 0), P0)
    w = math.sqrt(8 * eps)
    tau = 5.0
    exact = np.concatenate((y0[:4] * math.cos(w * tau) + y0[4:8] / w * math.sin(w * tau),
                            -y0[:4] * w * math.sin(w * tau) + y0[4:8] * math.cos(w * tau)))
    errs = []
    for h in (0.05, 0.025):
        cfg = IntegratorConfig(method="RK4", h_init=h, h_min=h, h_max=h, t_end=tau, stop_on="native")
        traj = integrate(SystemId.REGULARIZED_KS, y0, RhsContext(P0, energy_script_e=eps), cfg)
        assert traj.s[-1] == tau
        errs.append(np.linalg.norm(traj.y[-1, :8] - exact))
    assert errs[0] / errs[1] == pytest.approx(16, abs=1.0)


class TestHermite:
    @given(st.lists(st.floats(-3, 3), min_size=4, max_size=4), st.floats(0, 1))
    def test_exact_on_cubics(self, c, x):
        def f(s):
            return c[0] + c[1] * s + c[2] * s**2 + c[3] * s**3

        def df(s):
            return c[1] + 2 * c[2] * s + 3 * c[3] * s**2

        s0, s1 = 0.5, 2.0
        s = s0 + x * (s1 - s0)
        assert hermite(s0, s1, f(s0), f(s1), df(s0), df(s1), s) == pytest.approx(f(s), abs=1e-12)

    def test_endpoints(self):
        assert hermite(0, 1, 3.0, 5.0, 9.0, -9.0, 0.0) == 3.0
        assert hermite(0, 1, 3.0, 5.0, 9.0, -9.0, 1.0) == 5.0


def test_resample_drops_uncovered_times():
    y0, eps = regularize_initial_state("LC", (1.0, 0), (0, 0.8), P0)
    traj = integrate(SystemId.REGULARIZED_LC, y0, RhsContext(P0, energy_script_e=eps), IntegratorConfig(t_end=2.0))
    times, states = resample_regularized(traj, np.array([-1.0, 0.0, 1.0, 2.0, 3.0]))
    assert list(times) == [0.0, 1.0, 2.0]
    assert np.allclose(states[0], y0)
    assert np.array_equal(states[:, -1], times)


class TestPair:
    @pytest.mark.parametrize("family,q0,v0", [
        ("LC", (1.0, 0.0), (0.0, 0.8)),
        ("GenLC", (1.0, 0.0), (0.0, 0.9)),
        ("KS", (0.8, 0.4, 0.3), (-0.3, 0.7, 0.35)),
    ])
    def test_undamped_agreement(self, family, q0, v0):
        res = integrate_pair(Scenario(family, SystemParams(lam=0.0, n_power=2), q0, v0, t_end=20.0))
        assert len(res.t) == len(res.direct)
        assert res.max_position_error < 1e-8
        assert res.max_velocity_error < 1e-7

    def test_damped_original_agreement(self):
        res = integrate_pair(Scenario("LC", SystemParams(lam=0.1), (1.0, 0.0), (0.0, 0.8), t_end=10.0, direct="damped"))
        assert res.max_position_error < 1e-8
        # the damped orbit is actually shrinking
        assert np.linalg.norm(res.q_direct[-1]) < np.max(np.linalg.norm(res.q_direct, axis=1))

    def test_bad_direct(self):
        with pytest.raises(ValueError):
            integrate_pair(Scenario("LC", P0, (1.0, 0.0), (0.0, 0.8), direct="neither"))


class TestKeplerOracle:
    @pytest.mark.parametrize("t", [0.0, 0.3, 1.7, 4.0, 11.0])
    def test_against_eccentric_anomaly(self, t):
        a, e, mu = 1.3, 0.4, 2.0
        rp = a * (1 - e)
        vp = math.sqrt(mu * (1 + e) / rp)
        assert np.allclose(kepler_orbit((rp, 0), (0, vp), mu, t), ellipse_at_perihelion(a, e, mu, t), atol=1e-12)

    def test_circular(self):
        assert np.allclose(kepler_orbit((1, 0, 0), (0, 1, 0), 1.0, math.pi / 2), (0, 1, 0), atol=1e-14)

    def test_rejects_unbound(self):
        with pytest.raises(ValueError):
            kepler_orbit((1, 0), (0, 2), 1.0, 1.0)
