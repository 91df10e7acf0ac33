"""Feedback boundary laws, the diagonal upwind scheme, Lyapunov decay
machinery."""

import math

import numpy as np
import pytest

from gasnet import gas, stabilization as stab
from gasnet.gas import GasState, PressureLaw
from gasnet.network import END, START, Signal
from gasnet.steady import SteadyProfile, integrate_steady
from gasnet.network import Pipe

SW = PressureLaw.isentropic(0.5, 2.0)


# ---------------------------------------------------------------------------
# feedback boundary laws
# ---------------------------------------------------------------------------

def test_proportional_fixed_point():
    k = 0.25
    cell = GasState(1.0, k * 1.0 * 1.0)  # v = k * rho exactly
    law = stab.FeedbackLaw("proportional_physical", k0=k, kL=k)
    ghost, _ = stab.feedback_ghost(law, START, cell, SW, 0.0, 0.01, None)
    assert ghost == cell
    ghost, _ = stab.feedback_ghost(law, END, cell, SW, 0.0, 0.01, None)
    assert ghost == cell


def test_wall_closure_zero_velocity():
    cell = GasState(1.2, 0.3)
    law = stab.FeedbackLaw("proportional_physical", k0=0.0, kL=0.0)
    for end in (START, END):
        ghost, _ = stab.feedback_ghost(law, end, cell, SW, 0.0, 0.01, None)
        assert abs(ghost.v) <= 1e-14
        assert gas.is_subsonic(ghost, SW)


def test_proportional_ghost_satisfies_relation():
    cell = GasState(1.1, -0.2)
    law = stab.FeedbackLaw("proportional_physical", k0=0.12, kL=-0.08)
    g0, _ = stab.feedback_ghost(law, START, cell, SW, 0.0, 0.01, None)
    assert g0.v == pytest.approx(0.12 * g0.rho, abs=1e-12)
    gL, _ = stab.feedback_ghost(law, END, cell, SW, 0.0, 0.01, None)
    assert gL.v == pytest.approx(-0.08 * gL.rho, abs=1e-12)


def _target_profile():
    pipe = Pipe("p", 1.0, 20, SW, friction=0.4)
    return integrate_steady(pipe, SW, 1.2, 0.3)


def test_pi_law_stationary_at_target():
    target = _target_profile()
    law = stab.FeedbackLaw("pi_flow", kappa_L=0.8, alpha_L=0.5, k_L_pi=0.1,
                           target=target)
    z0 = law.initial_memory()
    cell = GasState(float(target.rho[-1]), target.q)
    ghost, z1 = stab.feedback_ghost(law, END, cell, SW, 0.0, 0.01, z0)
    assert z1 == pytest.approx(z0, abs=1e-15)   # integrator input is zero
    assert ghost == cell                         # bumpless: flux already matches
    # inlet side pins the target flux
    ghost0, _ = stab.feedback_ghost(law, START, cell, SW, 0.0, 0.01, None)
    assert ghost0.q == pytest.approx(target.q, abs=1e-12)


def test_pi_law_integrator_moves_off_target():
    target = _target_profile()
    law = stab.FeedbackLaw("pi_flow", kappa_L=0.8, alpha_L=0.5, k_L_pi=0.1,
                           target=target)
    z0 = law.initial_memory()
    cell = GasState(float(target.rho[-1]) + 0.05, target.q)
    ghost, z1 = stab.feedback_ghost(law, END, cell, SW, 0.0, 0.02, z0)
    assert z1 == pytest.approx(z0 + 0.02 * 0.5 * (-0.05), abs=1e-12)
    assert ghost.q == pytest.approx(
        0.8 * ((1.1) * ghost.rho - z1), abs=1e-11)


def test_prescribed_inflow_closures():
    cell = GasState(1.0, 0.1)
    rho_law = stab.FeedbackLaw("prescribed_inflow", variable="rho",
                               signal=Signal.constant(1.15))
    ghost, _ = stab.feedback_ghost(rho_law, START, cell, SW, 0.0, 0.01, None)
    assert ghost.rho == pytest.approx(1.15, abs=1e-15)
    q_law = stab.FeedbackLaw("prescribed_inflow", variable="q",
                             signal=Signal.constant(0.22))
    ghost, _ = stab.feedback_ghost(q_law, END, cell, SW, 0.0, 0.01, None)
    assert ghost.q == pytest.approx(0.22, abs=1e-12)


def test_feedback_ghost_root_failure_raises():
    cell = GasState(1.0, 0.0)
    # gain beyond the subsonic window: v = 5*rho is unreachable
    law = stab.FeedbackLaw("proportional_physical", k0=5.0, kL=5.0)
    with pytest.raises(ValueError):
        stab.feedback_ghost(law, START, cell, SW, 0.0, 0.01, None)


# ---------------------------------------------------------------------------
# diagonal upwind scheme
# ---------------------------------------------------------------------------

def test_zero_state_is_equilibrium():
    sys2 = stab.DiagonalSystem([1.0, 2.0], [0.5, 0.5], delta=0.1)
    vals = stab.attach_ghost(sys2, np.zeros((2, 11)))
    out = stab.diagonal_step(sys2, vals, 0.005, 0.01)
    assert np.all(out == 0.0)


def test_constant_state_with_unit_gain_is_invariant():
    sys1 = stab.DiagonalSystem([1.5], [1.0], delta=1.0)
    vals = stab.attach_ghost(sys1, np.full((1, 21), 0.3))
    out = stab.diagonal_step(sys1, vals, 0.01, 0.05)
    assert np.all(out == vals)


def test_unit_courant_exact_shift():
    sys1 = stab.DiagonalSystem([2.0], [0.5], delta=1.0)
    rng = np.random.default_rng(5)
    interior = rng.uniform(-0.5, 0.5, (1, 16))
    vals = stab.attach_ghost(sys1, interior)
    dx = 0.1
    dt = dx / 2.0  # Courant number exactly one
    out = stab.diagonal_step(sys1, vals, dt, dx, d_max=1.0)
    assert np.array_equal(out[0, 1:], vals[0, :-1])
    assert out[0, 0] == 0.5 * out[0, -1]


def test_state_leaving_trust_ball_raises():
    sys1 = stab.DiagonalSystem([1.0], [0.5], delta=0.1)
    vals = stab.attach_ghost(sys1, np.full((1, 5), 0.5))
    with pytest.raises(ValueError):
        stab.diagonal_step(sys1, vals, 0.01, 0.05)


def test_cfl_violation_raises():
    sys1 = stab.DiagonalSystem([1.0], [0.5], delta=0.1)
    vals = stab.attach_ghost(sys1, np.full((1, 5), 0.05))
    with pytest.raises(ValueError):
        stab.diagonal_step(sys1, vals, 1.0, 0.05)


def test_compatibility_check():
    sys1 = stab.DiagonalSystem([1.0], [0.5], delta=1.0)
    vals = stab.attach_ghost(sys1, np.full((1, 5), 0.2))
    stab.check_compatibility(sys1, vals)
    vals[0, 0] = 0.7
    with pytest.raises(ValueError):
        stab.check_compatibility(sys1, vals)


# ---------------------------------------------------------------------------
# Lyapunov function, admissibility, decay rate
# ---------------------------------------------------------------------------

def test_lyapunov_hand_values():
    assert stab.discrete_lyapunov(np.zeros((2, 8)), [0.1, 0.2], 0.1) == 0.0
    rng = np.random.default_rng(2)
    vals = rng.uniform(-1, 1, (2, 9))
    assert stab.discrete_lyapunov(vals, [0.0, 0.0], 0.25) == pytest.approx(
        0.25 * float(np.sum(vals ** 2)), rel=1e-14)
    single = np.zeros((1, 5))
    single[0, 0] = 1.0
    assert stab.discrete_lyapunov(single, [0.2], 0.1) == pytest.approx(0.1, abs=1e-15)


def test_admissible_parameters_linear_hand_values():
    sys1 = stab.DiagonalSystem([1.0], [1.0], delta=0.1)
    adm = stab.admissible_parameters(sys1, 0.05, 0.1, inflation=0.0)
    assert adm.kappa_sq_bound[0] == pytest.approx(1.0, abs=1e-15)
    assert adm.mu_bound[0] == pytest.approx(0.0, abs=1e-15)  # only mu = 0 admissible
    assert adm.kappa_ok[0]

    sys2 = stab.DiagonalSystem([1.0], [0.5], delta=0.1)
    adm = stab.admissible_parameters(sys2, 0.05, 0.1, inflation=0.0)
    assert adm.mu_bound[0] == pytest.approx(-math.log(0.5), rel=1e-12)
    # the kappa^2 variant doubles the headroom
    assert adm.mu_bound_kappa_sq[0] == pytest.approx(-math.log(0.25), rel=1e-12)


def test_admissible_parameters_rejects_cfl_breakage():
    sys1 = stab.DiagonalSystem([3.0], [0.5], delta=0.1)
    with pytest.raises(ValueError):
        stab.admissible_parameters(sys1, 0.05, 0.1)


def test_decay_rate_hand_value():
    nu = stab.decay_rate([0.5], [0.2], 0.1, 0.05)
    assert nu == pytest.approx(0.5 * math.exp(-0.02) * 0.2 * 1.0, rel=1e-12)
    assert nu == pytest.approx(0.09802, abs=5e-6)
    assert stab.decay_rate([0.5, 0.7], [0.0, 0.3], 0.1, 0.05) == 0.0


def test_decay_rate_monotone_in_mu():
    dx, dt = 0.1, 0.05
    mus = np.linspace(0.0, 1.0 / dx, 60)
    vals = [stab.decay_rate([0.5], [m], dx, dt) for m in mus]
    assert np.all(np.diff(vals) >= -1e-15)


def test_decay_rate_linear_small_mesh_limit():
    lam = (1.0, 2.0)
    mu = (0.4, 0.3)
    ratio = 0.25  # dt/dx fixed
    expect = min(0.5 * l * m for l, m in zip(lam, mu))
    for dx in (0.1, 0.01, 0.001):
        dt = ratio * dx
        nu = stab.decay_rate([ratio * l for l in lam], mu, dx, dt)
        if dx == 0.001:
            assert nu == pytest.approx(expect, rel=2e-2)


def smooth_small_gradient(rng, d, n, delta, dx):
    """Random low-frequency field inside the trust ball whose discrete
    gradients also stay below the default certification gate (delta)."""
    x = np.arange(n) * dx
    out = np.zeros((d, n))
    for j in range(d):
        for k in (1, 2):
            out[j] += rng.uniform(-1, 1) * np.sin(2 * math.pi * k * x / (n * dx))
    peak = max(float(np.linalg.norm(out, axis=0).max()), 1e-12)
    grad = max(float(np.abs(np.diff(out, axis=1)).max()) / dx, 1e-12)
    return out * min(0.5 * delta / peak, 0.9 * delta / grad)


def test_certify_decay_linear_system():
    sys2 = stab.DiagonalSystem([1.0, 2.0], [0.5, 0.5], delta=0.1)
    dx = 1.0 / 100
    dt = 0.5 * dx
    adm = stab.admissible_parameters(sys2, dt, dx)
    mu = adm.mu_bound.copy()
    rng = np.random.default_rng(11)
    initial = smooth_small_gradient(rng, 2, 100, 0.1, dx)
    report = stab.certify_decay(sys2, initial, dt, dx, 300, mu)
    assert report.admissible.all_ok and report.gradient_ok
    assert report.nu > 0.0
    assert report.bound_holds is True


def test_certify_decay_zero_data():
    sys2 = stab.DiagonalSystem([1.0, 2.0], [0.5, 0.5], delta=0.1)
    report = stab.certify_decay(sys2, np.zeros((2, 50)), 0.005, 0.01, 50, [0.1, 0.1])
    assert report.bound_holds is True
    assert np.all(report.l_series == 0.0)


def test_certify_withholds_verdict_on_inadmissible_gains():
    # kappa^2 = 4 > 1 violates the gain bound
    sys1 = stab.DiagonalSystem([1.0], [2.0], delta=0.5)
    initial = np.full((1, 40), 0.01)
    report = stab.certify_decay(sys1, initial, 0.005, 0.025, 20, [0.1])
    assert report.bound_holds is None
    assert not report.admissible.all_ok


def test_certify_nonlinear_speeds():
    sys2 = stab.DiagonalSystem(
        [lambda u: 1.0 + 0.5 * u[0], lambda u: 2.0 - 0.5 * u[1]],
        [0.4, 0.4], delta=0.1)
    dx = 0.02
    dt = 0.2 * dx  # comfortably below the CFL cap over the ball
    adm = stab.admissible_parameters(sys2, dt, dx)
    mu = 0.9 * adm.mu_bound
    rng = np.random.default_rng(3)
    initial = smooth_small_gradient(rng, 2, 50, 0.1, dx)
    report = stab.certify_decay(sys2, initial, dt, dx, 200, mu)
    assert report.admissible.all_ok
    assert report.bound_holds is True


# ---------------------------------------------------------------------------
# distance to target and rate fitting
# ---------------------------------------------------------------------------

def test_l2_distance_hand_values():
    from gasnet import fv
    from gasnet.network import BoundaryNode, Network
    law = stab.FeedbackLaw("proportional_physical")
    pipe = Pipe("p", 1.0, 10, SW)
    net = Network({"p": pipe}, {}, {
        "L": BoundaryNode("L", "p", START, law),
        "R": BoundaryNode("R", "p", END, law)})
    rho = np.full(10, 1.0)
    q = np.zeros(10)
    state = fv.initial_state(net, {"p": (rho, q)})
    target = {"p": (rho.copy(), q.copy())}
    assert stab.l2_distance_to_target(state, target) == 0.0

    rho2 = rho.copy()
    rho2[3] += 0.01
    state2 = fv.initial_state(net, {"p": (rho2, q)})
    assert stab.l2_distance_to_target(state2, target) == pytest.approx(
        math.sqrt(0.1) * 0.01, rel=1e-12)
    rho3 = rho2.copy()
    rho3[7] += 0.01
    state3 = fv.initial_state(net, {"p": (rho3, q)})
    assert stab.l2_distance_to_target(state3, target) > \
        stab.l2_distance_to_target(state2, target)


def test_fit_decay_rate_on_synthetic_series():
    t = np.linspace(0.0, 10.0, 200)
    d = 3.0 * np.exp(-0.7 * t)
    assert stab.fit_decay_rate(t, d) == pytest.approx(0.7, rel=1e-6)
