"""Junction machinery: nodal residuals, Newton vertex solves, the implicit
energy-dissipating condition, valves, and vertex energy balances."""

import math

import numpy as np
import pytest

from gasnet import coupling, gas
from gasnet.coupling import CouplingKind, evaluate_psi, junction_entropy_flux
from gasnet.errors import JunctionError, SupersonicError
from gasnet.gas import GasState, PressureLaw
from gasnet.network import Junction

LAW = PressureLaw.isentropic(1.0, 1.4)
SW = PressureLaw.isentropic(0.5, 2.0)


def star(variant, n=3, control=None, **kw):
    return Junction("v", [(f"p{k}", "start") for k in range(n)],
                    CouplingKind(variant, **kw), control)


def random_subsonic(rng, law, mach=0.6):
    rho = float(rng.uniform(0.6, 1.5))
    c = gas.sound_speed(law, rho)
    v = float(rng.uniform(-mach, mach)) * c
    return GasState(rho, rho * v)


# ---------------------------------------------------------------------------
# nodal residuals
# ---------------------------------------------------------------------------

def test_psi_straight_pipe_passthrough():
    u = GasState(1.2, 0.4)
    res = evaluate_psi(CouplingKind("equal_pressure"), [u.mirrored(), u], LAW)
    assert np.all(res == 0.0)


def test_psi_idle_compressor_is_passthrough():
    u = GasState(1.1, 0.3)
    res = evaluate_psi(CouplingKind("compressor", gamma=1.4), [u.mirrored(), u], LAW)
    assert np.all(res == 0.0)


def test_psi_rest_state_satisfies_all_kinds():
    rest = GasState(1.0, 0.0)
    for variant in ("equal_pressure", "dynamic_pressure", "bernoulli", "bernoulli_printed"):
        res = evaluate_psi(CouplingKind(variant), [rest, rest, rest], LAW)
        assert np.all(res == 0.0)


def test_psi_arity_and_control():
    with pytest.raises(ValueError):
        evaluate_psi(CouplingKind("compressor"), [GasState(1, 0)] * 3, LAW)
    res = evaluate_psi(CouplingKind("equal_pressure"),
                       [GasState(1.0, 0.0), GasState(1.0, 0.0)], LAW, control=0.25)
    assert res[1] == -0.25


def test_psi_compressor_literal_rejects_ratio_below_one():
    lo, hi = GasState(1.2, 0.3), GasState(1.0, 0.3)
    with pytest.raises(ValueError):
        evaluate_psi(CouplingKind("compressor"), [lo, hi], LAW, control=0.1, strict=True)
    # non-strict continues through zero for the solver
    res = evaluate_psi(CouplingKind("compressor"), [lo, hi], LAW, control=0.0, strict=False)
    assert math.isfinite(res[1]) and res[1] < 0.0


def test_compressor_kind_validation():
    with pytest.raises(ValueError):
        CouplingKind("compressor", gamma=1.0)
    with pytest.raises(ValueError):
        CouplingKind("valve", q_star=float("inf"))
    with pytest.raises(ValueError):
        CouplingKind("no_such_condition")


# ---------------------------------------------------------------------------
# Newton junction solves
# ---------------------------------------------------------------------------

def test_solve_short_circuits_on_satisfied_data():
    u = GasState(1.2, 0.4)
    cells = [u.mirrored(), u]
    sol = coupling.solve_junction(star("equal_pressure", 2), cells, LAW)
    assert sol.iterations == 0
    assert np.all(sol.sigmas == 0.0)
    assert sol.ghost_states[0] == cells[0] and sol.ghost_states[1] == cells[1]
    assert sol.residual_norm == 0.0


def test_solve_equal_pressure_star():
    # one dense rest edge, two lighter rest edges
    cells = [GasState(1.3, 0.0), GasState(1.0, 0.0), GasState(1.0, 0.0)]
    sol = coupling.solve_junction(star("equal_pressure"), cells, LAW)
    ghosts = sol.ghost_states
    p = [gas.pressure(LAW, g.rho) for g in ghosts]
    assert abs(p[1] - p[0]) <= 1e-10 and abs(p[2] - p[0]) <= 1e-10
    assert abs(math.fsum(g.q for g in ghosts)) <= 1e-10
    assert ghosts[0].q < 0.0 < ghosts[1].q  # dense edge feeds the others
    assert sol.residual_norm <= 1e-10
    assert abs(sol.det_diag) > 0.0


def test_solve_rejects_supersonic_cells():
    cells = [GasState(1.0, 3.0), GasState(1.0, 0.0)]
    with pytest.raises(SupersonicError):
        coupling.solve_junction(star("equal_pressure", 2), cells, LAW)


def test_mass_conservation_all_newton_kinds():
    rng = np.random.default_rng(13)
    for variant in ("equal_pressure", "dynamic_pressure", "bernoulli"):
        for _ in range(25):
            cells = [random_subsonic(rng, LAW) for _ in range(3)]
            try:
                sol = coupling.solve_junction(star(variant), cells, LAW)
            except JunctionError:
                continue  # rare unsolvable draws are allowed to error, not to lie
            assert abs(math.fsum(g.q for g in sol.ghost_states)) <= 1e-10


def test_determinant_diagnostic_nonzero_subsonic():
    rng = np.random.default_rng(29)
    for variant in ("equal_pressure", "dynamic_pressure", "bernoulli"):
        for _ in range(20):
            cells = [random_subsonic(rng, LAW, mach=0.5) for _ in range(3)]
            det, det_rel = coupling.coupling_determinant(
                CouplingKind(variant), cells, LAW)
            assert abs(det_rel) > 1e-8


def test_compressor_junction_solve():
    from gasnet.network import Signal
    # feeder flows toward the vertex on edge 0, out on edge 1
    cells = [GasState(1.1, -0.35), GasState(1.0, 0.35)]
    ctrl = 0.4
    j = Junction("v", [("a", "start"), ("b", "start")],
                 CouplingKind("compressor", gamma=1.4), control=Signal.constant(ctrl))
    sol = coupling.solve_junction(j, cells, LAW)
    g1, g2 = sol.ghost_states
    assert abs(g1.q + g2.q) <= 1e-10
    p1, p2 = gas.pressure(LAW, g1.rho), gas.pressure(LAW, g2.rho)
    e = (1.4 - 1.0) / 1.4
    assert g2.q * (p2 / p1 - 1.0) ** e == pytest.approx(ctrl, abs=1e-10)
    # literal relation inverted: pressure ratio grows with the power
    assert p2 / p1 == pytest.approx(1.0 + (ctrl / g2.q) ** (1.0 / e), rel=1e-8)


def test_compressor_conventional_variant():
    from gasnet.network import Signal
    cells = [GasState(1.1, -0.35), GasState(1.0, 0.35)]
    j = Junction("v", [("a", "start"), ("b", "start")],
                 CouplingKind("compressor_conventional", gamma=1.4),
                 control=Signal.constant(0.05))
    sol = coupling.solve_junction(j, cells, LAW)
    g1, g2 = sol.ghost_states
    p1, p2 = gas.pressure(LAW, g1.rho), gas.pressure(LAW, g2.rho)
    e = (1.4 - 1.0) / 1.4
    assert g2.q * ((p2 / p1) ** e - 1.0) == pytest.approx(0.05, abs=1e-10)
    assert p2 > p1


def test_compressor_rejects_negative_power():
    from gasnet.network import Signal
    cells = [GasState(1.0, -0.3), GasState(1.0, 0.3)]
    j = Junction("v", [("a", "start"), ("b", "start")],
                 CouplingKind("compressor", gamma=1.4), control=Signal.constant(-1.0))
    with pytest.raises(JunctionError):
        coupling.solve_junction(j, cells, LAW)


# ---------------------------------------------------------------------------
# energy-dissipating vertex condition
# ---------------------------------------------------------------------------

def test_energy_dissipating_rest_is_fixed_point():
    cells = [GasState(1.2, 0.0)] * 3
    rho_star, traces = coupling.solve_energy_dissipating(cells, LAW)
    assert rho_star == pytest.approx(1.2, rel=1e-10)
    for tr in traces:
        assert tr.rho == pytest.approx(1.2, rel=1e-12)
        assert abs(tr.q) <= 1e-12


def test_energy_dissipating_inflow_pressurizes_vertex():
    # both edges push gas toward the vertex: rho* above the edge density,
    # compression (shock) waves sent back out
    cells = [GasState(1.0, -0.3), GasState(1.0, -0.3)]
    rho_star, traces = coupling.solve_energy_dissipating(cells, LAW)
    assert rho_star > 1.0
    assert abs(math.fsum(t.q for t in traces)) <= 1e-10
    for u in cells:
        sol = gas.solve_riemann(GasState(rho_star, 0.0), u, LAW)
        assert sol.right_wave.kind == "shock"
    # drained vertex: both edges pull, density drops, rarefactions
    cells = [GasState(1.0, 0.3), GasState(1.0, 0.3)]
    rho_star, traces = coupling.solve_energy_dissipating(cells, LAW)
    assert rho_star < 1.0
    assert abs(math.fsum(t.q for t in traces)) <= 1e-10


def test_energy_dissipating_monotone_total_flux():
    # independent check of the bisection's premise near the root
    cells = [GasState(1.0, -0.4), GasState(1.0, 0.2), GasState(1.0, 0.2)]
    rho_star, traces = coupling.solve_energy_dissipating(cells, LAW)

    def total_flux(rs):
        return math.fsum(
            gas.solve_riemann(GasState(rs, 0.0), u, LAW).sampler(0.0).q for u in cells)

    assert total_flux(rho_star * 0.9) < 0.0 < total_flux(rho_star * 1.1)


def test_energy_dissipating_emits_rarefactions_where_others_shock():
    # pressure-matched star: equal_pressure emits no waves, the dynamic
    # and Bernoulli conditions answer with compression (sigma > 0) on the
    # receiving edges, the implicit condition with rarefactions
    cells = [GasState(1.0, -0.4), GasState(1.0, 0.2), GasState(1.0, 0.2)]

    eq = coupling.solve_junction(star("equal_pressure"), cells, LAW)
    assert eq.iterations == 0 and np.all(eq.sigmas == 0.0)

    for variant in ("dynamic_pressure", "bernoulli"):
        sol = coupling.solve_junction(star(variant), cells, LAW)
        assert sol.sigmas[1] > 0.0 and sol.sigmas[2] > 0.0

    rho_star, traces = coupling.solve_energy_dissipating(cells, LAW)
    for u in cells[1:]:
        sol = gas.solve_riemann(GasState(rho_star, 0.0), u, LAW)
        assert sol.right_wave.kind == "rarefaction"


# ---------------------------------------------------------------------------
# vertex energy balances
# ---------------------------------------------------------------------------

def test_entropy_flux_balance_zero_at_rest():
    assert junction_entropy_flux([GasState(1.0, 0.0)] * 3, LAW) == 0.0


def test_bernoulli_conserves_energy():
    rng = np.random.default_rng(3)
    for _ in range(20):
        cells = [random_subsonic(rng, LAW) for _ in range(3)]
        try:
            sol = coupling.solve_junction(star("bernoulli"), cells, LAW)
        except JunctionError:
            continue
        assert abs(junction_entropy_flux(sol.ghost_states, LAW)) <= 1e-10


# fixed 3-star with per-edge pressure coefficients; with one shared law the
# equal-pressure and dynamic-pressure balances provably take opposite signs
FIXED_STAR_LAWS = [PressureLaw.isentropic(k, 2.0) for k in (1.07, 0.83, 0.69)]
FIXED_STAR_CELLS = [GasState(1.04, 0.0), GasState(0.96, -0.68), GasState(1.14, 0.57)]


def test_energy_ordering_on_fixed_star():
    balances = {}
    for variant in ("equal_pressure", "dynamic_pressure", "bernoulli"):
        sol = coupling.solve_junction(star(variant), FIXED_STAR_CELLS, FIXED_STAR_LAWS)
        balances[variant] = junction_entropy_flux(sol.ghost_states, FIXED_STAR_LAWS)
    _, traces = coupling.solve_energy_dissipating(FIXED_STAR_CELLS, FIXED_STAR_LAWS)
    balances["energy_dissipating"] = junction_entropy_flux(traces, FIXED_STAR_LAWS)

    assert abs(balances["bernoulli"]) <= 1e-9
    assert balances["equal_pressure"] < 0.0
    assert balances["dynamic_pressure"] < 0.0
    assert balances["energy_dissipating"] < 0.0
    assert balances["energy_dissipating"] <= min(balances["equal_pressure"],
                                                 balances["dynamic_pressure"])


# ---------------------------------------------------------------------------
# valves
# ---------------------------------------------------------------------------

def test_valve_ghost_at_setpoint_is_identity():
    cell = GasState(1.0, 0.25)
    assert coupling.valve_ghost(cell, 0.25, LAW) == cell


def test_valve_one_way_rule():
    cell = GasState(1.0, 0.25)
    ghost = coupling.valve_ghost(cell, -0.4, LAW)
    assert abs(ghost.q) <= 1e-12


def test_valve_closes_above_reachable_flux():
    cell = GasState(1.0, 0.1)
    # far beyond the subsonic flux maximum on the curve
    ghost = coupling.valve_ghost(cell, 1e3, LAW)
    assert abs(ghost.q) <= 1e-12


def test_valve_junction_mass_balance():
    rng = np.random.default_rng(17)
    from gasnet.network import Signal
    for _ in range(20):
        cells = [random_subsonic(rng, LAW, mach=0.4) for _ in range(2)]
        j = Junction("v", [("a", "start"), ("b", "start")],
                     CouplingKind("valve", q_star=float(rng.uniform(0.0, 0.4))))
        sol = coupling.solve_junction(j, cells, LAW)
        assert abs(sol.ghost_states[0].q + sol.ghost_states[1].q) <= 1e-10
