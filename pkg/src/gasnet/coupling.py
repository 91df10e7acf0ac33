"""Nodal coupling conditions and the junction solvers.

All vertex work happens in vertex-outgoing coordinates: every adjacent
edge has the vertex at its local x=0 and positive velocity means outflow.
Ghost states returned here lie on the family-2 wave curve through the
first-cell averages, so the Godunov boundary flux reproduces the ghost
trace exactly for subsonic data.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from gasnet import gas
from gasnet.errors import (ConvergenceError, JunctionError, SupersonicError,
                           VacuumError)
from gasnet.gas import GasState

PSI_VARIANTS = ("equal_pressure", "dynamic_pressure", "bernoulli",
                "bernoulli_printed", "compressor", "compressor_conventional")
VARIANTS = PSI_VARIANTS + ("energy_dissipating", "valve")

_PAIR_KINDS = {"compressor", "compressor_conventional", "valve"}


@dataclass(frozen=True)
class CouplingKind:
    """Which nodal condition a junction imposes.

    ``gamma`` is the compressor exponent; ``q_star`` the valve setpoint.
    ``bernoulli`` uses the specific-enthalpy invariant (energy conserving);
    ``bernoulli_printed`` is the variant with p'(rho) in place of the
    enthalpy (the two coincide for gamma = 2).  ``compressor`` applies the
    power relation with the exponent on the shifted pressure ratio;
    ``compressor_conventional`` shifts after exponentiation.
    """

    variant: str
    gamma: float = 2.0
    q_star: float = 0.0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown coupling variant {self.variant!r}")
        if self.variant in ("compressor", "compressor_conventional"):
            if not 1.0 < self.gamma < 3.0:
                raise ValueError("compressor exponent must lie in (1, 3)")
        if self.variant == "valve" and not math.isfinite(self.q_star):
            raise ValueError("valve setpoint must be finite")

    def arity_ok(self, n):
        return n == 2 if self.variant in _PAIR_KINDS else n >= 1


@dataclass
class JunctionSolve:
    """Result of one vertex solve: curve parameters, ghost traces and
    diagnostics (residual, iteration count, coupling determinant).  For
    power-relation compressors the residual is measured in the inverted
    pressure-ratio form (see _accept_residual)."""

    sigmas: np.ndarray
    ghost_states: list
    residual_norm: float
    iterations: int
    det_diag: float


def _laws_list(law, n):
    if isinstance(law, (list, tuple)):
        if len(law) != n:
            raise ValueError("need one pressure law per edge")
        return list(law)
    return [law] * n


def specific_enthalpy(law, rho):
    """h(rho) with h'(rho) = p'(rho)/rho (isentropic law only)."""
    law.require_isentropic("the Bernoulli invariant")
    if law.gamma == 1.0:
        return law.kappa * math.log(rho)
    return law.kappa * law.gamma / (law.gamma - 1.0) * rho ** (law.gamma - 1.0)


def _check_arity(kind, n):
    if not kind.arity_ok(n):
        raise ValueError(f"coupling {kind.variant!r} does not accept {n} edges")


def evaluate_psi(kind, traces, law, t=0.0, control=0.0, strict=True):
    """Residual vector of the nodal condition at the given traces.

    Component 0 is the total outgoing flux; components 1..n-1 are the
    kind's pairwise relations minus the control value.  With strict=True
    the literal compressor relation raises for pressure ratios below one;
    strict=False continues it oddly through zero (used by the solver and
    the determinant diagnostic).
    """
    n = len(traces)
    laws = _laws_list(law, n)
    _check_arity(kind, n)
    out = np.empty(n)
    out[0] = math.fsum(u.q for u in traces)
    v = kind.variant

    if v == "equal_pressure":
        ref = gas.pressure(laws[0], traces[0].rho)
        for j in range(1, n):
            out[j] = gas.pressure(laws[j], traces[j].rho) - ref - control
    elif v == "dynamic_pressure":
        ref = traces[0].q * traces[0].v + gas.pressure(laws[0], traces[0].rho)
        for j in range(1, n):
            mj = traces[j].q * traces[j].v + gas.pressure(laws[j], traces[j].rho)
            out[j] = mj - ref - control
    elif v == "bernoulli":
        ref = 0.5 * traces[0].v ** 2 + specific_enthalpy(laws[0], traces[0].rho)
        for j in range(1, n):
            bj = 0.5 * traces[j].v ** 2 + specific_enthalpy(laws[j], traces[j].rho)
            out[j] = bj - ref - control
    elif v == "bernoulli_printed":
        ref = 0.5 * traces[0].v ** 2 + gas.pressure_deriv(laws[0], traces[0].rho)
        for j in range(1, n):
            bj = 0.5 * traces[j].v ** 2 + gas.pressure_deriv(laws[j], traces[j].rho)
            out[j] = bj - ref - control
    elif v in ("compressor", "compressor_conventional"):
        p1 = gas.pressure(laws[0], traces[0].rho)
        p2 = gas.pressure(laws[1], traces[1].rho)
        q2 = traces[1].q
        e = (kind.gamma - 1.0) / kind.gamma
        if v == "compressor":
            base = p2 / p1 - 1.0
            if strict and base < 0.0:
                if base < -1e-12:
                    raise ValueError("compressor pressure ratio fell below one "
                                     "(no real power under the literal relation)")
                base = 0.0  # idle point, ratio one up to roundoff
            out[1] = q2 * math.copysign(abs(base) ** e, base) - control
        else:
            out[1] = q2 * ((p2 / p1) ** e - 1.0) - control
    else:
        raise ValueError(f"{v!r} has no explicit nodal function; use its dedicated solver")
    return out


def _solver_residual(kind, traces, laws, control):
    """Newton residual: the literal compressor relation is replaced by the
    algebraically equivalent smooth form q2^(g/(g-1)) (p2/p1 - 1) =
    Pi^(g/(g-1)) (same solutions for q2 > 0, no singular slope at ratio 1).
    """
    if kind.variant == "compressor":
        p1 = gas.pressure(laws[0], traces[0].rho)
        p2 = gas.pressure(laws[1], traces[1].rho)
        q2 = traces[1].q
        inv_e = kind.gamma / (kind.gamma - 1.0)
        rhs = control ** inv_e
        lhs = math.copysign(abs(q2) ** inv_e, q2) * (p2 / p1 - 1.0)
        return np.array([traces[0].q + traces[1].q, (lhs - rhs) / (1.0 + rhs)])
    return evaluate_psi(kind, traces, laws, 0.0, control, strict=False)


def coupling_determinant(kind, traces, law, control=0.0):
    """Determinant of the family-2 directional derivatives of the nodal
    function, the solvability diagnostic; also returns a column-scaled
    relative value."""
    n = len(traces)
    laws = _laws_list(law, n)
    m = np.empty((n, n))
    for j in range(n):
        lam2 = gas.eigenvalues(traces[j], laws[j])[1]
        h = 1e-7 * (1.0 + traces[j].rho)
        up = list(traces)
        dn = list(traces)
        up[j] = GasState(traces[j].rho + h, traces[j].q + h * lam2)
        dn[j] = GasState(traces[j].rho - h, traces[j].q - h * lam2)
        m[:, j] = (evaluate_psi(kind, up, laws, 0.0, control, strict=False)
                   - evaluate_psi(kind, dn, laws, 0.0, control, strict=False)) / (2.0 * h)
    det = float(np.linalg.det(m))
    scale = 1.0
    for j in range(n):
        scale *= max(float(np.linalg.norm(m[:, j])), 1e-300)
    return det, det / scale


def solve_junction(junction, cell_states, law, t=0.0, tol=1e-10, max_iter=50,
                   control=None):
    """Ghost boundary states at a vertex from the adjacent first-cell
    averages (vertex-outgoing orientation), by damped Newton on the curve
    parameters.  Energy-dissipating and valve junctions dispatch to their
    dedicated constructions.  ``control`` overrides the junction's own
    signal (used by schedule evaluation).
    """
    kind = junction.coupling
    n = len(cell_states)
    laws = _laws_list(law, n)
    _check_arity(kind, n)
    for u, lw in zip(cell_states, laws):
        if not gas.is_subsonic(u, lw):
            raise SupersonicError(f"junction {junction.id}: supersonic cell data")

    had_signal = junction.control is not None or control is not None
    if control is None:
        control = float(junction.control(t)) if junction.control is not None else 0.0
    else:
        control = float(control)

    if kind.variant == "energy_dissipating":
        rho_star, traces = solve_energy_dissipating(cell_states, laws)
        sig = np.array([tr.rho - u.rho for tr, u in zip(traces, cell_states)])
        res = abs(math.fsum(tr.q for tr in traces))
        return JunctionSolve(sig, traces, res, 0, float("nan"))

    if kind.variant == "valve":
        setpoint = control if had_signal else kind.q_star
        ghosts = _valve_junction(setpoint, cell_states, laws)
        sig = np.array([g_.rho - u.rho for g_, u in zip(ghosts, cell_states)])
        res = abs(ghosts[0].q + ghosts[1].q)
        return JunctionSolve(sig, ghosts, res, 0, float("nan"))

    if kind.variant == "compressor" and control < 0.0:
        raise JunctionError("compressor power must be nonnegative")

    def states_at(sig):
        return [gas.lax_curve(cell_states[j], sig[j], 2, laws[j]) for j in range(n)]

    def residual(sig):
        return _solver_residual(kind, states_at(sig), laws, control)

    scale = 1.0 + max(abs(u.q) for u in cell_states) \
        + max(gas.pressure(lw, u.rho) for u, lw in zip(cell_states, laws))

    # short circuit: cell averages already satisfy the condition
    try:
        r0 = _accept_residual(kind, cell_states, laws, t, control)
        if float(np.max(np.abs(r0))) <= 1e-13 * scale:
            det, det_rel = coupling_determinant(kind, cell_states, laws, control)
            return JunctionSolve(np.zeros(n), list(cell_states),
                                 float(np.max(np.abs(r0))), 0, det)
    except ValueError:
        pass

    sigma = np.zeros(n)
    r = residual(sigma)
    rn = float(np.max(np.abs(r)))
    iterations = 0
    for _ in range(max_iter):
        if rn <= 1e-14 * scale:
            break
        jac = np.empty((n, n))
        for j in range(n):
            h = 1e-7 * (1.0 + abs(sigma[j]))
            jac[:, j] = _fd_column(residual, sigma, j, h)
        try:
            delta = np.linalg.solve(jac, -r)
        except np.linalg.LinAlgError:
            raise JunctionError(f"junction {junction.id}: singular Newton system") from None
        lam = 1.0
        accepted = False
        while lam >= 2.0 ** -20:
            trial = sigma + lam * delta
            try:
                rt = residual(trial)
            except (VacuumError, ValueError, OverflowError):
                lam *= 0.5
                continue
            rtn = float(np.max(np.abs(rt)))
            if rtn < rn:
                sigma, r, rn = trial, rt, rtn
                accepted = True
                break
            lam *= 0.5
        iterations += 1
        if not accepted:
            break

    ghosts = states_at(sigma)
    for g_, lw in zip(ghosts, laws):
        if not gas.is_subsonic(g_, lw):
            raise JunctionError(f"junction {junction.id}: ghost state left the subsonic region")
    try:
        strict = _accept_residual(kind, ghosts, laws, t, control)
    except ValueError as exc:
        raise JunctionError(f"junction {junction.id}: {exc}") from None
    res_norm = float(np.max(np.abs(strict)))
    if res_norm > tol:
        raise JunctionError(
            f"junction {junction.id}: Newton stopped at residual {res_norm:.3e} > {tol:.1e}")
    det, det_rel = coupling_determinant(kind, ghosts, laws, control)
    if abs(det_rel) < 1e-12:
        raise JunctionError(f"junction {junction.id}: coupling determinant is singular")
    return JunctionSolve(sigma, ghosts, res_norm, iterations, det)


def _accept_residual(kind, traces, laws, t, control):
    """Residual vector used to accept a solve.

    Identical to the nodal function except for the power-relation
    compressor, whose printed form has a vertical tangent at pressure
    ratio one (its residual scales like err**((g-1)/g), so 1e-10 is not
    representable in doubles near the idle point).  The equivalent
    inverted relation (p2/p1 - 1) - (power/q2)**(g/(g-1)) is measured
    instead; both vanish at exactly the same states.
    """
    if kind.variant != "compressor":
        return evaluate_psi(kind, traces, laws, t, control, strict=True)
    p1 = gas.pressure(laws[0], traces[0].rho)
    p2 = gas.pressure(laws[1], traces[1].rho)
    q2 = traces[1].q
    base = p2 / p1 - 1.0
    if base < -1e-12:
        raise ValueError("compressor pressure ratio fell below one "
                         "(no real power under the literal relation)")
    if control == 0.0:
        rel = base
    else:
        if q2 <= 0.0:
            raise ValueError("compressor cannot supply power without forward flow")
        rel = base - (control / q2) ** (kind.gamma / (kind.gamma - 1.0))
    return np.array([traces[0].q + traces[1].q, rel])


def _fd_column(fn, x, j, h):
    xp = x.copy()
    xm = x.copy()
    xp[j] += h
    xm[j] -= h
    try:
        fp = fn(xp)
    except (VacuumError, ValueError, OverflowError):
        fp = None
    try:
        fm = fn(xm)
    except (VacuumError, ValueError, OverflowError):
        fm = None
    if fp is not None and fm is not None:
        return (fp - fm) / (2.0 * h)
    f0 = fn(x)
    if fp is not None:
        return (fp - f0) / h
    if fm is not None:
        return (f0 - fm) / h
    raise JunctionError("cannot evaluate junction residual near the iterate")


def solve_energy_dissipating(states, law, tol=1e-10):
    """Vertex density rho* >= 0 and edge traces for the implicit
    energy-dissipating condition.

    Each trace is the x/t = 0+ sample of the Riemann problem between the
    vertex rest state (rho*, 0) on the left and the edge datum on the
    right; rho* is found by bracketed bisection on the total trace flux,
    which is monotone in rho* (a denser vertex pushes more gas out).
    """
    n = len(states)
    laws = _laws_list(law, n)
    for lw in laws:
        lw.require_isentropic("the energy-dissipating condition")

    def total_flux(rho_star):
        s = 0.0
        for u, lw in zip(states, laws):
            sol = gas.solve_riemann(GasState(rho_star, 0.0), u, lw)
            s += sol.sampler(0.0).q
        return s

    lo = min(u.rho for u in states) / 8.0
    hi = max(u.rho for u in states) * 8.0
    scanned = (lo, hi)
    try:
        k = 0
        while total_flux(lo) > 0.0:
            lo *= 0.5
            k += 1
            if k > 10:
                raise ConvergenceError(
                    f"vertex density bracketing failed on [{scanned[0]:.3e}, {scanned[1]:.3e}]")
        k = 0
        while total_flux(hi) < 0.0:
            hi *= 2.0
            k += 1
            if k > 10:
                raise ConvergenceError(
                    f"vertex density bracketing failed on [{scanned[0]:.3e}, {scanned[1]:.3e}]")
    except VacuumError:
        raise ConvergenceError(
            f"vertex density bracketing hit vacuum on [{scanned[0]:.3e}, {scanned[1]:.3e}]") from None

    mid = 0.5 * (lo + hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        g_mid = total_flux(mid)
        if abs(g_mid) <= 1e-12 or (hi - lo) <= 1e-16 * hi:
            break
        if g_mid < 0.0:
            lo = mid
        else:
            hi = mid

    traces = [gas.solve_riemann(GasState(mid, 0.0), u, lw).sampler(0.0)
              for u, lw in zip(states, laws)]
    balance = abs(math.fsum(tr.q for tr in traces))
    if balance > tol:
        raise ConvergenceError(f"vertex flux balance stopped at {balance:.3e}")
    return mid, traces


def junction_entropy_flux(traces, law):
    """Total outgoing energy flux at a vertex; negative means the vertex
    dissipates energy."""
    laws = _laws_list(law, len(traces))
    return math.fsum(gas.energy_pair(u, lw)[1] for u, lw in zip(traces, laws))


def valve_ghost(cell_state, q_star, law):
    """Ghost state of the downstream side of a constant-flow valve.

    The state on the family-2 curve through the cell with flux q_star when
    a subsonic one exists; the flux-0 state otherwise (closed valve).
    Negative setpoints close the valve (one-way flow).
    """
    state, _ = _valve_state(cell_state, q_star, law)
    return state


def _valve_state(cell_state, target, law):
    if not gas.is_subsonic(cell_state, law):
        raise SupersonicError("valve needs subsonic cell data")
    window = gas.sonic_window(cell_state, 2, law)
    if target < 0.0:
        target = 0.0
    ghost = gas.state_with_flux(cell_state, 2, target, law, window)
    if ghost is not None:
        return ghost, target != 0.0
    closed = gas.state_with_flux(cell_state, 2, 0.0, law, window)
    if closed is None:
        raise JunctionError("valve cannot reach a closed subsonic state")
    return closed, False


def _valve_junction(setpoint, cells, laws):
    """Two-edge valve: edge 0 feeds the device, edge 1 receives the flow.
    If either side cannot sustain the setpoint subsonically the valve
    closes on both sides, preserving the mass balance exactly."""
    down, opened = _valve_state(cells[1], setpoint, laws[1])
    up = None
    if opened:
        up = gas.state_with_flux(cells[0], 2, -down.q, laws[0])
    if up is None:
        down, _ = _valve_state(cells[1], 0.0, laws[1])
        up = gas.state_with_flux(cells[0], 2, 0.0, laws[0])
        if up is None:
            raise JunctionError("valve cannot reach a closed subsonic state")
    return [up, down]
