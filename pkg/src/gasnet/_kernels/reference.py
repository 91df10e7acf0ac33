"""Pure-Python flow kernels.

Scalar building blocks for the isentropic gas model with p(rho) =
kappa * rho**gamma: wave-curve velocities, exact Riemann middle states,
self-similar sampling, Godunov interface fluxes and the conservative
per-pipe sweep.

``gasnet._kernels._compiled`` is the Cython twin of this module.  The two
must stay expression-for-expression identical (same parenthesisation, same
libm calls) so that results do not depend on the selected backend; the
compiled extension is built with FMA contraction disabled for the same
reason.
"""

import math

import numpy as np

from gasnet.errors import ConvergenceError, VacuumError

BACKEND = "reference"

_MAX_BRACKET = 2000
_MAX_NEWTON = 100


def pressure(rho, kappa, gamma):
    return kappa * rho ** gamma


def pressure_deriv(rho, kappa, gamma):
    return kappa * gamma * rho ** (gamma - 1.0)


def sound_speed(rho, kappa, gamma):
    if gamma == 1.0:
        return math.sqrt(kappa)
    return math.sqrt(kappa * gamma) * rho ** ((gamma - 1.0) * 0.5)


def sound_integral(rho, kappa, gamma):
    # integral of c(s)/s ds, the rarefaction part of the Riemann invariants
    if gamma == 1.0:
        return math.sqrt(kappa) * math.log(rho)
    return 2.0 * sound_speed(rho, kappa, gamma) / (gamma - 1.0)


def _shock_jump(rho, rho0, kappa, gamma):
    # |velocity jump| across a shock joining rho0 and rho (rho > rho0)
    dp = pressure(rho, kappa, gamma) - pressure(rho0, kappa, gamma)
    return math.sqrt(dp * (1.0 / rho0 - 1.0 / rho))


def _shock_jump_deriv(rho, rho0, kappa, gamma):
    dp = pressure(rho, kappa, gamma) - pressure(rho0, kappa, gamma)
    phi = dp * (1.0 / rho0 - 1.0 / rho)
    if phi <= 0.0:
        return sound_speed(rho, kappa, gamma) / rho
    dphi = pressure_deriv(rho, kappa, gamma) * (1.0 / rho0 - 1.0 / rho) + dp / (rho * rho)
    return dphi / (2.0 * math.sqrt(phi))


def curve_velocity(rho, rho0, v0, kappa, gamma, family):
    """Velocity at density ``rho`` on the wave curve through (rho0, v0).

    Family 1 parameterises right states of 1-waves whose left state is the
    base (used for ghost closure at a pipe outlet); family 2 parameterises
    left states of 2-waves whose right state is the base (vertex-side
    ghosts).  Density above the base lies on the shock branch for both.
    """
    if family == 1:
        if rho <= rho0:
            return v0 + (sound_integral(rho0, kappa, gamma) - sound_integral(rho, kappa, gamma))
        return v0 - _shock_jump(rho, rho0, kappa, gamma)
    if rho <= rho0:
        return v0 - (sound_integral(rho0, kappa, gamma) - sound_integral(rho, kappa, gamma))
    return v0 + _shock_jump(rho, rho0, kappa, gamma)


def curve_velocity_deriv(rho, rho0, kappa, gamma, family):
    if rho <= rho0:
        d = sound_speed(rho, kappa, gamma) / rho
    else:
        d = _shock_jump_deriv(rho, rho0, kappa, gamma)
    return -d if family == 1 else d


def middle_state(rho_l, v_l, rho_r, v_r, kappa, gamma):
    """Exact Riemann middle state (rho_m, v_m) between two valid states.

    Solves V1(rho; left) = V2(rho; right) by bracketed bisection refined
    with Newton steps.  Raises VacuumError when the wave curves do not
    intersect at positive density.
    """
    if rho_l == rho_r and v_l == v_r:
        return rho_l, v_l
    if gamma > 1.0:
        if v_l + sound_integral(rho_l, kappa, gamma) <= v_r - sound_integral(rho_r, kappa, gamma):
            raise VacuumError("vacuum forms between the given states")

    def g(rho):
        return (curve_velocity(rho, rho_l, v_l, kappa, gamma, 1)
                - curve_velocity(rho, rho_r, v_r, kappa, gamma, 2))

    lo = min(rho_l, rho_r)
    hi = max(rho_l, rho_r)
    it = 0
    while g(hi) > 0.0:
        hi *= 2.0
        it += 1
        if it > _MAX_BRACKET:
            raise ConvergenceError("middle-state bracket expansion failed upward")
    it = 0
    while g(lo) < 0.0:
        lo *= 0.5
        it += 1
        if it > _MAX_BRACKET:
            raise VacuumError("middle-state bracket ran into vacuum")

    scale = max(1.0, abs(v_l), abs(v_r),
                sound_speed(rho_l, kappa, gamma), sound_speed(rho_r, kappa, gamma))
    tol = 1e-14 * scale
    x = 0.5 * (lo + hi)
    for _ in range(_MAX_NEWTON):
        gx = g(x)
        if abs(gx) <= tol:
            break
        if gx > 0.0:
            lo = x
        else:
            hi = x
        dgx = curve_velocity_deriv(x, rho_l, kappa, gamma, 1) - curve_velocity_deriv(x, rho_r, kappa, gamma, 2)
        if dgx != 0.0:
            xn = x - gx / dgx
        else:
            xn = 0.5 * (lo + hi)
        if not (lo < xn < hi):
            xn = 0.5 * (lo + hi)
        if xn == x:
            break
        x = xn
    else:
        if abs(g(x)) > 1e-12 * scale:
            raise ConvergenceError("middle-state iteration did not converge")
    v = 0.5 * (curve_velocity(x, rho_l, v_l, kappa, gamma, 1)
               + curve_velocity(x, rho_r, v_r, kappa, gamma, 2))
    return x, v


def sample(xi, rho_l, v_l, rho_r, v_r, rho_m, v_m, kappa, gamma):
    """Self-similar Riemann solution on the ray x/t = xi.

    Ties resolve to the right of a stationary wave, matching the x -> 0+
    trace convention used for vertex states.
    """
    if rho_m > rho_l:
        s = (rho_m * v_m - rho_l * v_l) / (rho_m - rho_l)
        if xi < s:
            return rho_l, v_l
    else:
        head = v_l - sound_speed(rho_l, kappa, gamma)
        if xi < head:
            return rho_l, v_l
        tail = v_m - sound_speed(rho_m, kappa, gamma)
        if xi < tail:
            if gamma == 1.0:
                c = math.sqrt(kappa)
                v = xi + c
                return rho_l * math.exp((v_l - v) / c), v
            k = v_l + sound_integral(rho_l, kappa, gamma)
            c = (k - xi) * (gamma - 1.0) / (gamma + 1.0)
            v = xi + c
            return (c * c / (kappa * gamma)) ** (1.0 / (gamma - 1.0)), v
    if rho_m > rho_r:
        s = (rho_r * v_r - rho_m * v_m) / (rho_r - rho_m)
        if xi < s:
            return rho_m, v_m
        return rho_r, v_r
    tail = v_m + sound_speed(rho_m, kappa, gamma)
    if xi <= tail:
        return rho_m, v_m
    head = v_r + sound_speed(rho_r, kappa, gamma)
    if xi < head:
        if gamma == 1.0:
            c = math.sqrt(kappa)
            v = xi - c
            return rho_r * math.exp((v - v_r) / c), v
        k = v_r - sound_integral(rho_r, kappa, gamma)
        c = (xi - k) * (gamma - 1.0) / (gamma + 1.0)
        v = xi - c
        return (c * c / (kappa * gamma)) ** (1.0 / (gamma - 1.0)), v
    return rho_r, v_r


def interface_flux(rho_l, q_l, rho_r, q_r, kappa, gamma):
    """Godunov flux (mass, momentum) across a cell interface."""
    if rho_l == rho_r and q_l == q_r:
        v = q_l / rho_l
        return q_l, q_l * v + pressure(rho_l, kappa, gamma)
    v_l = q_l / rho_l
    v_r = q_r / rho_r
    rho_m, v_m = middle_state(rho_l, v_l, rho_r, v_r, kappa, gamma)
    rho, v = sample(0.0, rho_l, v_l, rho_r, v_r, rho_m, v_m, kappa, gamma)
    q = rho * v
    return q, q * v + pressure(rho, kappa, gamma)


def max_char_speed(rho, q, kappa, gamma):
    """max over cells of |v| + c, the CFL-relevant wave speed."""
    m = 0.0
    for i in range(rho.shape[0]):
        s = abs(q[i] / rho[i]) + sound_speed(rho[i], kappa, gamma)
        if s > m:
            m = s
    return m


def sweep_pipe(rho, q, rho_gl, q_gl, rho_gr, q_gr, dt, dx,
               friction, sin_slope, gravity, kappa, gamma):
    """One conservative update of a pipe given its two ghost states.

    Explicit unsplit source: cell-centred friction and gravity terms are
    added after the flux difference.  Raises ValueError on loss of positive
    density (the index is reported).
    """
    n = rho.shape[0]
    fm = np.empty(n + 1)
    fq = np.empty(n + 1)
    fm[0], fq[0] = interface_flux(rho_gl, q_gl, rho[0], q[0], kappa, gamma)
    for i in range(1, n):
        fm[i], fq[i] = interface_flux(rho[i - 1], q[i - 1], rho[i], q[i], kappa, gamma)
    fm[n], fq[n] = interface_flux(rho[n - 1], q[n - 1], rho_gr, q_gr, kappa, gamma)

    r = dt / dx
    rho_new = np.empty(n)
    q_new = np.empty(n)
    for i in range(n):
        src = -friction * q[i] * abs(q[i]) / rho[i] - gravity * sin_slope[i] * rho[i]
        nr = rho[i] - r * (fm[i + 1] - fm[i])
        if not nr > 0.0:
            raise ValueError(f"density lost positivity in cell {i}")
        rho_new[i] = nr
        q_new[i] = q[i] - r * (fq[i + 1] - fq[i]) + dt * src
    return rho_new, q_new
