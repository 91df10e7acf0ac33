# cython: boundscheck=False, wraparound=False, cdivision=False
"""Compiled flow kernels.

Cython twin of ``gasnet._kernels.reference``; see there for the contract.
Expressions mirror the reference module exactly so both backends produce
bit-identical results (the build disables FMA contraction).
"""

from libc.math cimport exp, fabs, log, pow, sqrt

import numpy as np

from gasnet.errors import ConvergenceError, VacuumError

BACKEND = "compiled"

cdef int _MAX_BRACKET = 2000
cdef int _MAX_NEWTON = 100


cdef inline double _pressure(double rho, double kappa, double gamma):
    return kappa * pow(rho, gamma)


cdef inline double _pressure_deriv(double rho, double kappa, double gamma):
    return kappa * gamma * pow(rho, gamma - 1.0)


cdef inline double _sound_speed(double rho, double kappa, double gamma):
    if gamma == 1.0:
        return sqrt(kappa)
    return sqrt(kappa * gamma) * pow(rho, (gamma - 1.0) * 0.5)


cdef inline double _sound_integral(double rho, double kappa, double gamma):
    if gamma == 1.0:
        return sqrt(kappa) * log(rho)
    return 2.0 * _sound_speed(rho, kappa, gamma) / (gamma - 1.0)


cdef inline double _shock_jump(double rho, double rho0, double kappa, double gamma):
    cdef double dp = _pressure(rho, kappa, gamma) - _pressure(rho0, kappa, gamma)
    return sqrt(dp * (1.0 / rho0 - 1.0 / rho))


cdef inline double _shock_jump_deriv(double rho, double rho0, double kappa, double gamma):
    cdef double dp = _pressure(rho, kappa, gamma) - _pressure(rho0, kappa, gamma)
    cdef double phi = dp * (1.0 / rho0 - 1.0 / rho)
    cdef double dphi
    if phi <= 0.0:
        return _sound_speed(rho, kappa, gamma) / rho
    dphi = _pressure_deriv(rho, kappa, gamma) * (1.0 / rho0 - 1.0 / rho) + dp / (rho * rho)
    return dphi / (2.0 * sqrt(phi))


cdef double _curve_velocity(double rho, double rho0, double v0,
                            double kappa, double gamma, int family):
    if family == 1:
        if rho <= rho0:
            return v0 + (_sound_integral(rho0, kappa, gamma) - _sound_integral(rho, kappa, gamma))
        return v0 - _shock_jump(rho, rho0, kappa, gamma)
    if rho <= rho0:
        return v0 - (_sound_integral(rho0, kappa, gamma) - _sound_integral(rho, kappa, gamma))
    return v0 + _shock_jump(rho, rho0, kappa, gamma)


cdef double _curve_velocity_deriv(double rho, double rho0,
                                  double kappa, double gamma, int family):
    cdef double d
    if rho <= rho0:
        d = _sound_speed(rho, kappa, gamma) / rho
    else:
        d = _shock_jump_deriv(rho, rho0, kappa, gamma)
    return -d if family == 1 else d


cdef inline double _g(double rho, double rho_l, double v_l, double rho_r, double v_r,
                      double kappa, double gamma):
    return (_curve_velocity(rho, rho_l, v_l, kappa, gamma, 1)
            - _curve_velocity(rho, rho_r, v_r, kappa, gamma, 2))


cdef int _middle_state(double rho_l, double v_l, double rho_r, double v_r,
                       double kappa, double gamma,
                       double* rho_out, double* v_out) except -1:
    cdef double lo, hi, scale, tol, x, gx, dgx, xn
    cdef int it
    if rho_l == rho_r and v_l == v_r:
        rho_out[0] = rho_l
        v_out[0] = v_l
        return 0
    if gamma > 1.0:
        if v_l + _sound_integral(rho_l, kappa, gamma) <= v_r - _sound_integral(rho_r, kappa, gamma):
            raise VacuumError("vacuum forms between the given states")

    lo = min(rho_l, rho_r)
    hi = max(rho_l, rho_r)
    it = 0
    while _g(hi, rho_l, v_l, rho_r, v_r, kappa, gamma) > 0.0:
        hi *= 2.0
        it += 1
        if it > _MAX_BRACKET:
            raise ConvergenceError("middle-state bracket expansion failed upward")
    it = 0
    while _g(lo, rho_l, v_l, rho_r, v_r, kappa, gamma) < 0.0:
        lo *= 0.5
        it += 1
        if it > _MAX_BRACKET:
            raise VacuumError("middle-state bracket ran into vacuum")

    scale = max(1.0, fabs(v_l), fabs(v_r),
                _sound_speed(rho_l, kappa, gamma), _sound_speed(rho_r, kappa, gamma))
    tol = 1e-14 * scale
    x = 0.5 * (lo + hi)
    it = 0
    while it < _MAX_NEWTON:
        gx = _g(x, rho_l, v_l, rho_r, v_r, kappa, gamma)
        if fabs(gx) <= tol:
            break
        if gx > 0.0:
            lo = x
        else:
            hi = x
        dgx = (_curve_velocity_deriv(x, rho_l, kappa, gamma, 1)
               - _curve_velocity_deriv(x, rho_r, kappa, gamma, 2))
        if dgx != 0.0:
            xn = x - gx / dgx
        else:
            xn = 0.5 * (lo + hi)
        if not (lo < xn < hi):
            xn = 0.5 * (lo + hi)
        if xn == x:
            break
        x = xn
        it += 1
    else:
        if fabs(_g(x, rho_l, v_l, rho_r, v_r, kappa, gamma)) > 1e-12 * scale:
            raise ConvergenceError("middle-state iteration did not converge")
    v_out[0] = 0.5 * (_curve_velocity(x, rho_l, v_l, kappa, gamma, 1)
                      + _curve_velocity(x, rho_r, v_r, kappa, gamma, 2))
    rho_out[0] = x
    return 0


cdef int _sample(double xi, double rho_l, double v_l, double rho_r, double v_r,
                 double rho_m, double v_m, double kappa, double gamma,
                 double* rho_out, double* v_out) except -1:
    cdef double s, head, tail, c, v, k
    if rho_m > rho_l:
        s = (rho_m * v_m - rho_l * v_l) / (rho_m - rho_l)
        if xi < s:
            rho_out[0] = rho_l
            v_out[0] = v_l
            return 0
    else:
        head = v_l - _sound_speed(rho_l, kappa, gamma)
        if xi < head:
            rho_out[0] = rho_l
            v_out[0] = v_l
            return 0
        tail = v_m - _sound_speed(rho_m, kappa, gamma)
        if xi < tail:
            if gamma == 1.0:
                c = sqrt(kappa)
                v = xi + c
                rho_out[0] = rho_l * exp((v_l - v) / c)
                v_out[0] = v
                return 0
            k = v_l + _sound_integral(rho_l, kappa, gamma)
            c = (k - xi) * (gamma - 1.0) / (gamma + 1.0)
            v = xi + c
            rho_out[0] = pow(c * c / (kappa * gamma), 1.0 / (gamma - 1.0))
            v_out[0] = v
            return 0
    if rho_m > rho_r:
        s = (rho_r * v_r - rho_m * v_m) / (rho_r - rho_m)
        if xi < s:
            rho_out[0] = rho_m
            v_out[0] = v_m
        else:
            rho_out[0] = rho_r
            v_out[0] = v_r
        return 0
    tail = v_m + _sound_speed(rho_m, kappa, gamma)
    if xi <= tail:
        rho_out[0] = rho_m
        v_out[0] = v_m
        return 0
    head = v_r + _sound_speed(rho_r, kappa, gamma)
    if xi < head:
        if gamma == 1.0:
            c = sqrt(kappa)
            v = xi - c
            rho_out[0] = rho_r * exp((v - v_r) / c)
            v_out[0] = v
            return 0
        k = v_r - _sound_integral(rho_r, kappa, gamma)
        c = (xi - k) * (gamma - 1.0) / (gamma + 1.0)
        v = xi - c
        rho_out[0] = pow(c * c / (kappa * gamma), 1.0 / (gamma - 1.0))
        v_out[0] = v
        return 0
    rho_out[0] = rho_r
    v_out[0] = v_r
    return 0


cdef int _interface_flux(double rho_l, double q_l, double rho_r, double q_r,
                         double kappa, double gamma,
                         double* fm, double* fq) except -1:
    cdef double v, v_l, v_r, rho_m, v_m, rho, q
    if rho_l == rho_r and q_l == q_r:
        v = q_l / rho_l
        fm[0] = q_l
        fq[0] = q_l * v + _pressure(rho_l, kappa, gamma)
        return 0
    v_l = q_l / rho_l
    v_r = q_r / rho_r
    _middle_state(rho_l, v_l, rho_r, v_r, kappa, gamma, &rho_m, &v_m)
    _sample(0.0, rho_l, v_l, rho_r, v_r, rho_m, v_m, kappa, gamma, &rho, &v)
    q = rho * v
    fm[0] = q
    fq[0] = q * v + _pressure(rho, kappa, gamma)
    return 0


# ---------------------------------------------------------------------------
# Python-visible wrappers (same signatures as the reference module)
# ---------------------------------------------------------------------------

def pressure(double rho, double kappa, double gamma):
    return _pressure(rho, kappa, gamma)


def pressure_deriv(double rho, double kappa, double gamma):
    return _pressure_deriv(rho, kappa, gamma)


def sound_speed(double rho, double kappa, double gamma):
    return _sound_speed(rho, kappa, gamma)


def sound_integral(double rho, double kappa, double gamma):
    return _sound_integral(rho, kappa, gamma)


def curve_velocity(double rho, double rho0, double v0, double kappa, double gamma, int family):
    return _curve_velocity(rho, rho0, v0, kappa, gamma, family)


def curve_velocity_deriv(double rho, double rho0, double kappa, double gamma, int family):
    return _curve_velocity_deriv(rho, rho0, kappa, gamma, family)


def middle_state(double rho_l, double v_l, double rho_r, double v_r,
                 double kappa, double gamma):
    cdef double rho_m, v_m
    _middle_state(rho_l, v_l, rho_r, v_r, kappa, gamma, &rho_m, &v_m)
    return rho_m, v_m


def sample(double xi, double rho_l, double v_l, double rho_r, double v_r,
           double rho_m, double v_m, double kappa, double gamma):
    cdef double rho, v
    _sample(xi, rho_l, v_l, rho_r, v_r, rho_m, v_m, kappa, gamma, &rho, &v)
    return rho, v


def interface_flux(double rho_l, double q_l, double rho_r, double q_r,
                   double kappa, double gamma):
    cdef double fm, fq
    _interface_flux(rho_l, q_l, rho_r, q_r, kappa, gamma, &fm, &fq)
    return fm, fq


def max_char_speed(double[:] rho, double[:] q, double kappa, double gamma):
    cdef double m = 0.0
    cdef double s
    cdef Py_ssize_t i
    for i in range(rho.shape[0]):
        s = fabs(q[i] / rho[i]) + _sound_speed(rho[i], kappa, gamma)
        if s > m:
            m = s
    return m


def sweep_pipe(double[:] rho, double[:] q,
               double rho_gl, double q_gl, double rho_gr, double q_gr,
               double dt, double dx, double friction, double[:] sin_slope,
               double gravity, double kappa, double gamma):
    cdef Py_ssize_t n = rho.shape[0]
    cdef Py_ssize_t i
    fm_arr = np.empty(n + 1)
    fq_arr = np.empty(n + 1)
    rho_new_arr = np.empty(n)
    q_new_arr = np.empty(n)
    cdef double[:] fm = fm_arr
    cdef double[:] fq = fq_arr
    cdef double[:] rho_new = rho_new_arr
    cdef double[:] q_new = q_new_arr
    cdef double r, src, nr

    _interface_flux(rho_gl, q_gl, rho[0], q[0], kappa, gamma, &fm[0], &fq[0])
    for i in range(1, n):
        _interface_flux(rho[i - 1], q[i - 1], rho[i], q[i], kappa, gamma, &fm[i], &fq[i])
    _interface_flux(rho[n - 1], q[n - 1], rho_gr, q_gr, kappa, gamma, &fm[n], &fq[n])

    r = dt / dx
    for i in range(n):
        src = -friction * q[i] * fabs(q[i]) / rho[i] - gravity * sin_slope[i] * rho[i]
        nr = rho[i] - r * (fm[i + 1] - fm[i])
        if not nr > 0.0:
            raise ValueError(f"density lost positivity in cell {i}")
        rho_new[i] = nr
        q_new[i] = q[i] - r * (fq[i + 1] - fq[i]) + dt * src
    return rho_new_arr, q_new_arr
