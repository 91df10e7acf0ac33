"""Stationary pipe profiles: constant flux, density from the stationary
momentum balance

    (c^2(rho) - q^2/rho^2) drho/dx = -f q|q|/rho - g sin(alpha) rho,

integrated with classical RK4 at sub-cell resolution.  Used as initial
data, feedback targets and drift baselines.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from gasnet import gas
from gasnet.errors import SupersonicError
from gasnet.gas import GRAVITY

SONIC_MARGIN = 1e-6


@dataclass
class SteadyProfile:
    """Constant-flux stationary profile sampled at cell centers."""

    q: float
    rho: np.ndarray
    subsonic_margin: float
    x: np.ndarray
    pipe: object
    law: object
    gravity: float = GRAVITY

    def state_arrays(self):
        return self.rho.copy(), np.full_like(self.rho, self.q)

    def pressure(self):
        return np.array([gas.pressure(self.law, r) for r in self.rho])


def _slope_rhs(law, q, friction, sin_alpha, gravity):
    def rhs(rho):
        c = gas.sound_speed(law, rho)
        v = q / rho
        margin = c - abs(v)
        if margin <= SONIC_MARGIN * c:
            raise SupersonicError("stationary profile approached a sonic point")
        denom = c * c - v * v
        return (-friction * q * abs(q) / rho - gravity * sin_alpha * rho) / denom
    return rhs


def _rk4(rho, h, rhs):
    k1 = rhs(rho)
    k2 = rhs(rho + 0.5 * h * k1)
    k3 = rhs(rho + 0.5 * h * k2)
    k4 = rhs(rho + h * k3)
    rho = rho + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not rho > 0.0:
        raise ValueError("stationary profile lost positive density")
    return rho


def integrate_steady(pipe, law, rho_at_0, q, substeps=4, gravity=GRAVITY):
    """Stationary profile of a pipe from its inlet density and flux.

    ``substeps`` RK4 stages per half cell (at least 4 per cell).  The
    integration aborts near sonic points (relative margin 1e-6).
    """
    if not rho_at_0 > 0.0:
        raise ValueError("inlet density must be positive")
    if substeps < 2:
        raise ValueError("need at least 2 substeps per half cell")
    c0 = gas.sound_speed(law, rho_at_0)
    if abs(q / rho_at_0) >= c0:
        raise SupersonicError("inlet state is not subsonic")

    dx = pipe.dx
    half = 0.5 * dx
    rho = float(rho_at_0)
    centers = np.empty(pipe.n_cells)
    margin = math.inf
    for i in range(pipe.n_cells):
        rhs = _slope_rhs(law, q, pipe.friction, math.sin(float(pipe.slope[i])), gravity)
        h = half / substeps
        for _ in range(substeps):  # cell edge -> center
            rho = _rk4(rho, h, rhs)
        centers[i] = rho
        margin = min(margin, gas.sound_speed(law, rho) - abs(q / rho))
        for _ in range(substeps):  # center -> next cell edge
            rho = _rk4(rho, h, rhs)
    return SteadyProfile(q=float(q), rho=centers, subsonic_margin=float(margin),
                         x=pipe.cell_centers, pipe=pipe, law=law, gravity=gravity)


def steady_residual(profile, pipe=None, law=None, reference_substeps=64):
    """Max defect of the stationary momentum balance between neighbouring
    samples.

    Each sample is re-integrated to its neighbour with a much finer RK4
    reference; the residual is the worst mismatch of the momentum flux
    q^2/rho + p(rho).  Machine-zero for exact profiles, O(h^4) in the
    profile's substep size.
    """
    pipe = pipe or profile.pipe
    law = law or profile.law
    q = profile.q
    half = 0.5 * pipe.dx
    worst = 0.0
    for i in range(pipe.n_cells - 1):
        rho = float(profile.rho[i])
        for j, cell in ((0, i), (1, i + 1)):  # center -> edge -> next center
            rhs = _slope_rhs(law, q, pipe.friction,
                             math.sin(float(pipe.slope[cell])), profile.gravity)
            h = half / reference_substeps
            for _ in range(reference_substeps):
                rho = _rk4(rho, h, rhs)
        flux_ref = q * q / rho + gas.pressure(law, rho)
        flux_prof = q * q / profile.rho[i + 1] + gas.pressure(law, profile.rho[i + 1])
        worst = max(worst, abs(flux_prof - flux_ref))
    return worst


def match_outlet_pressure(pipe, law, q, p_outlet, rho_lo=None, rho_hi=None,
                          substeps=8, gravity=GRAVITY):
    """Inlet density whose stationary profile hits the target pressure at
    the last cell center (bisection wrapper around integrate_steady)."""

    def outlet_gap(rho0):
        prof = integrate_steady(pipe, law, rho0, q, substeps, gravity)
        return gas.pressure(law, float(prof.rho[-1])) - p_outlet

    lo = rho_lo if rho_lo is not None else 0.05
    hi = rho_hi if rho_hi is not None else 20.0
    # scan a geometric grid for a sign change; sonic failures are skipped
    last = None
    for rho0 in np.geomspace(lo, hi, 96):
        try:
            gap = outlet_gap(float(rho0))
        except (SupersonicError, ValueError):
            continue
        if gap == 0.0:
            return integrate_steady(pipe, law, float(rho0), q, substeps, gravity)
        if last is not None and last[1] * gap < 0.0:
            root = brentq(outlet_gap, last[0], float(rho0), xtol=1e-14, rtol=8.9e-16)
            return integrate_steady(pipe, law, root, q, substeps, gravity)
        last = (float(rho0), gap)
    raise ValueError("no inlet density reaches the target outlet pressure")
