"""Thermodynamics and wave structure of the isentropic gas model.

Pressure laws, characteristic speeds, wave curves, an exact Riemann solver
and the physical energy pair.  Wave-curve and Riemann machinery requires
the isentropic law; the z-factor law supports pressure, sound speed and
eigenvalues only (it is an operating-range model, not a wave model).
"""

import math
from dataclasses import dataclass

from scipy.optimize import brentq

from gasnet import _kernels
from gasnet.errors import ConvergenceError, VacuumError  # noqa: F401

GRAVITY = 9.81


@dataclass(frozen=True)
class PressureLaw:
    """Parameters of p(rho): either kappa*rho**gamma or the affine z-factor
    closure p = r_theta*(1 + alpha_z*p)*rho."""

    kind: str
    kappa: float = 1.0
    gamma: float = 1.0
    r_theta: float = 1.0
    alpha_z: float = -0.5

    def __post_init__(self):
        if self.kind == "isentropic":
            if not self.kappa > 0.0:
                raise ValueError("kappa must be positive")
            if not 1.0 <= self.gamma <= 3.0:
                raise ValueError("gamma must lie in [1, 3]")
        elif self.kind == "zfactor":
            if not -0.9 < self.alpha_z < 0.0:
                raise ValueError("alpha_z must lie in (-0.9, 0)")
            if not self.r_theta > 0.0:
                raise ValueError("r_theta must be positive")
        else:
            raise ValueError(f"unknown pressure-law kind {self.kind!r}")

    @classmethod
    def isentropic(cls, kappa, gamma):
        return cls(kind="isentropic", kappa=kappa, gamma=gamma)

    @classmethod
    def zfactor(cls, r_theta, alpha_z):
        return cls(kind="zfactor", r_theta=r_theta, alpha_z=alpha_z)

    @property
    def is_isentropic(self):
        return self.kind == "isentropic"

    def require_isentropic(self, what):
        if not self.is_isentropic:
            raise ValueError(f"{what} requires the isentropic pressure law")


@dataclass(frozen=True)
class GasState:
    """Density/flux pair on a cell or at a trace."""

    rho: float
    q: float

    def __post_init__(self):
        if not self.rho > 0.0:
            raise ValueError(f"non-positive density {self.rho}")
        if not math.isfinite(self.rho) or not math.isfinite(self.q):
            raise ValueError("non-finite state")

    @property
    def v(self):
        return self.q / self.rho

    def mirrored(self):
        """The state seen through x -> -x (flux sign flips)."""
        return GasState(self.rho, -self.q)


def pressure(law, rho):
    """p(rho) for either law kind."""
    if not rho > 0.0:
        raise ValueError(f"non-positive density {rho}")
    if law.is_isentropic:
        return _kernels.pressure(rho, law.kappa, law.gamma)
    denom = 1.0 - law.alpha_z * law.r_theta * rho
    if denom <= 0.0:
        raise ValueError("z-factor law outside its operating range")
    return law.r_theta * rho / denom


def pressure_deriv(law, rho):
    if not rho > 0.0:
        raise ValueError(f"non-positive density {rho}")
    if law.is_isentropic:
        return _kernels.pressure_deriv(rho, law.kappa, law.gamma)
    denom = 1.0 - law.alpha_z * law.r_theta * rho
    if denom <= 0.0:
        raise ValueError("z-factor law outside its operating range")
    return law.r_theta / (denom * denom)


def sound_speed(law, rho):
    """c(rho) = sqrt(p'(rho))."""
    if not rho > 0.0:
        raise ValueError(f"non-positive density {rho}")
    if law.is_isentropic:
        return _kernels.sound_speed(rho, law.kappa, law.gamma)
    dp = pressure_deriv(law, rho)
    if dp <= 0.0:
        raise ValueError("law is not hyperbolic at this density")
    return math.sqrt(dp)


def eigenvalues(state, law):
    """Characteristic speeds (v - c, v + c)."""
    c = sound_speed(law, state.rho)
    v = state.v
    return v - c, v + c


def is_subsonic(state, law):
    """True iff the first speed is strictly negative and the second strictly
    positive."""
    lam1, lam2 = eigenvalues(state, law)
    return lam1 < 0.0 < lam2


def internal_energy(law, rho):
    """P(rho), the potential part of the physical energy density."""
    law.require_isentropic("energy pair")
    if not rho > 0.0:
        raise ValueError(f"non-positive density {rho}")
    if law.gamma == 1.0:
        return law.kappa * rho * math.log(rho)
    return law.kappa * rho ** law.gamma / (law.gamma - 1.0)


def energy_pair(state, law):
    """Physical energy density and flux (eta, Q) at a state."""
    eta = state.q * state.q / (2.0 * state.rho) + internal_energy(law, state.rho)
    flux = (eta + pressure(law, state.rho)) * state.v
    return eta, flux


def physical_flux(state, law):
    """f(u) = (q, q^2/rho + p(rho))."""
    return state.q, state.q * state.v + pressure(law, state.rho)


def lax_curve(base, sigma, family, law):
    """State at parameter sigma on the wave curve of the given family.

    sigma is the density offset: the new density is base.rho + sigma, with
    sigma > 0 on the shock branch for both families.  Family 1 holds right
    states of 1-waves whose left state is ``base`` (outlet-side closures);
    family 2 holds left states of 2-waves whose right state is ``base``
    (vertex-side ghosts).
    """
    law.require_isentropic("wave curves")
    if family not in (1, 2):
        raise ValueError("family must be 1 or 2")
    rho = base.rho + sigma
    if not rho > 0.0:
        raise VacuumError(f"curve parameter {sigma} leaves positive density")
    if sigma == 0.0:
        return base
    v = _kernels.curve_velocity(rho, base.rho, base.v, law.kappa, law.gamma, family)
    return GasState(rho, rho * v)


@dataclass(frozen=True)
class Wave:
    """One wave of a Riemann solution: 'shock' or 'rarefaction' with its
    speed range (equal endpoints for a shock)."""

    kind: str
    speeds: tuple


@dataclass(frozen=True)
class RiemannSolution:
    """Self-similar solution of a Riemann problem; sample with ``sampler``."""

    left: GasState
    right: GasState
    middle: GasState
    left_wave: Wave
    right_wave: Wave
    law: PressureLaw

    @property
    def middle_left(self):
        return self.middle

    @property
    def middle_right(self):
        return self.middle

    def sampler(self, xi):
        """State on the ray x/t = xi (right-of-wave convention at ties)."""
        rho, v = _kernels.sample(
            xi, self.left.rho, self.left.v, self.right.rho, self.right.v,
            self.middle.rho, self.middle.v, self.law.kappa, self.law.gamma)
        return GasState(rho, rho * v)


def solve_riemann(left, right, law):
    """Exact Riemann solution between two states under an isentropic law."""
    law.require_isentropic("the Riemann solver")
    rho_m, v_m = _kernels.middle_state(
        left.rho, left.v, right.rho, right.v, law.kappa, law.gamma)
    middle = GasState(rho_m, rho_m * v_m)

    if rho_m > left.rho:
        s = (middle.q - left.q) / (rho_m - left.rho)
        lwave = Wave("shock", (s, s))
    else:
        lwave = Wave("rarefaction", (left.v - sound_speed(law, left.rho),
                                     v_m - sound_speed(law, rho_m)))
    if rho_m > right.rho:
        s = (right.q - middle.q) / (right.rho - rho_m)
        rwave = Wave("shock", (s, s))
    else:
        rwave = Wave("rarefaction", (v_m + sound_speed(law, rho_m),
                                     right.v + sound_speed(law, right.rho)))
    return RiemannSolution(left, right, middle, lwave, rwave, law)


# ---------------------------------------------------------------------------
# wave-curve closures (shared by boundary conditions, valves and junctions)
# ---------------------------------------------------------------------------

def sonic_window(base, family, law):
    """Density-offset interval (sig_lo, sig_hi) around a subsonic base on
    which the wave curve stays strictly subsonic."""
    law.require_isentropic("wave curves")
    if not is_subsonic(base, law):
        raise ValueError("base state is not subsonic")

    def subsonic_at(sigma):
        try:
            return is_subsonic(lax_curve(base, sigma, family, law), law)
        except (VacuumError, ValueError):
            return False

    def edge(direction):
        lo = 0.0
        hi = direction * base.rho
        for _ in range(200):
            if not subsonic_at(hi):
                break
            lo = hi
            hi *= 2.0
        else:
            raise ConvergenceError("sonic window expansion failed")
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if subsonic_at(mid):
                lo = mid
            else:
                hi = mid
        return lo

    return edge(-0.5), edge(1.0)


def solve_on_curve(base, family, law, fn, window=None):
    """State on the subsonic part of a wave curve where ``fn(state)`` = 0.

    ``fn`` must change sign over the subsonic window; raises ValueError
    otherwise (the requested closure has no subsonic solution).
    """
    if fn(base) == 0.0:
        return base
    if window is None:
        window = sonic_window(base, family, law)
    lo, hi = window

    def g(sigma):
        return fn(lax_curve(base, sigma, family, law))

    g_lo, g_hi = g(lo), g(hi)
    if g_lo == 0.0:
        return lax_curve(base, lo, family, law)
    if g_hi == 0.0:
        return lax_curve(base, hi, family, law)
    if g_lo * g_hi > 0.0:
        raise ValueError("no subsonic state satisfies the requested closure")
    sigma = brentq(g, lo, hi, xtol=1e-15, rtol=8.9e-16, maxiter=200)
    return lax_curve(base, sigma, family, law)


def state_with_flux(base, family, q_target, law, window=None):
    """Subsonic state on the curve with flux ``q_target``; None when the
    target lies outside the reachable flux range."""
    try:
        return solve_on_curve(base, family, law, lambda u: u.q - q_target, window)
    except ValueError:
        return None
