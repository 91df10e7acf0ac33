"""Boundary feedback toward steady states and discrete decay certification.

Two layers: boundary feedback laws for the gas stepper (proportional
physical closure, PI flow control, prescribed inflow) and the diagonal
quasi-linear upwind scheme with its exponentially weighted discrete
Lyapunov function, the explicit decay rate and the admissible parameter
conditions.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from gasnet import gas
from gasnet.errors import SupersonicError
from gasnet.network import END, START, Signal


# ---------------------------------------------------------------------------
# boundary feedback laws for the gas network
# ---------------------------------------------------------------------------

@dataclass
class FeedbackLaw:
    """Boundary condition at a degree-1 node.

    proportional_physical: the trace obeys v = k*rho with k = k0 at x=0 and
    k = kL at x=L.  pi_flow: prescribed inflow flux q0(t) at x=0 and the PI
    relation q = kappa_L ((1 + k_L) rho - Z) at x=L, with the integrator
    Z' = alpha_L (rho_target(L) - rho(t, L)) stepped by forward Euler.
    prescribed_inflow: the named variable is pinned to a time signal.
    Ends are in the pipe's user frame; the stepper mirrors as needed.
    """

    kind: str
    k0: float = 0.0
    kL: float = 0.0
    kappa_L: float = 1.0
    alpha_L: float = 0.0
    k_L_pi: float = 0.0
    target: object = None
    variable: str = "q"
    signal: Signal = None
    q0: Signal = None

    def __post_init__(self):
        if self.kind not in ("proportional_physical", "pi_flow", "prescribed_inflow"):
            raise ValueError(f"unknown feedback law {self.kind!r}")
        for g in (self.k0, self.kL, self.kappa_L, self.alpha_L, self.k_L_pi):
            if not math.isfinite(g):
                raise ValueError("feedback gains must be finite")
        if self.kind == "prescribed_inflow":
            if self.variable not in ("rho", "q"):
                raise ValueError("prescribed variable must be 'rho' or 'q'")
            if self.signal is None:
                raise ValueError("prescribed_inflow needs a signal")
        if self.kind == "pi_flow" and self.target is None:
            raise ValueError("pi_flow needs a target profile")

    def target_outlet(self):
        return float(self.target.rho[-1]), float(self.target.q)

    def initial_memory(self):
        """Bumpless start: Z(0) chosen so the t=0 boundary flux equals the
        target steady flux."""
        if self.kind != "pi_flow":
            return None
        rho_l, q_l = self.target_outlet()
        return (1.0 + self.k_L_pi) * rho_l - q_l / self.kappa_L

    def make_ghost(self, cell, end, law, t, dt, memory):
        return feedback_ghost(self, end, cell, law, t, dt, memory)


def feedback_ghost(law, end, boundary_cell, gas_law, t, dt, controller_memory=None):
    """Ghost state for a boundary law, closed along the outgoing-family
    wave curve through the boundary cell (family 2 at x=0, family 1 at
    x=L); returns (ghost, updated controller memory)."""
    if not gas.is_subsonic(boundary_cell, gas_law):
        raise SupersonicError("boundary cell is not subsonic")
    family = 2 if end == START else 1
    memory = controller_memory

    if law.kind == "proportional_physical":
        k = law.k0 if end == START else law.kL
        ghost = gas.solve_on_curve(boundary_cell, family, gas_law,
                                   lambda u: u.v - k * u.rho)
    elif law.kind == "pi_flow":
        if end == START:
            flux = float(law.q0(t)) if law.q0 is not None else law.target_outlet()[1]
            ghost = gas.state_with_flux(boundary_cell, family, flux, gas_law)
            if ghost is None:
                raise ValueError("prescribed inflow flux is not subsonically reachable")
        else:
            if memory is None:
                memory = law.initial_memory()
            rho_target = law.target_outlet()[0]
            memory = memory + dt * law.alpha_L * (rho_target - boundary_cell.rho)
            z = memory
            ghost = gas.solve_on_curve(
                boundary_cell, family, gas_law,
                lambda u: u.q - law.kappa_L * ((1.0 + law.k_L_pi) * u.rho - z))
    else:  # prescribed_inflow
        datum = float(law.signal(t))
        if law.variable == "rho":
            ghost = gas.lax_curve(boundary_cell, datum - boundary_cell.rho, family, gas_law)
            if not gas.is_subsonic(ghost, gas_law):
                raise ValueError("prescribed density leaves the subsonic region")
        else:
            ghost = gas.state_with_flux(boundary_cell, family, datum, gas_law)
            if ghost is None:
                raise ValueError("prescribed flux is not subsonically reachable")
    return ghost, memory


def l2_distance_to_target(state, targets):
    """dx-weighted l2 norm of (rho - rho*, q - q*) over all pipes.

    ``targets`` maps pipe id to user-frame (rho*, q*) arrays matching the
    grids.
    """
    from gasnet.fv import user_frame
    acc = 0.0
    for pid, grid in state.grids.items():
        rho_t, q_t = targets[pid]
        rho_t = np.asarray(rho_t, dtype=float)
        q_t = np.asarray(q_t, dtype=float)
        if rho_t.shape != grid.rho.shape or q_t.shape != grid.q.shape:
            raise ValueError(f"target for pipe {pid!r} does not match the grid")
        rho_u, q_u = user_frame(grid)
        acc += grid.dx * (float(np.sum((rho_u - rho_t) ** 2))
                          + float(np.sum((q_u - q_t) ** 2)))
    return math.sqrt(acc)


def fit_decay_rate(times, distances, window=0.5):
    """Least-squares exponential rate over the trailing fraction of a
    distance series: returns nu_hat with distance ~ exp(-nu_hat t)."""
    times = np.asarray(times, dtype=float)
    distances = np.asarray(distances, dtype=float)
    n = len(times)
    start = int(n * (1.0 - window))
    t = times[start:]
    d = distances[start:]
    good = d > 0.0
    if np.count_nonzero(good) < 2:
        raise ValueError("not enough positive samples to fit a rate")
    slope = np.polyfit(t[good], np.log(d[good]), 1)[0]
    return -float(slope)


# ---------------------------------------------------------------------------
# diagonal quasi-linear upwind scheme
# ---------------------------------------------------------------------------

class DiagonalSystem:
    """Diagonal system u_t + diag(lambda_j(u)) u_x = 0 on [0, 1] with the
    reflecting boundary closure u(t, 0) = diag(kappa) u(t, 1).

    ``lambdas``: one positive constant or one callable (R^d -> R) per
    component; ``delta`` is the trust radius of the ball around the origin
    on which the speeds are trusted positive.
    """

    def __init__(self, lambdas, kappa, delta):
        self.lambdas = list(lambdas)
        self.kappa = np.asarray(kappa, dtype=float)
        self.delta = float(delta)
        self.d = len(self.lambdas)
        if self.kappa.shape != (self.d,):
            raise ValueError("need one boundary gain per component")
        if np.any(self.kappa <= 0.0):
            raise ValueError("boundary gains must be positive")
        if not self.delta > 0.0:
            raise ValueError("trust radius must be positive")
        self.is_linear = all(not callable(lam) for lam in self.lambdas)
        if self.is_linear and any(lam <= 0.0 for lam in self.lambdas):
            raise ValueError("speeds must be positive")

    def speeds(self, values):
        """Per-component speeds at every cell; values has shape (d, m)."""
        d, m = values.shape
        out = np.empty((d, m))
        for j, lam in enumerate(self.lambdas):
            if callable(lam):
                out[j] = [lam(values[:, i]) for i in range(m)]
            else:
                out[j] = lam
        return out

    def courant_bound(self, dt, dx, n_samples=10_000):
        """(dt/dx) * sup over the trust ball of the largest speed."""
        pts = self.ball_samples(n_samples)
        worst = 0.0
        for lam in self.lambdas:
            if callable(lam):
                worst = max(worst, max(lam(pts[:, i]) for i in range(pts.shape[1])))
            else:
                worst = max(worst, lam)
        return (dt / dx) * worst

    def ball_samples(self, n_samples=10_000):
        """Deterministic sample of the trust ball (grid on the enclosing
        cube, filtered), always including the origin and axis extremes."""
        d = self.d
        per_axis = max(2, int(round(n_samples ** (1.0 / d))))
        axes = [np.linspace(-self.delta, self.delta, per_axis)] * d
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=0)
        keep = np.linalg.norm(pts, axis=0) <= self.delta + 1e-15
        pts = pts[:, keep]
        extra = [np.zeros(d)]
        for j in range(d):
            e = np.zeros(d)
            e[j] = self.delta
            extra.extend([e, -e])
        return np.concatenate([pts, np.stack(extra, axis=1)], axis=1)


def attach_ghost(system, interior):
    """Prepend the reflecting ghost column: values[:, 0] = kappa * u_N."""
    interior = np.asarray(interior, dtype=float)
    ghost = system.kappa * interior[:, -1]
    return np.concatenate([ghost[:, None], interior], axis=1)


def check_compatibility(system, values, tol=1e-12):
    """Verify the ghost column matches the boundary closure."""
    expected = system.kappa * values[:, -1]
    if not np.allclose(values[:, 0], expected, rtol=0.0, atol=tol):
        raise ValueError("initial data violates the boundary compatibility condition")


def diagonal_step(system, values, dt, dx, d_max=None):
    """One upwind step of the ghost-inclusive array (d, N+2).

    Column 0 is the ghost at i=-1; the returned array carries the
    refreshed ghost.  Preconditions: the CFL bound over the trust ball and
    the state staying inside it.
    """
    values = np.asarray(values, dtype=float)
    if d_max is None:
        d_max = system.courant_bound(dt, dx)
    if d_max > 1.0 + 1e-12:
        raise ValueError(f"CFL condition violated: max Courant number {d_max:.6f} > 1")
    norms = np.linalg.norm(values[:, 1:], axis=0)
    if np.any(norms > system.delta * (1.0 + 1e-12)):
        raise ValueError("state left the trust ball of the scheme")
    lam = system.speeds(values[:, 1:])
    new_interior = values[:, 1:] - (dt / dx) * lam * (values[:, 1:] - values[:, :-1])
    return attach_ghost(system, new_interior)


def discrete_lyapunov(values, mu, dx):
    """Weighted squared norm dx * sum_i sum_j u_{j,i}^2 exp(-mu_j x_i)
    over the interior columns (x_i = i dx)."""
    values = np.asarray(values, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if np.any(mu < 0.0):
        raise ValueError("weights must be nonnegative")
    n = values.shape[1]
    x = np.arange(n) * dx
    w = np.exp(-np.outer(mu, x))
    return float(dx * np.sum(values ** 2 * w))


@dataclass
class AdmissibleParams:
    """Per-component Courant bounds and the admissibility conditions on
    the boundary gains and Lyapunov weights."""

    d_min: np.ndarray
    d_max: np.ndarray
    kappa_sq_bound: np.ndarray
    mu_bound: np.ndarray
    mu_bound_kappa_sq: np.ndarray
    kappa_ok: np.ndarray
    mu_ok: object = None

    @property
    def all_ok(self):
        ok = bool(np.all(self.kappa_ok))
        if self.mu_ok is not None:
            ok = ok and bool(np.all(self.mu_ok))
        return ok


def admissible_parameters(system, dt, dx, mu=None, n_samples=10_000,
                          inflation=1e-6):
    """Courant-number bounds over the trust ball and the admissible ranges
    for the boundary gains and weights.

    D_j^min/max are sampled over the ball and widened by ``inflation``.
    The weight bound is the printed one, mu_j <= -log(kappa_j D_min/D_max);
    the kappa_j^2 variant is reported alongside (see mu_bound_kappa_sq).
    """
    pts = system.ball_samples(n_samples)
    ratio = dt / dx
    raw_min = np.empty(system.d)
    raw_max = np.empty(system.d)
    for j, lam in enumerate(system.lambdas):
        if callable(lam):
            vals = np.array([lam(pts[:, i]) for i in range(pts.shape[1])])
        else:
            vals = np.array([lam])
        if np.any(vals <= 0.0):
            raise ValueError(f"component {j}: speed loses positivity on the trust ball")
        raw_min[j] = ratio * float(np.min(vals))
        raw_max[j] = ratio * float(np.max(vals))
    if np.any(raw_min <= 0.0) or np.any(raw_max > 1.0 + 1e-12) or np.any(raw_min > raw_max):
        raise ValueError("Courant bounds must satisfy 0 < D_min <= D_max <= 1")
    # widen for sampling safety; the exact CFL cap stays at one
    d_min = raw_min * (1.0 - inflation)
    d_max = np.minimum(raw_max * (1.0 + inflation), 1.0)

    kappa_sq_bound = d_min / d_max
    with np.errstate(divide="ignore"):
        mu_bound = -np.log(system.kappa * d_min / d_max)
        mu_bound_kappa_sq = -np.log(system.kappa ** 2 * d_min / d_max)
    kappa_ok = (system.kappa ** 2 > 0.0) & (system.kappa ** 2 <= kappa_sq_bound)
    mu_ok = None
    if mu is not None:
        mu = np.asarray(mu, dtype=float)
        mu_ok = (mu >= 0.0) & (mu <= mu_bound)
    return AdmissibleParams(d_min, d_max, kappa_sq_bound, mu_bound,
                            mu_bound_kappa_sq, kappa_ok, mu_ok)


def decay_rate(d_min, mu, dx, dt):
    """Certified rate nu = min_j D_j^min exp(-mu_j dx) mu_j dx / (2 dt)."""
    d_min = np.asarray(d_min, dtype=float)
    mu = np.asarray(mu, dtype=float)
    return float(np.min(d_min * np.exp(-mu * dx) * mu * dx / (2.0 * dt)))


@dataclass
class LyapunovReport:
    """Outcome of a decay certification run."""

    mu: np.ndarray
    times: np.ndarray
    l_series: np.ndarray
    nu: float
    admissible: AdmissibleParams
    gradient_ok: bool
    bound_holds: object  # True/False, or None when the verdict is withheld

    @property
    def verdict_available(self):
        return self.bound_holds is not None


def certify_decay(system, initial, dt, dx, n_steps, mu, grad_threshold=None,
                  n_samples=10_000):
    """Run the upwind scheme and check L^m <= exp(-nu t^m) L^0.

    ``initial`` is the interior array (d, N+1).  The verdict is withheld
    (bound_holds None) when the kappa/mu admissibility conditions fail or
    the initial data violates the trust-ball/gradient gates.
    """
    initial = np.asarray(initial, dtype=float)
    mu = np.asarray(mu, dtype=float)
    adm = admissible_parameters(system, dt, dx, mu=mu, n_samples=n_samples)
    nu = decay_rate(adm.d_min, mu, dx, dt)

    if grad_threshold is None:
        grad_threshold = system.delta
    grads = np.abs(np.diff(initial, axis=1)) / dx
    gradient_ok = bool(np.all(grads <= grad_threshold + 1e-15)) \
        and bool(np.all(np.linalg.norm(initial, axis=0) <= system.delta + 1e-15))

    values = attach_ghost(system, initial)
    check_compatibility(system, values)
    d_max = float(np.max(adm.d_max))
    l_series = np.empty(n_steps + 1)
    l_series[0] = discrete_lyapunov(values[:, 1:], mu, dx)
    for m in range(1, n_steps + 1):
        values = diagonal_step(system, values, dt, dx, d_max=d_max)
        l_series[m] = discrete_lyapunov(values[:, 1:], mu, dx)
    times = np.arange(n_steps + 1) * dt

    if not adm.all_ok or not gradient_ok:
        verdict = None
    else:
        bound = np.exp(-nu * times) * l_series[0] * (1.0 + 1e-12)
        verdict = bool(np.all(l_series <= bound))
    return LyapunovReport(mu=mu, times=times, l_series=l_series, nu=nu,
                          admissible=adm, gradient_ok=gradient_ok,
                          bound_holds=verdict)
