"""Cost functionals over runs and control schedules, the one-step
(instantaneous) control heuristic, and brute-force schedule search."""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from gasnet import fv, gas
from gasnet.errors import GasFlowError
from gasnet.network import Signal

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class ControlSchedule:
    """Piecewise-constant control on a uniform grid for one junction."""

    junction: str
    dt: float
    values: tuple
    bounds: tuple = (-math.inf, math.inf)

    def __post_init__(self):
        if not self.dt > 0.0:
            raise ValueError("control grid spacing must be positive")
        if not self.values:
            raise ValueError("schedule needs at least one value")
        lo, hi = self.bounds
        if any(not lo <= v <= hi for v in self.values):
            raise ValueError("schedule values violate the bounds")

    def __call__(self, t):
        k = min(int(t / self.dt), len(self.values) - 1)
        if t < 0.0:
            k = 0
        return self.values[k]

    def signal(self):
        times = tuple(k * self.dt for k in range(len(self.values)))
        return Signal(times, tuple(self.values), "piecewise_constant")

    @classmethod
    def constant(cls, junction, value, dt, bounds=(-math.inf, math.inf)):
        return cls(junction, dt, (float(value),), bounds)


@dataclass(frozen=True)
class CostSpec:
    """Total-variation weight plus pressure tracking on a pipe interval
    over a finite horizon."""

    tv_weight: float
    target_pressure: float
    pipe: str
    x1: float
    x2: float
    horizon: float

    def __post_init__(self):
        if not self.horizon > 0.0:
            raise ValueError("horizon must be positive")
        if not 0.0 <= self.x1 < self.x2:
            raise ValueError("need 0 <= x1 < x2")
        if self.tv_weight < 0.0:
            raise ValueError("tv_weight must be nonnegative")


def total_variation(schedule):
    """Sum of jump magnitudes of the schedule."""
    v = schedule.values
    return math.fsum(abs(b - a) for a, b in zip(v, v[1:]))


def region_weights(pipe, x1, x2):
    """Per-cell overlap lengths of [x1, x2] with the pipe's cells."""
    if x2 > pipe.length + 1e-12:
        raise ValueError("tracking region extends beyond the pipe")
    edges = np.arange(pipe.n_cells + 1) * pipe.dx
    lo = np.clip(edges[:-1], x1, x2)
    hi = np.clip(edges[1:], x1, x2)
    return np.maximum(hi - lo, 0.0)


def _pressure_gap_integral(rho_row, weights, law, p_bar):
    acc = 0.0
    for r, w in zip(rho_row, weights):
        if w > 0.0:
            acc += abs(gas.pressure(law, float(r)) - p_bar) * w
    return acc


def tracking_cost(trajectory, spec, law=None):
    """Rectangle-rule quadrature (left in time, cell overlap in space) of
    |p(rho) - target| over the region and horizon."""
    pipe = trajectory.network.pipes[spec.pipe]
    law = law or pipe.law
    times = trajectory.times
    if times[-1] < spec.horizon - 1e-9 * max(1.0, spec.horizon):
        raise ValueError("trajectory does not cover the cost horizon")
    weights = region_weights(pipe, spec.x1, spec.x2)
    rho = trajectory.rho[spec.pipe]
    acc = 0.0
    for m in range(len(times) - 1):
        if times[m] >= spec.horizon:
            break
        dt = min(times[m + 1], spec.horizon) - times[m]
        acc += dt * _pressure_gap_integral(rho[m], weights, law, spec.target_pressure)
    return acc


def total_cost(trajectory, schedule, spec, law=None):
    """tv_weight * TV(u) plus the tracking term; the reported total is the
    exact sum of the two parts."""
    tv = total_variation(schedule)
    tracking = tracking_cost(trajectory, spec, law)
    return spec.tv_weight * tv + tracking, tv, tracking


def _golden_section(fn, lo, hi, budget):
    """Deterministic golden-section minimisation with a capped number of
    evaluations; returns (x_best, f_best, exhausted)."""
    cache = {}

    def f(x):
        if x not in cache:
            cache[x] = fn(x)
        return cache[x]

    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    evals = [f(a), f(b), f(c), f(d)]
    used = 4
    while used < budget and (b - a) > 1e-10 * max(1.0, abs(lo), abs(hi)):
        if f(c) <= f(d):
            b, d = d, c
            c = b - _GOLDEN * (b - a)
        else:
            a, c = c, d
            d = a + _GOLDEN * (b - a)
        f(c), f(d)
        used += 1
    best = min(cache.items(), key=lambda kv: (kv[1], kv[0]))
    exhausted = used >= budget and (b - a) > 1e-3 * abs(hi - lo)
    return best[0], best[1], exhausted


def instantaneous_control(network, initial, spec, junction_id, dt_c,
                          bounds, u0=0.0, budget=32, cfl_number=0.5,
                          output_interval=None):
    """Receding one-step heuristic: at every control-grid step pick the
    control minimising the next step's objective integrand (spatial
    tracking term after one control interval plus the incremental
    total-variation penalty), by golden-section search within bounds.

    Returns (schedule, trajectory, exhausted_flag); the trajectory is the
    closed-loop rerun under the committed schedule.
    """
    n_steps = int(round(spec.horizon / dt_c))
    if abs(n_steps * dt_c - spec.horizon) > 1e-9 * spec.horizon or n_steps < 1:
        raise ValueError("control grid must tile the horizon")
    lo, hi = bounds
    pipe = network.pipes[spec.pipe]
    law = pipe.law
    state = fv.initial_state(network, initial)
    weights = region_weights(state.network.pipes[spec.pipe], spec.x1, spec.x2)

    committed = []
    u_prev = float(u0)
    any_exhausted = False
    for _ in range(n_steps):
        base = state

        def objective(u):
            try:
                ahead = fv.advance_to(base, base.time + dt_c, cfl_number,
                                      controls={junction_id: float(u)})
            except GasFlowError:
                return math.inf
            rho_u, _ = fv.user_frame(ahead.grids[spec.pipe])
            gap = _pressure_gap_integral(rho_u, weights, law, spec.target_pressure)
            return gap + spec.tv_weight * abs(u - u_prev)

        u_star, _, exhausted = _golden_section(objective, lo, hi, budget)
        any_exhausted = any_exhausted or exhausted
        committed.append(u_star)
        state = fv.advance_to(state, state.time + dt_c, cfl_number,
                              controls={junction_id: u_star})
        u_prev = u_star

    schedule = ControlSchedule(junction_id, dt_c, tuple(committed), bounds)
    if output_interval is None:
        output_interval = dt_c / 8.0
    trajectory = fv.run(network, initial, spec.horizon, cfl_number,
                        output_interval=output_interval,
                        controls={junction_id: schedule.signal()})
    return schedule, trajectory, any_exhausted


def grid_search(network, initial, spec, junction_id, candidates, dt_c=None,
                cfl_number=0.5, threads=1, output_interval=None):
    """Simulate every candidate constant control and tabulate the costs.

    Returns (best_schedule, table); table rows are (index, value, total,
    tv, tracking, feasible) and the argmin breaks ties by lowest index.
    Infeasible candidates (failed runs) are excluded from the argmin.
    """
    dt_c = dt_c or spec.horizon
    if output_interval is None:
        output_interval = spec.horizon / 64.0
    values = [float(v) for v in candidates]

    def evaluate(idx):
        u = values[idx]
        schedule = ControlSchedule.constant(junction_id, u, dt_c)
        try:
            traj = fv.run(network, initial, spec.horizon, cfl_number,
                          output_interval=output_interval,
                          controls={junction_id: schedule.signal()},
                          record_junctions=False)
        except GasFlowError:
            return idx, u, math.inf, 0.0, math.inf, False
        total, tv, tracking = total_cost(traj, schedule, spec)
        return idx, u, total, tv, tracking, True

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            table = list(pool.map(evaluate, range(len(values))))
    else:
        table = [evaluate(i) for i in range(len(values))]

    feasible = [row for row in table if row[5]]
    if not feasible:
        raise ValueError("every candidate control failed to simulate")
    best = min(feasible, key=lambda row: (row[2], row[0]))
    best_schedule = ControlSchedule.constant(junction_id, best[1], dt_c)
    return best_schedule, table
