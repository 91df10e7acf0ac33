"""First-order Godunov time stepper on the pipe network.

Per step: junction and boundary ghost states are built from start-of-step
cell averages, every pipe is updated conservatively with exact-Riemann
interface fluxes, and cell-centred friction/gravity sources are added
explicitly.  All reads come from the step-start state and all writes go to
the step-end state, so junction solves and pipe sweeps are independent
within a step.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from gasnet import _kernels, coupling, gas
from gasnet.errors import GasFlowError, StepError
from gasnet.gas import GRAVITY, GasState
from gasnet.network import END, START, normalize_orientation

MAX_STEPS = 10_000_000


@dataclass
class EdgeGrid:
    """Cell averages of one pipe in its local frame."""

    pipe: object
    rho: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=float).copy()
        self.q = np.asarray(self.q, dtype=float).copy()
        if self.rho.shape != (self.pipe.n_cells,) or self.q.shape != (self.pipe.n_cells,):
            raise ValueError(f"pipe {self.pipe.id}: grid arrays must have one entry per cell")
        if not np.all(self.rho > 0.0):
            raise ValueError(f"pipe {self.pipe.id}: non-positive initial density")

    @property
    def dx(self):
        return self.pipe.dx

    def state(self, i):
        return GasState(float(self.rho[i]), float(self.q[i]))


@dataclass
class NetworkState:
    """Simulation state: per-pipe grids sharing one time stamp, plus the
    PI controller memory per boundary node."""

    network: object
    time: float
    grids: dict
    controller_memory: dict = field(default_factory=dict)
    gravity: float = GRAVITY

    def total_mass(self):
        return math.fsum(float(np.sum(g.rho)) * g.dx for g in self.grids.values())

    def kinetic_energy(self):
        return math.fsum(float(np.sum(g.q ** 2 / (2.0 * g.rho))) * g.dx
                         for g in self.grids.values())


def cfl_timestep(state, cfl_number):
    """Largest stable step: cfl_number * min over cells of dx / (|v|+c)."""
    if not 0.0 < cfl_number <= 1.0:
        raise ValueError("cfl_number must lie in (0, 1]")
    dt = math.inf
    for grid in state.grids.values():
        law = grid.pipe.law
        smax = _kernels.max_char_speed(grid.rho, grid.q, law.kappa, law.gamma)
        if not smax > 0.0 or not math.isfinite(smax):
            raise StepError("non-hyperbolic cell encountered",
                            time=state.time, location=grid.pipe.id)
        dt = min(dt, grid.dx / smax)
    return cfl_number * dt


def godunov_flux(left, right, law):
    """Godunov interface flux: the physical flux at the stationary ray of
    the exact Riemann solution."""
    law.require_isentropic("the Godunov flux")
    return _kernels.interface_flux(left.rho, left.q, right.rho, right.q,
                                   law.kappa, law.gamma)


def source_term(state, friction, slope, gravity, law):
    """Cell source (0, -f rho v|v| - g sin(slope) rho)."""
    return (0.0,
            -friction * state.q * abs(state.q) / state.rho
            - gravity * math.sin(slope) * state.rho)


def _vertex_cell(grid, end):
    if end == START:
        return grid.state(0)
    return grid.state(grid.pipe.n_cells - 1).mirrored()


def junction_ghosts(state, t=None, controls=None):
    """Solve every junction at the given state.

    Returns (ghosts, records): ghosts maps (pipe_id, 'left'|'right') to a
    local-frame GasState; records keep the solve output per junction for
    diagnostics.
    """
    net = state.network
    if t is None:
        t = state.time
    ghosts = {}
    records = {}
    for j in net.junctions.values():
        cells = []
        laws = []
        for pid, end in j.edges:
            cells.append(_vertex_cell(state.grids[pid], end))
            laws.append(net.pipes[pid].law)
        override = None
        if controls and j.id in controls:
            sig = controls[j.id]
            override = sig(t) if callable(sig) else float(sig)
        try:
            sol = coupling.solve_junction(j, cells, laws, t, control=override)
        except GasFlowError as exc:
            raise StepError(f"junction solve failed: {exc}",
                            time=t, location=j.id) from exc
        for (pid, end), ghost in zip(j.edges, sol.ghost_states):
            if end == START:
                ghosts[(pid, "left")] = ghost
            else:
                ghosts[(pid, "right")] = ghost.mirrored()
        records[j.id] = sol
    return ghosts, records


def _boundary_ghosts(state, dt, controls=None):
    """Ghost states and updated controller memory for every boundary node."""
    net = state.network
    ghosts = {}
    memory = dict(state.controller_memory)
    for b in net.boundaries.values():
        pipe = net.pipes[b.pipe]
        grid = state.grids[b.pipe]
        reversed_frame = pipe.orientation == "reversed"
        local_end = b.end
        user_end = local_end
        if reversed_frame:
            user_end = START if local_end == END else END
        cell_local = grid.state(0) if local_end == START else grid.state(pipe.n_cells - 1)
        cell_user = cell_local.mirrored() if reversed_frame else cell_local
        try:
            ghost_user, mem = b.condition.make_ghost(
                cell_user, user_end, pipe.law, state.time, dt, memory.get(b.id))
        except (GasFlowError, ValueError) as exc:
            raise StepError(f"boundary closure failed: {exc}",
                            time=state.time, location=b.id) from exc
        if mem is not None:
            memory[b.id] = mem
        ghost_local = ghost_user.mirrored() if reversed_frame else ghost_user
        side = "left" if local_end == START else "right"
        ghosts[(b.pipe, side)] = ghost_local
    return ghosts, memory


def step(state, dt, controls=None):
    """One explicit step of size dt (caller guarantees the CFL bound)."""
    ghosts, _ = junction_ghosts(state, controls=controls)
    bghosts, memory = _boundary_ghosts(state, dt, controls=controls)
    ghosts.update(bghosts)

    new_grids = {}
    for pid, grid in state.grids.items():
        pipe = grid.pipe
        law = pipe.law
        try:
            gl = ghosts[(pid, "left")]
            gr = ghosts[(pid, "right")]
        except KeyError:
            raise StepError("pipe end has no ghost state (unattached end?)",
                            time=state.time, location=pid) from None
        try:
            rho_new, q_new = _kernels.sweep_pipe(
                grid.rho, grid.q, gl.rho, gl.q, gr.rho, gr.q,
                dt, grid.dx, pipe.friction, _sin_slope(pipe), state.gravity,
                law.kappa, law.gamma)
        except (GasFlowError, ValueError) as exc:
            raise StepError(f"update failed: {exc}", time=state.time, location=pid) from exc
        new_grids[pid] = EdgeGrid(pipe, rho_new, q_new)
    return NetworkState(state.network, state.time + dt, new_grids, memory, state.gravity)


def _sin_slope(pipe):
    cached = getattr(pipe, "_sin_slope", None)
    if cached is None:
        cached = np.sin(pipe.slope)
        pipe._sin_slope = cached
    return cached


def initial_state(network, initial, gravity=GRAVITY):
    """NetworkState from user-frame per-pipe (rho, q) arrays.

    The network is normalized first; profiles on reversed pipes are
    mirrored into the local frame.
    """
    net = normalize_orientation(network)
    for pipe in net.pipes.values():
        pipe.law.require_isentropic("time stepping")
    grids = {}
    for pid, pipe in net.pipes.items():
        try:
            rho, q = initial[pid]
        except KeyError:
            raise ValueError(f"missing initial data for pipe {pid!r}") from None
        rho = np.asarray(rho, dtype=float)
        q = np.asarray(q, dtype=float)
        if pipe.orientation == "reversed":
            rho = rho[::-1].copy()
            q = -q[::-1]
        grids[pid] = EdgeGrid(pipe, rho, q)
    memory = {}
    for b in net.boundaries.values():
        init = getattr(b.condition, "initial_memory", None)
        if init is not None:
            z0 = init()
            if z0 is not None:
                memory[b.id] = z0
    return NetworkState(net, 0.0, grids, memory, gravity)


def user_frame(grid):
    """Cell arrays of a grid mapped back to the pipe's user orientation."""
    if grid.pipe.orientation == "reversed":
        return grid.rho[::-1].copy(), -grid.q[::-1]
    return grid.rho.copy(), grid.q.copy()


def advance_to(state, t_target, cfl_number, controls=None):
    """March the state to exactly t_target (final steps clipped)."""
    guard = 0
    while state.time < t_target - 1e-14 * max(1.0, abs(t_target)):
        dt = min(cfl_timestep(state, cfl_number), t_target - state.time)
        if not dt > 0.0:
            raise StepError("time step collapsed to zero", time=state.time)
        state = step(state, dt, controls=controls)
        guard += 1
        if guard > MAX_STEPS:
            raise StepError("step budget exhausted", time=state.time)
    return state


@dataclass
class Trajectory:
    """Recorded run: sample times, user-frame cell data per pipe, junction
    trace log and bulk diagnostics."""

    times: np.ndarray
    rho: dict
    q: dict
    junction_log: list
    mass: np.ndarray
    kinetic_energy: np.ndarray
    final_state: NetworkState

    @property
    def network(self):
        return self.final_state.network

    def pressures(self, pid):
        pipe = self.network.pipes[pid]
        return np.array([[gas.pressure(pipe.law, r) for r in row] for row in self.rho[pid]])


def run(network, initial, horizon, cfl_number=0.8, output_interval=None,
        gravity=GRAVITY, controls=None, record_junctions=True):
    """Simulate from t=0 to the horizon, sampling on a fixed output grid.

    ``initial`` maps pipe id to user-frame (rho, q) arrays.  Sample times
    (multiples of output_interval plus the horizon) are hit exactly by
    clipping the CFL step.  Junction traces and the vertex energy balance
    are recorded at every sample time.
    """
    if horizon < 0.0:
        raise ValueError("horizon must be nonnegative")
    state = initial_state(network, initial, gravity)
    if output_interval is None:
        sample_times = [0.0, horizon] if horizon > 0.0 else [0.0]
    else:
        if not output_interval > 0.0:
            raise ValueError("output_interval must be positive")
        n = int(math.floor(horizon / output_interval + 1e-9))
        sample_times = [k * output_interval for k in range(n + 1)]
        if sample_times[-1] < horizon - 1e-12 * max(1.0, horizon):
            sample_times.append(horizon)
    times = []
    rho = {pid: [] for pid in state.grids}
    q = {pid: [] for pid in state.grids}
    mass = []
    kin = []
    jlog = []

    def record(st):
        times.append(st.time)
        for pid, grid in st.grids.items():
            r_u, q_u = user_frame(grid)
            rho[pid].append(r_u)
            q[pid].append(q_u)
        mass.append(st.total_mass())
        kin.append(st.kinetic_energy())
        if record_junctions and st.network.junctions:
            _, records = junction_ghosts(st, controls=controls)
            for jid, sol in records.items():
                junction = st.network.junctions[jid]
                laws = [st.network.pipes[pid].law for pid, _ in junction.edges]
                balance = coupling.junction_entropy_flux(sol.ghost_states, laws)
                for (pid, _), tr in zip(junction.edges, sol.ghost_states):
                    jlog.append((st.time, jid, pid, tr.rho, tr.q, balance))

    record(state)
    for t_s in sample_times[1:]:
        state = advance_to(state, t_s, cfl_number, controls=controls)
        record(state)

    return Trajectory(
        times=np.asarray(times),
        rho={pid: np.asarray(v) for pid, v in rho.items()},
        q={pid: np.asarray(v) for pid, v in q.items()},
        junction_log=jlog,
        mass=np.asarray(mass),
        kinetic_energy=np.asarray(kin),
        final_state=state,
    )
