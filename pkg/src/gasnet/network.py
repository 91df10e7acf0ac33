"""Directed-graph data model of pipes, junctions and boundary nodes.

Every pipe is the interval (0, length) in its own local frame.  At a vertex
the solver works in vertex-outgoing coordinates (vertex at x=0, v > 0 means
outflow); ``normalize_orientation`` flips pipes where that helps and the
time stepper mirrors the remaining x=L attachments on the fly.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

START = "start"
END = "end"


@dataclass(frozen=True)
class Signal:
    """Sampled time signal, piecewise constant or piecewise linear."""

    times: tuple
    values: tuple
    mode: str = "piecewise_constant"

    def __post_init__(self):
        if len(self.times) != len(self.values) or not self.times:
            raise ValueError("signal needs matching, non-empty times and values")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("signal times must be strictly increasing")
        if self.mode not in ("piecewise_constant", "piecewise_linear"):
            raise ValueError(f"unknown signal mode {self.mode!r}")

    @classmethod
    def constant(cls, value):
        return cls(times=(0.0,), values=(float(value),))

    def __call__(self, t):
        times, values = self.times, self.values
        if t <= times[0]:
            return values[0]
        if t >= times[-1]:
            return values[-1]
        k = int(np.searchsorted(times, t, side="right")) - 1
        if self.mode == "piecewise_constant":
            return values[k]
        w = (t - times[k]) / (times[k + 1] - times[k])
        return (1.0 - w) * values[k] + w * values[k + 1]


@dataclass(eq=False)
class Pipe:
    """One edge: geometry, friction, per-cell slope and its pressure law."""

    id: str
    length: float
    n_cells: int
    law: object
    friction: float = 0.0
    slope: object = 0.0
    orientation: str = "forward"

    def __post_init__(self):
        if not self.length > 0.0:
            raise ValueError(f"pipe {self.id}: length must be positive")
        if self.n_cells < 2:
            raise ValueError(f"pipe {self.id}: need at least 2 cells")
        slope = np.asarray(self.slope, dtype=float)
        if slope.ndim == 0:
            slope = np.full(self.n_cells, float(slope))
        if slope.shape != (self.n_cells,):
            raise ValueError(f"pipe {self.id}: slope array must have one entry per cell")
        if np.any(np.abs(slope) >= math.pi / 2.0):
            raise ValueError(f"pipe {self.id}: slope angles must lie in (-pi/2, pi/2)")
        self.slope = slope
        if self.orientation not in ("forward", "reversed"):
            raise ValueError(f"pipe {self.id}: bad orientation {self.orientation!r}")

    @property
    def dx(self):
        return self.length / self.n_cells

    @property
    def cell_centers(self):
        return (np.arange(self.n_cells) + 0.5) * self.dx

    def flipped(self):
        """The same pipe parameterised by x -> length - x."""
        return Pipe(
            id=self.id,
            length=self.length,
            n_cells=self.n_cells,
            law=self.law,
            friction=self.friction,
            slope=-self.slope[::-1].copy(),
            orientation="reversed" if self.orientation == "forward" else "forward",
        )


@dataclass(eq=False)
class Junction:
    """A vertex: ordered adjacent pipe ends, coupling kind, control signal."""

    id: str
    edges: list
    coupling: object
    control: Signal = None


@dataclass(eq=False)
class BoundaryNode:
    """Degree-1 vertex carrying an external boundary condition object."""

    id: str
    pipe: str
    end: str
    condition: object


@dataclass(eq=False)
class Network:
    pipes: dict
    junctions: dict
    boundaries: dict = field(default_factory=dict)

    def attachments(self):
        """Map (pipe_id, end) -> ('junction'|'boundary', node) for all
        attached ends; unattached ends are absent."""
        out = {}
        for j in self.junctions.values():
            for pipe_id, end in j.edges:
                out.setdefault((pipe_id, end), []).append(("junction", j))
        for b in self.boundaries.values():
            out.setdefault((b.pipe, b.end), []).append(("boundary", b))
        return out


def validate(network):
    """Structural diagnostics; empty list iff the network is well formed.

    Total: returns messages instead of raising, even on malformed input.
    """
    problems = []
    att = network.attachments()

    for key, holders in att.items():
        pipe_id, end = key
        if pipe_id not in network.pipes:
            problems.append(f"attachment references missing pipe {pipe_id!r}")
        if end not in (START, END):
            problems.append(f"attachment on pipe {pipe_id!r} has bad end {end!r}")
        if len(holders) > 1:
            names = ", ".join(h[1].id for h in holders)
            problems.append(f"pipe end ({pipe_id}, {end}) attached more than once: {names}")

    for pipe in network.pipes.values():
        for end in (START, END):
            if (pipe.id, end) not in att:
                problems.append(f"dangling pipe end ({pipe.id}, {end})")

    for j in network.junctions.values():
        n = len(j.edges)
        if n < 1:
            problems.append(f"junction {j.id}: no adjacent edges")
        kind = getattr(j.coupling, "variant", None)
        if kind in ("compressor", "compressor_conventional", "valve") and n != 2:
            problems.append(f"junction {j.id}: {kind} coupling requires exactly 2 edges, got {n}")

    # connectivity over the pipe/vertex incidence graph
    if network.pipes:
        neighbors = {pid: set() for pid in network.pipes}
        for j in network.junctions.values():
            ids = [pid for pid, _ in j.edges if pid in network.pipes]
            for a in ids:
                neighbors[a].update(ids)
        seen = set()
        stack = [next(iter(network.pipes))]
        while stack:
            pid = stack.pop()
            if pid in seen:
                continue
            seen.add(pid)
            stack.extend(neighbors[pid] - seen)
        if len(seen) != len(network.pipes):
            missing = sorted(set(network.pipes) - seen)
            problems.append(f"network is disconnected; unreachable pipes: {missing}")

    return problems


def normalize_orientation(network):
    """Equivalent network preferring junction attachments at local x=0.

    A pipe is flipped when its x=L end meets a junction while its x=0 end
    does not; a flip negates fluxes and the slope profile and is recorded
    in the pipe's orientation flag so output can be mapped back.  Pipes
    joining two junctions keep their frame (the stepper mirrors the x=L
    side per junction solve).  Idempotent.
    """
    problems = validate(network)
    if problems:
        raise ValueError("cannot normalize an invalid network: " + "; ".join(problems))

    junction_side = {}
    for j in network.junctions.values():
        for pipe_id, end in j.edges:
            junction_side.setdefault(pipe_id, set()).add(end)

    flip = {}
    new_pipes = {}
    for pid, pipe in network.pipes.items():
        sides = junction_side.get(pid, set())
        flip[pid] = END in sides and START not in sides
        new_pipes[pid] = pipe.flipped() if flip[pid] else pipe

    def map_end(pid, end):
        if not flip[pid]:
            return end
        return START if end == END else END

    new_junctions = {}
    for j in network.junctions.values():
        edges = [(pid, map_end(pid, end)) for pid, end in j.edges]
        new_junctions[j.id] = Junction(j.id, edges, j.coupling, j.control)
    new_boundaries = {}
    for b in network.boundaries.values():
        new_boundaries[b.id] = BoundaryNode(b.id, b.pipe, map_end(b.pipe, b.end), b.condition)

    return Network(new_pipes, new_junctions, new_boundaries)
