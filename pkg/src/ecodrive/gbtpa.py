"""Graph-based trajectory planning baseline.

Plans a minimum-energy speed profile to the stop line over a discretized
(time, distance, speed) state graph, under the hard constraint that the
stop line is crossed strictly inside a green window.  The graph is a DAG in
time, so a time-layered dynamic program yields the global optimum on the
grid; execution against live traffic uses a proportional tracker with an
IDM safety governor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .energy import DEFAULT_ENERGY_PARAMS, EnergyParams, step_energy
from .world import (
    EGO_ACCEL_MAX,
    Phase,
    SPEED_LIMIT,
    STOP_LINE,
    ScenarioConfig,
    SignalTiming,
    signal_at,
)


class PlanInfeasibleError(RuntimeError):
    """No grid path crosses the stop line inside a green window."""


@dataclass(frozen=True)
class PlannerGrid:
    dt: float = 1.0                     # s per layer
    dv: float = SPEED_LIMIT / 10.0      # 5 kph speed levels
    horizon: float = 140.0              # s, must cover at least two cycles

    def __post_init__(self):
        if min(self.dt, self.dv, self.horizon) <= 0:
            raise ValueError("grid resolutions must be positive")


@dataclass
class StateGraph:
    """Implicit time-expanded graph over (time, distance, speed) indices.

    Distance lives on a grid of dv*dt/2 so midpoint-rule transitions are
    exact: moving from speed level i to level j advances i+j cells.
    """

    grid: PlannerGrid
    timing: SignalTiming
    entry_offset: float
    stop_line: float
    n_t: int
    n_x: int
    n_v: int
    dx: float
    stop_idx: int
    edge_energy: np.ndarray = field(repr=False)   # (n_v, n_v) or inf if infeasible
    cross_ok: np.ndarray = field(repr=False)      # (n_t + 1,) bool

    def speed(self, j: int) -> float:
        return j * self.grid.dv

    def transitions(self, j: int):
        """Feasible (j_next, x_shift, energy) triples from speed level j."""
        for k in range(self.n_v):
            e = self.edge_energy[j, k]
            if math.isfinite(e):
                yield k, j + k, e

    def n_nodes(self) -> int:
        """All grid states, minus stop-line states whose time falls outside
        a green interior (pruned by the hard crossing constraint)."""
        below = self.stop_idx
        at_or_past = self.n_x - self.stop_idx
        layers = self.n_t + 1
        green_layers = int(self.cross_ok.sum())
        return layers * below * self.n_v + green_layers * at_or_past * self.n_v


@dataclass
class PlannedTrajectory:
    waypoints: list[tuple[float, float, float]]  # (t, x, v)
    crossing_time: float
    energy: float

    def speed_at(self, t: float) -> float:
        """Planned speed at time t (linear interpolation, clamped ends)."""
        pts = self.waypoints
        if t <= pts[0][0]:
            return pts[0][2]
        if t >= pts[-1][0]:
            return pts[-1][2]
        times = [p[0] for p in pts]
        speeds = [p[2] for p in pts]
        return float(np.interp(t, times, speeds))


def _green_interior(t: float, timing: SignalTiming, offset: float, margin: float) -> bool:
    phase, t_rem = signal_at(t, SignalTiming(timing.green, timing.yellow,
                                             timing.red, timing.all_red,
                                             phase_offset=offset))
    if phase is not Phase.GREEN:
        return False
    elapsed = timing.green - t_rem
    return t_rem >= margin and elapsed >= margin


def build_graph(scenario: ScenarioConfig, timing: SignalTiming | None = None,
                grid: PlannerGrid = PlannerGrid(),
                energy_params: EnergyParams = DEFAULT_ENERGY_PARAMS) -> StateGraph:
    """Enumerate the feasible transition structure for a scenario."""
    if timing is None:
        timing = scenario.signal
    if grid.horizon < 2 * timing.cycle:
        raise ValueError("planning horizon must cover at least two signal cycles")
    n_t = int(round(grid.horizon / grid.dt))
    n_v = int(math.floor(scenario.speed_limit / grid.dv + 1e-9)) + 1
    dx = grid.dv * grid.dt / 2.0
    n_x = int(math.ceil(scenario.stop_line / dx)) + 1
    stop_idx = int(math.ceil(scenario.stop_line / dx))

    max_dj = int(math.floor(EGO_ACCEL_MAX * grid.dt / grid.dv + 1e-9))
    edge_energy = np.full((n_v, n_v), np.inf)
    for j in range(n_v):
        for k in range(max(0, j - max_dj), min(n_v, j + max_dj + 1)):
            a = (k - j) * grid.dv / grid.dt
            v_mid = (j + k) * grid.dv / 2.0
            edge_energy[j, k] = step_energy(v_mid, a, energy_params, dt=grid.dt)

    cross_ok = np.array([
        _green_interior(i * grid.dt, timing, scenario.entry_offset, grid.dt)
        for i in range(n_t + 1)
    ])
    return StateGraph(grid=grid, timing=timing, entry_offset=scenario.entry_offset,
                      stop_line=scenario.stop_line, n_t=n_t, n_x=n_x, n_v=n_v,
                      dx=dx, stop_idx=stop_idx, edge_energy=edge_energy,
                      cross_ok=cross_ok)


def plan(graph: StateGraph, start: tuple[float, float, float]) -> PlannedTrajectory:
    """Minimum-energy path from the start state to any valid green
    crossing, tie-broken by earliest crossing time."""
    t0, x0, v0 = start
    if abs(t0) > 1e-9 or abs(x0) > 1e-9:
        raise ValueError("plans start at the entry point (t=0, x=0)")
    j0 = int(round(v0 / graph.grid.dv))
    if not 0 <= j0 < graph.n_v or abs(j0 * graph.grid.dv - v0) > 1e-6:
        raise ValueError("start speed does not snap to the speed grid")

    n_x, n_v = graph.n_x, graph.n_v
    inf = np.inf
    cost = np.full((n_x, n_v), inf)
    cost[0, j0] = 0.0
    # parent[t, x, v] = speed level at t-1, or -1.
    parent = np.full((graph.n_t + 1, n_x, n_v), -1, dtype=np.int8)

    best = None  # (energy, t_idx, x_idx, v_idx)
    for t in range(1, graph.n_t + 1):
        new = np.full((n_x, n_v), inf)
        for j in range(n_v):
            col = cost[:, j]
            if not np.isfinite(col).any():
                continue
            for k, shift, e in graph.transitions(j):
                if shift == 0:
                    cand = col + e
                    better = cand < new[:, k]
                    new[better, k] = cand[better]
                    parent[t, better, k] = j
                else:
                    cand = col[:-shift] + e
                    target = new[shift:, k]
                    better = cand < target
                    new[shift:, k][better] = cand[better]
                    parent[t, shift:, k][better] = j
        # Absorb stop-line arrivals: valid only inside a green interior.
        crossed = new[graph.stop_idx:, :]
        if np.isfinite(crossed).any():
            if graph.cross_ok[t]:
                flat = np.argmin(crossed)
                xi, vi = np.unravel_index(flat, crossed.shape)
                e_best = crossed[xi, vi]
                if best is None or e_best < best[0] - 1e-12:
                    best = (float(e_best), t, graph.stop_idx + int(xi), int(vi))
            new[graph.stop_idx:, :] = inf
        cost = new

    if best is None:
        raise PlanInfeasibleError(
            "no grid trajectory crosses the stop line during a green interior")

    energy, t_i, x_i, v_i = best
    # Reconstruct backwards through the parent table.
    path = [(t_i, x_i, v_i)]
    t, x, v = t_i, x_i, v_i
    while t > 0:
        pj = int(parent[t, x, v])
        x -= pj + v
        v = pj
        t -= 1
        path.append((t, x, v))
    path.reverse()
    g = graph.grid
    waypoints = [(t * g.dt, x * graph.dx, v * g.dv) for t, x, v in path]
    return PlannedTrajectory(waypoints=waypoints,
                             crossing_time=t_i * g.dt,
                             energy=energy)


class FollowController:
    """Proportional speed tracker for a planned trajectory, clamped to the
    ego acceleration band; after the plan ends the final planned speed is
    held through the downstream section."""

    def __init__(self, trajectory: PlannedTrajectory, kp: float = 10.0):
        self.trajectory = trajectory
        self.kp = kp

    def accel(self, t: float, v: float) -> float:
        v_ref = self.trajectory.speed_at(t)
        a = self.kp * (v_ref - v)
        return max(-EGO_ACCEL_MAX, min(EGO_ACCEL_MAX, a))
