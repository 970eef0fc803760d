"""Planner tests: graph construction, dynamic-program optimality against an
exhaustive path enumeration, crossing-constraint enforcement, and the
trajectory follower."""

import math

import numpy as np
import pytest

from ecodrive.energy import DEFAULT_ENERGY_PARAMS, step_energy
from ecodrive.gbtpa import (
    FollowController,
    PlanInfeasibleError,
    PlannedTrajectory,
    PlannerGrid,
    _green_interior,
    build_graph,
    plan,
)
from ecodrive.world import (
    EGO_ACCEL_MAX,
    SPEED_LIMIT,
    ScenarioConfig,
    SignalTiming,
)


def tiny_scenario(entry_speed=2.0, entry_offset=0.0,
                  timing=SignalTiming(green=2, yellow=1, red=2, all_red=1),
                  stop_line=4.0, speed_limit=4.0):
    return ScenarioConfig(entry_offset=entry_offset, entry_speed=entry_speed,
                          flow_rate=0.0, speed_limit=speed_limit,
                          stop_line=stop_line, road_end=stop_line + 20.0,
                          signal=timing)


TINY_GRID = PlannerGrid(dt=1.0, dv=2.0, horizon=12.0)


class TestGraphConstruction:
    def test_grid_validation(self):
        with pytest.raises(ValueError):
            PlannerGrid(dt=0.0)
        with pytest.raises(ValueError):
            PlannerGrid(dv=-1.0)

    def test_horizon_must_cover_two_cycles(self):
        grid = PlannerGrid(dt=1.0, dv=2.0, horizon=11.0)  # cycle is 6 s
        with pytest.raises(ValueError):
            build_graph(tiny_scenario(), grid=grid)

    def test_default_dimensions(self):
        g = build_graph(ScenarioConfig(flow_rate=0.0))
        assert g.n_v == 11                      # 0 .. limit in limit/10 steps
        assert g.n_t == 140
        assert math.isclose(g.dx, SPEED_LIMIT / 10.0 * 1.0 / 2.0)
        assert g.stop_idx == math.ceil(510.0 / g.dx)

    def test_accel_band_edges(self):
        # dv = limit/10 = 1.389; one step may change speed by at most
        # floor(3 * 1 / 1.389) = 2 levels.
        g = build_graph(ScenarioConfig(flow_rate=0.0))
        for j in range(g.n_v):
            for k in range(g.n_v):
                feasible = math.isfinite(g.edge_energy[j, k])
                assert feasible == (abs(k - j) <= 2)

    def test_edge_from_20_to_30_kph_is_feasible(self):
        # 5.56 -> 8.34 m/s in one 1 s layer is within the 3 m/s^2 band.
        g = build_graph(ScenarioConfig(flow_rate=0.0))
        assert math.isfinite(g.edge_energy[4, 6])

    def test_edge_energy_matches_surrogate(self):
        g = build_graph(tiny_scenario(), grid=TINY_GRID)
        for j in range(g.n_v):
            for k in range(g.n_v):
                if not math.isfinite(g.edge_energy[j, k]):
                    continue
                a = (k - j) * g.grid.dv / g.grid.dt
                v_mid = (j + k) * g.grid.dv / 2.0
                want = step_energy(v_mid, a, DEFAULT_ENERGY_PARAMS, dt=g.grid.dt)
                assert g.edge_energy[j, k] == pytest.approx(want, rel=1e-12)

    def test_node_count_small_graph(self):
        g = build_graph(tiny_scenario(), grid=TINY_GRID)
        layers = g.n_t + 1
        green_layers = int(g.cross_ok.sum())
        expected = (layers * g.stop_idx * g.n_v
                    + green_layers * (g.n_x - g.stop_idx) * g.n_v)
        assert g.n_nodes() == expected
        assert green_layers < layers  # the constraint actually prunes


def enumerate_paths(graph, j0):
    """Exhaustive DFS over the layered graph; returns every total energy of
    a path that reaches the stop line during a valid crossing layer (the
    same absorption rule the dynamic program applies)."""
    energies = []
    stack = [(0, 0, j0, 0.0)]  # t, x, j, energy so far
    visited_paths = 0
    while stack:
        t, x, j, e = stack.pop()
        visited_paths += 1
        assert visited_paths < 10 ** 6, "enumeration blew up; shrink the case"
        if t == graph.n_t:
            continue
        for k, shift, edge in graph.transitions(j):
            x2, e2 = x + shift, e + edge
            if x2 >= graph.stop_idx:
                if graph.cross_ok[t + 1]:
                    energies.append(e2)
                continue  # past the line outside green: dead branch
            stack.append((t + 1, x2, k, e2))
    return energies


class TestPlanOptimality:
    @pytest.mark.parametrize("entry_offset,entry_speed", [
        (0.0, 2.0), (3.0, 0.0), (5.0, 4.0), (1.0, 2.0),
    ])
    def test_dp_equals_exhaustive_enumeration(self, entry_offset, entry_speed):
        sc = tiny_scenario(entry_speed=entry_speed, entry_offset=entry_offset)
        g = build_graph(sc, grid=TINY_GRID)
        traj = plan(g, (0.0, 0.0, entry_speed))
        all_energies = enumerate_paths(g, int(round(entry_speed / g.grid.dv)))
        assert all_energies, "enumeration found no feasible path"
        assert traj.energy == pytest.approx(min(all_energies), abs=1e-12)

    def test_infeasible_when_green_too_short_for_margin(self):
        # A 1 s green has no interior at a 1 s margin on both sides.
        timing = SignalTiming(green=1, yellow=1, red=2, all_red=1)
        sc = tiny_scenario(timing=timing)
        g = build_graph(sc, grid=PlannerGrid(dt=1.0, dv=2.0, horizon=10.0))
        with pytest.raises(PlanInfeasibleError):
            plan(g, (0.0, 0.0, 2.0))

    def test_start_state_validation(self):
        g = build_graph(tiny_scenario(), grid=TINY_GRID)
        with pytest.raises(ValueError):
            plan(g, (1.0, 0.0, 2.0))     # must start at t=0
        with pytest.raises(ValueError):
            plan(g, (0.0, 5.0, 2.0))     # must start at x=0
        with pytest.raises(ValueError):
            plan(g, (0.0, 0.0, 2.7))     # off the speed grid

    def test_finer_speed_grid_never_costs_more(self):
        # Halving dv nests the speed and distance grids and widens the
        # transition set, so the optimum cannot get worse.
        sc = tiny_scenario(entry_speed=2.0)
        coarse = plan(build_graph(sc, grid=TINY_GRID), (0.0, 0.0, 2.0))
        fine_grid = PlannerGrid(dt=1.0, dv=1.0, horizon=12.0)
        fine = plan(build_graph(sc, grid=fine_grid), (0.0, 0.0, 2.0))
        assert fine.energy <= coarse.energy + 1e-9


class TestPlanProperties:
    @pytest.mark.parametrize("entry_offset", [0.0, 10.0, 20.0, 30.0, 40.0, 50.0])
    @pytest.mark.parametrize("speed_kph", [10, 30, 50])
    def test_crossing_is_inside_green_interior(self, entry_offset, speed_kph):
        v0 = round(speed_kph / 3.6 / (SPEED_LIMIT / 10.0)) * (SPEED_LIMIT / 10.0)
        sc = ScenarioConfig(entry_offset=entry_offset, entry_speed=v0,
                            flow_rate=0.0)
        g = build_graph(sc)
        traj = plan(g, (0.0, 0.0, v0))
        assert _green_interior(traj.crossing_time, sc.signal,
                               sc.entry_offset, g.grid.dt)

    def test_waypoints_are_kinematically_consistent(self):
        sc = ScenarioConfig(entry_offset=0.0, entry_speed=SPEED_LIMIT,
                            flow_rate=0.0)
        g = build_graph(sc)
        traj = plan(g, (0.0, 0.0, SPEED_LIMIT))
        pts = traj.waypoints
        assert pts[0] == (0.0, 0.0, SPEED_LIMIT)
        energy = 0.0
        for (t0, x0, v0), (t1, x1, v1) in zip(pts, pts[1:]):
            assert t1 - t0 == pytest.approx(g.grid.dt)
            assert x1 - x0 == pytest.approx((v0 + v1) / 2.0 * g.grid.dt)
            assert abs(v1 - v0) <= EGO_ACCEL_MAX * g.grid.dt + 1e-9
            assert 0.0 <= v1 <= sc.speed_limit + 1e-9
            a = (v1 - v0) / g.grid.dt
            energy += step_energy((v0 + v1) / 2.0, a, DEFAULT_ENERGY_PARAMS,
                                  dt=g.grid.dt)
        assert energy == pytest.approx(traj.energy, rel=1e-9)
        assert pts[-1][1] >= sc.stop_line
        assert traj.crossing_time == pts[-1][0]


class TestFollower:
    def _traj(self):
        return PlannedTrajectory(
            waypoints=[(0.0, 0.0, 2.0), (1.0, 2.5, 3.0), (2.0, 6.0, 4.0)],
            crossing_time=2.0, energy=0.0)

    def test_speed_interpolation_and_clamped_ends(self):
        t = self._traj()
        assert t.speed_at(-5.0) == 2.0
        assert t.speed_at(0.5) == pytest.approx(2.5)
        assert t.speed_at(10.0) == 4.0  # final speed held downstream

    def test_accel_is_proportional_and_clamped(self):
        f = FollowController(self._traj(), kp=10.0)
        assert f.accel(0.0, 1.95) == pytest.approx(0.5)
        assert f.accel(0.0, 0.0) == EGO_ACCEL_MAX
        assert f.accel(0.0, 10.0) == -EGO_ACCEL_MAX
