"""Per-step ego controllers for the three methods, sharing the rule layer.

Every controller produces a ManagedAction per physics step; the safety
filter is always the last gate before execution.  The HRL controller holds
each network decision for N_select frames, matching the select-stack
cadence of the preprocessing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .gbtpa import FollowController, PlannedTrajectory
from .rules import (
    BaselineLaneChanger,
    DEFAULT_RULE_CONFIG,
    FilterResult,
    ManagedAction,
    RuleConfig,
    decision_manager,
    eb_policy,
    sbr_filter,
)
from .world import (
    Observation,
    SENSOR_RANGE,
    WorldState,
    background_acceleration,
    find_leader,
    leader_gap,
    safety_ceiling,
)
from .rl.actions import decode
from .rl.preprocess import FrameHistory
from .rl.network import DuelingNetwork


@dataclass
class ControlOutput:
    action: ManagedAction          # post-filter executed command
    filter_result: FilterResult
    lane_change_requested: bool    # nonzero lateral in the executed command


class BaseDriver:
    """Shared lateral baseline plumbing for the IDM and graph methods."""

    def __init__(self, rule_config: RuleConfig = DEFAULT_RULE_CONFIG, dt: float = 0.02):
        self.rule_config = rule_config
        self.dt = dt
        self.lane_changer = BaselineLaneChanger(rule_config, dt)

    def _lateral(self, world: WorldState, obs: Observation, target_speed: float) -> int:
        ego = world.ego
        if ego.lane_change is not None:
            return 0
        gaps = {}
        for direction in (-1, +1):
            lane = ego.lane + direction
            if not 0 <= lane < world.config.n_lanes:
                gaps[direction] = -math.inf
                continue
            leader = find_leader(world, ego, lane)
            gaps[direction] = math.inf if leader is None else leader_gap(ego, leader)
        return self.lane_changer.decide(obs.d_f, target_speed, obs.v_f,
                                        obs.w_l, obs.w_r, gaps[-1], gaps[+1])

    def _finalize(self, raw: ManagedAction, obs: Observation) -> ControlOutput:
        result = sbr_filter(raw, obs.w_f, obs.w_l, obs.w_r, self.rule_config.a_eb)
        return ControlOutput(result.action, result,
                             result.action.lane_target != 0)


class IdmDriver(BaseDriver):
    """IDM longitudinal baseline with the rule lane-change model; obeys the
    signal through a virtual standing leader at the stop line."""

    def act(self, world: WorldState, obs: Observation) -> ControlOutput:
        ego = world.ego
        a = background_acceleration(world, ego)
        lane = self._lateral(world, obs, ego.params.v_tar)
        raw = ManagedAction(0.0, lane, "IDM") if lane != 0 else ManagedAction(a, 0, "IDM")
        return self._finalize(raw, obs)


class GraphDriver(BaseDriver):
    """Tracks a precomputed minimum-energy plan with an IDM safety governor
    and the rule lane-change model."""

    def __init__(self, trajectory: PlannedTrajectory,
                 rule_config: RuleConfig = DEFAULT_RULE_CONFIG, dt: float = 0.02):
        super().__init__(rule_config, dt)
        self.follower = FollowController(trajectory)

    def act(self, world: WorldState, obs: Observation) -> ControlOutput:
        ego = world.ego
        behind_schedule = (ego.x_lon < world.config.stop_line
                           and world.clock > self.follower.trajectory.crossing_time)
        if behind_schedule:
            # Traffic pushed the ego past its planned crossing; track the
            # speed limit and let the governor handle leaders and the signal.
            target = world.config.speed_limit
            a_cmd = max(-3.0, min(3.0, self.follower.kp * (target - ego.v)))
        else:
            target = self.follower.trajectory.speed_at(world.clock)
            a_cmd = self.follower.accel(world.clock, ego.v)
        # Governor: never exceed the IDM-safe acceleration against the
        # leader or the stop line.
        a = min(a_cmd, safety_ceiling(world, ego))
        lane = self._lateral(world, obs, target)
        raw = ManagedAction(0.0, lane, "Graph") if lane != 0 else ManagedAction(a, 0, "Graph")
        return self._finalize(raw, obs)


class HrlDriver:
    """RL policy arbitrated by the decision manager and the safety filter.

    A new network decision is taken every `n_select` frames and held in
    between; the rule layer still runs at the physics rate.
    """

    def __init__(self, net: DuelingNetwork, epsilon: float = 0.0,
                 rng: np.random.Generator | None = None,
                 rule_config: RuleConfig = DEFAULT_RULE_CONFIG, dt: float = 0.02,
                 n_select: int = 4, n_stack: int = 4):
        self.net = net
        self.epsilon = epsilon
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.rule_config = rule_config
        self.dt = dt
        self.history = FrameHistory(n_select, n_stack)
        self.n_select = n_select
        self._frame = 0
        self._held_id = 11  # idle until the first decision
        self.last_stack: np.ndarray | None = None
        self.last_action_id: int | None = None
        self.decision_boundary = False
        self._eb_latched = False

    def reset(self) -> None:
        """Clear per-episode state (frame history and the held action)."""
        self.history = FrameHistory(self.n_select, self.history.n_stack)
        self._frame = 0
        self._held_id = 11
        self.last_stack = None
        self.last_action_id = None
        self.decision_boundary = False
        self._eb_latched = False

    def _decide(self, stack: np.ndarray) -> int:
        if self.epsilon > 0.0 and self.rng.uniform() < self.epsilon:
            return int(self.rng.integers(self.net.n_actions))
        return int(np.argmax(self.net.q_values(stack)))

    def act(self, world: WorldState, obs: Observation) -> ControlOutput:
        self.history.push(obs.vector())
        self.decision_boundary = self._frame % self.n_select == 0
        if self.decision_boundary:
            stack = self.history.stacked()
            self._held_id = self._decide(stack)
            self.last_stack = stack
            self.last_action_id = self._held_id
        self._frame += 1

        rl_action = decode(self._held_id)
        managed = decision_manager(obs, rl_action, world.ego, self.rule_config, self.dt)
        result = sbr_filter(managed, obs.w_f, obs.w_l, obs.w_r, self.rule_config.a_eb)

        # The forward warning threshold shrinks while braking, so gating EB
        # on the instantaneous warning alone interleaves braking with
        # throttle at exactly the marginal deceleration.  Latch EB until the
        # closing speed is resolved instead.
        if result.braking_forced or managed.source == "EB":
            self._eb_latched = True
        if self._eb_latched:
            if obs.w_f == 0 and (obs.v <= obs.v_f + 0.1 or obs.d_f >= SENSOR_RANGE):
                self._eb_latched = False
            else:
                a_eb = eb_policy(obs.v, self.rule_config.a_eb, self.dt)
                result = FilterResult(ManagedAction(a_eb, 0, "EB"),
                                      result.lateral_blocked, True)

        # Speed governor: the policy may not command past the speed limit,
        # which bounds the closing speed the warning window has to cover.
        cap = max((world.config.speed_limit - obs.v) / self.dt, -1.0)
        if result.action.a_lon > cap:
            capped = ManagedAction(cap, result.action.lane_target,
                                   result.action.source)
            result = FilterResult(capped, result.lateral_blocked,
                                  result.braking_forced)

        return ControlOutput(result.action, result, result.action.lane_target != 0)
