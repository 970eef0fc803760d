"""Rule layer: emergency braking, stop-in-red trigger, decision arbitration,
the safety output filter, and the baselines' rule lane-change model."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .world import (
    EB_ACCEL,
    EGO_DECEL_MAX,
    Observation,
    Phase,
    VehicleState,
    forward_warning_distance,
    idm_acceleration,
    EGO_PARAMS,
    SENSOR_RANGE,
)


@dataclass(frozen=True)
class ManagedAction:
    """Composite longitudinal/lateral command with its originating policy."""

    a_lon: float
    lane_target: int  # -1 left, 0 stay, +1 right
    source: str = "RL"  # RL | IDM | EB | SiRStop

    def __post_init__(self):
        if self.lane_target not in (-1, 0, 1):
            raise ValueError("lane_target must be -1, 0 or +1")
        if self.lane_target != 0 and self.a_lon != 0.0:
            raise ValueError("lane changes run at zero longitudinal acceleration")


@dataclass(frozen=True)
class RuleConfig:
    a_eb: float = EB_ACCEL
    # None: the forward-warning threshold doubles as the EB trigger.
    eb_trigger_distance: float | None = None
    sir_trigger_distance: float = 60.0
    sir_standoff: float = 2.0          # stop this far before the line
    sir_epsilon: float = 0.1           # guards the division near the stand-off
    start_speed_threshold: float = 0.5  # "stopped" below this, m/s
    start_distance_window: float = 5.0  # within this of the line, m
    baseline_gap: float = 5.0          # rule lane-change front-gap trigger, m
    baseline_dwell: float = 3.0        # condition must persist this long, s

    def __post_init__(self):
        if self.a_eb >= 0:
            raise ValueError("a_eb must be negative")
        if self.sir_trigger_distance <= 0:
            raise ValueError("trigger distances must be positive")


DEFAULT_RULE_CONFIG = RuleConfig()


def eb_policy(v: float, a_eb: float = EB_ACCEL, dt: float = 0.02) -> float:
    """Emergency braking, clamped so the speed never crosses zero within the
    step."""
    if v <= 0.0:
        return 0.0
    return max(a_eb, -v / dt)


def sir_warning(d_r: float, phase: Phase,
                config: RuleConfig = DEFAULT_RULE_CONFIG) -> bool:
    """Stop-in-red warning: inside the trigger area while the phase requires
    stopping (red, yellow, or all-red)."""
    if phase is Phase.GREEN:
        return False
    return 0.0 < d_r <= config.sir_trigger_distance


def sir_stop_accel(v: float, d_r: float, config: RuleConfig = DEFAULT_RULE_CONFIG) -> float:
    """Constant-deceleration profile that reaches rest at the stand-off
    point before the line, clamped to the ego comfort band [-3, 0]."""
    remaining = max(d_r - config.sir_standoff, config.sir_epsilon)
    a = -(v * v) / (2.0 * remaining)
    return max(-EGO_DECEL_MAX, min(0.0, a))


def decision_manager(obs: Observation, rl_action: ManagedAction,
                     ego: VehicleState,
                     config: RuleConfig = DEFAULT_RULE_CONFIG,
                     dt: float = 0.02) -> ManagedAction:
    """Priority arbitration between the EB, stop-in-red, start-in-green and
    RL policies.  Exactly one source wins per call."""
    eb_trigger = config.eb_trigger_distance
    if eb_trigger is None:
        eb_trigger = forward_warning_distance(obs.v, obs.v_f)
    if obs.w_f == 1 or obs.d_f < eb_trigger:
        return ManagedAction(eb_policy(obs.v, config.a_eb, dt), 0, "EB")
    if sir_warning(obs.d_r, obs.phase, config):
        return ManagedAction(sir_stop_accel(obs.v, obs.d_r, config), 0, "SiRStop")
    if (obs.phase is Phase.GREEN and obs.v < config.start_speed_threshold
            and 0.0 < obs.d_r <= config.start_distance_window):
        leader = (obs.d_f, obs.v_f) if obs.d_f < SENSOR_RANGE else None
        return ManagedAction(idm_acceleration(ego, leader, EGO_PARAMS), 0, "IDM")
    return rl_action


@dataclass(frozen=True)
class FilterResult:
    action: ManagedAction
    lateral_blocked: bool  # the "danger" penalty flag for the reward
    braking_forced: bool


def sbr_filter(a_dm: ManagedAction, w_f: int, w_l: int, w_r: int,
               a_eb: float = EB_ACCEL) -> FilterResult:
    """Safety-based output gate: forward warning replaces the longitudinal
    component with emergency braking; a lateral move into a warned side is
    cancelled and flagged as dangerous."""
    a_lon = a_dm.a_lon
    lane = a_dm.lane_target
    blocked = (lane == -1 and bool(w_l)) or (lane == +1 and bool(w_r))
    if blocked:
        lane = 0
    braking = bool(w_f)
    if braking:
        a_lon = a_eb
        lane = 0  # EB is purely longitudinal
    if lane != 0:
        a_lon = 0.0
    action = ManagedAction(a_lon, lane, a_dm.source)
    return FilterResult(action, blocked, braking)


class BaselineLaneChanger:
    """Rule lane-change model of the IDM/graph baselines: change lanes when
    stuck behind a slower vehicle within 5 m for over 3 s.  Owns the dwell
    timer; one instance per episode."""

    def __init__(self, config: RuleConfig = DEFAULT_RULE_CONFIG, dt: float = 0.02):
        self.config = config
        self.dt = dt
        self.dwell = 0.0

    def decide(self, d_f: float, target_speed: float, v_f: float,
               w_l: int, w_r: int,
               left_gap: float = math.inf, right_gap: float = math.inf) -> int:
        cfg = self.config
        if d_f < cfg.baseline_gap and target_speed > v_f:
            self.dwell += self.dt
        else:
            self.dwell = 0.0
            return 0
        if self.dwell < cfg.baseline_dwell:
            return 0
        options = []
        if not w_l:
            options.append((-1, left_gap))
        if not w_r:
            options.append((+1, right_gap))
        if not options:
            return 0
        direction = max(options, key=lambda o: o[1])[0]
        self.dwell = 0.0
        return direction
