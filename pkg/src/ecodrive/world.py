"""Fixed-timestep microsimulation of a five-lane signalized approach.

Geometry: 510 m of upstream roadway to the stop line plus a 40 m downstream
section (550 m total), five lanes indexed 0 (leftmost) to 4.  Background
vehicles follow the intelligent driver model longitudinally and flip a
propensity-weighted coin for lane changes; the ego vehicle is driven
externally through :func:`step`.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

# Road geometry and vehicle footprint.  The approach is 510 m to the stop
# line plus 40 m downstream.
STOP_LINE = 510.0
ROAD_END = 550.0
N_LANES = 5
LANE_WIDTH = 3.5
VEHICLE_LENGTH = 4.5
VEHICLE_WIDTH = 1.8
LATERAL_SPEED = 1.75  # m/s, one lane in 2 s
SENSOR_RANGE = 100.0
SPEED_LIMIT = 50.0 / 3.6  # 13.89 m/s

# Ego actuation limits.
EGO_ACCEL_MAX = 3.0
EGO_DECEL_MAX = 3.0
EB_ACCEL = -5.0

# Background lateral decisions are re-sampled at 1 Hz, not every physics
# step; an initiated maneuver runs to completion first.
LATERAL_DECISION_PERIOD = 1.0


@dataclass(frozen=True)
class VehicleParams:
    """Car-following and lane-change parameters of one vehicle type."""

    a_max: float  # maximum acceleration, m/s^2
    b_max: float  # maximum deceleration magnitude, m/s^2
    s0: float     # minimum gap, m
    T: float      # safe time headway, s
    v_tar: float  # target speed, m/s
    r_lat: float  # lane-change propensity per lateral decision

    def __post_init__(self):
        if min(self.a_max, self.b_max, self.s0, self.T, self.v_tar) <= 0:
            raise ValueError("vehicle parameters must be positive")
        if not 0.0 <= self.r_lat <= 1.0:
            raise ValueError("r_lat must lie in [0, 1]")


# Background vehicle population (five types).
VEHICLE_TYPES = {
    "A": VehicleParams(6.0, 6.0, 3.0, 1.5, 13.8, 0.3),
    "B": VehicleParams(5.0, 4.5, 3.0, 1.5, 12.5, 0.2),
    "C": VehicleParams(3.0, 5.0, 2.0, 1.2, 11.1, 0.2),
    "D": VehicleParams(3.0, 3.0, 3.0, 1.5, 9.72, 0.1),
    "F": VehicleParams(2.0, 1.5, 5.0, 1.5, 8.33, 0.1),
}

EGO_PARAMS = VehicleParams(EGO_ACCEL_MAX, EGO_DECEL_MAX, 3.0, 1.5, SPEED_LIMIT, 1.0)


class Phase(enum.Enum):
    GREEN = "green"
    YELLOW = "yellow"
    RED = "red"
    ALL_RED = "all_red"


@dataclass(frozen=True)
class SignalTiming:
    """Fixed-time plan: green -> yellow -> red -> all-red, wrapping."""

    green: float = 20.0
    yellow: float = 3.0
    red: float = 40.0
    all_red: float = 1.0
    phase_offset: float = 0.0

    @property
    def cycle(self) -> float:
        return self.green + self.yellow + self.red + self.all_red


def signal_at(clock: float, timing: SignalTiming) -> tuple[Phase, float]:
    """Phase and remaining time of the active phase at an absolute clock."""
    t = (clock + timing.phase_offset) % timing.cycle
    for phase, dur in (
        (Phase.GREEN, timing.green),
        (Phase.YELLOW, timing.yellow),
        (Phase.RED, timing.red),
        (Phase.ALL_RED, timing.all_red),
    ):
        if t < dur:
            return phase, dur - t
        t -= dur
    # Unreachable: t < cycle by construction.
    return Phase.GREEN, timing.green


@dataclass
class LaneChange:
    direction: int  # -1 left, +1 right
    progress: float = 0.0


class VehicleState:
    """Mutable kinematic state of one vehicle."""

    __slots__ = ("id", "kind", "x_lon", "x_lat", "lane", "v", "accel", "lane_change")

    def __init__(self, id, kind, x_lon, lane, v, accel=0.0, x_lat=None, lane_change=None):
        self.id = id
        self.kind = kind
        self.x_lon = x_lon
        self.lane = lane
        self.x_lat = lane * LANE_WIDTH if x_lat is None else x_lat
        self.v = v
        self.accel = accel
        self.lane_change = lane_change

    @property
    def params(self) -> VehicleParams:
        return EGO_PARAMS if self.kind == "Ego" else VEHICLE_TYPES[self.kind]

    def occupied_lanes(self) -> tuple[int, ...]:
        if self.lane_change is None:
            return (self.lane,)
        return (self.lane, self.lane + self.lane_change.direction)

    def copy(self) -> "VehicleState":
        lc = None
        if self.lane_change is not None:
            lc = LaneChange(self.lane_change.direction, self.lane_change.progress)
        return VehicleState(self.id, self.kind, self.x_lon, self.lane, self.v,
                            self.accel, self.x_lat, lc)


@dataclass
class ScenarioConfig:
    """One evaluation scenario: entry conditions, demand, geometry, seed."""

    entry_offset: float = 0.0          # signal clock (s into cycle) at ego entry
    entry_speed: float = SPEED_LIMIT   # m/s
    flow_rate: float = 0.1             # veh/s per lane
    seed: int = 0
    speed_limit: float = SPEED_LIMIT
    dt: float = 0.02
    stop_line: float = STOP_LINE
    road_end: float = ROAD_END
    n_lanes: int = N_LANES
    timeout: float = 300.0
    warmup: float = 30.0               # background-only lead-in before ego entry
    signal: SignalTiming = field(default_factory=SignalTiming)

    def __post_init__(self):
        if self.entry_speed > self.speed_limit + 1e-9:
            raise ValueError("entry speed exceeds the speed limit")


class WorldState:
    """Full simulation state: ego, background traffic, signal, clock."""

    def __init__(self, config: ScenarioConfig):
        self.config = config
        self.clock = 0.0          # time since ego entry, s
        self.step_count = 0
        self.ego: VehicleState | None = None
        self.others: list[VehicleState] = []
        self.collision_flag = False
        self.rng = np.random.default_rng(config.seed)
        self._next_id = 1
        # Effective offset so that the signal clock reads `entry_offset`
        # at ego entry (clock == 0).
        cyc = config.signal.cycle
        self.timing = SignalTiming(
            config.signal.green, config.signal.yellow,
            config.signal.red, config.signal.all_red,
            phase_offset=(config.signal.phase_offset + config.entry_offset) % cyc,
        )

    # -- signal ----------------------------------------------------------

    def phase(self) -> tuple[Phase, float]:
        return signal_at(self.clock, self.timing)

    # -- bookkeeping -----------------------------------------------------

    def alloc_id(self) -> int:
        i = self._next_id
        self._next_id += 1
        return i


# ---------------------------------------------------------------------------
# Car following
# ---------------------------------------------------------------------------

def idm_acceleration(state: VehicleState, leader: tuple[float, float] | None,
                     params: VehicleParams) -> float:
    """IDM acceleration: free-flow law without a leader, interaction law with
    one, clamped to [-b_max, a_max].  `leader` is (gap, v_lead) with gap > 0.
    """
    v = state.v
    if leader is None:
        a = params.a_max * (1.0 - (v / params.v_tar) ** 2)
    else:
        gap, v_lead = leader
        dv = v - v_lead
        s_star = params.s0 + v * params.T + v * dv / (2.0 * math.sqrt(params.a_max * params.b_max))
        try:
            a = params.a_max * (1.0 - (v / params.v_tar) ** 4 - (s_star / gap) ** 2)
        except (ZeroDivisionError, OverflowError):
            a = -params.b_max
        if not math.isfinite(a):
            a = -params.b_max
    return max(-params.b_max, min(params.a_max, a))


def lateral_decision(x_lat: float, r: float, params: VehicleParams, lane: int) -> int:
    """Random lane-change draw: -1 left if r <= R/2, +1 right if r > 1-R/2,
    else 0.  Boundary lanes never move off-road."""
    if r <= params.r_lat / 2.0:
        move = -1
    elif r > 1.0 - params.r_lat / 2.0:
        move = +1
    else:
        move = 0
    if move == -1 and lane == 0:
        return 0
    if move == +1 and lane == N_LANES - 1:
        return 0
    return move


# ---------------------------------------------------------------------------
# Neighborhood queries
# ---------------------------------------------------------------------------

def find_leader(world: WorldState, veh: VehicleState, lane: int,
                max_range: float = math.inf) -> VehicleState | None:
    """Nearest vehicle ahead of `veh` occupying `lane` (lane-changers count
    in both lanes)."""
    best = None
    best_x = math.inf
    for other in world.others:
        if other is veh:
            continue
        if lane in other.occupied_lanes() and veh.x_lon < other.x_lon < best_x:
            best = other
            best_x = other.x_lon
    ego = world.ego
    if ego is not None and ego is not veh:
        if lane in ego.occupied_lanes() and veh.x_lon < ego.x_lon < best_x:
            best = ego
            best_x = ego.x_lon
    if best is not None and best_x - veh.x_lon - VEHICLE_LENGTH > max_range:
        return None
    return best


def leader_gap(veh: VehicleState, leader: VehicleState) -> float:
    """Bumper-to-bumper gap to the leader."""
    return leader.x_lon - veh.x_lon - VEHICLE_LENGTH


def _stop_line_gap(veh: VehicleState, phase: Phase, stop_line: float) -> float | None:
    """Center gap to a virtual standing leader at the stop line during
    non-green phases, or None when it does not apply (green, already past
    the line, or too close to stop without exceeding b_max)."""
    if phase is Phase.GREEN:
        return None
    gap = stop_line - veh.x_lon
    if gap <= 0.0:
        return None
    p = veh.params
    # Dilemma zone: if the vehicle can no longer stop at b_max it proceeds.
    if gap - p.s0 < veh.v ** 2 / (2.0 * p.b_max):
        return None
    return gap


def background_acceleration(world: WorldState, veh: VehicleState,
                            obey_signal: bool = True) -> float:
    """IDM acceleration of a background vehicle against its effective
    leader: the nearer of the real leader and (when signal is not green)
    the stop line."""
    leader = find_leader(world, veh, veh.lane)
    gap_v = None
    if leader is not None:
        gap_v = (leader_gap(veh, leader), leader.v)
    if obey_signal:
        phase, _ = world.phase()
        sl = _stop_line_gap(veh, phase, world.config.stop_line)
        if sl is not None and (gap_v is None or sl < gap_v[0]):
            gap_v = (sl, 0.0)
    return idm_acceleration(veh, gap_v, veh.params)


def safety_ceiling(world: WorldState, veh: VehicleState) -> float:
    """IDM interaction acceleration against the effective obstacle (leader
    or non-green stop line), or +inf when the road ahead is clear; used by
    the trajectory-tracking governor."""
    leader = find_leader(world, veh, veh.lane)
    gap_v = None
    if leader is not None:
        gap_v = (leader_gap(veh, leader), leader.v)
    phase, _ = world.phase()
    sl = _stop_line_gap(veh, phase, world.config.stop_line)
    if sl is not None and (gap_v is None or sl < gap_v[0]):
        gap_v = (sl, 0.0)
    if gap_v is None:
        return math.inf
    return idm_acceleration(veh, gap_v, veh.params)


_MANEUVER_TIME = LANE_WIDTH / LATERAL_SPEED


def _lane_change_gap_ok(world: WorldState, veh: VehicleState, direction: int) -> bool:
    """Target lane must be clear within speed-dependent windows; the window
    toward a slower vehicle grows with the gap consumed during the maneuver
    plus the braking distance of the closing speed."""
    target = veh.lane + direction
    p = veh.params
    candidates = list(world.others)
    if world.ego is not None:
        candidates.append(world.ego)
    for other in candidates:
        if other is veh or target not in other.occupied_lanes():
            continue
        dx = other.x_lon - veh.x_lon
        if dx >= 0.0:
            closing = max(0.0, veh.v - other.v)
            need = (VEHICLE_LENGTH + p.s0 + max(veh.v, 1.0) * p.T
                    + closing * _MANEUVER_TIME + closing ** 2 / (2.0 * p.b_max))
            if dx < need:
                return False
        else:
            op = other.params
            closing = max(0.0, other.v - veh.v)
            need = (VEHICLE_LENGTH + op.s0 + max(other.v, 1.0) * op.T
                    + closing * _MANEUVER_TIME + closing ** 2 / (2.0 * op.b_max))
            if -dx < need:
                return False
    return True


# ---------------------------------------------------------------------------
# Spawning
# ---------------------------------------------------------------------------

_TYPE_TAGS = tuple(sorted(VEHICLE_TYPES))


def spawn_traffic(world: WorldState) -> None:
    """Poisson arrivals per lane at x = 0; spawn suppressed when the rear
    vehicle in the lane is too close (headway or braking-distance guard)."""
    cfg = world.config
    if cfg.flow_rate <= 0.0:
        return
    arrivals = world.rng.poisson(cfg.flow_rate * cfg.dt, size=cfg.n_lanes)
    for lane in range(cfg.n_lanes):
        if arrivals[lane] == 0:
            continue
        tag = _TYPE_TAGS[world.rng.integers(len(_TYPE_TAGS))]
        params = VEHICLE_TYPES[tag]
        headway = params.s0 + params.v_tar * params.T
        guard = max(headway, params.s0 + VEHICLE_LENGTH + params.v_tar ** 2 / (2.0 * params.b_max))
        blocked = False
        candidates = list(world.others)
        if world.ego is not None:
            candidates.append(world.ego)
        for other in candidates:
            if lane in other.occupied_lanes() and -VEHICLE_LENGTH < other.x_lon < guard:
                blocked = True
                break
        if not blocked:
            world.others.append(
                VehicleState(world.alloc_id(), tag, 0.0, lane, params.v_tar))


# ---------------------------------------------------------------------------
# Stepping
# ---------------------------------------------------------------------------

def _advance_maneuver(veh: VehicleState, dt: float) -> None:
    lc = veh.lane_change
    if lc is None:
        return
    duration = LANE_WIDTH / LATERAL_SPEED
    lc.progress = min(1.0, lc.progress + dt / duration)
    origin = veh.lane * LANE_WIDTH
    veh.x_lat = origin + lc.direction * LANE_WIDTH * lc.progress
    if lc.progress >= 1.0:
        veh.lane += lc.direction
        veh.x_lat = veh.lane * LANE_WIDTH
        veh.lane_change = None


def _vehicles_collide(a: VehicleState, b: VehicleState) -> bool:
    return (abs(a.x_lon - b.x_lon) < VEHICLE_LENGTH
            and abs(a.x_lat - b.x_lat) < VEHICLE_WIDTH)


def step(world: WorldState, ego_action: tuple[float, int] | None) -> WorldState:
    """Advance the whole world one time step (in place, returns `world`).

    `ego_action` is (a_lon, lane_target); lane_target in {-1, 0, +1}.
    Background vehicles run IDM plus 1 Hz lateral coin flips; all vehicles
    integrate with semi-implicit Euler and a v >= 0 clamp.
    """
    cfg = world.config
    dt = cfg.dt

    spawn_traffic(world)

    # Lateral decisions at 1 Hz, deterministic vehicle order.
    period_steps = max(1, round(LATERAL_DECISION_PERIOD / dt))
    if world.step_count % period_steps == 0:
        for veh in world.others:
            if veh.lane_change is not None:
                continue
            move = lateral_decision(veh.x_lat, world.rng.uniform(), veh.params, veh.lane)
            if move != 0 and _lane_change_gap_ok(world, veh, move):
                veh.lane_change = LaneChange(move)

    # Longitudinal accelerations against the pre-step state.
    accels = []
    for veh in world.others:
        a = 0.0 if veh.lane_change is not None else background_acceleration(world, veh)
        accels.append(a)

    ego = world.ego
    if ego is not None:
        if ego_action is None:
            raise ValueError("ego action required while the ego is alive")
        a_lon, lane_target = ego_action
        if not math.isfinite(a_lon):
            raise ValueError("non-finite ego acceleration")
        a_lon = max(EB_ACCEL, min(EGO_ACCEL_MAX, a_lon))
        if ego.lane_change is None and lane_target != 0:
            target = ego.lane + lane_target
            if 0 <= target < cfg.n_lanes:
                ego.lane_change = LaneChange(int(lane_target))
        if ego.lane_change is not None:
            a_lon = 0.0  # lane changes run at fixed speed
        ego.accel = a_lon

    # Semi-implicit Euler for everyone.
    for veh, a in zip(world.others, accels):
        veh.accel = a
        veh.v = max(0.0, veh.v + a * dt)
        veh.x_lon += veh.v * dt
        _advance_maneuver(veh, dt)
    if ego is not None:
        ego.v = max(0.0, ego.v + ego.accel * dt)
        ego.x_lon += ego.v * dt
        _advance_maneuver(ego, dt)

    # Retire background vehicles past the road end.
    world.others = [v for v in world.others if v.x_lon < cfg.road_end + 2 * VEHICLE_LENGTH]

    if ego is not None:
        for other in world.others:
            if _vehicles_collide(ego, other):
                world.collision_flag = True
                break

    world.clock += dt
    world.step_count += 1
    return world


# ---------------------------------------------------------------------------
# Observation
# ---------------------------------------------------------------------------

@dataclass
class Observation:
    """The 12-element logical vector: signal remaining times, warning bits,
    distances, speeds, and the ego acceleration."""

    t_g: float
    t_y: float
    t_r: float
    w_f: int
    w_l: int
    w_r: int
    w_c: int
    d_r: float
    d_f: float
    v_f: float
    v: float
    a: float
    phase: Phase = Phase.GREEN  # carried alongside, not part of the vector

    def vector(self) -> np.ndarray:
        return np.array([self.t_g, self.t_y, self.t_r, self.w_f, self.w_l,
                         self.w_r, self.w_c, self.d_r, self.d_f, self.v_f,
                         self.v, self.a], dtype=float)


def forward_warning_distance(v: float, v_f: float) -> float:
    """Forward warning threshold: (3 + (v - v_f)^2) / (2 * 3), using the ego
    maximum deceleration as the denominator acceleration."""
    return (3.0 + (v - v_f) ** 2) / (2.0 * EGO_DECEL_MAX)


LATERAL_WARNING_CLEARANCE = 2.0
_LAT_BASE_WINDOW = 5.0
_LC_DURATION = LANE_WIDTH / LATERAL_SPEED


def _side_warning(world: WorldState, ego: VehicleState, direction: int) -> int:
    """1 when the nearest adjacent-lane vehicle's lateral clearance is within
    2 m.  The longitudinal window extends 5 m each way and widens with the
    closing speed (maneuver-time gap consumption plus braking distance)."""
    target = ego.lane + direction
    if not 0 <= target < world.config.n_lanes:
        return 1  # off-road side is always blocked
    for other in world.others:
        if target not in other.occupied_lanes():
            continue
        closing_front = max(0.0, ego.v - other.v)
        front_window = (_LAT_BASE_WINDOW + closing_front * _LC_DURATION
                        + closing_front ** 2 / (2.0 * abs(EB_ACCEL)))
        closing_rear = max(0.0, other.v - ego.v)
        rear_window = (_LAT_BASE_WINDOW + closing_rear * _LC_DURATION
                       + closing_rear ** 2 / (2.0 * EGO_DECEL_MAX))
        dx = other.x_lon - ego.x_lon
        if -rear_window <= dx <= front_window:
            clearance = abs(other.x_lat - ego.x_lat) - VEHICLE_WIDTH
            if clearance <= LATERAL_WARNING_CLEARANCE:
                return 1
    return 0


def observe(world: WorldState) -> Observation:
    """Extract the logical observation vector for the ego vehicle."""
    ego = world.ego
    if ego is None:
        raise ValueError("no ego vehicle in the world")
    cfg = world.config
    phase, t_rem = world.phase()
    t_g = t_rem if phase is Phase.GREEN else 0.0
    t_y = t_rem if phase is Phase.YELLOW else 0.0
    # All-red is a stop-required phase; report it in the red slot.
    t_r = t_rem if phase in (Phase.RED, Phase.ALL_RED) else 0.0

    leader = find_leader(world, ego, ego.lane, max_range=SENSOR_RANGE)
    if leader is None:
        d_f, v_f = SENSOR_RANGE, 0.0
    else:
        d_f = min(SENSOR_RANGE, max(0.0, leader_gap(ego, leader)))
        v_f = leader.v

    w_f = 1 if (leader is not None and d_f <= forward_warning_distance(ego.v, v_f)) else 0
    w_l = _side_warning(world, ego, -1)
    w_r = _side_warning(world, ego, +1)
    d_r = max(0.0, cfg.stop_line - ego.x_lon)

    return Observation(
        t_g=t_g, t_y=t_y, t_r=t_r,
        w_f=w_f, w_l=w_l, w_r=w_r,
        w_c=1 if world.collision_flag else 0,
        d_r=d_r, d_f=d_f, v_f=v_f,
        v=ego.v, a=ego.accel, phase=phase,
    )


# ---------------------------------------------------------------------------
# World construction
# ---------------------------------------------------------------------------

def make_world(config: ScenarioConfig) -> WorldState:
    """Build a world, run the background-only warm-up, and inject the ego at
    x = 0 with the configured entry speed; the signal clock reads
    `entry_offset` at that moment."""
    world = WorldState(config)
    if config.warmup > 0.0 and config.flow_rate > 0.0:
        # Shift the offset so the phase sequence is consistent across the
        # warm-up and reads entry_offset at clock 0.
        n = round(config.warmup / config.dt)
        world.clock = -n * config.dt
        for _ in range(n):
            step(world, None)
        world.clock = 0.0
        world.step_count = 0
    world.ego = VehicleState(0, "Ego", 0.0, config.n_lanes // 2, config.entry_speed)
    # Clear any background vehicle overlapping the entry cell.
    world.others = [v for v in world.others
                    if not (v.lane == world.ego.lane and abs(v.x_lon) < 2 * VEHICLE_LENGTH)]
    return world


def episode_done(world: WorldState) -> str | None:
    """Terminal status: 'success' past the road end, 'collision', or
    'timeout' after the configured cap; None while running."""
    if world.collision_flag:
        return "collision"
    ego = world.ego
    if ego is not None and ego.x_lon >= world.config.road_end:
        return "success"
    if world.clock >= world.config.timeout:
        return "timeout"
    return None
