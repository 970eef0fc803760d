"""Single-episode execution: drives a controller through a world, metering
energy and reward and recording the per-step trajectory log."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

from .energy import DEFAULT_ENERGY_PARAMS, EnergyParams, step_energy
from .reward import DEFAULT_WEIGHTS, RewardWeights, lstr, training_reward
from .rules import ManagedAction
from .world import ScenarioConfig, episode_done, make_world, observe, step


@dataclass
class TrajectoryRow:
    t: float
    x_lon: float
    lane: int
    v: float
    a: float
    phase: str
    t_r: float
    d_f: float
    v_f: float
    w_f: int
    w_l: int
    w_r: int
    energy_step_j: float
    reward: float


LOG_COLUMNS = ["t", "x_lon", "lane", "v", "a", "phase", "T_r", "d_f", "v_f",
               "w_f", "w_l", "w_r", "energy_step_J", "reward"]


@dataclass
class TrajectoryLog:
    rows: list[TrajectoryRow] = field(default_factory=list)

    def append(self, row: TrajectoryRow) -> None:
        self.rows.append(row)

    def __len__(self) -> int:
        return len(self.rows)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(LOG_COLUMNS)
        for r in self.rows:
            writer.writerow([
                f"{r.t:.2f}", f"{r.x_lon:.6f}", r.lane, f"{r.v:.6f}",
                f"{r.a:.6f}", r.phase, f"{r.t_r:.6f}", f"{r.d_f:.6f}",
                f"{r.v_f:.6f}", r.w_f, r.w_l, r.w_r,
                f"{r.energy_step_j:.6f}", f"{r.reward:.6f}",
            ])
        return buf.getvalue()


@dataclass
class EpisodeResult:
    status: str                 # success | collision | timeout
    travel_time: float
    energy: float
    lane_changes: int
    mean_speed: float
    reward_sum: float           # sum of breakdown totals
    train_return: float         # sum of trainer-form rewards
    gp_sum: float
    log: TrajectoryLog | None


def run_episode(driver, scenario: ScenarioConfig,
                energy_params: EnergyParams = DEFAULT_ENERGY_PARAMS,
                weights: RewardWeights = DEFAULT_WEIGHTS,
                regen: bool = False,
                collect_log: bool = True,
                step_hook=None) -> EpisodeResult:
    """Run one full episode.

    `driver` provides act(world, obs) -> ControlOutput.  `step_hook`, when
    given, is called after every physics step with
    (driver, obs, trainer_reward, done_flag); the trainer uses it to build
    transitions at the decision cadence.
    """
    world = make_world(scenario)
    dt = scenario.dt
    log = TrajectoryLog() if collect_log else None

    energy_total = 0.0
    lane_changes = 0
    reward_sum = 0.0
    train_return = 0.0
    gp_sum = 0.0
    speed_sum = 0.0
    n_steps = 0

    status = episode_done(world)
    while status is None:
        obs = observe(world)
        out = driver.act(world, obs)
        ego = world.ego
        initiated = (ego.lane_change is None and out.action.lane_target != 0
                     and 0 <= ego.lane + out.action.lane_target < scenario.n_lanes)
        v_pre = ego.v
        t_pre = world.clock
        step(world, (out.action.a_lon, out.action.lane_target))
        a_exec = ego.accel
        e_step = step_energy(v_pre, a_exec, energy_params, regen=regen, dt=dt)
        exec_action = ManagedAction(0.0 if initiated else a_exec,
                                    out.action.lane_target if initiated else 0,
                                    out.action.source)
        bd = lstr(obs, exec_action, lane_changed=initiated,
                  danger=out.filter_result.lateral_blocked,
                  energy_step=e_step, elapsed=t_pre, energy_norm=_norm(energy_params, dt),
                  weights=weights, v_max=scenario.speed_limit)
        r_train = training_reward(bd, weights, dt)

        energy_total += e_step
        lane_changes += 1 if initiated else 0
        reward_sum += bd.total
        train_return += r_train
        gp_sum += bd.r_gp
        speed_sum += v_pre
        n_steps += 1

        if log is not None:
            log.append(TrajectoryRow(
                t=t_pre, x_lon=ego.x_lon, lane=ego.lane, v=ego.v, a=a_exec,
                phase=obs.phase.value, t_r=obs.t_g + obs.t_y + obs.t_r,
                d_f=obs.d_f, v_f=obs.v_f, w_f=obs.w_f, w_l=obs.w_l, w_r=obs.w_r,
                energy_step_j=e_step, reward=bd.total))

        status = episode_done(world)
        if step_hook is not None:
            step_hook(driver, obs, r_train, status is not None)

    return EpisodeResult(
        status=status,
        travel_time=world.clock,
        energy=energy_total,
        lane_changes=lane_changes,
        mean_speed=speed_sum / max(1, n_steps),
        reward_sum=reward_sum,
        train_return=train_return,
        gp_sum=gp_sum,
        log=log,
    )


_NORM_CACHE: dict[tuple, float] = {}


def _norm(params: EnergyParams, dt: float) -> float:
    key = (id(params), dt)
    val = _NORM_CACHE.get(key)
    if val is None:
        from .energy import normalization_energy
        val = normalization_energy(params, dt)
        _NORM_CACHE[key] = val
    return val
