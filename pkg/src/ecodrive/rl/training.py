"""Q-learning trainer: dueling network, target network, prioritized replay,
linear exploration/importance-sampling schedules, per-episode curve logging."""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from ..driving import HrlDriver
from ..energy import DEFAULT_ENERGY_PARAMS, EnergyParams
from ..episode import EpisodeResult, run_episode
from ..reward import DEFAULT_WEIGHTS, RewardWeights
from ..world import ScenarioConfig
from .actions import N_ACTIONS
from .network import Adam, DuelingNetwork
from .preprocess import N_SELECT, N_STACK, OBS_DIM
from .replay import PrioritizedReplay

CURVE_COLUMNS = ["episode", "steps", "avg_speed", "energy_J", "R_GP",
                 "lane_changes", "return"]


@dataclass
class TrainConfig:
    lr: float = 0.00025
    gamma: float = 0.99
    batch_size: int = 64
    replay_capacity: int = 50_000
    warmup_transitions: int = 10_000
    target_sync_every: int = 10_000     # environment steps
    total_steps: int = 500_000          # environment steps
    eps_start: float = 1.0
    eps_end: float = 1e-5
    eps_decay_steps: int = 400_000      # environment steps to reach eps_end
    beta_start: float = 0.4
    beta_end: float = 1.0
    train_every: int = 1                # gradient steps per decision
    hidden: tuple[int, ...] = (1024, 256, 128)
    n_select: int = N_SELECT
    n_stack: int = N_STACK
    seed: int = 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d


def epsilon_at(step: int, config: TrainConfig) -> float:
    """Linearly annealed exploration rate at a given environment step."""
    frac = min(1.0, step / max(1, config.eps_decay_steps))
    return config.eps_start + frac * (config.eps_end - config.eps_start)


def beta_at(step: int, config: TrainConfig) -> float:
    """Linearly annealed importance-sampling exponent."""
    frac = min(1.0, step / max(1, config.total_steps))
    return config.beta_start + frac * (config.beta_end - config.beta_start)


def act(net: DuelingNetwork, stacked: np.ndarray, epsilon: float,
        rng: np.random.Generator) -> int:
    """Epsilon-greedy action choice with lowest-index tie-break."""
    if epsilon > 0.0 and rng.uniform() < epsilon:
        return int(rng.integers(net.n_actions))
    return int(np.argmax(net.q_values(stacked)))


def compute_targets(net_target: DuelingNetwork, rewards: np.ndarray,
                    next_obs: np.ndarray, dones: np.ndarray,
                    gamma: float) -> np.ndarray:
    q_next = np.atleast_2d(net_target.q_values(next_obs))
    return rewards + gamma * q_next.max(axis=1) * (1.0 - dones)


def train_step(net: DuelingNetwork, net_target: DuelingNetwork,
               optimizer: Adam, replay: PrioritizedReplay,
               batch_size: int, beta: float, gamma: float) -> float:
    """One gradient step on a prioritized batch; refreshes the sampled
    priorities from the new TD errors and returns the loss."""
    idx, (obs, actions, rewards, next_obs, dones), weights = \
        replay.sample(batch_size, beta)
    targets = compute_targets(net_target, rewards, next_obs, dones, gamma)
    loss, grads, delta = net.loss_and_grads(obs, actions, targets, weights)
    optimizer.step(grads)
    replay.update_priorities(idx, delta)
    return loss


@dataclass
class EpisodeRecord:
    episode: int
    steps: int
    avg_speed: float
    energy_j: float
    r_gp: float
    lane_changes: int
    ret: float


def curve_to_csv(records: list[EpisodeRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CURVE_COLUMNS)
    for r in records:
        writer.writerow([r.episode, r.steps, f"{r.avg_speed:.6f}",
                         f"{r.energy_j:.6f}", f"{r.r_gp:.6f}",
                         r.lane_changes, f"{r.ret:.6f}"])
    return buf.getvalue()


class _TransitionCollector:
    """Builds decision-level transitions from the per-step hook: the reward
    between two decisions is the sum of the per-step trainer rewards."""

    def __init__(self, replay: PrioritizedReplay):
        self.replay = replay
        self._pending: tuple[np.ndarray, int] | None = None
        self._acc = 0.0
        self.new_transitions = 0

    def reset(self) -> None:
        self._pending = None
        self._acc = 0.0

    def __call__(self, driver: HrlDriver, obs, reward: float, done: bool) -> None:
        if driver.decision_boundary:
            if self._pending is not None:
                s, a = self._pending
                self.replay.add(s, a, self._acc, driver.last_stack, False)
                self.new_transitions += 1
            self._pending = (driver.last_stack, driver.last_action_id)
            self._acc = 0.0
        self._acc += reward
        if done and self._pending is not None:
            s, a = self._pending
            # terminal target ignores the successor; reuse the last stack
            self.replay.add(s, a, self._acc, driver.history.stacked(), True)
            self.new_transitions += 1
            self._pending = None


@dataclass
class TrainResult:
    net: DuelingNetwork
    records: list[EpisodeRecord]
    env_steps: int


def train(config: TrainConfig, scenario_factory,
          energy_params: EnergyParams = DEFAULT_ENERGY_PARAMS,
          weights: RewardWeights = DEFAULT_WEIGHTS,
          max_episodes: int | None = None,
          curve_path: str | None = None,
          progress=None) -> TrainResult:
    """Run the full training loop until `total_steps` environment steps
    (or `max_episodes`).  `scenario_factory(episode_index)` supplies the
    scenario for each episode; `progress`, if given, is called with each
    EpisodeRecord."""
    net = DuelingNetwork(N_STACK * OBS_DIM, config.hidden, N_ACTIONS,
                         seed=config.seed)
    net_target = net.clone()
    optimizer = Adam(net, lr=config.lr)
    replay = PrioritizedReplay(config.replay_capacity,
                               obs_shape=(config.n_stack, OBS_DIM),
                               seed=config.seed + 1)
    driver = HrlDriver(net, rng=np.random.default_rng(config.seed + 2),
                       n_select=config.n_select, n_stack=config.n_stack)
    collector = _TransitionCollector(replay)

    records: list[EpisodeRecord] = []
    env_steps = 0
    last_sync = 0
    episode = 0
    while env_steps < config.total_steps:
        if max_episodes is not None and episode >= max_episodes:
            break
        scenario = scenario_factory(episode)
        driver.reset()
        driver.dt = scenario.dt
        driver.epsilon = epsilon_at(env_steps, config)
        collector.reset()
        collector.new_transitions = 0

        result = run_episode(driver, scenario, energy_params, weights,
                             collect_log=False, step_hook=collector)
        steps = int(round(result.travel_time / scenario.dt))
        env_steps += steps

        if len(replay) >= config.warmup_transitions:
            for _ in range(collector.new_transitions * config.train_every):
                train_step(net, net_target, optimizer, replay,
                           config.batch_size, beta_at(env_steps, config),
                           config.gamma)
        if env_steps - last_sync >= config.target_sync_every:
            net_target.copy_from(net)
            last_sync = env_steps

        record = EpisodeRecord(episode, steps, result.mean_speed,
                               result.energy, result.gp_sum,
                               result.lane_changes, result.train_return)
        records.append(record)
        if progress is not None:
            progress(record)
        episode += 1

    if curve_path is not None:
        with open(curve_path, "w") as fh:
            fh.write(curve_to_csv(records))
    return TrainResult(net, records, env_steps)


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

CHECKPOINT_VERSION = 1


def config_digest(config: TrainConfig) -> str:
    payload = json.dumps(config.to_dict(), sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def save_checkpoint(path: str, net: DuelingNetwork, config: TrainConfig) -> None:
    meta = json.dumps({
        "version": CHECKPOINT_VERSION,
        "config": config.to_dict(),
        "digest": config_digest(config),
        "input_dim": net.input_dim,
        "hidden": list(net.hidden),
        "n_actions": net.n_actions,
    })
    np.savez(path, __meta__=np.frombuffer(meta.encode(), dtype=np.uint8),
             **net.params)


def load_checkpoint(path: str) -> tuple[DuelingNetwork, TrainConfig]:
    data = np.load(path)
    meta = json.loads(data["__meta__"].tobytes().decode())
    if meta["version"] != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {meta['version']}")
    cfg_dict = dict(meta["config"])
    cfg_dict["hidden"] = tuple(cfg_dict["hidden"])
    config = TrainConfig(**cfg_dict)
    net = DuelingNetwork(meta["input_dim"], tuple(meta["hidden"]),
                         meta["n_actions"])
    for k in net.params:
        net.params[k] = np.array(data[k])
    return net, config


# ---------------------------------------------------------------------------
# Sanity task: short, empty, always-green corridor
# ---------------------------------------------------------------------------

def corridor_scenario(seed: int = 0, length: float = 60.0,
                      entry_speed: float = 1.0, dt: float = 0.02):
    """Traffic-free straightaway with a long green; the optimal behavior is
    simply to accelerate, which makes learning progress easy to check."""
    from ..world import SignalTiming
    return ScenarioConfig(
        entry_offset=0.0, entry_speed=entry_speed, flow_rate=0.0, seed=seed,
        dt=dt, stop_line=length, road_end=length + 20.0, timeout=60.0,
        warmup=0.0, signal=SignalTiming(green=3600.0, yellow=3.0, red=40.0,
                                        all_red=1.0))


def discounted_return(driver, scenario: ScenarioConfig, gamma: float,
                      energy_params: EnergyParams = DEFAULT_ENERGY_PARAMS,
                      weights: RewardWeights = DEFAULT_WEIGHTS) -> float:
    """Discounted sum of the per-step trainer rewards over one episode."""
    total = 0.0
    factor = 1.0

    def hook(_driver, _obs, reward, _done):
        nonlocal total, factor
        total += factor * reward
        factor *= gamma

    run_episode(driver, scenario, energy_params, weights,
                collect_log=False, step_hook=hook)
    return total


class ConstantActionDriver(HrlDriver):
    """HrlDriver whose network decision is replaced by a fixed action id;
    the rule layer and safety filter still apply."""

    def __init__(self, action_id: int, **kwargs):
        net = DuelingNetwork(N_STACK * OBS_DIM, (8,), N_ACTIONS)
        super().__init__(net, epsilon=0.0, **kwargs)
        self.action_id = action_id

    def _decide(self, stack):
        return self.action_id


def best_constant_return(scenario: ScenarioConfig, gamma: float,
                         energy_params: EnergyParams = DEFAULT_ENERGY_PARAMS,
                         weights: RewardWeights = DEFAULT_WEIGHTS):
    """Discounted return of the best single-action policy; a floor any
    trained policy on the same task should reach."""
    best_id, best = None, -np.inf
    for action_id in range(N_ACTIONS):
        driver = ConstantActionDriver(action_id, dt=scenario.dt)
        ret = discounted_return(driver, scenario, gamma, energy_params, weights)
        if ret > best:
            best_id, best = action_id, ret
    return best_id, best
