"""Long-short-term reward: six weighted terms mixing instantaneous
quantities with green-pass shaping toward crossing during green."""

from __future__ import annotations

from dataclasses import dataclass

from .world import Phase


@dataclass(frozen=True)
class RewardWeights:
    w_v: float = 2.0
    w_e: float = 0.1
    w_t: float = 0.002
    w_lc: float = 3.0
    w_d: float = 1.0
    w_gp: float = 0.1

    def __post_init__(self):
        if min(self.w_v, self.w_e, self.w_t, self.w_lc, self.w_d, self.w_gp) < 0:
            raise ValueError("reward weights must be non-negative")


DEFAULT_WEIGHTS = RewardWeights()


@dataclass(frozen=True)
class RewardBreakdown:
    r_velocity: float
    r_energy: float
    r_time: float
    r_lanechange: float
    r_danger: float
    r_gp: float
    total: float


def velocity_reward(v: float, v_min: float = 0.0, v_max: float = 50.0 / 3.6) -> float:
    """Linear speed normalization clamped to [0, 1]."""
    if v_max <= v_min:
        raise ValueError("v_max must exceed v_min")
    return min(1.0, max(0.0, (v - v_min) / (v_max - v_min)))


def green_pass_reward(v: float, a: float, d_r: float, t_r: float, phase: Phase) -> float:
    """Shaping toward crossing during green.

    Compares the projected distance v * T_r against the remaining distance
    d_r; accelerating is rewarded exactly when it helps a green crossing
    and penalized when it drives the ego into a red arrival.
    """
    d_pred = v * t_r
    can_pass = d_pred > d_r
    if phase is Phase.GREEN:
        if can_pass:
            return 0.2 if a > 0 else (0.5 if a == 0 else -1.0)
        return 1.0 if a > 0 else (0.5 if a == 0 else -1.0)
    if can_pass:
        return -1.0 if a > 0 else (0.5 if a == 0 else 0.2)
    return 0.5 if a > 0 else (0.5 if a == 0 else -0.5)


def lstr(obs, exec_action, lane_changed: bool, danger: bool,
         energy_step: float, elapsed: float, energy_norm: float,
         weights: RewardWeights = DEFAULT_WEIGHTS,
         v_min: float = 0.0, v_max: float = 50.0 / 3.6) -> RewardBreakdown:
    """Full reward breakdown for one step.

    `obs` is the post-arbitration observation, `exec_action` the executed
    ManagedAction; the energy term is the negated, normalized step energy
    (zero while decelerating) and the time term is the accumulated -elapsed.
    """
    a = exec_action.a_lon
    r_v = velocity_reward(obs.v, v_min, v_max)
    r_e = -(energy_step / energy_norm) if a >= 0 else 0.0
    r_t = -elapsed
    r_lc = -0.1 if lane_changed else 0.0
    r_d = -0.5 if danger else 0.0
    r_gp = green_pass_reward(obs.v, a, obs.d_r, _phase_remaining(obs), obs.phase) \
        if obs.d_r > 0.0 else 0.0
    w = weights
    total = (w.w_v * r_v + w.w_e * r_e + w.w_t * r_t
             + w.w_lc * r_lc + w.w_d * r_d + w.w_gp * r_gp)
    return RewardBreakdown(r_v, r_e, r_t, r_lc, r_d, r_gp, total)


def _phase_remaining(obs) -> float:
    return obs.t_g + obs.t_y + obs.t_r


def training_reward(breakdown: RewardBreakdown, weights: RewardWeights,
                    dt: float) -> float:
    """Per-step reward consumed by the trainer: identical to the breakdown
    total except that the accumulated time term is replaced by its per-step
    delta -w_t * dt."""
    return breakdown.total - weights.w_t * breakdown.r_time - weights.w_t * dt
