"""Discrete composite action codec: 13 ids covering ten acceleration levels,
two lane changes and idle.  Lane changes run at zero acceleration."""

from __future__ import annotations

from ..rules import ManagedAction
from ..world import EGO_ACCEL_MAX

N_ACTIONS = 13

# ids 0-4: +0.2a .. +1.0a, ids 5-9: -0.2a .. -1.0a, 10: left, 11: idle, 12: right
_FRACTIONS = (0.2, 0.4, 0.6, 0.8, 1.0)


def decode(action_id: int) -> ManagedAction:
    if not 0 <= action_id < N_ACTIONS:
        raise ValueError(f"action id out of range: {action_id}")
    if action_id < 5:
        return ManagedAction(_FRACTIONS[action_id] * EGO_ACCEL_MAX, 0, "RL")
    if action_id < 10:
        return ManagedAction(-_FRACTIONS[action_id - 5] * EGO_ACCEL_MAX, 0, "RL")
    return ManagedAction(0.0, {10: -1, 11: 0, 12: +1}[action_id], "RL")


def encode(action: ManagedAction) -> int:
    if action.lane_target != 0:
        return {-1: 10, 0: 11, +1: 12}[action.lane_target]
    if action.a_lon == 0.0:
        return 11
    frac = abs(action.a_lon) / EGO_ACCEL_MAX
    for i, f in enumerate(_FRACTIONS):
        if abs(frac - f) < 1e-9:
            return i if action.a_lon > 0 else i + 5
    raise ValueError(f"not a codebook acceleration: {action.a_lon}")
