"""Observation preprocessing: normalization and the select-stack scheme
that subsamples every N_select-th frame and stacks the latest N_stack."""

from __future__ import annotations

import numpy as np

N_SELECT = 4
N_STACK = 4
OBS_DIM = 12

# Per-element scales for the 12-vector: phase times, warning bits,
# distances, speeds, acceleration.
OBS_SCALE = np.array([20.0, 3.0, 40.0, 1.0, 1.0, 1.0, 1.0,
                      510.0, 100.0, 13.89, 13.89, 3.0])


def normalize(vector: np.ndarray) -> np.ndarray:
    return np.asarray(vector, dtype=float) / OBS_SCALE


def select_stack(frames, n_select: int = N_SELECT, n_stack: int = N_STACK) -> np.ndarray:
    """Stack of the latest `n_stack` frames taken every `n_select`-th frame,
    most recent last; short histories pad by repeating the oldest pick."""
    n = len(frames)
    if n == 0:
        raise ValueError("frame history is empty")
    picks: list[int] = []
    for k in range(n_stack):
        idx = n - 1 - k * n_select
        picks.append(idx if idx >= 0 else picks[-1])
    return np.stack([np.asarray(frames[i], dtype=float) for i in reversed(picks)])


class FrameHistory:
    """Bounded frame buffer feeding select_stack; one per episode."""

    def __init__(self, n_select: int = N_SELECT, n_stack: int = N_STACK):
        self.n_select = n_select
        self.n_stack = n_stack
        self._frames: list[np.ndarray] = []
        self._cap = n_select * n_stack + 1

    def push(self, vector: np.ndarray) -> None:
        self._frames.append(normalize(vector))
        if len(self._frames) > self._cap:
            del self._frames[0]

    def stacked(self) -> np.ndarray:
        return select_stack(self._frames, self.n_select, self.n_stack)
