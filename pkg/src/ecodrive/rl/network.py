"""Dueling action-value network over flattened stacked observations.

Hand-rolled numpy implementation in float64: two ReLU MLP streams (value
and advantage) over a shared flattened input, combined with the
mean-centered aggregation Q = V + A - mean(A).  Analytic gradients and an
Adam optimizer are provided so training is fully self-contained and
finite-difference checkable.
"""

from __future__ import annotations

import numpy as np

from .actions import N_ACTIONS

DEFAULT_HIDDEN = (1024, 256, 128)


def _init_layer(rng: np.random.Generator, fan_in: int, fan_out: int):
    # Scaled-uniform fan-in init.
    bound = 1.0 / np.sqrt(fan_in)
    w = rng.uniform(-bound, bound, size=(fan_in, fan_out))
    b = np.zeros(fan_out)
    return w, b


class DuelingNetwork:
    """Value stream + advantage stream with mean-centered aggregation."""

    def __init__(self, input_dim: int, hidden: tuple[int, ...] = DEFAULT_HIDDEN,
                 n_actions: int = N_ACTIONS, seed: int = 0):
        self.input_dim = input_dim
        self.hidden = tuple(hidden)
        self.n_actions = n_actions
        rng = np.random.default_rng(seed)
        self.params: dict[str, np.ndarray] = {}
        for stream, head_dim in (("v", 1), ("a", n_actions)):
            dims = (input_dim, *self.hidden, head_dim)
            for i in range(len(dims) - 1):
                w, b = _init_layer(rng, dims[i], dims[i + 1])
                self.params[f"{stream}_w{i}"] = w
                self.params[f"{stream}_b{i}"] = b
        self._n_layers = len(self.hidden) + 1

    # -- forward -----------------------------------------------------------

    def _stream(self, x: np.ndarray, stream: str):
        acts = [x]
        h = x
        for i in range(self._n_layers):
            z = h @ self.params[f"{stream}_w{i}"] + self.params[f"{stream}_b{i}"]
            if i < self._n_layers - 1:
                z = np.maximum(z, 0.0)
            acts.append(z)
            h = z
        return h, acts

    def q_values(self, s: np.ndarray) -> np.ndarray:
        """Q-vector(s) for stacked observation(s); accepts a single stacked
        observation or a batch."""
        x = np.asarray(s, dtype=float)
        single = x.size == self.input_dim
        x = x.reshape(1, -1) if single else x.reshape(-1, self.input_dim)
        if not np.all(np.isfinite(x)):
            raise FloatingPointError("non-finite network input")
        v, _ = self._stream(x, "v")
        a, _ = self._stream(x, "a")
        q = v + a - a.mean(axis=1, keepdims=True)
        if not np.all(np.isfinite(q)):
            raise FloatingPointError("non-finite network output")
        return q[0] if single else q

    # -- loss and gradients --------------------------------------------------

    def loss(self, s: np.ndarray, actions: np.ndarray, targets: np.ndarray,
             weights: np.ndarray) -> float:
        q = self.q_values(s)
        delta = q[np.arange(len(actions)), actions] - targets
        return float(0.5 * np.mean(weights * delta ** 2))

    def loss_and_grads(self, s: np.ndarray, actions: np.ndarray,
                       targets: np.ndarray, weights: np.ndarray):
        """Importance-weighted squared TD loss, its gradients, and the
        per-sample TD errors."""
        x = np.asarray(s, dtype=float).reshape(len(actions), -1)
        v, v_acts = self._stream(x, "v")
        a, a_acts = self._stream(x, "a")
        q = v + a - a.mean(axis=1, keepdims=True)
        batch = len(actions)
        idx = np.arange(batch)
        delta = q[idx, actions] - targets
        loss = float(0.5 * np.mean(weights * delta ** 2))
        if not np.isfinite(loss):
            raise FloatingPointError("non-finite training loss")

        d_q = np.zeros_like(q)
        d_q[idx, actions] = weights * delta / batch
        d_v = d_q.sum(axis=1, keepdims=True)
        d_a = d_q - d_q.mean(axis=1, keepdims=True)

        grads: dict[str, np.ndarray] = {}
        for stream, acts, d_out in (("v", v_acts, d_v), ("a", a_acts, d_a)):
            d = d_out
            for i in reversed(range(self._n_layers)):
                h_in = acts[i]
                grads[f"{stream}_w{i}"] = h_in.T @ d
                grads[f"{stream}_b{i}"] = d.sum(axis=0)
                if i > 0:
                    d = (d @ self.params[f"{stream}_w{i}"].T) * (acts[i] > 0.0)
        return loss, grads, delta

    # -- utilities ----------------------------------------------------------

    def copy_from(self, other: "DuelingNetwork") -> None:
        for k, v in other.params.items():
            self.params[k] = v.copy()

    def clone(self) -> "DuelingNetwork":
        net = DuelingNetwork(self.input_dim, self.hidden, self.n_actions)
        net.copy_from(self)
        return net


class Adam:
    """Adaptive-moment optimizer over a DuelingNetwork's parameter dict."""

    def __init__(self, net: DuelingNetwork, lr: float = 0.00025,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.net = net
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in net.params.items()}
        self.v = {k: np.zeros_like(v) for k, v in net.params.items()}

    def step(self, grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        correction = np.sqrt(1.0 - b2 ** self.t) / (1.0 - b1 ** self.t)
        for k, g in grads.items():
            self.m[k] = b1 * self.m[k] + (1 - b1) * g
            self.v[k] = b2 * self.v[k] + (1 - b2) * g * g
            self.net.params[k] -= self.lr * correction * self.m[k] / (np.sqrt(self.v[k]) + self.eps)
