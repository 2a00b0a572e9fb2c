"""Two-hidden-layer tanh actor-critic network with hand-written backprop."""

from __future__ import annotations

import numpy as np

from ..sim.birdview import CHANNELS, GRID

EGO_SCALE = np.array([1 / 15.0, 1 / 15.0, 1 / 100.0])
N_EGO_FEATURES = 3
N_INPUTS = len(CHANNELS) * GRID * GRID + N_EGO_FEATURES
PARAM_ORDER = ("W1", "b1", "W2", "b2", "Wpi", "bpi", "Wv", "bv")


def obs_vector(obs, dtype=np.float32) -> np.ndarray:
    """Flatten a birdview observation into the network input."""
    out = np.empty(N_INPUTS, dtype=dtype)
    out[:-N_EGO_FEATURES] = obs.grid.reshape(-1)
    out[-N_EGO_FEATURES:] = obs.ego * EGO_SCALE
    return out


def obs_matrix(observations, dtype=np.float32) -> np.ndarray:
    X = np.empty((len(observations), N_INPUTS), dtype=dtype)
    for i, o in enumerate(observations):
        X[i, :-N_EGO_FEATURES] = o.grid.reshape(-1)
        X[i, -N_EGO_FEATURES:] = o.ego * EGO_SCALE
    return X


def _orthogonal(rng: np.random.Generator, shape, gain: float) -> np.ndarray:
    rows, cols = shape
    a = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q *= np.sign(np.diag(r))
    if rows < cols:
        q = q.T
    return gain * q[:rows, :cols]


def log_softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


class PolicyNetwork:
    """Shared torso, categorical action head and scalar value head."""

    def __init__(self, n_inputs: int, n_actions: int, hidden: int = 128, seed: int = 0,
                 dtype=np.float32, params: dict | None = None):
        self.n_inputs = n_inputs
        self.n_actions = n_actions
        self.hidden = hidden
        self.dtype = np.dtype(dtype)
        if params is None:
            rng = np.random.default_rng(seed)
            g = np.sqrt(2.0)
            params = {
                "W1": _orthogonal(rng, (n_inputs, hidden), g),
                "b1": np.zeros(hidden),
                "W2": _orthogonal(rng, (hidden, hidden), g),
                "b2": np.zeros(hidden),
                "Wpi": _orthogonal(rng, (hidden, n_actions), 0.01),
                "bpi": np.zeros(n_actions),
                "Wv": _orthogonal(rng, (hidden, 1), 1.0),
                "bv": np.zeros(1),
            }
        self.params = {k: np.ascontiguousarray(params[k], dtype=self.dtype) for k in PARAM_ORDER}

    def copy(self) -> "PolicyNetwork":
        return PolicyNetwork(self.n_inputs, self.n_actions, self.hidden, dtype=self.dtype,
                             params={k: v.copy() for k, v in self.params.items()})

    def forward(self, X: np.ndarray):
        P = self.params
        X = np.asarray(X, dtype=self.dtype)
        h1 = np.tanh(X @ P["W1"] + P["b1"])
        h2 = np.tanh(h1 @ P["W2"] + P["b2"])
        logits = h2 @ P["Wpi"] + P["bpi"]
        values = (h2 @ P["Wv"] + P["bv"])[:, 0]
        return logits, values, (X, h1, h2)

    def backward(self, cache, dlogits: np.ndarray, dvalues: np.ndarray) -> dict:
        P = self.params
        X, h1, h2 = cache
        dlogits = dlogits.astype(self.dtype, copy=False)
        dv = dvalues.astype(self.dtype, copy=False)[:, None]
        grads = {
            "Wpi": h2.T @ dlogits,
            "bpi": dlogits.sum(axis=0),
            "Wv": h2.T @ dv,
            "bv": dv.sum(axis=0),
        }
        dh2 = dlogits @ P["Wpi"].T + dv @ P["Wv"].T
        da2 = dh2 * (1 - h2 * h2)
        grads["W2"] = h1.T @ da2
        grads["b2"] = da2.sum(axis=0)
        da1 = (da2 @ P["W2"].T) * (1 - h1 * h1)
        grads["W1"] = X.T @ da1
        grads["b1"] = da1.sum(axis=0)
        return grads


def policy_forward(net: PolicyNetwork, obs):
    """Action probabilities and value for a single observation (or input vector)."""
    x = obs if isinstance(obs, np.ndarray) else obs_vector(obs, net.dtype)
    if x.shape != (net.n_inputs,):
        raise ValueError(f"observation has shape {x.shape}, network expects ({net.n_inputs},)")
    logits, values, _ = net.forward(x[None, :])
    probs = np.exp(log_softmax(logits.astype(np.float64))[0])
    return probs / probs.sum(), float(values[0])
