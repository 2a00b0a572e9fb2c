"""Clipped-surrogate PPO with generalized advantage estimation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .network import PARAM_ORDER, PolicyNetwork, log_softmax, obs_matrix, obs_vector


@dataclass
class PpoConfig:
    clip: float = 0.2
    gae_lambda: float = 0.95
    gamma: float = 0.99
    epochs: int = 4
    minibatch: int = 256
    lr: float = 3e-4
    ent_coef: float = 0.01
    vf_coef: float = 0.5
    batch: int = 2048
    updates: int = 175
    max_grad_norm: float = 0.5
    adam_eps: float = 1e-5

    def __post_init__(self):
        if not 0 < self.clip < 1:
            raise ValueError("clip must lie in (0, 1)")
        for name in ("gae_lambda", "gamma", "epochs", "minibatch", "batch", "updates"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.lr < 0:
            raise ValueError("lr must be non-negative")


class PpoError(RuntimeError):
    def __init__(self, message: str, diagnostics: dict):
        super().__init__(message)
        self.diagnostics = diagnostics


def compute_gae(rewards, values, dones, gamma: float, lam: float):
    """Advantages and returns for one trajectory segment.

    ``values`` has one more entry than ``rewards``: the bootstrap value of the
    state after the last step (ignored where ``dones`` is set).
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    dones = np.asarray(dones, dtype=np.float64)
    T = len(rewards)
    if len(values) != T + 1 or len(dones) != T:
        raise ValueError(f"length mismatch: {T} rewards, {len(values)} values, {len(dones)} dones")
    adv = np.zeros(T)
    last = 0.0
    for t in range(T - 1, -1, -1):
        nonterminal = 1.0 - dones[t]
        delta = rewards[t] + gamma * values[t + 1] * nonterminal - values[t]
        last = delta + gamma * lam * nonterminal * last
        adv[t] = last
    return adv, adv + values[:-1]


def normalize(adv: np.ndarray) -> np.ndarray:
    adv = np.asarray(adv, dtype=np.float64)
    adv = adv - adv.mean()
    std = adv.std()
    return adv / std if std > 0 else adv


def ppo_loss(net: PolicyNetwork, X, actions, old_logp, adv, returns, cfg: PpoConfig, with_grads: bool = True):
    """Loss ``-surrogate + vf_coef * value_mse - ent_coef * entropy`` and its gradient."""
    B = len(actions)
    logits, values, cache = net.forward(X)
    logits = logits.astype(np.float64)
    values = values.astype(np.float64)
    logp_all = log_softmax(logits)
    probs = np.exp(logp_all)
    idx = np.arange(B)
    logp = logp_all[idx, actions]
    ratio = np.exp(logp - old_logp)
    clipped = np.clip(ratio, 1 - cfg.clip, 1 + cfg.clip)
    surr1, surr2 = ratio * adv, clipped * adv
    policy_loss = -np.minimum(surr1, surr2).mean()
    value_loss = ((values - returns) ** 2).mean()
    ent = -(probs * logp_all).sum(axis=1)
    entropy = ent.mean()
    loss = policy_loss + cfg.vf_coef * value_loss - cfg.ent_coef * entropy
    info = {
        "loss": float(loss),
        "policy_loss": float(policy_loss),
        "value_loss": float(value_loss),
        "entropy": float(entropy),
        "clip_frac": float((np.abs(ratio - 1) > cfg.clip).mean()),
        "approx_kl": float(((ratio - 1) - (logp - old_logp)).mean()),
    }
    if not with_grads:
        return loss, info, None
    # d(-min(surr1, surr2))/dlogp: only the unclipped branch carries gradient
    dlogp = np.where(surr1 <= surr2, -adv * ratio, 0.0) / B
    onehot = np.zeros_like(probs)
    onehot[idx, actions] = 1.0
    dlogits = dlogp[:, None] * (onehot - probs)
    dlogits += cfg.ent_coef / B * probs * (logp_all + ent[:, None])
    dvalues = cfg.vf_coef * 2.0 * (values - returns) / B
    return loss, info, net.backward(cache, dlogits, dvalues)


class Adam:
    def __init__(self, params: dict, lr: float, eps: float = 1e-5, betas=(0.9, 0.999)):
        self.lr = lr
        self.eps = eps
        self.b1, self.b2 = betas
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: dict, grads: dict) -> None:
        self.t += 1
        c1 = 1 - self.b1**self.t
        c2 = 1 - self.b2**self.t
        for k in PARAM_ORDER:
            g = grads[k]
            m, v = self.m[k], self.v[k]
            m *= self.b1
            m += (1 - self.b1) * g
            v *= self.b2
            v += (1 - self.b2) * g * g
            if self.lr:
                params[k] -= (self.lr / c1) * m / (np.sqrt(v / c2) + self.eps)


class PPOAgent:
    """One independently trained policy with its own optimizer state."""

    def __init__(self, n_actions: int, cfg: PpoConfig | None = None, seed: int = 0, net: PolicyNetwork | None = None,
                 dtype=np.float32):
        from .network import N_INPUTS

        self.cfg = cfg or PpoConfig()
        self.net = net or PolicyNetwork(N_INPUTS, n_actions, seed=seed, dtype=dtype)
        self.opt = Adam(self.net.params, self.cfg.lr, self.cfg.adam_eps)
        self.rng = np.random.default_rng(seed + 1)

    def act(self, obs, rng: np.random.Generator, greedy: bool = False):
        logits, values, _ = self.net.forward(obs_vector(obs, self.net.dtype)[None, :])
        logp_all = log_softmax(logits.astype(np.float64))[0]
        if greedy:
            a = int(np.argmax(logp_all))
        else:
            p = np.exp(logp_all)
            a = int(rng.choice(len(p), p=p / p.sum()))
        return a, float(logp_all[a]), float(values[0])

    def value(self, obs) -> float:
        _, values, _ = self.net.forward(obs_vector(obs, self.net.dtype)[None, :])
        return float(values[0])

    def __call__(self, obs, rng):
        return self.act(obs, rng)

    def update(self, transitions) -> dict:
        return ppo_update(self, transitions, self.cfg)


def advantages_for(agent: PPOAgent, transitions, cfg: PpoConfig):
    """GAE over a time-ordered batch that may hold several episode segments."""
    adv = np.zeros(len(transitions))
    ret = np.zeros(len(transitions))
    start = 0
    for i, tr in enumerate(transitions):
        last = i == len(transitions) - 1
        if tr.done or tr.truncated or last:
            seg = transitions[start:i + 1]
            boot = 0.0 if tr.done else agent.value(tr.next_observation)
            values = [t.value_estimate for t in seg] + [boot]
            dones = [0.0] * (len(seg) - 1) + [1.0 if tr.done else 0.0]
            a, r = compute_gae([t.reward for t in seg], values, dones, cfg.gamma, cfg.gae_lambda)
            adv[start:i + 1] = a
            ret[start:i + 1] = r
            start = i + 1
    return adv, ret


def ppo_update(agent: PPOAgent, transitions, cfg: PpoConfig | None = None) -> dict:
    """Several epochs of minibatch PPO on one batch; updates ``agent`` in place.

    A non-finite loss aborts before any weights change for that minibatch
    and raises :class:`PpoError` carrying the diagnostics.
    """
    cfg = cfg or agent.cfg
    if len(transitions) == 0:
        raise ValueError("empty batch")
    adv, returns = advantages_for(agent, transitions, cfg)
    adv = normalize(adv)
    X = obs_matrix([t.observation for t in transitions], agent.net.dtype)
    actions = np.array([t.action for t in transitions], dtype=np.int64)
    old_logp = np.array([t.log_prob for t in transitions])
    n = len(transitions)
    mb = min(cfg.minibatch, n)
    agent.opt.lr = cfg.lr
    stats = []
    for _ in range(cfg.epochs):
        order = agent.rng.permutation(n)
        for s in range(0, n, mb):
            j = order[s:s + mb]
            loss, info, grads = ppo_loss(agent.net, X[j], actions[j], old_logp[j], adv[j], returns[j], cfg)
            if not math.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads.values()):
                raise PpoError("non-finite loss or gradient", info)
            norm = math.sqrt(sum(float((g.astype(np.float64) ** 2).sum()) for g in grads.values()))
            if cfg.max_grad_norm and norm > cfg.max_grad_norm:
                scale = cfg.max_grad_norm / (norm + 1e-6)
                grads = {k: g * scale for k, g in grads.items()}
            agent.opt.step(agent.net.params, grads)
            stats.append(info)
    return {k: float(np.mean([s[k] for s in stats])) for k in stats[0]}
