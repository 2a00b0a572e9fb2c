"""Batch collection for independent learners and greedy evaluation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from ..posg import Transition


@dataclass
class EpisodeRecord:
    agent: int
    params: object
    episodic_return: float
    route_completion: float
    collisions: int
    values: list  # rollout-time value estimates of visited states
    length: int


@dataclass
class ReturnStats:
    episodic_return: float
    route_completion: float
    collisions: float
    max_return: float


def run_episode(env, policies: Mapping[int, Callable], params, rng: np.random.Generator, greedy: bool = False,
                max_steps: int | None = None):
    """Play one episode; returns per-agent transitions and episode records."""
    obs = env.reset(params)
    trans = {a: [] for a in obs}
    rewards = {a: 0.0 for a in obs}
    collisions = {a: 0 for a in obs}
    steps = 0
    while env.active_agents() and (max_steps is None or steps < max_steps):
        active = env.active_agents()
        chosen = {a: policies[a].act(obs[a], rng, greedy=greedy) for a in active}
        res = env.step({a: env.decode_action(a, chosen[a][0]) for a in active})
        for e in res.events:
            if e.kind == "collision":
                collisions[e.agent] += 1
        for a in active:
            act, logp, value = chosen[a]
            trans[a].append(Transition(obs[a], act, res.rewards[a], res.observations[a], res.terminated[a],
                                       value, logp, res.truncated[a]))
            rewards[a] += res.rewards[a]
            obs[a] = res.observations[a]
        steps += 1
    if env.active_agents():  # cut by max_steps: mark as truncated for bootstrapping
        for a in env.active_agents():
            if trans[a]:
                trans[a][-1].truncated = True
    records = [
        EpisodeRecord(a, params, rewards[a], env.route_completion(a), collisions[a],
                      [t.value_estimate for t in trans[a]], len(trans[a]))
        for a in trans
    ]
    return trans, records


def collect_batch(env, agents: Mapping[int, object], next_params: Callable[[], object], batch: int,
                  rng: np.random.Generator):
    """Run episodes until every agent holds ``batch`` transitions.

    Agents that fill up early keep acting; their surplus transitions are
    dropped and the last kept transition is marked truncated so GAE
    bootstraps from the value head.
    """
    buf = {a: [] for a in agents}
    records = []
    while min(len(b) for b in buf.values()) < batch:
        trans, recs = run_episode(env, agents, next_params(), rng)
        records += recs
        for a, ts in trans.items():
            buf[a].extend(ts)
    for a, ts in buf.items():
        del ts[batch:]
        if not (ts[-1].done or ts[-1].truncated):
            ts[-1].truncated = True
    return buf, records


def summarize(records) -> dict:
    if not records:
        return {"mean_return": float("nan"), "route_completion": float("nan"), "collisions": float("nan")}
    return {
        "mean_return": float(np.mean([r.episodic_return for r in records])),
        "route_completion": float(np.mean([r.route_completion for r in records])),
        "collisions": float(np.mean([r.collisions for r in records])),
    }


def evaluate_policy(env, policies, params_list, episodes: int = 1, seed: int = 0) -> list[ReturnStats]:
    """Greedy evaluation; one :class:`ReturnStats` per scenario.

    ``policies`` is either a mapping agent -> policy or a single policy used
    for every controlled agent.
    """
    out = []
    for i, params in enumerate(params_list):
        rng = np.random.default_rng([seed, i])
        recs = []
        for _ in range(episodes):
            n = env.spec.ego_role.count
            pols = policies if isinstance(policies, Mapping) else {a: policies for a in range(n)}
            _, r = run_episode(env, pols, params, rng, greedy=True)
            recs += r
        out.append(ReturnStats(
            float(np.mean([r.episodic_return for r in recs])),
            float(np.mean([r.route_completion for r in recs])),
            float(np.mean([r.collisions for r in recs])),
            float(max(r.episodic_return for r in recs)),
        ))
    return out
