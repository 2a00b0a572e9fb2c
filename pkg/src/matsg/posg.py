"""Environment-facing contract of the multi-agent driving game.

An environment is reset with a concrete :class:`~matsg.scenario.ScenarioParams`
and then stepped with a joint action covering every agent that is still
running.  Observations, rewards and termination flags are per agent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Protocol

import numpy as np

AgentId = int

EVENT_KINDS = ("collision", "route_complete", "off_route", "timeout", "deadlock")
TERMINATING = frozenset({"collision", "route_complete", "off_route"})
TRUNCATING = frozenset({"timeout", "deadlock"})

GAMMA = 0.99


@dataclass(frozen=True)
class Event:
    kind: str
    agent: AgentId
    sim_time: float

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}")


@dataclass
class StepResult:
    observations: dict[AgentId, Any]
    rewards: dict[AgentId, float]
    terminated: dict[AgentId, bool]
    truncated: dict[AgentId, bool]
    events: list[Event] = field(default_factory=list)


@dataclass
class Transition:
    observation: Any
    action: Any
    reward: float
    next_observation: Any
    done: bool
    value_estimate: float
    log_prob: float
    truncated: bool = False


class MultiAgentEnv(Protocol):
    def reset(self, params) -> dict[AgentId, Any]: ...

    def step(self, joint: Mapping[AgentId, Any]) -> StepResult: ...

    def active_agents(self) -> list[AgentId]: ...


class EnvError(RuntimeError):
    """Contract violation when stepping or resetting an environment."""


# policy(observation, rng) -> (action, log_prob, value)
Policy = Callable[[Any, np.random.Generator], tuple]


def rollout(env, policies: Mapping[AgentId, Policy], params, max_steps: int,
            rng: np.random.Generator | None = None) -> dict[AgentId, list[Transition]]:
    """Run one episode (or ``max_steps`` decisions) and collect transitions.

    Policies may return a discrete action index, which the environment
    decodes, or a ready-made action object.
    """
    if max_steps <= 0:
        raise ValueError("max_steps must be positive")
    rng = rng if rng is not None else np.random.default_rng(0)
    obs = env.reset(params)
    out: dict[AgentId, list[Transition]] = {a: [] for a in obs}
    for _ in range(max_steps):
        active = env.active_agents()
        if not active:
            break
        chosen = {}
        joint = {}
        for a in active:
            act, logp, value = policies[a](obs[a], rng)
            chosen[a] = (act, logp, value)
            joint[a] = env.decode_action(a, act) if isinstance(act, (int, np.integer)) else act
        res = env.step(joint)
        for a in active:
            act, logp, value = chosen[a]
            out[a].append(Transition(
                obs[a], act, res.rewards[a], res.observations[a],
                res.terminated[a], float(value), float(logp), res.truncated[a],
            ))
            obs[a] = res.observations[a]
    return out


def discounted_return(rewards, gamma: float = GAMMA) -> float:
    g = 0.0
    for r in reversed(list(rewards)):
        g = r + gamma * g
    return g


def return_bound(r_step_max: float, horizon: int, gamma: float = GAMMA) -> float:
    """Upper bound on |G| for a finite rollout with per-step rewards bounded by ``r_step_max``."""
    if gamma == 1.0:
        return r_step_max * horizon
    return r_step_max * (1 - gamma**horizon) / (1 - gamma)


def finite(x: float) -> bool:
    return math.isfinite(x)
