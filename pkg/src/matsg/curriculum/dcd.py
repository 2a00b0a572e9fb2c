"""Dual curriculum loop with domain-randomization and replay-only baselines."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..learner.ppo import PpoConfig, PpoError, ppo_update
from ..learner.rollouts import collect_batch, run_episode, summarize
from ..posg import EnvError
from ..scenario import GeneratorDistribution, ScenarioParams, dr_distribution, sample_params, uniform_distribution
from .buffer import LevelBuffer
from .generator import update_generator
from .regret import mm_regret

METHODS = ("DR", "PLR", "DCD")


@dataclass
class CurriculumConfig:
    method: str = "DCD"
    replay_prob: float = 0.5
    elite_frac: float = 0.25
    population: int = 16
    alpha: float = 0.7
    capacity: int = 256
    beta: float = 0.3
    rho: float = 0.3

    def __post_init__(self):
        self.method = self.method.upper()
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if not 0 <= self.replay_prob <= 1:
            raise ValueError("replay_prob must lie in [0, 1]")
        if not 0 < self.elite_frac <= 1:
            raise ValueError("elite_frac must lie in (0, 1]")
        if not 0 <= self.alpha <= 1:
            raise ValueError("alpha must lie in [0, 1]")
        if self.population < 1:
            raise ValueError("population must be positive")


def initial_generator(spec, cfg: CurriculumConfig) -> GeneratorDistribution:
    """DCD adapts a Gaussian-factored generator; the baselines sample ranges uniformly."""
    return uniform_distribution(spec) if cfg.method == "DCD" else dr_distribution(spec)


@dataclass
class CurriculumState:
    agents: dict
    generator: GeneratorDistribution
    buffer: LevelBuffer | None
    step: int = 0
    iteration: int = 0
    history: list = field(default_factory=list)
    generator_updates: int = 0


@dataclass
class IterationRecord:
    iteration: int
    step: int
    source: str  # "generate", "replay" or "faulted"
    params: ScenarioParams
    regret: float
    r_max: float
    mean_return: float
    route_completion: float
    collisions: float
    losses: dict
    generator_updated: bool = False
    error: str = ""


def new_state(spec, agents: dict, cfg: CurriculumConfig) -> CurriculumState:
    buffer = None if cfg.method == "DR" else LevelBuffer(cfg.capacity, cfg.beta, cfg.rho)
    return CurriculumState(agents, initial_generator(spec, cfg), buffer)


def replay_decision(cfg: CurriculumConfig, buffer: LevelBuffer | None, rng: np.random.Generator) -> str:
    if cfg.method == "DR" or buffer is None or len(buffer) == 0:
        return "generate"
    return "replay" if rng.random() < cfg.replay_prob else "generate"


def dcd_iteration(state: CurriculumState, cfg: CurriculumConfig, env, rng: np.random.Generator,
                  ppo_cfg: PpoConfig | None = None, learn: bool = True) -> tuple[CurriculumState, IterationRecord]:
    """One body of the curriculum loop; mutates and returns ``state``.

    With ``learn`` the rollout is a PPO batch of ``ppo_cfg.batch`` transitions
    per agent followed by an update; without it a single episode is played
    and the policies stay frozen.
    """
    spec = env.spec
    decision = replay_decision(cfg, state.buffer, rng)
    if decision == "replay":
        params = state.buffer.sample(state.step, rng)
    else:
        params = sample_params(spec, state.generator, rng)

    state.iteration += 1
    try:
        if learn:
            ppo_cfg = ppo_cfg or PpoConfig()
            batch, records = collect_batch(env, state.agents, lambda: params, ppo_cfg.batch, rng)
        else:
            trans, records = run_episode(env, state.agents, params, rng)
            batch = trans
        n_steps = sum(len(ts) for ts in batch.values())
        if n_steps == 0:
            raise EnvError("rollout produced no transitions")
    except (EnvError, ValueError) as exc:
        rec = IterationRecord(state.iteration, state.step, "faulted", params, math.nan, math.nan,
                              math.nan, math.nan, math.nan, {}, False, str(exc))
        return state, rec

    losses = {}
    if learn:
        for a, agent in state.agents.items():
            try:
                diag = ppo_update(agent, batch[a], ppo_cfg)
            except PpoError as exc:
                diag = dict(exc.diagnostics, error=str(exc))
            losses.update({f"{k}_{a}" if len(state.agents) > 1 else k: v for k, v in diag.items()})
    state.step += n_steps

    # regret from rollout-time value estimates, best return for this exact scenario
    values = [v for r in records for v in r.values]
    best = max((r.episodic_return for r in records), default=-math.inf)
    entry = state.buffer.get(params) if state.buffer is not None else None
    if entry is not None:
        best = max(best, entry.max_return_seen)
    if not math.isfinite(best):
        best = max(env.return_upper_bound(a) for a in state.agents)
    regret = mm_regret(values, best).value

    updated = False
    if state.buffer is not None:
        if decision == "replay":
            state.buffer.rescore(params, regret, best)
        else:
            state.buffer.insert(params, regret, state.step, best)
    if decision == "generate" and cfg.method == "DCD":
        state.history.append((params, regret))
        if len(state.history) >= cfg.population:
            state.generator = update_generator(state.generator, state.history, cfg)
            state.history.clear()
            state.generator_updates += 1
            updated = True

    s = summarize(records)
    rec = IterationRecord(state.iteration, state.step, decision, params, regret, best, s["mean_return"],
                          s["route_completion"], s["collisions"], losses, updated)
    return state, rec
