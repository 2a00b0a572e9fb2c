"""The action-space study and the curriculum comparison."""

from __future__ import annotations

import csv
import dataclasses
import math
from pathlib import Path
from typing import Callable

import numpy as np

from ..curriculum import CurriculumConfig, dcd_iteration, format_generator, new_state
from ..learner import (
    TRAINING_LOG_COLUMNS,
    PPOAgent,
    collect_batch,
    evaluate_policy,
    ppo_update,
    save_checkpoint,
    summarize,
)
from ..scenario import dr_distribution, format_spec, load_spec, sample_params
from ..sim import IntersectionEnv
from ..sim.actions import N_ACTIONS
from .analysis import analyze_buffer_regret, analyze_params, write_param_summary, write_regret_matrices
from .config import ExperimentConfig
from .holdout import holdout_set, write_holdout
from .metrics import MetricsWriter, bin_metrics, fmt, write_binned
from .plots import plot_learning_curves, plot_param_evolution, plot_regret_heatmaps

ACTION_METRICS = ("mean_return", "route_completion", "collisions")
UED_METRICS = ("train_return", "train_completion", "holdout_return", "holdout_completion", "buffer_regret")
MAX_CONSECUTIVE_FAULTS = 100
ITERATION_COLUMNS = ("iteration", "step", "source", "params", "regret", "r_max", "mean_return",
                     "route_completion", "collisions", "generator_updated", "error")


def agent_seed(seed: int, agent: int) -> int:
    return seed * 1000 + agent


def _checkpoint_meta(spec, action_kind: str, **extra) -> dict:
    return dict(extra, action_kind=action_kind, spec=format_spec(spec))


def _csv_writer(path):
    fh = open(path, "w", newline="", encoding="utf-8")
    return fh, csv.writer(fh, lineterminator="\n")


def run_actions_experiment(cfg: ExperimentConfig, log: Callable[[str], None] | None = None) -> dict:
    """Independent PPO for every action space and seed.

    Writes ``metrics.csv`` (one row per update and metric), ``binned.csv``,
    a training log per run, final checkpoints and ``learning_curves.png``.
    """
    if cfg.experiment != "actions":
        raise ValueError("run_actions_experiment needs experiment = actions")
    spec = load_spec(cfg.scenario_file)
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    dist = dr_distribution(spec)
    with MetricsWriter(out / "metrics.csv") as mw:
        for si, space in enumerate(cfg.action_spaces):
            for seed in cfg.seeds:
                env = IntersectionEnv(spec, action_kind=space)
                n = spec.ego_role.count
                agents = {a: PPOAgent(N_ACTIONS[space], cfg.ppo, seed=agent_seed(seed, a)) for a in range(n)}
                rng = np.random.default_rng([seed, si])
                fh, tw = _csv_writer(out / f"training_log_{space}_seed{seed}.csv")
                tw.writerow(TRAINING_LOG_COLUMNS)
                for u in range(1, cfg.updates + 1):
                    batch, records = collect_batch(env, agents, lambda: sample_params(spec, dist, rng), cfg.ppo.batch, rng)
                    for a, agent in agents.items():
                        diag = ppo_update(agent, batch[a], cfg.ppo)
                        s = summarize([r for r in records if r.agent == a])
                        tw.writerow([u, a] + [fmt(s[k]) for k in ACTION_METRICS]
                                    + [fmt(diag[k]) for k in TRAINING_LOG_COLUMNS[5:]])
                    s = summarize(records)
                    for k in ACTION_METRICS:
                        mw.write(space, seed, u, k, s[k])
                    if log:
                        log(f"{space} seed={seed} update={u} return={s['mean_return']:.2f} "
                            f"completion={s['route_completion']:.3f} collisions={s['collisions']:.3f}")
                fh.close()
                for a, agent in agents.items():
                    save_checkpoint(out / f"checkpoint_{space}_seed{seed}_agent{a}.mgpp", agent.net,
                                    _checkpoint_meta(spec, space, seed=seed, agent=a))
        rows = [dict(zip(("run", "seed", "step", "metric", "value"), r)) for r in mw.rows]
    binned = bin_metrics(rows, cfg.bin_size)
    write_binned(out / "binned.csv", binned)
    plot_learning_curves(binned, ACTION_METRICS, out / "learning_curves.png", "action spaces")
    return {"metrics": out / "metrics.csv", "binned": out / "binned.csv"}


def _write_params(path, params_list) -> None:
    Path(path).write_text("".join(p.to_text() + "\n" for p in params_list), encoding="utf-8")


def run_ued_experiment(cfg: ExperimentConfig, log: Callable[[str], None] | None = None) -> dict:
    """DR, PLR and DCD runs with periodic hold-out evaluation and snapshots.

    Per run directory ``<method>_seed<seed>/``: ``iterations.csv``,
    ``generator.txt`` (one block per generator update), and at each of
    ``cfg.checkpoints`` evenly spaced steps a buffer snapshot, a generator
    snapshot and the scenarios trained on since the previous checkpoint,
    summarised in ``params_summary.csv``.
    """
    if cfg.experiment != "ued":
        raise ValueError("run_ued_experiment needs experiment = ued")
    spec = load_spec(cfg.scenario_file)
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    holdout = holdout_set(spec)
    holdout_keys = {p.key() for p in holdout}
    write_holdout(out / "holdout.txt", holdout)
    space = cfg.action_spaces[0]
    learn = not cfg.frozen_policy
    with MetricsWriter(out / "metrics.csv") as mw:
        for mi, method in enumerate(cfg.methods):
            ccfg = dataclasses.replace(cfg.curriculum, method=method)
            for seed in cfg.seeds:
                run_dir = out / f"{ccfg.method}_seed{seed}"
                run_dir.mkdir(exist_ok=True)
                env = IntersectionEnv(spec, action_kind=space)
                agents = {a: PPOAgent(N_ACTIONS[space], cfg.ppo, seed=agent_seed(seed, a))
                          for a in range(spec.ego_role.count)}
                state = new_state(spec, agents, ccfg)
                rng = np.random.default_rng([seed, mi])
                _run_curriculum(cfg, ccfg, spec, env, state, rng, holdout, holdout_keys, run_dir, mw, learn, log, seed)
                for a, agent in agents.items():
                    save_checkpoint(run_dir / f"checkpoint_agent{a}.mgpp", agent.net,
                                    _checkpoint_meta(spec, space, seed=seed, agent=a, method=ccfg.method))
        rows = [dict(zip(("run", "seed", "step", "metric", "value"), r)) for r in mw.rows]
    binned = bin_metrics(rows, cfg.bin_size)
    write_binned(out / "binned.csv", binned)
    plot_learning_curves(binned, [m for m in UED_METRICS if any(r["metric"] == m for r in rows)],
                         out / "learning_curves.png", "curricula")
    return {"metrics": out / "metrics.csv", "binned": out / "binned.csv"}


def _evaluate(env, agents, holdout, cfg, mw, run, seed, step):
    stats = evaluate_policy(env, agents, holdout, cfg.eval_episodes, seed)
    mw.write(run, seed, step, "holdout_return", float(np.mean([s.episodic_return for s in stats])))
    mw.write(run, seed, step, "holdout_completion", float(np.mean([s.route_completion for s in stats])))


def _run_curriculum(cfg, ccfg: CurriculumConfig, spec, env, state, rng, holdout, holdout_keys, run_dir, mw, learn,
                    log, seed):
    run = ccfg.method
    budget = cfg.env_steps
    thresholds = [math.ceil(budget * j / cfg.checkpoints) for j in range(1, cfg.checkpoints + 1)] if budget > 0 else []
    _evaluate(env, state.agents, holdout, cfg, mw, run, seed, 0)
    fh, iw = _csv_writer(run_dir / "iterations.csv")
    iw.writerow(ITERATION_COLUMNS)
    gen_fh = open(run_dir / "generator.txt", "w", encoding="utf-8")
    gen_fh.write(format_generator(spec, state.generator, "update 0 step 0"))
    window, snapshots, buffers = [], [], []
    faults = 0
    try:
        while state.step < budget:
            state, rec = dcd_iteration(state, ccfg, env, rng, cfg.ppo, learn=learn)
            iw.writerow([rec.iteration, rec.step, rec.source, rec.params.to_text(), fmt(rec.regret), fmt(rec.r_max),
                         fmt(rec.mean_return), fmt(rec.route_completion), fmt(rec.collisions),
                         int(rec.generator_updated), rec.error])
            if rec.source == "faulted":
                faults += 1
                if faults >= MAX_CONSECUTIVE_FAULTS:
                    raise RuntimeError(f"{MAX_CONSECUTIVE_FAULTS} consecutive faulted rollouts; last: {rec.error}")
                continue
            faults = 0
            window.append(rec.params)
            mw.write(run, seed, rec.step, "train_return", rec.mean_return)
            mw.write(run, seed, rec.step, "train_completion", rec.route_completion)
            if state.buffer is not None:
                mw.write(run, seed, rec.step, "buffer_regret", state.buffer.mean_regret())
                leaked = [e.params for e in state.buffer.entries if e.params.key() in holdout_keys]
                if leaked:
                    raise RuntimeError(f"hold-out scenario entered the training buffer: {leaked[0].to_text()}")
            if rec.generator_updated:
                gen_fh.write(format_generator(spec, state.generator,
                                              f"update {state.generator_updates} step {state.step}"))
            if state.iteration % cfg.eval_every == 0:
                _evaluate(env, state.agents, holdout, cfg, mw, run, seed, state.step)
            while thresholds and state.step >= thresholds[0]:
                k = len(snapshots) + 1
                thresholds.pop(0)
                _write_params(run_dir / f"params_ckpt{k}.txt", window)
                (run_dir / f"generator_ckpt{k}.txt").write_text(
                    format_generator(spec, state.generator, f"checkpoint {k} step {state.step}"), encoding="utf-8")
                snapshots.append((k, list(window)))
                window = []
                if state.buffer is not None:
                    state.buffer.write_snapshot(run_dir / f"buffer_ckpt{k}.csv")
                    buffers.append((k, [(e.params, e.regret_score) for e in state.buffer.entries]))
            if log and state.iteration % 10 == 0:
                log(f"{run} seed={seed} iter={state.iteration} step={state.step} regret={rec.regret:.3f} "
                    f"return={rec.mean_return:.2f}")
    finally:
        fh.close()
        gen_fh.close()
    if snapshots:
        rows = analyze_params(snapshots)
        write_param_summary(run_dir / "params_summary.csv", rows)
        plot_param_evolution(rows, run_dir / "params_evolution.png")
    if buffers:
        mats = analyze_buffer_regret(buffers)
        write_regret_matrices(run_dir / "buffer_regret.csv", mats)
        plot_regret_heatmaps(mats, run_dir / "buffer_regret.png")
