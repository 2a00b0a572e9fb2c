"""Command-line entry point ``matsg``."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np

from ..curriculum import read_snapshot
from ..learner import evaluate_policy, load_checkpoint
from ..learner.ppo import PPOAgent
from ..scenario import SpecError, load_spec, parse_spec
from ..sim import IntersectionEnv
from .analysis import (
    analyze_buffer_regret,
    analyze_params,
    write_param_summary,
    write_regret_matrices,
)
from .config import ConfigError, load_config
from .experiments import run_actions_experiment, run_ued_experiment
from .holdout import read_holdout
from .metrics import fmt
from .plots import plot_param_evolution, plot_regret_heatmaps

log = logging.getLogger("matsg")


def _seeds(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"seeds must be comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="matsg", description="Scenario curricula for multi-agent driving.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment from a config file")
    run.add_argument("--config", required=True, type=Path)
    run.add_argument("--seeds", type=_seeds, help="override seeds, e.g. 1,2,3")
    run.add_argument("--out", type=Path, help="output directory")
    run.add_argument("--env-steps", type=int, help="environment-step budget (ued)")
    run.add_argument("--updates", type=int, help="policy-update budget (actions)")

    an = sub.add_parser("analyze", help="summarise snapshots of a ued run")
    an.add_argument("what", choices=("params", "regret"))
    an.add_argument("--in", dest="indir", required=True, type=Path, help="run directory or experiment directory")

    ev = sub.add_parser("eval", help="greedy evaluation of a checkpoint on hold-out scenarios")
    ev.add_argument("--checkpoint", required=True, type=Path)
    ev.add_argument("--holdout", required=True, type=Path)
    ev.add_argument("--spec", type=Path, help="scenario file (defaults to the one stored in the checkpoint)")
    ev.add_argument("--episodes", type=int, default=1)
    ev.add_argument("--seed", type=int, default=0)
    return p


def _run_dirs(path: Path) -> list[Path]:
    if any(path.glob("params_ckpt*.txt")) or any(path.glob("buffer_ckpt*.csv")):
        return [path]
    return sorted(d for d in path.iterdir() if d.is_dir())


def _ckpt_index(p: Path) -> int:
    return int(p.stem.rsplit("ckpt", 1)[1])


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    changes = {}
    if args.seeds:
        changes["seeds"] = args.seeds
    if args.out:
        changes["output"] = args.out
    if args.env_steps is not None:
        changes["env_steps"] = args.env_steps
    if args.updates is not None:
        changes["updates"] = args.updates
    cfg = dataclasses.replace(cfg, **changes)
    runner = run_actions_experiment if cfg.experiment == "actions" else run_ued_experiment
    paths = runner(cfg, log=log.info)
    print(f"metrics written to {paths['metrics']}")
    return 0


def cmd_analyze(args) -> int:
    dirs = _run_dirs(args.indir)
    if not dirs:
        print(f"no run directories under {args.indir}", file=sys.stderr)
        return 1
    for d in dirs:
        if args.what == "params":
            files = sorted(d.glob("params_ckpt*.txt"), key=_ckpt_index)
            snaps = []
            for f in files:
                lines = [ln for ln in f.read_text(encoding="utf-8").splitlines() if ln.strip()]
                snaps.append((_ckpt_index(f), [dict(_parse_assignment(ln)) for ln in lines]))
            if not snaps:
                continue
            rows = analyze_params(snaps)
            write_param_summary(d / "params_summary.csv", rows)
            plot_param_evolution(rows, d / "params_evolution.png")
            print(f"== {d.name}")
            for r in rows:
                print("  " + " ".join(f"{k}={fmt(v) if isinstance(v, float) else v}" for k, v in r.items()))
        else:
            files = sorted(d.glob("buffer_ckpt*.csv"), key=_ckpt_index)
            if not files:
                continue
            mats = analyze_buffer_regret([(_ckpt_index(f), read_snapshot(f)) for f in files])
            write_regret_matrices(d / "buffer_regret.csv", mats)
            plot_regret_heatmaps(mats, d / "buffer_regret.png")
            print(f"== {d.name}: " + " ".join(f"ckpt{m.label}:H={m.entropy:.3f}" for m in mats))
    return 0


def _parse_assignment(line: str):
    from ..scenario.distribution import _parse_value

    for part in line.split(";"):
        k, _, v = part.partition("=")
        if k and k != "seed":
            yield k, _parse_value(v)


def cmd_eval(args) -> int:
    net, meta = load_checkpoint(args.checkpoint)
    spec = load_spec(args.spec) if args.spec else parse_spec(meta["spec"], str(args.checkpoint))
    env = IntersectionEnv(spec, action_kind=meta.get("action_kind", "macro"))
    agent = PPOAgent(net.n_actions, net=net)
    holdout = read_holdout(args.holdout, spec)
    stats = evaluate_policy(env, agent, holdout, args.episodes, args.seed)
    print("scenario,episodic_return,route_completion,collisions")
    for p, s in zip(holdout, stats):
        print(f"{p.to_text()},{fmt(s.episodic_return)},{fmt(s.route_completion)},{fmt(s.collisions)}")
    if stats:
        print(f"mean,{fmt(np.mean([s.episodic_return for s in stats]))},"
              f"{fmt(np.mean([s.route_completion for s in stats]))},{fmt(np.mean([s.collisions for s in stats]))}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return {"run": cmd_run, "analyze": cmd_analyze, "eval": cmd_eval}[args.command](args)
    except SpecError as exc:
        for d in exc.diagnostics:
            print(d.format(exc.filename), file=sys.stderr)
        return 2
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"matsg: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
