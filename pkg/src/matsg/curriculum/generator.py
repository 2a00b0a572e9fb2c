"""Cross-entropy-method updates of the factored scenario generator."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from ..scenario import (
    EPS_FLOOR,
    BernoulliFactor,
    CategoricalFactor,
    GaussianFactor,
    GeneratorDistribution,
    ScenarioParams,
    ScenarioSpec,
    UniformFactor,
    min_std,
    project_floor,
)


def elite_count(n: int, elite_frac: float) -> int:
    return max(1, math.ceil(elite_frac * n - 1e-9))


def update_generator(dist: GeneratorDistribution, history: Sequence[tuple[ScenarioParams, float]], cfg,
                     floor: float = EPS_FLOOR) -> GeneratorDistribution:
    """One CEM step: refit every factor to the top-regret scenarios and smooth.

    ``cfg`` supplies ``population``, ``elite_frac`` and ``alpha``.  Factor
    ``i`` is fitted to the ``i``-th entry of each scenario's assignment.
    Uniform factors carry no fitted statistics and are left unchanged.
    """
    if len(history) < cfg.population:
        raise ValueError(f"insufficient history: {len(history)} scenarios, need {cfg.population}")
    alpha = cfg.alpha
    order = sorted(range(len(history)), key=lambda i: -history[i][1])  # stable: earlier wins ties
    elites = [history[i][0] for i in order[:elite_count(len(history), cfg.elite_frac)]]
    new = []
    for i, f in enumerate(dist.factors):
        xs = [e.assignment[i][1] for e in elites]
        if isinstance(f, CategoricalFactor):
            fit = np.array([sum(x == v for x in xs) for v in f.values], dtype=float) / len(xs)
            probs = alpha * fit + (1 - alpha) * np.asarray(f.probs)
            new.append(CategoricalFactor(f.values, project_floor(probs, floor)))
        elif isinstance(f, BernoulliFactor):
            rate = float(np.mean([bool(x) for x in xs]))
            p = alpha * rate + (1 - alpha) * f.p
            new.append(BernoulliFactor(min(max(p, floor), 1 - floor)))
        elif isinstance(f, GaussianFactor):
            arr = np.asarray(xs, dtype=float)
            floor_std = min_std(f.lo, f.hi)
            mean = alpha * float(arr.mean()) + (1 - alpha) * f.mean
            std = alpha * max(float(arr.std()), floor_std) + (1 - alpha) * f.std
            new.append(GaussianFactor(f.lo, f.hi, min(max(mean, f.lo), f.hi), max(std, floor_std), f.integer))
        else:
            new.append(f)
    return GeneratorDistribution(tuple(new))


def format_generator(spec: ScenarioSpec, dist: GeneratorDistribution, header: str = "") -> str:
    """Line-per-factor text block, e.g. ``route categorical left=0.25 right=0.25 straight=0.5``."""
    lines = [f"# {header}"] if header else []
    for p, f in zip(spec.params, dist.factors):
        if isinstance(f, CategoricalFactor):
            body = " ".join(f"{v}={pr!r}" for v, pr in zip(f.values, f.probs))
            lines.append(f"{p.name} categorical {body}")
        elif isinstance(f, BernoulliFactor):
            lines.append(f"{p.name} bernoulli p={f.p!r}")
        elif isinstance(f, GaussianFactor):
            lines.append(f"{p.name} gaussian mean={f.mean!r} std={f.std!r} lo={f.lo!r} hi={f.hi!r} integer={int(f.integer)}")
        elif isinstance(f, UniformFactor):
            lines.append(f"{p.name} uniform lo={f.lo!r} hi={f.hi!r} integer={int(f.integer)}")
    return "\n".join(lines) + "\n"


def parse_generator(text: str) -> dict[str, dict]:
    """Inverse of :func:`format_generator` into ``{name: {"kind": ..., key: value}}``."""
    out = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        name, kind, *fields = line.split()
        entry = {"kind": kind}
        for fld in fields:
            k, v = fld.split("=", 1)
            entry[k] = float(v)
        out[name] = entry
    return out
