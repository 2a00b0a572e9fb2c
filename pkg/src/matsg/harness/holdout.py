"""The fixed evaluation scenarios."""

from __future__ import annotations

from pathlib import Path

from ..scenario import TRAIN_SEED_LIMIT, ScenarioParams, ScenarioSpec

HOLDOUT_ROUTES = ("straight", "left", "right")
HOLDOUT_NPC_COUNTS = (0, 2, 4, 6)
SAFE_DEFAULTS = {"npc_target_speed": 8.0, "keeps_safety_distance": True, "respects_traffic_lights": True}


def holdout_set(spec: ScenarioSpec) -> list[ScenarioParams]:
    """Twelve scenarios: every route with 0, 2, 4 and 6 well-behaved NPCs.

    Seeds start at 2**63, a range the training samplers never draw from.
    Parameters other than the five standard ones take their domain's first
    value (or lower bound).
    """
    out = []
    for i, (route, n) in enumerate((r, n) for r in HOLDOUT_ROUTES for n in HOLDOUT_NPC_COUNTS):
        values = dict(SAFE_DEFAULTS, route=route, npc_count=n)
        assignment = []
        for p in spec.params:
            if p.name in values:
                v = values[p.name]
            else:
                k = p.kind
                v = k.values[0] if hasattr(k, "values") else getattr(k, "lo", False)
            assignment.append((p.name, v))
        params = ScenarioParams(spec.name, tuple(assignment), TRAIN_SEED_LIMIT + i)
        params.validate(spec)
        out.append(params)
    return out


def write_holdout(path, params_list) -> None:
    Path(path).write_text("".join(p.to_text() + "\n" for p in params_list), encoding="utf-8")


def read_holdout(path, spec: ScenarioSpec) -> list[ScenarioParams]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [ScenarioParams.from_text(line, spec.name, spec) for line in lines if line.strip() and not line.startswith("#")]
