"""Experiment configuration files.

A config is an INI-style file with the sections ``[experiment]``,
``[scenario]``, ``[curriculum]`` and ``[ppo]``; every key is optional except
``experiment`` and the scenario ``file``, and unknown keys are errors.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields
from pathlib import Path

from ..curriculum import CurriculumConfig
from ..learner import PpoConfig
from ..sim.actions import PERSISTENCE

EXPERIMENTS = ("actions", "ued")
ACTION_SPACES = ("continuous", "waypoint", "macro")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    experiment: str
    scenario_file: Path
    seeds: list[int] = field(default_factory=lambda: [1, 2, 3])
    action_spaces: list[str] = field(default_factory=lambda: list(ACTION_SPACES))
    methods: list[str] = field(default_factory=lambda: ["DR", "PLR", "DCD"])
    env_steps: int = 150_000
    updates: int = 175
    bin_size: int = 5
    eval_every: int = 10
    eval_episodes: int = 3
    checkpoints: int = 4
    frozen_policy: bool = False
    output: Path = Path("runs")
    curriculum: CurriculumConfig = field(default_factory=CurriculumConfig)
    ppo: PpoConfig = field(default_factory=PpoConfig)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {self.experiment!r}")
        if not self.seeds:
            raise ConfigError("seeds must not be empty")
        for name in ("updates", "bin_size", "eval_every", "eval_episodes", "checkpoints"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.env_steps < 0:
            raise ConfigError("env_steps must be non-negative")
        bad = [a for a in self.action_spaces if a not in PERSISTENCE]
        if bad or not self.action_spaces:
            raise ConfigError(f"unknown action spaces {bad}; choose from {ACTION_SPACES}")


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.replace(" ", "").split(",") if x]


def _words(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


_EXPERIMENT_KEYS = {
    "experiment": str, "seeds": _ints, "action_spaces": _words, "methods": _words, "env_steps": int,
    "updates": int, "bin_size": int, "eval_every": int, "eval_episodes": int, "checkpoints": int,
    "frozen_policy": _bool, "output": Path,
}
_SCENARIO_KEYS = {"file": Path, "action_space": str}


def _typed_section(parser, section: str, cls) -> dict:
    if not parser.has_section(section):
        return {}
    types = {f.name: f.type for f in fields(cls)}
    out = {}
    for key, raw in parser.items(section):
        if key not in types:
            raise ConfigError(f"[{section}] unknown key {key!r}")
        conv = {"int": int, "float": float, "str": str}.get(str(types[key]), str)
        try:
            out[key] = conv(raw)
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key}: {exc}") from exc
    return out


def parse_config(text: str, base_dir: Path | str = ".") -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    extra = [s for s in parser.sections() if s not in ("experiment", "scenario", "curriculum", "ppo")]
    if extra:
        raise ConfigError(f"unknown sections {extra}")
    kw = {}
    for section, keys in (("experiment", _EXPERIMENT_KEYS), ("scenario", _SCENARIO_KEYS)):
        if not parser.has_section(section):
            continue
        for key, raw in parser.items(section):
            if key not in keys:
                raise ConfigError(f"[{section}] unknown key {key!r}")
            try:
                kw[(section, key)] = keys[key](raw)
            except ValueError as exc:
                raise ConfigError(f"[{section}] {key}: {exc}") from exc
    if ("experiment", "experiment") not in kw:
        raise ConfigError("[experiment] experiment is required")
    if ("scenario", "file") not in kw:
        raise ConfigError("[scenario] file is required")
    args = {key: v for (sec, key), v in kw.items() if sec == "experiment"}
    args["scenario_file"] = (Path(base_dir) / kw[("scenario", "file")]).resolve()
    if ("scenario", "action_space") in kw:
        if "action_spaces" in args:
            raise ConfigError("give action_space in [scenario] or action_spaces in [experiment], not both")
        args["action_spaces"] = [kw[("scenario", "action_space")]]
    if "output" in args and not args["output"].is_absolute():
        args["output"] = Path(base_dir) / args["output"]
    try:
        args["curriculum"] = CurriculumConfig(**_typed_section(parser, "curriculum", CurriculumConfig))
        args["ppo"] = PpoConfig(**_typed_section(parser, "ppo", PpoConfig))
        return ExperimentConfig(**args)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    return parse_config(path.read_text(encoding="utf-8"), path.parent)
