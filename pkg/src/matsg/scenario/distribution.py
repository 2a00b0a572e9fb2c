"""Concrete scenario parameters and factored sampling distributions over them."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .dsl import Boolean, Categorical, IntRange, RealRange, ScenarioSpec

EPS_FLOOR = 0.01
TRAIN_SEED_LIMIT = 2**63  # seeds >= this are reserved for hold-out scenarios
SEED_LIMIT = 2**64


@dataclass(frozen=True)
class ScenarioParams:
    """One concrete assignment of every parameter of a spec, plus a seed.

    Instances are hashable and compare by value, so they can key dicts.
    """

    spec_id: str
    assignment: tuple[tuple[str, object], ...]
    seed: int

    def __post_init__(self):
        if not 0 <= self.seed < SEED_LIMIT:
            raise ValueError(f"seed {self.seed} outside unsigned 64-bit range")

    def __getitem__(self, name: str):
        for k, v in self.assignment:
            if k == name:
                return v
        raise KeyError(name)

    def get(self, name: str, default=None):
        try:
            return self[name]
        except KeyError:
            return default

    def as_dict(self) -> dict:
        return dict(self.assignment)

    def key(self) -> tuple:
        return (self.assignment, self.seed)

    def to_text(self) -> str:
        parts = [f"{k}={_format_value(v)}" for k, v in self.assignment]
        parts.append(f"seed={self.seed}")
        return ";".join(parts)

    @classmethod
    def from_text(cls, text: str, spec_id: str = "unnamed", spec: ScenarioSpec | None = None) -> "ScenarioParams":
        items = []
        seed = 0
        for part in filter(None, text.strip().split(";")):
            k, _, v = part.partition("=")
            k = k.strip()
            if k == "seed":
                seed = int(v)
                continue
            value = _parse_value(v.strip())
            if spec is not None and isinstance(spec.param(k).kind, Categorical):
                value = v.strip()
            items.append((k, value))
        if spec is not None:
            spec_id = spec.name
        return cls(spec_id, tuple(items), seed)

    def validate(self, spec: ScenarioSpec) -> None:
        names = [k for k, _ in self.assignment]
        if names != list(spec.param_names):
            raise ValueError(f"assignment keys {names} do not match spec params {list(spec.param_names)}")
        for (name, value), dom in zip(self.assignment, spec.params):
            if not dom.contains(value):
                raise ValueError(f"parameter {name}={value!r} outside its domain")


def _format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse_value(text: str):
    if text == "true":
        return True
    if text == "false":
        return False
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


# ---------------------------------------------------------------- factors


@dataclass(frozen=True)
class CategoricalFactor:
    values: tuple[str, ...]
    probs: tuple[float, ...]


@dataclass(frozen=True)
class GaussianFactor:
    """Truncated Gaussian on ``[lo, hi]``; integer factors round the draw."""

    lo: float
    hi: float
    mean: float
    std: float
    integer: bool = False


@dataclass(frozen=True)
class UniformFactor:
    lo: float
    hi: float
    integer: bool = False


@dataclass(frozen=True)
class BernoulliFactor:
    p: float


Factor = Union[CategoricalFactor, GaussianFactor, UniformFactor, BernoulliFactor]


@dataclass(frozen=True)
class GeneratorDistribution:
    factors: tuple[Factor, ...]

    def factor(self, spec: ScenarioSpec, name: str) -> Factor:
        return self.factors[spec.param_names.index(name)]


def uniform_distribution(spec: ScenarioSpec) -> GeneratorDistribution:
    """Initial generator: uniform categoricals, p=0.5 Bernoullis and wide
    truncated Gaussians (mean at the midpoint, std at the half-width)."""
    factors: list[Factor] = []
    for p in spec.params:
        k = p.kind
        if isinstance(k, Categorical):
            n = len(k.values)
            factors.append(CategoricalFactor(k.values, (1.0 / n,) * n))
        elif isinstance(k, (IntRange, RealRange)):
            lo, hi = float(k.lo), float(k.hi)
            factors.append(
                GaussianFactor(lo, hi, (lo + hi) / 2, max((hi - lo) / 2, min_std(lo, hi)), isinstance(k, IntRange))
            )
        else:
            factors.append(BernoulliFactor(0.5))
    return GeneratorDistribution(tuple(factors))


def dr_distribution(spec: ScenarioSpec) -> GeneratorDistribution:
    """Domain randomization: like :func:`uniform_distribution` but ranges are
    sampled uniformly instead of from a Gaussian."""
    factors = []
    for p, f in zip(spec.params, uniform_distribution(spec).factors):
        if isinstance(f, GaussianFactor):
            f = UniformFactor(f.lo, f.hi, f.integer)
        factors.append(f)
    return GeneratorDistribution(tuple(factors))


def min_std(lo: float, hi: float) -> float:
    return max(0.05 * (hi - lo), 1e-6)


def _check_alignment(spec: ScenarioSpec, dist: GeneratorDistribution) -> None:
    if len(spec.params) != len(dist.factors):
        raise ValueError("factor/domain mismatch: different number of factors and parameters")
    for p, f in zip(spec.params, dist.factors):
        k = p.kind
        ok = (
            (isinstance(k, Categorical) and isinstance(f, CategoricalFactor) and f.values == k.values)
            or (isinstance(k, Boolean) and isinstance(f, BernoulliFactor))
            or (
                isinstance(k, (IntRange, RealRange))
                and isinstance(f, (GaussianFactor, UniformFactor))
                and f.integer == isinstance(k, IntRange)
                and (f.lo, f.hi) == (float(k.lo), float(k.hi))
            )
        )
        if not ok:
            raise ValueError(f"factor/domain mismatch for parameter {p.name!r}")


def _truncated_normal(rng: np.random.Generator, mean: float, std: float, lo: float, hi: float) -> float:
    if hi <= lo:
        return lo
    for _ in range(10_000):
        x = rng.normal(mean, std)
        if lo <= x <= hi:
            return float(x)
    return float(min(max(mean, lo), hi))


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def sample_value(factor: Factor, rng: np.random.Generator):
    if isinstance(factor, CategoricalFactor):
        return factor.values[int(rng.choice(len(factor.values), p=np.asarray(factor.probs)))]
    if isinstance(factor, BernoulliFactor):
        return bool(rng.random() < factor.p)
    if isinstance(factor, UniformFactor):
        if factor.integer:
            return int(rng.integers(int(factor.lo), int(factor.hi) + 1))
        return float(rng.uniform(factor.lo, factor.hi))
    x = _truncated_normal(rng, factor.mean, factor.std, factor.lo, factor.hi)
    if factor.integer:
        return min(max(_round_half_up(x), int(factor.lo)), int(factor.hi))
    return x


def sample_params(spec: ScenarioSpec, dist: GeneratorDistribution, rng: np.random.Generator) -> ScenarioParams:
    """Draw one :class:`ScenarioParams` from ``dist``; the seed is drawn from
    the training range so hold-out seeds can never be produced."""
    _check_alignment(spec, dist)
    assignment = tuple((p.name, sample_value(f, rng)) for p, f in zip(spec.params, dist.factors))
    seed = int(rng.integers(0, TRAIN_SEED_LIMIT, dtype=np.uint64))
    return ScenarioParams(spec.name, assignment, seed)


def project_floor(probs: Sequence[float], floor: float = EPS_FLOOR) -> tuple[float, ...]:
    """Closest-in-spirit renormalization keeping every probability >= floor.

    Entries that fall below the floor are pinned to it and the remaining mass
    is shared among the others in proportion to their current values.
    """
    p = np.asarray(probs, dtype=float)
    n = len(p)
    if n * floor > 1:
        raise ValueError("floor too large for number of categories")
    p = np.clip(p, 0.0, None)
    p = p / p.sum() if p.sum() > 0 else np.full(n, 1.0 / n)
    pinned = np.zeros(n, dtype=bool)
    for _ in range(n):
        low = (p < floor) & ~pinned
        if not low.any():
            break
        pinned |= low
        free = ~pinned
        rest = 1.0 - floor * pinned.sum()
        p = np.where(pinned, floor, p)
        s = p[free].sum()
        p[free] = p[free] * rest / s if s > 0 else rest / free.sum()
    return tuple(float(x) for x in p / p.sum())


def check_distribution(dist: GeneratorDistribution, floor: float = EPS_FLOOR) -> list[str]:
    """Return the list of violated invariants (empty when valid)."""
    problems = []
    for i, f in enumerate(dist.factors):
        if isinstance(f, CategoricalFactor):
            if abs(sum(f.probs) - 1.0) > 1e-9:
                problems.append(f"factor {i}: probabilities sum to {sum(f.probs)!r}")
            if min(f.probs) < floor - 1e-12:
                problems.append(f"factor {i}: probability below floor")
        elif isinstance(f, BernoulliFactor):
            if not floor - 1e-12 <= f.p <= 1 - floor + 1e-12:
                problems.append(f"factor {i}: p={f.p} outside [{floor}, {1 - floor}]")
        elif isinstance(f, GaussianFactor):
            if not f.std > 0 or not math.isfinite(f.mean):
                problems.append(f"factor {i}: invalid gaussian ({f.mean}, {f.std})")
    return problems
