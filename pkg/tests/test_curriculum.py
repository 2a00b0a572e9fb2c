import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from matsg.curriculum import (
    CurriculumConfig,
    LevelBuffer,
    dcd_iteration,
    format_generator,
    mm_regret,
    new_state,
    parse_generator,
    read_snapshot,
    replay_decision,
    update_generator,
)
from matsg.curriculum.generator import elite_count
from matsg.posg import EnvError
from matsg.scenario import (
    EPS_FLOOR,
    CategoricalFactor,
    GaussianFactor,
    ScenarioParams,
    check_distribution,
    dr_distribution,
    sample_params,
    uniform_distribution,
)
from matsg.sim import IntersectionEnv
from matsg.sim.actions import N_ACTIONS

from helpers import RandomPolicy


def _p(i, name="x"):
    return ScenarioParams(name, (("n", i),), i)


# ---------------------------------------------------------------- regret


def test_regret_examples():
    est = mm_regret([4.0, 6.0], 10.0)
    assert est.value == 5.0 and est.horizon_terms == 2 and est.r_max_used == 10.0
    assert mm_regret([12.0, 14.0], 10.0).value == 0.0
    assert mm_regret([3.0], 3.0).value == 0.0


def test_regret_rejects_bad_input():
    with pytest.raises(ValueError):
        mm_regret([], 1.0)
    with pytest.raises(ValueError):
        mm_regret([float("nan")], 1.0)
    with pytest.raises(ValueError):
        mm_regret([1.0], float("inf"))


@given(st.lists(st.floats(-100, 100), min_size=1, max_size=40), st.floats(-100, 100))
def test_regret_bounds(values, r_max):
    v = mm_regret(values, r_max).value
    assert 0 <= v <= max(0.0, r_max - min(values)) + 1e-9


# ---------------------------------------------------------------- buffer


def test_buffer_evicts_lowest_score_and_oldest_on_ties():
    buf = LevelBuffer(capacity=2)
    assert buf.insert(_p(1), 1.0, step=0)
    assert buf.insert(_p(2), 1.0, step=5)
    assert not buf.insert(_p(3), 1.0, step=9)  # no better than the minimum
    assert buf.insert(_p(4), 2.0, step=9)
    assert _p(1) not in buf and _p(2) in buf and _p(4) in buf
    assert len(buf) == 2


def test_buffer_duplicate_keeps_max_and_rescore_overwrites():
    buf = LevelBuffer(capacity=4)
    buf.insert(_p(1), 3.0, max_return=1.0)
    buf.insert(_p(1), 2.0, max_return=5.0)
    e = buf.get(_p(1))
    assert len(buf) == 1 and e.regret_score == 3.0 and e.max_return_seen == 5.0
    buf.rescore(_p(1), 0.5, 2.0)
    assert e.regret_score == 0.5 and e.max_return_seen == 5.0


def test_buffer_rejects_bad_regret():
    buf = LevelBuffer()
    for bad in (-1.0, float("nan"), float("inf")):
        with pytest.raises(ValueError):
            buf.insert(_p(1), bad)
    with pytest.raises(ValueError):
        LevelBuffer(capacity=0)


def test_rank_weights_example():
    buf = LevelBuffer(capacity=4, beta=1.0, rho=0.0)
    buf.insert(_p(1), 1.0)
    buf.insert(_p(2), 5.0)
    assert np.allclose(buf.sampling_weights(0), [1 / 3, 2 / 3])


def test_staleness_weights_example():
    buf = LevelBuffer(capacity=4, beta=1.0, rho=1.0)
    buf.insert(_p(1), 1.0, step=0)
    buf.insert(_p(2), 5.0, step=1)
    assert np.allclose(buf.sampling_weights(2), [2 / 3, 1 / 3])


def test_sample_marks_entry_fresh():
    buf = LevelBuffer(capacity=4)
    buf.insert(_p(1), 1.0, step=0)
    assert buf.sample(7, np.random.default_rng(0)) == _p(1)
    assert buf.get(_p(1)).last_sampled_step == 7


def test_snapshot_round_trip(tmp_path, ued_spec):
    buf = LevelBuffer(capacity=8)
    rng = np.random.default_rng(0)
    for i in range(5):
        buf.insert(sample_params(ued_spec, dr_distribution(ued_spec), rng), 0.1 * i + 0.05, step=i, max_return=2.0)
    buf.write_snapshot(tmp_path / "b.csv")
    back = read_snapshot(tmp_path / "b.csv", ued_spec)
    assert [(e.params, e.regret_score, e.insert_step) for e in back] == \
        [(e.params, e.regret_score, e.insert_step) for e in buf.entries]


def test_replay_fraction():
    # 40,000 Bernoulli(0.5) draws: Hoeffding with delta = 1e-6 gives a half-width of 0.0134
    buf = LevelBuffer()
    buf.insert(_p(1), 1.0)
    cfg = CurriculumConfig(method="PLR", replay_prob=0.5)
    rng = np.random.default_rng(0)
    frac = np.mean([replay_decision(cfg, buf, rng) == "replay" for _ in range(40_000)])
    assert 0.48 <= frac <= 0.52
    assert replay_decision(cfg, LevelBuffer(), rng) == "generate"
    assert replay_decision(CurriculumConfig(method="DR"), buf, rng) == "generate"


# ---------------------------------------------------------------- generator


class _Cfg:
    population, elite_frac, alpha = 8, 0.25, 0.7


def _history(spec, n, score, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        p = sample_params(spec, uniform_distribution(spec), rng)
        out.append((p, score(p)))
    return out


def test_elite_count_rounds_up():
    assert elite_count(16, 0.25) == 4 and elite_count(10, 0.25) == 3 and elite_count(3, 0.01) == 1


def test_cem_moves_toward_high_regret(ued_spec):
    dist = uniform_distribution(ued_spec)
    hist = _history(ued_spec, 64, lambda p: (p["route"] == "left") + 0.1 * p["npc_count"])
    new = update_generator(dist, hist, type("C", (), {"population": 64, "elite_frac": 0.25, "alpha": 0.7}))
    route, npc = new.factors[0], new.factors[1]
    assert route.probs[route.values.index("left")] > 1 / 3
    assert npc.mean > dist.factors[1].mean
    assert check_distribution(new) == []


def test_cem_alpha_zero_is_identity(ued_spec):
    dist = uniform_distribution(ued_spec)
    hist = _history(ued_spec, 8, lambda p: p["npc_count"])
    cfg = type("C", (), {"population": 8, "elite_frac": 0.25, "alpha": 0.0})
    new = update_generator(dist, hist, cfg)
    for a, b in zip(dist.factors, new.factors):
        assert a == pytest.approx(b) if not isinstance(a, CategoricalFactor) else np.allclose(a.probs, b.probs)


def test_cem_needs_full_population(ued_spec):
    with pytest.raises(ValueError, match="insufficient"):
        update_generator(uniform_distribution(ued_spec), _history(ued_spec, 3, lambda p: 0.0), _Cfg)


def test_cem_leaves_uniform_factors(ued_spec):
    dist = dr_distribution(ued_spec)
    new = update_generator(dist, _history(ued_spec, 8, lambda p: p["npc_target_speed"]), _Cfg)
    assert new.factors[2] == dist.factors[2]


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6), st.floats(0, 1), st.floats(0.01, 1))
def test_cem_output_stays_valid(seed, alpha, elite_frac):
    from conftest import SCENARIOS
    from matsg.scenario import load_spec

    spec = load_spec(SCENARIOS / "ued.scen")
    rng = np.random.default_rng(seed)
    hist = [(p, float(rng.random())) for p, _ in _history(spec, 16, lambda p: 0.0, seed)]
    cfg = type("C", (), {"population": 16, "elite_frac": elite_frac, "alpha": alpha})
    new = update_generator(uniform_distribution(spec), hist, cfg)
    assert check_distribution(new) == []
    for f in new.factors:
        if isinstance(f, CategoricalFactor):
            assert min(f.probs) >= EPS_FLOOR - 1e-12 and abs(sum(f.probs) - 1) < 1e-9
        if isinstance(f, GaussianFactor):
            assert f.lo <= f.mean <= f.hi and f.std >= 0.05 * (f.hi - f.lo) - 1e-12
    for _ in range(5):
        sample_params(spec, new, rng).validate(spec)


def test_generator_text_round_trip(ued_spec):
    dist = uniform_distribution(ued_spec)
    parsed = parse_generator(format_generator(ued_spec, dist, "iteration 0"))
    assert parsed["route"] == {"kind": "categorical", "straight": 1 / 3, "left": 1 / 3, "right": 1 / 3}
    assert parsed["npc_count"]["mean"] == 3.0 and parsed["keeps_safety_distance"]["p"] == 0.5


# ---------------------------------------------------------------- curriculum loop


@pytest.fixture(scope="module")
def macro_env(ued_spec):
    return IntersectionEnv(ued_spec, action_kind="macro")


def _agents():
    return {0: RandomPolicy(N_ACTIONS["macro"])}


def _run(spec, env, cfg, n, seed=0):
    state = new_state(spec, _agents(), cfg)
    rng = np.random.default_rng(seed)
    recs = []
    for _ in range(n):
        state, rec = dcd_iteration(state, cfg, env, rng, learn=False)
        recs.append(rec)
    return state, recs


def test_config_validation():
    with pytest.raises(ValueError):
        CurriculumConfig(method="ACCEL")
    with pytest.raises(ValueError):
        CurriculumConfig(replay_prob=1.5)
    assert CurriculumConfig(method="plr").method == "PLR"


def test_initial_generators(ued_spec):
    assert new_state(ued_spec, {}, CurriculumConfig(method="DCD")).generator == uniform_distribution(ued_spec)
    for m in ("DR", "PLR"):
        assert new_state(ued_spec, {}, CurriculumConfig(method=m)).generator == dr_distribution(ued_spec)
    assert new_state(ued_spec, {}, CurriculumConfig(method="DR")).buffer is None


def test_dr_never_replays(ued_spec, macro_env):
    state, recs = _run(ued_spec, macro_env, CurriculumConfig(method="DR"), 6)
    assert all(r.source == "generate" for r in recs)
    assert state.generator == dr_distribution(ued_spec)
    assert all(r.regret >= 0 for r in recs)


def test_plr_replays_and_keeps_generator(ued_spec, macro_env):
    state, recs = _run(ued_spec, macro_env, CurriculumConfig(method="PLR", replay_prob=0.5), 12)
    assert {r.source for r in recs} == {"generate", "replay"}
    assert state.generator == dr_distribution(ued_spec)
    assert len(state.buffer) == sum(r.source == "generate" for r in recs)


def test_dcd_updates_generator_after_population(ued_spec, macro_env):
    cfg = CurriculumConfig(method="DCD", replay_prob=0.0, population=4)
    state, recs = _run(ued_spec, macro_env, cfg, 8)
    assert [r.generator_updated for r in recs] == [False, False, False, True] * 2
    assert state.generator_updates == 2 and state.history == []
    assert state.generator != uniform_distribution(ued_spec)


def test_dcd_without_smoothing_freezes_generator(ued_spec, macro_env):
    """Only generated scenarios join the population; alpha = 0 keeps every refit a no-op."""
    cfg = CurriculumConfig(method="DCD", replay_prob=0.5, population=2, alpha=0.0)
    state, recs = _run(ued_spec, macro_env, cfg, 10, seed=3)
    assert state.generator_updates == sum(r.source == "generate" for r in recs) // 2 > 0
    for a, b in zip(state.generator.factors, uniform_distribution(ued_spec).factors):
        assert a == pytest.approx(b) if not isinstance(a, CategoricalFactor) else np.allclose(a.probs, b.probs)


def test_loop_is_deterministic(ued_spec, macro_env):
    cfg = CurriculumConfig(method="DCD", population=3)
    _, a = _run(ued_spec, macro_env, cfg, 6, seed=9)
    _, b = _run(ued_spec, macro_env, cfg, 6, seed=9)
    assert [(r.source, r.params, r.regret) for r in a] == [(r.source, r.params, r.regret) for r in b]


def test_replayed_r_max_is_monotone(ued_spec, macro_env):
    cfg = CurriculumConfig(method="PLR", replay_prob=1.0, capacity=1)
    state = new_state(ued_spec, _agents(), cfg)
    rng = np.random.default_rng(0)
    p = sample_params(ued_spec, state.generator, rng)
    state.buffer.insert(p, 1.0, 0, -math.inf)
    seen = []
    for _ in range(5):
        state, rec = dcd_iteration(state, cfg, macro_env, rng, learn=False)
        assert rec.source == "replay" and rec.params == p
        seen.append(state.buffer.get(p).max_return_seen)
        assert rec.r_max == seen[-1]
    assert seen == sorted(seen)


class _BrokenEnv:
    def __init__(self, spec):
        self.spec = spec

    def reset(self, params):
        raise EnvError("map failed to load")


def test_faulted_rollout_is_recorded(ued_spec):
    cfg = CurriculumConfig(method="PLR")
    state = new_state(ued_spec, _agents(), cfg)
    state, rec = dcd_iteration(state, cfg, _BrokenEnv(ued_spec), np.random.default_rng(0), learn=False)
    assert rec.source == "faulted" and "map failed" in rec.error and math.isnan(rec.regret)
    assert state.step == 0 and len(state.buffer) == 0 and state.iteration == 1
