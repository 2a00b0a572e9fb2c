import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from matsg.posg import GAMMA, Event, Transition, discounted_return, return_bound, rollout
from matsg.scenario import ScenarioParams, dr_distribution, sample_params
from matsg.sim import IntersectionEnv
from matsg.sim.actions import N_ACTIONS, PERSISTENCE
from matsg.sim.kinematics import DT, V_MAX


def random_policy(n):
    return lambda obs, rng: (int(rng.integers(n)), -float(np.log(n)), 0.0)


def _straight(spec, seed):
    return ScenarioParams(spec.name, (("route", "straight"), ("npc_count", 0)), seed)


def test_discounted_return_examples():
    assert discounted_return([1.0, 1.0, 1.0], 0.5) == 1.75
    assert discounted_return([], 0.9) == 0.0
    assert return_bound(2.0, 10, 1.0) == 20.0
    assert return_bound(1.0, 3, 0.5) == pytest.approx(1.75)


@given(st.lists(st.floats(-5, 5), max_size=50), st.floats(0.0, 0.999))
def test_return_bound_holds(rewards, gamma):
    assert abs(discounted_return(rewards, gamma)) <= return_bound(5.0, len(rewards), gamma) + 1e-9


def test_max_steps_one_gives_one_transition(actions_spec):
    env = IntersectionEnv(actions_spec, action_kind="macro")
    p = sample_params(actions_spec, dr_distribution(actions_spec), np.random.default_rng(0))
    out = rollout(env, {a: random_policy(5) for a in range(4)}, p, 1)
    assert sorted(out) == [0, 1, 2, 3]
    assert all(len(ts) == 1 and isinstance(ts[0], Transition) for ts in out.values())
    with pytest.raises(ValueError):
        rollout(env, {}, p, 0)


def test_argmax_policy_is_deterministic(actions_spec):
    p = sample_params(actions_spec, dr_distribution(actions_spec), np.random.default_rng(1))
    policy = {a: (lambda obs, rng: (int(np.argmax(obs.grid[2].sum(axis=0))) % 81, 0.0, 0.0)) for a in range(4)}
    runs = []
    for _ in range(2):
        env = IntersectionEnv(actions_spec, action_kind="continuous")
        out = rollout(env, policy, p, 50)
        runs.append(([t.action for a in out for t in out[a]], [t.reward for a in out for t in out[a]],
                     env.world.serialize()))
    assert runs[0] == runs[1]


def test_agent_count_is_fixed_and_rewards_bounded(actions_spec):
    env = IntersectionEnv(actions_spec, action_kind="continuous")
    p = sample_params(actions_spec, dr_distribution(actions_spec), np.random.default_rng(2))
    out = rollout(env, {a: random_policy(81) for a in range(4)}, p, 1000, np.random.default_rng(2))
    assert sorted(out) == [0, 1, 2, 3]
    step_max = V_MAX * PERSISTENCE["continuous"] * DT + 1
    for ts in out.values():
        rewards = [t.reward for t in ts]
        assert all(abs(r) <= step_max for r in rewards)
        assert abs(discounted_return(rewards, GAMMA)) <= return_bound(step_max, len(rewards), GAMMA)
        # an agent stops contributing once it is done
        assert all(not (t.done or t.truncated) for t in ts[:-1])


def test_random_policy_makes_progress(straight_spec):
    """Monte Carlo oracle: random throttle with symmetric steering drifts forward."""
    env = IntersectionEnv(straight_spec, action_kind="continuous")
    comps = []
    for i in range(100):
        rollout(env, {0: random_policy(N_ACTIONS["continuous"])}, _straight(straight_spec, i), 1000,
                np.random.default_rng(i))
        comps.append(env.route_completion(0))
    assert np.mean(comps) > 0


def test_event_sim_time_matches_tick(straight_spec):
    env = IntersectionEnv(straight_spec, horizon=30)
    env.reset(_straight(straight_spec, 0))
    events = []
    while env.active_agents():
        events += env.step({0: env.decode_action(0, 1)}).events
    assert events == [Event("timeout", 0, pytest.approx(30 * DT))]
