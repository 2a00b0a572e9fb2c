import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from matsg.learner import (
    PARAM_ORDER,
    CheckpointError,
    PPOAgent,
    PolicyNetwork,
    PpoConfig,
    PpoError,
    collect_batch,
    compute_gae,
    evaluate_policy,
    load_checkpoint,
    normalize,
    policy_forward,
    ppo_loss,
    ppo_update,
    run_episode,
    save_checkpoint,
)
from matsg.learner.network import log_softmax
from matsg.scenario import ScenarioParams
from matsg.sim import IntersectionEnv
from matsg.sim.actions import N_ACTIONS, MacroCommand

from helpers import ConstantPolicy


def _straight(spec, seed):
    return ScenarioParams(spec.name, (("route", "straight"), ("npc_count", 0)), seed)


def _small_net(seed=0):
    return PolicyNetwork(6, 5, hidden=4, seed=seed, dtype=np.float64)


# ---------------------------------------------------------------- network


def test_zero_weights_give_uniform_policy():
    net = _small_net()
    for k in PARAM_ORDER:
        net.params[k][...] = 0
    probs, value = policy_forward(net, np.ones(6))
    assert np.allclose(probs, 0.2) and value == 0.0


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=6, max_size=6), st.integers(0, 1000))
def test_probabilities_sum_to_one(x, seed):
    probs, value = policy_forward(_small_net(seed), np.array(x))
    assert abs(probs.sum() - 1) < 1e-12 and probs.min() >= 0 and math.isfinite(value)


def test_logit_shift_invariance():
    net = _small_net(3)
    x = np.linspace(-1, 1, 6)
    before, _ = policy_forward(net, x)
    net.params["bpi"] += 123.0
    after, _ = policy_forward(net, x)
    assert np.allclose(before, after, atol=1e-12)


def test_shape_mismatch_raises():
    with pytest.raises(ValueError, match="shape"):
        policy_forward(_small_net(), np.ones(7))


# ---------------------------------------------------------------- advantages


def test_gae_one_step_when_lambda_zero():
    r, v, d = [1.0, 2.0, 3.0], [0.5, 0.1, 0.2, 0.7], [0, 0, 1]
    adv, ret = compute_gae(r, v, d, 0.9, 0.0)
    expected = [1.0 + 0.9 * 0.1 - 0.5, 2.0 + 0.9 * 0.2 - 0.1, 3.0 - 0.2]
    assert np.allclose(adv, expected)
    assert np.allclose(ret, np.array(expected) + v[:-1])


def test_gae_telescopes_to_monte_carlo_return():
    r = [1.0, -2.0, 0.5, 4.0]
    v = [3.0, 1.0, -1.0, 2.0, 9.0]
    _, ret = compute_gae(r, v, [0, 0, 0, 1], 1.0, 1.0)
    assert np.allclose(ret, np.cumsum(r[::-1])[::-1])


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 12), st.floats(0, 1), st.floats(0, 1), st.integers(0, 10**6))
def test_gae_matches_double_loop(T, gamma, lam, seed):
    rng = np.random.default_rng(seed)
    r, v = rng.normal(size=T), rng.normal(size=T + 1)
    d = np.zeros(T)
    d[-1] = rng.integers(2)
    adv, _ = compute_gae(r, v, d, gamma, lam)
    delta = [r[t] + gamma * v[t + 1] * (1 - d[t]) - v[t] for t in range(T)]
    oracle = [sum((gamma * lam) ** (k - t) * delta[k] for k in range(t, T)) for t in range(T)]
    assert np.allclose(adv, oracle, atol=1e-9)


def test_gae_length_mismatch():
    with pytest.raises(ValueError, match="length"):
        compute_gae([1.0, 2.0], [0.0, 0.0], [0, 1], 0.9, 0.9)


def test_normalize_moments():
    a = normalize(np.random.default_rng(0).normal(5, 3, size=1000))
    assert abs(a.mean()) < 1e-9 and abs(a.std() - 1) < 1e-6
    assert np.array_equal(normalize(np.full(4, 2.0)), np.zeros(4))


# ---------------------------------------------------------------- loss gradients


def _batch(seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(2, 6))
    actions = np.array([1, 4])
    adv = np.array([0.7, -1.3])
    returns = np.array([0.4, -0.2])
    return X, actions, adv, returns


def _fd_grad(f, params, eps=1e-6):
    out = {}
    for k in PARAM_ORDER:
        g = np.zeros_like(params[k])
        for i in np.ndindex(params[k].shape):
            old = params[k][i]
            params[k][i] = old + eps
            hi = f()
            params[k][i] = old - eps
            lo = f()
            params[k][i] = old
            g[i] = (hi - lo) / (2 * eps)
        out[k] = g
    return out


@pytest.mark.parametrize("ratio_shift", [0.0, 0.1, -0.5])
def test_loss_gradient_matches_finite_differences(ratio_shift):
    net = _small_net(1)
    X, actions, adv, returns = _batch()
    logits, _, _ = net.forward(X)
    old_logp = log_softmax(logits)[np.arange(2), actions] + ratio_shift
    cfg = PpoConfig(ent_coef=0.05, vf_coef=0.5)
    _, _, grads = ppo_loss(net, X, actions, old_logp, adv, returns, cfg)
    fd = _fd_grad(lambda: ppo_loss(net, X, actions, old_logp, adv, returns, cfg, False)[0], net.params)
    for k in PARAM_ORDER:
        assert np.allclose(grads[k], fd[k], atol=1e-7), k


def test_unit_ratio_gives_vanilla_policy_gradient():
    net = _small_net(2)
    X, actions, adv, returns = _batch(1)
    logits, _, _ = net.forward(X)
    old_logp = log_softmax(logits)[np.arange(2), actions]
    cfg = PpoConfig(ent_coef=0.0, vf_coef=0.0)
    _, _, grads = ppo_loss(net, X, actions, old_logp, adv, returns, cfg)

    def pg_objective():
        lp = log_softmax(net.forward(X)[0])[np.arange(2), actions]
        return -(adv * lp).mean()

    fd = _fd_grad(pg_objective, net.params)
    for k in PARAM_ORDER:
        assert np.allclose(grads[k], fd[k], atol=1e-8), k


# ---------------------------------------------------------------- updates


@pytest.fixture(scope="module")
def short_batch(straight_spec):
    env = IntersectionEnv(straight_spec, action_kind="macro")
    agent = PPOAgent(N_ACTIONS["macro"], PpoConfig(batch=64, minibatch=32, epochs=2), seed=0)
    rng = np.random.default_rng(0)
    buf, _ = collect_batch(env, {0: agent}, lambda: _straight(straight_spec, int(rng.integers(1000))), 64, rng)
    return buf[0]


def test_zero_learning_rate_leaves_weights(short_batch):
    agent = PPOAgent(N_ACTIONS["macro"], PpoConfig(lr=0.0, batch=64, minibatch=32, epochs=2), seed=0)
    before = {k: v.copy() for k, v in agent.net.params.items()}
    ppo_update(agent, short_batch)
    assert all(np.array_equal(before[k], agent.net.params[k]) for k in PARAM_ORDER)


def test_agents_update_independently(short_batch):
    a = PPOAgent(N_ACTIONS["macro"], PpoConfig(batch=64, minibatch=32, epochs=2), seed=0)
    b = PPOAgent(N_ACTIONS["macro"], PpoConfig(batch=64, minibatch=32, epochs=2), seed=1)
    b_before = {k: v.copy() for k, v in b.net.params.items()}
    a_before = a.net.params["Wpi"].copy()
    info = a.update(short_batch)
    assert not np.array_equal(a_before, a.net.params["Wpi"])
    assert all(np.array_equal(b_before[k], b.net.params[k]) for k in PARAM_ORDER)
    assert set(info) >= {"policy_loss", "value_loss", "entropy", "clip_frac", "approx_kl"}


def test_nan_reward_raises_without_changing_weights(short_batch):
    agent = PPOAgent(N_ACTIONS["macro"], PpoConfig(batch=64, minibatch=32, epochs=2), seed=0)
    before = {k: v.copy() for k, v in agent.net.params.items()}
    bad = [t for t in short_batch]
    bad[3] = type(bad[3])(**{**vars(bad[3]), "reward": float("nan")})
    with pytest.raises(PpoError) as info:
        ppo_update(agent, bad)
    assert isinstance(info.value.diagnostics, dict)
    assert all(np.array_equal(before[k], agent.net.params[k]) for k in PARAM_ORDER)


def test_empty_batch_rejected():
    with pytest.raises(ValueError):
        ppo_update(PPOAgent(5, seed=0), [])


def test_collect_batch_exact_size(short_batch):
    assert len(short_batch) == 64
    assert short_batch[-1].done or short_batch[-1].truncated


# ---------------------------------------------------------------- checkpoints


def test_checkpoint_round_trip(tmp_path):
    net = _small_net(4)
    path = tmp_path / "p.ckpt"
    save_checkpoint(path, net, {"update": 7, "space": "macro"})
    loaded, meta = load_checkpoint(path, dtype=np.float64)
    assert meta == {"update": 7, "space": "macro"}
    assert all(np.array_equal(net.params[k], loaded.params[k]) for k in PARAM_ORDER)
    x = np.arange(6.0)
    assert np.array_equal(policy_forward(net, x)[0], policy_forward(loaded, x)[0])


def test_checkpoint_errors(tmp_path):
    path = tmp_path / "p.ckpt"
    save_checkpoint(path, _small_net(), {})
    data = path.read_bytes()
    cases = {
        "magic": b"XXXX" + data[4:],
        "version": data[:4] + (9).to_bytes(4, "little") + data[8:],
        "arrays": data[:8] + (3).to_bytes(4, "little") + data[12:],
        "truncated": data[:200],
        "header": data[:6],
    }
    for name, blob in cases.items():
        path.write_bytes(blob)
        with pytest.raises(CheckpointError):
            load_checkpoint(path)
    net = _small_net()
    net.params["b1"][0] = np.inf
    save_checkpoint(path, net, {})
    with pytest.raises(CheckpointError, match="non-finite"):
        load_checkpoint(path)


# ---------------------------------------------------------------- evaluation


def test_evaluate_policy_empty_and_deterministic(straight_spec):
    env = IntersectionEnv(straight_spec, action_kind="macro")
    agent = PPOAgent(N_ACTIONS["macro"], seed=5)
    assert evaluate_policy(env, agent, []) == []
    ps = [_straight(straight_spec, s) for s in (1, 2)]
    assert evaluate_policy(env, agent, ps, seed=3) == evaluate_policy(env, agent, ps, seed=3)


def test_always_stop_completes_nothing(straight_spec):
    env = IntersectionEnv(straight_spec, action_kind="macro")
    stop = ConstantPolicy(int(MacroCommand.STOP))
    stats = evaluate_policy(env, stop, [_straight(straight_spec, 0)])
    assert stats[0].route_completion == 0.0 and stats[0].collisions == 0.0


def test_run_episode_max_steps_marks_truncation(straight_spec):
    env = IntersectionEnv(straight_spec, action_kind="macro")
    trans, recs = run_episode(env, {0: PPOAgent(5, seed=0)}, _straight(straight_spec, 0),
                              np.random.default_rng(0), max_steps=3)
    assert len(trans[0]) == 3 and trans[0][-1].truncated and recs[0].length == 3
