import numpy as np
import pytest

from cfisac.env import ToyQuadraticEnv
from cfisac.mlp import Adam, Mlp, Sgd
from cfisac.replay import ReplayBuffer
from cfisac.td3 import Td3Config, Td3Learner
from cfisac.training import evaluate_policy, run_training


def test_mlp_forward_deterministic_and_bounded():
    rng = np.random.default_rng(0)
    net = Mlp([3, 16, 16, 2], output_activation="tanh", rng=rng)
    x = rng.standard_normal((7, 3))
    y1 = net.forward(x)
    y2 = net.forward(x)
    assert np.array_equal(y1, y2)
    assert np.all(np.abs(y1) <= 1.0)


def test_mlp_gradcheck():
    rng = np.random.default_rng(1)
    net = Mlp([4, 10, 10, 3], output_activation="tanh", rng=rng,
              final_init_scale=0.5)
    x = rng.standard_normal((6, 4))
    direction = rng.standard_normal((6, 3))

    def scalar():
        return float(np.sum(net.forward(x) * direction))

    _, cache = net.forward_cached(x)
    gw, gb, gin = net.backward(cache, direction)
    eps = 1e-6
    for p, g in zip(net.parameters(), gw + gb):
        flat = p.ravel()
        for idx in range(0, flat.size, max(flat.size // 5, 1)):
            orig = flat[idx]
            flat[idx] = orig + eps
            f1 = scalar()
            flat[idx] = orig - eps
            f2 = scalar()
            flat[idx] = orig
            fd = (f1 - f2) / (2 * eps)
            assert abs(fd - g.ravel()[idx]) < 1e-6 * max(abs(fd), 1.0)
    # input gradient
    for i in (0, 3):
        for j in (0, 2):
            orig = x[i, j]
            x[i, j] = orig + eps
            f1 = scalar()
            x[i, j] = orig - eps
            f2 = scalar()
            x[i, j] = orig
            assert abs((f1 - f2) / (2 * eps) - gin[i, j]) < 1e-6


def test_mlp_flatten_roundtrip():
    rng = np.random.default_rng(2)
    net = Mlp([3, 8, 2], rng=rng)
    vec = net.flatten()
    other = Mlp([3, 8, 2], rng=np.random.default_rng(99))
    other.load_flat(vec)
    x = rng.standard_normal((4, 3))
    assert np.array_equal(net.forward(x), other.forward(x))
    with pytest.raises(ValueError):
        other.load_flat(vec[:-1])


def test_optimizers_step():
    rng = np.random.default_rng(3)
    p = [rng.standard_normal((4, 4))]
    g = [np.ones((4, 4))]
    before = p[0].copy()
    Sgd(p, lr=0.1).step(p, g)
    assert np.allclose(before - p[0], 0.1)

    p2 = [rng.standard_normal((4, 4))]
    adam = Adam(p2, lr=0.1)
    prev = p2[0].copy()
    adam.step(p2, [np.ones((4, 4))])
    assert np.allclose(prev - p2[0], 0.1, atol=1e-8)  # first Adam step = lr

    state = adam.state_dict()
    adam2 = Adam(p2, lr=0.1)
    adam2.load_state_dict(state)
    assert adam2.step_count == adam.step_count


def test_replay_buffer_fifo_and_sampling():
    buf = ReplayBuffer(capacity=4, state_dim=2, action_dim=1, seed=0)
    for i in range(6):
        buf.add([i, i], [i], float(i), [i + 1, i + 1])
    assert len(buf) == 4
    # FIFO: oldest two entries were overwritten
    assert set(buf.rewards.tolist()) == {2.0, 3.0, 4.0, 5.0}

    s, a, r, s2 = buf.sample(4)
    assert len(np.unique(a[:, 0])) == 4  # without replacement
    with pytest.raises(ValueError):
        buf.sample(5)
    with pytest.raises(ValueError):
        buf.add([np.nan, 0], [0], 0.0, [0, 0])

    b1 = ReplayBuffer(8, 1, 1, seed=5)
    b2 = ReplayBuffer(8, 1, 1, seed=5)
    for i in range(8):
        b1.add([i], [i], i, [i])
        b2.add([i], [i], i, [i])
    assert np.array_equal(b1.sample(4)[1], b2.sample(4)[1])


def test_select_action_repeatable_and_clipped():
    learner = Td3Learner(3, 2, Td3Config(hidden=(16, 16)), seed=4)
    state = np.array([0.2, -0.1, 0.5])
    a1 = learner.select_action(state, noise_scale=0.0)
    a2 = learner.select_action(state, noise_scale=0.0)
    assert np.array_equal(a1, a2)
    for _ in range(20):
        a = learner.select_action(state, noise_scale=5.0)
        assert np.all(a >= -1.0) and np.all(a <= 1.0)

    twin_a = Td3Learner(3, 2, Td3Config(hidden=(16, 16)), seed=9)
    twin_b = Td3Learner(3, 2, Td3Config(hidden=(16, 16)), seed=9)
    seq_a = [twin_a.select_action(state) for _ in range(5)]
    seq_b = [twin_b.select_action(state) for _ in range(5)]
    assert all(np.array_equal(x, y) for x, y in zip(seq_a, seq_b))


def _random_batch(rng, n, state_dim, action_dim):
    return (rng.standard_normal((n, state_dim)),
            rng.uniform(-1, 1, (n, action_dim)),
            rng.standard_normal(n),
            rng.standard_normal((n, state_dim)))


def test_critic_loss_matches_hand_oracle():
    rng = np.random.default_rng(7)
    learner = Td3Learner(3, 2, Td3Config(hidden=(16, 16), batch_size=8),
                         seed=1)
    states, actions, _, _ = _random_batch(rng, 8, 3, 2)
    targets = rng.standard_normal(8)
    loss, _ = learner.critic_loss_grads(learner.critic1, states, actions,
                                        targets)
    inp = np.concatenate([states, actions], axis=1)
    q = learner.critic1.forward(inp)[:, 0]
    assert loss == pytest.approx(float(np.mean((q - targets) ** 2)),
                                 rel=1e-10)


def test_regression_target_uses_twin_minimum():
    rng = np.random.default_rng(8)
    learner = Td3Learner(3, 2, Td3Config(hidden=(16, 16)), seed=2)
    _, _, rewards, next_states = _random_batch(rng, 16, 3, 2)
    y = learner.regression_targets(rewards, next_states)
    # recompute an upper bound with each single target critic: y must not
    # exceed either one (same smoothing noise cannot be replayed, so check
    # across many draws that y <= r + gamma * max(Q1, Q2) always holds)
    for _ in range(5):
        y = learner.regression_targets(rewards, next_states)
        smoothed = np.clip(learner.target_actor.forward(next_states), -1, 1)
        inp = np.concatenate([next_states, smoothed], axis=1)
        q1 = learner.target_critic1.forward(inp)[:, 0]
        q2 = learner.target_critic2.forward(inp)[:, 0]
        # noise moves the action by at most noise_clip in each coordinate;
        # with equal networks the min structure still bounds from above
        assert np.all(y <= rewards + learner.cfg.discount
                      * np.maximum(q1, q2) + 1.0)


def test_smoothed_target_actions_clipped():
    learner = Td3Learner(3, 2, Td3Config(hidden=(16, 16),
                                         target_noise_sigma=5.0,
                                         noise_clip=0.4), seed=3)
    rng = np.random.default_rng(0)
    next_states = rng.standard_normal((64, 3))
    base = learner.target_actor.forward(next_states)
    smoothed = learner.smoothed_target_actions(next_states)
    assert np.all(smoothed >= -1.0) and np.all(smoothed <= 1.0)
    assert np.max(np.abs(smoothed - np.clip(base, -1, 1))) <= 0.4 + 1e-12


def test_target_updates_are_exact_convex_combinations():
    rng = np.random.default_rng(9)
    cfg = Td3Config(hidden=(16, 16), batch_size=8, policy_delay=2,
                    target_decay_critic=0.3, target_decay_actor=0.25)
    learner = Td3Learner(3, 2, cfg, seed=5)
    batch = _random_batch(rng, 8, 3, 2)
    for step in range(4):
        old_t1 = learner.target_critic1.flatten()
        old_ta = learner.target_actor.flatten()
        learner.update(batch)
        if learner.update_count % cfg.policy_delay == 0:
            expect_t1 = 0.3 * learner.critic1.flatten() + 0.7 * old_t1
            expect_ta = 0.25 * learner.actor.flatten() + 0.75 * old_ta
            assert np.max(np.abs(learner.target_critic1.flatten()
                                 - expect_t1)) < 1e-12
            assert np.max(np.abs(learner.target_actor.flatten()
                                 - expect_ta)) < 1e-12
        else:
            assert np.array_equal(learner.target_critic1.flatten(), old_t1)
            assert np.array_equal(learner.target_actor.flatten(), old_ta)


def test_target_decay_endpoints():
    rng = np.random.default_rng(10)
    batch = _random_batch(rng, 8, 3, 2)
    hard = Td3Learner(3, 2, Td3Config(hidden=(16, 16), policy_delay=1,
                                      target_decay_critic=1.0,
                                      target_decay_actor=1.0), seed=6)
    hard.update(batch)
    assert np.array_equal(hard.target_critic1.flatten(),
                          hard.critic1.flatten())
    frozen = Td3Learner(3, 2, Td3Config(hidden=(16, 16), policy_delay=1,
                                        target_decay_critic=0.0,
                                        target_decay_actor=0.0), seed=6)
    before = frozen.target_critic1.flatten()
    frozen.update(batch)
    assert np.array_equal(frozen.target_critic1.flatten(), before)


def test_actor_updates_only_on_delay():
    rng = np.random.default_rng(11)
    cfg = Td3Config(hidden=(16, 16), policy_delay=3)
    learner = Td3Learner(3, 2, cfg, seed=7)
    batch = _random_batch(rng, 8, 3, 2)
    stats = [learner.update(batch) for _ in range(6)]
    actor_steps = [s["actor_loss"] is not None for s in stats]
    assert actor_steps == [False, False, True, False, False, True]


def test_train_step_signals_thin_buffer():
    learner = Td3Learner(2, 1, Td3Config(hidden=(8, 8), batch_size=32),
                         seed=8)
    buf = learner.make_buffer(seed=0)
    assert learner.train_step(buf) is None
    for i in range(32):
        buf.add([0.0, 0.0], [0.0], 0.0, [0.0, 0.0])
    assert learner.train_step(buf) is not None


def test_config_validation():
    with pytest.raises(ValueError):
        Td3Config(actor_lr=1.5)
    with pytest.raises(ValueError):
        Td3Config(policy_delay=0)
    with pytest.raises(ValueError):
        Td3Config(discount=0.0)
    with pytest.raises(ValueError):
        Td3Config(target_decay_critic=1.5)


def test_toy_env_quick_learning():
    # shortened version of the acceptance check: one seed, fewer updates
    env = ToyQuadraticEnv()
    cfg = Td3Config(batch_size=128, hidden=(64, 64), buffer_capacity=10_000)
    learner = Td3Learner(env.state_dim, env.action_dim, cfg, seed=0)
    buffer = learner.make_buffer(seed=100)
    run_training(env, learner, buffer, total_steps=1628, warmup=128)
    assert evaluate_policy(env, learner, episodes=2) > -0.05
