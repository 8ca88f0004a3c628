import numpy as np
import pytest

from cfisac.env import ToyQuadraticEnv
from cfisac.meta import MetaConfig, SplitBuffers, meta_adapt, meta_train
from cfisac.td3 import Td3Config, Td3Learner


def small_td3():
    return Td3Config(hidden=(32, 32), batch_size=32, buffer_capacity=4096,
                     discount=0.5)


def toy_factory(optimum_by_task):
    def factory(l, seed):
        del seed
        return ToyQuadraticEnv(horizon=16, optimum=optimum_by_task[l])
    return factory


def test_split_buffers_round_robin():
    bufs = SplitBuffers(64, 2, 1, train_fraction=0.8, seed=0)
    for i in range(20):
        bufs.add([i, i], [i], float(i), [i, i])
    assert len(bufs.train) == 16
    assert len(bufs.val) == 4


def test_meta_config_validation():
    with pytest.raises(ValueError):
        MetaConfig(num_tasks=0)
    with pytest.raises(ValueError):
        MetaConfig(train_fraction=1.0)


def test_meta_train_zero_inner_steps_nearly_noop():
    # with no rollouts and no inner steps there is nothing to aggregate,
    # so the meta weights stay exactly at their initialization
    cfg = MetaConfig(num_tasks=1, inner_steps=0, outer_iters=2,
                     rollout_steps=0, adaptation_steps=0)
    meta, history = meta_train(toy_factory([0.5]), cfg, small_td3(), seed=1)
    fresh = Td3Learner(2, 1, small_td3(), seed=1)
    assert np.array_equal(meta.actor.flatten(), fresh.actor.flatten())
    assert len(history) == 2


def test_meta_train_identical_tasks_deterministic():
    cfg = MetaConfig(num_tasks=2, inner_steps=4, outer_iters=2,
                     rollout_steps=40, adaptation_steps=0)
    meta_a, _ = meta_train(toy_factory([0.5, 0.5]), cfg, small_td3(), seed=7)
    meta_b, _ = meta_train(toy_factory([0.5, 0.5]), cfg, small_td3(), seed=7)
    assert np.array_equal(meta_a.actor.flatten(), meta_b.actor.flatten())
    assert np.array_equal(meta_a.critic1.flatten(),
                          meta_b.critic1.flatten())


def test_meta_adapt_zero_steps_is_identity():
    cfg = MetaConfig(num_tasks=1, inner_steps=2, outer_iters=1,
                     rollout_steps=40, adaptation_steps=0)
    meta, _ = meta_train(toy_factory([0.5]), cfg, small_td3(), seed=2)
    env = ToyQuadraticEnv(horizon=16)
    adapted = meta_adapt(meta, env, cfg, seed=0, adaptation_steps=0)
    assert np.array_equal(adapted.actor.flatten(), meta.actor.flatten())


def test_meta_adapt_runs_exact_update_count():
    cfg = MetaConfig(num_tasks=1, inner_steps=2, outer_iters=1,
                     rollout_steps=40, adaptation_steps=25)
    meta, _ = meta_train(toy_factory([0.5]), cfg, small_td3(), seed=3)
    env = ToyQuadraticEnv(horizon=16)
    adapted = meta_adapt(meta, env, cfg, seed=1)
    assert adapted.update_count == 25


def test_meta_toy_two_task_benefit():
    # two sign-flipped toy tasks; after a short fixed adaptation budget the
    # meta initialization outperforms a fresh random policy on average
    # across seeds and tasks
    from cfisac.training import evaluate_policy
    td3 = small_td3()
    cfg = MetaConfig(num_tasks=2, inner_steps=8, outer_iters=80,
                     rollout_steps=32, adaptation_steps=40)
    meta, _ = meta_train(toy_factory([0.5, -0.5]), cfg, td3, seed=5)
    meta_scores, rand_scores = [], []
    for s in range(5):
        for optimum in (0.5, -0.5):
            env = ToyQuadraticEnv(horizon=16, optimum=optimum)
            adapted = meta_adapt(meta, env, cfg, seed=s)
            meta_scores.append(evaluate_policy(env, adapted, episodes=1))
            fresh = Td3Learner(env.state_dim, env.action_dim, td3, seed=s)
            env2 = ToyQuadraticEnv(horizon=16, optimum=optimum)
            rand = meta_adapt(meta, env2, cfg, seed=s, learner=fresh)
            rand_scores.append(evaluate_policy(env2, rand, episodes=1))
    assert np.mean(meta_scores) >= np.mean(rand_scores)
