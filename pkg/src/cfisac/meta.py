"""Meta-training and meta-adaptation around the TD3 learner.

First-order scheme: every outer round clones the meta weights into each
task, adapts the clone with a few TD3 updates on the task's training
split, evaluates the adapted networks' loss gradients on the validation
split, and applies the across-task average of those gradients to the meta
weights. Adaptation to a new task starts from the meta weights and runs
plain TD3 updates on freshly collected experience.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .replay import ReplayBuffer
from .td3 import Td3Config, Td3Learner


@dataclass
class MetaConfig:
    num_tasks: int = 2
    inner_steps: int = 32
    outer_iters: int = 20
    adaptation_steps: int = 500
    meta_critic_lr1: float = 1e-3  # adaptation-phase learning rates
    meta_critic_lr2: float = 1e-3
    meta_actor_lr: float = 1e-3
    outer_lr: float = 1e-3         # rate of the across-task meta update
    rollout_steps: int = 64        # env steps collected per task per round
    train_fraction: float = 0.8    # train/validation buffer split
    pretrain_steps: int = 0        # plain TD3 warm-up before meta rounds

    def __post_init__(self):
        for name in ("num_tasks", "inner_steps", "outer_iters",
                     "adaptation_steps", "rollout_steps", "pretrain_steps"):
            if getattr(self, name) < 0 or (name in ("num_tasks",)
                                           and getattr(self, name) < 1):
                raise ValueError(f"{name} out of range")
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must be in (0, 1)")


class SplitBuffers:
    """Train/validation replay pair filled by a deterministic round-robin."""

    def __init__(self, capacity: int, state_dim: int, action_dim: int,
                 train_fraction: float, seed: int):
        self.train = ReplayBuffer(capacity, state_dim, action_dim, seed=seed)
        self.val = ReplayBuffer(capacity, state_dim, action_dim,
                                seed=seed + 1)
        # e.g. fraction 0.8 -> pattern period 5 with 4 train slots
        period = max(int(round(1.0 / (1.0 - train_fraction))), 2)
        self._period = period
        self._count = 0

    def add(self, *transition):
        target = self.val if self._count % self._period == self._period - 1 \
            else self.train
        target.add(*transition)
        self._count += 1


def _collect(env, learner: Td3Learner, buffers, steps: int,
             explore: bool = True):
    state = env.reset()
    for _ in range(steps):
        if explore:
            action = learner.select_action(state)
        else:
            action = learner.select_action(state, noise_scale=0.0)
        next_state, reward, done, _ = env.step(action)
        buffers.add(state, action, reward, next_state)
        state = env.reset() if done else next_state


def _accumulate(acc, grads, scale=1.0):
    if acc is None:
        return [g * scale for g in grads]
    for a, g in zip(acc, grads):
        a += scale * g
    return acc


def meta_train(task_factory, meta_cfg: MetaConfig, td3_cfg: Td3Config,
               seed: int = 0):
    """Learn meta-initial weights across `num_tasks` environments.

    `task_factory(task_index, seed)` must build the task environment; all
    tasks must share state and action dimensions. An optional plain TD3
    warm-up phase (interacting round-robin across the tasks) precedes the
    first-order meta rounds, mirroring the interact-then-meta structure of
    the training procedure. Returns the meta learner and a history of
    per-round mean validation losses.
    """
    envs = [task_factory(l, seed) for l in range(meta_cfg.num_tasks)]
    probe = envs[0]
    meta = Td3Learner(probe.state_dim, probe.action_dim, td3_cfg, seed=seed)
    buffers = [SplitBuffers(td3_cfg.buffer_capacity, probe.state_dim,
                            probe.action_dim, meta_cfg.train_fraction,
                            seed=seed * 1000 + l)
               for l in range(meta_cfg.num_tasks)]
    history = []

    if meta_cfg.pretrain_steps > 0:
        warm = meta.make_buffer(seed=seed + 17)
        states = [env.reset() for env in envs]
        for t in range(meta_cfg.pretrain_steps):
            l = t % meta_cfg.num_tasks
            if t < td3_cfg.batch_size:
                action = meta.rng.uniform(-1.0, 1.0, meta.action_dim)
            else:
                action = meta.select_action(states[l])
            nxt, reward, done, _ = envs[l].step(action)
            warm.add(states[l], action, reward, nxt)
            states[l] = envs[l].reset() if done else nxt
            meta.train_step(warm)
    # the across-task argmin is driven by an adaptive optimizer on the
    # aggregated first-order gradients
    from .mlp import Adam
    meta_opts = {
        "actor": Adam(meta.actor.parameters(), meta_cfg.outer_lr),
        "critic1": Adam(meta.critic1.parameters(), meta_cfg.outer_lr),
        "critic2": Adam(meta.critic2.parameters(), meta_cfg.outer_lr),
    }

    for outer in range(meta_cfg.outer_iters):
        acc_actor = acc_c1 = acc_c2 = None
        val_losses = []
        for l, (env, bufs) in enumerate(zip(envs, buffers)):
            learner = meta.clone(seed=seed * 100_003 + outer * 101 + l)
            _collect(env, learner, bufs, meta_cfg.rollout_steps)
            for _ in range(meta_cfg.inner_steps):
                learner.train_step(bufs.train)
            n_val = min(td3_cfg.batch_size, len(bufs.val))
            if n_val == 0:
                continue
            states, actions, rewards, next_states = bufs.val.sample(n_val)
            targets = learner.regression_targets(rewards, next_states)
            loss1, g1 = learner.critic_loss_grads(learner.critic1, states,
                                                  actions, targets)
            loss2, g2 = learner.critic_loss_grads(learner.critic2, states,
                                                  actions, targets)
            actor_loss, ga = learner.actor_loss_grads(states)
            acc_c1 = _accumulate(acc_c1, g1)
            acc_c2 = _accumulate(acc_c2, g2)
            acc_actor = _accumulate(acc_actor, ga)
            val_losses.append((loss1, loss2, actor_loss))
        if acc_actor is not None:
            scale = 1.0 / meta_cfg.num_tasks
            meta_opts["actor"].step(meta.actor.parameters(),
                                    [g * scale for g in acc_actor])
            meta_opts["critic1"].step(meta.critic1.parameters(),
                                      [g * scale for g in acc_c1])
            meta_opts["critic2"].step(meta.critic2.parameters(),
                                      [g * scale for g in acc_c2])
            meta.target_actor.load_from(meta.actor)
            meta.target_critic1.load_from(meta.critic1)
            meta.target_critic2.load_from(meta.critic2)
        history.append({
            "outer": outer,
            "val_critic_loss": float(np.mean([v[0] + v[1]
                                              for v in val_losses]))
            if val_losses else np.nan,
        })
    return meta, history


def meta_adapt(meta_learner: Td3Learner, env, meta_cfg: MetaConfig,
               seed: int = 0, adaptation_steps: int | None = None,
               learner: Td3Learner | None = None):
    """Adapt (a copy of) the meta policy to a new task.

    Runs exactly `adaptation_steps` TD3 updates, interleaved one per
    environment step once the buffer can fill a batch; with zero steps the
    returned policy is the meta policy verbatim. Passing a fresh `learner`
    instead of cloning the meta weights gives the random-init baseline the
    same interaction protocol.
    """
    steps = meta_cfg.adaptation_steps if adaptation_steps is None \
        else adaptation_steps
    if learner is None:
        learner = meta_learner.clone(seed=seed)
    learner.set_learning_rates(actor_lr=meta_cfg.meta_actor_lr,
                               critic_lr1=meta_cfg.meta_critic_lr1,
                               critic_lr2=meta_cfg.meta_critic_lr2)
    buffer = learner.make_buffer(seed=seed + 7)
    state = env.reset()
    updates = 0
    guard = 0
    while updates < steps:
        action = learner.select_action(state)
        next_state, reward, done, _ = env.step(action)
        buffer.add(state, action, reward, next_state)
        state = env.reset() if done else next_state
        if learner.train_step(buffer) is not None:
            updates += 1
        guard += 1
        if guard > 10 * steps + learner.cfg.batch_size + 1:
            break
    return learner
