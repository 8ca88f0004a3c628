"""Interaction loops shared by single-task training, meta-RL and sweeps."""

from __future__ import annotations

import numpy as np

from .replay import ReplayBuffer
from .td3 import Td3Learner


def run_training(env, learner: Td3Learner, buffer: ReplayBuffer,
                 total_steps: int, warmup: int | None = None,
                 log_rows: list | None = None, snapshot_every: int = 0,
                 on_snapshot=None):
    """Interact for `total_steps` environment steps with one update each.

    During the warmup phase actions are uniform random (from the learner's
    generator, so runs stay reproducible). Optional `log_rows` collects the
    training-log tuples; `on_snapshot(step, learner)` fires every
    `snapshot_every` steps for decision tracking.
    """
    if warmup is None:
        warmup = learner.cfg.batch_size
    state = env.reset()
    episode = 0
    updates = 0
    for t in range(total_steps):
        if t < warmup:
            action = learner.rng.uniform(-1.0, 1.0, learner.action_dim)
        else:
            action = learner.select_action(state)
        next_state, reward, done, info = env.step(action)
        buffer.add(state, action, reward, next_state)
        state = env.reset() if done else next_state
        stats = learner.train_step(buffer)
        if stats is not None:
            updates += 1
        if log_rows is not None:
            stats = stats or {}
            log_rows.append({
                "episode": episode, "step": t, "reward": reward,
                "critic_loss_1": stats.get("critic_loss_1"),
                "critic_loss_2": stats.get("critic_loss_2"),
                "actor_loss": stats.get("actor_loss"),
                "worst_crlb": info.get("crlb") if info else None,
                "rate_violations": info.get("violations") if info else None,
            })
        if done:
            episode += 1
        if snapshot_every and (t + 1) % snapshot_every == 0 and on_snapshot:
            on_snapshot(t, learner)
    return updates


def evaluate_policy(env, learner: Td3Learner, episodes: int = 1) -> float:
    """Mean reward of the noiseless policy over full episodes."""
    total, count = 0.0, 0
    for _ in range(episodes):
        state = env.reset()
        for _ in range(env.horizon):
            action = learner.select_action(state, noise_scale=0.0)
            state, reward, done, _ = env.step(action)
            total += reward
            count += 1
            if done:
                break
    return total / max(count, 1)


def greedy_action(env, learner: Td3Learner) -> np.ndarray:
    """The policy's noiseless action from a fresh reset state."""
    return learner.select_action(env.reset(), noise_scale=0.0)
