"""Twin-delayed deterministic policy-gradient learner on numpy networks.

Six networks: actor, two critics, and their targets. Updates follow the
standard recipe: smoothed clipped target actions, the elementwise minimum
of the twin target critics as the regression target, delayed actor ascent
on the first critic, and convex-combination target refreshes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mlp import Mlp, make_optimizer
from .replay import ReplayBuffer


@dataclass
class Td3Config:
    actor_lr: float = 1e-3
    critic_lr1: float = 1e-3
    critic_lr2: float = 1e-3
    target_decay_critic: float = 0.005   # mix toward online critics
    target_decay_actor: float = 0.005    # mix toward online actor
    policy_delay: int = 2
    target_noise_sigma: float = 0.2
    noise_clip: float = 0.5
    batch_size: int = 256
    exploration_noise: float = 0.1
    buffer_capacity: int = 100_000
    discount: float = 0.99
    hidden: tuple[int, int] = (256, 256)
    optimizer: str = "adam"

    def __post_init__(self):
        for name in ("actor_lr", "critic_lr1", "critic_lr2"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise ValueError(f"{name} must be in (0, 1)")
        for name in ("target_decay_critic", "target_decay_actor"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        if self.policy_delay < 1:
            raise ValueError("policy_delay must be >= 1")
        if not 0.0 < self.discount <= 1.0:
            raise ValueError("discount must be in (0, 1]")


class Td3Learner:
    """Owns the six networks, their optimizers and the noise stream."""

    def __init__(self, state_dim: int, action_dim: int,
                 cfg: Td3Config | None = None, seed: int = 0):
        self.cfg = cfg or Td3Config()
        self.state_dim = int(state_dim)
        self.action_dim = int(action_dim)
        init_rng = np.random.default_rng(np.random.SeedSequence(seed))
        h1, h2 = self.cfg.hidden
        self.actor = Mlp([state_dim, h1, h2, action_dim],
                         output_activation="tanh", rng=init_rng)
        self.critic1 = Mlp([state_dim + action_dim, h1, h2, 1], rng=init_rng)
        self.critic2 = Mlp([state_dim + action_dim, h1, h2, 1], rng=init_rng)
        self.target_actor = self.actor.copy()
        self.target_critic1 = self.critic1.copy()
        self.target_critic2 = self.critic2.copy()
        self._make_optimizers()
        self.rng = np.random.default_rng(np.random.SeedSequence((seed, 1)))
        self.update_count = 0

    def _make_optimizers(self):
        kind = self.cfg.optimizer
        self.actor_opt = make_optimizer(kind, self.actor.parameters(),
                                        self.cfg.actor_lr)
        self.critic1_opt = make_optimizer(kind, self.critic1.parameters(),
                                          self.cfg.critic_lr1)
        self.critic2_opt = make_optimizer(kind, self.critic2.parameters(),
                                          self.cfg.critic_lr2)

    def set_learning_rates(self, actor_lr=None, critic_lr1=None,
                           critic_lr2=None):
        if actor_lr is not None:
            self.actor_opt.lr = actor_lr
        if critic_lr1 is not None:
            self.critic1_opt.lr = critic_lr1
        if critic_lr2 is not None:
            self.critic2_opt.lr = critic_lr2

    def clone(self, seed: int = 0) -> "Td3Learner":
        """Fresh learner with copied weights and reset optimizers."""
        other = Td3Learner(self.state_dim, self.action_dim, self.cfg,
                           seed=seed)
        other.actor.load_from(self.actor)
        other.critic1.load_from(self.critic1)
        other.critic2.load_from(self.critic2)
        other.target_actor.load_from(self.target_actor)
        other.target_critic1.load_from(self.target_critic1)
        other.target_critic2.load_from(self.target_critic2)
        return other

    def make_buffer(self, seed: int = 0) -> ReplayBuffer:
        return ReplayBuffer(self.cfg.buffer_capacity, self.state_dim,
                            self.action_dim, seed=seed)

    # -- acting ---------------------------------------------------------------

    def select_action(self, state, noise_scale: float | None = None):
        """Actor output plus Gaussian exploration noise, clipped to [-1, 1]."""
        if noise_scale is None:
            noise_scale = self.cfg.exploration_noise
        action = self.actor.forward(state)[0]
        if noise_scale > 0:
            action = action + noise_scale * self.rng.standard_normal(
                self.action_dim)
        return np.clip(action, -1.0, 1.0)

    # -- pieces of the update (also used by the meta loop) --------------------

    def smoothed_target_actions(self, next_states: np.ndarray) -> np.ndarray:
        noise = self.cfg.target_noise_sigma * self.rng.standard_normal(
            (next_states.shape[0], self.action_dim))
        noise = np.clip(noise, -self.cfg.noise_clip, self.cfg.noise_clip)
        return np.clip(self.target_actor.forward(next_states) + noise,
                       -1.0, 1.0)

    def regression_targets(self, rewards, next_states) -> np.ndarray:
        smoothed = self.smoothed_target_actions(next_states)
        inp = np.concatenate([next_states, smoothed], axis=1)
        q1 = self.target_critic1.forward(inp)[:, 0]
        q2 = self.target_critic2.forward(inp)[:, 0]
        return rewards + self.cfg.discount * np.minimum(q1, q2)

    def critic_loss_grads(self, critic: Mlp, states, actions, targets):
        inp = np.concatenate([states, actions], axis=1)
        q, cache = critic.forward_cached(inp)
        resid = q[:, 0] - targets
        loss = float(np.mean(resid ** 2))
        grad_out = (2.0 / len(resid)) * resid[:, None]
        gw, gb, _ = critic.backward(cache, grad_out)
        return loss, gw + gb

    def actor_loss_grads(self, states):
        """Gradient of -mean(Q1(s, actor(s))) in the actor parameters."""
        actions, actor_cache = self.actor.forward_cached(states)
        inp = np.concatenate([states, actions], axis=1)
        _, critic_cache = self.critic1.forward_cached(inp)
        q_mean_grad = np.full((states.shape[0], 1), -1.0 / states.shape[0])
        _, _, g_inp = self.critic1.backward(critic_cache, q_mean_grad)
        g_action = g_inp[:, self.state_dim:]
        gw, gb, _ = self.actor.backward(actor_cache, g_action)
        q_vals = self.critic1.forward(inp)[:, 0]
        return float(-np.mean(q_vals)), gw + gb

    def update(self, batch) -> dict:
        """One TD3 update on a sampled batch; returns the loss summary."""
        states, actions, rewards, next_states = batch
        targets = self.regression_targets(rewards, next_states)
        loss1, grads1 = self.critic_loss_grads(self.critic1, states, actions,
                                               targets)
        self.critic1_opt.step(self.critic1.parameters(), grads1)
        loss2, grads2 = self.critic_loss_grads(self.critic2, states, actions,
                                               targets)
        self.critic2_opt.step(self.critic2.parameters(), grads2)

        self.update_count += 1
        actor_loss = None
        if self.update_count % self.cfg.policy_delay == 0:
            actor_loss, agrads = self.actor_loss_grads(states)
            self.actor_opt.step(self.actor.parameters(), agrads)
            self.target_critic1.blend_from(self.critic1,
                                           self.cfg.target_decay_critic)
            self.target_critic2.blend_from(self.critic2,
                                           self.cfg.target_decay_critic)
            self.target_actor.blend_from(self.actor,
                                         self.cfg.target_decay_actor)
        return {"critic_loss_1": loss1, "critic_loss_2": loss2,
                "actor_loss": actor_loss}

    def train_step(self, buffer: ReplayBuffer) -> dict | None:
        """Sample-and-update helper; signals a no-op on a thin buffer."""
        if len(buffer) < self.cfg.batch_size:
            return None
        return self.update(buffer.sample(self.cfg.batch_size))
