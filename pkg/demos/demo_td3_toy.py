"""TD3 sanity run on the 1-D quadratic toy environment.

The optimum sits at action 0.5 with reward 0; a correct learner should
push the mean evaluation reward above -0.01 well within a few thousand
updates.
"""

from cfisac import Td3Config, Td3Learner, ToyQuadraticEnv
from cfisac.training import evaluate_policy, run_training

env = ToyQuadraticEnv()
cfg = Td3Config(batch_size=128, hidden=(64, 64), buffer_capacity=10_000)
learner = Td3Learner(env.state_dim, env.action_dim, cfg, seed=0)
buffer = learner.make_buffer(seed=100)

for chunk in range(5):
    run_training(env, learner, buffer, total_steps=1000,
                 warmup=128 if chunk == 0 else 0)
    score = evaluate_policy(env, learner, episodes=2)
    action = learner.select_action(env.reset(), noise_scale=0.0)[0]
    print(f"after {learner.update_count:5d} updates: eval reward "
          f"{score:9.5f}, greedy action {action:+.4f}")

print("\ntarget action is +0.5; reward above -0.01 counts as solved")
