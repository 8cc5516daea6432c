"""Plain tabular Q-learning, no arbiter involved."""
from __future__ import annotations

import numpy as np

from narrarl import env, rl
from narrarl.render import render_frame

print("== DEMO 2: Q-LEARNING ===================================")

grid = env.generate_grid(7, 0.3, 42)
print("grid:\n" + "\n".join(render_frame(grid, []).rows))
print("optimal path length:", env.shortest_path_len(grid))

print("1. training 100 episodes, alpha=0.5 gamma=0.9 epsilon=0.2...")
q_seed, rng = rl.run_streams(1)
table, results = rl.train(grid, rl.RlParams(episodes=100), rl.init_qtable(grid.n, q_seed), rng)
for chunk in range(0, 100, 20):
    part = results[chunk:chunk + 20]
    wins = sum(r.success for r in part)
    steps = np.mean([r.steps for r in part])
    print(f"   episodes {chunk:3d}-{chunk + 19:3d}: {wins:2d}/20 reached goal, mean steps {steps:6.1f}")

print("2. greedy rollout with the learned table...")
roll = rl.greedy_rollout(grid, table)
print(f"   success={roll.success} steps={roll.steps}")
print(render_frame(grid, roll.path).text)

print("3. how much training does the greedy policy need?")
for episodes in (5, 10, 25, 50, 100):
    wins = 0
    for seed in range(10):
        g = env.generate_grid(7, 0.3, seed)
        q_seed, rng = rl.run_streams(seed)
        t, _ = rl.train(g, rl.RlParams(episodes=episodes), rl.init_qtable(7, q_seed), rng)
        wins += rl.greedy_rollout(g, t).success
    print(f"   {episodes:3d} episodes: greedy success on {wins}/10 grids")
