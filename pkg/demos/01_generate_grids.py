"""Generate a few gridworlds and look at them."""
from __future__ import annotations

from narrarl import env
from narrarl.render import render_frame

print("== DEMO 1: GRID GENERATION ==============================")

print("1. one 7x7 grid at 30% obstacles, seed 42...")
grid = env.generate_grid(7, 0.3, 42)
print(render_frame(grid, []).text)
print("   obstacles:", len(grid.obstacles), "(round(0.3 * 49) = 15)")
print("   shortest path:", env.shortest_path_len(grid), "moves")

print("2. same seed, same grid...")
print("   identical:", env.generate_grid(7, 0.3, 42) == grid)

print("3. obstacle counts across sizes and densities...")
for n in (5, 7, 9, 11):
    row = []
    for d in (0.1, 0.3, 0.4):
        g = env.generate_grid(n, d, seed=n)
        row.append(f"d={d}: {len(g.obstacles):3d} obstacles, path {env.shortest_path_len(g):2d}")
    print(f"   n={n:2d}  " + " | ".join(row))

print("4. what the agent sees at the start...")
obs = env.observe(grid, grid.start)
print("  ", obs.to_dict())
