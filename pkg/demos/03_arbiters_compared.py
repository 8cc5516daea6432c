"""Passthrough versus the rule-based arbiter over the same seeds."""
from __future__ import annotations

import tempfile
from pathlib import Path

from narrarl.experiment import ArbiterSpec, ExperimentConfig, GridSpec, run_experiment
from narrarl.rl import RlParams

print("== DEMO 3: ARBITERS COMPARED ============================")

out = Path(tempfile.mkdtemp(prefix="narrarl-demo3-"))
print("logs go to", out)

print("1. 10 seeds x 10 episodes on 7x7 / 30% grids...")
rows = {}
for kind in ("passthrough", "scripted"):
    wins = decisions = followed = 0
    for seed in range(10):
        cfg = ExperimentConfig(GridSpec(7, 0.3, seed), str(out / f"{kind}-{seed}.jsonl"),
                               RlParams(episodes=10), ArbiterSpec(kind), run_seed=seed)
        rep = run_experiment(cfg)
        wins += sum(e.success for e in rep.per_episode)
        decisions += sum(e.decisions for e in rep.per_episode)
        followed += sum(e.followed for e in rep.per_episode)
    rows[kind] = (wins, decisions, followed)
    print(f"   {kind:11s}: {wins}/100 episodes succeeded, {decisions} decisions, "
          f"adherence {followed / decisions:.3f}")

print("2. the scripted arbiter only steps in when the suggestion hits a wall or obstacle;")
print("   overridden suggestions still get a collision update, so the table learns from them.")
print("   without that update (learn_blocked_suggestions=False):")
wins = 0
for seed in range(10):
    cfg = ExperimentConfig(GridSpec(7, 0.3, seed), str(out / f"noblock-{seed}.jsonl"), RlParams(episodes=10),
                           ArbiterSpec("scripted"), run_seed=seed, learn_blocked_suggestions=False)
    wins += sum(e.success for e in run_experiment(cfg).per_episode)
print(f"   scripted, no counterfactual update: {wins}/100")
