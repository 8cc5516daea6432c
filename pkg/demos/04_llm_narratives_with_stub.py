"""The language-model arbiter, driven by a canned stub so it runs offline."""
from __future__ import annotations

import random
import tempfile
from pathlib import Path

from narrarl import narratives
from narrarl.arbiter import ArbiterRequest
from narrarl.env import Action, generate_grid, observe
from narrarl.experiment import ArbiterSpec, ExperimentConfig, GridSpec, run_experiment
from narrarl.llm_client import ChatConfig, StubClient
from narrarl.rl import RlParams, Suggestion

print("== DEMO 4: NARRATIVE PROMPTS + STUB MODEL ===============")

grid = generate_grid(7, 0.3, 42)
req = ArbiterRequest(0, 0, observe(grid, grid.start), Suggestion(Action.DOWN, (0.0, 0.1, 0.0, 0.05), False),
                     narrative_id="theseus")

print("1. the same decision, framed four ways...")
for nid in narratives.BUILTIN_IDS:
    system, user = narratives.render(narratives.builtin(nid), req)
    print(f"--- {nid}: system preamble ({len(system['content'].split())} words)")
    print("   " + system["content"][:160].replace("\n", " ") + "...")
print("--- shared decision prompt:")
print(user["content"])

print("2. a short run with a stub that answers badly 30% of the time...")
r = random.Random(0)
script = [
    "Hmm, the labyrinth twists." if r.random() < 0.3 else f"I choose.\nACTION: {r.choice(list(Action)).name}"
    for _ in range(3000)
]
stub = StubClient(script)
out = Path(tempfile.mkdtemp(prefix="narrarl-demo4-"))
cfg = ExperimentConfig(
    GridSpec(7, 0.3, 42),
    str(out / "theseus.jsonl"),
    RlParams(episodes=3),
    ArbiterSpec("llm", narrative="theseus", chat=ChatConfig(endpoint="http://offline.invalid/v1", model="stub")),
    run_seed=42,
)
rep = run_experiment(cfg, client=stub)
print(f"   model calls: {len(stub.calls)}")
print(f"   success {rep.success_rate:.2f}, adherence {rep.adherence_rate:.3f}, fallback {rep.fallback_rate:.3f}")
print("   (the stub picks directions at random, so a low success rate is expected)")
print("   (a fallback executes the RL suggestion after three unreadable replies)")
print("   log:", cfg.log_path)

print("3. pointing at a real endpoint instead: set NARRARL_API_KEY and put")
print('   "chat": {"endpoint": "https://api.example.com/v1", "model": "..."} under "arbiter" in a config.')
