"""Decision traces: write, reread, recompute metrics, render."""
from __future__ import annotations

import json
import tempfile
from pathlib import Path

from narrarl.experiment import ArbiterSpec, ExperimentConfig, GridSpec, execute
from narrarl.render import episode_trajectory, render_frame
from narrarl.rl import RlParams
from narrarl.trace import masked_lines, read_log, report_from_log

print("== DEMO 5: TRACES AND REPORTS ===========================")

out = Path(tempfile.mkdtemp(prefix="narrarl-demo5-"))
cfg = ExperimentConfig(GridSpec(7, 0.3, 42), str(out / "run.jsonl"), RlParams(episodes=10),
                       ArbiterSpec("scripted"), run_seed=42)

print("1. running 10 scripted episodes...")
result = execute(cfg)
recs = read_log(cfg.log_path)
print(f"   {len(recs)} decision records in {cfg.log_path}")
print("   first record:")
print("  ", json.dumps(recs[0].to_dict())[:300], "...")

print("2. the report rebuilt from the log alone...")
logged = report_from_log(cfg.log_path)
for key in ("success_rate", "avg_steps_successful", "adherence_rate", "fallback_rate"):
    print(f"   {key:22s} live={getattr(result.report, key)!r:22} log={getattr(logged, key)!r}")

print("3. replaying the config gives the same log up to run_id and latency...")
again = ExperimentConfig(GridSpec(7, 0.3, 42), str(out / "again.jsonl"), RlParams(episodes=10),
                         ArbiterSpec("scripted"), run_seed=42)
execute(again)
print("   identical:", masked_lines(cfg.log_path) == masked_lines(again.log_path))

print("4. the last episode's path...")
print(render_frame(result.grid, episode_trajectory(recs, 9)).text)
