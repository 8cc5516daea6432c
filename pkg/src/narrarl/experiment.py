"""Run the hybrid decision loop and aggregate what happened.

Each step: observe -> RL suggestion -> arbiter verdict -> environment step on
the verdict's action -> optional TD update on the executed action -> trace.
The same Q-table is carried across all episodes of a run.

When the arbiter overrides a suggestion whose target cell was observed to be
a wall or obstacle, the suggested action also receives the (known) collision
update. Without it the blocked action keeps its initial value, stays the
argmax, and the agent can cycle between overrides indefinitely.
"""
from __future__ import annotations

import json
import logging
import os
import time
import uuid
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Literal, Sequence

import numpy as np

from . import env, rl
from .arbiter import DEFAULT_RETRIES, DEFAULT_WINDOW, Arbiter, ArbiterRequest, LlmArbiter, passthrough, scripted
from .env import GridWorld
from .errors import ConfigError, NarrarlError, ParseError
from .llm_client import ChatClient, ChatConfig, ChatFn
from .metrics import EpisodeRecord, Report, compute_metrics
from .narratives import NarrativeFramework, builtin, load_framework
from .rl import QTable, RlParams
from .trace import DecisionRecord, TraceSink

__all__ = [
    "ArbiterSpec",
    "EpisodeRecord",
    "ExperimentConfig",
    "GridSpec",
    "Report",
    "RunResult",
    "SweepFailure",
    "compute_metrics",
    "execute",
    "load_config",
    "report_path",
    "run_episode",
    "run_experiment",
    "sweep",
]

logger = logging.getLogger(__name__)

ArbiterKind = Literal["passthrough", "scripted", "llm"]


@dataclass(frozen=True)
class GridSpec:
    n: int | None = None
    density: float | None = None
    seed: int | None = None
    path: str | None = None

    def __post_init__(self) -> None:
        if self.path is None:
            for name in ("n", "density", "seed"):
                if getattr(self, name) is None:
                    raise ConfigError(f"grid.{name}", "required unless grid.path is given")

    def build(self) -> GridWorld:
        if self.path is not None:
            return env.load_grid(self.path)
        assert self.n is not None and self.density is not None and self.seed is not None
        return env.generate_grid(self.n, self.density, self.seed)

    def to_dict(self) -> dict[str, Any]:
        if self.path is not None:
            return {"path": self.path}
        return {"n": self.n, "density": self.density, "seed": self.seed}


@dataclass(frozen=True)
class ArbiterSpec:
    kind: ArbiterKind = "passthrough"
    narrative: str | None = None
    chat: ChatConfig | None = None
    retries: int = DEFAULT_RETRIES
    on_failure: Literal["abort", "fallback"] = "abort"
    window: int = DEFAULT_WINDOW
    include_goal: bool = True
    capture_prompts: bool = False

    def __post_init__(self) -> None:
        if self.kind not in ("passthrough", "scripted", "llm"):
            raise ConfigError("arbiter.kind", f"must be passthrough, scripted or llm, got {self.kind!r}")
        if self.kind == "llm":
            if not self.narrative:
                raise ConfigError("arbiter.narrative", "required when arbiter.kind is llm")
            if self.chat is None:
                raise ConfigError("arbiter.chat", "required when arbiter.kind is llm")
        if self.retries < 0:
            raise ConfigError("arbiter.retries", f"must be >= 0, got {self.retries}")
        if self.on_failure not in ("abort", "fallback"):
            raise ConfigError("arbiter.on_failure", f"must be abort or fallback, got {self.on_failure!r}")
        if self.window < 0:
            raise ConfigError("arbiter.window", f"must be >= 0, got {self.window}")

    def framework(self) -> NarrativeFramework | None:
        if self.narrative is None:
            return None
        if self.narrative.endswith(".json"):
            return load_framework(self.narrative)
        return builtin(self.narrative)

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "narrative": self.narrative,
            "chat": self.chat.to_dict() if self.chat else None,
            "retries": self.retries,
            "on_failure": self.on_failure,
            "window": self.window,
            "include_goal": self.include_goal,
            "capture_prompts": self.capture_prompts,
        }


@dataclass(frozen=True)
class ExperimentConfig:
    grid: GridSpec
    log_path: str
    rl: RlParams = field(default_factory=RlParams)
    arbiter: ArbiterSpec = field(default_factory=ArbiterSpec)
    run_seed: int = 0
    learn_during_run: bool = True
    learn_blocked_suggestions: bool = True
    qtable_path: str | None = None
    run_id: str | None = None

    def __post_init__(self) -> None:
        if self.rl.episodes < 1:
            raise ConfigError("rl.episodes", "an experiment needs at least one episode")
        if self.run_seed < 0:
            raise ConfigError("run_seed", f"must be >= 0, got {self.run_seed}")
        if not self.log_path:
            raise ConfigError("log_path", "required")
        parent = Path(self.log_path).resolve().parent
        if not parent.is_dir() or not os.access(parent, os.W_OK):
            raise ConfigError("log_path", f"directory {parent} is not writable")

    @classmethod
    def from_dict(cls, data: dict[str, Any], base_dir: str | os.PathLike[str] | None = None) -> ExperimentConfig:
        """Build a config from its JSON form. Relative paths resolve against ``base_dir``."""
        known = {
            "grid", "rl", "arbiter", "run_seed", "log_path",
            "learn_during_run", "learn_blocked_suggestions", "qtable", "run_id",
        }
        _reject_unknown(data, known, "")
        base = Path(base_dir) if base_dir is not None else Path.cwd()

        def path_of(value: Any) -> str:
            return str((base / str(value)))

        g = _section(data, "grid")
        _reject_unknown(g, {"n", "density", "seed", "path"}, "grid.")
        grid = GridSpec(
            n=_get(g, "grid.n", int),
            density=_get(g, "grid.density", float),
            seed=_get(g, "grid.seed", int),
            path=path_of(g["path"]) if g.get("path") is not None else None,
        )

        r = data.get("rl") or {}
        _reject_unknown(r, {"alpha", "gamma", "epsilon", "episodes", "max_steps"}, "rl.")
        rl_kwargs = {k: _get(r, f"rl.{k}", float) for k in ("alpha", "gamma", "epsilon") if k in r}
        rl_kwargs.update({k: _get(r, f"rl.{k}", int) for k in ("episodes", "max_steps") if k in r})
        params = RlParams(**rl_kwargs)

        a = data.get("arbiter") or {}
        _reject_unknown(
            a,
            {"kind", "narrative", "chat", "retries", "on_failure", "window", "include_goal", "capture_prompts"},
            "arbiter.",
        )
        narrative = a.get("narrative")
        if isinstance(narrative, str) and narrative.endswith(".json"):
            narrative = path_of(narrative)
        chat = a.get("chat")
        spec = ArbiterSpec(
            kind=a.get("kind", "passthrough"),
            narrative=narrative,
            chat=ChatConfig.from_dict(chat) if isinstance(chat, dict) else None,
            retries=_get(a, "arbiter.retries", int, DEFAULT_RETRIES),
            on_failure=a.get("on_failure", "abort"),
            window=_get(a, "arbiter.window", int, DEFAULT_WINDOW),
            include_goal=_get(a, "arbiter.include_goal", bool, True),
            capture_prompts=_get(a, "arbiter.capture_prompts", bool, False),
        )

        if "log_path" not in data:
            raise ConfigError("log_path", "required")
        return cls(
            grid=grid,
            log_path=path_of(data["log_path"]),
            rl=params,
            arbiter=spec,
            run_seed=_get(data, "run_seed", int, 0),
            learn_during_run=_get(data, "learn_during_run", bool, True),
            learn_blocked_suggestions=_get(data, "learn_blocked_suggestions", bool, True),
            qtable_path=path_of(data["qtable"]) if data.get("qtable") else None,
            run_id=data.get("run_id"),
        )

    def to_dict(self) -> dict[str, Any]:
        d = {
            "grid": self.grid.to_dict(),
            "rl": self.rl.to_dict(),
            "arbiter": self.arbiter.to_dict(),
            "run_seed": self.run_seed,
            "log_path": self.log_path,
            "learn_during_run": self.learn_during_run,
            "learn_blocked_suggestions": self.learn_blocked_suggestions,
        }
        if self.qtable_path:
            d["qtable"] = self.qtable_path
        return d


def _section(data: dict[str, Any], key: str) -> dict[str, Any]:
    value = data.get(key)
    if not isinstance(value, dict):
        raise ConfigError(key, "required object")
    return value


def _reject_unknown(data: Any, known: set[str], prefix: str) -> None:
    if not isinstance(data, dict):
        raise ConfigError(prefix.rstrip(".") or "<root>", "must be an object")
    extra = sorted(set(data) - known)
    if extra:
        raise ConfigError(prefix + extra[0], "unknown key")


def _get(d: dict[str, Any], name: str, typ: type, default: Any = None) -> Any:
    key = name.rsplit(".", 1)[-1]
    if key not in d or d[key] is None:
        return default
    value = d[key]
    if typ is bool:
        if not isinstance(value, bool):
            raise ConfigError(name, f"must be true or false, got {value!r}")
        return value
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(name, f"must be a number, got {value!r}")
    if typ is int and float(value) != int(value):
        raise ConfigError(name, f"must be an integer, got {value!r}")
    return typ(value)


def load_config(path: str | os.PathLike[str]) -> ExperimentConfig:
    p = Path(path)
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError("config", f"no such file: {p}") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", path=str(p), line=exc.lineno) from None
    if not isinstance(data, dict):
        raise ParseError("config must be a JSON object", path=str(p))
    return ExperimentConfig.from_dict(data, base_dir=p.resolve().parent)


def report_path(log_path: str | os.PathLike[str]) -> Path:
    p = Path(log_path)
    stem = p.name[: -len(p.suffix)] if p.suffix else p.name
    return p.with_name(stem + ".report.json")


def run_episode(
    grid: GridWorld,
    table: QTable,
    arbiter: Arbiter,
    params: RlParams,
    sink: TraceSink | None,
    *,
    rng: np.random.Generator,
    episode: int = 0,
    run_id: str = "",
    narrative_id: str | None = None,
    learn: bool = True,
    window: int = DEFAULT_WINDOW,
    capture_prompts: bool = False,
    learn_blocked: bool = True,
) -> EpisodeRecord:
    budget = params.step_budget(grid.n)
    pos = grid.start
    recent: deque[env.Position] = deque(maxlen=window)
    total = 0.0
    followed = fallbacks = latency = steps = 0
    success = False
    for t in range(budget):
        obs = env.observe(grid, pos)
        sug = rl.suggest(table, pos, params.epsilon, rng)
        verdict = arbiter(ArbiterRequest(episode, t, obs, sug, narrative_id, tuple(recent)))
        tr = env.step(grid, pos, verdict.action)
        if learn:
            rl.td_update(table, pos, verdict.action, tr, params.alpha, params.gamma)
            if learn_blocked and verdict.action is not sug.action and obs.label(sug.action).blocked:
                # the overridden move was seen to be blocked, so its outcome is known without executing it
                rl.td_update(table, pos, sug.action, env.bump(pos), params.alpha, params.gamma)
        latency_ms = int(round(verdict.latency_ms))
        if sink is not None:
            sink.write(
                DecisionRecord(
                    run_id=run_id,
                    episode=episode,
                    step=t,
                    position=pos,
                    q_values=sug.q_values,
                    suggested=sug.action,
                    exploratory=sug.exploratory,
                    observation=obs.to_dict(),
                    narrative_id=narrative_id,
                    chosen=verdict.action,
                    followed=verdict.followed_suggestion,
                    fallback=verdict.fallback,
                    rationale=verdict.rationale,
                    latency_ms=latency_ms,
                    reward=tr.reward,
                    next_position=tr.next,
                    terminal=tr.terminal,
                    prompt=verdict.prompt if capture_prompts else None,
                )
            )
        total += tr.reward
        followed += verdict.followed_suggestion
        fallbacks += verdict.fallback
        latency += latency_ms
        steps = t + 1
        recent.append(pos)
        pos = tr.next
        if tr.terminal:
            success = True
            break
    if sink is not None:
        sink.end_episode()
    return EpisodeRecord(episode, success, steps, total, steps, followed, fallbacks, latency)


@dataclass
class RunResult:
    report: Report
    table: QTable
    grid: GridWorld


def build_arbiter(spec: ArbiterSpec, client: ChatFn | None = None) -> Arbiter:
    if spec.kind == "passthrough":
        return passthrough
    if spec.kind == "scripted":
        return scripted
    framework = spec.framework()
    assert framework is not None
    if client is None:
        assert spec.chat is not None
        client = ChatClient(spec.chat)
    return LlmArbiter(
        framework, client, retries=spec.retries, include_goal=spec.include_goal, on_failure=spec.on_failure
    )


def execute(config: ExperimentConfig, *, client: ChatFn | None = None) -> RunResult:
    """Run one experiment and return its report together with the final Q-table."""
    t0 = time.perf_counter()
    grid = config.grid.build()
    q_seed, action_rng = rl.run_streams(config.run_seed)
    if config.qtable_path:
        table = rl.load_qtable(config.qtable_path)
        if table.n != grid.n:
            raise ConfigError("qtable", f"q-table is {table.n}x{table.n} but grid is {grid.n}x{grid.n}")
    else:
        table = rl.init_qtable(grid.n, q_seed)
    arbiter = build_arbiter(config.arbiter, client)
    narrative_id = config.arbiter.narrative if config.arbiter.kind == "llm" else None
    if narrative_id is not None and narrative_id.endswith(".json"):
        narrative_id = config.arbiter.framework().id  # type: ignore[union-attr]
    run_id = config.run_id or uuid.uuid4().hex

    records = []
    with TraceSink(config.log_path) as sink:
        for ep in range(config.rl.episodes):
            records.append(
                run_episode(
                    grid,
                    table,
                    arbiter,
                    config.rl,
                    sink,
                    rng=action_rng,
                    episode=ep,
                    run_id=run_id,
                    narrative_id=narrative_id,
                    learn=config.learn_during_run,
                    window=config.arbiter.window,
                    capture_prompts=config.arbiter.capture_prompts,
                    learn_blocked=config.learn_blocked_suggestions,
                )
            )
    metrics = compute_metrics(records)
    report = Report(
        success_rate=metrics.success_rate,
        avg_steps_successful=metrics.avg_steps_successful,
        adherence_rate=metrics.adherence_rate,
        fallback_rate=metrics.fallback_rate,
        llm_latency_ms_total=metrics.llm_latency_ms_total,
        per_episode=metrics.per_episode,
        total_wall_clock=time.perf_counter() - t0,
        config=config.to_dict(),
    )
    with open(report_path(config.log_path), "w", encoding="utf-8") as f:
        json.dump(report.to_dict(), f, indent=2)
        f.write("\n")
    logger.info(
        "run %s: success %.2f, adherence %.2f, %.3fs",
        run_id, report.success_rate, report.adherence_rate, report.total_wall_clock,
    )
    return RunResult(report, table, grid)


def run_experiment(config: ExperimentConfig, *, client: ChatFn | None = None) -> Report:
    return execute(config, client=client).report


@dataclass(frozen=True)
class SweepFailure:
    index: int
    log_path: str
    error: str


def sweep(
    configs: Sequence[ExperimentConfig],
    parallelism: int = 1,
    *,
    client_factory: Callable[[ExperimentConfig], ChatFn | None] | None = None,
) -> list[Report | SweepFailure]:
    """Run every config; output order matches input order.

    A failing config yields a :class:`SweepFailure` in its slot rather than
    stopping the other runs.
    """
    if not configs:
        raise ConfigError("configs", "at least one config is required")
    if parallelism < 1:
        raise ConfigError("parallel", f"must be >= 1, got {parallelism}")
    seen: dict[str, int] = {}
    for i, cfg in enumerate(configs):
        key = str(Path(cfg.log_path).resolve())
        if key in seen:
            raise ConfigError("log_path", f"configs {seen[key]} and {i} both write {key}")
        seen[key] = i

    def one(item: tuple[int, ExperimentConfig]) -> Report | SweepFailure:
        i, cfg = item
        try:
            client = client_factory(cfg) if client_factory else None
            return run_experiment(cfg, client=client)
        except (NarrarlError, OSError) as exc:
            logger.error("sweep config %d (%s) failed: %s", i, cfg.log_path, exc)
            return SweepFailure(i, cfg.log_path, f"{type(exc).__name__}: {exc}")

    items = list(enumerate(configs))
    if parallelism == 1:
        return [one(it) for it in items]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(one, items))
