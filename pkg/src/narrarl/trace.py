"""JSONL decision traces: one flat object per executed step.

Keys are written in the order of :data:`RECORD_KEYS`. ``run_id`` and
``latency_ms`` vary between otherwise identical runs; everything else is
reproducible from the run configuration.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from itertools import groupby
from typing import IO, Any

from .env import Action, Position
from .errors import InvariantViolation, ParseError
from .metrics import EpisodeRecord, Report, compute_metrics

RECORD_KEYS = (
    "run_id",
    "episode",
    "step",
    "position",
    "q_values",
    "suggested",
    "exploratory",
    "observation",
    "narrative_id",
    "chosen",
    "followed",
    "fallback",
    "rationale",
    "latency_ms",
    "reward",
    "next_position",
    "terminal",
)
VOLATILE_FIELDS = ("run_id", "latency_ms")
_OBS_KEYS = ("north", "south", "east", "west", "goal_delta")
_LABELS = {"empty", "obstacle", "wall", "goal"}


@dataclass(frozen=True)
class DecisionRecord:
    run_id: str
    episode: int
    step: int
    position: Position
    q_values: tuple[float, float, float, float]
    suggested: Action
    exploratory: bool
    observation: dict[str, Any]
    narrative_id: str | None
    chosen: Action
    followed: bool
    fallback: bool
    rationale: str
    latency_ms: int
    reward: float
    next_position: Position
    terminal: bool  # the step reached the goal
    prompt: list[dict[str, str]] | None = None

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {
            "run_id": self.run_id,
            "episode": self.episode,
            "step": self.step,
            "position": list(self.position),
            "q_values": list(self.q_values),
            "suggested": self.suggested.name,
            "exploratory": self.exploratory,
            "observation": self.observation,
            "narrative_id": self.narrative_id,
            "chosen": self.chosen.name,
            "followed": self.followed,
            "fallback": self.fallback,
            "rationale": self.rationale,
            "latency_ms": self.latency_ms,
            "reward": self.reward,
            "next_position": list(self.next_position),
            "terminal": self.terminal,
        }
        if self.prompt is not None:
            d["prompt"] = self.prompt
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False)


class TraceSink:
    """Single-owner JSONL writer. Flushes on :meth:`end_episode` and close."""

    def __init__(self, path: str | os.PathLike[str], mode: str = "w") -> None:
        self.path = os.fspath(path)
        try:
            self._fh: IO[str] = open(self.path, mode, encoding="utf-8")
        except OSError as exc:
            raise OSError(f"cannot open trace log {self.path}: {exc.strerror}") from exc
        self.count = 0

    def write(self, record: DecisionRecord) -> None:
        try:
            self._fh.write(record.to_json() + "\n")
        except OSError as exc:
            raise OSError(f"cannot write trace log {self.path}: {exc.strerror}") from exc
        self.count += 1

    def end_episode(self) -> None:
        self._fh.flush()

    def close(self) -> None:
        if not self._fh.closed:
            self._fh.close()

    def __enter__(self) -> TraceSink:
        return self

    def __exit__(self, *exc: object) -> None:
        self.close()


def append(sink: TraceSink, record: DecisionRecord) -> int:
    """Write one record; returns the number of records written so far."""
    sink.write(record)
    return sink.count


def _as_pos(value: Any, key: str, line: int, path: str) -> Position:
    if (
        not isinstance(value, list)
        or len(value) != 2
        or not all(isinstance(v, int) and not isinstance(v, bool) for v in value)
    ):
        raise ParseError(f"{key!r} must be [x, y] integers", path=path, line=line)
    return Position(*value)


def _as_action(value: Any, key: str, line: int, path: str) -> Action:
    try:
        return Action[value]
    except (KeyError, TypeError):
        raise ParseError(f"{key!r} is not an action: {value!r}", path=path, line=line) from None


def _expect(cond: bool, key: str, what: str, line: int, path: str) -> None:
    if not cond:
        raise ParseError(f"{key!r} must be {what}", path=path, line=line)


def parse_record(obj: Any, *, line: int = 0, path: str = "<trace>") -> DecisionRecord:
    if not isinstance(obj, dict):
        raise ParseError("line is not a JSON object", path=path, line=line)
    for key in RECORD_KEYS:
        if key not in obj:
            raise ParseError(f"missing key {key!r}", path=path, line=line)

    def is_int(v: Any) -> bool:
        return isinstance(v, int) and not isinstance(v, bool)

    def is_num(v: Any) -> bool:
        return isinstance(v, (int, float)) and not isinstance(v, bool)

    _expect(isinstance(obj["run_id"], str), "run_id", "a string", line, path)
    for key in ("episode", "step", "latency_ms"):
        _expect(is_int(obj[key]), key, "an integer", line, path)
    for key in ("exploratory", "followed", "fallback", "terminal"):
        _expect(isinstance(obj[key], bool), key, "a boolean", line, path)
    _expect(isinstance(obj["rationale"], str), "rationale", "a string", line, path)
    _expect(is_num(obj["reward"]), "reward", "a number", line, path)
    _expect(
        obj["narrative_id"] is None or isinstance(obj["narrative_id"], str),
        "narrative_id", "a string or null", line, path,
    )
    q = obj["q_values"]
    _expect(isinstance(q, list) and len(q) == 4 and all(is_num(v) for v in q),
            "q_values", "a list of 4 numbers", line, path)
    obs = obj["observation"]
    _expect(
        isinstance(obs, dict)
        and all(k in obs for k in _OBS_KEYS)
        and all(obs[k] in _LABELS for k in _OBS_KEYS[:4])
        and isinstance(obs["goal_delta"], list)
        and len(obs["goal_delta"]) == 2,
        "observation", "four direction labels plus goal_delta", line, path,
    )
    return DecisionRecord(
        run_id=obj["run_id"],
        episode=obj["episode"],
        step=obj["step"],
        position=_as_pos(obj["position"], "position", line, path),
        q_values=tuple(float(v) for v in q),  # type: ignore[arg-type]
        suggested=_as_action(obj["suggested"], "suggested", line, path),
        exploratory=obj["exploratory"],
        observation=obs,
        narrative_id=obj["narrative_id"],
        chosen=_as_action(obj["chosen"], "chosen", line, path),
        followed=obj["followed"],
        fallback=obj["fallback"],
        rationale=obj["rationale"],
        latency_ms=obj["latency_ms"],
        reward=obj["reward"],
        next_position=_as_pos(obj["next_position"], "next_position", line, path),
        terminal=obj["terminal"],
        prompt=obj.get("prompt"),
    )


def check_records(records: list[DecisionRecord]) -> None:
    """Validate per-record and cross-record invariants; raises InvariantViolation."""
    prev: DecisionRecord | None = None
    for i, r in enumerate(records):
        if r.followed != (r.chosen is r.suggested):
            raise InvariantViolation(
                f"followed={r.followed} but chosen={r.chosen.name}, suggested={r.suggested.name}",
                record=i, field="followed",
            )
        if r.fallback and not r.followed:
            raise InvariantViolation("fallback record must follow the suggestion", record=i, field="fallback")
        if r.latency_ms < 0:
            raise InvariantViolation("negative latency", record=i, field="latency_ms")
        if not all(math.isfinite(v) for v in r.q_values):
            raise InvariantViolation("non-finite q-value", record=i, field="q_values")
        new_episode = prev is None or r.episode != prev.episode
        if new_episode:
            if prev is not None and r.episode < prev.episode:
                raise InvariantViolation("episode indices go backwards", record=i, field="episode")
            if r.step != 0:
                raise InvariantViolation(f"episode starts at step {r.step}, expected 0", record=i, field="step")
        else:
            assert prev is not None
            if prev.terminal:
                raise InvariantViolation("record follows a terminal step", record=i, field="episode")
            if r.step != prev.step + 1:
                raise InvariantViolation(
                    f"step {r.step} after {prev.step} is not contiguous", record=i, field="step"
                )
        prev = r


def read_log(path: str | os.PathLike[str]) -> list[DecisionRecord]:
    path = os.fspath(path)
    records = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", path=path, line=lineno) from None
            records.append(parse_record(obj, line=lineno, path=path))
    check_records(records)
    return records


def episode_records(records: list[DecisionRecord]) -> list[EpisodeRecord]:
    """Rebuild per-episode totals from flat decision records."""
    out = []
    for ep, group in groupby(records, key=lambda r: r.episode):
        steps = list(group)
        total = 0.0
        for r in steps:
            total += r.reward
        out.append(
            EpisodeRecord(
                episode=ep,
                success=steps[-1].terminal,
                steps=len(steps),
                return_=total,
                decisions=len(steps),
                followed=sum(r.followed for r in steps),
                fallbacks=sum(r.fallback for r in steps),
                llm_latency_ms_total=sum(r.latency_ms for r in steps),
            )
        )
    return out


def report_from_log(path: str | os.PathLike[str]) -> Report:
    return compute_metrics(episode_records(read_log(path)))


def masked_lines(path: str | os.PathLike[str]) -> list[str]:
    """Log lines with volatile fields blanked, for byte-level replay comparison."""
    out = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            obj = json.loads(line)
            for key in VOLATILE_FIELDS:
                obj[key] = None
            out.append(json.dumps(obj, ensure_ascii=False))
    return out
