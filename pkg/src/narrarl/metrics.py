"""Per-episode records and the aggregate report built from them."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Sequence

from .errors import EmptyInput

# fields that depend on timing and are excluded from determinism comparisons
VOLATILE_REPORT_FIELDS = ("total_wall_clock", "llm_latency_ms_total")


@dataclass(frozen=True)
class EpisodeRecord:
    episode: int
    success: bool
    steps: int
    return_: float
    decisions: int
    followed: int
    fallbacks: int
    llm_latency_ms_total: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "episode": self.episode,
            "success": self.success,
            "steps": self.steps,
            "return": self.return_,
            "decisions": self.decisions,
            "followed": self.followed,
            "fallbacks": self.fallbacks,
            "llm_latency_ms_total": self.llm_latency_ms_total,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> EpisodeRecord:
        return cls(
            d["episode"], d["success"], d["steps"], d["return"],
            d["decisions"], d["followed"], d["fallbacks"], d["llm_latency_ms_total"],
        )


@dataclass(frozen=True)
class Report:
    success_rate: float
    avg_steps_successful: float | None
    adherence_rate: float
    fallback_rate: float
    llm_latency_ms_total: int
    per_episode: tuple[EpisodeRecord, ...]
    total_wall_clock: float = 0.0
    config: dict[str, Any] | None = field(default=None, compare=False)

    def to_dict(self) -> dict[str, Any]:
        return {
            "success_rate": self.success_rate,
            "avg_steps_successful": self.avg_steps_successful,
            "adherence_rate": self.adherence_rate,
            "fallback_rate": self.fallback_rate,
            "llm_latency_ms_total": self.llm_latency_ms_total,
            "total_wall_clock": self.total_wall_clock,
            "per_episode": [r.to_dict() for r in self.per_episode],
            "config": self.config,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> Report:
        return cls(
            success_rate=d["success_rate"],
            avg_steps_successful=d["avg_steps_successful"],
            adherence_rate=d["adherence_rate"],
            fallback_rate=d["fallback_rate"],
            llm_latency_ms_total=d["llm_latency_ms_total"],
            per_episode=tuple(EpisodeRecord.from_dict(r) for r in d["per_episode"]),
            total_wall_clock=d.get("total_wall_clock", 0.0),
            config=d.get("config"),
        )

    def without_timing(self) -> Report:
        """Copy with wall-clock and latency zeroed, for replay comparisons."""
        return replace(
            self,
            total_wall_clock=0.0,
            llm_latency_ms_total=0,
            per_episode=tuple(replace(r, llm_latency_ms_total=0) for r in self.per_episode),
        )


def compute_metrics(records: Sequence[EpisodeRecord]) -> Report:
    if not records:
        raise EmptyInput("no episode records")
    successes = [r for r in records if r.success]
    decisions = sum(r.decisions for r in records)
    return Report(
        success_rate=len(successes) / len(records),
        avg_steps_successful=(
            sum(r.steps for r in successes) / len(successes) if successes else None
        ),
        adherence_rate=sum(r.followed for r in records) / decisions if decisions else 1.0,
        fallback_rate=sum(r.fallbacks for r in records) / decisions if decisions else 0.0,
        llm_latency_ms_total=sum(r.llm_latency_ms_total for r in records),
        per_episode=tuple(records),
    )
