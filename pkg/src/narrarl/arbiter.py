"""Arbiters decide which action is actually executed at each step.

An arbiter is any callable ``arbiter(request) -> Verdict``. Three kinds ship
here: ``passthrough`` (the RL-only control), ``scripted`` (a deterministic
obstacle-avoiding rule, useful as an offline stand-in for a model) and
:class:`LlmArbiter`, which asks a chat model through a narrative framework.
"""
from __future__ import annotations

import re
import time
from dataclasses import dataclass, field
from typing import Callable, Literal

from .env import ACTIONS, Action, Observation, Position
from .errors import LlmError, MalformedResponse
from .llm_client import ChatFn, Message
from .narratives import ACTION_INSTRUCTION, NarrativeFramework, render
from .rl import Suggestion

DEFAULT_WINDOW = 5
DEFAULT_RETRIES = 2

_ACTION_LINE = re.compile(r"^\s*action\s*:\s*(up|down|left|right)\s*$", re.IGNORECASE)

CORRECTION = (
    "Your previous reply could not be read. Reply again and finish with one line "
    f"of exactly the form {ACTION_INSTRUCTION}"
)


@dataclass(frozen=True)
class ArbiterRequest:
    episode: int
    step: int
    observation: Observation
    suggestion: Suggestion
    narrative_id: str | None = None
    recent_positions: tuple[Position, ...] = ()


@dataclass(frozen=True)
class Verdict:
    action: Action
    followed_suggestion: bool
    rationale: str = ""
    fallback: bool = False
    latency_ms: float = 0.0
    attempts: int = 0
    prompt: list[Message] | None = field(default=None, compare=False)


Arbiter = Callable[[ArbiterRequest], Verdict]


def passthrough(request: ArbiterRequest) -> Verdict:
    t0 = time.perf_counter()
    action = request.suggestion.action
    return Verdict(action, True, latency_ms=(time.perf_counter() - t0) * 1000.0)


def scripted(request: ArbiterRequest) -> Verdict:
    """Keep the suggestion unless it walks into a wall or obstacle.

    A blocked suggestion is replaced by the open move that leaves the agent
    closest (Manhattan) to the goal, earliest canonical action on ties.
    """
    t0 = time.perf_counter()
    obs = request.observation
    suggested = request.suggestion.action
    action = suggested
    if obs.label(suggested).blocked:
        open_moves = [a for a in ACTIONS if not obs.label(a).blocked]
        if open_moves:
            dx, dy = obs.goal_delta
            action = min(
                open_moves,
                key=lambda a: abs(dx - a.delta[0]) + abs(dy - a.delta[1]),
            )
    return Verdict(action, action is suggested, latency_ms=(time.perf_counter() - t0) * 1000.0)


def parse_action(text: str) -> Action:
    """Return the action named on the last ``ACTION: <dir>`` line of ``text``."""
    for line in reversed(text.splitlines()):
        m = _ACTION_LINE.match(line)
        if m:
            return Action[m.group(1).upper()]
    raise MalformedResponse(f"no 'ACTION: <dir>' line in response: {text[:120]!r}")


def llm_decide(
    request: ArbiterRequest,
    framework: NarrativeFramework,
    client: ChatFn,
    retries: int = DEFAULT_RETRIES,
    *,
    include_goal: bool = True,
) -> Verdict:
    """Ask the model for an action, retrying unreadable replies.

    After ``retries`` failed re-asks the RL suggestion is executed and the
    verdict is flagged ``fallback``. Transport errors from the client are
    not caught here.
    """
    if retries < 0:
        raise ValueError(f"retries must be >= 0, got {retries}")
    messages = render(framework, request, include_goal=include_goal)
    suggested = request.suggestion.action
    elapsed = 0.0
    text = ""
    for attempt in range(retries + 1):
        t0 = time.perf_counter()
        try:
            text = client(messages)
        finally:
            elapsed += time.perf_counter() - t0
        try:
            action = parse_action(text)
        except MalformedResponse:
            messages = messages + [{"role": "user", "content": CORRECTION}]
            continue
        return Verdict(
            action,
            action is suggested,
            rationale=text,
            latency_ms=elapsed * 1000.0,
            attempts=attempt + 1,
            prompt=messages,
        )
    return Verdict(
        suggested,
        True,
        rationale=text,
        fallback=True,
        latency_ms=elapsed * 1000.0,
        attempts=retries + 1,
        prompt=messages,
    )


@dataclass
class LlmArbiter:
    """Callable arbiter bound to one framework and chat client.

    ``on_failure="fallback"`` turns irrecoverable client errors into a
    fallback verdict instead of aborting the run.
    """

    framework: NarrativeFramework
    client: ChatFn
    retries: int = DEFAULT_RETRIES
    include_goal: bool = True
    on_failure: Literal["abort", "fallback"] = "abort"

    def __call__(self, request: ArbiterRequest) -> Verdict:
        t0 = time.perf_counter()
        try:
            return llm_decide(
                request, self.framework, self.client, self.retries, include_goal=self.include_goal
            )
        except LlmError as exc:
            if self.on_failure != "fallback":
                raise
            return Verdict(
                request.suggestion.action,
                True,
                rationale=f"[client error] {exc}",
                fallback=True,
                latency_ms=(time.perf_counter() - t0) * 1000.0,
            )
