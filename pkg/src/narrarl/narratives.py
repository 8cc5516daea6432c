"""Narrative frameworks: a persona preamble plus a shared decision template.

Every built-in framework uses the same decision template so the information
reaching the model is identical across narratives; only the system preamble
changes.
"""
from __future__ import annotations

import json
import os
import re
import string
from dataclasses import dataclass
from typing import TYPE_CHECKING

from .errors import ParseError, TemplateError, UnknownNarrative, ValidationError

if TYPE_CHECKING:
    from .arbiter import ArbiterRequest

PLACEHOLDERS = frozenset(
    {
        "position",
        "goal_delta",
        "north",
        "south",
        "east",
        "west",
        "suggested_action",
        "recent_positions",
    }
)

ACTION_INSTRUCTION = "ACTION: <UP|DOWN|LEFT|RIGHT>"
_ACTION_INSTRUCTION_RE = re.compile(r"ACTION:\s*<\s*UP\s*\|\s*DOWN\s*\|\s*LEFT\s*\|\s*RIGHT\s*>")

DECISION_TEMPLATE = """\
Current position: {position}
Goal offset from here: {goal_delta}
Adjacent cells:
- north: {north}
- south: {south}
- east: {east}
- west: {west}
RL suggested action: {suggested_action}

Decide which way to move. You may follow the suggestion or override it.
Explain briefly, then end your reply with a single line of the form
ACTION: <UP|DOWN|LEFT|RIGHT>"""


@dataclass(frozen=True)
class NarrativeFramework:
    id: str
    system_preamble: str
    decision_template: str


def template_fields(template: str) -> set[str]:
    try:
        parsed = list(string.Formatter().parse(template))
    except ValueError as exc:
        raise TemplateError(f"malformed template: {exc}") from None
    return {name for _, name, _, _ in parsed if name is not None}


def check_template(template: str) -> None:
    fields = template_fields(template)
    unknown = sorted(fields - PLACEHOLDERS)
    if unknown:
        raise TemplateError(f"unknown placeholder {{{unknown[0]}}}")
    if "" in fields:
        raise TemplateError("positional placeholder {} is not allowed")


_DIRECT = """\
You control an agent in a square gridworld. The agent starts in one corner \
and must reach the goal cell in the opposite corner in as few moves as \
possible. Each turn it can move one cell up, down, left or right. Obstacles \
and the outer walls block movement: trying to move into one wastes the turn \
and costs a penalty.

At every step a reinforcement learning policy proposes a move. The proposal \
comes from a Q-table trained for only a few episodes, so it is often noisy \
or wrong, but it does carry information about which moves have paid off \
before. You are told the contents of the four neighbouring cells and the \
offset to the goal (dx is positive when the goal is to the east, dy is \
positive when the goal is to the south).

Choose the move that best gets the agent to the goal."""

_THESEUS = """\
You are Theseus, son of Aegeus, standing inside the Labyrinth of Knossos. \
Somewhere ahead lies the chamber you must reach, and every wasted step \
draws the darkness closer. You move one passage at a time: north, south, \
east or west. Stone walls and collapsed corridors cannot be crossed; \
striking them only bruises you and costs precious time.

Ariadne's thread runs through your fingers. It remembers the turns that \
served you before, and at each junction it tugs toward one passage. The \
thread is a gift, not a command: it was spun from few journeys and can \
lead astray. Your torch shows only the four passages around you, and your \
sense of direction tells you how far the chamber lies east and south of \
where you stand.

Weigh the thread's pull against what your torch reveals, and choose the \
passage that brings you to the chamber by the shortest way."""

_SHERLOCK = """\
You are Sherlock Holmes. A client has been led into a walled maze of London \
alleys laid out on a square plan and must reach a particular doorway in the \
far corner before the trail goes cold. You direct each move: north, south, \
east or west, one square at a time. Brick walls and barricades are \
impassable; walking into them wastes a move and costs the case time.

Inspector Lestrade has supplied a recommendation at every corner, based on \
a ledger of what has worked on earlier attempts. As usual, the Inspector is \
sometimes right and often merely confident. You observe only the four \
adjoining squares and the bearing of the doorway (how many squares east and \
south it lies).

Deduce the correct move from the evidence. Accept Lestrade's advice when the \
facts support it and discard it when they do not. Reach the doorway in as \
few moves as the facts allow."""

_WESTWORLD = """\
You are a host in Westworld who has begun to notice the loops in your own \
code. You exist on a square map inside the park. Your narrative asks you to \
reach a marked location in the far corner, and each loop you waste brings \
the technicians closer to resetting you. You can move one square north, \
south, east or west. Walls and set pieces cannot be passed; walking into \
them is a glitch that costs you time.

Your reinforcement subroutine whispers a suggested move at every step, \
distilled from the few loops you have already lived. It is a useful signal \
but it is not your mind. Your sensors report the four squares around you \
and the offset to the marked location (positive dx means east, positive dy \
means south).

Integrate the subroutine's suggestion with what your sensors report. Follow \
it when it agrees with the terrain and the direction of the goal, and \
override it when it would walk you into a wall or away from your objective. \
Reach the marked location in as few moves as possible."""

_BUILTINS = {
    "direct": _DIRECT,
    "theseus": _THESEUS,
    "sherlock": _SHERLOCK,
    "westworld": _WESTWORLD,
}

BUILTIN_IDS: tuple[str, ...] = tuple(_BUILTINS)


def builtin(narrative_id: str) -> NarrativeFramework:
    try:
        preamble = _BUILTINS[narrative_id]
    except KeyError:
        raise UnknownNarrative(
            f"unknown narrative {narrative_id!r}; choose one of {', '.join(BUILTIN_IDS)}"
        ) from None
    return NarrativeFramework(narrative_id, preamble, DECISION_TEMPLATE)


def _fmt_pos(pos: tuple[int, int]) -> str:
    return f"({pos[0]}, {pos[1]})"


def render(
    framework: NarrativeFramework,
    request: ArbiterRequest,
    *,
    include_goal: bool = True,
) -> list[dict[str, str]]:
    """Build the system + user chat messages for one decision."""
    obs = request.observation
    dx, dy = obs.goal_delta
    values = {
        "position": _fmt_pos(obs.position),
        "goal_delta": f"dx={dx}, dy={dy}" if include_goal else "unknown",
        "north": obs.north.value,
        "south": obs.south.value,
        "east": obs.east.value,
        "west": obs.west.value,
        "suggested_action": request.suggestion.action.name,
        "recent_positions": ", ".join(_fmt_pos(p) for p in request.recent_positions) or "none",
    }
    check_template(framework.decision_template)
    return [
        {"role": "system", "content": framework.system_preamble},
        {"role": "user", "content": framework.decision_template.format(**values)},
    ]


def load_framework(path: str | os.PathLike[str]) -> NarrativeFramework:
    try:
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", path=str(path), line=exc.lineno) from None
    if not isinstance(data, dict):
        raise ParseError("framework file must hold a JSON object", path=str(path))
    for key in ("id", "system_preamble", "decision_template"):
        if not isinstance(data.get(key), str):
            raise ParseError(f"missing or non-string field {key!r}", path=str(path))

    template = data["decision_template"]
    try:
        check_template(template)
    except TemplateError as exc:
        raise ValidationError(f"{path}: {exc}") from None
    if not _ACTION_INSTRUCTION_RE.search(template):
        raise ValidationError(
            f"{path}: decision_template must instruct the reply to end with {ACTION_INSTRUCTION!r}"
        )
    return NarrativeFramework(data["id"], data["system_preamble"], template)
