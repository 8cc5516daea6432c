"""ASCII rendering of a grid and an agent trajectory."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .env import GridWorld, Position
from .errors import OutOfBounds
from .trace import DecisionRecord

LEGEND = "S=start G=goal #=obstacle .=empty *=path A=agent"


@dataclass(frozen=True)
class RenderedFrame:
    rows: tuple[str, ...]
    legend: str = LEGEND

    @property
    def text(self) -> str:
        return "\n".join(self.rows + (self.legend,)) + "\n"

    def __str__(self) -> str:
        return self.text


def render_frame(grid: GridWorld, trajectory: Sequence[Position]) -> RenderedFrame:
    """Draw ``grid`` with ``trajectory`` overlaid.

    Glyph precedence, highest first: A (last trajectory cell), S/G, * (visited), #, '.'.
    """
    for p in trajectory:
        if not grid.in_bounds(Position(*p)):
            raise OutOfBounds(f"trajectory position {tuple(p)} outside {grid.n}x{grid.n} grid")
    visited = {Position(*p) for p in trajectory}
    agent = Position(*trajectory[-1]) if trajectory else None

    def glyph(p: Position) -> str:
        if p == agent:
            return "A"
        if p == grid.start:
            return "S"
        if p == grid.goal:
            return "G"
        if p in visited:
            return "*"
        if p in grid.obstacles:
            return "#"
        return "."

    rows = tuple(
        "".join(glyph(Position(x, y)) for x in range(grid.n)) for y in range(grid.n)
    )
    return RenderedFrame(rows)


def episode_trajectory(records: Iterable[DecisionRecord], episode: int) -> list[Position]:
    steps = [r for r in records if r.episode == episode]
    if not steps:
        return []
    return [steps[0].position] + [r.next_position for r in steps]
