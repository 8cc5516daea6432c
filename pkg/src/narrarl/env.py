"""Square gridworlds with random obstacles.

Coordinates put the origin at the top-left corner with ``y`` growing
downward, so a grid prints in the same order as it is indexed. The agent
starts at ``(0, 0)`` and the goal sits in the opposite corner.

Rewards:
- reaching the goal: +1.0 (episode ends)
- moving into an empty cell: -0.01
- bumping into a wall or obstacle: -0.1, agent stays put
"""
from __future__ import annotations

import json
import os
from collections import deque
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from enum import Enum
from typing import Any, NamedTuple

import numpy as np

from .errors import ParseError, Unsatisfiable, ValidationError

GOAL_REWARD = 1.0
STEP_REWARD = -0.01
COLLISION_REWARD = -0.1

MAX_ATTEMPTS = 1000
MIN_SIZE, MAX_SIZE = 2, 64


class Position(NamedTuple):
    x: int
    y: int


class Action(Enum):
    """Moves in canonical order; the order is used for tie-breaks and serialization."""

    UP = 0
    DOWN = 1
    LEFT = 2
    RIGHT = 3

    @property
    def delta(self) -> tuple[int, int]:
        return _DELTAS[self]

    @property
    def opposite(self) -> Action:
        return _OPPOSITES[self]

    @classmethod
    def parse(cls, name: str) -> Action:
        try:
            return cls[name.strip().upper()]
        except KeyError:
            raise ValueError(f"not an action: {name!r}") from None


ACTIONS: tuple[Action, ...] = tuple(Action)

_DELTAS = {
    Action.UP: (0, -1),
    Action.DOWN: (0, 1),
    Action.LEFT: (-1, 0),
    Action.RIGHT: (1, 0),
}
_OPPOSITES = {
    Action.UP: Action.DOWN,
    Action.DOWN: Action.UP,
    Action.LEFT: Action.RIGHT,
    Action.RIGHT: Action.LEFT,
}


class Cell(str, Enum):
    EMPTY = "empty"
    OBSTACLE = "obstacle"
    WALL = "wall"
    GOAL = "goal"

    @property
    def blocked(self) -> bool:
        return self in (Cell.OBSTACLE, Cell.WALL)


# compass direction -> action that moves that way
DIRECTIONS: dict[str, Action] = {
    "north": Action.UP,
    "south": Action.DOWN,
    "east": Action.RIGHT,
    "west": Action.LEFT,
}


def moved(pos: Position, action: Action) -> Position:
    dx, dy = action.delta
    return Position(pos.x + dx, pos.y + dy)


@dataclass(frozen=True)
class GridWorld:
    n: int
    obstacles: frozenset[Position]
    start: Position
    goal: Position
    seed: int
    density: float

    def in_bounds(self, pos: Position) -> bool:
        return 0 <= pos.x < self.n and 0 <= pos.y < self.n

    def cell(self, pos: Position) -> Cell:
        if not self.in_bounds(pos):
            return Cell.WALL
        if pos in self.obstacles:
            return Cell.OBSTACLE
        if pos == self.goal:
            return Cell.GOAL
        return Cell.EMPTY

    def free_cells(self) -> list[Position]:
        return [
            Position(x, y)
            for y in range(self.n)
            for x in range(self.n)
            if Position(x, y) not in self.obstacles
        ]

    def to_dict(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "density": self.density,
            "seed": self.seed,
            "start": list(self.start),
            "goal": list(self.goal),
            "obstacles": [list(p) for p in sorted(self.obstacles, key=lambda p: (p.y, p.x))],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> GridWorld:
        try:
            grid = cls(
                n=int(data["n"]),
                obstacles=frozenset(_pos(p) for p in data["obstacles"]),
                start=_pos(data["start"]),
                goal=_pos(data["goal"]),
                seed=int(data["seed"]),
                density=float(data["density"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad grid object: {exc!r}") from None
        grid.validate()
        return grid

    def validate(self) -> None:
        """Check the static layout invariants (bounds, start/goal placement, solvability)."""
        for name, p in (("start", self.start), ("goal", self.goal)):
            if not self.in_bounds(p):
                raise ValidationError(f"{name} {tuple(p)} outside {self.n}x{self.n} grid")
            if p in self.obstacles:
                raise ValidationError(f"{name} {tuple(p)} is an obstacle")
        if self.start == self.goal:
            raise ValidationError("start and goal coincide")
        for p in self.obstacles:
            if not self.in_bounds(p):
                raise ValidationError(f"obstacle {tuple(p)} outside grid")
        if shortest_path_len(self) is None:
            raise ValidationError("goal is unreachable from start")


def _pos(value: Any) -> Position:
    x, y = value
    return Position(int(x), int(y))


def obstacle_count(n: int, density: float) -> int:
    # half-up rounding on the decimal value, so 0.3 * 25 -> 8 regardless of float noise
    exact = Decimal(repr(float(density))) * (n * n)
    return int(exact.quantize(Decimal(1), rounding=ROUND_HALF_UP))


def generate_grid(n: int, density: float, seed: int) -> GridWorld:
    """Sample a solvable ``n x n`` grid with ``round(density * n**2)`` obstacles.

    Obstacles are drawn uniformly without replacement from every cell except
    the start and goal. Unsolvable layouts are discarded and redrawn from a
    sub-seed derived from ``(seed, attempt)``, so the result depends only on
    the three arguments.
    """
    if not MIN_SIZE <= n <= MAX_SIZE:
        raise ValueError(f"n must be in [{MIN_SIZE}, {MAX_SIZE}], got {n}")
    if not 0.0 <= density <= 1.0:
        raise ValueError(f"density must be in [0, 1], got {density}")
    if seed < 0 or seed >= 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")

    start, goal = Position(0, 0), Position(n - 1, n - 1)
    k = obstacle_count(n, density)
    candidates = [
        Position(x, y) for y in range(n) for x in range(n) if Position(x, y) not in (start, goal)
    ]
    if k > len(candidates):
        raise Unsatisfiable(
            f"{k} obstacles requested but only {len(candidates)} cells are placeable on a {n}x{n} grid"
        )

    for attempt in range(MAX_ATTEMPTS):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(attempt,)))
        picks = rng.choice(len(candidates), size=k, replace=False)
        grid = GridWorld(
            n=n,
            obstacles=frozenset(candidates[i] for i in picks),
            start=start,
            goal=goal,
            seed=seed,
            density=float(density),
        )
        if shortest_path_len(grid) is not None:
            return grid
    raise Unsatisfiable(
        f"no solvable {n}x{n} layout with {k} obstacles after {MAX_ATTEMPTS} attempts (seed={seed})"
    )


@dataclass(frozen=True)
class Observation:
    north: Cell
    south: Cell
    east: Cell
    west: Cell
    position: Position
    goal_delta: tuple[int, int]

    def label(self, action: Action) -> Cell:
        return {
            Action.UP: self.north,
            Action.DOWN: self.south,
            Action.RIGHT: self.east,
            Action.LEFT: self.west,
        }[action]

    def to_dict(self) -> dict[str, Any]:
        return {
            "north": self.north.value,
            "south": self.south.value,
            "east": self.east.value,
            "west": self.west.value,
            "goal_delta": list(self.goal_delta),
        }


def observe(grid: GridWorld, pos: Position) -> Observation:
    assert grid.in_bounds(pos) and pos not in grid.obstacles, f"invalid position {pos}"
    labels = {name: grid.cell(moved(pos, a)) for name, a in DIRECTIONS.items()}
    return Observation(
        position=pos,
        goal_delta=(grid.goal.x - pos.x, grid.goal.y - pos.y),
        **labels,
    )


@dataclass(frozen=True)
class Transition:
    next: Position
    reward: float
    terminal: bool
    collided: bool


def step(grid: GridWorld, pos: Position, action: Action) -> Transition:
    assert grid.in_bounds(pos) and pos not in grid.obstacles, f"invalid position {pos}"
    assert pos != grid.goal, "cannot step from the goal"
    target = moved(pos, action)
    label = grid.cell(target)
    if label.blocked:
        return bump(pos)
    if label is Cell.GOAL:
        return Transition(target, GOAL_REWARD, terminal=True, collided=False)
    return Transition(target, STEP_REWARD, terminal=False, collided=False)


def bump(pos: Position) -> Transition:
    """The transition produced by any move into a wall or obstacle from ``pos``."""
    return Transition(pos, COLLISION_REWARD, terminal=False, collided=True)


def bfs_distances(grid: GridWorld, source: Position | None = None) -> dict[Position, int]:
    """Shortest 4-connected distances from ``source`` (default: start) to every reachable cell."""
    source = grid.start if source is None else source
    dist = {source: 0}
    queue = deque([source])
    while queue:
        cur = queue.popleft()
        for a in ACTIONS:
            nxt = moved(cur, a)
            if nxt in dist or not grid.in_bounds(nxt) or nxt in grid.obstacles:
                continue
            dist[nxt] = dist[cur] + 1
            queue.append(nxt)
    return dist


def shortest_path_len(grid: GridWorld) -> int | None:
    return bfs_distances(grid).get(grid.goal)


def grid_to_json(grid: GridWorld) -> str:
    return json.dumps(grid.to_dict())


def save_grid(grid: GridWorld, path: str | os.PathLike[str]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(grid_to_json(grid) + "\n")


def load_grid(path: str | os.PathLike[str]) -> GridWorld:
    try:
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", path=str(path), line=exc.lineno) from None
    if not isinstance(data, dict):
        raise ParseError("grid file must hold a JSON object", path=str(path))
    return GridWorld.from_dict(data)
