"""Tabular Q-learning over gridworld positions.

The table is a ``(n, n, 4)`` float array indexed ``[y, x, action]``. Action
sampling, table initialisation and grid generation each draw from their own
seeded stream (see :func:`run_streams`) so any one of them can be replayed
without the others.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from . import env
from .env import ACTIONS, Action, GridWorld, Position, Transition
from .errors import ConfigError, ParseError

INIT_HIGH = 0.01


@dataclass(frozen=True)
class RlParams:
    alpha: float = 0.5
    gamma: float = 0.9
    epsilon: float = 0.2
    episodes: int = 10
    max_steps: int | None = None  # None -> 4 * n**2

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha <= 1.0:
            raise ConfigError("rl.alpha", f"must be in (0, 1], got {self.alpha}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError("rl.gamma", f"must be in [0, 1], got {self.gamma}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ConfigError("rl.epsilon", f"must be in [0, 1], got {self.epsilon}")
        if self.episodes < 0:
            raise ConfigError("rl.episodes", f"must be >= 0, got {self.episodes}")
        if self.max_steps is not None and self.max_steps < 1:
            raise ConfigError("rl.max_steps", f"must be >= 1, got {self.max_steps}")

    def step_budget(self, n: int) -> int:
        return self.max_steps if self.max_steps is not None else 4 * n * n

    def to_dict(self) -> dict[str, Any]:
        return {
            "alpha": self.alpha,
            "gamma": self.gamma,
            "epsilon": self.epsilon,
            "episodes": self.episodes,
            "max_steps": self.max_steps,
        }


@dataclass
class QTable:
    n: int
    values: np.ndarray
    init_seed: int

    def __post_init__(self) -> None:
        if self.values.shape != (self.n, self.n, len(ACTIONS)):
            raise ValueError(f"values must have shape ({self.n}, {self.n}, 4), got {self.values.shape}")

    def at(self, pos: Position) -> np.ndarray:
        return self.values[pos.y, pos.x]

    def copy(self) -> QTable:
        return QTable(self.n, self.values.copy(), self.init_seed)

    def to_dict(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "init_seed": self.init_seed,
            "values": self.values.reshape(self.n * self.n, len(ACTIONS)).tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> QTable:
        try:
            n = int(data["n"])
            values = np.asarray(data["values"], dtype=float).reshape(n, n, len(ACTIONS))
            table = cls(n, values, int(data["init_seed"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad q-table object: {exc!r}") from None
        if not np.all(np.isfinite(table.values)):
            raise ParseError("q-table holds non-finite values")
        return table


def save_qtable(table: QTable, path: str | os.PathLike[str]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(table.to_dict(), f)
        f.write("\n")


def load_qtable(path: str | os.PathLike[str]) -> QTable:
    try:
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", path=str(path), line=exc.lineno) from None
    return QTable.from_dict(data)


def init_qtable(n: int, seed: int) -> QTable:
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    rng = np.random.default_rng(seed)
    values = rng.random((n, n, len(ACTIONS))) * INIT_HIGH
    return QTable(n, values, seed)


def run_streams(run_seed: int) -> tuple[int, np.random.Generator]:
    """Split a run seed into (q-table init seed, action-sampling generator)."""
    q_ss, act_ss = np.random.SeedSequence(run_seed).spawn(2)
    q_seed = int(q_ss.generate_state(1, dtype=np.uint64)[0])
    return q_seed, np.random.default_rng(act_ss)


@dataclass(frozen=True)
class Suggestion:
    action: Action
    q_values: tuple[float, float, float, float]
    exploratory: bool


def suggest(table: QTable, pos: Position, epsilon: float, rng: np.random.Generator) -> Suggestion:
    """Epsilon-greedy proposal; greedy ties go to the earliest action in canonical order."""
    q = table.at(pos)
    q_values = tuple(float(v) for v in q)
    # one uniform draw per decision regardless of epsilon keeps the stream aligned across settings
    if rng.random() < epsilon:
        return Suggestion(ACTIONS[int(rng.integers(len(ACTIONS)))], q_values, True)
    return Suggestion(ACTIONS[int(np.argmax(q))], q_values, False)


def td_update(
    table: QTable,
    pos: Position,
    action: Action,
    transition: Transition,
    alpha: float,
    gamma: float,
) -> float:
    """Q(s,a) += alpha * (target - Q(s,a)); bootstrap only on non-terminal transitions."""
    target = transition.reward
    if not transition.terminal:
        target += gamma * float(np.max(table.at(transition.next)))
    q = table.values[pos.y, pos.x, action.value]
    new = q + alpha * (target - q)
    table.values[pos.y, pos.x, action.value] = new
    return float(new)


@dataclass
class EpisodeResult:
    episode: int
    success: bool
    steps: int
    return_: float


StepCallback = Callable[[int, int, Position, Suggestion, Transition], None]


def train(
    grid: GridWorld,
    params: RlParams,
    table: QTable,
    rng: np.random.Generator,
    *,
    on_step: StepCallback | None = None,
) -> tuple[QTable, list[EpisodeResult]]:
    """Run ``params.episodes`` epsilon-greedy episodes, updating ``table`` in place.

    ``on_step(episode, step, pos, suggestion, transition)`` is invoked after
    each update when given.
    """
    if table.n != grid.n:
        raise ValueError(f"q-table is {table.n}x{table.n} but grid is {grid.n}x{grid.n}")
    budget = params.step_budget(grid.n)
    results = []
    for ep in range(params.episodes):
        pos = grid.start
        total = 0.0
        success = False
        steps = 0
        for t in range(budget):
            sug = suggest(table, pos, params.epsilon, rng)
            tr = env.step(grid, pos, sug.action)
            td_update(table, pos, sug.action, tr, params.alpha, params.gamma)
            if on_step is not None:
                on_step(ep, t, pos, sug, tr)
            total += tr.reward
            steps = t + 1
            pos = tr.next
            if tr.terminal:
                success = True
                break
        results.append(EpisodeResult(ep, success, steps, total))
    return table, results


@dataclass
class Rollout:
    success: bool
    path: list[Position] = field(default_factory=list)

    @property
    def steps(self) -> int:
        return len(self.path) - 1


def greedy_rollout(grid: GridWorld, table: QTable, max_steps: int | None = None) -> Rollout:
    """Follow the argmax policy from start without learning or exploring."""
    budget = max_steps if max_steps is not None else 4 * grid.n * grid.n
    pos = grid.start
    path = [pos]
    for _ in range(budget):
        a = ACTIONS[int(np.argmax(table.at(pos)))]
        tr = env.step(grid, pos, a)
        pos = tr.next
        path.append(pos)
        if tr.terminal:
            return Rollout(True, path)
    return Rollout(False, path)
