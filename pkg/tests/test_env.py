from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from narrarl import env
from narrarl.env import ACTIONS, Action, Cell, GridWorld, Position
from narrarl.errors import ParseError, Unsatisfiable, ValidationError
from oracles import frontier_bfs

# (y, x) pairs, frozen from the (7, 0.30, 42) layout and cross-checked by the oracle BFS
FIXTURE_OBSTACLES_YX = [
    (0, 3), (0, 4), (1, 1), (1, 2), (1, 6), (3, 3), (3, 5), (4, 0),
    (4, 1), (4, 6), (5, 3), (5, 5), (5, 6), (6, 2), (6, 3),
]


def test_fixture_grid_layout(fixture_grid):
    assert len(fixture_grid.obstacles) == 15
    assert sorted((p.y, p.x) for p in fixture_grid.obstacles) == FIXTURE_OBSTACLES_YX
    assert frontier_bfs(7, fixture_grid.obstacles, (0, 0), (6, 6)) == 12


def test_fixture_shortest_path_matches_oracle(fixture_grid):
    assert env.shortest_path_len(fixture_grid) == 12


def test_zero_density_grid():
    g = env.generate_grid(5, 0.0, 7)
    assert g.obstacles == frozenset()
    assert env.shortest_path_len(g) == 8


def test_full_density_is_unsatisfiable():
    with pytest.raises(Unsatisfiable, match="25 obstacles"):
        env.generate_grid(5, 1.0, 7)


@pytest.mark.parametrize("n,density", [(1, 0.3), (65, 0.3), (5, -0.1), (5, 1.5)])
def test_generate_rejects_bad_args(n, density):
    with pytest.raises(ValueError):
        env.generate_grid(n, density, 0)


def test_obstacle_count_rounds_half_up():
    assert env.obstacle_count(5, 0.3) == 8  # 7.5
    assert env.obstacle_count(7, 0.3) == 15  # 14.7
    assert env.obstacle_count(7, 0.4) == 20  # 19.6
    assert env.obstacle_count(2, 0.125) == 1  # 0.5


@settings(max_examples=60, deadline=None)
@given(
    n=st.integers(3, 12),
    density=st.sampled_from([0.0, 0.1, 0.2, 0.3, 0.4]),
    seed=st.integers(0, 2**64 - 1),
)
def test_generated_grids_satisfy_invariants(n, density, seed):
    g = env.generate_grid(n, density, seed)
    assert g.start != g.goal
    assert g.start not in g.obstacles and g.goal not in g.obstacles
    assert len(g.obstacles) == min(env.obstacle_count(n, density), n * n - 2)
    assert frontier_bfs(n, g.obstacles, g.start, g.goal) is not None
    assert g == env.generate_grid(n, density, seed)


def test_unsolvable_density_exhausts_attempts():
    # 2x2 at 40%: both placeable cells become obstacles, so no layout is solvable
    with pytest.raises(Unsatisfiable, match="1000 attempts"):
        env.generate_grid(2, 0.4, 3)


def test_different_seeds_differ():
    assert env.generate_grid(9, 0.3, 1).obstacles != env.generate_grid(9, 0.3, 2).obstacles


def test_observe_corner_sees_walls(fixture_grid):
    obs = env.observe(fixture_grid, Position(0, 0))
    assert obs.north is Cell.WALL and obs.west is Cell.WALL


def test_observe_fixture_start(fixture_grid):
    # row 0 is "S..##..", row 1 is ".##...#"
    obs = env.observe(fixture_grid, fixture_grid.start)
    assert (obs.north, obs.south, obs.east, obs.west) == (Cell.WALL, Cell.EMPTY, Cell.EMPTY, Cell.WALL)
    assert obs.goal_delta == (6, 6)


def test_observe_fixture_enumerated(fixture_grid):
    blocked = {(x, y) for y, x in FIXTURE_OBSTACLES_YX}
    for y in range(7):
        for x in range(7):
            if (x, y) in blocked:
                continue
            obs = env.observe(fixture_grid, Position(x, y))
            for name, (dx, dy) in {"north": (0, -1), "south": (0, 1), "east": (1, 0), "west": (-1, 0)}.items():
                c = (x + dx, y + dy)
                if not (0 <= c[0] < 7 and 0 <= c[1] < 7):
                    want = "wall"
                elif c in blocked:
                    want = "obstacle"
                elif c == (6, 6):
                    want = "goal"
                else:
                    want = "empty"
                assert getattr(obs, name).value == want, (x, y, name)


def test_observe_goal_label(empty5):
    obs = env.observe(empty5, Position(3, 4))
    assert obs.east is Cell.GOAL
    assert obs.goal_delta == (1, 0)


def test_step_collision_with_wall(empty5):
    tr = env.step(empty5, Position(0, 0), Action.UP)
    assert tr.next == Position(0, 0)
    assert tr.reward == -0.1
    assert tr.collided and not tr.terminal


def test_step_into_goal(empty5):
    tr = env.step(empty5, Position(4, 3), Action.DOWN)
    assert tr.next == Position(4, 4)
    assert tr.reward == 1.0
    assert tr.terminal and not tr.collided


def test_step_into_empty(empty5):
    tr = env.step(empty5, Position(1, 1), Action.RIGHT)
    assert tr == env.Transition(Position(2, 1), -0.01, False, False)


def test_step_into_obstacle():
    g = GridWorld(3, frozenset({Position(1, 0)}), Position(0, 0), Position(2, 2), 0, 0.0)
    tr = env.step(g, Position(0, 0), Action.RIGHT)
    assert tr.collided and tr.next == Position(0, 0)


def test_step_properties_exhaustive(fixture_grid):
    for pos in fixture_grid.free_cells():
        if pos == fixture_grid.goal:
            continue
        assert env.observe(fixture_grid, pos).goal_delta != (0, 0)
        for a in ACTIONS:
            tr = env.step(fixture_grid, pos, a)
            assert fixture_grid.in_bounds(tr.next)
            assert tr.next not in fixture_grid.obstacles
            if not tr.collided and not tr.terminal:
                back = env.step(fixture_grid, tr.next, a.opposite)
                assert back.next == pos


def test_shortest_path_unreachable():
    walls = frozenset({Position(3, 4), Position(4, 3)})
    g = GridWorld(5, walls, Position(0, 0), Position(4, 4), 0, 0.0)
    assert env.shortest_path_len(g) is None


def test_action_order_and_deltas():
    assert [a.name for a in ACTIONS] == ["UP", "DOWN", "LEFT", "RIGHT"]
    assert Action.UP.delta == (0, -1) and Action.DOWN.delta == (0, 1)
    assert Action.LEFT.delta == (-1, 0) and Action.RIGHT.delta == (1, 0)


def test_grid_json_roundtrip(fixture_grid, tmp_path):
    path = tmp_path / "g.json"
    env.save_grid(fixture_grid, path)
    data = json.loads(path.read_text())
    assert list(data) == ["n", "density", "seed", "start", "goal", "obstacles"]
    assert data["obstacles"] == sorted(data["obstacles"], key=lambda p: (p[1], p[0]))
    assert env.load_grid(path) == fixture_grid
    # byte-stable
    env.save_grid(env.load_grid(path), tmp_path / "g2.json")
    assert (tmp_path / "g2.json").read_bytes() == path.read_bytes()


def test_load_grid_rejects_bad_files(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ParseError):
        env.load_grid(bad)
    blocked_start = {"n": 3, "density": 0.1, "seed": 0, "start": [0, 0], "goal": [2, 2], "obstacles": [[0, 0]]}
    bad.write_text(json.dumps(blocked_start))
    with pytest.raises(ValidationError, match="start"):
        env.load_grid(bad)
