from __future__ import annotations

import pytest

from narrarl import env
from narrarl.arbiter import (
    CORRECTION,
    ArbiterRequest,
    LlmArbiter,
    Verdict,
    llm_decide,
    parse_action,
    passthrough,
    scripted,
)
from narrarl.env import ACTIONS, Action, Cell, Observation, Position
from narrarl.errors import MalformedResponse, TransportFailure
from narrarl.llm_client import StubClient
from narrarl.narratives import builtin
from narrarl.rl import Suggestion
from oracles import reachable


def request(action=Action.UP, *, exploratory=False, north=Cell.EMPTY, south=Cell.EMPTY,
            east=Cell.EMPTY, west=Cell.EMPTY, delta=(2, 2)):
    obs = Observation(north, south, east, west, Position(1, 1), delta)
    return ArbiterRequest(0, 0, obs, Suggestion(action, (0.0, 0.0, 0.0, 0.0), exploratory))


def test_passthrough_identity():
    v = passthrough(request(Action.UP))
    assert v.action is Action.UP and v.followed_suggestion and not v.fallback
    assert v.rationale == "" and v.latency_ms >= 0


def test_passthrough_ignores_exploration_flag():
    v = passthrough(request(Action.LEFT, exploratory=True))
    assert v.action is Action.LEFT and v.followed_suggestion


def test_scripted_replaces_blocked_move():
    v = scripted(request(Action.UP, north=Cell.WALL, east=Cell.EMPTY, delta=(3, 0)))
    assert v.action is Action.RIGHT and not v.followed_suggestion


def test_scripted_keeps_open_move():
    v = scripted(request(Action.RIGHT, east=Cell.GOAL, delta=(1, 0)))
    assert v.action is Action.RIGHT and v.followed_suggestion


def test_scripted_tie_breaks_canonically():
    # goal straight down-right: DOWN and RIGHT both reduce distance; DOWN comes first
    v = scripted(request(Action.LEFT, west=Cell.OBSTACLE, delta=(2, 2)))
    assert v.action is Action.DOWN


def test_scripted_all_blocked_returns_suggestion():
    v = scripted(request(Action.UP, north=Cell.WALL, south=Cell.WALL, east=Cell.OBSTACLE, west=Cell.WALL))
    assert v.action is Action.UP and v.followed_suggestion


def test_scripted_deterministic():
    r = request(Action.DOWN, south=Cell.OBSTACLE, delta=(-1, 3))
    assert scripted(r).action == scripted(r).action


def test_scripted_never_picks_blocked_on_generated_grids():
    checked = 0
    for seed in range(20):
        grid = env.generate_grid(7, 0.3, seed)
        for cell in reachable(7, grid.obstacles, (0, 0)):
            pos = Position(*cell)
            if pos == grid.goal:
                continue
            obs = env.observe(grid, pos)
            for a in ACTIONS:
                v = scripted(ArbiterRequest(0, 0, obs, Suggestion(a, (0, 0, 0, 0), False)))
                assert not env.step(grid, pos, v.action).collided
                checked += 1
    assert checked > 1000


@pytest.mark.parametrize(
    "text,want",
    [
        ("ACTION: UP", Action.UP),
        ("I proceed north through the labyrinth.\naction:   up", Action.UP),
        ("ACTION: LEFT\nthinking...\n  Action : Right  ", Action.RIGHT),
        ("action:down\n", Action.DOWN),
    ],
)
def test_parse_action(text, want):
    assert parse_action(text) is want


@pytest.mark.parametrize("text", ["go forth bravely", "", "ACTION: NORTH", "the ACTION: UP is inline"])
def test_parse_action_malformed(text):
    with pytest.raises(MalformedResponse):
        parse_action(text)


def test_llm_override():
    stub = StubClient(["The thread pulls right, but the torch shows a passage west.\nACTION: LEFT"])
    v = llm_decide(request(Action.RIGHT), builtin("theseus"), stub)
    assert v.action is Action.LEFT and not v.followed_suggestion and not v.fallback
    assert v.attempts == 1 and "passage west" in v.rationale
    assert stub.calls[0][0]["content"] == builtin("theseus").system_preamble


def test_llm_fallback_after_retries():
    stub = StubClient(["hmm", "not sure", "still thinking"])
    v = llm_decide(request(Action.DOWN), builtin("direct"), stub, retries=2)
    assert v == Verdict(Action.DOWN, True, rationale="still thinking", fallback=True,
                        latency_ms=v.latency_ms, attempts=3)
    assert len(stub.calls) == 3
    assert stub.calls[1][-1] == {"role": "user", "content": CORRECTION}
    assert len(stub.calls[2]) == 4


def test_llm_retry_then_success():
    stub = StubClient(["garbage", "ACTION: UP"])
    v = llm_decide(request(Action.DOWN), builtin("direct"), stub)
    assert v.action is Action.UP and v.attempts == 2 and not v.fallback


def test_llm_zero_retries():
    v = llm_decide(request(Action.LEFT), builtin("direct"), StubClient(["?"]), retries=0)
    assert v.fallback and v.attempts == 1


def test_llm_latency_sums_attempts():
    stub = StubClient(["x", "ACTION: UP"], delay=0.02)
    v = llm_decide(request(), builtin("direct"), stub)
    assert v.latency_ms >= 40


def test_llm_deterministic_given_stub():
    a = llm_decide(request(), builtin("sherlock"), StubClient(["bad", "ACTION: LEFT"]))
    b = llm_decide(request(), builtin("sherlock"), StubClient(["bad", "ACTION: LEFT"]))
    assert (a.action, a.rationale, a.attempts, a.fallback) == (b.action, b.rationale, b.attempts, b.fallback)


def test_transport_failure_propagates_by_default():
    arb = LlmArbiter(builtin("direct"), StubClient([TransportFailure("down")]))
    with pytest.raises(TransportFailure):
        arb(request())


def test_transport_failure_fallback_mode():
    arb = LlmArbiter(builtin("direct"), StubClient([TransportFailure("down")]), on_failure="fallback")
    v = arb(request(Action.RIGHT))
    assert v.action is Action.RIGHT and v.fallback and v.followed_suggestion
    assert "down" in v.rationale
