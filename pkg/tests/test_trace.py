from __future__ import annotations

import json
from fractions import Fraction

import pytest

from narrarl.env import Action, Position
from narrarl.errors import EmptyInput, InvariantViolation, ParseError
from narrarl.metrics import EpisodeRecord, compute_metrics
from narrarl.trace import RECORD_KEYS, DecisionRecord, TraceSink, append, masked_lines, read_log, report_from_log

# hand count over tests/fixtures/trace_3ep.jsonl:
#   episode 0: 4 steps, reaches goal, 3 of 4 followed
#   episode 1: 9 steps, hits the cap, 7 of 9 followed, 1 fallback
#   episode 2: 6 steps, reaches goal, 5 of 6 followed
FIXTURE_FOLLOWED, FIXTURE_DECISIONS, FIXTURE_FALLBACKS = 15, 19, 1


def record(episode=0, step=0, suggested=Action.UP, chosen=Action.UP, **kw):
    base = dict(
        run_id="r",
        episode=episode,
        step=step,
        position=Position(0, 0),
        q_values=(0.001, 0.002, 0.003, 0.004),
        suggested=suggested,
        exploratory=False,
        observation={"north": "wall", "south": "empty", "east": "empty", "west": "wall", "goal_delta": [2, 2]},
        narrative_id=None,
        chosen=chosen,
        followed=suggested is chosen,
        fallback=False,
        rationale="",
        latency_ms=0,
        reward=-0.1,
        next_position=Position(0, 0),
        terminal=False,
    )
    base.update(kw)
    return DecisionRecord(**base)


def test_roundtrip_one_record(tmp_path):
    r = record(chosen=Action.RIGHT, followed=False, next_position=Position(1, 0), reward=-0.01,
               narrative_id="theseus", rationale="ACTION: RIGHT", latency_ms=87)
    path = tmp_path / "t.jsonl"
    with TraceSink(path) as sink:
        assert append(sink, r) == 1
    assert read_log(path) == [r]
    line = path.read_text().splitlines()[0]
    assert list(json.loads(line)) == list(RECORD_KEYS)


def test_two_episodes_three_steps(tmp_path):
    path = tmp_path / "t.jsonl"
    with TraceSink(path) as sink:
        for ep in range(2):
            for t in range(3):
                sink.write(record(ep, t))
            sink.end_episode()
    lines = path.read_text().splitlines()
    assert len(lines) == 6
    assert [json.loads(x)["step"] for x in lines] == [0, 1, 2, 0, 1, 2]


def test_distinct_sinks_concurrently(tmp_path):
    from concurrent.futures import ThreadPoolExecutor

    def run(i):
        p = tmp_path / f"run{i}.jsonl"
        with TraceSink(p) as sink:
            for t in range(50):
                sink.write(record(0, t, run_id=f"run{i}"))
        return p

    with ThreadPoolExecutor(4) as pool:
        paths = list(pool.map(run, range(4)))
    for i, p in enumerate(paths):
        recs = read_log(p)
        assert len(recs) == 50 and {r.run_id for r in recs} == {f"run{i}"}


def test_read_fixture(trace_fixture):
    recs = read_log(trace_fixture)
    assert len(recs) == FIXTURE_DECISIONS
    assert [r.episode for r in recs] == [0] * 4 + [1] * 9 + [2] * 6


def test_report_from_fixture(trace_fixture):
    rep = report_from_log(trace_fixture)
    assert rep.success_rate == 2 / 3
    assert rep.avg_steps_successful == 5.0
    assert rep.adherence_rate == FIXTURE_FOLLOWED / FIXTURE_DECISIONS
    assert Fraction(rep.adherence_rate).limit_denominator(100) == Fraction(15, 19)
    assert rep.fallback_rate == FIXTURE_FALLBACKS / FIXTURE_DECISIONS
    assert [e.steps for e in rep.per_episode] == [4, 9, 6]
    assert [e.success for e in rep.per_episode] == [True, False, True]


def test_all_followed_gives_full_adherence(tmp_path):
    path = tmp_path / "t.jsonl"
    with TraceSink(path) as sink:
        for t in range(4):
            sink.write(record(0, t))
    assert report_from_log(path).adherence_rate == 1.0


def test_empty_log(tmp_path):
    path = tmp_path / "t.jsonl"
    path.write_text("")
    with pytest.raises(EmptyInput):
        report_from_log(path)


def _mutate(src, tmp_path, lineno, fn):
    lines = src.read_text().splitlines()
    obj = json.loads(lines[lineno - 1])
    fn(obj)
    lines[lineno - 1] = json.dumps(obj)
    out = tmp_path / "bad.jsonl"
    out.write_text("\n".join(lines) + "\n")
    return out


def test_missing_key_reports_line(trace_fixture, tmp_path):
    bad = _mutate(trace_fixture, tmp_path, 7, lambda o: o.pop("chosen"))
    with pytest.raises(ParseError, match=r":7: missing key 'chosen'") as info:
        read_log(bad)
    assert info.value.line == 7


def test_invalid_json_reports_line(trace_fixture, tmp_path):
    lines = trace_fixture.read_text().splitlines()
    lines[2] = lines[2][:-5]
    bad = tmp_path / "bad.jsonl"
    bad.write_text("\n".join(lines))
    with pytest.raises(ParseError) as info:
        read_log(bad)
    assert info.value.line == 3


def test_followed_invariant(trace_fixture, tmp_path):
    # line 2 has suggested=UP, chosen=RIGHT
    bad = _mutate(trace_fixture, tmp_path, 2, lambda o: o.update(followed=True))
    with pytest.raises(InvariantViolation, match="record 1, field 'followed'"):
        read_log(bad)


def test_step_contiguity_invariant(trace_fixture, tmp_path):
    bad = _mutate(trace_fixture, tmp_path, 3, lambda o: o.update(step=5))
    with pytest.raises(InvariantViolation, match="step"):
        read_log(bad)


def test_fallback_must_follow(tmp_path):
    path = tmp_path / "t.jsonl"
    with TraceSink(path) as sink:
        sink.write(record(0, 0, suggested=Action.UP, chosen=Action.LEFT, followed=False, fallback=True))
    with pytest.raises(InvariantViolation, match="fallback"):
        read_log(path)


def test_masked_lines_hide_volatile_fields(tmp_path):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    for path, rid, lat in ((a, "x", 3), (b, "y", 9)):
        with TraceSink(path) as sink:
            sink.write(record(run_id=rid, latency_ms=lat))
    assert a.read_bytes() != b.read_bytes()
    assert masked_lines(a) == masked_lines(b)


def test_prompt_capture_is_trailing(tmp_path):
    path = tmp_path / "t.jsonl"
    with TraceSink(path) as sink:
        sink.write(record(prompt=[{"role": "user", "content": "hi"}]))
    keys = list(json.loads(path.read_text()))
    assert keys[:-1] == list(RECORD_KEYS) and keys[-1] == "prompt"
    assert read_log(path)[0].prompt == [{"role": "user", "content": "hi"}]


def test_compute_metrics_arithmetic():
    recs = [EpisodeRecord(i, i < 7, 10, 0.0, 10, 10, 0, 0) for i in range(10)]
    assert compute_metrics(recs).success_rate == 0.7

    steps = [10, 12, 14]
    recs = [EpisodeRecord(i, True, s, 0.0, s, s, 0, 0) for i, s in enumerate(steps)]
    recs.append(EpisodeRecord(3, False, 40, 0.0, 40, 30, 2, 0))
    rep = compute_metrics(recs)
    assert rep.avg_steps_successful == 12.0
    assert rep.adherence_rate == (36 + 30) / 76
    assert rep.fallback_rate == 2 / 76


def test_compute_metrics_no_successes():
    rep = compute_metrics([EpisodeRecord(0, False, 5, -0.05, 5, 5, 0, 0)])
    assert rep.success_rate == 0.0
    assert rep.avg_steps_successful is None
    assert rep.to_dict()["avg_steps_successful"] is None


def test_compute_metrics_empty():
    with pytest.raises(EmptyInput):
        compute_metrics([])
