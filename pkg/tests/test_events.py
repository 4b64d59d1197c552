from __future__ import annotations

import pytest

from lemmaflow.pipeline import EventLog


def fake_clock():
    state = {"t": 0.0}

    def tick():
        state["t"] += 1.0
        return state["t"]

    return tick


def test_append_assigns_contiguous_seqs_and_persists(tmp_path):
    log = EventLog(path=tmp_path / "e.jsonl", clock=fake_clock())
    for i in range(5):
        log.append("StepStarted", {"state": f"s{i}", "cursor": None})
    assert [e.seq for e in log.events] == [1, 2, 3, 4, 5]
    again = EventLog.load(tmp_path / "e.jsonl")
    assert [e.to_dict() for e in again.events] == [e.to_dict() for e in log.events]


def test_since_is_exclusive():
    log = EventLog(clock=fake_clock())
    for i in range(4):
        log.append("StepStarted", {"state": f"s{i}", "cursor": None})
    assert [e.seq for e in log.since(2)] == [3, 4]
    assert log.since(4) == []


def test_on_append_hook_fires():
    log = EventLog(clock=fake_clock())
    seen = []
    log.on_append = lambda e: seen.append(e.seq)
    log.append("StepStarted", {"state": "s", "cursor": None})
    assert seen == [1]


def test_truncated_final_line_is_dropped_on_load(tmp_path):
    path = tmp_path / "e.jsonl"
    log = EventLog(path=path, clock=fake_clock())
    for i in range(3):
        log.append("StepStarted", {"state": f"s{i}", "cursor": None})
    # simulate a crash mid-write of a fourth event
    with path.open("a", encoding="utf-8") as fh:
        fh.write('{"seq": 4, "ts": 4.0, "kin')
    recovered = EventLog.load(path)
    assert [e.seq for e in recovered.events] == [1, 2, 3]


def test_corruption_in_the_middle_is_fatal(tmp_path):
    path = tmp_path / "e.jsonl"
    path.write_text(
        '{"seq": 1, "ts": 1.0, "kind": "StepStarted", "data": {}}\n'
        "garbage line\n"
        '{"seq": 3, "ts": 3.0, "kind": "StepStarted", "data": {}}\n'
    )
    with pytest.raises(ValueError, match="corrupt event log"):
        EventLog.load(path)
