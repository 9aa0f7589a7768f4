import logging

import pytest

from multisub.services.logger import StageLogger, StageStatus


@pytest.fixture
def trail():
    return StageLogger(logging.getLogger("multisub.test"))


def test_entries_are_recorded_in_order(trail):
    trail.passed("sum-rules", "ok")
    trail.warning("joint-expansion", "undecided")
    trail.failed("omega", "too large")
    assert [e.stage for e in trail.entries] == ["sum-rules", "joint-expansion", "omega"]
    assert [e.status for e in trail.entries] == [
        StageStatus.PASSED,
        StageStatus.WARNING,
        StageStatus.FAILED,
    ]


def test_nested_data_is_flattened(trail):
    entry = trail.info("assumption-n", norms={"1": 0.5, "2": {"inner": 1.0}}, n=2)
    assert entry.data == {"norms/1": 0.5, "norms/2/inner": 1.0, "n": 2}


def test_status_from_string(trail):
    assert trail.record("jsr", "passed").status is StageStatus.PASSED
    with pytest.raises(ValueError):
        trail.record("jsr", "unknown")


def test_last(trail):
    trail.info("jsr", "first")
    trail.info("verdict", "convergent")
    trail.info("jsr", "second")
    assert trail.last("jsr").detail == "second"
    assert trail.last("omega") is None


def test_echo_levels(trail, caplog):
    with caplog.at_level(logging.INFO, logger="multisub.test"):
        trail.passed("omega", "12 points")
        trail.failed("invariance", "leak")
    levels = [(r.levelno, r.getMessage()) for r in caplog.records]
    assert levels == [
        (logging.INFO, "[omega] passed: 12 points"),
        (logging.ERROR, "[invariance] failed: leak"),
    ]
