from datetime import datetime, timezone

import pytest

from carbonsched.curves import synthetic_curve
from carbonsched.schedule import JobSpec
from carbonsched.trace import CarbonTrace

UTC_START = datetime(2021, 1, 1, tzinfo=timezone.utc)


def trace_of(values, region="test"):
    return CarbonTrace(region=region, start=UTC_START, intensities=tuple(values))


@pytest.fixture
def demo_trace():
    return trace_of((10.0, 100.0, 20.0))


@pytest.fixture
def demo_job():
    return JobSpec(
        name="demo", arrival_slot=0, base_length_slots=2.0,
        min_servers=1, max_servers=2, completion_slot=3,
    )


@pytest.fixture
def flat_curve():
    return synthetic_curve("linear", 1, 2)


@pytest.fixture
def diminishing_curve():
    return synthetic_curve("diminishing", 1, 2, decay=0.7)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = []
    for status, reports in (("PASS", "passed"), ("FAIL", "failed")):
        for rep in terminalreporter.stats.get(reports, []):
            if "test_acceptance" in rep.nodeid:
                lines.append((rep.nodeid.split("::")[-1], status))
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for name, status in sorted(lines):
            terminalreporter.write_line(f"[{status}] {name}")
