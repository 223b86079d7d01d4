from pathlib import Path

import pytest

from framestop.loop import RecordListener

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"

_criteria: dict[int, tuple[str, bool]] = {}


class RecordingListener(RecordListener):
    """Remembers every message kind and supplied record it handles."""

    def __init__(self, name="rec"):
        self.name = name
        self.kinds = []
        self.records = []
        self.resumed_unchanged = 0

    def configure(self, event):
        super().configure(event)
        self.kinds.append("configure")

    def reconfigure(self, event):
        super().reconfigure(event)
        self.kinds.append("reconfigure")

    def resume(self, event):
        self.kinds.append("resume")
        self.resumed_unchanged += 1

    def suspend(self, event):
        self.kinds.append("suspend")

    def finish(self, event):
        self.kinds.append("finish")

    def record_supplied(self, event):
        self.kinds.append("recordSupplied")
        self.records.append(event.record)

    def __repr__(self):
        return f"RecordingListener({self.name})"


@pytest.fixture
def criterion(request):
    """Record an acceptance criterion's outcome for the terminal summary."""

    def record(number, title):
        _criteria[number] = (title, False)
        return lambda: _criteria.__setitem__(number, (title, True))

    return record


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, ok = _criteria[number]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {number}. {title}")
