import pytest

_VERDICTS = {}


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, text = marker.args
    entry = _VERDICTS.setdefault((number, text), [])
    if call.when == "call" or (call.when == "setup" and call.excinfo is not None):
        entry.append(call.excinfo is None)


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for (number, text), results in sorted(_VERDICTS.items()):
        verdict = "PASS" if results and all(results) else "FAIL"
        terminalreporter.write_line(f"criterion {number:>2}: {verdict}  {text}")
