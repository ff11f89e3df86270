import pytest

_criteria: dict[int, tuple[str, str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.when != "call":
        return
    measured = "; ".join(f"{k}={v}" for k, v in item.user_properties if k == "measured")
    _criteria[marker.args[0]] = ("PASS" if rep.passed else "FAIL", item.name, measured)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        status, name, measured = _criteria[n]
        terminalreporter.write_line(f"criterion {n:>2}: {status}  {name}  {measured}")
