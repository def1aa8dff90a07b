from collections import defaultdict

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "repo",
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")

_criteria = defaultdict(list)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or not (rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed")):
        return
    number, title = mark.args
    # an expected failure is still a failed clause
    ok = rep.outcome == "passed" and not hasattr(rep, "wasxfail")
    _criteria[number].append((title, item.name, ok))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        parts = _criteria[number]
        status = "PASS" if all(ok for _, _, ok in parts) else "FAIL"
        failed = [name for _, name, ok in parts if not ok]
        suffix = f" (failing: {', '.join(failed)})" if failed else ""
        terminalreporter.write_line(f"criterion {number} {status}: {parts[0][0]}{suffix}")
