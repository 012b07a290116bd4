import pytest

# criterion number -> (title, outcome, measured values)
_RESULTS: dict[int, tuple[str, str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or not (rep.when == "call" or rep.failed):
        return
    measured = "; ".join(v for k, v in item.user_properties if k == "measured")
    _RESULTS[mark.args[0]] = (mark.args[1], "PASS" if rep.passed else "FAIL", measured)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_RESULTS):
        title, verdict, measured = _RESULTS[k]
        terminalreporter.write_line(f"criterion {k:2d} {verdict}  {title}  [{measured}]")
