import pytest

_OUTCOMES = {}


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="also run the optional long studies marked slow")


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


def pytest_collection_modifyitems(config, items):
    skip = pytest.mark.skip(reason="optional long study; pass --runslow to include it")
    for item in items:
        if "slow" in item.keywords and not config.getoption("--runslow"):
            item.add_marker(skip)
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            item.user_properties.append(("criterion", mark.args[0]))


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    if report.when != "call" and report.passed:
        return
    if report.skipped and not hasattr(report, "wasxfail"):
        status = "SKIP"
    elif report.passed and not hasattr(report, "wasxfail"):
        status = "PASS"
    else:
        status = "FAIL"
    name = report.nodeid.split("::")[-1]
    _OUTCOMES.setdefault(props["criterion"], []).append((name, status, props.get("detail", "")))


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_OUTCOMES):
        runs = [r for r in _OUTCOMES[number] if r[1] != "SKIP"]
        if not runs:
            continue
        status = "PASS" if all(r[1] == "PASS" for r in runs) else "FAIL"
        terminalreporter.write_line(f"criterion {number}: {status}")
        for name, part, detail in runs:
            terminalreporter.write_line(f"    {part} {name}" + (f": {detail}" if detail else ""))
