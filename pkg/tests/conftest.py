from pathlib import Path

import numpy as np
import pytest

DATA = Path(__file__).parent / "data"

TABLE5 = np.array(
    [
        [2847, 5084, 3284, 2265, 2471],
        [11305, 31492, 12951, 1895, 9610],
        [33107, 55652, 36699, 5345, 20370],
        [22682, 46322, 30200, 5165, 27659],
        [9576, 20477, 19721, 2339, 7551],
        [1783, 3515, 2549, 392, 11240],
        [15019, 14297, 8608, 1397, 6014],
    ]
)
TABLE5_ROW_MARGINS = [15951, 67253, 151173, 132028, 59664, 19479, 45335]
TABLE5_COL_MARGINS = [96319, 176839, 114012, 18798, 84915]
TABLE5_TOTAL = 490883


@pytest.fixture
def data_dir():
    return DATA


@pytest.fixture
def table5_path():
    return DATA / "table5.tsv"


# -- acceptance verdict lines ---------------------------------------------------------

_VERDICTS: list[str] = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    failed_setup = rep.when == "setup" and not rep.passed
    if rep.when == "call" or failed_setup:
        number, title = marker.args
        verdict = "PASS" if rep.passed else "FAIL"
        line = f"[{verdict}] criterion {number:>2}: {title} ({rep.duration:.2f} s)"
        _VERDICTS.append(line)
        reporter = item.config.pluginmanager.get_plugin("terminalreporter")
        if reporter is not None:
            reporter.write_line("")
            reporter.write_line(line)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_VERDICTS, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
