import pytest

from hybridwipe import MediumGeometry, NvmDevice, NvmKind


@pytest.fixture
def tiny():
    return MediumGeometry(frame_count=8, page_size=8, block_size=4)


@pytest.fixture
def ow_device(tiny):
    return NvmDevice(NvmKind.OVERWRITABLE, tiny)


@pytest.fixture
def flash_device(tiny):
    return NvmDevice(NvmKind.FLASH_LIKE, tiny)


def fill(byte, n=8):
    return bytes([byte]) * n


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")
    config._criteria = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when not in ("setup", "call"):
        return
    key = marker.args[0]
    results = item.config._criteria
    ok = report.passed if report.when == "call" else not report.failed
    if report.when == "call" or not ok:
        results[key] = (marker.args[1], results.get(key, (None, True))[1] and ok)


def pytest_terminal_summary(terminalreporter, config):
    results = getattr(config, "_criteria", {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(results):
        title, ok = results[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {title}")
