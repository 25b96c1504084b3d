import logging

import pytest

_CRITERIA: list[str] = []


@pytest.fixture(autouse=True)
def _quiet_cluster_warnings(caplog):
    caplog.set_level(logging.ERROR, logger="odlkit")


@pytest.fixture()
def criterion():
    """Record one acceptance line; call as criterion(id, ok, detail)."""

    def record(cid: str, ok: bool, detail: str) -> bool:
        line = f"criterion {cid:<3} {'PASS' if ok else 'FAIL'}  {detail}"
        _CRITERIA.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)
