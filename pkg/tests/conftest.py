import sys

import pytest

from mcfqkd.config import load_preset
from mcfqkd.simulator import Analytic, simulate_sdm


@pytest.fixture(scope="session")
def preset():
    return load_preset("paper-defaults")


@pytest.fixture(scope="session")
def analytic_cores(preset):
    """30 s analytic block of all 37 cores."""
    return simulate_sdm(preset.protocol, preset.channel, preset.receiver, Analytic(30.0))



def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        ok, detail = results[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
