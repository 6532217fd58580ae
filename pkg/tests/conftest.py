import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def short_sim():
    """One short replication of the default scenario, shared across modules."""
    from wzsafety.microsim import ScenarioConfig, run_replication

    cfg = ScenarioConfig(sim_duration=240.0, warmup=60.0)
    return run_replication(cfg, 0, check=True)


@pytest.fixture(scope="session")
def short_analysis(short_sim):
    from wzsafety.pipeline import analyze

    return analyze(short_sim.tracks, short_sim.config.effective_layout)


ACCEPTANCE = {}


@pytest.fixture
def verdict():
    """Record one acceptance line: ``verdict(number, ok, detail)``."""

    def record(number, ok, detail=""):
        prev = ACCEPTANCE.get(number)
        ok = bool(ok) and (prev is None or prev[0])
        text = detail if prev is None or not detail else f"{prev[1]}; {detail}"
        ACCEPTANCE[number] = (ok, text)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
