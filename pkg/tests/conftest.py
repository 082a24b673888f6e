import functools
import json
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings, strategies as st

from semiflow.engine import RunConfig, run

ROOT = Path(__file__).resolve().parent.parent
CONFIGS = ROOT / "configs"
SHIPPED = ("always_n20", "mlr_n20", "frand_n20", "stress_c2_n14")

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

bits = functools.partial(st.text, alphabet="01")


def load_config(name: str) -> RunConfig:
    return RunConfig.from_dict(json.loads((CONFIGS / f"{name}.json").read_text()))


@functools.lru_cache(maxsize=None)
def shipped_run(name: str):
    return run(load_config(name))


@pytest.fixture(scope="session")
def fixture_run():
    return shipped_run("fixture_always_n8")


@pytest.fixture(scope="session", params=SHIPPED)
def shipped(request):
    return shipped_run(request.param)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split()[0][2:])):
            terminalreporter.write_line(line)
