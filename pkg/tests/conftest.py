import numpy as np
import pytest
from hypothesis import HealthCheck, settings


settings.register_profile(
    "default", deadline=None, max_examples=50, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from .helpers import ACCEPTANCE

    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for (number, case) in sorted(ACCEPTANCE):
        status, title, detail = ACCEPTANCE[number, case]
        label = f"C{number}" + (f"[{case}]" if case else "")
        terminalreporter.write_line(f"[{status}] {label} {title}: {detail}")
