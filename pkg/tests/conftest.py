import os
import sys

import pytest
from hypothesis import HealthCheck, settings

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
CORPUS_DIR = os.path.join(ROOT, "data", "corpus")
CORPUS = ("astronaut", "coffee", "chelsea", "rocket", "immunohistochemistry", "retina")

settings.register_profile("default", max_examples=200, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def corpus_path(name):
    return os.path.join(CORPUS_DIR, name + ".ppm")


@pytest.fixture
def corpus():
    from simcom.workloads import load_ppm
    return [(n, load_ppm(corpus_path(n))) for n in CORPUS]


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "ACCEPT_LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda l: int(l.split()[1].rstrip("]"))):
            terminalreporter.write_line(line)
