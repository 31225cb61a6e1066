import os

import numpy as np
import pytest


@pytest.fixture(autouse=True, scope="session")
def _isolated_cache(tmp_path_factory):
    """Keep null-distribution caches out of the user's home directory."""
    path = tmp_path_factory.mktemp("null-cache")
    old = os.environ.get("CRAMP_CACHE_DIR")
    os.environ["CRAMP_CACHE_DIR"] = str(path)
    yield path
    if old is None:
        os.environ.pop("CRAMP_CACHE_DIR", None)
    else:
        os.environ["CRAMP_CACHE_DIR"] = old


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    """One pass/fail line per acceptance criterion, with the measured numbers."""
    import re
    import sys

    mod = sys.modules.get("tests.test_acceptance")
    details = getattr(mod, "DETAILS", {}) if mod else {}
    outcome = {}
    for key in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(key, []):
            mt = re.search(r"test_acceptance\.py::test_criterion_(\d+)", getattr(rep, "nodeid", ""))
            if mt and (rep.when == "call" or key != "passed"):
                n = int(mt.group(1))
                if outcome.get(n) != "FAIL":
                    outcome[n] = "PASS" if key == "passed" else "FAIL"
    if not outcome:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(outcome):
        terminalreporter.write_line(f"criterion {n:2d}: {outcome[n]}  {details.get(n, '')}")
