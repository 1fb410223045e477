import sys
from pathlib import Path

import pytest

# Shared builders live next to the tests.
sys.path.insert(0, str(Path(__file__).parent))

_ACCEPTANCE_MODULE = "test_acceptance"


def pytest_runtest_logreport(report):
    """One visible PASS/FAIL line per acceptance criterion."""
    if report.when != "call":
        return
    module = report.nodeid.split("::", 1)[0]
    if _ACCEPTANCE_MODULE not in module:
        return
    name = report.nodeid.split("::", 1)[1]
    if report.passed:
        print(f"\nACCEPTANCE PASS: {name}")
    elif report.failed:
        print(f"\nACCEPTANCE FAIL: {name}")
    elif report.skipped:
        print(f"\nACCEPTANCE SKIP: {name}")
