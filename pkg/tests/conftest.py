import numpy as np
import pytest

from ris_isac.numerics import standard_complex_normal
from ris_isac.selftest import random_channel_set, random_psd  # noqa: F401


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def crandn(rng, *shape):
    return standard_complex_normal(rng, shape)


def rel_fro(A, B):
    return np.linalg.norm(A - B) / np.linalg.norm(B)


ACCEPTANCE = {}


def record(criterion, ok, detail):
    """Store one acceptance verdict; printed in the terminal summary."""
    ACCEPTANCE[criterion] = (bool(ok), detail)
    print(f"{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail}")
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, 10):
        ok, detail = ACCEPTANCE.get(n, (False, "not run"))
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
