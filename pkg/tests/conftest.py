import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_hermitian(rng, n):
    x = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return 0.5 * (x + x.conj().T)


# Verdict lines from the acceptance suite, echoed in the terminal summary so
# they show up without -s.
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def verdict(request):
    """Record ``PASS/FAIL criterion N: detail`` and fail the test when ``ok`` is false."""

    def _verdict(n: int, ok: bool, detail: str, soft: bool = False) -> None:
        tag = "PASS" if ok else ("WARN" if soft else "FAIL")
        line = f"{tag} criterion {n}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        if not ok and not soft:
            pytest.fail(line, pytrace=False)

    return _verdict


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
