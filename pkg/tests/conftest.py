import numpy as np
import pytest

from sqroute.experiments import random_instance


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def held_karp(points: np.ndarray) -> float:
    """Exact closed-tour optimum by dynamic programming over subsets (N <= 13)."""
    n = len(points)
    d = np.hypot(*(points[:, None, :] - points[None, :, :]).transpose(2, 0, 1))
    full = 1 << (n - 1)
    dp = np.full((full, n - 1), np.inf)
    for j in range(n - 1):
        dp[1 << j, j] = d[0, j + 1]
    for S in range(1, full):
        row = dp[S]
        if not np.isfinite(row).any():
            continue
        for k in range(n - 1):
            if S >> k & 1:
                continue
            T = S | (1 << k)
            v = np.min(row + d[1:, k + 1])
            if v < dp[T, k]:
                dp[T, k] = v
    return float(np.min(dp[full - 1] + d[1:, 0]))


def instances(seed, count, m_values, rhos):
    """Deterministic batch of random ordered instances."""
    gen = np.random.default_rng(seed)
    out = []
    for k in range(count):
        m = m_values[k % len(m_values)]
        rho = rhos[k % len(rhos)]
        out.append(random_instance(gen, m, rho))
    return out


ACCEPTANCE_LINES: list[str] = []


def _criterion_key(line: str):
    label = line.split()[1]
    digits = "".join(ch for ch in label if ch.isdigit())
    return int(digits), label


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=_criterion_key):
            terminalreporter.write_line(line)
