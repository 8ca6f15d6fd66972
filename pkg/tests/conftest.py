import numpy as np
import pytest


def feasible_perturbations(p_star, constraints, rng, count, max_tries=100):
    """Distributions with the same constraint moments as ``p_star``.

    Random directions are projected onto the null space of the constraint
    matrix and scaled to keep every entry non-negative.
    """
    A = np.vstack([np.ones_like(p_star)] + [np.asarray(c, dtype=float) for c in constraints])
    _, s, vt = np.linalg.svd(A)
    rank = int(np.sum(s > 1e-12 * s[0]))
    null = vt[rank:]
    out = []
    for _ in range(count):
        d = null.T @ rng.normal(size=null.shape[0])
        neg = d < 0
        t_max = np.min(p_star[neg] / -d[neg]) if neg.any() else 1.0
        q = p_star + rng.uniform(0, 1) * t_max * d
        out.append(np.clip(q, 0, None))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def record_criterion(number, ok, detail):
    """Remember one acceptance verdict; all are echoed in the terminal summary."""
    line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
