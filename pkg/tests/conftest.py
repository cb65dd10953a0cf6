import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def orthonormal(rng, n, r):
    q, _ = np.linalg.qr(rng.standard_normal((n, r)))
    return q


def random_spec(rng, act, branch_in=2, trunk_in=3):
    from mfrom.deeponet import NetSpec
    bh = tuple(int(w) for w in rng.integers(1, 11, rng.integers(1, 4)))
    th = tuple(int(w) for w in rng.integers(1, 11, rng.integers(1, 4)))
    return NetSpec(branch_in, trunk_in, bh, th, int(rng.integers(1, 11)), act, act)


def fd_gradient(model, batch, l2, h=1e-6):
    from mfrom import deeponet as dn
    fd = np.empty_like(model.theta)
    for i in range(fd.size):
        tp = model.theta.copy()
        tp[i] += h
        tm = model.theta.copy()
        tm[i] -= h
        fd[i] = (dn.loss_mse_l2(model.with_theta(tp), batch, l2)
                 - dn.loss_mse_l2(model.with_theta(tm), batch, l2)) / (2 * h)
    return fd


def max_rel_discrepancy(a, b):
    den = np.maximum(np.abs(a), np.abs(b))
    return float(np.max(np.where(den > 0, np.abs(a - b) / np.where(den > 0, den, 1.0), 0.0)))


_ACCEPTANCE_LINES = []


@pytest.fixture
def verdict():
    """Record one ``CRITERION k: PASS|FAIL`` line and assert on it."""

    def record(number, ok, detail):
        line = f"CRITERION {number}: {'PASS' if ok else 'FAIL'} - {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line, flush=True)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
