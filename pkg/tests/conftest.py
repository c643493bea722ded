import sys

import numpy as np
import pytest


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Echo the acceptance-criteria pass/fail lines after the run."""
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None) if mod else None
    if results:
        terminalreporter.section("acceptance criteria")
        for line in results:
            terminalreporter.write_line(line)


def central_diff_grad(f, x0, eps=1e-5):
    """Central finite differences of a scalar function of one array."""
    x0 = np.asarray(x0, dtype=np.float64)
    g = np.zeros_like(x0)
    flat = x0.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        hi = f(x0)
        flat[i] = orig - eps
        lo = f(x0)
        flat[i] = orig
        gf[i] = (hi - lo) / (2 * eps)
    return g


def assert_grad_close(analytic, numeric, rel=1e-4, floor=1e-6):
    """Relative comparison on entries whose magnitude exceeds the floor."""
    analytic = np.asarray(analytic)
    numeric = np.asarray(numeric)
    assert analytic.shape == numeric.shape
    scale = np.maximum(np.abs(analytic), np.abs(numeric))
    mask = scale > floor
    if not mask.any():
        return
    err = np.abs(analytic - numeric)[mask] / scale[mask]
    assert err.max() < rel, f"max relative gradient error {err.max():.3e}"


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
