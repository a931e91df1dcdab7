import numpy as np
import pytest

from spdradial.radial import BoundaryDirection


def random_spd(rng, m, cond=None):
    """Random SPD matrix; with ``cond`` set, log-uniform spectrum spanning that condition number."""
    Q, _ = np.linalg.qr(rng.normal(size=(m, m)))
    if cond is None:
        lam = np.exp(rng.normal(size=m))
    else:
        lam = np.exp(rng.uniform(0.0, np.log(cond), size=m))
        if m > 1:
            lam[0], lam[-1] = 1.0, float(cond)
    A = (Q * lam) @ Q.T
    return 0.5 * (A + A.T)


def random_sym(rng, m, scale=1.0):
    A = rng.normal(size=(m, m)) * scale
    return 0.5 * (A + A.T)


def random_direction(rng, m, cond=None):
    p = random_spd(rng, m, cond)
    return BoundaryDirection.from_tangent(p, random_sym(rng, m))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=["compiled", "pure"])
def backend(request):
    """Kernel module for each available backend."""
    from spdradial import _purepy

    if request.param == "pure":
        return _purepy
    return pytest.importorskip("spdradial._kernels")


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "REPORT", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(lines):
        terminalreporter.write_line(lines[n])
