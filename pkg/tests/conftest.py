import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def np_rng():
    return np.random.default_rng(12345)


def direct_dft2(x, inverse=False):
    """O(N^2) reference: explicit double sum per channel."""
    x = np.asarray(x, dtype=np.complex128)
    h, w = x.shape[:2]
    sign = 1.0 if inverse else -1.0
    u = np.arange(h)
    v = np.arange(w)
    eh = np.exp(sign * 2j * np.pi * np.outer(u, u) / h)
    ew = np.exp(sign * 2j * np.pi * np.outer(v, v) / w)
    out = np.zeros_like(x)
    for c in range(x.shape[2]):
        for a in range(h):
            for b in range(w):
                out[a, b, c] = np.sum(eh[a][:, None] * ew[b][None, :] * x[:, :, c])
    return out / (h * w) if inverse else out


@pytest.fixture(scope="session")
def acceptance(request):
    """Record one PASS/FAIL line per acceptance criterion; shown in the terminal summary."""
    lines = request.config.__dict__.setdefault("_acceptance_lines", [])

    def record(name, ok, detail=""):
        lines.append(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
        print(lines[-1])
        assert ok, f"{name}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.__dict__.get("_acceptance_lines")
    if lines:
        terminalreporter.section("acceptance criteria")
        for ln in lines:
            terminalreporter.write_line(ln)
