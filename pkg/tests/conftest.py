import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from clusterquilt.simulate import SimConfig, simulate

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# criterion number -> list of (label, passed, detail)
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[num]
        ok = all(p for _, p, _ in parts)
        detail = "; ".join(f"{label}: {'pass' if p else 'FAIL'} ({d})" for label, p, d in parts)
        terminalreporter.write_line(f"criterion {num:>2}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def report():
    """Record (and print) one acceptance sub-result."""

    def _report(num, label, passed, detail):
        ACCEPTANCE.setdefault(num, []).append((label, bool(passed), detail))
        print(f"criterion {num} [{label}]: {'PASS' if passed else 'FAIL'} {detail}")

    return _report


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def mosaic_clean():
    """Noiseless rank-2, K=3 mosaic instance."""
    cfg = SimConfig(n=120, p=40, K=3, r=2, d=4.5, M=3, pattern="mosaic", views=4, views_per_block=2,
                    sigma=0.0, seed=7)
    return simulate(cfg)


@pytest.fixture(scope="session")
def sequential_noisy():
    cfg = SimConfig(n=150, p=30, K=3, r=2, d=6.0, M=3, overlap=25, sigma=0.5, seed=11)
    return simulate(cfg)


@pytest.fixture(autouse=True)
def _isolated_cwd(tmp_path, monkeypatch):
    # commands without --out write their run manifest to the working directory
    monkeypatch.chdir(tmp_path)
