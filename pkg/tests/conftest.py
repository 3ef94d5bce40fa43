import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from yamabe_lab import BackgroundSpec, FlowConfig, build_background, run_flow

settings.register_profile(
    "default", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.load_profile("default")

ACCEPTANCE = {}


def record_criterion(number, ok, detail):
    """Store one acceptance line; printed in the terminal summary."""
    ACCEPTANCE[number] = (bool(ok), detail)
    print(f"criterion {number}: {'PASS' if ok else 'FAIL'} {detail}")


@pytest.fixture
def criterion():
    return record_criterion


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def negative_bg():
    return build_background(BackgroundSpec(kind="synthetic", N=6, r0=-6.0, r0_bump_amplitude=2.0))


@pytest.fixture(scope="session")
def negative_run(negative_bg):
    cfg = FlowConfig(mode="normalized", t_end=5.0, sample_dt=0.05,
                     tracked_ops=("laplacian/closed",))
    return run_flow(negative_bg, np.ones(negative_bg.num_vertices), cfg)


@pytest.fixture(scope="session")
def positive_bg():
    # anisotropic sides keep the first closed eigenvalue simple
    return build_background(BackgroundSpec(kind="synthetic", N=6, L=(5.0, 6.0, 7.0),
                                           r0=1.0, r0_bump_amplitude=1.0))


@pytest.fixture(scope="session")
def positive_run(positive_bg):
    ops = ("laplacian/closed", "schrodinger(a=0.0625)/closed", "schrodinger(a=0.125)/closed",
           "schrodinger(a=0.5)/closed", "schrodinger(a=1)/closed")
    cfg = FlowConfig(mode="unnormalized", t_end=0.02, sample_dt=1e-3, dt=1e-4,
                     tracked_ops=ops, track_diameter=False)
    return run_flow(positive_bg, np.ones(positive_bg.num_vertices), cfg)
