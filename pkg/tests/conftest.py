import numpy as np
import pytest
from hypothesis import settings

from invisible_body.construction import ConstructionParams, build_body, derive_points

settings.register_profile("repro", derandomize=True, deadline=None)
settings.load_profile("repro")

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture(scope="session")
def canonical_params():
    return ConstructionParams.canonical()


@pytest.fixture(scope="session")
def body(canonical_params):
    return build_body(canonical_params)


@pytest.fixture(scope="session")
def shallow_body():
    return build_body(ConstructionParams.canonical(depth=3))


def make_asymmetric_params(depth: int = 12) -> ConstructionParams:
    """Canonical inputs with H1 moved off the bisector and H2 given explicitly."""
    cp = ConstructionParams.canonical(depth)
    d = derive_points(cp)
    ax = d.H1 - d.C1
    H1 = d.H1 + 0.1 * ax + 0.01 * np.array([-ax[1], ax[0]])
    return ConstructionParams(cp.A1, cp.A2, cp.L, cp.K, cp.O, H1=H1, H2=d.H2, depth=depth)


@pytest.fixture(scope="session")
def asymmetric_body():
    return build_body(make_asymmetric_params())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
