import numpy as np
import pytest

from taskmarket import kernels
from taskmarket.model import DigitalCapitalSpec, EconomyConfig, Mode, Occupation, OccupationSpec

BACKENDS = ["python", "compiled"]


@pytest.fixture(params=BACKENDS)
def backend(request, monkeypatch):
    """Route the library through one kernel backend for the test."""
    mod = kernels.python_backend if request.param == "python" else kernels.compiled_backend
    if mod is None:
        pytest.skip("compiled extension not built")
    for name in ("cost_gap", "bisect_cost_gap", "demean_alternating"):
        monkeypatch.setattr(kernels, name, getattr(mod, name))
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def const_lambda_economy(theta=4.0, rental=2.0, kappa_bar=1.0, gamma=2.0):
    occ = OccupationSpec(Occupation.PROF, 1.0, 0.0, 1.0, 1.0)
    return EconomyConfig((occ,), DigitalCapitalSpec(kappa_bar, theta, gamma, rental))


def random_economy(rng, n_occ=None, mode=Mode.RAW):
    """Capabilities U[0,2], wages U[0.5,2], kappa_bar U[0.1,1], theta U[0,10],
    gamma U(1,3], rental U[0.5,2]."""
    n_occ = n_occ or int(rng.integers(1, 6))
    kinds = rng.choice(list(Occupation), size=n_occ, replace=False)
    occs = []
    for k in kinds:
        caps = rng.uniform(0.0, 2.0, size=3)
        caps[0] += 1e-3  # never all-zero
        occs.append(OccupationSpec(Occupation(int(k)), *caps, rng.uniform(0.5, 2.0)))
    dc = DigitalCapitalSpec(rng.uniform(0.1, 1.0), rng.uniform(0.0, 10.0), 3.0 - 2.0 * rng.random(),
                            rng.uniform(0.5, 2.0))
    return EconomyConfig(tuple(occs), dc, mode)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
