import math

import numpy as np
import pytest

from taskmarket import kernels
from taskmarket.model import DigitalCapitalSpec, Occupation, OccupationSpec, digital_unit_cost, labor_unit_cost

needs_compiled = pytest.mark.skipif(kernels.compiled_backend is None, reason="compiled extension not built")


def test_backend_name():
    assert kernels.BACKEND_NAME in ("compiled", "python")


@needs_compiled
def test_cost_gap_backends_agree(rng):
    for _ in range(200):
        args = (*rng.uniform(0, 2, 3), rng.uniform(0.5, 2), bool(rng.integers(2)), rng.uniform(0.1, 1),
                rng.uniform(0, 10), rng.uniform(1.01, 3), rng.uniform(0.5, 2))
        z = rng.uniform()
        a = kernels.python_backend.cost_gap(z, *args)
        b = kernels.compiled_backend.cost_gap(z, *args)
        assert a == pytest.approx(b, rel=1e-14, abs=1e-14)


def test_cost_gap_matches_model(backend):
    o = OccupationSpec(Occupation.TECH, 0.3, 0.5, 1.7, 1.3)
    d = DigitalCapitalSpec(0.4, 3.0, 1.8, 1.1)
    for z in np.linspace(0, 1, 11):
        expected = labor_unit_cost(o, z) - digital_unit_cost(d, z)
        got = kernels.cost_gap(z, 0.3, 0.5, 1.7, 1.3, False, 0.4, 3.0, 1.8, 1.1)
        assert got == pytest.approx(expected, rel=1e-13)


def test_cost_gap_infinite_labor(backend):
    assert kernels.cost_gap(0.0, 0.0, 1.0, 0.0, 1.0, False, 1.0, 1.0, 2.0, 1.0) == math.inf


def test_bisection_finds_closed_form_root(backend):
    root, iters, ok = kernels.bisect_cost_gap(0.0, 1.0, 1.0, 0.0, 1.0, 1.0, False, 1.0, 4.0, 2.0, 2.0, 1e-13, 200)
    assert ok and iters > 0
    assert root == pytest.approx(0.5, abs=1e-12)


def test_bisection_exact_endpoint(backend):
    # gap is exactly zero at z = 1 for theta = 1 (cost 1 vs 2/2)
    root, iters, ok = kernels.bisect_cost_gap(0.5, 1.0, 1.0, 0.0, 1.0, 1.0, False, 1.0, 1.0, 2.0, 2.0, 1e-12, 200)
    assert (root, iters, ok) == (1.0, 0, True)


def test_bisection_iteration_cap(backend):
    _, iters, ok = kernels.bisect_cost_gap(0.0, 1.0, 1.0, 0.0, 1.0, 1.0, False, 1.0, 3.0, 2.0, 2.0, 1e-15, 5)
    assert iters == 5 and not ok


def test_demean_single_factor_one_sweep(backend):
    X = np.array([[1.0], [3.0], [10.0]])
    codes = np.array([[0], [0], [1]], dtype=np.int64)
    sweeps, ok = kernels.demean_alternating(X, codes, np.array([2], dtype=np.int64), 1e-10, 1000)
    assert ok and sweeps == 1
    np.testing.assert_allclose(X[:, 0], [-1.0, 1.0, 0.0])


@needs_compiled
def test_demean_backends_agree(rng):
    n = 300
    codes = np.column_stack([rng.integers(0, 7, n), rng.integers(0, 11, n)]).astype(np.int64)
    levels = np.array([7, 11], dtype=np.int64)
    X = rng.normal(size=(n, 4))
    a, b = X.copy(), X.copy()
    ra = kernels.python_backend.demean_alternating(a, codes, levels, 1e-12, 1000)
    rb = kernels.compiled_backend.demean_alternating(b, codes, levels, 1e-12, 1000)
    assert ra == rb
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_pure_python_env_switch(monkeypatch):
    import importlib
    monkeypatch.setenv("TASKMARKET_PURE_PYTHON", "1")
    try:
        mod = importlib.reload(kernels)
        assert mod.BACKEND_NAME == "python"
        assert mod.bisect_cost_gap is mod.python_backend.bisect_cost_gap
    finally:
        monkeypatch.delenv("TASKMARKET_PURE_PYTHON")
        importlib.reload(kernels)
