import os
import subprocess
import sys

import numpy as np
import pytest
from scipy.linalg import expm

from hyperwalk import _fallback
from hyperwalk._backend import KERNEL_BACKEND
from hyperwalk.core import CycleConfig, NumericError, localized_state
from hyperwalk.cycle import build_cycle_superoperator

from conftest import random_density_matrix

compiled = pytest.importorskip("hyperwalk._kernels", reason="compiled extension not built")


@pytest.mark.skipif(os.environ.get("HYPERWALK_PURE_PYTHON", "") not in ("", "0"), reason="fallback forced")
def test_compiled_backend_selected_by_default():
    assert KERNEL_BACKEND == "cython"


def test_pure_python_override():
    env = dict(os.environ, HYPERWALK_PURE_PYTHON="1")
    out = subprocess.run(
        [sys.executable, "-c", "import hyperwalk; print(hyperwalk.KERNEL_BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "python"


@pytest.mark.parametrize("N", [2, 3, 5, 16])
@pytest.mark.parametrize("gamma", [0.0, 0.4, 50.0])
def test_rhs_backends_agree(N, gamma, rng):
    rho = random_density_matrix(rng, N)
    a = compiled.master_rhs(rho, gamma)
    b = _fallback.master_rhs(rho, gamma)
    assert np.max(np.abs(a - b)) <= 1e-15
    L = build_cycle_superoperator(CycleConfig(N, gamma))
    assert np.max(np.abs(a - L.apply(rho))) <= 1e-14


def test_rhs_writes_into_out(rng):
    rho = random_density_matrix(rng, 4)
    out = np.empty_like(rho)
    res = compiled.master_rhs(rho, 0.3, out)
    assert np.shares_memory(np.asarray(res), out)
    assert np.allclose(out, _fallback.master_rhs(rho, 0.3))


@pytest.mark.parametrize("N, gamma", [(3, 0.05), (5, 1.0), (4, 50.0)])
def test_dopri5_backends_match_expm(N, gamma):
    times = np.array([0.0, 0.5, 3.0, 20.0])
    rho0 = localized_state(N)
    L = build_cycle_superoperator(CycleConfig(N, gamma)).generator
    ref = np.array([(expm(t * L) @ rho0.reshape(-1)).reshape(N, N) for t in times])
    for impl in (compiled.dopri5, _fallback.dopri5):
        states, steps = impl(rho0, gamma, times)
        assert np.max(np.abs(np.asarray(states) - ref)) <= 1e-7
        assert steps > 0


def test_dopri5_single_time():
    rho0 = localized_state(3)
    states, steps = compiled.dopri5(rho0, 0.1, np.array([0.0]))
    assert np.array_equal(np.asarray(states)[0], rho0) and steps == 0


def test_dopri5_step_budget():
    with pytest.raises(NumericError):
        compiled.dopri5(localized_state(5), 1.0, np.array([0.0, 100.0]), max_steps=3)
