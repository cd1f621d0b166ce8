"""Pure-Python implementations of the compiled kernels in ``_kernels.pyx``."""

import numpy as np
from scipy.integrate import solve_ivp

from hyperwalk.core import NumericError


def master_rhs(rho, gamma, out=None):
    """Time derivative of ``rho`` under the decoherent cycle walk."""
    rho = np.asarray(rho)
    d = 0.25j * (
        np.roll(rho, -1, axis=1) - np.roll(rho, -1, axis=0) - np.roll(rho, 1, axis=0) + np.roll(rho, 1, axis=1)
    )
    off = rho.copy()
    np.fill_diagonal(off, 0.0)
    d -= gamma * off
    if out is not None:
        out[...] = d
        return out
    return d


def dopri5(rho0, gamma, times, rtol=1e-9, atol=1e-12, max_steps=10_000_000):
    """Integrate with scipy's RK45 (Dormand-Prince 5(4)); same contract as the compiled version."""
    rho0 = np.ascontiguousarray(rho0, dtype=complex)
    times = np.asarray(times, dtype=float)
    N = rho0.shape[0]
    if times.size == 1 or times[-1] == times[0]:
        return np.repeat(rho0[None], times.size, axis=0), 0

    def rhs(_t, y):
        return master_rhs(y.reshape(N, N), gamma).reshape(-1)

    sol = solve_ivp(rhs, (times[0], times[-1]), rho0.reshape(-1), method="RK45", t_eval=times, rtol=rtol, atol=atol)
    if not sol.success:
        raise NumericError(f"RK45 integration failed: {sol.message}")
    return sol.y.T.reshape(times.size, N, N).copy(), int(sol.nfev // 6)
