"""Single-cycle walk: generator, propagator, numeric evolution and closed-form kernels.

Vectorization convention: a density matrix ``rho`` of shape (N, N) maps to
``rho.reshape(-1)``, i.e. position ``alpha * N + beta``. With this ordering the
left Kronecker factor acts on the row index, so ``kron(H, I) @ vec(rho)`` is
``vec(H @ rho)`` and ``kron(I, H) @ vec(rho)`` is ``vec(rho @ H.T)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np
import scipy.linalg

from hyperwalk import _backend
from hyperwalk.core import (
    CycleConfig,
    DomainError,
    NumericError,
    check_distribution,
    require_density_matrix,
)

EXPM_METHOD = "scipy.linalg.expm (scaling and squaring, Pade)"
AUTO_EXACT_MAX_POSITIONS = 10_000

WEAK_VALIDITY_MAX_GAMMA = 0.1
STRONG_VALIDITY_MIN_GAMMA = 10.0


def master_rate_scale(N: int) -> float:
    """Rate scale that matches the master equation: 1/2, or 1 for N = 2 where both hops hit one pair."""
    return 1.0 if N == 2 else 0.5


def build_hamiltonian(config: CycleConfig) -> np.ndarray:
    """Nearest-neighbour hopping Hamiltonian with amplitude 1/4 on the cycle."""
    N = config.size_N
    H = np.zeros((N, N), dtype=complex)
    for mu in range(N):
        nu = (mu + 1) % N
        H[mu, nu] += 0.25
        H[nu, mu] += 0.25
    return H


def dephasing_mask(N: int) -> np.ndarray:
    """1 on vectorized off-diagonal positions, 0 on diagonal ones."""
    return (1.0 - np.eye(N)).reshape(-1)


@dataclass(frozen=True)
class CycleSuperOperator:
    config: CycleConfig
    generator: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.generator.shape[0]

    def apply(self, rho) -> np.ndarray:
        rho = np.asarray(rho, dtype=complex)
        N = self.config.size_N
        return (self.generator @ rho.reshape(-1)).reshape(N, N)


def build_cycle_superoperator(config: CycleConfig) -> CycleSuperOperator:
    """Generator L with dV/dt = L V for the vectorized density matrix V."""
    N = config.size_N
    H = build_hamiltonian(config)
    eye = np.eye(N)
    coherent = -1j * (np.kron(H, eye) - np.kron(eye, H))
    # I⊗I - sum_mu P_mu⊗P_mu is diagonal: 1 where alpha != beta
    decoherence = -config.gamma * np.diag(dephasing_mask(N))
    L = coherent + decoherence
    L.setflags(write=False)
    return CycleSuperOperator(config, L)


@dataclass(frozen=True)
class Propagator:
    config: CycleConfig
    time: float
    matrix: np.ndarray = field(repr=False)
    method: str = EXPM_METHOD

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def apply(self, rho) -> np.ndarray:
        rho = np.asarray(rho, dtype=complex)
        N = self.config.size_N
        return (self.matrix @ rho.reshape(-1)).reshape(N, N)


def _expm(A: np.ndarray) -> np.ndarray:
    M = scipy.linalg.expm(A)
    if not np.all(np.isfinite(M)):
        norm = np.linalg.norm(A, 1)
        raise NumericError(f"matrix exponential produced non-finite entries (1-norm of argument {norm:.3g})")
    return M


def propagator_exact(superop: CycleSuperOperator, t: float) -> Propagator:
    """M(t) = exp(t L)."""
    if not t >= 0:
        raise DomainError(f"time must be >= 0, got {t!r}")
    M = _expm(t * superop.generator)
    M.setflags(write=False)
    return Propagator(superop.config, float(t), M)


@dataclass(frozen=True)
class Evolution:
    """States on a time grid plus the run metadata that produced them."""

    times: np.ndarray
    states: np.ndarray = field(repr=False)
    info: dict = field(default_factory=dict)

    @property
    def probabilities(self) -> np.ndarray:
        return np.real(np.diagonal(self.states, axis1=-2, axis2=-1)).copy()


def _check_times(times) -> np.ndarray:
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if times.ndim != 1 or times.size == 0:
        raise DomainError("time grid must be a non-empty 1-d sequence")
    if times[0] < 0 or not np.all(np.isfinite(times)):
        raise DomainError("times must be finite and non-negative")
    if np.any(np.diff(times) <= 0):
        raise DomainError("times must be strictly increasing")
    return times


def evolve_numeric(
    superop: CycleSuperOperator,
    rho0,
    times,
    backend: Literal["exact", "ode", "auto"] = "auto",
    rtol: float = 1e-9,
    atol: float = 1e-12,
) -> Evolution:
    """Evolve ``rho0`` on a cycle and return the density matrices at ``times``.

    ``backend="exact"`` applies ``exp(t L)`` at every grid time; ``"ode"``
    integrates the master equation with an adaptive Dormand-Prince 5(4)
    scheme (compiled when the extension is built); ``"auto"`` picks the exact
    exponential while the vectorized state has at most 10^4 positions.
    """
    N = superop.config.size_N
    rho0 = require_density_matrix(rho0, N)
    times = _check_times(times)
    if backend == "auto":
        backend = "exact" if N * N <= AUTO_EXACT_MAX_POSITIONS else "ode"
    if backend == "exact":
        v0 = rho0.reshape(-1)
        states = np.empty((times.size, N, N), dtype=complex)
        for i, t in enumerate(times):
            states[i] = (_expm(t * superop.generator) @ v0).reshape(N, N)
        info = {"backend": "exact", "method": EXPM_METHOD}
    elif backend == "ode":
        grid = times if times[0] == 0 else np.concatenate(([0.0], times))
        states, nsteps = _backend.dopri5(np.ascontiguousarray(rho0), superop.config.gamma, grid, rtol, atol)
        if grid is not times:
            states = states[1:]
        info = {
            "backend": "ode",
            "method": "Dormand-Prince 5(4), adaptive",
            "kernel": _backend.KERNEL_BACKEND,
            "rtol": rtol,
            "atol": atol,
            "steps": int(nsteps),
        }
    else:
        raise DomainError(f"unknown backend {backend!r}")
    return Evolution(times, np.asarray(states), info)


# -- closed-form kernels ------------------------------------------------------


def _weak_decay_classes(N: int) -> np.ndarray:
    """Size of the degenerate block holding each momentum pair (k, l), k != l.

    Pairs with equal transfer q = k - l and equal energy gap are mixed by the
    dephasing term; a block of size g decays at rate gamma * (1 - g / N) for
    the translation-symmetric component excited by a localized start. Entries
    with k == l are 0.
    """
    g = np.zeros((N, N), dtype=int)
    for k in range(N):
        for l in range(N):
            if k == l:
                continue
            q = (k - l) % N
            size = 1
            if N % 2 == 0 and (N // 2 + q - k) % N != k:
                size = 2
            g[k, l] = size
    return g


def _weak_fourier(N: int, gamma: float, t: float) -> np.ndarray:
    k = np.arange(N)
    kk, ll = np.meshgrid(k, k, indexing="ij")
    g = _weak_decay_classes(N)
    gap = np.sin(np.pi * (kk + ll) / N) * np.sin(np.pi * (kk - ll) / N)
    coeff = np.where(g > 0, np.exp(-gamma * (1.0 - g / N) * t + 1j * t * gap), 0.0) / N**2
    # C[a, b] = sum_{k,l} coeff[k, l] exp(2 pi i (k a - l b) / N)
    C = N * np.fft.ifft(np.fft.fft(coeff, axis=1), axis=0)
    return C + np.eye(N) / N


def _weak_shifted(N: int, gamma: float, t: float) -> np.ndarray:
    m = np.arange(N)
    mm, nn = np.meshgrid(m, m, indexing="ij")
    weight = 1.0 - ((mm + nn) == 0) - ((mm + nn) == N)
    decay = np.where(mm == nn, np.exp(-gamma * (N - 1) * t / N), np.exp(-gamma * (N - 2) * t / N))
    phase = np.exp(1j * t * np.sin(np.pi * (mm + nn) / N) * np.cos(np.pi * (mm - nn) / N))
    coeff = weight * decay * phase / N**2
    # sum_{m,n} coeff[m, n] exp(2 pi i (m a + n b) / N)
    S = N**2 * np.fft.ifft2(coeff)
    a = np.arange(N)
    prefactor = 1j ** ((a[:, None] - a[None, :]) % 4)
    return np.eye(N) / N + prefactor * S


def analytic_weak_C(config: CycleConfig, t: float, form: Literal["fourier", "shifted"] = "fourier") -> np.ndarray:
    """Weak-decoherence density matrix for a walker started at vertex 0.

    Parameters
    ----------
    form : {"fourier", "shifted"}
        ``"fourier"`` sums over momentum pairs (k, l) with the coherent phase
        ``exp(i t sin(pi(k+l)/N) sin(pi(k-l)/N))`` and first-order dephasing
        rates ``gamma (1 - g/N)``, valid for every N. ``"shifted"`` is the
        classic closed form written with the ``i**(alpha-beta)`` prefactor and a
        quarter-period shifted momentum grid; it is identical to ``"fourier"``
        when ``4 | N`` and does not describe the walk otherwise.
    """
    if not t >= 0:
        raise DomainError(f"time must be >= 0, got {t!r}")
    N, gamma = config.size_N, config.gamma
    if form == "fourier":
        return _weak_fourier(N, gamma, t)
    if form == "shifted":
        return _weak_shifted(N, gamma, t)
    raise DomainError(f"unknown weak kernel form {form!r}")


@dataclass(frozen=True)
class StrongDecoherenceDiagonals:
    d0: np.ndarray
    d1: np.ndarray
    time: float


def analytic_strong_diagonals(
    config: CycleConfig, t: float, rate_scale: float | None = None
) -> StrongDecoherenceDiagonals:
    """Main diagonal ``d0`` and first off-diagonal ``d1[a] = i * rho[a+1, a]`` at large gamma.

    ``rate_scale`` multiplies ``t / gamma`` in the diffusive exponent and the
    ``1 / gamma`` amplitude of ``d1``. The default, :func:`master_rate_scale`,
    is what adiabatic elimination of the hopping amplitude 1/4 gives (0.5, or
    1 for N = 2). ``rate_scale=1`` for N >= 3 reproduces the widely quoted
    closed form, whose populations diffuse twice as fast as the walk does.
    """
    gamma = config.gamma
    if gamma == 0:
        raise DomainError("strong-decoherence kernel divides by gamma; gamma must be > 0")
    if not t >= 0:
        raise DomainError(f"time must be >= 0, got {t!r}")
    N = config.size_N
    if rate_scale is None:
        rate_scale = master_rate_scale(N)
    k = np.arange(N)
    s = np.sin(np.pi * k / N)
    diffusive = np.exp(-rate_scale * t / gamma * s**2)
    d0 = np.fft.ifft(diffusive)
    amp = 1j * rate_scale * s / gamma * (np.exp(-gamma * t) - diffusive)
    d1 = np.fft.ifft(amp * np.exp(1j * np.pi * k / N))
    if np.max(np.abs(d0.imag)) > 1e-12:
        raise NumericError(f"imaginary residue {np.max(np.abs(d0.imag)):.3g} on the main diagonal")
    return StrongDecoherenceDiagonals(d0.real.copy(), d1, float(t))


def analytic_strong_C(config: CycleConfig, t: float, rate_scale: float | None = None) -> np.ndarray:
    """Tridiagonal (cyclic) density matrix assembled from the strong-decoherence diagonals."""
    diag = analytic_strong_diagonals(config, t, rate_scale)
    N = config.size_N
    C = np.diag(diag.d0).astype(complex)
    a = np.arange(N)
    # undo the i**j phase of d^j: rho[a+1, a] = -i d1[a]
    C[(a + 1) % N, a] = -1j * diag.d1
    if N > 2:
        C[a, (a + 1) % N] = np.conj(C[(a + 1) % N, a])
    return C


@dataclass(frozen=True)
class AnalyticKernel:
    """Closed-form density matrix C(t) for a walker started at vertex 0.

    ``regime`` selects the weak (``gamma << 1``) or strong (``gamma >> 1``)
    expansion; ``options`` is forwarded to the evaluator (``form`` for weak,
    ``rate_scale`` for strong).
    """

    regime: Literal["weak", "strong"]
    config: CycleConfig
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.regime not in ("weak", "strong"):
            raise DomainError(f"unknown regime {self.regime!r}")
        if self.regime == "strong" and self.config.gamma == 0:
            raise DomainError("strong-decoherence kernel requires gamma > 0")

    @property
    def validity_window(self) -> tuple[float, float]:
        if self.regime == "weak":
            return (0.0, WEAK_VALIDITY_MAX_GAMMA)
        return (STRONG_VALIDITY_MIN_GAMMA, float("inf"))

    @property
    def in_validity_window(self) -> bool:
        lo, hi = self.validity_window
        return lo <= self.config.gamma <= hi

    def matrix(self, t: float) -> np.ndarray:
        if self.regime == "weak":
            return analytic_weak_C(self.config, t, **self.options)
        return analytic_strong_C(self.config, t, **self.options)

    def diagonal(self, t: float) -> np.ndarray:
        return np.real(np.diag(self.matrix(t))).copy()

    def metadata(self, t: float | None = None) -> dict:
        meta = {
            "regime": self.regime,
            "size_N": self.config.size_N,
            "gamma": self.config.gamma,
            "options": dict(self.options),
            "validity_window": list(self.validity_window),
            "in_validity_window": self.in_validity_window,
        }
        if t is not None:
            C = self.matrix(t)
            meta["hermiticity_residual"] = float(np.max(np.abs(C - C.conj().T)))
            meta["trace_residual"] = float(abs(np.trace(C) - 1))
        return meta


def propagate_classical(kernel: AnalyticKernel, initial_diagonal, t: float) -> np.ndarray:
    """P[a](t) = sum_mu C[a-mu, a-mu](t) p0[mu] for a classical (diagonal) start."""
    p0 = check_distribution(initial_diagonal)
    N = kernel.config.size_N
    if p0.size != N:
        raise DomainError(f"distribution has {p0.size} entries, kernel expects {N}")
    c = kernel.diagonal(t)
    P = np.real(np.fft.ifft(np.fft.fft(c) * np.fft.fft(p0)))
    if abs(P.sum() - 1.0) > 1e-10:
        raise NumericError(f"propagated distribution sums to {P.sum()!r}")
    return P
