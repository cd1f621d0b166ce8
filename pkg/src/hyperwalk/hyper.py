"""Hyper-cycle walks through the tensor factorization of the single-cycle propagator.

Two vectorizations are in play. The core one flattens the N^n x N^n density
matrix row-major (``rho.reshape(-1)``). The interleaved one used here orders
the indices as (a_1, b_1, a_2, b_2, ..., a_n, b_n), so every per-axis term of
the generator is a Kronecker factor in slot j and the propagator is the n-fold
Kronecker power of the single-cycle M(t/n). :func:`to_interleaved` and
:func:`from_interleaved` convert between the two.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from typing import Literal, Sequence

import numpy as np

from hyperwalk.core import (
    DomainError,
    HyperCycleConfig,
    NumericError,
    ResourceError,
    encode_multi_index,
    require_density_matrix,
)
from hyperwalk.cycle import (
    EXPM_METHOD,
    AnalyticKernel,
    Evolution,
    Propagator,
    _check_times,
    _expm,
    build_cycle_superoperator,
    propagator_exact,
)

DEFAULT_MEMORY_CAP = 10**8
AUTO_FULL_MAX_POSITIONS = 256
CROSS_CHECK_TOL = 1e-8


def _interleave_axes(n: int) -> list[int]:
    axes = []
    for j in range(n):
        axes += [j, n + j]
    return axes


def to_interleaved(rho, config: HyperCycleConfig) -> np.ndarray:
    """Density matrix (N^n x N^n) -> interleaved vector of length N^(2n)."""
    N, n = config.size_N, config.dims_n
    rho = np.asarray(rho)
    return rho.reshape((N,) * (2 * n)).transpose(_interleave_axes(n)).reshape(-1)


def from_interleaved(v, config: HyperCycleConfig) -> np.ndarray:
    """Inverse of :func:`to_interleaved`."""
    N, n = config.size_N, config.dims_n
    inverse = np.argsort(_interleave_axes(n))
    D = N**n
    return np.asarray(v).reshape((N,) * (2 * n)).transpose(inverse).reshape(D, D)


def interleave_permutation(config: HyperCycleConfig) -> np.ndarray:
    """``perm`` with ``to_interleaved(rho) == rho.reshape(-1)[perm]``."""
    D = config.num_vertices
    return to_interleaved(np.arange(D * D).reshape(D, D), config)


def _check_cap(positions: int, memory_cap: int, what: str) -> None:
    if positions * positions > memory_cap:
        raise ResourceError(
            f"{what} would hold {positions}x{positions} complex entries (> cap {memory_cap}); "
            "use the factored path instead"
        )


@dataclass(frozen=True)
class HyperSuperOperator:
    config: HyperCycleConfig
    generator: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.generator.shape[0]


def build_hyper_superoperator(config: HyperCycleConfig, memory_cap: int = DEFAULT_MEMORY_CAP) -> HyperSuperOperator:
    """Dense hyper-cycle generator in the interleaved basis.

    Equal to (1/n) * sum_j I ⊗ ... ⊗ L ⊗ ... ⊗ I with the single-cycle
    generator L in slot j; for n = 1 this is L itself.
    """
    N, n = config.size_N, config.dims_n
    _check_cap(N ** (2 * n), memory_cap, "hyper-cycle generator")
    L = build_cycle_superoperator(config.base).generator
    eye = np.eye(N * N)
    G = np.zeros((N ** (2 * n),) * 2, dtype=complex)
    for j in range(n):
        factors = [eye] * n
        factors[j] = L
        G += reduce(np.kron, factors)
    G /= n
    G.setflags(write=False)
    return HyperSuperOperator(config, G)


@dataclass(frozen=True)
class HyperPropagator:
    """M(t) held as the single-cycle propagator at t/n."""

    config: HyperCycleConfig
    time: float
    single: Propagator = field(repr=False)

    def apply(self, rho, order: Sequence[int] | None = None) -> np.ndarray:
        """Propagate a hyper-cycle density matrix one axis at a time."""
        N, n = self.config.size_N, self.config.dims_n
        D = N**n
        rho = np.asarray(rho, dtype=complex)
        if rho.shape != (D, D):
            raise DomainError(f"state has shape {rho.shape}, expected {(D, D)}")
        M = self.single.matrix
        v = to_interleaved(rho, self.config).reshape((N * N,) * n)
        for j in range(n) if order is None else order:
            v = np.moveaxis(np.tensordot(M, v, axes=([1], [j])), 0, j)
        return from_interleaved(v.reshape(-1), self.config)

    def materialize(self, memory_cap: int = DEFAULT_MEMORY_CAP) -> np.ndarray:
        N, n = self.config.size_N, self.config.dims_n
        _check_cap(N ** (2 * n), memory_cap, "materialized hyper propagator")
        return reduce(np.kron, [self.single.matrix] * n)


def hyper_propagator_factored(config: HyperCycleConfig, t: float) -> HyperPropagator:
    if not t >= 0:
        raise DomainError(f"time must be >= 0, got {t!r}")
    superop = build_cycle_superoperator(config.base)
    return HyperPropagator(config, float(t), propagator_exact(superop, t / config.dims_n))


def evolve_hyper(
    config: HyperCycleConfig,
    rho0,
    times,
    path: Literal["factored", "full", "auto"] = "auto",
    memory_cap: int = DEFAULT_MEMORY_CAP,
) -> Evolution:
    """Evolve an arbitrary hyper-cycle density matrix on a time grid.

    ``"auto"`` always runs the factored path and, while the vectorized state
    has at most 256 positions, also the full exponential, raising
    :class:`NumericError` if they disagree by more than 1e-8.
    """
    N, n = config.size_N, config.dims_n
    D = N**n
    rho0 = require_density_matrix(rho0, D)
    times = _check_times(times)
    if path not in ("factored", "full", "auto"):
        raise DomainError(f"unknown path {path!r}")

    superop = build_cycle_superoperator(config.base)
    info = {"path": path, "method": EXPM_METHOD}
    factored = full = None
    if path in ("factored", "auto"):
        factored = np.empty((times.size, D, D), dtype=complex)
        for i, t in enumerate(times):
            prop = HyperPropagator(config, t, propagator_exact(superop, t / n))
            factored[i] = prop.apply(rho0)
    if path == "full" or (path == "auto" and N ** (2 * n) <= AUTO_FULL_MAX_POSITIONS):
        G = build_hyper_superoperator(config, memory_cap).generator
        v0 = to_interleaved(rho0, config)
        full = np.empty((times.size, D, D), dtype=complex)
        for i, t in enumerate(times):
            full[i] = from_interleaved(_expm(t * G) @ v0, config)
    if factored is not None and full is not None:
        diff = float(np.max(np.abs(factored - full)))
        info["cross_check_max_diff"] = diff
        if diff > CROSS_CHECK_TOL:
            raise NumericError(f"factored and full paths disagree by {diff:.3g}")
    states = factored if factored is not None else full
    return Evolution(times, states, info)


def product_distribution(factors: Sequence[np.ndarray]) -> np.ndarray:
    """Flattened (big-endian) product of per-axis distributions."""
    return reduce(np.kron, factors)


def hyper_probability_product(
    kernel: AnalyticKernel, config: HyperCycleConfig, initial_vertex: Sequence[int], t: float
) -> np.ndarray:
    """P[a](t) = prod_j C[a_j - mu_j, a_j - mu_j](t/n) for a walker started at ``initial_vertex``."""
    if kernel.config != config.base:
        raise DomainError("kernel cycle does not match the hyper-cycle base")
    encode_multi_index(initial_vertex, config)
    n = config.dims_n
    c = kernel.diagonal(t / n)
    P = product_distribution([np.roll(c, mu) for mu in initial_vertex])
    if abs(P.sum() - 1.0) > 1e-9:
        raise NumericError(f"product distribution sums to {P.sum()!r}")
    return P
