"""Shared configuration types, hyper-cycle vertex indexing and state validation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_TOL = 1e-8
PROB_SUM_TOL = 1e-10
PROB_CLAMP_TOL = 1e-12


class DomainError(ValueError):
    """Input outside the domain of an operation."""


class NumericError(ArithmeticError):
    """A numerical method failed (non-convergence, step underflow, cross-check mismatch)."""


class ResourceError(MemoryError):
    """A dense object would exceed the configured memory cap."""


@dataclass(frozen=True)
class CycleConfig:
    """A cycle of ``size_N`` vertices with decoherence rate ``gamma``."""

    size_N: int
    gamma: float

    def __post_init__(self):
        if int(self.size_N) != self.size_N or self.size_N < 2:
            raise DomainError(f"size_N must be an integer >= 2, got {self.size_N!r}")
        if not np.isfinite(self.gamma) or self.gamma < 0:
            raise DomainError(f"gamma must be finite and >= 0, got {self.gamma!r}")
        object.__setattr__(self, "size_N", int(self.size_N))
        object.__setattr__(self, "gamma", float(self.gamma))


@dataclass(frozen=True)
class HyperCycleConfig:
    """An ``dims_n``-dimensional hyper-cycle built from ``base``."""

    base: CycleConfig
    dims_n: int = 1

    def __post_init__(self):
        if int(self.dims_n) != self.dims_n or self.dims_n < 1:
            raise DomainError(f"dims_n must be an integer >= 1, got {self.dims_n!r}")
        object.__setattr__(self, "dims_n", int(self.dims_n))

    @classmethod
    def from_params(cls, size_N: int, gamma: float, dims_n: int = 1) -> "HyperCycleConfig":
        return cls(CycleConfig(size_N, gamma), dims_n)

    @property
    def size_N(self) -> int:
        return self.base.size_N

    @property
    def gamma(self) -> float:
        return self.base.gamma

    @property
    def num_vertices(self) -> int:
        return self.base.size_N ** self.dims_n


def encode_multi_index(digits: Sequence[int], config: HyperCycleConfig) -> int:
    """Flat vertex index of a big-endian base-N digit sequence."""
    N, n = config.size_N, config.dims_n
    digits = tuple(digits)
    if len(digits) != n:
        raise DomainError(f"expected {n} digits, got {len(digits)}")
    flat = 0
    for d in digits:
        if int(d) != d or not 0 <= d < N:
            raise DomainError(f"digit {d!r} outside [0, {N})")
        flat = flat * N + int(d)
    return flat


def decode_multi_index(flat: int, config: HyperCycleConfig) -> tuple[int, ...]:
    """Inverse of :func:`encode_multi_index`."""
    N, n = config.size_N, config.dims_n
    if int(flat) != flat or not 0 <= flat < N**n:
        raise DomainError(f"flat index {flat!r} outside [0, {N**n})")
    flat = int(flat)
    digits = [0] * n
    for j in range(n - 1, -1, -1):
        flat, digits[j] = divmod(flat, N)
    return tuple(digits)


def parse_digits(label: str, config: HyperCycleConfig) -> tuple[int, ...]:
    """Parse a vertex label: ``"021"`` for N <= 10, ``"4,12"`` (or one number when n = 1) for any N."""
    try:
        if "," in label:
            digits = tuple(int(x) for x in label.split(","))
        elif config.size_N > 10:
            if config.dims_n != 1:
                raise DomainError("digit-string labels require size_N <= 10; use comma-separated digits")
            digits = (int(label),)
        else:
            digits = tuple(int(c) for c in label)
    except ValueError as exc:
        raise DomainError(f"cannot parse vertex label {label!r}") from exc
    encode_multi_index(digits, config)
    return digits


def vertex_label(flat: int, config: HyperCycleConfig) -> str:
    digits = decode_multi_index(flat, config)
    if config.size_N <= 10:
        return "".join(str(d) for d in digits)
    return ",".join(str(d) for d in digits)


@dataclass(frozen=True)
class ValidationReport:
    trace_deviation: float
    hermiticity_violation: float
    min_eigenvalue: float
    tol: float
    psd_tol: float

    @property
    def passed(self) -> bool:
        return (
            self.trace_deviation <= self.tol
            and self.hermiticity_violation <= self.tol
            and self.min_eigenvalue >= -self.psd_tol
        )

    def __bool__(self) -> bool:
        return self.passed


def validate_density_matrix(rho, tol: float = TRACE_TOL, psd_tol: float = PSD_TOL) -> ValidationReport:
    """Check trace, Hermiticity and positivity of ``rho``.

    Parameters
    ----------
    rho : array_like
        Square complex matrix.
    tol : float
        Tolerance on the trace deviation and the largest Hermiticity violation.
    psd_tol : float
        Most negative eigenvalue still accepted as numerical noise.
    """
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DomainError(f"density matrix must be square, got shape {rho.shape}")
    herm = float(np.max(np.abs(rho - rho.conj().T))) if rho.size else 0.0
    trace_dev = float(abs(np.trace(rho) - 1.0))
    # eigvalsh reads one triangle only; symmetrize so a violation cannot hide a negative eigenvalue
    min_eig = float(np.min(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))))
    return ValidationReport(trace_dev, herm, min_eig, tol, psd_tol)


def require_density_matrix(rho, dim: int | None = None) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DomainError(f"density matrix must be square, got shape {rho.shape}")
    if dim is not None and rho.shape[0] != dim:
        raise DomainError(f"density matrix has dimension {rho.shape[0]}, expected {dim}")
    report = validate_density_matrix(rho)
    if not report.passed:
        raise DomainError(f"invalid density matrix: {report}")
    return rho


def localized_state(dim: int, vertex: int = 0) -> np.ndarray:
    """Projector onto a single vertex."""
    rho = np.zeros((dim, dim), dtype=complex)
    rho[vertex, vertex] = 1.0
    return rho


def maximally_mixed_state(dim: int) -> np.ndarray:
    return np.eye(dim, dtype=complex) / dim


def probabilities(rho) -> np.ndarray:
    """Vertex occupation probabilities (real diagonal) of one or a stack of density matrices."""
    rho = np.asarray(rho)
    return np.real(np.diagonal(rho, axis1=-2, axis2=-1)).copy()


def check_distribution(p, tol: float = PROB_SUM_TOL) -> np.ndarray:
    """Validate a probability vector and clamp round-off negatives to zero."""
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise DomainError("probability distribution must be a non-empty vector")
    if abs(p.sum() - 1.0) > tol:
        raise DomainError(f"probabilities sum to {p.sum()!r}, not 1")
    if p.min() < -PROB_CLAMP_TOL or p.max() > 1 + PROB_CLAMP_TOL:
        raise DomainError("probability entries outside [0, 1]")
    return np.clip(p, 0.0, 1.0)
