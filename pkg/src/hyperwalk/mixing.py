"""Total variation to uniform, measured mixing times and analytic upper bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Literal, Sequence

import numpy as np

from hyperwalk.core import CycleConfig, DomainError, HyperCycleConfig, NumericError, encode_multi_index
from hyperwalk.cycle import EXPM_METHOD, AnalyticKernel, _expm, build_cycle_superoperator

Source = Callable[[np.ndarray], np.ndarray]


def tv_distance(p) -> float:
    """Un-halved distance ``sum_a |p_a - 1/dim|`` to the uniform distribution."""
    p = np.asarray(p, dtype=float)
    return float(np.abs(p - 1.0 / p.shape[-1]).sum(axis=-1))


def _tv_rows(P: np.ndarray) -> np.ndarray:
    return np.abs(P - 1.0 / P.shape[-1]).sum(axis=-1)


# -- probability sources --------------------------------------------------------


def _product_rows(per_axis: Sequence[np.ndarray]) -> np.ndarray:
    """Row-wise Kronecker product of (T, N) arrays -> (T, N^n), big-endian."""
    P = per_axis[0]
    for q in per_axis[1:]:
        P = (P[:, :, None] * q[:, None, :]).reshape(P.shape[0], -1)
    return P


class NumericSource:
    """Exact hyper-cycle probabilities for a walker started at one vertex.

    Evaluates the single-cycle populations at t/n through an eigendecomposition
    of the generator (falling back to ``expm`` per time when the eigenvector
    matrix is ill-conditioned) and takes the product over axes.
    """

    COND_LIMIT = 1e8

    def __init__(self, config: HyperCycleConfig, initial_vertex: Sequence[int] | None = None):
        self.config = config
        n, N = config.dims_n, config.size_N
        self.initial_vertex = tuple(initial_vertex) if initial_vertex is not None else (0,) * n
        encode_multi_index(self.initial_vertex, config)
        self._L = build_cycle_superoperator(config.base).generator
        self._diag_pos = np.arange(N) * (N + 1)
        v0 = np.zeros(N * N, dtype=complex)
        v0[0] = 1.0
        self._v0 = v0
        w, V = np.linalg.eig(self._L)
        self.method = "eigendecomposition"
        if np.linalg.cond(V) > self.COND_LIMIT:
            self.method = EXPM_METHOD
        else:
            self._w = w
            self._Vd = V[self._diag_pos]
            self._c = np.linalg.solve(V, v0)
            probe = 7.0
            ref = np.real((_expm(probe * self._L) @ v0)[self._diag_pos])
            if np.max(np.abs(self._single(np.array([probe]))[0] - ref)) > 1e-10:
                self.method = EXPM_METHOD

    def _single(self, taus: np.ndarray) -> np.ndarray:
        if self.method == "eigendecomposition":
            return np.real((np.exp(np.outer(taus, self._w)) * self._c) @ self._Vd.T)
        return np.array([np.real((_expm(tau * self._L) @ self._v0)[self._diag_pos]) for tau in taus])

    def __call__(self, times) -> np.ndarray:
        times = np.atleast_1d(np.asarray(times, dtype=float))
        p = self._single(times / self.config.dims_n)
        return _product_rows([np.roll(p, mu, axis=1) for mu in self.initial_vertex])


class KernelSource:
    """Product-formula probabilities from a closed-form kernel."""

    def __init__(self, kernel: AnalyticKernel, config: HyperCycleConfig, initial_vertex: Sequence[int] | None = None):
        if kernel.config != config.base:
            raise DomainError("kernel cycle does not match the hyper-cycle base")
        self.kernel = kernel
        self.config = config
        self.initial_vertex = tuple(initial_vertex) if initial_vertex is not None else (0,) * config.dims_n
        encode_multi_index(self.initial_vertex, config)
        self.method = f"analytic-{kernel.regime}"

    def __call__(self, times) -> np.ndarray:
        times = np.atleast_1d(np.asarray(times, dtype=float))
        n = self.config.dims_n
        p = np.array([self.kernel.diagonal(t / n) for t in times])
        return _product_rows([np.roll(p, mu, axis=1) for mu in self.initial_vertex])


def uniform_source(dim: int) -> Source:
    def source(times):
        times = np.atleast_1d(times)
        return np.full((times.size, dim), 1.0 / dim)

    return source


# -- mixing-time measurement -----------------------------------------------------


@dataclass(frozen=True)
class MixingQuery:
    epsilon: float
    t_max: float
    dt: float
    refine_tol: float

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise DomainError(f"epsilon must lie in (0, 1), got {self.epsilon!r}")
        if not self.dt > 0:
            raise DomainError(f"dt must be > 0, got {self.dt!r}")
        if not self.t_max >= 10 * self.dt:
            raise DomainError(f"t_max={self.t_max!r} must be at least 10 * dt={10 * self.dt!r}")
        if not self.refine_tol > 0:
            raise DomainError("refine_tol must be > 0")

    @classmethod
    def from_bound(cls, epsilon: float, bound: float, horizon_factor: float = 5.0, steps: int = 2000):
        """Horizon ``horizon_factor * bound``, grid step ``bound / steps``, refinement ``dt / 100``."""
        if not (bound > 0 and math.isfinite(bound)):
            raise DomainError(f"bound must be positive and finite, got {bound!r}")
        dt = bound / steps
        return cls(epsilon, horizon_factor * bound, dt, dt / 100)


@dataclass
class MixingResult:
    first_hit_time: float | None
    stable_time: float | None
    times: np.ndarray = field(repr=False)
    tv: np.ndarray = field(repr=False)
    horizon: float
    epsilon: float
    bound_value: float | None = None
    regime: str = "none"
    diagnostic: str = ""

    @property
    def tv_series(self) -> list[tuple[float, float]]:
        return list(zip(self.times.tolist(), self.tv.tolist()))


def _bisect_crossing(f: Callable[[float], float], lo: float, hi: float, tol: float) -> float:
    """Smallest time in (lo, hi] found with f <= 0, given f(lo) > 0 >= f(hi)."""
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if f(mid) <= 0:
            hi = mid
        else:
            lo = mid
    return hi


def measure_mixing_time(
    source: Source,
    query: MixingQuery,
    bound_value: float | None = None,
    regime: str = "none",
) -> MixingResult:
    """Scan TV to uniform on a coarse grid and refine both mixing-time notions.

    The first-hit time is the earliest grid crossing below ``epsilon`` refined
    by bisection; the stable time is the crossing after the last grid point
    above ``epsilon``. Both are only as fine as the grid lets them see, and
    stability is certified only up to ``query.t_max``.
    """
    eps = query.epsilon
    n_steps = int(math.floor(query.t_max / query.dt + 1e-9))
    times = np.arange(n_steps + 1) * query.dt
    if times[-1] < query.t_max:
        times = np.append(times, query.t_max)
    tv = _tv_rows(np.asarray(source(times)))
    if np.any(~np.isfinite(tv)):
        raise NumericError("non-finite total variation in source output")

    def excess(t: float) -> float:
        return float(_tv_rows(np.asarray(source(np.array([t]))))[0]) - eps

    below = np.flatnonzero(tv <= eps)
    first = stable = None
    diagnostic = ""
    if below.size:
        i = below[0]
        first = 0.0 if i == 0 else _bisect_crossing(excess, times[i - 1], times[i], query.refine_tol)
    if tv[-1] > eps:
        diagnostic = f"TV={tv[-1]:.3g} > epsilon at the horizon t={times[-1]:.6g}; stability not certified"
    else:
        above = np.flatnonzero(tv > eps)
        if above.size == 0:
            stable = 0.0
        else:
            j = above[-1]
            stable = _bisect_crossing(excess, times[j], times[j + 1], query.refine_tol)
    if first is None:
        diagnostic = diagnostic or "TV never reached epsilon within the horizon"
    return MixingResult(first, stable, times, tv, float(times[-1]), eps, bound_value, regime, diagnostic)


# -- analytic bounds --------------------------------------------------------------


def _check_epsilon(epsilon: float) -> None:
    if not 0 < epsilon < 1:
        raise DomainError(f"epsilon must lie in (0, 1), got {epsilon!r}")


def _weak_single(N: int, gamma: float, eps: float) -> float:
    if N <= 2:
        raise DomainError("single-cycle weak bound divides by N - 2; requires N >= 3")
    if gamma <= 0:
        raise DomainError("weak bound divides by gamma; requires gamma > 0")
    return (1.0 / gamma) * (N / (N - 2)) * math.log((N + 1) / eps)


def _weak_general(N: int, n: int, gamma: float, eps: float) -> float:
    if N <= 1:
        raise DomainError("weak bound divides by N - 1; requires N >= 2")
    if gamma <= 0:
        raise DomainError("weak bound divides by gamma; requires gamma > 0")
    return (n / gamma) * (N / (N - 1)) * math.log(n * (N + 1) * (1 + eps * N**n) / eps)


def _strong_single(N: int, gamma: float, eps: float) -> float:
    return gamma * N**2 / 4 * math.log((2 + eps) / eps)


def _strong_general(N: int, n: int, gamma: float, eps: float) -> float:
    return gamma * N**2 * n / 4 * math.log(n * (2 + eps) * (1 + eps * N**n) / eps)


def mixing_bounds(regime: Literal["weak", "strong"], config: HyperCycleConfig, epsilon: float) -> dict[str, float]:
    """All bound variants defined for ``config``: ``general`` always, ``single`` when n = 1."""
    _check_epsilon(epsilon)
    N, n, gamma = config.size_N, config.dims_n, config.gamma
    if regime == "weak":
        out = {"general": _weak_general(N, n, gamma, epsilon)}
        if n == 1:
            out["single"] = _weak_single(N, gamma, epsilon)
    elif regime == "strong":
        out = {"general": _strong_general(N, n, gamma, epsilon)}
        if n == 1:
            out["single"] = _strong_single(N, gamma, epsilon)
    else:
        raise DomainError(f"unknown regime {regime!r}")
    return out


def mixing_bound(
    regime: Literal["weak", "strong"],
    config: HyperCycleConfig,
    epsilon: float,
    variant: Literal["auto", "single", "general"] = "auto",
) -> float:
    """Upper bound on the mixing time.

    ``variant="single"`` is the one-cycle formula (weak: prefactor N/(N-2),
    strong: ln((2+eps)/eps)) and needs n = 1; ``"general"`` is the
    n-dimensional formula; ``"auto"`` picks ``single`` for n = 1.
    """
    _check_epsilon(epsilon)
    N, n, gamma = config.size_N, config.dims_n, config.gamma
    if variant == "auto":
        variant = "single" if n == 1 else "general"
    if variant == "single" and n != 1:
        raise DomainError("the single-cycle bound is defined for dims_n = 1 only")
    if regime == "weak":
        return _weak_single(N, gamma, epsilon) if variant == "single" else _weak_general(N, n, gamma, epsilon)
    if regime == "strong":
        return _strong_single(N, gamma, epsilon) if variant == "single" else _strong_general(N, n, gamma, epsilon)
    raise DomainError(f"unknown regime {regime!r}")


# -- numerical checks of the bound derivations --------------------------------------


@dataclass(frozen=True)
class ReductionReport:
    t: float
    epsilon: float
    tv_hyper: float
    tv_single: float
    single_rhs: float
    a_tilde: float
    a_tilde_rhs: float
    majorant: float
    assumption_ok: bool
    majorant_holds: bool
    single_condition_holds: bool
    a_tilde_condition_holds: bool
    hyper_mixed: bool

    @property
    def chain_consistent(self) -> bool:
        """When the reduced single-cycle condition holds, the n-dimensional one must too."""
        return (not self.single_condition_holds) or self.hyper_mixed


def verify_reduction_inequality(
    config: HyperCycleConfig, kernel: AnalyticKernel | None, epsilon: float, t: float
) -> ReductionReport:
    """Evaluate both ends of the reduction from the n-dimensional to the one-cycle criterion.

    ``kernel=None`` uses exact single-cycle populations. The per-vertex
    majorants ``A_a = sum_j |N P(a_j) - 1|`` are summed explicitly over all
    N^n vertices.
    """
    _check_epsilon(epsilon)
    N, n = config.size_N, config.dims_n
    if kernel is None:
        p = NumericSource(HyperCycleConfig(config.base, 1))(np.array([t / n]))[0]
    else:
        if kernel.config != config.base:
            raise DomainError("kernel cycle does not match the hyper-cycle base")
        p = kernel.diagonal(t / n)
    P = product_distribution_np(p, n)
    tv_hyper = tv_distance(P)
    tv_single = tv_distance(p)
    single_rhs = (epsilon / n) / (1 + N**n * epsilon)

    ptilde = N * p - 1.0
    grids = np.meshgrid(*([np.abs(ptilde)] * n), indexing="ij")
    A = np.sum(grids, axis=0).reshape(-1)
    a_tilde = float(A.sum())
    a_tilde_rhs = N**n * epsilon / (1 + N**n * epsilon)
    assumption_ok = a_tilde < 1
    majorant = a_tilde / (N**n * (1 - a_tilde)) if assumption_ok else math.inf
    rel = 1e-12
    return ReductionReport(
        t=float(t),
        epsilon=epsilon,
        tv_hyper=tv_hyper,
        tv_single=tv_single,
        single_rhs=single_rhs,
        a_tilde=a_tilde,
        a_tilde_rhs=a_tilde_rhs,
        majorant=majorant,
        assumption_ok=assumption_ok,
        majorant_holds=tv_hyper <= majorant * (1 + rel) + 1e-15,
        single_condition_holds=tv_single <= single_rhs,
        a_tilde_condition_holds=a_tilde <= a_tilde_rhs,
        hyper_mixed=tv_hyper <= epsilon,
    )


def product_distribution_np(p: np.ndarray, n: int) -> np.ndarray:
    P = p
    for _ in range(n - 1):
        P = np.kron(P, p)
    return P


@dataclass(frozen=True)
class StrongChainReport:
    t: float
    exact: float
    phase_free: float
    half_sum: float
    closed_form: float
    rate_scale: float

    @property
    def split_sum(self) -> float:
        """Both symmetric halves of the phase-free sum, each majorized by ``half_sum``."""
        return 2.0 * self.half_sum

    def _le(self, a: float, b: float) -> bool:
        return a <= b * (1 + 1e-12) + 1e-300

    @property
    def exact_le_phase_free(self) -> bool:
        return self._le(self.exact, self.phase_free)

    @property
    def phase_free_le_split_sum(self) -> bool:
        return self._le(self.phase_free, self.split_sum)

    @property
    def phase_free_le_half_sum(self) -> bool:
        """The literal single-half majorant; can fail because one half is dropped."""
        return self._le(self.phase_free, self.half_sum)

    @property
    def split_sum_le_closed_form(self) -> bool:
        return self._le(self.split_sum, self.closed_form)

    @property
    def ordering_holds(self) -> bool:
        return self.exact_le_phase_free and self.phase_free_le_split_sum and self.split_sum_le_closed_form


def verify_strong_bound_chain(config: CycleConfig, epsilon: float, t: float, rate_scale: float = 1.0) -> StrongChainReport:
    """Evaluate the chain of majorants behind the strong-decoherence mixing bound at time ``t``.

    Quantities, in order: the exact TV from the diffusive populations, the sum
    with Fourier phases dropped, the geometric majorant over one half of the
    modes using ``sin x > 2x/pi`` and ``mu**2 >= mu``, and its closed form
    ``2 / (exp(4 r t / (gamma N^2)) - 1)`` with ``r = rate_scale``.
    ``rate_scale=1`` is the unit-rate diffusion the closed bound is stated for;
    0.5 matches the master equation (see :func:`analytic_strong_diagonals`).
    """
    _check_epsilon(epsilon)
    gamma, N = config.gamma, config.size_N
    if gamma <= 0:
        raise DomainError("strong bound chain divides by gamma; requires gamma > 0")
    mu = np.arange(1, N)
    decay = np.exp(-rate_scale * t / gamma * np.sin(np.pi * mu / N) ** 2)
    alpha = np.arange(N)
    modes = decay[None, :] * np.exp(2j * np.pi * np.outer(alpha, mu) / N)
    exact = float(np.abs(modes.sum(axis=1)).sum() / N)
    phase_free = float(decay.sum())
    half = np.arange(1, N // 2 + 1)
    half_sum = float(np.exp(-4 * rate_scale * half * t / (gamma * N**2)).sum())
    x = 4 * rate_scale * t / (gamma * N**2)
    # 2 / (e^x - 1) written to stay finite for large x
    closed = math.inf if x == 0 else 2.0 * math.exp(-x) / -math.expm1(-x)
    return StrongChainReport(float(t), exact, phase_free, half_sum, closed, rate_scale)
