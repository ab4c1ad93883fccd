"""Exact synthesis of fractional Brownian motion on uniform grids, plus path statistics."""

import functools
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.linalg import lapack

from errors import CirculantEmbeddingError, DomainError, NumericalInstabilityError
from outputs import write_frame

logger = logging.getLogger(__name__)

# Above this size the dense factorization is kept only as a reference method.
CHOLESKY_REFERENCE_MAX_STEPS = 2 ** 11
EIGENVALUE_TOLERANCE = 1e-10
# distinct (H, T, N) keys kept per generator
FACTOR_CACHE_SIZE = 8


@dataclass(frozen=True)
class HurstParameter:
    H: float

    def __post_init__(self) -> None:
        if not 0.5 <= self.H < 1.0:
            raise DomainError(f"Hurst parameter must lie in [0.5, 1): got H={self.H}")

    def __float__(self) -> float:
        return float(self.H)


HurstLike = Union[float, HurstParameter]


def _hurst(H: HurstLike) -> float:
    return float(HurstParameter(float(H)))


@dataclass(frozen=True)
class TimeGrid:
    """Uniform endpoint-inclusive grid t_i = i*T/N on [0, T]."""

    T: float
    N: int

    def __post_init__(self) -> None:
        if not self.T > 0:
            raise DomainError(f"Horizon must be positive: got T={self.T}")
        if int(self.N) != self.N or self.N < 1:
            raise DomainError(f"Step count must be a positive integer: got N={self.N}")

    @property
    def dt(self) -> float:
        return self.T / self.N

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.N + 1)


class PathLabel(Enum):
    FBM = "fbm"
    EXACT_SOLUTION = "exact_solution"
    MOLLIFIED_SOLUTION = "mollified_solution"
    GENERIC = "generic"


@dataclass(frozen=True, eq=False)
class SamplePath:
    """
    A real-valued path sampled at every node of a TimeGrid.

    Args:
        grid: The sampling grid
        values: N+1 node values
        label: What the path represents
        hurst: Hurst parameter of the generating fBm, when known
    """

    grid: TimeGrid
    values: np.ndarray
    label: PathLabel = PathLabel.GENERIC
    hurst: Optional[float] = None

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float)
        if values.ndim != 1 or values.size != self.grid.N + 1:
            raise DomainError(
                f"Path needs {self.grid.N + 1} values for N={self.grid.N}, got shape {values.shape}"
            )
        if self.label is PathLabel.FBM and values[0] != 0.0:
            raise DomainError(f"An fBm path must start at 0, got {values[0]}")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, grid: TimeGrid, fn: Callable[[np.ndarray], np.ndarray],
                      label: PathLabel = PathLabel.GENERIC) -> "SamplePath":
        """Sample a vectorised function at every grid node"""
        values = np.broadcast_to(np.asarray(fn(grid.times), dtype=float), (grid.N + 1,))
        return cls(grid, values, label)

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    def coarsen(self, factor: int) -> "SamplePath":
        """Restrict to the nested subgrid keeping every factor-th node"""
        if factor < 1 or self.grid.N % factor:
            raise DomainError(f"Cannot coarsen N={self.grid.N} by factor {factor}")
        return SamplePath(TimeGrid(self.grid.T, self.grid.N // factor),
                          self.values[::factor], self.label, self.hurst)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"t": self.times, "value": self.values})

    def write_csv(self, path: str) -> str:
        """Export as CSV with header 't,value', one row per node"""
        return write_frame(path, self.to_frame())


def fbm_covariance(H: HurstLike, t, s):
    """
    Covariance R_H(t, s) = (t^{2H} + s^{2H} - |t - s|^{2H}) / 2 of fBm.

    Accepts scalars or broadcastable arrays; returns a float for scalar input.
    """
    h = _hurst(H)
    t_arr = np.asarray(t, dtype=float)
    s_arr = np.asarray(s, dtype=float)
    if np.any(t_arr < 0) or np.any(s_arr < 0):
        raise DomainError("fBm covariance is defined for non-negative times only")
    two_h = 2.0 * h
    cov = 0.5 * (t_arr ** two_h + s_arr ** two_h - np.abs(t_arr - s_arr) ** two_h)
    return float(cov) if cov.ndim == 0 else cov


def clear_cache() -> None:
    """Drop all cached Cholesky factors and circulant spectra"""
    _cholesky_factor.cache_clear()
    _circulant_sqrt_spectrum.cache_clear()


@functools.lru_cache(maxsize=FACTOR_CACHE_SIZE)
def _cholesky_factor(H: float, T: float, N: int) -> np.ndarray:
    grid = TimeGrid(T, N)
    if N > CHOLESKY_REFERENCE_MAX_STEPS:
        logger.warning("Dense Cholesky with N=%d exceeds the reference size %d; "
                       "prefer the circulant generator", N, CHOLESKY_REFERENCE_MAX_STEPS)
    times = grid.times[1:]
    cov = fbm_covariance(H, times[:, None], times[None, :])
    factor, info = lapack.dpotrf(cov, lower=1, clean=1)
    if info > 0:
        raise NumericalInstabilityError(
            f"Cholesky factorization of the fBm covariance failed at pivot {info} "
            f"(H={H}, N={N}): matrix is not positive definite in floating point",
            pivot=int(info),
        )
    if info < 0:
        raise NumericalInstabilityError(f"dpotrf rejected argument {-info}")
    logger.debug("Cached Cholesky factor for H=%s T=%s N=%d", H, T, N)
    factor.flags.writeable = False
    return factor


def fgn_autocovariance(H: float, dt: float, lags: np.ndarray) -> np.ndarray:
    """Autocovariance of fractional Gaussian noise with step dt at integer lags"""
    two_h = 2.0 * H
    k = np.abs(np.asarray(lags, dtype=float))
    return 0.5 * dt ** two_h * (np.abs(k - 1) ** two_h - 2.0 * k ** two_h + (k + 1) ** two_h)


@functools.lru_cache(maxsize=FACTOR_CACHE_SIZE)
def _circulant_sqrt_spectrum(H: float, T: float, N: int) -> np.ndarray:
    gamma = fgn_autocovariance(H, T / N, np.arange(N + 1))
    # first row of the 2N x 2N circulant: gamma(0..N), gamma(N-1..1)
    row = np.concatenate([gamma, gamma[1:N][::-1]])
    eigenvalues = np.fft.rfft(row).real
    floor = -EIGENVALUE_TOLERANCE * max(eigenvalues.max(), 1.0)
    if eigenvalues.min() < floor:
        raise CirculantEmbeddingError(
            f"Circulant embedding has a negative eigenvalue ({eigenvalues.min():.3e}) "
            f"for H={H}, N={N}; use generate_cholesky instead"
        )
    sqrt_eig = np.sqrt(np.maximum(eigenvalues, 0.0))
    logger.debug("Cached circulant spectrum for H=%s T=%s N=%d", H, T, N)
    sqrt_eig.flags.writeable = False
    return sqrt_eig


def generate_cholesky(H: HurstLike, grid: TimeGrid, seed: int) -> SamplePath:
    """
    Sample fBm at the grid nodes from the exact Gaussian law by Cholesky factorization.

    Args:
        H: Hurst parameter in [0.5, 1)
        grid: Sampling grid
        seed: Seed of the PCG64 generator; fully determines the path

    Returns:
        An fBm-labelled SamplePath with values[0] = 0
    """
    h = _hurst(H)
    factor = _cholesky_factor(h, grid.T, grid.N)
    z = np.random.default_rng(seed).standard_normal(grid.N)
    values = np.concatenate([[0.0], factor @ z])
    return SamplePath(grid, values, PathLabel.FBM, hurst=h)


def generate_circulant(H: HurstLike, grid: TimeGrid, seed: int) -> SamplePath:
    """
    Sample fBm by circulant embedding of fractional Gaussian noise, O(N log N).

    The noise is built in real-FFT layout (real DC and Nyquist terms, complex
    interior terms) so one standard normal vector of length 2N drives the path.

    Raises:
        CirculantEmbeddingError: if the embedding is not nonnegative definite
    """
    h = _hurst(H)
    K = grid.N
    sqrt_eig = _circulant_sqrt_spectrum(h, grid.T, grid.N)
    z = np.random.default_rng(seed).standard_normal(2 * K)
    spectrum = np.empty(K + 1, dtype=np.complex128)
    spectrum[0] = z[0]
    spectrum[K] = z[1]
    spectrum[1:K] = (z[2:K + 1] + 1j * z[K + 1:]) / np.sqrt(2.0)
    # irfft divides by 2K
    spectrum *= sqrt_eig * np.sqrt(2.0 * K)
    increments = np.fft.irfft(spectrum, n=2 * K)[:K]
    values = np.concatenate([[0.0], np.cumsum(increments)])
    return SamplePath(grid, values, PathLabel.FBM, hurst=h)


GENERATORS: Dict[str, Callable[[HurstLike, TimeGrid, int], SamplePath]] = {
    "cholesky": generate_cholesky,
    "circulant": generate_circulant,
}


def generate_fbm(H: HurstLike, grid: TimeGrid, seed: int, method: str = "circulant") -> SamplePath:
    """Dispatch to one of the exact generators by name"""
    try:
        generator = GENERATORS[method]
    except KeyError:
        raise DomainError(f"Unknown generator {method!r}; choose from {sorted(GENERATORS)}")
    return generator(H, grid, seed)


def generate_batch(H: HurstLike, grid: TimeGrid, seeds: Sequence[int],
                   method: str = "circulant") -> List[SamplePath]:
    """One path per seed; entry k equals generate_fbm(H, grid, seeds[k], method)"""
    return [generate_fbm(H, grid, int(seed), method) for seed in seeds]


def stack_values(paths: Sequence[SamplePath]) -> np.ndarray:
    """Stack path values into an array of shape (len(paths), N+1), checking the grid"""
    if not paths:
        raise DomainError("Need at least one path")
    grid = paths[0].grid
    if any(p.grid != grid for p in paths):
        raise DomainError("All paths must share one grid")
    return np.vstack([p.values for p in paths])


def holder_norm(path: SamplePath, gamma: float, a_idx: int = 0, b_idx: Optional[int] = None) -> float:
    """
    Grid restriction of the gamma-Hölder norm on [t_a, t_b].

    sup |f| plus the largest ratio |f(t) - f(s)| / (t - s)^gamma over node
    pairs; a lower bound of the continuous norm that can only grow when the
    grid is refined.
    """
    if b_idx is None:
        b_idx = path.grid.N
    if not 0.0 < gamma < 1.0:
        raise DomainError(f"Hölder exponent must lie in (0, 1): got {gamma}")
    if not 0 <= a_idx < b_idx <= path.grid.N:
        raise DomainError(f"Empty or invalid sub-interval [{a_idx}, {b_idx}]")
    v = path.values[a_idx:b_idx + 1]
    dt = path.grid.dt
    seminorm = 0.0
    for lag in range(1, v.size):
        seminorm = max(seminorm, np.max(np.abs(v[lag:] - v[:-lag])) / (lag * dt) ** gamma)
    return float(np.max(np.abs(v)) + seminorm)


def _mean_and_se(samples: np.ndarray) -> Tuple[float, float]:
    mean = float(np.mean(samples))
    se = float(np.std(samples, ddof=1) / np.sqrt(samples.size))
    return mean, se


def empirical_covariance(paths: Sequence[SamplePath], i: int, j: int) -> Tuple[float, float]:
    """Sample mean and standard error of B_{t_i} * B_{t_j} over the paths"""
    if len(paths) < 2:
        raise DomainError("Empirical covariance needs at least 2 paths")
    values = stack_values(paths)
    return _mean_and_se(values[:, i] * values[:, j])


def increment_covariance(paths: Sequence[SamplePath], i: int, j: int) -> Tuple[float, float]:
    """Sample mean and standard error of (B_{t_{i+1}} - B_{t_i}) * (B_{t_{j+1}} - B_{t_j})"""
    if len(paths) < 2:
        raise DomainError("Empirical covariance needs at least 2 paths")
    increments = np.diff(stack_values(paths), axis=1)
    return _mean_and_se(increments[:, i] * increments[:, j])


def estimate_holder_exponent(path: SamplePath) -> float:
    """
    Estimate the Hölder regularity of a path from the scaling of its increments.

    Fits log E|f(t + k dt) - f(t)| against log(k dt) over dyadic lags; the slope
    is clipped into (0, 1].
    """
    v = path.values
    lags = [2 ** k for k in range(int(np.log2(max(path.grid.N, 2))) - 2)] or [1]
    lags = [lag for lag in lags if lag < v.size - 1] or [1]
    mean_abs = np.array([np.mean(np.abs(v[lag:] - v[:-lag])) for lag in lags])
    if np.any(mean_abs <= 0) or len(lags) < 2:
        return 1.0
    slope = np.polyfit(np.log(np.array(lags) * path.grid.dt), np.log(mean_abs), 1)[0]
    return float(np.clip(slope, 1e-6, 1.0))
