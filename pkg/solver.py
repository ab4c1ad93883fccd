"""Pathwise solutions of x_t = x_0 + int_0^t sigma(x_s) dB_s and their convergence studies."""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from errors import DomainError
from fbm_gen import PathLabel, SamplePath
from frac_young import YoungPair, young_integral_riemann
from skew_transform import (
    SkewParams,
    inverse_gap_exact,
    lambda_exact,
    lambda_exact_inv,
    lambda_n_inv,
    sigma,
    sigma_n,
)

logger = logging.getLogger(__name__)

MIN_CONVERGENCE_POINTS = 4


class SolutionMethod(Enum):
    EXACT_TRANSFORM = "exact_transform"
    MOLLIFIED = "mollified"


@dataclass(frozen=True)
class SolutionPath:
    """
    A solution path with the information needed to audit it.

    Args:
        path: Node values of the solution
        method: Exact transform or mollified with params.n
        restart_index: Node where the solution restarts from 0; 0 when x0 = 0,
            None when the pre-phase never reaches 0 on the grid
        params: Skew parameters, base point a = 0
        x0: Initial value
    """

    path: SamplePath
    method: SolutionMethod
    restart_index: Optional[int]
    params: SkewParams
    x0: float

    @property
    def values(self) -> np.ndarray:
        return self.path.values

    @property
    def n(self) -> Optional[int]:
        return self.params.n if self.method is SolutionMethod.MOLLIFIED else None


def _base_params(params: SkewParams, n: Optional[int] = None) -> SkewParams:
    # every solve runs with transform base a = 0; restarts shift the driver
    return SkewParams(params.alpha, 0.0, n)


def _check_driver(B: SamplePath) -> None:
    if B.label is not PathLabel.FBM:
        raise DomainError(f"Driver must be an fBm path, got label {B.label.value!r}")


def _pre_phase(params: SkewParams, x0: float, B: SamplePath) -> np.ndarray:
    """x0 + B/alpha above zero, x0 + B/(1-alpha) below"""
    speed = 1.0 / params.alpha if x0 > 0 else 1.0 / (1.0 - params.alpha)
    return x0 + speed * B.values


def first_zero_index(B: SamplePath, params: SkewParams, x0: float) -> Optional[int]:
    """
    First node where the pre-phase path touches or crosses 0.

    Returns:
        The grid index, or None when no crossing happens on the grid
    """
    if x0 == 0:
        raise DomainError("first_zero_index needs x0 != 0: a path started at 0 has no pre-phase")
    pre = _pre_phase(params, x0, B)
    hit = pre <= 0 if x0 > 0 else pre >= 0
    hit[0] = False
    indices = np.flatnonzero(hit)
    return int(indices[0]) if indices.size else None


def _solve(params: SkewParams, x0: float, B: SamplePath, inverse, method: SolutionMethod) -> SolutionPath:
    _check_driver(B)
    label = PathLabel.EXACT_SOLUTION if method is SolutionMethod.EXACT_TRANSFORM else PathLabel.MOLLIFIED_SOLUTION
    if x0 == 0:
        values = np.asarray(inverse(B.values), dtype=float)
        restart: Optional[int] = 0
    else:
        values = _pre_phase(params, x0, B)
        restart = first_zero_index(B, params, x0)
        if restart is not None:
            values[restart:] = inverse(B.values[restart:] - B.values[restart])
    path = SamplePath(B.grid, values, label, hurst=B.hurst)
    return SolutionPath(path, method, restart, params, float(x0))


def solve_exact(params: SkewParams, x0: float, B: SamplePath) -> SolutionPath:
    """
    Exact pathwise solution.

    From 0 the solution is Lambda^{-1}(B). From x0 != 0 it moves linearly in B
    until it first reaches 0 at node i*, then follows Lambda^{-1}(B - B_{i*})
    for the rest of the horizon.
    """
    base = _base_params(params)
    return _solve(base, x0, B, lambda y: lambda_exact_inv(base, y), SolutionMethod.EXACT_TRANSFORM)


def solve_mollified(params: SkewParams, x0: float, B: SamplePath) -> SolutionPath:
    """Same construction as solve_exact with Lambda_n^{-1} after the restart"""
    if params.n is None:
        raise DomainError("solve_mollified needs a mollification index n")
    base = _base_params(params, params.n)
    return _solve(base, x0, B, lambda y: lambda_n_inv(base, y), SolutionMethod.MOLLIFIED)


def _check_grid(sol: SolutionPath, B: SamplePath) -> None:
    if sol.path.grid != B.grid:
        raise DomainError("Solution and driver live on different grids")


def transform_identity_residual(sol: SolutionPath, B: SamplePath) -> float:
    """
    Largest violation of the transform identities along the path.

    Before the restart (x_i - x0)/sigma(x0) = B_i; from the restart on
    Lambda(x_i) - Lambda(x_{i*}) = B_i - B_{i*}, with Lambda the exact transform.
    """
    _check_grid(sol, B)
    x = sol.values
    b = B.values
    restart = sol.restart_index if sol.restart_index is not None else x.size
    residual = 0.0
    if restart > 0:
        speed = float(sigma(sol.params, sol.x0))
        residual = float(np.max(np.abs((x[:restart] - sol.x0) / speed - b[:restart])))
    if restart < x.size:
        post = lambda_exact(sol.params, x[restart:]) - lambda_exact(sol.params, x[restart])
        residual = max(residual, float(np.max(np.abs(post - (b[restart:] - b[restart])))))
    return residual


def sde_residual(sol: SolutionPath, B: SamplePath, t_idx: int) -> float:
    """
    |x_t - x_0 - sum sigma(x_{t_i}) (B_{t_{i+1}} - B_{t_i})| up to node t_idx.

    Exact solutions are tested against sigma, mollified ones against sigma_n.
    """
    _check_grid(sol, B)
    if not 0 <= t_idx <= B.grid.N:
        raise DomainError(f"Node index {t_idx} outside [0, {B.grid.N}]")
    if t_idx == 0:
        return 0.0
    coefficient = sigma_n if sol.method is SolutionMethod.MOLLIFIED else sigma
    integrand = SamplePath(B.grid, np.broadcast_to(coefficient(sol.params, sol.values), sol.values.shape))
    integral = young_integral_riemann(YoungPair(integrand, B), 0, t_idx)
    return abs(float(sol.values[t_idx] - sol.x0 - integral))


def residual_refinement_trend(params: SkewParams, x0: float, B: SamplePath,
                              levels: int = 4, mollified: bool = False) -> List[Tuple[int, float]]:
    """
    SDE residual at the horizon on nested coarsenings of one driver.

    Returns:
        (N, residual) pairs from the coarsest grid to the grid of B
    """
    if B.grid.N % (2 ** levels):
        raise DomainError(f"N={B.grid.N} is not divisible by 2^{levels}")
    solve = solve_mollified if mollified else solve_exact
    trend = []
    for level in range(levels, -1, -1):
        driver = B.coarsen(2 ** level)
        sol = solve(params, x0, driver)
        trend.append((driver.grid.N, sde_residual(sol, driver, driver.grid.N)))
    logger.debug("Residual refinement trend: %s", trend)
    return trend


@dataclass(frozen=True)
class ConvergenceReport:
    """
    Sup-node distance between mollified and exact solutions for each n.

    slope is the least-squares log-log slope, NaN when it is undefined
    (alpha = 1/2 or an error that vanishes). gap_bounds holds the exact
    sup |Lambda_n^{-1} - Lambda^{-1}| that dominates each error.
    """

    entries: List[Tuple[int, float]]
    slope: float
    constant: float
    degenerate: bool = False
    gap_bounds: List[float] = field(default_factory=list)

    @property
    def dominated(self) -> bool:
        """Every error stays within its exact inverse-gap bound, up to rounding"""
        return all(err <= bound * (1 + 1e-9) + 1e-15 for (_, err), bound in zip(self.entries, self.gap_bounds))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.entries, columns=["n", "sup_error"])


def convergence_study(params: SkewParams, x0: float, B: SamplePath, n_list: Sequence[int]) -> ConvergenceReport:
    """Fit the rate at which mollified solutions approach the exact one on a fixed driver"""
    n_values = [int(n) for n in n_list]
    if len(n_values) < MIN_CONVERGENCE_POINTS:
        raise DomainError(f"Need at least {MIN_CONVERGENCE_POINTS} values of n, got {len(n_values)}")
    if any(b <= a for a, b in zip(n_values, n_values[1:])):
        raise DomainError(f"n_list must be strictly increasing: {n_values}")

    exact = solve_exact(params, x0, B)
    entries = []
    gap_bounds = []
    for n in n_values:
        mollified = solve_mollified(params.with_n(n), x0, B)
        entries.append((n, float(np.max(np.abs(mollified.values - exact.values)))))
        gap_bounds.append(inverse_gap_exact(SkewParams(params.alpha, 0.0, n)))

    errors = np.array([e for _, e in entries])
    constant = float(np.max(np.array(n_values) * errors))
    degenerate = params.degenerate
    if degenerate or np.any(errors <= 0):
        if not degenerate:
            logger.warning("Mollified and exact solutions coincide for some n; slope is undefined")
        slope = float("nan")
    else:
        slope = float(np.polyfit(np.log(n_values), np.log(errors), 1)[0])
    logger.info("Convergence study alpha=%s: slope %.4f, constant %.4g", params.alpha, slope, constant)
    return ConvergenceReport(entries, slope, constant, degenerate, gap_bounds)


def solution_frame(B: SamplePath, exact: SolutionPath, mollified: Sequence[SolutionPath] = ()) -> pd.DataFrame:
    """Columns t, B, x_exact and one x_mollified_n<k> per mollified solution"""
    frame = pd.DataFrame({"t": B.times, "B": B.values, "x_exact": exact.values})
    for sol in mollified:
        frame[f"x_mollified_n{sol.n}"] = sol.values
    return frame
