"""
Closed forms for the two-level skew coefficient, its mollification and the
integrated transforms Lambda, Lambda_n used to solve the SDE pathwise.

Every function accepts a scalar or a numpy array and returns the same kind.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import pandas as pd

from errors import DomainError

logger = logging.getLogger(__name__)

MIN_PROBES = 1000


@dataclass(frozen=True)
class SkewParams:
    """
    Parameters of the skew coefficient.

    Args:
        alpha: Skew weight in (0, 1); sigma is 1/alpha on x >= 0 and 1/(1-alpha) below
        a: Base point of the transforms, must be >= 0
        n: Mollification index, absent for the exact coefficient
    """

    alpha: float
    a: float = 0.0
    n: Optional[int] = None

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise DomainError(f"alpha must lie in (0, 1): got {self.alpha}")
        if self.a < 0:
            raise DomainError(
                f"Transform base point a={self.a} < 0 is unsupported: the closed forms hold for a >= 0 only"
            )
        if self.n is not None and (int(self.n) != self.n or self.n < 1):
            raise DomainError(f"Mollification index must be a positive integer: got n={self.n}")

    @property
    def degenerate(self) -> bool:
        """alpha = 1/2 makes sigma constant and every transform linear"""
        return self.alpha == 0.5

    def with_n(self, n: int) -> "SkewParams":
        return SkewParams(self.alpha, self.a, n)


def _require_n(params: SkewParams) -> int:
    if params.n is None:
        raise DomainError("This operation needs a mollification index n")
    return int(params.n)


def _out(value: np.ndarray):
    return float(value) if np.ndim(value) == 0 else value


def slope_c(params: SkewParams) -> float:
    """Interior slope n(1-2alpha)/(alpha(1-alpha)) of sigma_n; 0 when alpha = 1/2"""
    n = _require_n(params)
    alpha = params.alpha
    return n * (1.0 - 2.0 * alpha) / (alpha * (1.0 - alpha))


def k_constant(alpha: float) -> float:
    """
    K(alpha) = alpha(1-alpha)/(1-2alpha) * log((1-alpha)/alpha), so that
    alpha_n = -a*alpha - K(alpha)/n. Extended by continuity with K(1/2) = 1/2.
    """
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1): got {alpha}")
    if alpha == 0.5:
        return 0.5
    return alpha * (1.0 - alpha) / (1.0 - 2.0 * alpha) * math.log1p((1.0 - 2.0 * alpha) / alpha)


def sigma(params: SkewParams, x):
    """1/alpha on x >= 0 (zero included), 1/(1-alpha) on x < 0"""
    x = np.asarray(x, dtype=float)
    return _out(np.where(x >= 0, 1.0 / params.alpha, 1.0 / (1.0 - params.alpha)))


def sigma_n(params: SkewParams, x):
    """Continuous mollification of sigma, linear on the open interval (-1/n, 0)"""
    n = _require_n(params)
    x = np.asarray(x, dtype=float)
    middle = 1.0 / params.alpha + slope_c(params) * x
    inside = (x > -1.0 / n) & (x < 0)
    return _out(np.where(inside, middle, sigma(params, x)))


def lambda_exact(params: SkewParams, x):
    """Lambda(x) = integral of 1/sigma from a to x"""
    alpha, a = params.alpha, params.a
    x = np.asarray(x, dtype=float)
    return _out(np.where(x >= 0, alpha * (x - a), (1.0 - alpha) * x - a * alpha))


def lambda_exact_inv(params: SkewParams, y):
    """Two-piece linear inverse of Lambda with its knee at y = -a*alpha"""
    alpha, a = params.alpha, params.a
    y = np.asarray(y, dtype=float)
    knee = -a * alpha
    return _out(np.where(y >= knee, y / alpha + a, (y - knee) / (1.0 - alpha)))


def alpha_n_threshold(params: SkewParams) -> float:
    """Value alpha_n = Lambda_n(-1/n); equals -a*alpha when alpha = 1/2"""
    n = _require_n(params)
    return -params.a * params.alpha - k_constant(params.alpha) / n


def lambda_n(params: SkewParams, x):
    """
    Lambda_n(x) = integral of 1/sigma_n from a to x.

    Agrees with Lambda on x >= 0, is logarithmic on (-1/n, 0) and linear with
    slope 1-alpha below -1/n.
    """
    n = _require_n(params)
    if params.degenerate:
        return lambda_exact(params, x)
    alpha, a = params.alpha, params.a
    c = slope_c(params)
    x = np.asarray(x, dtype=float)
    x_mid = np.clip(x, -1.0 / n, 0.0)
    middle = -a * alpha + np.log1p(alpha * c * x_mid) / c
    lower = alpha_n_threshold(params) + (1.0 - alpha) * (x + 1.0 / n)
    upper = alpha * (x - a)
    return _out(np.where(x >= 0, upper, np.where(x > -1.0 / n, middle, lower)))


def lambda_n_inv(params: SkewParams, y):
    """
    Inverse of Lambda_n, split at y = -a*alpha and y = alpha_n.

    The middle piece is expm1(c(y + a*alpha))/(alpha*c), which vanishes at the
    knee y = -a*alpha so the inverse stays continuous there.
    """
    n = _require_n(params)
    if params.degenerate:
        return lambda_exact_inv(params, y)
    alpha, a = params.alpha, params.a
    c = slope_c(params)
    knee = -a * alpha
    alpha_n = alpha_n_threshold(params)
    y = np.asarray(y, dtype=float)
    y_mid = np.clip(y, alpha_n, knee)
    middle = np.expm1(c * (y_mid - knee)) / (alpha * c)
    lower = (y - alpha_n) / (1.0 - alpha) - 1.0 / n
    upper = y / alpha + a
    return _out(np.where(y >= knee, upper, np.where(y > alpha_n, middle, lower)))


def inverse_gap_constant(alpha: float) -> float:
    """C(alpha) = max(1, |K(alpha)/(1-alpha) - 1|); n * both sup gaps stay below it"""
    return max(1.0, abs(k_constant(alpha) / (1.0 - alpha) - 1.0))


def inverse_gap_exact(params: SkewParams) -> float:
    """sup |Lambda_n^{-1} - Lambda^{-1}|, attained on y <= alpha_n"""
    n = _require_n(params)
    return abs(k_constant(params.alpha) / (1.0 - params.alpha) - 1.0) / n


def lambda_gap_exact(params: SkewParams) -> float:
    """sup |Lambda_n - Lambda|, attained on x <= -1/n"""
    n = _require_n(params)
    return abs(1.0 - params.alpha - k_constant(params.alpha)) / n


def sup_gap(params: SkewParams, probe_count: int) -> Tuple[float, float]:
    """
    Brute-force maxima of |Lambda_n - Lambda| on [-2/n, 1] and of
    |Lambda_n^{-1} - Lambda^{-1}| on [alpha_n - 1/n, 1].

    Branch points are always included among the probes.

    Returns:
        (gap_lambda, gap_inverse)
    """
    n = _require_n(params)
    if probe_count < MIN_PROBES:
        raise DomainError(f"probe_count must be at least {MIN_PROBES}: got {probe_count}")
    alpha_n = alpha_n_threshold(params)
    knee = -params.a * params.alpha
    xs = np.concatenate([np.linspace(-2.0 / n, 1.0, probe_count), [-1.0 / n, 0.0]])
    ys = np.concatenate([np.linspace(alpha_n - 1.0 / n, 1.0, probe_count), [alpha_n, knee]])
    gap_lambda = float(np.max(np.abs(lambda_n(params, xs) - lambda_exact(params, xs))))
    gap_inverse = float(np.max(np.abs(lambda_n_inv(params, ys) - lambda_exact_inv(params, ys))))
    logger.debug("sup_gap alpha=%s n=%d: lambda %.3e inverse %.3e", params.alpha, n, gap_lambda, gap_inverse)
    return gap_lambda, gap_inverse


@dataclass(frozen=True)
class TransformFamily:
    """Precomputed constants of one (alpha, a, n) transform family"""

    params: SkewParams
    alpha_n: float
    c: float
    zbar: float
    zn: float

    @classmethod
    def from_params(cls, params: SkewParams) -> "TransformFamily":
        _require_n(params)
        return cls(
            params=params,
            alpha_n=alpha_n_threshold(params),
            c=slope_c(params),
            zbar=float(lambda_exact(params, 0.0)),
            zn=float(lambda_n(params, 0.0)),
        )

    def forward(self, x):
        return lambda_n(self.params, x)

    def inverse(self, y):
        return lambda_n_inv(self.params, y)


def transform_table(params: SkewParams, x) -> pd.DataFrame:
    """Tabulate sigma, sigma_n, Lambda and Lambda_n at the given points"""
    x = np.asarray(x, dtype=float)
    return pd.DataFrame({
        "x": x,
        "sigma": np.broadcast_to(sigma(params, x), x.shape),
        "sigma_n": np.broadcast_to(sigma_n(params, x), x.shape),
        "lambda": np.broadcast_to(lambda_exact(params, x), x.shape),
        "lambda_n": np.broadcast_to(lambda_n(params, x), x.shape),
    })
