"""
Fractional derivatives of sampled paths and the Young integral.

Paths are read as their piecewise-linear interpolants. The singular kernel
(t - r)^(-1-order) is then integrated exactly against every linear segment,
so no cutoff near the singularity is needed.

Sign convention: with D_{b-} written without the (-1)^order factor, the
Young integral equals minus the integral of D_{a+}^order f * D_{b-}^{1-order} g^{b-}.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np
from scipy import special

from errors import DomainError, HypothesisError, YoungConditionError
from fbm_gen import SamplePath, estimate_holder_exponent, holder_norm

logger = logging.getLogger(__name__)

BOUND_TOLERANCE = 1e-2


class FracSide(Enum):
    LEFT_FROM_A = "left_from_a"
    RIGHT_FROM_B = "right_from_b"


@dataclass(frozen=True)
class FracDerivSpec:
    order: float
    side: FracSide
    interval: Tuple[float, float]

    def __post_init__(self) -> None:
        if not 0.0 < self.order < 1.0:
            raise DomainError(f"Fractional order must lie in (0, 1): got {self.order}")
        a, b = self.interval
        if not a < b:
            raise DomainError(f"Interval needs a < b: got [{a}, {b}]")

    @property
    def a(self) -> float:
        return self.interval[0]

    @property
    def b(self) -> float:
        return self.interval[1]


def _path_holder(path: SamplePath) -> float:
    """Known Hölder regularity of an fBm path, otherwise an estimate"""
    if path.hurst is not None:
        return path.hurst
    return estimate_holder_exponent(path)


def admissible_order(f_holder: float, g_holder: float) -> float:
    """
    Midpoint of the admissible window (1 - g_holder, f_holder).

    Raises:
        YoungConditionError: if f_holder + g_holder <= 1
    """
    if f_holder + g_holder <= 1.0:
        raise YoungConditionError(
            f"Young condition violated: Hölder exponents {f_holder} + {g_holder} <= 1"
        )
    return 0.5 * ((1.0 - g_holder) + f_holder)


@dataclass(frozen=True)
class YoungPair:
    """
    Integrand f and integrator g on one grid, with the splitting order used by
    the fractional representation.

    Args:
        f: Integrand
        g: Integrator
        order: Order of the fractional derivative applied to f; defaults to the
            midpoint of the admissible window. Only the fractional form reads it
        f_holder: Hölder exponent of f; estimated from the path when omitted
        g_holder: Hölder exponent of g; estimated from the path when omitted
    """

    f: SamplePath
    g: SamplePath
    order: Optional[float] = None
    f_holder: Optional[float] = None
    g_holder: Optional[float] = None

    def __post_init__(self) -> None:
        if self.f.grid != self.g.grid:
            raise DomainError("Integrand and integrator must share one grid")
        if self.order is not None and not 0.0 < self.order < 1.0:
            raise DomainError(f"Fractional order must lie in (0, 1): got {self.order}")

    def exponents(self) -> Tuple[float, float]:
        mu = self.f_holder if self.f_holder is not None else _path_holder(self.f)
        beta = self.g_holder if self.g_holder is not None else _path_holder(self.g)
        return mu, beta

    def resolved_order(self) -> float:
        """Splitting order after checking it lies strictly inside the admissible window"""
        mu, beta = self.exponents()
        midpoint = admissible_order(mu, beta)
        if self.order is None:
            return midpoint
        if not 1.0 - beta < self.order < mu:
            raise DomainError(
                f"Order {self.order} outside the admissible window ({1.0 - beta:.4g}, {mu:.4g})"
            )
        return self.order


def _segment_kernel_sum(knots: np.ndarray, vals: np.ndarray, order: float) -> float:
    """
    Integral of (f(t) - f(r)) / (t - r)^(1+order) over [knots[0], t] for the
    linear interpolant through (knots, vals), where t = knots[-1].
    """
    t = knots[-1]
    f_t = vals[-1]
    slopes = np.diff(vals) / np.diff(knots)
    near = t - knots[1:]
    far = t - knots[:-1]
    # on each cell f(t) - f(r) = offset + slope * (t - r)
    offset = f_t - vals[1:] - slopes * near
    safe_near = np.where(near > 0, near, 1.0)
    head = np.where(near > 0, offset * (safe_near ** -order - far ** -order) / order, 0.0)
    tail = slopes * (far ** (1.0 - order) - near ** (1.0 - order)) / (1.0 - order)
    return float(np.sum(head + tail))


def _left_deriv_interp(times: np.ndarray, values: np.ndarray, a: float, t: float, order: float) -> float:
    inner = times[(times > a) & (times < t)]
    knots = np.concatenate([[a], inner, [t]])
    vals = np.interp(knots, times, values)
    total = vals[-1] * (t - a) ** -order + order * _segment_kernel_sum(knots, vals, order)
    return total / special.gamma(1.0 - order)


def _check_within(path: SamplePath, spec: FracDerivSpec) -> None:
    if spec.a < 0 or spec.b > path.grid.T * (1 + 1e-12):
        raise DomainError(f"Interval [{spec.a}, {spec.b}] leaves the path domain [0, {path.grid.T}]")


def left_frac_deriv(f: SamplePath, spec: FracDerivSpec, t: float) -> float:
    """
    Left-sided fractional derivative D_{a+}^order f at t in (a, b].

    (1/Gamma(1-order)) * (f(t)/(t-a)^order + order * int_a^t (f(t)-f(r))/(t-r)^(1+order) dr)
    """
    if spec.side is not FracSide.LEFT_FROM_A:
        raise DomainError("left_frac_deriv needs a left_from_a spec")
    _check_within(f, spec)
    if not spec.a < t <= spec.b:
        raise DomainError(f"Evaluation point t={t} must lie in ({spec.a}, {spec.b}]")
    return _left_deriv_interp(f.times, f.values, spec.a, t, spec.order)


def right_frac_deriv_adjusted(g: SamplePath, spec: FracDerivSpec, t: float) -> float:
    """
    Right-sided fractional derivative D_{b-}^order of g - g(b) at t in [a, b).

    Computed as the left derivative of the reflected path x -> g(a+b-x) - g(b).
    """
    if spec.side is not FracSide.RIGHT_FROM_B:
        raise DomainError("right_frac_deriv_adjusted needs a right_from_b spec")
    _check_within(g, spec)
    if not spec.a <= t < spec.b:
        raise DomainError(f"Evaluation point t={t} must lie in [{spec.a}, {spec.b})")
    a, b = spec.a, spec.b
    g_b = float(np.interp(b, g.times, g.values))
    reflected_times = (a + b) - g.times[::-1]
    reflected_values = g.values[::-1] - g_b
    return _left_deriv_interp(reflected_times, reflected_values, a, a + b - t, spec.order)


def _left_deriv_nodes(v: np.ndarray, h: float, order: float) -> np.ndarray:
    """
    Left derivative at nodes 1..M of a uniform sub-grid starting at node 0,
    all nodes at once via convolutions of the cell-moment sequences.
    """
    M = v.size - 1
    j = np.arange(M + 1, dtype=float)
    jh = j * h
    safe = np.where(j > 0, jh, 1.0)
    A = np.where(j > 0, (safe ** -order - (jh + h) ** -order) / order, 0.0)
    Bw = ((jh + h) ** (1.0 - order) - jh ** (1.0 - order)) / (1.0 - order)
    JA = j * A
    s = np.diff(v) / h
    i = np.arange(1, M + 1)
    cum_a = (h ** -order - (i * h) ** -order) / order
    conv1 = np.convolve(v, A)[i] - v[0] * A[i]
    conv2 = np.convolve(s, JA)[i - 1]
    conv3 = np.convolve(s, Bw)[i - 1]
    kernel_sum = v[i] * cum_a - conv1 - h * conv2 + conv3
    return (v[i] * (i * h) ** -order + order * kernel_sum) / special.gamma(1.0 - order)


def left_frac_deriv_nodes(f: SamplePath, order: float, a_idx: int, b_idx: int) -> np.ndarray:
    """D_{a+}^order f at nodes a_idx+1..b_idx with a = t_{a_idx}"""
    v = f.values[a_idx:b_idx + 1]
    return _left_deriv_nodes(v, f.grid.dt, order)


def right_frac_deriv_nodes(g: SamplePath, order: float, a_idx: int, b_idx: int) -> np.ndarray:
    """D_{b-}^order (g - g(b)) at nodes a_idx..b_idx-1 with b = t_{b_idx}"""
    v = g.values[a_idx:b_idx + 1]
    reflected = v[::-1] - v[-1]
    return _left_deriv_nodes(reflected, g.grid.dt, order)[::-1]


def _check_indices(path: SamplePath, a_idx: int, b_idx: int) -> None:
    if not 0 <= a_idx < b_idx <= path.grid.N:
        raise DomainError(f"Empty or invalid sub-interval [{a_idx}, {b_idx}]")


def _slope_changes(values: np.ndarray, h: float) -> np.ndarray:
    """
    Coefficients k_j of the expansion v(t) = v_0 + sum_j k_j (t - t_j)_+ of the
    linear interpolant, one per node t_0..t_{M-1}.
    """
    slopes = np.diff(values) / h
    return np.diff(slopes, prepend=0.0)


def young_integral_fractional(pair: YoungPair, a_idx: int, b_idx: int) -> float:
    """
    Young integral of f against g over [t_{a_idx}, t_{b_idx}] through fractional
    derivatives.

    On the linear interpolants both derivatives are sums of power functions:

        D_{a+}^order f(r) = f(a) (r-a)^(-order) / Gamma(1-order)
                            + sum_j k_j (r - t_j)_+^(1-order) / Gamma(2-order)
        D_{b-}^{1-order} g^{b-}(r) = sum_l m_l (t_l - r)_+^order / Gamma(1+order)

    with k_j the slope changes of f and m_l those of the reflected g - g(b).
    Every product of two terms integrates to a beta function, so the integral
    is exact for the interpolants up to rounding.
    """
    _check_indices(pair.f, a_idx, b_idx)
    order = pair.resolved_order()
    h = pair.f.grid.dt
    M = b_idx - a_idx
    f_vals = pair.f.values[a_idx:b_idx + 1]
    g_vals = pair.g.values[a_idx:b_idx + 1]

    f_kinks = _slope_changes(f_vals, h)                              # at t_0..t_{M-1}
    g_kinks = _slope_changes(g_vals[::-1] - g_vals[-1], h)[::-1]     # at t_1..t_M
    lags = h * np.arange(M + 1)

    # f(a) term against each g kink: int_a^{t_l} (r-a)^(-order) (t_l-r)^order dr
    head_weight = special.beta(1.0 - order, 1.0 + order) / (special.gamma(1.0 - order) * special.gamma(1.0 + order))
    head = f_vals[0] * head_weight * np.dot(g_kinks, lags[1:])

    # f kink at t_j against g kink at t_l > t_j: (t_l - t_j)^2 B(2-order, 1+order)
    body_weight = special.beta(2.0 - order, 1.0 + order) / (special.gamma(2.0 - order) * special.gamma(1.0 + order))
    reach = np.convolve(f_kinks, lags ** 2)[1:M + 1]
    body = body_weight * np.dot(g_kinks, reach)
    return float(-(head + body))


def young_integral_riemann(pair: YoungPair, a_idx: int, b_idx: int) -> float:
    """Left-point Riemann-Stieltjes sum of f dg over [t_{a_idx}, t_{b_idx}]"""
    _check_indices(pair.f, a_idx, b_idx)
    f_vals = pair.f.values[a_idx:b_idx]
    dg = np.diff(pair.g.values[a_idx:b_idx + 1])
    return float(np.dot(f_vals, dg))


@dataclass(frozen=True)
class FracBoundReport:
    max_ratio: float
    mean_ratio: float
    passed: bool
    pairs_checked: int
    constant: float
    holder_norm: float
    tolerance: float = BOUND_TOLERANCE


def frac_bound_constant(order_tilde: float, gamma: float) -> float:
    """(1/Gamma(order_tilde)) * (1 + (1 - order_tilde)/(order_tilde + gamma - 1))"""
    return (1.0 + (1.0 - order_tilde) / (order_tilde + gamma - 1.0)) / special.gamma(order_tilde)


def verify_frac_bound(path: SamplePath, order_tilde: float, gamma: float, sample_pairs: int,
                      seed: int = 0, tolerance: float = BOUND_TOLERANCE) -> FracBoundReport:
    """
    Check |D_{t-}^{1-order_tilde} (B - B_t)(s)| <= C * ||B||_gamma * (t-s)^(order_tilde+gamma-1)
    on random node pairs s < t.

    Args:
        path: Sampled path, usually fBm
        order_tilde: Splitting order, needs order_tilde + gamma > 1
        gamma: Hölder exponent used for the norm
        sample_pairs: Number of random pairs
        seed: Seed of the pair sampler
        tolerance: Allowed excess of the max ratio over 1

    Raises:
        HypothesisError: if the hypotheses of the bound fail
    """
    if not 0.0 < order_tilde < 1.0 or not 0.0 < gamma < 1.0:
        raise HypothesisError(f"Need order_tilde, gamma in (0, 1): got {order_tilde}, {gamma}")
    if order_tilde + gamma <= 1.0:
        raise HypothesisError(f"Need order_tilde + gamma > 1: got {order_tilde} + {gamma}")
    if path.hurst is not None:
        if gamma >= path.hurst:
            raise HypothesisError(f"Need gamma < H: got gamma={gamma}, H={path.hurst}")
        if order_tilde <= 1.0 - path.hurst:
            raise HypothesisError(f"Need order_tilde > 1 - H: got {order_tilde}, H={path.hurst}")
    if sample_pairs < 1:
        raise DomainError(f"sample_pairs must be positive: got {sample_pairs}")

    constant = frac_bound_constant(order_tilde, gamma)
    norm = holder_norm(path, gamma)
    rng = np.random.default_rng(seed)
    N = path.grid.N
    times = path.times
    ratios = np.empty(sample_pairs)
    for k in range(sample_pairs):
        s_idx, t_idx = np.sort(rng.choice(N + 1, size=2, replace=False))
        s, t = times[s_idx], times[t_idx]
        spec = FracDerivSpec(1.0 - order_tilde, FracSide.RIGHT_FROM_B, (s, t))
        observed = abs(right_frac_deriv_adjusted(path, spec, s))
        bound = constant * norm * (t - s) ** (order_tilde + gamma - 1.0)
        ratios[k] = observed / bound if bound > 0 else 0.0
    max_ratio = float(ratios.max())
    report = FracBoundReport(
        max_ratio=max_ratio,
        mean_ratio=float(ratios.mean()),
        passed=max_ratio <= 1.0 + tolerance,
        pairs_checked=sample_pairs,
        constant=constant,
        holder_norm=norm,
        tolerance=tolerance,
    )
    logger.info("Fractional bound check: max ratio %.4f over %d pairs", max_ratio, sample_pairs)
    return report
