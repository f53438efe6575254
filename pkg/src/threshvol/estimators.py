"""Threshold regression estimators for the diffusion coefficient.

Conventions, used consistently everywhere: kernel weights attach to left
endpoints X_{t_{i-1}}, responses are forward squared increments
(X_{t_i} - X_{t_{i-1}})^2 / delta censored at the threshold, i = 1..n.
Ties at the threshold boundary are kept (inclusive comparison).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, EstimationError
from .kernels import KernelSpec
from .simulate import SamplePath

CONDITION_CAP = 1e12


@dataclass(frozen=True)
class ThresholdSpec:
    """Power threshold delta -> delta**eta.

    eta must lie strictly inside (0, 1): that is exactly the range where
    the threshold vanishes while still dominating the Brownian modulus
    delta*log(1/delta) in the small-delta limit.
    """

    eta: float

    def __post_init__(self):
        if not (0.0 < self.eta < 1.0):
            raise ConfigError(f"threshold exponent eta must be in (0, 1), got {self.eta}")

    def value(self, delta: float) -> float:
        return threshold_value(self, delta)


def threshold_value(spec: ThresholdSpec, delta: float) -> float:
    """Evaluate the threshold delta**eta for a sampling interval delta in (0, 1)."""
    if not (0.0 < delta < 1.0):
        raise ConfigError(f"delta must be in (0, 1) for a power threshold, got {delta}")
    return delta ** spec.eta


def classify_increments(path: SamplePath, threshold: float) -> np.ndarray:
    """True where a squared increment is at or below the threshold (kept as continuous)."""
    if not threshold > 0:
        raise ConfigError(f"threshold must be > 0, got {threshold}")
    d = path.increments()
    return d * d <= threshold


def _left_points(path: SamplePath) -> np.ndarray:
    return path.values[:-1]


def _weights(path: SamplePath, x: float, h: float, kernel: KernelSpec) -> np.ndarray:
    if not h > 0:
        raise ConfigError(f"bandwidth h must be > 0, got {h}")
    return kernel((_left_points(path) - x) / h)


def _responses(path: SamplePath, threshold: float | None) -> np.ndarray:
    d = path.increments()
    y = d * d / path.delta
    if threshold is None:
        return y
    if not threshold > 0:
        raise ConfigError(f"threshold must be > 0, got {threshold}")
    return y * (d * d <= threshold)


def design_moment(path: SamplePath, x: float, h: float, kernel: KernelSpec, k: int) -> float:
    """(1/h) sum_i K((X_{t_{i-1}}-x)/h) (X_{t_{i-1}}-x)^k over the n left endpoints."""
    if k < 0:
        raise ConfigError(f"moment order k must be >= 0, got {k}")
    w = _weights(path, x, h, kernel)
    d = _left_points(path) - x
    return float(np.sum(w * d**k) / h)


def response_moment(
    path: SamplePath, x: float, h: float, kernel: KernelSpec, threshold: float, k: int
) -> float:
    """Like design_moment but weighting censored squared increments / delta."""
    if k < 0:
        raise ConfigError(f"moment order k must be >= 0, got {k}")
    w = _weights(path, x, h, kernel)
    d = _left_points(path) - x
    y = _responses(path, threshold)
    return float(np.sum(w * d**k * y) / h)


@dataclass
class DesignMoments:
    """Raw design/response moment arrays around x at bandwidth h, order p."""

    s: np.ndarray  # k = 0..2p
    q: np.ndarray  # k = 0..p
    x: float
    h: float
    p: int

    def __post_init__(self):
        if len(self.s) != 2 * self.p + 1 or len(self.q) != self.p + 1:
            raise ConfigError("design moment arrays have wrong length for order p")
        if not (np.all(np.isfinite(self.s)) and np.all(np.isfinite(self.q))):
            raise EstimationError("non-finite design moments")


def design_moments(
    path: SamplePath, x: float, h: float, kernel: KernelSpec, threshold: float, p: int
) -> DesignMoments:
    s = np.array([design_moment(path, x, h, kernel, k) for k in range(2 * p + 1)])
    q = np.array([response_moment(path, x, h, kernel, threshold, k) for k in range(p + 1)])
    return DesignMoments(s=s, q=q, x=x, h=h, p=p)


def local_poly_fit(
    path: SamplePath, x: float, h: float, kernel: KernelSpec, threshold: float, p: int
) -> np.ndarray:
    """Degree-p weighted polynomial fit of censored squared increments.

    Returns the coefficient vector beta of length p+1; beta[j] estimates
    the j-th derivative of sigma^2 at x divided by j!.  Solved by an
    orthogonal factorization of the scaled design; refuses ill-conditioned
    or starved designs.
    """
    if p < 0:
        raise ConfigError(f"polynomial order p must be >= 0, got {p}")
    w = _weights(path, x, h, kernel)
    y = _responses(path, threshold)
    active = w > 0
    n_eff = int(np.count_nonzero(active))
    if n_eff < p + 1:
        raise EstimationError(
            f"insufficient local data: {n_eff} effective points for order {p} at x={x}"
        )
    u = (_left_points(path)[active] - x) / h
    sw = np.sqrt(w[active])
    design = np.vander(u, p + 1, increasing=True) * sw[:, None]
    scaled_normal = design.T @ design
    cond = float(np.linalg.cond(scaled_normal))
    if not math.isfinite(cond) or cond > CONDITION_CAP:
        raise EstimationError(
            f"insufficient local data: design condition {cond:.3e} exceeds {CONDITION_CAP:.0e} at x={x}"
        )
    gamma, *_ = np.linalg.lstsq(design, y[active] * sw, rcond=None)
    return gamma / h ** np.arange(p + 1)


@dataclass
class EstimateResult:
    """Point estimate of sigma^2 at x plus the bookkeeping inference needs."""

    x: float
    sigma2_hat: float
    beta: np.ndarray
    local_time_hat: float
    h: float
    n_effective: int
    flagged_fraction: float


def local_time_hat(path: SamplePath, x: float, h: float, kernel: KernelSpec) -> float:
    """(1/h) sum_i K((X_{t_{i-1}}-x)/h) * delta, the local-time estimate at x."""
    w = _weights(path, x, h, kernel)
    return float(np.sum(w) * path.delta / h)


def local_linear_sigma2(
    path: SamplePath, x: float, h: float, kernel: KernelSpec, threshold: float
) -> EstimateResult:
    """Closed-form local linear threshold estimate of sigma^2(x).

    Evaluates the explicit ratio with per-observation weights
    K_i * (delta*S2/h^2 - u_i * delta*S1/h); algebraically this equals the
    first component of the order-1 polynomial fit, which the tests enforce.
    """
    w = _weights(path, x, h, kernel)
    n_eff = int(np.count_nonzero(w > 0))
    if n_eff < 2:
        raise EstimationError(
            f"insufficient local data: {n_eff} effective points at x={x}"
        )
    delta = path.delta
    d = _left_points(path) - x
    u = d / h
    y = _responses(path, threshold)
    s1 = float(np.sum(w * d) / h)
    s2 = float(np.sum(w * d * d) / h)
    brace = delta * s2 / h**2 - u * delta * s1 / h
    den = float(np.sum(w * brace))
    if not math.isfinite(den) or den <= 0.0:
        raise EstimationError(f"insufficient local data: degenerate design at x={x}")
    num = float(np.sum(w * brace * y))
    beta0 = num / den

    s0 = float(np.sum(w) / h)
    q0 = float(np.sum(w * y) / h)
    q1 = float(np.sum(w * d * y) / h)
    slope = (s0 * q1 - s1 * q0) / (s0 * s2 - s1 * s1)

    keep = classify_increments(path, threshold)
    return EstimateResult(
        x=x,
        sigma2_hat=beta0,
        beta=np.array([beta0, slope]),
        local_time_hat=float(np.sum(w) * delta / h),
        h=h,
        n_effective=n_eff,
        flagged_fraction=float(1.0 - np.mean(keep)),
    )


def nw_sigma2(
    path: SamplePath, x: float, h: float, kernel: KernelSpec, threshold: float | None = None
) -> float:
    """Kernel-ratio estimate of sigma^2(x); censors at the threshold when given.

    With threshold None every indicator is 1, which reproduces the plain
    ratio estimator exactly.
    """
    w = _weights(path, x, h, kernel)
    wsum = float(np.sum(w))
    if wsum <= 0.0:
        raise EstimationError(f"insufficient local data: zero kernel weight sum at x={x}")
    y = _responses(path, threshold)
    return float(np.sum(w * y) / wsum)


def plugin_curvature(
    path: SamplePath, x: float, h: float, kernel: KernelSpec, threshold: float
) -> float:
    """Second-difference plug-in for (sigma^2)''(x).

    Uses local linear estimates at x and x +- h_pilot with h_pilot = 2h.
    Noisy, but good enough to feed the bandwidth rule when no analytic
    curvature is available.
    """
    hp = 2.0 * h
    lo = local_linear_sigma2(path, x - hp, h, kernel, threshold).sigma2_hat
    mid = local_linear_sigma2(path, x, h, kernel, threshold).sigma2_hat
    hi = local_linear_sigma2(path, x + hp, h, kernel, threshold).sigma2_hat
    return (hi - 2.0 * mid + lo) / hp**2
