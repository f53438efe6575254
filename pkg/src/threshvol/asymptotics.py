"""Asymptotic constants, confidence intervals, bandwidth rule, rate checks.

The variance constant, bias constant and the mean-square-optimal bandwidth
are rational expressions in the kernel moments; everything here consumes a
KernelSpec and the outputs of the estimators module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import erfc as _erfc_arr

from .errors import ConfigError, EstimationError
from .estimators import EstimateResult
from .kernels import KernelSpec


@dataclass(frozen=True)
class AsymptoticConstants:
    v_x: float
    bias_c: float
    kernel: KernelSpec


def variance_constant(kernel: KernelSpec) -> float:
    """Variance constant of the local linear limit law.

    (m20*m12^2 + m22*m11^2 - 2*m21*m12*m11) / (m12 - m11^2)^2 where
    m_ij is the kernel moment with power i and polynomial order j.
    """
    m11 = kernel.moment(1, 1)
    m12 = kernel.moment(1, 2)
    m20 = kernel.moment(2, 0)
    m21 = kernel.moment(2, 1)
    m22 = kernel.moment(2, 2)
    den = m12 - m11 * m11
    if den <= 0:
        raise EstimationError(
            f"degenerate kernel: moment spread {den} must be positive"
        )
    num = m20 * m12 * m12 + m22 * m11 * m11 - 2.0 * m21 * m12 * m11
    return num / (den * den)


def bias_constant(kernel: KernelSpec) -> float:
    """Kernel factor of the curvature bias: (m12^2 - m11*m13)/(m12 - m11^2)."""
    m11 = kernel.moment(1, 1)
    m12 = kernel.moment(1, 2)
    m13 = kernel.moment(1, 3)
    den = m12 - m11 * m11
    if den <= 0:
        raise EstimationError(
            f"degenerate kernel: moment spread {den} must be positive"
        )
    return (m12 * m12 - m11 * m13) / den


def constants(kernel: KernelSpec) -> AsymptoticConstants:
    return AsymptoticConstants(
        v_x=variance_constant(kernel), bias_c=bias_constant(kernel), kernel=kernel
    )


def sandwich_variance_constant(kernel: KernelSpec, p: int) -> float:
    """(0,0) entry of the order-p sandwich S^-1 S* S^-1 of kernel moments.

    S has entries m(1, i+j) and S* entries m(2, i+j) for i, j = 0..p.  At
    p = 1 this reduces exactly to variance_constant; at p = 0 it is the
    plain ratio-estimator constant m(2, 0).
    """
    if p < 0:
        raise ConfigError(f"polynomial order must be >= 0, got {p}")
    idx = np.arange(p + 1)
    s = np.array([[kernel.moment(1, int(i + j)) for j in idx] for i in idx])
    s_star = np.array([[kernel.moment(2, int(i + j)) for j in idx] for i in idx])
    row0 = np.linalg.solve(s, np.eye(p + 1)[0])
    return float(row0 @ s_star @ row0)


def bias_correction(kernel: KernelSpec, curvature: float, h: float) -> float:
    """Second-order bias 0.5 * (sigma^2)''(x) * bias_constant * h^2."""
    if not h > 0:
        raise ConfigError(f"bandwidth h must be > 0, got {h}")
    return 0.5 * curvature * bias_constant(kernel) * h * h


# --- normal distribution helpers -------------------------------------------

_ACKLAM_A = (
    -3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
    1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00,
)
_ACKLAM_B = (
    -5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
    6.680131188771972e01, -1.328068155288572e01,
)
_ACKLAM_C = (
    -7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
    -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00,
)
_ACKLAM_D = (
    7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
    3.754408661907416e00,
)


def normal_cdf(z):
    """Standard normal CDF via the complementary error function."""
    z = np.asarray(z, dtype=float)
    out = 0.5 * _erfc_arr(-z / math.sqrt(2.0))
    return float(out) if out.ndim == 0 else out


def normal_quantile(p: float) -> float:
    """Inverse standard normal CDF.

    Rational approximation polished with one Halley step through erfc, so
    the result is accurate to well below 1e-9.
    """
    if not (0.0 < p < 1.0):
        raise ConfigError(f"quantile probability must be in (0, 1), got {p}")
    a, b, c, d = _ACKLAM_A, _ACKLAM_B, _ACKLAM_C, _ACKLAM_D
    p_low = 0.02425
    if p < p_low:
        q = math.sqrt(-2.0 * math.log(p))
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / (
            (((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0
        )
    elif p <= 1.0 - p_low:
        q = p - 0.5
        r = q * q
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q / (
            ((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0
        )
    else:
        q = math.sqrt(-2.0 * math.log(1.0 - p))
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / (
            (((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0
        )
    # one Halley step: e is the CDF error at x
    e = 0.5 * math.erfc(-x / math.sqrt(2.0)) - p
    u = e * math.sqrt(2.0 * math.pi) * math.exp(x * x / 2.0)
    return x - u / (1.0 + x * u / 2.0)


# --- inference ---------------------------------------------------------------

@dataclass
class InferenceResult:
    estimate: EstimateResult
    bias_correction: float
    std_error: float
    ci_low: float
    ci_high: float
    level: float


def confidence_interval(
    est: EstimateResult,
    delta: float,
    level: float,
    kernel: KernelSpec,
    curvature: Optional[float] = None,
    variance_const: Optional[float] = None,
) -> InferenceResult:
    """Feasible confidence interval for sigma^2(x).

    Standard error sigma2_hat * sqrt(2 V delta / (h * Lhat)); the center is
    bias-corrected when curvature is supplied, otherwise the correction is
    zero.  ``variance_const`` overrides the local-linear variance constant,
    which other estimator orders need (see sandwich_variance_constant).
    """
    if not (0.0 < level < 1.0):
        raise ConfigError(f"level must be in (0, 1), got {level}")
    if not delta > 0:
        raise ConfigError(f"delta must be > 0, got {delta}")
    if not est.local_time_hat > 0:
        raise EstimationError("no local occupation: local time estimate is zero")
    v = variance_const if variance_const is not None else variance_constant(kernel)
    se = abs(est.sigma2_hat) * math.sqrt(2.0 * v * delta / (est.h * est.local_time_hat))
    bias = bias_correction(kernel, curvature, est.h) if curvature is not None else 0.0
    center = est.sigma2_hat - bias
    z = normal_quantile(0.5 * (1.0 + level))
    return InferenceResult(
        estimate=est,
        bias_correction=bias,
        std_error=se,
        ci_low=center - z * se,
        ci_high=center + z * se,
        level=level,
    )


def optimal_bandwidth(
    delta: float, local_time_hat: float, curvature: float, kernel: KernelSpec
) -> float:
    """Mean-square-error optimal bandwidth.

    (4 delta (m12 - m11^2)^2 / (Lhat [curvature (m12^2 - m11 m13)]^2))^(1/5),
    evaluated exactly as displayed.
    """
    if not delta > 0:
        raise ConfigError(f"delta must be > 0, got {delta}")
    if not local_time_hat > 0:
        raise EstimationError("optimal bandwidth needs a positive local time estimate")
    if curvature == 0:
        raise EstimationError("flat diffusion: MSE bandwidth undefined")
    m11 = kernel.moment(1, 1)
    m12 = kernel.moment(1, 2)
    m13 = kernel.moment(1, 3)
    den = m12 - m11 * m11
    bracket = curvature * (m12 * m12 - m11 * m13)
    return (4.0 * delta * den * den / (local_time_hat * bracket * bracket)) ** 0.2


# --- rate conditions ---------------------------------------------------------

@dataclass
class RateParams:
    """Power-law tuning: threshold delta**eta, bandwidth delta**phi, activity alpha."""

    eta: float
    phi: float
    alpha: float = 0.0


@dataclass
class RateCondition:
    name: str
    slack: float

    @property
    def passed(self) -> bool:
        return self.slack > 0.0


@dataclass
class RateConditionReport:
    params: RateParams
    ia_present: bool
    conditions: list[RateCondition] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.conditions)

    def to_dict(self) -> dict:
        return {
            "eta": self.params.eta,
            "phi": self.params.phi,
            "alpha": self.params.alpha,
            "ia_present": self.ia_present,
            "passed": self.passed,
            "conditions": [
                {"name": c.name, "slack": c.slack, "passed": c.passed}
                for c in self.conditions
            ],
        }


def check_rate_conditions(params: RateParams, ia_present: bool = False) -> RateConditionReport:
    """Report pass/fail with slack for every tuning inequality.

    Finite-activity runs need eta in (0,1) and phi in (0, 1/2); with an
    infinite-activity component alpha < 1 and three extra inequalities
    tying eta, phi and alpha must hold.
    """
    eta, phi, alpha = params.eta, params.phi, params.alpha
    report = RateConditionReport(params=params, ia_present=ia_present)
    cs = report.conditions
    cs.append(RateCondition("eta_in_unit_interval", min(eta, 1.0 - eta)))
    cs.append(RateCondition("phi_positive", phi))
    cs.append(RateCondition("bandwidth_beats_log_modulus", 1.0 - 2.0 * phi))
    if ia_present:
        cs.append(RateCondition("activity_index_below_one", 1.0 - alpha))
        cs.append(RateCondition("threshold_dominates_bandwidth", eta / 2.0 - phi))
        cs.append(RateCondition("small_jump_moment", (1.0 - alpha * eta) - 0.5 + phi / 2.0))
        cs.append(
            RateCondition("threshold_vs_activity", eta * (1.0 - alpha / 2.0) - 0.5 + phi / 2.0)
        )
    return report
