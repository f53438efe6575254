"""Monte Carlo harness: standardized estimates, KS diagnostics, coverage.

Each replicate simulates its own path from an indexed seed, estimates
sigma^2 at every requested point, standardizes against the model truth and
records coverage of the feasible confidence interval.  Aggregation is pure
bookkeeping, so a config maps to a bit-for-bit reproducible report no
matter the execution order of replicates.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .asymptotics import (
    RateParams,
    bias_correction,
    check_rate_conditions,
    confidence_interval,
    normal_cdf,
    sandwich_variance_constant,
    variance_constant,
)
from .errors import ConfigError, EstimationError, ExperimentError
from .estimators import (
    EstimateResult,
    ThresholdSpec,
    local_linear_sigma2,
    local_poly_fit,
    local_time_hat,
    nw_sigma2,
)
from .kernels import resolve_kernel
from .simulate import ModelSpec, derive_seed, simulate_path

ESTIMATOR_KINDS = ("local_linear", "nw_threshold", "nw_plain", "local_poly")

MAX_FAILURE_FRACTION = 0.2
LOW_EFFECTIVE_COUNT = 50


def standardize(
    sigma2_hat: float,
    sigma2_true: float,
    bias: float,
    h: float,
    delta: float,
    local_time_hat: float,
    v_x: float,
) -> float:
    """Pivot statistic sqrt(h*Lhat/delta) (shat - s - bias) / sqrt(2 s^2 v)."""
    if not local_time_hat > 0:
        raise EstimationError("standardize needs a positive local time estimate")
    if not v_x > 0:
        raise EstimationError("standardize needs a positive variance constant")
    rate = math.sqrt(h * local_time_hat / delta)
    return rate * (sigma2_hat - sigma2_true - bias) / math.sqrt(
        2.0 * sigma2_true**2 * v_x
    )


def ks_distance(samples) -> float:
    """One-sample Kolmogorov distance of the samples against N(0, 1)."""
    z = np.sort(np.asarray(samples, dtype=float))
    if z.size == 0:
        raise ConfigError("ks_distance needs a nonempty sample")
    if not np.all(np.isfinite(z)):
        raise ConfigError("ks_distance needs finite samples")
    m = z.size
    cdf = normal_cdf(z)
    grid = np.arange(1, m + 1) / m
    d_plus = np.max(grid - cdf)
    d_minus = np.max(cdf - (grid - 1.0 / m))
    return float(max(d_plus, d_minus))


@dataclass
class EstimatorChoice:
    kind: str = "local_linear"
    p: int = 1

    def __post_init__(self):
        if self.kind not in ESTIMATOR_KINDS:
            raise ConfigError(
                f"unknown estimator {self.kind!r}; choose from {ESTIMATOR_KINDS}"
            )
        if self.kind == "local_poly" and self.p < 0:
            raise ConfigError(f"polynomial order must be >= 0, got {self.p}")


@dataclass
class ExperimentConfig:
    model: ModelSpec
    n: int
    T: float
    replications: int
    x_points: list[float]
    kernel: object = "one_sided_epanechnikov"
    estimator: EstimatorChoice = field(default_factory=EstimatorChoice)
    master_seed: int = 0
    level: float = 0.95
    eta: Optional[float] = None  # None: no censoring (threshold effectively infinite)
    phi: Optional[float] = None
    h: Optional[float] = None  # explicit bandwidth; default delta**phi
    refine: int = 10

    def __post_init__(self):
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if not self.x_points:
            raise ConfigError("x_points must be nonempty")
        if not (0.0 < self.level < 1.0):
            raise ConfigError(f"level must be in (0, 1), got {self.level}")
        if self.h is None and self.phi is None:
            raise ConfigError("either an explicit bandwidth h or an exponent phi is required")
        if self.eta is not None:
            ThresholdSpec(self.eta)  # validates the range
        if 0.0 < self.delta < 1.0:
            params = RateParams(
                eta=self.eta if self.eta is not None else 0.5,
                phi=self.phi
                if self.phi is not None
                else math.log(self.bandwidth()) / math.log(self.delta),
                alpha=self.model.jumps.ia.alpha if self.model.jumps.ia is not None else 0.0,
            )
            report = check_rate_conditions(params, ia_present=self.model.jumps.ia is not None)
            if not report.passed:
                failed = [c.name for c in report.conditions if not c.passed]
                warnings.warn(f"rate conditions not satisfied: {', '.join(failed)}", stacklevel=2)

    @property
    def delta(self) -> float:
        return self.T / self.n

    def bandwidth(self) -> float:
        if self.h is not None:
            return self.h
        return self.delta ** self.phi

    def threshold(self) -> Optional[float]:
        if self.eta is None:
            return None
        return ThresholdSpec(self.eta).value(self.delta)


@dataclass
class XResult:
    """Aggregated outcomes at one evaluation point."""

    x: float
    z_samples: np.ndarray
    ks_distance: float
    coverage: float
    mean_bias: float
    rmse: float
    mean_flagged_fraction: float
    mean_sigma2_hat: float
    mean_n_effective: float
    failures: int
    sigma2_true: float
    # per-replicate records aligned with replicate index (NaN where failed)
    sigma2_hats: np.ndarray = field(repr=False, default=None)
    z_by_replicate: np.ndarray = field(repr=False, default=None)
    covered: np.ndarray = field(repr=False, default=None)
    flagged: np.ndarray = field(repr=False, default=None)


@dataclass
class JumpClassification:
    jump_intervals: int = 0
    jump_intervals_excluded: int = 0
    clean_intervals: int = 0
    clean_intervals_excluded: int = 0

    @property
    def jump_exclusion_rate(self) -> float:
        return self.jump_intervals_excluded / self.jump_intervals if self.jump_intervals else math.nan

    @property
    def false_exclusion_rate(self) -> float:
        return self.clean_intervals_excluded / self.clean_intervals if self.clean_intervals else math.nan


@dataclass
class MCReport:
    config: ExperimentConfig
    delta: float
    h: float
    threshold: Optional[float]
    v_x: float
    results: list[XResult]
    classification: Optional[JumpClassification]

    def result_at(self, x: float) -> XResult:
        for r in self.results:
            if r.x == x:
                return r
        raise KeyError(f"no result at x={x}")

    def to_json_dict(self) -> dict:
        cfg = self.config
        est = cfg.estimator
        out = {
            "config": {
                "n": cfg.n,
                "T": cfg.T,
                "replications": cfg.replications,
                "x_points": list(map(float, cfg.x_points)),
                "kernel": getattr(cfg.kernel, "name", cfg.kernel),
                "estimator": {"kind": est.kind, "p": est.p},
                "master_seed": cfg.master_seed,
                "level": cfg.level,
                "eta": cfg.eta,
                "phi": cfg.phi,
                "h": self.h,
                "refine": cfg.refine,
            },
            "delta": self.delta,
            "threshold": self.threshold,
            "v_x": self.v_x,
            "results": [
                {
                    "x": r.x,
                    "sigma2_true": r.sigma2_true,
                    "ks_distance": r.ks_distance,
                    "coverage": r.coverage,
                    "mean_bias": r.mean_bias,
                    "rmse": r.rmse,
                    "mean_flagged_fraction": r.mean_flagged_fraction,
                    "mean_sigma2_hat": r.mean_sigma2_hat,
                    "mean_n_effective": r.mean_n_effective,
                    "failures": r.failures,
                    "z_samples": [float(z) for z in r.z_samples],
                }
                for r in self.results
            ],
        }
        if self.classification is not None:
            out["jump_classification"] = {
                "jump_intervals": self.classification.jump_intervals,
                "jump_intervals_excluded": self.classification.jump_intervals_excluded,
                "clean_intervals": self.classification.clean_intervals,
                "clean_intervals_excluded": self.classification.clean_intervals_excluded,
                "jump_exclusion_rate": self.classification.jump_exclusion_rate,
                "false_exclusion_rate": self.classification.false_exclusion_rate,
            }
        return out

    def iter_replicate_rows(self):
        """Yield (r, x, sigma2_hat, z, covered, flagged_fraction) rows."""
        m = self.config.replications
        for r in range(m):
            for res in self.results:
                yield (
                    r,
                    res.x,
                    res.sigma2_hats[r],
                    res.z_by_replicate[r],
                    res.covered[r],
                    res.flagged[r],
                )


def _estimate_once(path, x, h, kernel, threshold, choice: EstimatorChoice) -> EstimateResult:
    if choice.kind == "local_linear":
        th = threshold if threshold is not None else math.inf
        return local_linear_sigma2(path, x, h, kernel, th)
    if choice.kind == "local_poly":
        th = threshold if threshold is not None else math.inf
        beta = local_poly_fit(path, x, h, kernel, th, choice.p)
        s2 = float(beta[0])
    elif choice.kind == "nw_threshold":
        th = threshold if threshold is not None else math.inf
        s2 = nw_sigma2(path, x, h, kernel, th)
    else:  # nw_plain
        th = None
        s2 = nw_sigma2(path, x, h, kernel, None)
    lt = local_time_hat(path, x, h, kernel)
    d = path.increments()
    if th is None or math.isinf(th):
        flagged = 0.0
    else:
        flagged = float(np.mean(d * d > th))
    w_positive = int(np.count_nonzero(kernel((path.values[:-1] - x) / h) > 0))
    return EstimateResult(
        x=x,
        sigma2_hat=s2,
        beta=np.array([s2]),
        local_time_hat=lt,
        h=h,
        n_effective=w_positive,
        flagged_fraction=flagged,
    )


def run_experiment(config: ExperimentConfig) -> MCReport:
    """Run the replicated experiment described by config.

    Raises ExperimentError when more than 20% of replicates fail at any
    evaluation point, which almost always means the bandwidth or the
    evaluation points were misconfigured for the model.
    """
    kernel = resolve_kernel(config.kernel)
    model = config.model
    m = config.replications
    delta = config.delta
    h = config.bandwidth()
    threshold = config.threshold()
    # variance constant matching the estimator's weight structure: order-1
    # sandwich for local linear, order-p for the polynomial fit, order-0
    # for the plain kernel ratio
    kind = config.estimator.kind
    if kind == "local_linear":
        v = variance_constant(kernel)
    elif kind == "local_poly":
        v = sandwich_variance_constant(kernel, config.estimator.p)
    else:
        v = sandwich_variance_constant(kernel, 0)
    fa_present = model.jumps.fa is not None
    use_threshold = threshold is not None and config.estimator.kind != "nw_plain"

    xs = [float(x) for x in config.x_points]
    s2_hat = {x: np.full(m, np.nan) for x in xs}
    z_rep = {x: np.full(m, np.nan) for x in xs}
    covered = {x: np.full(m, np.nan) for x in xs}
    flagged = {x: np.full(m, np.nan) for x in xs}
    n_eff = {x: np.full(m, np.nan) for x in xs}
    classification = JumpClassification() if (fa_present and use_threshold) else None

    truth = {x: model.sigma2(x) for x in xs}
    curv = {
        x: (model.diffusion_curvature(x) if model.diffusion_curvature is not None else None)
        for x in xs
    }

    for r in range(m):
        path = simulate_path(model, config.n, config.T, derive_seed(config.master_seed, r),
                             refine=config.refine)
        if classification is not None:
            d = path.increments()
            excluded = d * d > threshold
            mask = path.jump_mask
            classification.jump_intervals += int(np.count_nonzero(mask))
            classification.jump_intervals_excluded += int(np.count_nonzero(excluded & mask))
            classification.clean_intervals += int(np.count_nonzero(~mask))
            classification.clean_intervals_excluded += int(np.count_nonzero(excluded & ~mask))
        for x in xs:
            try:
                est = _estimate_once(path, x, h, kernel, threshold, config.estimator)
                bias = (
                    bias_correction(kernel, curv[x], h) if curv[x] is not None else 0.0
                )
                z = standardize(
                    est.sigma2_hat, truth[x], bias, h, delta, est.local_time_hat, v
                )
                ci = confidence_interval(
                    est, delta, config.level, kernel, curv[x], variance_const=v
                )
            except EstimationError:
                continue
            s2_hat[x][r] = est.sigma2_hat
            z_rep[x][r] = z
            covered[x][r] = float(ci.ci_low <= truth[x] <= ci.ci_high)
            flagged[x][r] = est.flagged_fraction
            n_eff[x][r] = est.n_effective

    results = []
    for x in xs:
        ok = ~np.isnan(z_rep[x])
        failures = int(m - np.count_nonzero(ok))
        if failures > MAX_FAILURE_FRACTION * m:
            raise ExperimentError(
                f"{failures}/{m} replicates failed at x={x}: "
                "bandwidth or evaluation point misconfigured for this model"
            )
        z = z_rep[x][ok]
        err = s2_hat[x][ok] - truth[x]
        mean_neff = float(np.mean(n_eff[x][ok]))
        if mean_neff < LOW_EFFECTIVE_COUNT:
            warnings.warn(
                f"mean effective sample size {mean_neff:.1f} at x={x} is below "
                f"{LOW_EFFECTIVE_COUNT}; estimates may be unstable",
                stacklevel=2,
            )
        results.append(
            XResult(
                x=x,
                z_samples=z,
                ks_distance=ks_distance(z),
                coverage=float(np.mean(covered[x][ok])),
                mean_bias=float(np.mean(err)),
                rmse=float(np.sqrt(np.mean(err**2))),
                mean_flagged_fraction=float(np.mean(flagged[x][ok])),
                mean_sigma2_hat=float(np.mean(s2_hat[x][ok])),
                mean_n_effective=mean_neff,
                failures=failures,
                sigma2_true=truth[x],
                sigma2_hats=s2_hat[x],
                z_by_replicate=z_rep[x],
                covered=covered[x],
                flagged=flagged[x],
            )
        )
    return MCReport(
        config=config,
        delta=delta,
        h=h,
        threshold=threshold,
        v_x=v,
        results=results,
        classification=classification,
    )
