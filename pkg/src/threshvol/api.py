"""HTTP service wrapping the estimation core.

Endpoints mirror the CLI subcommands: /simulate, /estimate, /mc,
/bandwidth, /check-conditions.  Long experiments belong on the CLI; the
service is meant for interactive estimation and quick checks.
"""

from __future__ import annotations

import math
from typing import Literal, Optional

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import __version__
from .asymptotics import (
    RateParams,
    check_rate_conditions,
    confidence_interval,
    optimal_bandwidth,
)
from .errors import ThreshvolError
from .estimators import (
    local_linear_sigma2,
    local_poly_fit,
    local_time_hat,
    nw_sigma2,
    plugin_curvature,
)
from .kernels import BUILTIN_KERNELS, builtin_kernel
from .mc import EstimatorChoice, ExperimentConfig, run_experiment
from .models import build_model
from .simulate import SamplePath, simulate_path

app = FastAPI(title="threshvol", version=__version__)


class ModelIn(BaseModel):
    drift: Literal["zero", "linear_mean_revert"] = "zero"
    kappa: float = 1.0
    theta: float = 0.0
    diffusion: Literal["constant", "sine_bump"] = "constant"
    s: float = 1.0
    a: float = 1.0
    b: float = 0.0
    x0: float = 0.0
    fa_intensity: Optional[float] = None
    fa_jump_mu: float = 0.0
    fa_jump_sigma: float = 1.0
    ia_kind: Optional[Literal["symmetric_alpha_stable", "variance_gamma"]] = None
    ia_alpha: float = 0.5
    ia_scale: float = 1.0
    vg_nu: float = 0.2
    vg_theta: float = 0.0
    vg_sigma: float = 1.0

    def build(self):
        return build_model(**self.model_dump())


class SimulateIn(BaseModel):
    model: ModelIn = Field(default_factory=ModelIn)
    n: int = Field(ge=2)
    T: float = Field(gt=0)
    seed: int = 0
    refine: int = Field(default=10, ge=1)


class SimulateOut(BaseModel):
    t: list[float]
    x: list[float]
    fa_jump_times: Optional[list[float]] = None


class ObservationsIn(BaseModel):
    t: list[float]
    x: list[float]


class EstimateIn(BaseModel):
    observations: ObservationsIn
    x_points: list[float]
    h: Optional[float] = Field(default=None, gt=0)  # None: bandwidth picked automatically
    eta: float = Field(gt=0, lt=1)
    kernel: str = "one_sided_epanechnikov"
    level: float = Field(default=0.95, gt=0, lt=1)
    estimator: Literal["local_linear", "nw_threshold", "nw_plain", "local_poly"] = "local_linear"
    p: int = Field(default=1, ge=0)


class EstimateRow(BaseModel):
    x: float
    sigma2_hat: float
    local_time_hat: float
    std_error: float
    ci_low: float
    ci_high: float
    flagged_fraction: float
    h: float


class EstimateOut(BaseModel):
    rows: list[EstimateRow]


class McIn(BaseModel):
    model: ModelIn = Field(default_factory=ModelIn)
    n: int = Field(ge=2)
    T: float = Field(gt=0)
    replications: int = Field(ge=1, le=2000)
    x_points: list[float]
    kernel: str = "one_sided_epanechnikov"
    estimator: Literal["local_linear", "nw_threshold", "nw_plain", "local_poly"] = "local_linear"
    p: int = Field(default=1, ge=0)
    master_seed: int = 0
    level: float = Field(default=0.95, gt=0, lt=1)
    eta: Optional[float] = Field(default=None, gt=0, lt=1)
    phi: Optional[float] = Field(default=None, gt=0)
    h: Optional[float] = Field(default=None, gt=0)
    refine: int = Field(default=10, ge=1)


class BandwidthIn(BaseModel):
    delta: float = Field(gt=0)
    local_time: float = Field(gt=0)
    curvature: float
    kernel: str = "one_sided_epanechnikov"


class BandwidthOut(BaseModel):
    h_opt: float


class RateCheckIn(BaseModel):
    alpha: float = 0.0
    eta: float
    phi: float
    ia: bool = False


def _path_from_observations(obs: ObservationsIn) -> SamplePath:
    t = np.asarray(obs.t, dtype=float)
    x = np.asarray(obs.x, dtype=float)
    if t.size != x.size or t.size < 3:
        raise HTTPException(status_code=400, detail="need matching t and x with >= 3 rows")
    gaps = np.diff(t)
    if np.any(gaps <= 0):
        raise HTTPException(status_code=400, detail="time must be strictly increasing")
    delta = float(gaps[0])
    if np.any(np.abs(gaps - delta) > 1e-9 * abs(delta)):
        raise HTTPException(status_code=400, detail="observations must be equally spaced")
    n = t.size - 1
    return SamplePath(n=n, T=float(t[-1] - t[0]), delta=delta, values=x)


@app.get("/health")
def health() -> dict:
    return {"status": "ok", "version": __version__}


@app.get("/kernels")
def kernels() -> dict:
    return {"kernels": list(BUILTIN_KERNELS)}


@app.post("/simulate", response_model=SimulateOut)
def simulate(req: SimulateIn) -> SimulateOut:
    try:
        path = simulate_path(req.model.build(), req.n, req.T, req.seed, refine=req.refine)
    except ThreshvolError as exc:
        raise HTTPException(status_code=400, detail=str(exc))
    t = [i * path.delta for i in range(path.n + 1)]
    return SimulateOut(
        t=t,
        x=[float(v) for v in path.values],
        fa_jump_times=[float(v) for v in path.fa_jump_times]
        if path.fa_jump_times is not None
        else None,
    )


@app.post("/estimate", response_model=EstimateOut)
def estimate(req: EstimateIn) -> EstimateOut:
    path = _path_from_observations(req.observations)
    try:
        kernel = builtin_kernel(req.kernel)
        threshold = path.delta**req.eta
        rows = []
        for x in req.x_points:
            h = req.h
            if h is None:
                pilot = 1.06 * float(np.std(path.values)) * (path.n + 1) ** (-0.2)
                lt = local_time_hat(path, x, pilot, kernel)
                curv = plugin_curvature(path, x, pilot, kernel, threshold)
                h = optimal_bandwidth(path.delta, lt, curv, kernel)
            if req.estimator == "local_linear":
                est = local_linear_sigma2(path, x, h, kernel, threshold)
            elif req.estimator == "local_poly":
                beta = local_poly_fit(path, x, h, kernel, threshold, req.p)
                est = local_linear_sigma2(path, x, h, kernel, threshold)
                est.sigma2_hat = float(beta[0])
                est.beta = beta
            else:
                th = threshold if req.estimator == "nw_threshold" else None
                s2 = nw_sigma2(path, x, h, kernel, th)
                est = local_linear_sigma2(path, x, h, kernel, threshold)
                est.sigma2_hat = s2
                if th is None:
                    est.flagged_fraction = 0.0
            try:
                curv = plugin_curvature(path, x, h, kernel, threshold)
            except ThreshvolError:
                curv = None
            ci = confidence_interval(est, path.delta, req.level, kernel, curv)
            rows.append(
                EstimateRow(
                    x=x,
                    sigma2_hat=est.sigma2_hat,
                    local_time_hat=est.local_time_hat,
                    std_error=ci.std_error,
                    ci_low=ci.ci_low,
                    ci_high=ci.ci_high,
                    flagged_fraction=est.flagged_fraction,
                    h=h,
                )
            )
    except ThreshvolError as exc:
        raise HTTPException(status_code=400, detail=str(exc))
    return EstimateOut(rows=rows)


@app.post("/mc")
def mc(req: McIn) -> dict:
    try:
        config = ExperimentConfig(
            model=req.model.build(),
            n=req.n,
            T=req.T,
            replications=req.replications,
            x_points=req.x_points,
            kernel=builtin_kernel(req.kernel),
            estimator=EstimatorChoice(kind=req.estimator, p=req.p),
            master_seed=req.master_seed,
            level=req.level,
            eta=req.eta,
            phi=req.phi,
            h=req.h,
            refine=req.refine,
        )
        report = run_experiment(config)
    except ThreshvolError as exc:
        raise HTTPException(status_code=400, detail=str(exc))
    return report.to_json_dict()


@app.post("/bandwidth", response_model=BandwidthOut)
def bandwidth(req: BandwidthIn) -> BandwidthOut:
    try:
        h = optimal_bandwidth(
            req.delta, req.local_time, req.curvature, builtin_kernel(req.kernel)
        )
    except ThreshvolError as exc:
        raise HTTPException(status_code=400, detail=str(exc))
    return BandwidthOut(h_opt=h)


@app.post("/check-conditions")
def check_conditions(req: RateCheckIn) -> dict:
    report = check_rate_conditions(
        RateParams(eta=req.eta, phi=req.phi, alpha=req.alpha), ia_present=req.ia
    )
    return report.to_dict()
