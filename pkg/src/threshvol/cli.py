"""Command-line front end.

Subcommands: simulate, estimate, mc, bandwidth, check-conditions, serve.
Each accepts direct flags, a ``--config`` file, or both (flags win).
Exit codes: 0 success, 1 usage/config, 2 data, 3 numerical.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from .asymptotics import RateParams, check_rate_conditions, confidence_interval, optimal_bandwidth
from .errors import (
    ConfigError,
    DataError,
    EstimationError,
    ExperimentError,
    QuadratureError,
    SimulationError,
)
from .estimators import local_linear_sigma2, local_time_hat, nw_sigma2, plugin_curvature
from .io import (
    RunConfig,
    parse_config,
    read_observations,
    validate_config,
    write_estimates_csv,
    write_jump_times,
    write_mc_outputs,
    write_observations,
)
from .kernels import builtin_kernel, load_kernel_csv
from .mc import EstimatorChoice, ExperimentConfig, run_experiment
from .models import build_model
from .simulate import simulate_path


def _resolve_kernel(name: str):
    if name.endswith(".csv"):
        return load_kernel_csv(name)
    return builtin_kernel(name)


_MODEL_KEYS = (
    "drift", "kappa", "theta", "diffusion", "s", "a", "b", "x0",
    "fa_intensity", "fa_jump_mu", "fa_jump_sigma",
    "ia_kind", "ia_alpha", "ia_scale", "vg_nu", "vg_theta", "vg_sigma",
)


def _model_from_cfg(cfg: RunConfig):
    return build_model(**{k: getattr(cfg, k) for k in _MODEL_KEYS})


def _load_cfg(args, mode: str) -> RunConfig:
    if getattr(args, "config", None):
        cfg = parse_config(args.config)
        if cfg.mode != mode:
            raise ConfigError(f"config file is for mode {cfg.mode!r}, expected {mode!r}")
    else:
        cfg = RunConfig(mode=mode)
    for key, value in vars(args).items():
        if key in ("config", "func", "command") or value is None:
            continue
        if hasattr(cfg, key):
            setattr(cfg, key, value)
    return validate_config(cfg)


def _cmd_simulate(args) -> int:
    cfg = _load_cfg(args, "simulate")
    if not cfg.output:
        raise ConfigError("simulate needs an output file (output = ...)")
    model = _model_from_cfg(cfg)
    path = simulate_path(model, cfg.n, cfg.T, cfg.seed, refine=cfg.refine)
    write_observations(path, cfg.output, provenance=cfg.to_provenance())
    if path.fa_jump_times is not None:
        jumps_file = cfg.jumps_output or cfg.output + ".jumps.csv"
        write_jump_times(path.fa_jump_times, jumps_file)
    print(f"wrote {cfg.n + 1} observations to {cfg.output}")
    return 0


def _estimate_rows(cfg: RunConfig, path, kernel):
    delta = path.delta
    threshold = delta**cfg.eta if cfg.eta is not None else math.inf
    rows = []
    resolved_h = []
    for x in cfg.x_points():
        h = cfg.bandwidth_value()
        if h is None:
            pilot = 1.06 * float(np.std(path.values)) * (path.n + 1) ** (-0.2)
            lt = local_time_hat(path, x, pilot, kernel)
            curv = plugin_curvature(path, x, pilot, kernel, threshold)
            h = optimal_bandwidth(delta, lt, curv, kernel)
        resolved_h.append(h)
        if cfg.estimator == "local_linear":
            est = local_linear_sigma2(path, x, h, kernel, threshold)
        elif cfg.estimator in ("nw_threshold", "nw_plain"):
            th = threshold if cfg.estimator == "nw_threshold" else None
            s2 = nw_sigma2(path, x, h, kernel, th)
            from .estimators import EstimateResult

            d = path.increments()
            flagged = float(np.mean(d * d > threshold)) if th is not None else 0.0
            est = EstimateResult(
                x=x, sigma2_hat=s2, beta=np.array([s2]),
                local_time_hat=local_time_hat(path, x, h, kernel),
                h=h, n_effective=0, flagged_fraction=flagged,
            )
        else:
            raise ConfigError(f"estimator {cfg.estimator!r} not supported by estimate mode")
        try:
            curv = plugin_curvature(path, x, h, kernel, threshold)
        except EstimationError:
            curv = None
        ci = confidence_interval(est, delta, cfg.level, kernel, curv)
        rows.append(
            (x, est.sigma2_hat, est.local_time_hat, ci.std_error, ci.ci_low,
             ci.ci_high, est.flagged_fraction)
        )
    return rows, resolved_h


def _cmd_estimate(args) -> int:
    cfg = _load_cfg(args, "estimate")
    if not cfg.input:
        raise ConfigError("estimate needs an input observation file (input = ...)")
    if cfg.eta is None:
        raise ConfigError("estimate needs a threshold exponent (eta = ...)")
    path = read_observations(cfg.input)
    kernel = _resolve_kernel(cfg.kernel)
    rows, resolved_h = _estimate_rows(cfg, path, kernel)
    prov = cfg.to_provenance()
    prov["h_resolved"] = ",".join(format(h, ".17g") for h in resolved_h)
    if cfg.output:
        write_estimates_csv(rows, cfg.output, provenance=prov)
        print(f"wrote {len(rows)} estimates to {cfg.output}")
    else:
        print("x,sigma2_hat,L_hat,se,ci_low,ci_high,flagged_fraction")
        for row in rows:
            print(",".join(format(v, ".10g") for v in row))
    return 0


def _cmd_mc(args) -> int:
    cfg = _load_cfg(args, "mc")
    model = _model_from_cfg(cfg)
    kernel = _resolve_kernel(cfg.kernel)
    h = cfg.bandwidth_value()
    exp = ExperimentConfig(
        model=model,
        n=cfg.n,
        T=cfg.T,
        replications=cfg.replications,
        x_points=cfg.x_points(),
        kernel=kernel,
        estimator=EstimatorChoice(kind=cfg.estimator, p=cfg.p),
        master_seed=cfg.seed,
        level=cfg.level,
        eta=cfg.eta,
        phi=cfg.phi,
        h=h,
        refine=cfg.refine,
    )
    report = run_experiment(exp)
    json_file = cfg.output_json or cfg.output
    write_mc_outputs(report, json_file=json_file, csv_file=cfg.output_csv)
    for res in report.results:
        print(
            f"x={res.x:g}: ks={res.ks_distance:.4f} coverage={res.coverage:.3f} "
            f"mean_bias={res.mean_bias:+.5f} rmse={res.rmse:.5f} failures={res.failures}"
        )
    if json_file:
        print(f"wrote report to {json_file}")
    if cfg.output_csv:
        print(f"wrote replicate rows to {cfg.output_csv}")
    return 0


def _cmd_bandwidth(args) -> int:
    cfg = _load_cfg(args, "bandwidth")
    kernel = _resolve_kernel(cfg.kernel)
    if cfg.input is not None:
        if cfg.eta is None:
            raise ConfigError("bandwidth from data needs a threshold exponent (eta = ...)")
        path = read_observations(cfg.input)
        xs = cfg.x_points()
        pilot = cfg.bandwidth_value() or 1.06 * float(np.std(path.values)) * (path.n + 1) ** (-0.2)
        threshold = path.delta**cfg.eta
        for x in xs:
            lt = local_time_hat(path, x, pilot, kernel)
            curv = plugin_curvature(path, x, pilot, kernel, threshold)
            h = optimal_bandwidth(path.delta, lt, curv, kernel)
            print(f"x={x:g}: h_opt={h:.10g} (pilot={pilot:.6g}, L_hat={lt:.6g}, curvature={curv:.6g})")
        return 0
    if cfg.delta is None or cfg.local_time is None or cfg.curvature is None:
        raise ConfigError("bandwidth needs either input data or delta, local_time and curvature")
    h = optimal_bandwidth(cfg.delta, cfg.local_time, cfg.curvature, kernel)
    print(f"h_opt={h:.10g}")
    return 0


def _cmd_check(args) -> int:
    cfg = _load_cfg(args, "check")
    if cfg.eta is None or cfg.phi is None:
        raise ConfigError("check-conditions needs eta and phi")
    report = check_rate_conditions(
        RateParams(eta=cfg.eta, phi=cfg.phi, alpha=cfg.alpha), ia_present=cfg.ia
    )
    for c in report.conditions:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}: slack={c.slack:+.6g}")
    print(f"overall: {'PASS' if report.passed else 'FAIL'}")
    if getattr(args, "json", False):
        print(json.dumps(report.to_dict()))
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .api import app

    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="threshvol",
        description="Threshold local-polynomial volatility estimation for jump diffusions",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--kernel", help="builtin kernel name or custom kernel CSV")

    def add_model_flags(p):
        p.add_argument("--drift", choices=("zero", "linear_mean_revert"))
        p.add_argument("--kappa", type=float)
        p.add_argument("--theta", type=float)
        p.add_argument("--diffusion", choices=("constant", "sine_bump"))
        p.add_argument("--s", type=float)
        p.add_argument("--a", type=float)
        p.add_argument("--b", type=float)
        p.add_argument("--x0", type=float)
        p.add_argument("--fa-intensity", dest="fa_intensity", type=float)
        p.add_argument("--fa-jump-mu", dest="fa_jump_mu", type=float)
        p.add_argument("--fa-jump-sigma", dest="fa_jump_sigma", type=float)
        p.add_argument("--ia-kind", dest="ia_kind",
                       choices=("symmetric_alpha_stable", "variance_gamma"))
        p.add_argument("--ia-alpha", dest="ia_alpha", type=float)
        p.add_argument("--ia-scale", dest="ia_scale", type=float)
        p.add_argument("--vg-nu", dest="vg_nu", type=float)
        p.add_argument("--vg-theta", dest="vg_theta", type=float)
        p.add_argument("--vg-sigma", dest="vg_sigma", type=float)

    def add_grid_flags(p):
        p.add_argument("--x", type=float)
        p.add_argument("--x-min", dest="x_min", type=float)
        p.add_argument("--x-max", dest="x_max", type=float)
        p.add_argument("--x-count", dest="x_count", type=int)

    p_sim = sub.add_parser("simulate", help="simulate a jump-diffusion path to CSV")
    add_common(p_sim)
    add_model_flags(p_sim)
    p_sim.add_argument("--n", type=int)
    p_sim.add_argument("--T", type=float)
    p_sim.add_argument("--seed", type=int)
    p_sim.add_argument("--refine", type=int)
    p_sim.add_argument("--output")
    p_sim.add_argument("--jumps-output", dest="jumps_output")
    p_sim.set_defaults(func=_cmd_simulate)

    p_est = sub.add_parser("estimate", help="estimate sigma^2 from an observation file")
    add_common(p_est)
    add_grid_flags(p_est)
    p_est.add_argument("--input")
    p_est.add_argument("--output")
    p_est.add_argument("--h")
    p_est.add_argument("--eta", type=float)
    p_est.add_argument("--level", type=float)
    p_est.add_argument("--estimator", choices=("local_linear", "nw_threshold", "nw_plain"))
    p_est.set_defaults(func=_cmd_estimate)

    p_mc = sub.add_parser("mc", help="run a Monte Carlo validation experiment")
    add_common(p_mc)
    add_model_flags(p_mc)
    add_grid_flags(p_mc)
    p_mc.add_argument("--n", type=int)
    p_mc.add_argument("--T", type=float)
    p_mc.add_argument("--seed", type=int)
    p_mc.add_argument("--refine", type=int)
    p_mc.add_argument("--replications", "-M", dest="replications", type=int)
    p_mc.add_argument("--h")
    p_mc.add_argument("--eta", type=float)
    p_mc.add_argument("--phi", type=float)
    p_mc.add_argument("--level", type=float)
    p_mc.add_argument("--p", type=int)
    p_mc.add_argument("--estimator",
                      choices=("local_linear", "nw_threshold", "nw_plain", "local_poly"))
    p_mc.add_argument("--output-json", dest="output_json")
    p_mc.add_argument("--output-csv", dest="output_csv")
    p_mc.set_defaults(func=_cmd_mc)

    p_bw = sub.add_parser("bandwidth", help="mean-square optimal bandwidth")
    add_common(p_bw)
    add_grid_flags(p_bw)
    p_bw.add_argument("--input")
    p_bw.add_argument("--h", help="pilot bandwidth when reading data")
    p_bw.add_argument("--eta", type=float)
    p_bw.add_argument("--delta", type=float)
    p_bw.add_argument("--local-time", dest="local_time", type=float)
    p_bw.add_argument("--curvature", type=float)
    p_bw.set_defaults(func=_cmd_bandwidth)

    p_chk = sub.add_parser("check-conditions", help="validate rate-condition inequalities")
    add_common(p_chk)
    p_chk.add_argument("--alpha", type=float)
    p_chk.add_argument("--eta", type=float)
    p_chk.add_argument("--phi", type=float)
    p_chk.add_argument("--ia", action="store_true", default=None)
    p_chk.add_argument("--json", action="store_true")
    p_chk.set_defaults(func=_cmd_check)

    p_srv = sub.add_parser("serve", help="run the HTTP service")
    p_srv.add_argument("--host", default="127.0.0.1")
    p_srv.add_argument("--port", type=int, default=8000)
    p_srv.set_defaults(func=_cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (EstimationError, SimulationError, ExperimentError, QuadratureError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
