"""Observation-file ingestion, flat config parsing and result persistence.

CSV numbers are written with 17 significant digits so write -> read is
lossless for float64.  Every output embeds the resolved configuration as
'#'-prefixed comment lines (CSV) or a config block (JSON), which readers
skip.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigError, DataError
from .simulate import SamplePath

SPACING_REL_TOL = 1e-9

MODES = ("simulate", "estimate", "mc", "bandwidth", "check")


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def read_observations(path) -> SamplePath:
    """Load an equispaced observation file with header ``t,x``.

    Leading '#' comment lines are skipped.  The time column must be
    strictly increasing with constant spacing (1e-9 relative); errors name
    the offending data row.
    """
    ts: list[float] = []
    xs: list[float] = []
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise DataError(f"cannot read observation file {path}: {exc}") from exc
    body = [ln for ln in lines if not ln.lstrip().startswith("#")]
    if not body:
        raise DataError(f"{path}: empty file")
    header = body[0].strip()
    if [c.strip() for c in header.split(",")[:2]] != ["t", "x"]:
        raise DataError(f"{path}: expected header 't,x', got {header!r}")
    for row_idx, ln in enumerate(body[1:], start=1):
        ln = ln.strip()
        if not ln:
            continue
        parts = ln.split(",")
        try:
            ts.append(float(parts[0]))
            xs.append(float(parts[1]))
        except (ValueError, IndexError) as exc:
            raise DataError(f"{path}: cannot parse data row {row_idx}: {ln!r}") from exc
    if len(ts) < 3:
        raise DataError(f"{path}: need at least 3 rows, got {len(ts)}")
    t = np.asarray(ts)
    x = np.asarray(xs)
    gaps = np.diff(t)
    bad = np.nonzero(gaps <= 0)[0]
    if bad.size:
        raise DataError(
            f"{path}: time not strictly increasing at data row {bad[0] + 2}"
        )
    delta = float(t[1] - t[0])
    rel = np.abs(gaps - delta) / max(abs(delta), 1e-300)
    bad = np.nonzero(rel > SPACING_REL_TOL)[0]
    if bad.size:
        raise DataError(
            f"{path}: irregular spacing at data row {bad[0] + 2}: "
            f"gap {gaps[bad[0]]!r} vs expected {delta!r}"
        )
    n = len(t) - 1
    return SamplePath(n=n, T=float(t[-1] - t[0]), delta=delta, values=x)


def write_observations(path_obj: SamplePath, file, provenance: Optional[dict] = None) -> None:
    """Write a path as ``t,x`` rows; times are regenerated as i*delta."""
    with open(file, "w") as fh:
        if provenance:
            for k, v in provenance.items():
                fh.write(f"# {k} = {v}\n")
        fh.write("t,x\n")
        d = path_obj.delta
        for i, v in enumerate(path_obj.values):
            fh.write(f"{_fmt(i * d)},{_fmt(v)}\n")


def write_jump_times(times, file) -> None:
    with open(file, "w") as fh:
        fh.write("jump_time\n")
        for t in times:
            fh.write(f"{_fmt(t)}\n")


@dataclass
class RunConfig:
    """Validated flat configuration for one CLI run."""

    mode: str
    # model
    drift: str = "zero"
    kappa: float = 1.0
    theta: float = 0.0
    diffusion: str = "constant"
    s: float = 1.0
    a: float = 1.0
    b: float = 0.0
    x0: float = 0.0
    fa_intensity: Optional[float] = None
    fa_jump_mu: float = 0.0
    fa_jump_sigma: float = 1.0
    ia_kind: Optional[str] = None
    ia_alpha: float = 0.5
    ia_scale: float = 1.0
    vg_nu: float = 0.2
    vg_theta: float = 0.0
    vg_sigma: float = 1.0
    # sampling / estimation
    n: int = 1000
    T: float = 1.0
    seed: int = 0
    refine: int = 10
    eta: Optional[float] = None
    phi: Optional[float] = None
    h: Optional[str] = None  # numeric literal or 'auto'
    kernel: str = "one_sided_epanechnikov"
    p: int = 1
    level: float = 0.95
    estimator: str = "local_linear"
    replications: int = 100
    alpha: float = 0.0
    ia: bool = False
    # evaluation grid
    x: Optional[float] = None
    x_min: Optional[float] = None
    x_max: Optional[float] = None
    x_count: Optional[int] = None
    x_list: Optional[list[float]] = None
    # files
    input: Optional[str] = None
    output: Optional[str] = None
    output_json: Optional[str] = None
    output_csv: Optional[str] = None
    jumps_output: Optional[str] = None
    # extras for bandwidth mode
    delta: Optional[float] = None
    local_time: Optional[float] = None
    curvature: Optional[float] = None

    def x_points(self) -> list[float]:
        if self.x_list is not None:
            return list(self.x_list)
        if self.x is not None:
            return [self.x]
        if self.x_min is not None and self.x_max is not None and self.x_count:
            return list(np.linspace(self.x_min, self.x_max, self.x_count))
        raise ConfigError("no evaluation points: set x, x_list, or x_min/x_max/x_count")

    def bandwidth_value(self) -> Optional[float]:
        if self.h is None or self.h == "auto":
            return None
        return float(self.h)

    def to_provenance(self) -> dict:
        out = {}
        for k, v in self.__dict__.items():
            if v is None:
                continue
            out[k] = v
        return out


_FLOAT_KEYS = {
    "kappa", "theta", "s", "a", "b", "x0", "fa_intensity", "fa_jump_mu",
    "fa_jump_sigma", "ia_alpha", "ia_scale", "vg_nu", "vg_theta", "vg_sigma",
    "T", "eta", "phi", "level", "x", "x_min", "x_max", "alpha",
    "delta", "local_time", "curvature",
}
_INT_KEYS = {"n", "seed", "refine", "p", "x_count", "replications"}
_BOOL_KEYS = {"ia"}
_STR_KEYS = {
    "mode", "drift", "diffusion", "ia_kind", "kernel", "estimator", "h",
    "input", "output", "output_json", "output_csv", "jumps_output",
}
_LIST_KEYS = {"x_list"}
_ALL_KEYS = _FLOAT_KEYS | _INT_KEYS | _BOOL_KEYS | _STR_KEYS | _LIST_KEYS


def _coerce(key: str, raw: str):
    try:
        if key in _FLOAT_KEYS:
            return float(raw)
        if key in _INT_KEYS:
            return int(raw)
        if key in _BOOL_KEYS:
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        if key in _LIST_KEYS:
            return [float(v) for v in raw.split(",") if v.strip()]
        return raw
    except ValueError as exc:
        raise ConfigError(f"config key {key!r}: cannot parse value {raw!r}") from exc


def validate_config(cfg: RunConfig) -> RunConfig:
    if cfg.mode not in MODES:
        raise ConfigError(f"config key 'mode': must be one of {MODES}, got {cfg.mode!r}")
    if cfg.eta is not None and not (0.0 < cfg.eta < 1.0):
        raise ConfigError(f"config key 'eta': must be in (0, 1), got {cfg.eta}")
    if cfg.phi is not None and cfg.phi <= 0:
        raise ConfigError(f"config key 'phi': must be > 0, got {cfg.phi}")
    if not (0.0 < cfg.level < 1.0):
        raise ConfigError(f"config key 'level': must be in (0, 1), got {cfg.level}")
    if cfg.n < 2:
        raise ConfigError(f"config key 'n': must be >= 2, got {cfg.n}")
    if cfg.T <= 0:
        raise ConfigError(f"config key 'T': must be > 0, got {cfg.T}")
    if cfg.replications < 1:
        raise ConfigError(f"config key 'replications': must be >= 1, got {cfg.replications}")
    if cfg.h is not None and cfg.h != "auto":
        try:
            hv = float(cfg.h)
        except ValueError as exc:
            raise ConfigError(f"config key 'h': expected a number or 'auto', got {cfg.h!r}") from exc
        if hv <= 0:
            raise ConfigError(f"config key 'h': must be > 0, got {hv}")
    if not (0.0 <= cfg.alpha < 1.0):
        raise ConfigError(f"config key 'alpha': must be in [0, 1), got {cfg.alpha}")
    return cfg


def parse_config(path) -> RunConfig:
    """Parse a flat ``key = value`` config file with '#' comments."""
    values: dict = {}
    try:
        fh = open(path)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    with fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
            key, _, val = line.partition("=")
            key = key.strip()
            val = val.strip()
            if key not in _ALL_KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
            values[key] = _coerce(key, val)
    if "mode" not in values:
        raise ConfigError(f"{path}: missing required key 'mode'")
    return validate_config(RunConfig(**values))


def write_estimates_csv(rows, file, provenance: Optional[dict] = None) -> None:
    """Rows of (x, sigma2_hat, L_hat, se, ci_low, ci_high, flagged_fraction)."""
    with open(file, "w") as fh:
        if provenance:
            for k, v in provenance.items():
                fh.write(f"# {k} = {v}\n")
        fh.write("x,sigma2_hat,L_hat,se,ci_low,ci_high,flagged_fraction\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_mc_outputs(report, json_file=None, csv_file=None) -> None:
    if json_file:
        with open(json_file, "w") as fh:
            json.dump(report.to_json_dict(), fh, indent=2)
            fh.write("\n")
    if csv_file:
        with open(csv_file, "w") as fh:
            cfg = report.to_json_dict()["config"]
            for k, v in cfg.items():
                fh.write(f"# {k} = {v}\n")
            fh.write("r,x,sigma2_hat,z,covered,flagged_fraction\n")
            for r, x, s2, z, cov, fl in report.iter_replicate_rows():
                fh.write(
                    f"{r},{_fmt(x)},{_fmt(s2)},{_fmt(z)},{_fmt(cov)},{_fmt(fl)}\n"
                )
