"""Named drift/diffusion registry for configs, the CLI and the service.

Closed-form functions only: analytic curvature of sigma^2 is needed by the
bias and bandwidth formulas, so arbitrary expressions are deliberately out.
"""

from __future__ import annotations

import math
from typing import Callable, Optional

from .errors import ConfigError
from .simulate import (
    FiniteActivityJumps,
    InfiniteActivityJumps,
    JumpSpec,
    ModelSpec,
    VGParams,
    constant_intensity,
    normal_jump_sizes,
)

DRIFT_NAMES = ("zero", "linear_mean_revert")
DIFFUSION_NAMES = ("constant", "sine_bump")


def make_drift(name: str, kappa: float = 1.0, theta: float = 0.0) -> Callable[[float], float]:
    if name == "zero":
        def drift(x: float) -> float:
            return 0.0
        return drift
    if name == "linear_mean_revert":
        def drift(x: float) -> float:
            return kappa * (theta - x)
        return drift
    raise ConfigError(f"unknown drift {name!r}; available: {', '.join(DRIFT_NAMES)}")


def make_diffusion(name: str, s: float = 1.0, a: float = 1.0, b: float = 0.0):
    """Return (sigma, sigma2_curvature) callables for a named diffusion.

    ``constant``: sigma(x) = s.  ``sine_bump``: sigma^2(x) = a + b*sin(x),
    smooth and bounded with curvature -b*sin(x); requires a > |b| so the
    variance stays positive.
    """
    if name == "constant":
        if s <= 0:
            raise ConfigError(f"constant diffusion needs s > 0, got {s}")
        def sigma(x: float) -> float:
            return s
        def curvature(x: float) -> float:
            return 0.0
        return sigma, curvature
    if name == "sine_bump":
        if a <= abs(b):
            raise ConfigError(
                f"sine_bump needs a > |b| for a positive variance, got a={a}, b={b}"
            )
        def sigma(x: float) -> float:
            return math.sqrt(a + b * math.sin(x))
        def curvature(x: float) -> float:
            return -b * math.sin(x)
        return sigma, curvature
    raise ConfigError(f"unknown diffusion {name!r}; available: {', '.join(DIFFUSION_NAMES)}")


def build_model(
    drift: str = "zero",
    kappa: float = 1.0,
    theta: float = 0.0,
    diffusion: str = "constant",
    s: float = 1.0,
    a: float = 1.0,
    b: float = 0.0,
    x0: float = 0.0,
    fa_intensity: Optional[float] = None,
    fa_jump_mu: float = 0.0,
    fa_jump_sigma: float = 1.0,
    ia_kind: Optional[str] = None,
    ia_alpha: float = 0.5,
    ia_scale: float = 1.0,
    vg_nu: float = 0.2,
    vg_theta: float = 0.0,
    vg_sigma: float = 1.0,
) -> ModelSpec:
    """Assemble a ModelSpec from registry names and numeric parameters."""
    mu = make_drift(drift, kappa=kappa, theta=theta)
    sig, curv = make_diffusion(diffusion, s=s, a=a, b=b)
    fa = None
    if fa_intensity is not None:
        if fa_intensity < 0:
            raise ConfigError(f"fa_intensity must be >= 0, got {fa_intensity}")
        fa = FiniteActivityJumps(
            intensity=constant_intensity(fa_intensity),
            intensity_bound=fa_intensity,
            jump_size_sampler=normal_jump_sizes(fa_jump_mu, fa_jump_sigma),
        )
    ia = None
    if ia_kind is not None:
        ia = InfiniteActivityJumps(
            kind=ia_kind,
            alpha=ia_alpha,
            scale=ia_scale,
            vg_params=VGParams(nu=vg_nu, theta=vg_theta, sigma=vg_sigma)
            if ia_kind == "variance_gamma"
            else None,
        )
    return ModelSpec(
        drift=mu,
        diffusion=sig,
        diffusion_curvature=curv,
        jumps=JumpSpec(fa=fa, ia=ia),
        x0=x0,
    )
