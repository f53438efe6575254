"""Jump-diffusion path simulation on an equispaced observation grid.

Euler-Maruyama runs on a refined internal grid (``refine`` sub-steps per
observation interval) and is subsampled to the n+1 observation points.
Finite-activity jumps are compound Poisson with state-dependent intensity,
realized by thinning a homogeneous candidate stream, so event times are
exact.  Infinite-activity jumps are added per fine step using exact
increment sampling (symmetric alpha-stable or Variance Gamma).

All randomness is derived from indexed seed streams, so a path is a pure
function of (model, n, T, seed) and replicates may run in any order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, SimulationError

# sub-stream tags for one path's random draws
_STREAM_BROWNIAN = 0
_STREAM_FA_TIMES = 1
_STREAM_FA_SIZES = 2
_STREAM_FA_THIN = 3
_STREAM_IA = 4

DEFAULT_REFINE = 10


def derive_seed(master_seed: int, index: int) -> int:
    """Indexed (counter-based) seed derivation: independent of call order."""
    ss = np.random.SeedSequence((int(master_seed), int(index)))
    return int(ss.generate_state(1, np.uint64)[0])


def _stream(seed: int, tag: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((int(seed), tag)))


def normal_jump_sizes(mu: float = 0.0, sigma: float = 1.0):
    """Default jump-size sampler: i.i.d. N(mu, sigma^2)."""
    def sample(rng: np.random.Generator, size: int) -> np.ndarray:
        return mu + sigma * rng.standard_normal(size)
    return sample


def constant_intensity(lam: float) -> Callable[[float], float]:
    if lam < 0:
        raise ConfigError(f"jump intensity must be >= 0, got {lam}")
    def intensity(x: float) -> float:
        return lam
    return intensity


@dataclass
class FiniteActivityJumps:
    """Compound Poisson component with state-dependent intensity.

    ``intensity_bound`` must dominate intensity(x) on every visited state;
    thinning raises if that is ever violated.
    """
    intensity: Callable[[float], float]
    intensity_bound: float
    jump_size_sampler: Callable[[np.random.Generator, int], np.ndarray] = field(
        default_factory=normal_jump_sizes
    )


@dataclass
class VGParams:
    nu: float
    theta: float = 0.0
    sigma: float = 1.0


@dataclass
class InfiniteActivityJumps:
    """Pure-jump Levy component with finite variation.

    ``kind`` is ``symmetric_alpha_stable`` (requires activity index
    alpha < 1) or ``variance_gamma``.  ``scale`` multiplies the increments;
    scale 0 disables the component exactly.
    """
    kind: str
    alpha: float = 0.5
    scale: float = 1.0
    vg_params: Optional[VGParams] = None


@dataclass
class JumpSpec:
    fa: Optional[FiniteActivityJumps] = None
    ia: Optional[InfiniteActivityJumps] = None


@dataclass
class ModelSpec:
    """Scalar SDE: drift and diffusion coefficient functions plus jumps.

    ``diffusion`` is sigma(x) (not squared).  ``diffusion_curvature``, when
    given, is the second derivative of sigma^2, used by bias and bandwidth
    formulas.
    """
    drift: Callable[[float], float]
    diffusion: Callable[[float], float]
    jumps: JumpSpec = field(default_factory=JumpSpec)
    x0: float = 0.0
    diffusion_curvature: Optional[Callable[[float], float]] = None

    def sigma2(self, x: float) -> float:
        s = self.diffusion(x)
        return s * s


@dataclass
class SamplePath:
    """Equally spaced observations of one simulated or ingested path."""
    n: int
    T: float
    delta: float
    values: np.ndarray
    jump_mask: Optional[np.ndarray] = None
    fa_jump_times: Optional[np.ndarray] = None
    seed: Optional[int] = None

    def increments(self) -> np.ndarray:
        return np.diff(self.values)


def validate_jumps(jumps: JumpSpec) -> None:
    if jumps.fa is not None:
        if jumps.fa.intensity_bound < 0:
            raise ConfigError("intensity_bound must be >= 0")
    if jumps.ia is not None:
        ia = jumps.ia
        if ia.kind not in ("symmetric_alpha_stable", "variance_gamma"):
            raise ConfigError(f"unknown infinite-activity kind {ia.kind!r}")
        if ia.scale < 0:
            raise ConfigError("infinite-activity scale must be >= 0")
        if ia.kind == "symmetric_alpha_stable" and not (0.0 < ia.alpha < 1.0):
            raise ConfigError(
                f"alpha-stable component requires alpha in (0, 1), got {ia.alpha}"
            )
        if ia.kind == "variance_gamma":
            if ia.vg_params is None:
                raise ConfigError("variance_gamma component requires vg_params")
            if ia.vg_params.nu <= 0:
                raise ConfigError("variance_gamma nu must be > 0")
            if ia.vg_params.sigma < 0:
                raise ConfigError("variance_gamma sigma must be >= 0")


def sample_ia_increments(
    ia: InfiniteActivityJumps, delta: float, count: int, seed=None, rng=None
) -> np.ndarray:
    """Draw i.i.d. increments of the infinite-activity component over step delta."""
    if delta <= 0:
        raise ConfigError("delta must be > 0")
    validate_jumps(JumpSpec(ia=ia))
    if rng is None:
        rng = _stream(seed if seed is not None else 0, _STREAM_IA)
    if ia.scale == 0.0:
        return np.zeros(count)
    if ia.kind == "symmetric_alpha_stable":
        a = ia.alpha
        u = rng.uniform(-math.pi / 2, math.pi / 2, count)
        e = rng.exponential(1.0, count)
        # polar transform for a standard symmetric stable draw
        s = (np.sin(a * u) / np.cos(u) ** (1.0 / a)) * (
            np.cos((1.0 - a) * u) / e
        ) ** ((1.0 - a) / a)
        return ia.scale * delta ** (1.0 / a) * s
    # variance gamma as a difference of two gamma variates
    p = ia.vg_params
    spread = math.sqrt(p.theta**2 + 2.0 * p.sigma**2 / p.nu)
    mu_pos = 0.5 * (spread + p.theta)
    mu_neg = 0.5 * (spread - p.theta)
    shape = delta / p.nu
    gp = rng.gamma(shape, p.nu * mu_pos, count) if mu_pos > 0 else np.zeros(count)
    gn = rng.gamma(shape, p.nu * mu_neg, count) if mu_neg > 0 else np.zeros(count)
    return ia.scale * (gp - gn)


def _fa_candidates(fa: FiniteActivityJumps, T: float, seed: int):
    """Homogeneous Poisson candidate stream plus thinning/size draws."""
    rng_t = _stream(seed, _STREAM_FA_TIMES)
    ncand = int(rng_t.poisson(fa.intensity_bound * T))
    times = np.sort(rng_t.uniform(0.0, T, ncand))
    accept_u = _stream(seed, _STREAM_FA_THIN).uniform(0.0, 1.0, ncand)
    sizes = np.asarray(fa.jump_size_sampler(_stream(seed, _STREAM_FA_SIZES), ncand), dtype=float)
    return times, accept_u, sizes


def sample_fa_jumps(
    intensity: Callable[[float], float],
    intensity_bound: float,
    state: Callable[[float], float],
    T: float,
    seed: int,
    jump_size_sampler=None,
) -> list[tuple[float, float]]:
    """Thinned compound-Poisson events against a given state trajectory.

    ``state`` maps a time t to the pre-jump state used in the acceptance
    ratio intensity(state(t)) / intensity_bound.  Returns accepted
    (time, size) pairs sorted by time.
    """
    fa = FiniteActivityJumps(
        intensity=intensity,
        intensity_bound=intensity_bound,
        jump_size_sampler=jump_size_sampler or normal_jump_sizes(),
    )
    times, accept_u, sizes = _fa_candidates(fa, T, seed)
    out: list[tuple[float, float]] = []
    for t, u, s in zip(times, accept_u, sizes):
        lam = intensity(state(float(t)))
        if lam > intensity_bound * (1.0 + 1e-12):
            raise SimulationError(
                f"intensity {lam} exceeds bound {intensity_bound} at t={t}: thinning invalid"
            )
        if u * intensity_bound < lam:
            out.append((float(t), float(s)))
    return out


def simulate_path(
    model: ModelSpec, n: int, T: float, seed: int, refine: int = DEFAULT_REFINE
) -> SamplePath:
    """Simulate one path and subsample it to n+1 equispaced observations.

    Deterministic in (model, n, T, seed, refine).  Raises on a non-finite
    state, naming the fine step where it appeared.
    """
    if n < 2:
        raise ConfigError(f"n must be >= 2, got {n}")
    if T <= 0:
        raise ConfigError(f"T must be > 0, got {T}")
    if refine < 1:
        raise ConfigError(f"refine must be >= 1, got {refine}")
    validate_jumps(model.jumps)

    steps = n * refine
    dt = T / steps
    sdt = math.sqrt(dt)
    z = _stream(seed, _STREAM_BROWNIAN).standard_normal(steps).tolist()

    ia = model.jumps.ia
    ia_inc = None
    if ia is not None and ia.scale != 0.0:
        ia_inc = sample_ia_increments(ia, dt, steps, rng=_stream(seed, _STREAM_IA)).tolist()

    fa = model.jumps.fa
    cand_times: list[float] = []
    accept_u: list[float] = []
    cand_sizes: list[float] = []
    if fa is not None and fa.intensity_bound > 0:
        t_arr, u_arr, s_arr = _fa_candidates(fa, T, seed)
        cand_times = t_arr.tolist()
        accept_u = u_arr.tolist()
        cand_sizes = s_arr.tolist()
    ncand = len(cand_times)

    mu = model.drift
    sig = model.diffusion
    intensity = fa.intensity if fa is not None else None
    bound = fa.intensity_bound if fa is not None else 0.0

    values = np.empty(n + 1)
    x = float(model.x0)
    values[0] = x
    jump_times: list[float] = []
    isfinite = math.isfinite

    ci = 0
    j = 0
    for i in range(n):
        for _ in range(refine):
            xl = x
            x = xl + mu(xl) * dt + sig(xl) * sdt * z[j]
            if ia_inc is not None:
                x += ia_inc[j]
            if ci < ncand:
                step_end = (j + 1) * dt
                while ci < ncand and cand_times[ci] <= step_end:
                    lam = intensity(xl)
                    if lam > bound * (1.0 + 1e-12):
                        raise SimulationError(
                            f"intensity {lam} exceeds bound {bound} at t={cand_times[ci]}: "
                            "thinning invalid"
                        )
                    if accept_u[ci] * bound < lam:
                        x += cand_sizes[ci]
                        jump_times.append(cand_times[ci])
                    ci += 1
            if not isfinite(x):
                raise SimulationError(f"non-finite state at fine step {j}")
            j += 1
        values[i + 1] = x

    fa_times = np.asarray(jump_times)
    delta = T / n
    mask = None
    if fa is not None:
        mask = np.zeros(n, dtype=bool)
        if fa_times.size:
            grid = delta * np.arange(1, n + 1)
            idx = np.searchsorted(grid, fa_times, side="left")
            mask[np.clip(idx, 0, n - 1)] = True
    return SamplePath(
        n=n, T=T, delta=delta, values=values,
        jump_mask=mask,
        fa_jump_times=fa_times if fa is not None else None,
        seed=int(seed),
    )
