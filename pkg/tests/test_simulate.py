import math

import numpy as np
import pytest
from scipy import stats

from threshvol.errors import ConfigError, SimulationError
from threshvol.models import build_model
from threshvol.simulate import (
    FiniteActivityJumps,
    InfiniteActivityJumps,
    JumpSpec,
    ModelSpec,
    VGParams,
    constant_intensity,
    derive_seed,
    sample_fa_jumps,
    sample_ia_increments,
    simulate_path,
)


def test_degenerate_dynamics_constant_path():
    m = ModelSpec(drift=lambda x: 0.0, diffusion=lambda x: 0.0, x0=1.0)
    p = simulate_path(m, 16, 1.0, seed=0)
    assert np.all(p.values == 1.0)


def test_brownian_increment_variance():
    m = build_model(drift="zero", diffusion="constant", s=1.0)
    p = simulate_path(m, 10_000, 1.0, seed=5)
    v = np.var(np.diff(p.values)) / p.delta
    assert 0.9 <= v <= 1.1


def test_fa_jump_count_mean():
    m = build_model(drift="zero", diffusion="constant", s=1.0, fa_intensity=5.0)
    counts = [
        len(simulate_path(m, 200, 1.0, seed=derive_seed(11, r), refine=2).fa_jump_times)
        for r in range(1000)
    ]
    assert abs(np.mean(counts) - 5.0) <= 0.25


def test_determinism_bitwise():
    m = build_model(
        drift="linear_mean_revert", kappa=1.0, theta=0.2, diffusion="sine_bump",
        a=2.0, b=0.5, fa_intensity=3.0, ia_kind="symmetric_alpha_stable",
        ia_alpha=0.7, ia_scale=0.2,
    )
    p1 = simulate_path(m, 500, 1.0, seed=99)
    p2 = simulate_path(m, 500, 1.0, seed=99)
    assert np.array_equal(p1.values, p2.values)
    assert np.array_equal(p1.fa_jump_times, p2.fa_jump_times)
    assert np.array_equal(p1.jump_mask, p2.jump_mask)
    p3 = simulate_path(m, 500, 1.0, seed=100)
    assert not np.array_equal(p1.values, p3.values)


def test_standardized_increment_kurtosis():
    mu, sig = 0.3, 2.0
    m = ModelSpec(drift=lambda x: mu, diffusion=lambda x: sig)
    p = simulate_path(m, 100_000, 1.0, seed=13, refine=1)
    z = (np.diff(p.values) - mu * p.delta) / (sig * math.sqrt(p.delta))
    k = stats.kurtosis(z, fisher=False)
    assert 2.8 <= k <= 3.2


def test_jump_mask_matches_times():
    m = build_model(drift="zero", diffusion="constant", s=0.5, fa_intensity=20.0)
    p = simulate_path(m, 100, 1.0, seed=17)
    assert p.jump_mask.shape == (100,)
    expected = np.zeros(100, dtype=bool)
    for t in p.fa_jump_times:
        i = int(np.searchsorted(p.delta * np.arange(1, 101), t, side="left"))
        expected[min(i, 99)] = True
    assert np.array_equal(p.jump_mask, expected)


def test_path_shape_invariants():
    m = build_model(drift="zero", diffusion="constant", s=1.0)
    p = simulate_path(m, 250, 2.0, seed=1)
    assert len(p.values) == p.n + 1
    assert p.delta * p.n == pytest.approx(p.T, rel=1e-12)


def test_nonfinite_state_names_step():
    m = ModelSpec(drift=lambda x: float("nan"), diffusion=lambda x: 1.0)
    with pytest.raises(SimulationError, match="fine step 0"):
        simulate_path(m, 10, 1.0, seed=0)


def test_invalid_alpha_rejected():
    ia = InfiniteActivityJumps(kind="symmetric_alpha_stable", alpha=1.2, scale=1.0)
    m = ModelSpec(drift=lambda x: 0.0, diffusion=lambda x: 1.0, jumps=JumpSpec(ia=ia))
    with pytest.raises(ConfigError, match="alpha"):
        simulate_path(m, 10, 1.0, seed=0)
    with pytest.raises(ConfigError, match="alpha"):
        sample_ia_increments(ia, 0.01, 10, seed=0)


# --- thinning -----------------------------------------------------------------

def test_fa_zero_intensity_empty():
    out = sample_fa_jumps(constant_intensity(0.0), 1.0, lambda t: 0.0, 1.0, seed=2)
    assert out == []


def test_fa_counts_follow_poisson_law():
    lam = 2.0
    counts = np.array([
        len(sample_fa_jumps(constant_intensity(lam), lam, lambda t: 0.0, 1.0,
                            seed=derive_seed(23, r)))
        for r in range(2000)
    ])
    kmax = 8
    observed = np.bincount(np.minimum(counts, kmax), minlength=kmax + 1)
    pk = np.array([stats.poisson.pmf(k, lam) for k in range(kmax)])
    pk = np.append(pk, 1.0 - pk.sum())
    res = stats.chisquare(observed, 2000 * pk)
    assert res.pvalue > 0.01


def test_fa_thinning_acceptance_tracks_occupation():
    # intensity 1 + 1(x > 0) bounded by 2: the accepted count over one fixed
    # trajectory has mean integral of lambda(X_t) dt = 1 + time spent above 0
    m = build_model(drift="zero", diffusion="constant", s=1.0)
    base = simulate_path(m, 2000, 1.0, seed=31)
    grid = np.linspace(0.0, 1.0, 2001)

    def state(t):
        return float(np.interp(t, grid, base.values))

    def intensity(x):
        return 1.0 + (1.0 if x > 0 else 0.0)

    frac_pos = float(np.mean(base.values[:-1] > 0))
    expected_mean = 1.0 + frac_pos
    accepted = sum(
        len(sample_fa_jumps(intensity, 2.0, state, 1.0, seed=derive_seed(37, r)))
        for r in range(2000)
    )
    assert accepted / 2000 == pytest.approx(expected_mean, rel=0.10)


def test_fa_thinning_bound_violation():
    with pytest.raises(SimulationError, match="thinning invalid"):
        sample_fa_jumps(constant_intensity(5.0), 1.0, lambda t: 0.0, 1.0, seed=41)


# --- infinite activity increments ----------------------------------------------

def test_ia_zero_scale():
    ia = InfiniteActivityJumps(kind="symmetric_alpha_stable", alpha=0.5, scale=0.0)
    assert np.all(sample_ia_increments(ia, 0.01, 100, seed=0) == 0.0)


def test_stable_self_similar_scaling():
    # median |increment| over step delta should match unit-step draws
    # rescaled by delta**(1/alpha)
    alpha = 0.5
    ia = InfiniteActivityJumps(kind="symmetric_alpha_stable", alpha=alpha, scale=1.0)
    small = sample_ia_increments(ia, 0.01, 10_000, seed=43)
    unit = sample_ia_increments(ia, 1.0, 10_000, seed=47)
    ratio = np.median(np.abs(small)) / (np.median(np.abs(unit)) * 0.01 ** (1 / alpha))
    assert 1 / 3 <= ratio <= 3


def test_vg_symmetric_skewness():
    ia = InfiniteActivityJumps(
        kind="variance_gamma", scale=1.0, vg_params=VGParams(nu=0.1, theta=0.0, sigma=1.0)
    )
    inc = sample_ia_increments(ia, 0.1, 100_000, seed=53)
    assert -0.1 <= stats.skew(inc) <= 0.1


def test_vg_mean_tracks_theta():
    ia = InfiniteActivityJumps(
        kind="variance_gamma", scale=1.0, vg_params=VGParams(nu=0.1, theta=0.4, sigma=0.5)
    )
    inc = sample_ia_increments(ia, 0.1, 200_000, seed=59)
    assert np.mean(inc) == pytest.approx(0.4 * 0.1, abs=0.002)


def test_ia_finite_variation_under_refinement():
    # couple a fine simulation with its pairwise-aggregated coarse version:
    # total variation changes little, so the small-jump sum is converging
    ia = InfiniteActivityJumps(kind="symmetric_alpha_stable", alpha=0.5, scale=0.5)
    fine = sample_ia_increments(ia, 1.0 / 2000, 2000, seed=61)
    coarse = fine.reshape(-1, 2).sum(axis=1)
    tv_fine = np.sum(np.abs(fine))
    tv_coarse = np.sum(np.abs(coarse))
    assert tv_coarse <= tv_fine + 1e-15
    assert (tv_fine - tv_coarse) / tv_fine < 0.2


def test_vg_requires_params():
    ia = InfiniteActivityJumps(kind="variance_gamma", scale=1.0, vg_params=None)
    with pytest.raises(ConfigError, match="vg_params"):
        sample_ia_increments(ia, 0.01, 10, seed=0)


def test_simulate_validates_args():
    m = build_model(drift="zero", diffusion="constant", s=1.0)
    with pytest.raises(ConfigError):
        simulate_path(m, 1, 1.0, seed=0)
    with pytest.raises(ConfigError):
        simulate_path(m, 10, 0.0, seed=0)
    with pytest.raises(ConfigError):
        simulate_path(m, 10, 1.0, seed=0, refine=0)
