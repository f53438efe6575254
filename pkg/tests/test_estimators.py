import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from threshvol.errors import ConfigError, EstimationError
from threshvol.estimators import (
    ThresholdSpec,
    classify_increments,
    design_moment,
    design_moments,
    local_linear_sigma2,
    local_poly_fit,
    local_time_hat,
    nw_sigma2,
    response_moment,
    threshold_value,
)
from threshvol.kernels import builtin_kernel
from threshvol.models import build_model
from threshvol.simulate import SamplePath, simulate_path

EPA = builtin_kernel("one_sided_epanechnikov")
UNI = builtin_kernel("one_sided_uniform")


def make_path(values, delta=0.01):
    values = np.asarray(values, dtype=float)
    n = len(values) - 1
    return SamplePath(n=n, T=n * delta, delta=delta, values=values)


def random_instance(rng, n):
    """Random-walk path plus an evaluation point/bandwidth covering real data."""
    delta = float(rng.uniform(0.005, 0.02))
    start = float(rng.normal())
    vals = start + np.concatenate(
        [[0.0], np.cumsum(rng.normal(0.0, math.sqrt(delta), n))]
    )
    path = make_path(vals, delta)
    left = vals[:-1]
    x = float(rng.uniform(np.quantile(left, 0.1), np.quantile(left, 0.5)))
    h = float((left.max() - x) * rng.uniform(0.8, 1.2) + 0.05)
    d2 = np.diff(vals) ** 2
    threshold = float(np.quantile(d2, rng.uniform(0.6, 0.95)) + 1e-12)
    return path, x, h, threshold


def brute_force_wls(path, x, h, kernel, threshold, p):
    """Independent oracle: explicit weighted normal equations."""
    left = path.values[:-1]
    d = left - x
    w = np.asarray(kernel(d / h), dtype=float)
    inc = np.diff(path.values)
    y = inc**2 / path.delta * (inc**2 <= threshold)
    A = np.empty((p + 1, p + 1))
    b = np.empty(p + 1)
    for j in range(p + 1):
        for k in range(p + 1):
            A[j, k] = np.sum(w * d ** (j + k))
        b[j] = np.sum(w * d**j * y)
    return np.linalg.solve(A, b)


# --- thresholds ---------------------------------------------------------------

def test_threshold_values():
    assert threshold_value(ThresholdSpec(0.5), 0.04) == pytest.approx(0.2, rel=1e-12)
    assert threshold_value(ThresholdSpec(0.9), 0.01) == pytest.approx(
        math.exp(0.9 * math.log(0.01)), rel=1e-12
    )
    assert threshold_value(ThresholdSpec(0.99), 0.5) == pytest.approx(
        math.exp(0.99 * math.log(0.5)), rel=1e-12
    )


def test_threshold_spec_validation():
    for bad in (0.0, 1.0, -0.3, 1.7):
        with pytest.raises(ConfigError):
            ThresholdSpec(bad)
    with pytest.raises(ConfigError):
        threshold_value(ThresholdSpec(0.5), 1.0)
    with pytest.raises(ConfigError):
        threshold_value(ThresholdSpec(0.5), 0.0)


def test_classify_increments():
    p = make_path([0.0, 0.0, 0.0, 0.0])
    assert np.all(classify_increments(p, 1e-12))
    p = make_path(np.cumsum([0.0, 0.1, 0.2, 0.05]))
    got = classify_increments(p, 0.0158)
    assert got.tolist() == [True, False, True]
    d2max = float(np.max(np.diff(p.values) ** 2))
    assert np.all(classify_increments(p, d2max))  # boundary is inclusive


# --- moments -------------------------------------------------------------------

def test_design_moment_no_support():
    p = make_path([5.0, 5.1, 5.2])
    assert design_moment(p, 0.0, 0.5, EPA, 0) == 0.0


def test_design_moment_single_point_at_x():
    p = make_path([1.0, 1.3])
    h = 0.25
    assert design_moment(p, 1.0, h, EPA, 0) == pytest.approx(1.5 / h, rel=1e-14)


def test_design_moment_uniform_count():
    h = 0.4
    x = 2.0
    left = x + h * np.arange(0.1, 1.0, 0.1)
    p = make_path(np.append(left, left[-1]))
    assert design_moment(p, x, h, UNI, 0) == pytest.approx(9.0 / h, rel=1e-13)


def test_response_moment_fully_censored():
    p = make_path(np.cumsum([0.0, 1.0, -1.0, 1.0]))
    assert response_moment(p, 0.0, 5.0, UNI, 1e-6, 0) == 0.0


def test_response_moment_constant_increment_factorizes():
    delta = 0.01
    d = 0.015625  # exactly representable, so every increment is exactly d
    vals = 1.0 + d * np.arange(7)
    p = make_path(vals, delta)
    th = d * d  # inclusive boundary keeps everything
    for k in (0, 1, 2):
        got = response_moment(p, 1.0, 0.2, EPA, th, k)
        want = (d * d / delta) * design_moment(p, 1.0, 0.2, EPA, k)
        assert got == pytest.approx(want, rel=1e-12)


def test_response_moment_brute_force_3_points():
    vals = np.array([0.05, 0.02, 0.11, 0.07])
    p = make_path(vals, 0.01)
    x, h, th, k = 0.0, 0.2, 0.004, 1
    left = vals[:-1]
    inc = np.diff(vals)
    w = EPA((left - x) / h)
    y = inc**2 / 0.01 * (inc**2 <= th)
    want = float(np.sum(w * (left - x) ** k * y) / h)
    assert response_moment(p, x, h, EPA, th, k) == pytest.approx(want, rel=1e-14)


def test_design_moments_container():
    p, x, h, th = random_instance(np.random.default_rng(0), 60)
    dm = design_moments(p, x, h, EPA, th, 2)
    assert len(dm.s) == 5 and len(dm.q) == 3
    assert dm.s[0] == pytest.approx(design_moment(p, x, h, EPA, 0), rel=1e-14)
    assert dm.q[2] == pytest.approx(response_moment(p, x, h, EPA, th, 2), rel=1e-14)


# --- local polynomial fits ------------------------------------------------------

def test_constant_response_reproduction():
    c = 0.7
    delta = 0.01
    step = math.sqrt(c * delta)
    rng = np.random.default_rng(3)
    vals = [1.0]
    for _ in range(50):
        sgn = 1.0 if (rng.random() < 0.5 or vals[-1] < 0.7) else -1.0
        vals.append(vals[-1] + sgn * step)
    p = make_path(vals, delta)
    x = min(vals) - 0.01
    h = max(vals) - x + 0.05
    beta = local_poly_fit(p, x, h, EPA, math.inf, 2)
    assert beta[0] == pytest.approx(c, rel=1e-10)
    assert abs(beta[1]) < 1e-8 and abs(beta[2]) < 1e-8
    est = local_linear_sigma2(p, x, h, EPA, math.inf)
    assert est.sigma2_hat == pytest.approx(c, rel=1e-10)
    assert nw_sigma2(p, x, h, EPA) == pytest.approx(c, rel=1e-10)


def poly_response_path(rng, coeffs, n, delta, x):
    """Walk whose squared increments / delta are exactly a polynomial in (X - x)."""
    vals = np.empty(n + 1)
    vals[0] = x + 0.05
    lo, hi = x + 0.02, x + 0.9
    for i in range(n):
        y = float(np.polyval(coeffs[::-1], vals[i] - x))
        assert y > 0, "response polynomial must stay positive on the band"
        step = math.sqrt(y * delta)
        up = rng.random() < 0.5
        nxt = vals[i] + (step if up else -step)
        if nxt < lo or nxt > hi:
            nxt = vals[i] + (step if nxt < lo else -step)
        vals[i + 1] = nxt
    return make_path(vals, delta)


@pytest.mark.parametrize("p_order", [0, 1, 2, 3])
def test_polynomial_reproduction(p_order):
    rng = np.random.default_rng(100 + p_order)
    coeffs = np.array([1.0, 0.4, -0.3, 0.15][: p_order + 1])
    x = 0.5
    path = poly_response_path(rng, coeffs, 400, 1e-4, x)
    h = float(path.values.max() - x) * 1.05
    beta = local_poly_fit(path, x, h, EPA, math.inf, p_order)
    assert np.max(np.abs(beta - coeffs)) < 1e-8


def test_local_poly_matches_brute_force_p2():
    rng = np.random.default_rng(7)
    path, x, h, th = random_instance(rng, 20)
    beta = local_poly_fit(path, x, h, EPA, th, 2)
    want = brute_force_wls(path, x, h, EPA, th, 2)
    assert np.max(np.abs(beta - want) / np.maximum(np.abs(want), 1e-12)) < 1e-10


def test_local_linear_equals_order1_fit():
    rng = np.random.default_rng(11)
    for _ in range(100):
        path, x, h, th = random_instance(rng, int(rng.integers(50, 200)))
        est = local_linear_sigma2(path, x, h, EPA, th)
        beta = local_poly_fit(path, x, h, EPA, th, 1)
        assert est.sigma2_hat == pytest.approx(beta[0], rel=1e-10)
        assert est.beta[1] == pytest.approx(beta[1], rel=1e-8, abs=1e-10)


def test_insufficient_data_errors():
    p = make_path([5.0, 5.05, 5.1])
    with pytest.raises(EstimationError, match="insufficient local data"):
        local_poly_fit(p, 0.0, 0.5, EPA, 1.0, 1)
    with pytest.raises(EstimationError, match="insufficient local data"):
        local_linear_sigma2(p, 0.0, 0.5, EPA, 1.0)
    with pytest.raises(EstimationError, match="insufficient local data"):
        nw_sigma2(p, 0.0, 0.5, EPA)
    # all effective points identical: degenerate design for order >= 1
    p = make_path([1.0, 1.0, 1.0, 1.0], delta=0.01)
    with pytest.raises(EstimationError, match="insufficient local data"):
        local_poly_fit(p, 1.0, 0.5, EPA, 1.0, 1)
    with pytest.raises(EstimationError, match="insufficient local data"):
        local_linear_sigma2(p, 1.0, 0.5, EPA, 1.0)


def test_result_bookkeeping_fields():
    rng = np.random.default_rng(13)
    path, x, h, th = random_instance(rng, 120)
    est = local_linear_sigma2(path, x, h, EPA, th)
    assert est.beta[0] == est.sigma2_hat
    assert est.local_time_hat >= 0
    assert 0.0 <= est.flagged_fraction <= 1.0
    assert est.local_time_hat == pytest.approx(local_time_hat(path, x, h, EPA), rel=1e-14)
    keep = classify_increments(path, th)
    assert est.flagged_fraction == pytest.approx(1.0 - np.mean(keep), abs=1e-15)


# --- ratio estimators ------------------------------------------------------------

def test_nw_without_threshold_equals_uncensored():
    rng = np.random.default_rng(17)
    path, x, h, _ = random_instance(rng, 150)
    d2max = float(np.max(np.diff(path.values) ** 2))
    assert nw_sigma2(path, x, h, EPA, None) == nw_sigma2(path, x, h, EPA, d2max)
    assert nw_sigma2(path, x, h, EPA, None) == nw_sigma2(path, x, h, EPA, 2 * d2max)


def test_nw_brute_force_3_points():
    vals = np.array([0.03, 0.01, 0.09, 0.06])
    p = make_path(vals, 0.02)
    x, h, th = 0.0, 0.15, 0.002
    left = vals[:-1]
    inc = np.diff(vals)
    w = EPA((left - x) / h)
    y = inc**2 / 0.02 * (inc**2 <= th)
    want = float(np.sum(w * y) / np.sum(w))
    assert nw_sigma2(p, x, h, EPA, th) == pytest.approx(want, rel=1e-14)


def test_censoring_monotone_in_threshold():
    rng = np.random.default_rng(19)
    path, x, h, _ = random_instance(rng, 200)
    d2 = np.diff(path.values) ** 2
    t1, t2 = float(np.quantile(d2, 0.3)), float(np.quantile(d2, 0.8))
    k1 = classify_increments(path, t1)
    k2 = classify_increments(path, t2)
    assert np.all(k1 <= k2)
    for k in (0, 1):
        assert response_moment(path, x, h, EPA, t1, k) <= response_moment(
            path, x, h, EPA, t2, k
        ) + 1e-15


# --- local time -------------------------------------------------------------------

def test_local_time_no_support():
    p = make_path([5.0, 5.1, 5.2])
    assert local_time_hat(p, 0.0, 0.5, EPA) == 0.0


def test_local_time_single_point():
    p = make_path([2.0, 2.4], delta=0.05)
    h = 0.3
    assert local_time_hat(p, 2.0, h, EPA) == pytest.approx(1.5 * 0.05 / h, rel=1e-14)


def test_brownian_sigma2_consistency():
    model = build_model(drift="zero", diffusion="constant", s=1.0)
    path = simulate_path(model, 100_000, 1.0, seed=71, refine=1)
    est = local_linear_sigma2(path, 0.0, 0.1, EPA, math.inf)
    assert 0.9 <= est.sigma2_hat <= 1.1


# --- structural identities ---------------------------------------------------------

def test_projection_identity():
    # the local linear weight brace is orthogonal to (X - x) by construction
    rng = np.random.default_rng(23)
    for _ in range(20):
        path, x, h, _ = random_instance(rng, 150)
        left = path.values[:-1]
        d = left - x
        w = EPA(d / h)
        s1 = float(np.sum(w * d) / h)
        s2 = float(np.sum(w * d * d) / h)
        brace = path.delta * s2 / h**2 - (d / h) * path.delta * s1 / h
        terms = w * brace * d
        scale = np.sum(np.abs(terms)) + 1e-300
        assert abs(np.sum(terms)) / scale < 1e-8


def test_weighted_residual_orthogonality():
    rng = np.random.default_rng(29)
    for p_order in (0, 1, 2):
        path, x, h, th = random_instance(rng, 150)
        beta = local_poly_fit(path, x, h, EPA, th, p_order)
        left = path.values[:-1]
        d = left - x
        w = EPA(d / h)
        inc = np.diff(path.values)
        y = inc**2 / path.delta * (inc**2 <= th)
        fit = np.polyval(beta[::-1], d)
        for k in range(p_order + 1):
            terms = w * (y - fit) * d**k
            scale = np.sum(np.abs(w * y * np.abs(d) ** k)) + 1e-300
            assert abs(np.sum(terms)) / scale < 1e-8


@settings(max_examples=25, deadline=None)
@given(shift=st.floats(min_value=-50.0, max_value=50.0, allow_nan=False))
def test_location_equivariance(shift):
    rng = np.random.default_rng(31)
    path, x, h, th = random_instance(rng, 100)
    shifted = SamplePath(
        n=path.n, T=path.T, delta=path.delta, values=path.values + shift
    )
    base = local_linear_sigma2(path, x, h, EPA, th)
    moved = local_linear_sigma2(shifted, x + shift, h, EPA, th)
    assert moved.sigma2_hat == pytest.approx(base.sigma2_hat, rel=1e-7)
    assert moved.local_time_hat == pytest.approx(base.local_time_hat, rel=1e-7)
    assert nw_sigma2(shifted, x + shift, h, EPA, th) == pytest.approx(
        nw_sigma2(path, x, h, EPA, th), rel=1e-7
    )
