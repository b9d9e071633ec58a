import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats

from cmmlab.asymptotics import (
    EULER_GAMMA,
    DomainError,
    GumbelParams,
    IncrementSupport,
    LinearizedModel,
    build_linearized_model,
    centroid_curvature,
    e0_squared_geometric,
    e0_squared_leading,
    expected_e2_orthogonal,
    expected_e2_orthogonal_leading,
    expected_e2_uniform_leading,
    expected_tan2_half_increment,
    gumbel_params,
    increment_density,
    linearized_expected_e2,
    sample_gaussian_maxima,
    second_order_expected_e2,
    tangential_area,
)
from cmmlab.estimators import exact_error, exact_errors_fixed_angles
from cmmlab.geometry import Vec2
from cmmlab.scenario import ORTHOGONAL_ANGLES, Scenario, sorted_increments

ORTH = np.array(ORTHOGONAL_ANGLES)


def bounded_angles(rng, n, min_gap=0.0):
    while True:
        a = rng.uniform(0, 2 * math.pi, n)
        inc = sorted_increments(a)
        if np.all(inc < math.pi) and inc.min() > min_gap:
            return a


def test_euler_gamma():
    assert EULER_GAMMA == pytest.approx(0.5772156649, abs=1e-10)


def test_gumbel_params_values():
    p = gumbel_params(1000, 0.3)
    assert p.mu == pytest.approx(1.11508, abs=1e-5)
    assert p.beta == pytest.approx(0.080712, abs=1e-6)
    q = gumbel_params(math.exp(2.0), 0.7)
    assert q.mu == pytest.approx(1.4, rel=1e-12)
    assert q.beta == pytest.approx(0.35, rel=1e-12)
    with pytest.raises(DomainError):
        gumbel_params(1, 0.3)
    with pytest.raises(DomainError):
        gumbel_params(10, 0.0)


def test_gumbel_mean_matches_brute_force_loosely(rng):
    # slow convergence: mu + gamma*beta overshoots E[max] at n = 1e4 by roughly 15%
    emp = sample_gaussian_maxima(10_000, 2000, rng, method="brute").mean()
    pred = gumbel_params(10_000, 1.0).mean
    assert 0.05 < (pred - emp) / pred < 0.25


def test_inverse_sampler_matches_brute_force(rng):
    for n in (100, 10_000):
        a = sample_gaussian_maxima(n, 3000, rng, method="inverse")
        b = sample_gaussian_maxima(n, 3000, rng, method="brute")
        assert stats.ks_2samp(a, b).pvalue > 0.001
    with pytest.raises(ValueError):
        sample_gaussian_maxima(10, 10, rng, method="bogus")


def test_eq16_symmetric_collapse():
    p = GumbelParams(1.3, 0.2)
    assert expected_e2_orthogonal([p] * 4) == pytest.approx(math.pi**2 / 6 * 0.04, rel=1e-12)


def test_eq16_deterministic_extremes():
    ps = [GumbelParams(1.0, 0.0), GumbelParams(0.5, 0.0), GumbelParams(0.2, 0.0), GumbelParams(0.9, 0.0)]
    assert expected_e2_orthogonal(ps) == pytest.approx(0.25 * 0.8**2 + 0.25 * 0.4**2, rel=1e-12)
    with pytest.raises(DomainError):
        expected_e2_orthogonal(ps[:3])


def test_eq16_and_eq17_value_at_250():
    beta = 0.3 / math.sqrt(2 * math.log(250))
    expected = math.pi**2 / 6 * beta**2
    assert expected == pytest.approx(0.013406, abs=5e-7)
    assert expected_e2_orthogonal([gumbel_params(250, 0.3)] * 4) == pytest.approx(expected, rel=1e-12)
    assert expected_e2_orthogonal_leading([250] * 4, 0.3) == pytest.approx(expected, rel=1e-12)


@given(st.floats(2.0, 1e6), st.floats(0.01, 5.0))
def test_eq17_equals_eq16_when_symmetric(n, sigma):
    full = expected_e2_orthogonal([gumbel_params(n, sigma)] * 4)
    assert abs(full - expected_e2_orthogonal_leading([n] * 4, sigma)) <= 1e-12 * max(1.0, full)


def test_eq17_log_forcing_and_scaling():
    # ln N_j = 1 in every direction
    assert expected_e2_orthogonal_leading([math.e] * 4, 0.3) == pytest.approx(math.pi**2 * 0.09 / 12, rel=1e-12)
    a = expected_e2_orthogonal_leading([10, 20, 30, 40], 0.3)
    assert expected_e2_orthogonal_leading([10, 20, 30, 40], 0.6) == pytest.approx(4 * a, rel=1e-12)
    with pytest.raises(DomainError):
        expected_e2_orthogonal_leading([1, 5, 5, 5], 0.3)


def test_uniform_leading_values():
    assert expected_e2_uniform_leading(30, 2.0, 0.3) == pytest.approx(0.0341296, abs=1e-7)
    assert expected_e2_uniform_leading(30, 2.0, [0.3] * 30) == pytest.approx(0.0341296, abs=1e-7)
    assert expected_e2_uniform_leading(30, 2.0, 0.0) == pytest.approx(2 * 4 / (9 * 30), rel=1e-12)
    base = expected_e2_uniform_leading(17, 2.0, [0.1, 0.4] * 8 + [0.2])
    scaled = expected_e2_uniform_leading(17, 6.0, [0.3, 1.2] * 8 + [0.6])
    assert scaled == pytest.approx(9 * base, rel=1e-12)


def test_linearized_orthogonal_single_vehicles():
    m = build_linearized_model(ORTH, 2.0, 0.1)
    assert m.S0 == pytest.approx(16.0)
    assert tuple(m.e0) == pytest.approx((0.0, 0.0), abs=1e-12)
    # e_x = (X3 - X1)/2, so the theta=0 column is S0 * (-1/2, 0)
    assert m.C[:, 0] == pytest.approx([-8.0, 0.0], abs=1e-6)
    assert m.C[:, 2] == pytest.approx([8.0, 0.0], abs=1e-6)


def test_linearized_equilateral_area():
    m = build_linearized_model([0.0, 2 * math.pi / 3, 4 * math.pi / 3], 2.0, 0.0)
    assert m.S0 == pytest.approx(12 * math.sqrt(3), rel=1e-12)
    assert m.e0.norm2() < 1e-24
    assert linearized_expected_e2(m) == pytest.approx(m.e0.norm2(), abs=1e-24)


def test_linearized_model_rejects_unbounded():
    with pytest.raises(DomainError):
        build_linearized_model([0.0, 0.3, 0.6], 2.0, 0.1)
    with pytest.raises(DomainError):
        LinearizedModel(Vec2(0, 0), 1.0, np.zeros((2, 3)), np.zeros(2))


def test_linearized_sigma_scaling(rng):
    a = bounded_angles(rng, 10)
    m1 = build_linearized_model(a, 2.0, 0.1)
    m3 = build_linearized_model(a, 2.0, 0.3)
    t1 = linearized_expected_e2(m1) - m1.e0.norm2()
    t3 = linearized_expected_e2(m3) - m3.e0.norm2()
    assert t3 == pytest.approx(9 * t1, rel=1e-9)


def test_linearized_symmetric_against_small_noise_mc(rng):
    sigma = 0.01
    m = build_linearized_model(ORTH, 2.0, sigma)
    pred = linearized_expected_e2(m)
    e2 = [exact_error(Scenario(ORTH, rng.normal(0, sigma, 4), 2.0)).square_error for _ in range(20_000)]
    assert np.mean(e2) == pytest.approx(pred, rel=0.02)


def test_linear_prediction_remainder_is_quadratic(rng):
    a = bounded_angles(rng, 10)
    m = build_linearized_model(a, 2.0, 1.0)
    direction = rng.normal(size=10)
    resid = []
    for eps in (1e-3, 5e-4, 2.5e-4):
        x = eps * direction
        e = np.asarray(exact_error(Scenario(a, x, 2.0)).error)
        resid.append(np.linalg.norm(e - m.predict_error(x)))
    k = resid[0] / 1e-6
    assert resid[1] <= 1.2 * k * (5e-4) ** 2
    assert resid[2] <= 1.2 * k * (2.5e-4) ** 2
    assert resid[0] / resid[2] == pytest.approx(16, rel=0.2)


def test_gaussian_quadratic_form_identity(rng):
    a = bounded_angles(rng, 10)
    sig = rng.uniform(0.05, 0.3, 10)
    m = build_linearized_model(a, 2.0, sig)
    x = rng.standard_normal((100_000, 10)) * sig
    e = m.predict_error(x)
    sq = (e**2).sum(axis=1)
    assert abs(sq.mean() - linearized_expected_e2(m)) <= 3 * sq.std(ddof=1) / math.sqrt(len(sq))


def test_curvature_term_closes_the_linearization_gap(rng):
    # the mean second-order centroid shift pairs with e0 at O(sigma^2);
    # gaps well above sigma keep every edge alive so the expansion is valid
    a = bounded_angles(rng, 10, min_gap=0.1)
    sigma = 0.01
    m = build_linearized_model(a, 2.0, sigma)
    curv = centroid_curvature(a, 2.0)
    x = rng.standard_normal((100_000, 10)) * sigma
    e, _, ok = exact_errors_fixed_angles(a, x, 2.0)
    sq = (e[ok] ** 2).sum(axis=1)
    se = sq.std(ddof=1) / math.sqrt(len(sq))
    assert abs(sq.mean() - second_order_expected_e2(m, curv)) <= 4 * se


@pytest.mark.parametrize("k", [3, 4, 5, 8, 12])
def test_e0_zero_for_equally_spaced(k):
    a = np.arange(k) * 2 * math.pi / k + 0.37
    assert e0_squared_geometric(a, 2.0) < 1e-18


def test_e0_zero_for_orthogonal():
    assert e0_squared_geometric(ORTH, 2.0) < 1e-18


@given(st.integers(2, 6), st.lists(st.floats(0, 2 * math.pi / 6), min_size=2, max_size=4, unique=True))
def test_e0_zero_under_rotational_symmetry(k, base):
    a = np.concatenate([np.asarray(base) + j * 2 * math.pi / k for j in range(k)])
    if np.any(sorted_increments(a) >= math.pi) or np.any(sorted_increments(a) < 1e-6):
        return
    assert e0_squared_geometric(a, 2.0) < 1e-18 * max(1.0, 1 / min(sorted_increments(a)) ** 2)


def test_e0_geometric_matches_clipping(rng):
    for _ in range(50):
        a = bounded_angles(rng, 20)
        ref = exact_error(Scenario(a, np.zeros(20), 2.0)).square_error
        assert e0_squared_geometric(a, 2.0) == pytest.approx(ref, rel=0.05)
        assert tangential_area(a, 2.0) == pytest.approx(exact_error(Scenario(a, np.zeros(20), 2.0)).region_area, rel=1e-9)


def test_e0_leading_is_large_n_accurate(rng):
    rel = []
    for _ in range(30):
        a = bounded_angles(rng, 400)
        rel.append(e0_squared_leading(a, 2.0) / e0_squared_geometric(a, 2.0) - 1)
    assert np.median(np.abs(rel)) < 0.05


def test_e0_unbounded_rejected():
    with pytest.raises(DomainError):
        e0_squared_geometric([0.0, 0.5, 1.0], 2.0)


def test_increment_density_values():
    assert increment_density(0.0, 10) == pytest.approx(10 / math.pi, rel=1e-12)
    assert increment_density(0.0, 10) == pytest.approx(3.1831, abs=1e-4)
    assert increment_density(0.0, 10, IncrementSupport.FULL_TWO_PI) == pytest.approx(10 / (2 * math.pi))
    with pytest.raises(DomainError):
        increment_density(3.5, 10, IncrementSupport.PAPER_PI)
    with pytest.raises(DomainError):
        increment_density(-0.1, 10, IncrementSupport.FULL_TWO_PI)
    with pytest.raises(DomainError):
        increment_density(2 * math.pi, 10, IncrementSupport.FULL_TWO_PI)


@pytest.mark.parametrize("support", list(IncrementSupport))
@pytest.mark.parametrize("n", [3, 10, 50])
def test_increment_density_normalised(support, n):
    val, _ = integrate.quad(lambda t: increment_density(t, n, support), 0, support.span * (1 - 1e-15), epsabs=1e-13)
    assert val == pytest.approx(1.0, abs=1e-10)


def test_expected_tan2_leading():
    assert expected_tan2_half_increment(100) == pytest.approx(4.9348e-4, abs=1e-8)
    vals = [expected_tan2_half_increment(n) for n in range(3, 200)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    with pytest.raises(DomainError):
        expected_tan2_half_increment(2)


def test_expected_tan2_against_quadrature():
    n = 200
    f = lambda t: math.tan(t / 2) ** 2 * increment_density(t, n, IncrementSupport.PAPER_PI)
    val, _ = integrate.quad(f, 0, math.pi, points=[0.05, 0.5], limit=200)
    assert val == pytest.approx(expected_tan2_half_increment(n), rel=0.05)
