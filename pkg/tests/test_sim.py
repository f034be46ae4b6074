import numpy as np
import pytest

from interlab.model import design_stats
from interlab.sim import (
    ModelParams,
    NullViolationError,
    SimConfig,
    monte_carlo_estimators,
    monte_carlo_mean_squares,
    null_rejection_rate,
    reference_design,
    power_curve,
    replicate_statistics,
    simulate_dataset,
)

REF = ModelParams(a0=0.0, b0=1.0, sigma_A=0.5, sigma_B=0.3, sigma_E=0.2)


def cfg(params=REF, reps=1000, seed=7, design=None):
    return SimConfig(design or reference_design(), params, reps, seed)


def test_noise_free_model_is_exact_line():
    c = cfg(ModelParams(a0=2.0, b0=-0.5, sigma_A=0, sigma_B=0, sigma_E=0))
    data = simulate_dataset(c, 3)
    np.testing.assert_array_equal(data.y, np.tile(2.0 - 0.5 * c.design.x, (5, 1)))


def test_replicates_are_bit_identical_and_distinct():
    c = cfg()
    d1, d2 = simulate_dataset(c, 11), simulate_dataset(c, 11)
    assert d1.y.tobytes() == d2.y.tobytes()
    assert not np.array_equal(simulate_dataset(c, 12).y, d1.y)
    assert not np.array_equal(simulate_dataset(cfg(seed=8), 11).y, d1.y)


def test_order_does_not_matter():
    c = cfg(reps=20)
    forward = [simulate_dataset(c, k).y for k in range(20)]
    backward = [simulate_dataset(c, k).y for k in reversed(range(20))][::-1]
    for a, b in zip(forward, backward):
        np.testing.assert_array_equal(a, b)


def test_parallel_matches_serial():
    c = cfg(reps=200)
    s1 = replicate_statistics(c, workers=1)
    s2 = replicate_statistics(c, workers=2)
    for k in s1:
        np.testing.assert_array_equal(s1[k], s2[k])
    assert monte_carlo_mean_squares(c, stats=s1) == monte_carlo_mean_squares(c, stats=s2)


def test_simulated_data_is_balanced_and_centered():
    data = simulate_dataset(cfg(), 0)
    assert data.y.shape == (5, 20)
    assert abs(data.x.sum()) < 1e-12


@pytest.mark.slow
def test_intercept_estimate_unbiased():
    c = cfg(ModelParams(a0=1.0, b0=1.0, sigma_A=0.5, sigma_B=0.3, sigma_E=0.2), reps=10_000, seed=101)
    est = monte_carlo_estimators(c)["a0_hat"]
    assert est.theory == 1.0
    assert est.within(3)


def test_null_model_mean_squares_all_equal_error_variance():
    c = cfg(ModelParams(a0=0.3, b0=0.0, sigma_A=0, sigma_B=0, sigma_E=0.7), reps=3000, seed=5)
    res = monte_carlo_mean_squares(c)
    for f, e in res.items():
        assert e.theory == pytest.approx(0.49)
        assert e.within(3), (f, e)


def test_mean_squares_need_enough_replicates():
    with pytest.raises(ValueError):
        monte_carlo_mean_squares(cfg(reps=50))


def test_null_violation_rejected():
    with pytest.raises(NullViolationError):
        null_rejection_rate(cfg(), "slopes")
    with pytest.raises(NullViolationError):
        null_rejection_rate(cfg(), "regression")
    with pytest.raises(ValueError):
        null_rejection_rate(cfg(), "nonsense")


def test_binomial_standard_error_at_nominal_level():
    c = cfg(ModelParams(0, 1, 0.5, 0.0, 0.2), reps=400)
    res = null_rejection_rate(c, "slopes", 0.05)
    assert res.se == pytest.approx((0.05 * 0.95 / 400) ** 0.5)


@pytest.mark.slow
def test_slope_test_power_is_monotone():
    c = cfg(ModelParams(0, 1, 0.5, 0.0, 0.2), reps=2000, seed=31)
    curve = power_curve(c, [0.0, 0.2, 0.4, 0.8], "slopes", 0.05)
    rates = [r for _, r in curve]
    for lo, hi in zip(rates, rates[1:]):
        assert hi.rate >= lo.rate - max(lo.se, hi.se)
    assert rates[-1].rate > 0.9


def test_invalid_configuration():
    with pytest.raises(ValueError):
        ModelParams(sigma_A=-1)
    with pytest.raises(ValueError):
        SimConfig(reference_design(), REF, 0, 1)
    with pytest.raises(ValueError):
        SimConfig(design_stats([0.1, 0.2, 0.3], 3), REF, 10, 1)
    with pytest.raises(ValueError):
        SimConfig(reference_design(), REF, 10, -1)
