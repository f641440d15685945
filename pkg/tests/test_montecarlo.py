"""
Monte Carlo checks of the sample and moment exponents against their closed forms.
"""

import warnings

import numpy as np
import pytest
from pydantic import ValidationError

from hybridheat.tools import montecarlo as mc
from hybridheat.tools.errors import HeavyTailWarning, NonpositiveP, ZeroInitialData
from hybridheat.tools.hybrid_solution import build_model
from hybridheat.tools.montecarlo import EstimatorConfig

THREE_STATE = [[-2.0, 1.0, 1.0], [3.0, -4.0, 1.0], [1.0, 1.0, -2.0]]
TWO_STATE = [[-4.0, 4.0], [2.0, -2.0]]


def _scalar(alpha, beta=None):
    return build_model([[0.0]], [alpha], beta=None if beta is None else [[beta]])


def test_single_state_sample_exponents():
    config = EstimatorConfig(horizon=200.0, n_paths=200, seed=1)
    for alpha, expected in [(2.0, 0.5), (1.0, -0.5)]:
        report = mc.estimate_sample_exponent(_scalar(alpha, 1.0), config)
        assert report.reference == pytest.approx(expected)
        assert abs(report.z_score) <= 3, f"alpha={alpha}: {report.estimate} +/- {report.standard_error}"
        assert report.standard_error == pytest.approx(1 / np.sqrt(200 * 200), rel=0.2)


def test_noiseless_estimate_is_exact():
    report = mc.estimate_sample_exponent(_scalar(0.1), EstimatorConfig(horizon=50.0, n_paths=10))
    assert report.estimate == pytest.approx(-0.9, abs=1e-12)
    assert report.standard_error <= 1e-12


def test_three_state_heat_estimate():
    model = build_model(THREE_STATE, [0.1, 1.5, 0.2])
    report = mc.estimate_sample_exponent(model, EstimatorConfig(horizon=500.0, n_paths=100, seed=3))
    assert report.reference == pytest.approx(-44 / 75)
    assert abs(report.z_score) <= 3, f"{report.estimate} +/- {report.standard_error}"
    assert abs(report.estimate - (-8 / 15)) > 5 * report.standard_error, "-8/15 is rejected"


def test_scalar_moment_slope():
    model = _scalar(2.0, 1.0)
    report = mc.estimate_moment_exponent(model, 2.0, EstimatorConfig(horizon=10.0, n_paths=20))
    assert report.estimate == pytest.approx(3.0, abs=1e-9), "E||u||^2 = exp(3t) with no chain to sample"
    assert report.standard_error <= 1e-9
    assert report.reference == pytest.approx(3.0)
    assert not report.heavy_tail

    cubic = mc.estimate_moment_exponent(model, None, EstimatorConfig(horizon=10.0, n_paths=20, p=3.0))
    assert cubic.p == 3.0, "the configured order is the default"
    assert cubic.estimate == pytest.approx(6.0, abs=1e-9), "E||u||^3 = exp(6t)"


def test_variance_reduction_matches_full_sampling():
    model = build_model(TWO_STATE, [2.0, 1.0], beta=[[0.2], [0.2]])
    base = EstimatorConfig(horizon=5.0, n_paths=4000, seed=5)
    reduced = mc.estimate_moment_exponent(model, 2.0, base)
    full = mc.estimate_moment_exponent(model, 2.0, base.model_copy(update={"variance_reduced": False}))
    spread = np.hypot(reduced.standard_error, full.standard_error)
    assert abs(reduced.estimate - full.estimate) <= 4 * spread, f"{reduced.estimate} vs {full.estimate}"


def test_two_state_moment_exponent():
    model = build_model(TWO_STATE, [2.0, 1.0], beta=[[1.0], [1.0]])
    config = EstimatorConfig(horizon=20.0, n_paths=10000, seed=7)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", HeavyTailWarning)
        report = mc.estimate_moment_exponent(model, 2.0, config)
    assert report.reference == pytest.approx(-1 + 2 * np.sqrt(2), abs=1e-9)
    assert abs(report.z_score) <= 3, f"{report.estimate} +/- {report.standard_error}"


def test_log_moment_curve_matches_oracle():
    model = build_model(TWO_STATE, [2.0, 1.0], beta=[[1.0], [1.0]])
    config = EstimatorConfig(horizon=5.0, n_paths=4000, n_grid=10, seed=11)
    report = mc.estimate_moment_exponent(model, 2.0, config)
    oracle = mc.oracle_log_moment(model, 2.0, report.times)
    gaps = np.abs(np.array(report.log_moment) - oracle)
    assert np.all(gaps <= 4 * np.array(report.log_moment_se) + 0.02), f"curve gaps {gaps}"


def test_oracle_needs_single_mode():
    model = build_model(TWO_STATE, [2.0, 1.0], beta=[[1.0], [1.0]], initial="x(pi-x)")
    with pytest.raises(ValueError):
        mc.oracle_log_moment(model, 2.0, [1.0])


def test_reproducible_and_schedule_free():
    model = build_model(TWO_STATE, [2.0, 1.0], beta=[[1.0], [1.0]])
    config = EstimatorConfig(horizon=10.0, n_paths=50, seed=42, workers=1)
    a = mc.estimate_sample_exponent(model, config)
    b = mc.estimate_sample_exponent(model, config)
    c = mc.estimate_sample_exponent(model, config.model_copy(update={"workers": 2}))
    assert a.per_path == b.per_path, "same seed, same paths"
    assert a.per_path == c.per_path, "thread count does not change the result"

    other = mc.estimate_sample_exponent(model, config.model_copy(update={"seed": 43}))
    assert other.per_path != a.per_path
    assert abs(other.estimate - a.estimate) <= 4 * np.hypot(a.standard_error, other.standard_error)


def test_first_path_is_path_zero():
    model = build_model(TWO_STATE, [2.0, 1.0], beta=[[1.0], [1.0]])
    config = EstimatorConfig(horizon=10.0, n_paths=5, seed=9)
    report = mc.estimate_sample_exponent(model, config)
    solution = mc.first_path_solution(model, config)
    log_norm = solution.log_norms(config.time_grid())[-1]
    assert log_norm / config.horizon == pytest.approx(report.per_path[0], rel=1e-12)


def test_standard_error_scaling():
    model = _scalar(2.0, 1.0)
    small = mc.estimate_sample_exponent(model, EstimatorConfig(horizon=20.0, n_paths=400, seed=1))
    large = mc.estimate_sample_exponent(model, EstimatorConfig(horizon=20.0, n_paths=4000, seed=1))
    ratio = small.standard_error / large.standard_error
    assert 0.8 * np.sqrt(10) <= ratio <= 1.2 * np.sqrt(10), f"SE ratio {ratio}"


def test_convergence_table():
    rows = mc.convergence_table(_scalar(0.1), [10.0, 50.0, 100.0], EstimatorConfig(n_paths=5))
    assert [row["horizon"] for row in rows] == [10.0, 50.0, 100.0]
    assert max(row["gap"] for row in rows) <= 1e-12, "a noiseless single state is exact at every horizon"


def test_heavy_tail_warning():
    model = build_model(TWO_STATE, [2.0, 1.0], beta=[[1.0], [1.0]])
    config = EstimatorConfig(horizon=20.0, n_paths=200, kurtosis_threshold=1.0)
    with pytest.warns(HeavyTailWarning):
        report = mc.estimate_moment_exponent(model, 2.0, config)
    assert report.heavy_tail and report.kurtosis > 1.0


def test_config_validation():
    with pytest.raises(ValidationError):
        EstimatorConfig(n_paths=0)
    with pytest.raises(ValidationError):
        EstimatorConfig(horizon=10.0, grid=[5.0, 12.0])
    with pytest.raises(ValidationError):
        EstimatorConfig(horizon=10.0, grid=[5.0, 2.0])
    with pytest.raises(ValidationError):
        EstimatorConfig(paths=10)
    assert EstimatorConfig(horizon=10.0, grid=[2.0, 5.0]).time_grid().tolist() == [2.0, 5.0, 10.0]


def test_estimator_errors():
    config = EstimatorConfig(horizon=5.0, n_paths=5)
    with pytest.raises(ZeroInitialData):
        mc.estimate_sample_exponent(build_model(TWO_STATE, [2.0, 1.0], initial=None), config)
    with pytest.raises(NonpositiveP):
        mc.estimate_moment_exponent(_scalar(1.0), 0.0, config)


if __name__ == "__main__":
    test_single_state_sample_exponents()
    test_noiseless_estimate_is_exact()
    test_three_state_heat_estimate()
    test_scalar_moment_slope()
    test_variance_reduction_matches_full_sampling()
    test_two_state_moment_exponent()
    test_log_moment_curve_matches_oracle()
    test_oracle_needs_single_mode()
    test_reproducible_and_schedule_free()
    test_first_path_is_path_zero()
    test_standard_error_scaling()
    test_convergence_table()
    test_heavy_tail_warning()
    test_config_validation()
    test_estimator_errors()
    print("monte carlo tests passed")
