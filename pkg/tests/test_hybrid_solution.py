"""
Tests for the pathwise solution of the switching stochastic heat equation.
"""

import numpy as np
import pytest
from scipy import stats

from hybridheat.tools import ctmc
from hybridheat.tools import hybrid_solution as hs
from hybridheat.tools.errors import (
    DimensionMismatch,
    ModeOutOfRange,
    PointOutsideDomain,
    TimeNotOnGrid,
    TimeOutOfRange,
    ZeroInitialData,
)

TWO_STATE = [[-4.0, 4.0], [2.0, -2.0]]
THREE_STATE = [[-2.0, 1.0, 1.0], [3.0, -4.0, 1.0], [1.0, 1.0, -2.0]]


def _realization(model, horizon, grid, seed):
    path = ctmc.simulate_path(model.generator, 0, horizon, seed=seed)
    noise = hs.sample_noise(path, grid, model.n_channels, seed=seed + 1)
    return path, noise


def test_single_state_deterministic_norm():
    model = hs.build_model([[0.0]], [0.1])
    path = ctmc.simulate_path(model.generator, 0, 10.0, seed=0)
    for t in (0.5, 1.0, 10.0):
        result = hs.deterministic_norm(model, path, t)
        assert result.log_value == pytest.approx(-0.9 * t, rel=1e-14), "||v(t)|| = exp((alpha - 1) t)"
        assert result.tail_bound == 0.0


def test_three_state_deterministic_norm_uses_drift_integral():
    model = hs.build_model(THREE_STATE, [0.1, 1.5, 0.2])
    path = ctmc.simulate_path(model.generator, 0, 40.0, seed=5)
    for t in (3.0, 40.0):
        expected = -t + ctmc.path_integral(path, model.alpha, t)
        assert hs.deterministic_norm(model, path, t).log_value == pytest.approx(expected, abs=1e-12)


def test_noiseless_solution_equals_deterministic_norm():
    model = hs.build_model(TWO_STATE, [2.0, 1.0], beta=[[0.0], [0.0]], initial="x(pi-x)")
    grid = np.linspace(0.5, 5.0, 10)
    path, noise = _realization(model, 5.0, grid, seed=11)
    for t in grid:
        u = hs.solution_norm(model, path, noise, t)
        v = hs.deterministic_norm(model, path, t)
        assert abs(u.value - v.value) <= 1e-12 * v.value, f"beta = 0 must reduce to the heat equation at t={t}"


def test_mode_coefficient_closed_form():
    model = hs.build_model([[0.0]], [2.0], beta=[[1.0]])
    grid = np.array([0.25, 0.5, 1.0])
    path, noise = _realization(model, 1.0, grid, seed=3)
    brownian = noise.brownian_path[np.searchsorted(noise.breakpoints, grid), 0]
    for t, b in zip(grid, brownian):
        expected = np.exp(-t + 2.0 * t - 0.5 * t + b)
        assert hs.mode_coefficient(model, path, noise, 1, t) == pytest.approx(expected, rel=1e-12)
        assert hs.mode_coefficient(model, path, noise, 2, t) == 0.0, "u0 = e_1 has no second mode"
        assert hs.solution_norm(model, path, noise, t).value == pytest.approx(expected, rel=1e-12)


def test_stochastic_factor_multi_channel():
    model = hs.build_model(TWO_STATE, [2.0, 1.0], beta=[[1.0, 0.5], [0.3, 0.8]])
    grid = np.array([1.0, 2.0])
    path, noise = _realization(model, 2.0, grid, seed=21)
    solution = hs.PathSolution(model, path, noise)
    q = ctmc.integral_curve(path, [1.25, 0.73], grid)
    assert np.allclose(solution.quadratic_variation(grid), q), "sigma_i^2 sums the squared noise rows"
    log_factor = solution.log_stochastic_factor(grid)
    assert np.allclose(log_factor, -0.5 * q + solution.martingale(grid).sum(axis=1))
    assert hs.stochastic_factor(model, path, noise, 2.0) == pytest.approx(np.exp(log_factor[1]))


def test_evaluate_field():
    model = hs.build_model([[0.0]], [0.5], beta=[[0.2]])
    grid = np.array([1.0])
    path, noise = _realization(model, 1.0, grid, seed=4)
    x = np.array([0.3, np.pi / 2, 2.5])
    field = hs.evaluate_field(model, path, noise, 1.0, x)
    norm = hs.solution_norm(model, path, noise, 1.0).value
    assert np.allclose(field, norm * np.sqrt(2 / np.pi) * np.sin(x)), "u(t, .) is a multiple of e_1"
    with pytest.raises(PointOutsideDomain):
        hs.evaluate_field(model, path, noise, 1.0, [0.0, 1.0])
    with pytest.raises(PointOutsideDomain):
        hs.evaluate_field(model, path, noise, 1.0, [np.pi])


def test_unvisited_states_do_not_matter():
    model = hs.build_model(THREE_STATE, [0.1, 1.5, 0.2], beta=[[0.4], [0.9], [0.3]], initial="x(pi-x)")
    path = ctmc.MarkovPath(jump_times=[0.0, 0.7, 1.6], states=[0, 1, 0], horizon=2.0, n_states=3)
    grid = np.array([0.5, 1.0, 2.0])
    noise = hs.sample_noise(path, grid, 1, seed=12)
    altered = model.with_beta([[0.4], [0.9], [25.0]])
    for t in grid:
        a = hs.solution_norm(model, path, noise, t)
        b = hs.solution_norm(altered, path, noise, t)
        assert a.log_value == b.log_value, f"state 2 is never visited, yet t={t} changed"
    x = np.linspace(0.1, 3.0, 7)
    assert np.array_equal(hs.evaluate_field(model, path, noise, 2.0, x), hs.evaluate_field(altered, path, noise, 2.0, x))


def test_stochastic_factor_has_unit_mean():
    model = hs.build_model([[0.0]], [0.0], beta=[[1.0]])
    path = ctmc.simulate_path(model.generator, 0, 1.0, seed=0)
    seeds = np.random.SeedSequence(2024).spawn(10000)
    draws = np.array([hs.stochastic_factor(model, path, hs.sample_noise(path, [1.0], 1, seed=s), 1.0) for s in seeds])
    se = draws.std(ddof=1) / np.sqrt(draws.size)
    assert abs(draws.mean() - 1.0) <= 3 * se, f"E[S(1)] = {draws.mean():.4f} +/- {se:.4f}"


def test_mode_coefficient_is_lognormal():
    alpha, beta, t = 0.5, 0.8, 2.0
    model = hs.build_model([[0.0]], [alpha], beta=[[beta]], initial="mode:2")
    path = ctmc.simulate_path(model.generator, 0, t, seed=0)
    u0 = model.initial.coefficients[1]
    seeds = np.random.SeedSequence(77).spawn(4000)
    logs = np.array(
        [np.log(hs.mode_coefficient(model, path, hs.sample_noise(path, [t], 1, seed=s), 2, t) / u0) for s in seeds]
    )
    mean, var = (-4.0 + alpha - beta**2 / 2) * t, beta**2 * t
    assert abs(logs.mean() - mean) <= 3 * np.sqrt(var / logs.size), f"mean {logs.mean()} vs {mean}"
    assert logs.var(ddof=1) == pytest.approx(var, rel=4 * np.sqrt(2 / logs.size)), f"variance {logs.var(ddof=1)}"
    assert stats.kstest((logs - mean) / np.sqrt(var), "norm").pvalue > 1e-3, "log coefficient is Gaussian"


def test_field_examples():
    x = np.linspace(0.2, 2.9, 9)
    e1 = np.sqrt(2 / np.pi) * np.sin(x)
    model = hs.build_model(TWO_STATE, [2.0, 1.0], beta=[[1.0], [1.0]])
    path, noise = _realization(model, 1.0, np.array([1.0]), seed=6)
    assert np.allclose(hs.evaluate_field(model, path, noise, 0.0, x), e1, atol=1e-14), "u(0) = e_1"

    still = hs.build_model([[0.0]], [0.0], beta=[[0.0]])
    path, noise = _realization(still, 1.0, np.array([1.0]), seed=6)
    assert np.allclose(hs.evaluate_field(still, path, noise, 1.0, x), np.exp(-1.0) * e1, atol=1e-14)


def test_modes_decouple():
    model = hs.build_model(THREE_STATE, [0.1, 1.5, 0.2], beta=[[0.4], [0.9], [0.3]], initial=[1.0, 0.0, 0.5, -0.2])
    path, noise = _realization(model, 1.5, np.array([0.5, 1.5]), seed=19)
    x = np.linspace(0.1, 3.0, 11)
    for t in (0.5, 1.5):
        z = np.array([hs.mode_coefficient(model, path, noise, n, t) for n in range(1, 65)])
        assert np.allclose(hs.evaluate_field(model, path, noise, t, x), z @ model.basis.eigenfunctions(x), atol=1e-12)
        ratio = z[2] / z[0]
        assert ratio == pytest.approx(0.5 * np.exp(-8.0 * t), rel=1e-12), "modes share the drift and the noise"
        assert np.all(z[4:] == 0.0)


def test_missing_initial_datum():
    model = hs.build_model(TWO_STATE, [2.0, 1.0], beta=[[1.0], [1.0]], initial=None)
    path, noise = _realization(model, 1.0, np.array([1.0]), seed=2)
    with pytest.raises(ZeroInitialData):
        hs.mode_coefficient(model, path, noise, 1, 1.0)
    with pytest.raises(ZeroInitialData):
        hs.evaluate_field(model, path, noise, 1.0, [1.0])
    with pytest.raises(ZeroInitialData):
        hs.deterministic_norm(model, path, 1.0)


def test_evaluation_errors():
    model = hs.build_model(TWO_STATE, [2.0, 1.0], beta=[[1.0], [1.0]])
    grid = np.array([0.5, 1.0])
    path, noise = _realization(model, 1.0, grid, seed=8)
    with pytest.raises(TimeNotOnGrid):
        hs.solution_norm(model, path, noise, 0.7)
    with pytest.raises(ModeOutOfRange):
        hs.mode_coefficient(model, path, noise, 0, 1.0)
    with pytest.raises(ModeOutOfRange):
        hs.mode_coefficient(model, path, noise, 65, 1.0)
    with pytest.raises(TimeOutOfRange):
        hs.sample_noise(path, [0.5, 2.0], 1, seed=0)
    with pytest.raises(DimensionMismatch):
        hs.build_model(TWO_STATE, [2.0])
    with pytest.raises(DimensionMismatch):
        hs.PathSolution(model, path, hs.sample_noise(path, grid, 2, seed=0))


def test_norm_series_rows():
    model = hs.build_model([[0.0]], [0.1])
    grid = np.array([1.0, 2.0])
    path, noise = _realization(model, 2.0, grid, seed=0)
    rows = hs.norm_series(hs.PathSolution(model, path, noise), grid)
    assert [row["t"] for row in rows] == [1.0, 2.0]
    assert rows[1]["log_norm"] == pytest.approx(-1.8)
    assert rows[1]["log_factor"] == 0.0, "no noise channels means a unit stochastic factor"


def test_euler_maruyama_converges_to_explicit_solution():
    model = hs.build_model(TWO_STATE, [2.0, 1.0], beta=[[0.3], [0.3]])
    grid = np.arange(1, 65) / 64
    steps = [1 / 8, 1 / 16, 1 / 32, 1 / 64]
    errors = np.zeros(len(steps))
    realizations = 32
    for k in range(realizations):
        path, noise = _realization(model, 1.0, grid, seed=100 + 2 * k)
        exact = hs.solution_norm(model, path, noise, 1.0).value
        for i, step in enumerate(steps):
            errors[i] += abs(hs.euler_maruyama_norm(model, path, noise, step) / exact - 1.0)
    errors /= realizations
    order = np.polyfit(np.log(steps), np.log(errors), 1)[0]
    assert np.all(np.diff(errors) < 0), f"errors must shrink with the step: {errors}"
    assert order >= 0.5, f"empirical strong order {order:.2f} below 1/2"
    assert errors[-1] < 0.05


if __name__ == "__main__":
    test_single_state_deterministic_norm()
    test_three_state_deterministic_norm_uses_drift_integral()
    test_noiseless_solution_equals_deterministic_norm()
    test_mode_coefficient_closed_form()
    test_stochastic_factor_multi_channel()
    test_evaluate_field()
    test_unvisited_states_do_not_matter()
    test_stochastic_factor_has_unit_mean()
    test_mode_coefficient_is_lognormal()
    test_field_examples()
    test_modes_decouple()
    test_missing_initial_datum()
    test_evaluation_errors()
    test_norm_series_rows()
    test_euler_maruyama_converges_to_explicit_solution()
    print("hybrid solution tests passed")
