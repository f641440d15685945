"""
Tests for the rate function, the tilted principal eigenvalue and their duality.
"""

import numpy as np
import pytest

from hybridheat.tools import ctmc
from hybridheat.tools import large_deviation as ld
from hybridheat.tools.errors import (
    AgreementFailure,
    DimensionMismatch,
    NotAProbabilityVector,
    PowerIterationStalled,
)

THREE_STATE = [[-2.0, 1.0, 1.0], [3.0, -4.0, 1.0], [1.0, 1.0, -2.0]]
TWO_STATE = [[-4.0, 4.0], [2.0, -2.0]]
TOP = 1 + 2 * np.sqrt(2)


def test_rate_function_vanishes_at_pi():
    g = ctmc.validate_generator(THREE_STATE)
    result = ld.rate_function(g, ctmc.stationary_distribution(g).pi)
    assert -1e-10 <= result.value <= 1e-9, f"I(pi) = {result.value}"
    assert result.minimizer[0] == 1.0, "minimizer is normalized to u_0 = 1"


def test_two_state_closed_form():
    for q in (0.5, 1.0, 2.0, 5.0):
        g = ctmc.validate_generator([[-1.0, 1.0], [q, -q]])
        for theta in np.arange(1, 10) / 10:
            numeric = ld.rate_function(g, [theta, 1 - theta]).value
            closed = theta + (1 - theta) * q - 2 * np.sqrt(theta * (1 - theta) * q)
            assert abs(numeric - closed) <= 1e-8, f"q={q}, theta={theta}: {numeric} vs {closed}"
            assert closed == pytest.approx(ld.two_state_rate_function(theta, 1.0, q))


def test_point_mass_gives_exit_rate():
    g = ctmc.validate_generator(TWO_STATE)
    assert ld.rate_function(g, [1.0, 0.0]).value == pytest.approx(4.0, abs=1e-9)
    assert ld.rate_function(g, [0.0, 1.0]).value == pytest.approx(2.0, abs=1e-9)
    theta = 1 - 1e-9
    numeric = ld.rate_function(g, [theta, 1 - theta]).value
    assert numeric == pytest.approx(ld.two_state_rate_function(theta, 4.0, 2.0), abs=1e-8)
    assert ld.two_state_rate_function(1.0, 4.0, 2.0) == 4.0


def test_rate_function_input_errors():
    g = ctmc.validate_generator(TWO_STATE)
    with pytest.raises(DimensionMismatch):
        ld.rate_function(g, [1.0, 0.0, 0.0])
    with pytest.raises(NotAProbabilityVector):
        ld.rate_function(g, [0.7, 0.7])
    with pytest.raises(NotAProbabilityVector):
        ld.rate_function(g, [1.5, -0.5])


def test_rate_function_nonnegative_and_convex():
    rng = np.random.default_rng(9)
    for _ in range(20):
        g = ld.random_irreducible_generator(int(rng.integers(2, 5)), rng)
        a, b = rng.dirichlet(np.ones(g.n_states), size=2)
        ia, ib = ld.rate_function(g, a).value, ld.rate_function(g, b).value
        mid = ld.rate_function(g, 0.5 * (a + b)).value
        assert min(ia, ib, mid) >= -1e-10, "I is nonnegative"
        assert mid <= 0.5 * (ia + ib) + 1e-8, "I is convex along segments"


def test_tilted_eigenvalue_examples():
    assert ld.tilted_principal_eigenvalue(ctmc.validate_generator([[0.0]]), [2.5]) == 2.5
    g = ctmc.validate_generator(THREE_STATE)
    assert ld.tilted_principal_eigenvalue(g, [1.7, 1.7, 1.7]) == pytest.approx(1.7, abs=1e-10)
    sym = ctmc.validate_generator([[-1.0, 1.0], [1.0, -1.0]])
    assert ld.tilted_principal_eigenvalue(sym, [1.0, -1.0]) == pytest.approx(np.sqrt(2) - 1, abs=1e-10)
    two = ctmc.validate_generator(TWO_STATE)
    assert ld.tilted_principal_eigenvalue(two, [5.0, 3.0]) == pytest.approx(TOP, abs=1e-10)
    assert ld.tilted_principal_eigenvalue(two, [5.0, 3.0], method="dense") == pytest.approx(TOP, abs=1e-12)


def test_power_iteration_budget():
    g = ctmc.validate_generator(THREE_STATE)
    with pytest.raises(PowerIterationStalled):
        ld.tilted_principal_eigenvalue(g, [1.0, 0.0, -1.0], max_iter=2)


def test_variational_sup_two_state():
    g = ctmc.validate_generator(TWO_STATE)
    result = ld.variational_sup(g, [5.0, 3.0])
    assert result.lambda_direct == pytest.approx(TOP, abs=1e-6)
    assert result.eigen_lambda == pytest.approx(TOP, abs=1e-10)
    assert result.agreement_gap <= 1e-6
    assert np.allclose(result.maximizer_mu, [0.5, 0.5], atol=1e-4), f"maximizer {result.maximizer_mu}"


def test_variational_sup_constant_weights():
    g = ctmc.validate_generator(THREE_STATE)
    result = ld.variational_sup(g, [0.4, 0.4, 0.4])
    assert result.lambda_direct == pytest.approx(0.4, abs=1e-8)
    assert np.allclose(result.maximizer_mu, [7 / 15, 1 / 5, 1 / 3], atol=1e-3), "pi attains the supremum"


def test_variational_sup_single_state():
    g = ctmc.validate_generator([[0.0]])
    result = ld.variational_sup(g, [-1.25])
    assert result.lambda_direct == -1.25
    assert result.agreement_gap == 0.0


def test_agreement_failure_is_raised():
    g = ctmc.validate_generator(TWO_STATE)
    with pytest.raises(AgreementFailure) as info:
        ld.variational_sup(g, [5.0, 3.0], tolerance=-1.0)
    assert "weights" in info.value.data, "the failing data travels with the error"


def test_duality_on_random_generators():
    trials = ld.duality_trials(200, seed=2024)
    assert len(trials) == 200
    assert {t.n_states for t in trials} <= {2, 3, 4, 5}
    worst = max(trials, key=lambda t: t.gap)
    assert worst.gap <= 1e-6, f"trial {worst.trial}: direct {worst.lambda_direct} vs eigen {worst.lambda_eigen}"
    assert max(t.rate_at_pi for t in trials) <= 1e-9, "I(pi) vanishes on every generator"


def test_shift_covariance_and_monotonicity():
    rng = np.random.default_rng(31)
    for _ in range(10):
        g = ld.random_irreducible_generator(4, rng)
        weights = rng.uniform(-3, 3, size=4)
        base = ld.tilted_principal_eigenvalue(g, weights, method="dense")
        shifted = ld.tilted_principal_eigenvalue(g, weights + 1.3, method="dense")
        assert shifted == pytest.approx(base + 1.3, abs=1e-10), "Lambda(g + c) = Lambda(g) + c"
        power = ld.tilted_principal_eigenvalue(g, weights + 1.3)
        assert power == pytest.approx(shifted, abs=1e-7), "power iteration agrees with the dense solve"
        bumped = weights.copy()
        bumped[int(rng.integers(4))] += 0.5
        assert ld.tilted_principal_eigenvalue(g, bumped, method="dense") >= base - 1e-12


def test_growth_oracle():
    single = ld.growth_oracle(ctmc.validate_generator([[0.0]]), [0.7], [1.0, 5.0, 50.0])
    assert np.allclose(single.values, 0.7, atol=1e-14), "one state grows at exactly g_1"

    g = ctmc.validate_generator(THREE_STATE)
    flat = ld.growth_oracle(g, np.zeros(3), [0.5, 10.0, 100.0])
    assert np.max(np.abs(flat.values)) <= 1e-12, "probabilities sum to one"

    two = ctmc.validate_generator(TWO_STATE)
    times = [5.0, 10.0, 20.0, 50.0, 100.0, 200.0]
    curve = ld.growth_oracle(two, [5.0, 3.0], times)
    assert curve.values.shape == (6, 2)
    assert abs(curve.values[3, 0] - TOP) <= 5e-2
    assert abs(curve.values[5, 0] - TOP) <= 1e-2
    errors = np.abs(curve.values[:, 0] - TOP)
    assert np.all(np.diff(errors) < 0), f"errors shrink monotonically: {errors}"

    with pytest.raises(ValueError):
        ld.growth_oracle(two, [5.0, 3.0], [2.0, 1.0])


if __name__ == "__main__":
    test_rate_function_vanishes_at_pi()
    test_two_state_closed_form()
    test_point_mass_gives_exit_rate()
    test_rate_function_input_errors()
    test_rate_function_nonnegative_and_convex()
    test_tilted_eigenvalue_examples()
    test_power_iteration_budget()
    test_variational_sup_two_state()
    test_variational_sup_constant_weights()
    test_variational_sup_single_state()
    test_agreement_failure_is_raised()
    test_duality_on_random_generators()
    test_shift_covariance_and_monotonicity()
    test_growth_oracle()
    print("large deviation tests passed")
