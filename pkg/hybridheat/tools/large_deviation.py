"""Donsker-Varadhan rate function of a finite chain and its Legendre dual.

    I(mu)     = -inf_{u > 0} sum_ij mu_i gamma_ij u_j / u_i
    Lambda(g) = sup_mu { <g, mu> - I(mu) }

Lambda(g) is computed directly (outer maximization over the simplex, inner
minimization for I) and independently as the principal eigenvalue of the
tilted generator Gamma + diag(g). ``growth_oracle`` gives the finite-t
quantity (1/t) log E_i exp(int_0^t g(r(s)) ds) whose limit both estimate.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg, optimize

from .ctmc import Generator, stationary_distribution, validate_generator
from .errors import (
    AgreementFailure,
    DimensionMismatch,
    GeneratorError,
    NotAProbabilityVector,
    PowerIterationStalled,
)

# Configure module-level logger
logger = logging.getLogger("large_deviation.py")
logger.setLevel(logging.INFO)

AGREEMENT_TOLERANCE = 1e-6
MEASURE_FLOOR = 1e-14
RATE_STARTS = 8
VERTEX_LOGIT = 8.0
POWER_TOLERANCE = 1e-12
POWER_BUDGET = 100_000
_EXP_CLIP = 700.0


@dataclass(frozen=True, eq=False)
class RateFunctionEvaluation:
    mu: np.ndarray
    value: float
    minimizer: np.ndarray
    iterations: int
    gradient_norm: float


@dataclass(frozen=True, eq=False)
class VariationalResult:
    lambda_direct: float
    maximizer_mu: np.ndarray
    eigen_lambda: float
    agreement_gap: float
    iterations: int


@dataclass(frozen=True, eq=False)
class GrowthCurve:
    """values[k, i] = (1/t_k) log E_i exp(int_0^{t_k} g(r(s)) ds)."""

    times: np.ndarray
    values: np.ndarray
    limit: float


@dataclass(frozen=True)
class DualityTrial:
    trial: int
    n_states: int
    lambda_direct: float
    lambda_eigen: float
    gap: float
    rate_at_pi: float
    weights: tuple[float, ...] = ()
    rates: tuple[tuple[float, ...], ...] = ()


def _check_measure(g: Generator, mu) -> np.ndarray:
    measure = np.asarray(mu, dtype=float)
    if measure.shape != (g.n_states,):
        raise DimensionMismatch(f"mu must have {g.n_states} entries, got shape {measure.shape}.")
    if np.any(measure < 0) or abs(measure.sum() - 1.0) > 1e-10:
        raise NotAProbabilityVector(f"mu = {measure!r} is not a probability vector.")
    return measure


def _check_weights(g: Generator, weights) -> np.ndarray:
    values = np.asarray(weights, dtype=float)
    if values.shape != (g.n_states,):
        raise DimensionMismatch(f"Expected {g.n_states} weights, got shape {values.shape}.")
    return values


def _ratio_terms(w: np.ndarray, mu: np.ndarray, rates: np.ndarray) -> np.ndarray:
    """T_ij = mu_i gamma_ij exp(w_j - w_i) off the diagonal, 0 on it."""
    diff = np.clip(w[None, :] - w[:, None], -_EXP_CLIP, _EXP_CLIP)
    terms = mu[:, None] * rates * np.exp(diff)
    np.fill_diagonal(terms, 0.0)
    return terms


def _objective(w, mu, rates, diagonal_part):
    terms = _ratio_terms(w, mu, rates)
    row, col = terms.sum(axis=1), terms.sum(axis=0)
    value = diagonal_part + terms.sum()
    grad = col - row
    hess = np.diag(row + col) - terms - terms.T
    return value, grad, hess


def _minimize_log_ratio(mu, rates, w0, tol=1e-13, max_iter=300):
    """Damped Newton on F(w) = sum_i mu_i sum_j gamma_ij exp(w_j - w_i) with w_0 = 0.

    F is convex in w and its Hessian is the graph Laplacian of the T_ij
    weights, so Newton converges from any start; at boundary measures the
    infimum sits at infinity and the iterates walk out geometrically.
    """
    diagonal_part = float(np.dot(mu, np.diag(rates)))
    scale = max(float(np.max(np.abs(rates))), 1.0)
    w = np.array(w0, dtype=float)
    w -= w[0]
    value, grad, hess = _objective(w, mu, rates, diagonal_part)
    iterations = 0
    for iterations in range(1, max_iter + 1):
        g_free, h_free = grad[1:], hess[1:, 1:]
        if g_free.size == 0 or np.max(np.abs(g_free)) <= tol * scale:
            break
        ridge = 1e-12 * (1.0 + np.trace(h_free) / g_free.size)
        try:
            step = np.linalg.solve(h_free + ridge * np.eye(g_free.size), -g_free)
        except np.linalg.LinAlgError:
            step = -g_free
        biggest = np.max(np.abs(step))
        if biggest > 10.0:
            step *= 10.0 / biggest
        slope = float(np.dot(g_free, step))
        if slope >= 0:
            step, slope = -g_free, -float(np.dot(g_free, g_free))
        t = 1.0
        accepted = False
        for _ in range(60):
            trial = w.copy()
            trial[1:] += t * step
            trial_value, trial_grad, trial_hess = _objective(trial, mu, rates, diagonal_part)
            if trial_value <= value + 1e-4 * t * slope:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
        w, value, grad, hess = trial, trial_value, trial_grad, trial_hess
    gradient_norm = float(np.max(np.abs(grad[1:]))) if grad.size > 1 else 0.0
    return w, float(value), iterations, gradient_norm


def rate_function(g: Generator, mu, n_starts: int = RATE_STARTS, seed=0) -> RateFunctionEvaluation:
    """I(mu) by multistart minimization over w = log u (u_0 = 1)."""
    measure = _check_measure(g, mu)
    n = g.n_states
    if n == 1:
        return RateFunctionEvaluation(measure, 0.0, np.ones(1), 0, 0.0)

    rng = np.random.default_rng(seed)
    pi = stationary_distribution(g).pi
    starts = [np.zeros(n)]
    for _ in range(max(n_starts - 1, 0)):
        starts.append(np.log(pi * rng.standard_exponential(n)))

    best = None
    for w0 in starts:
        w, value, iterations, gradient_norm = _minimize_log_ratio(measure, g.rates, w0)
        if best is None or value < best[1]:
            best = (w, value, iterations, gradient_norm)
    w, value, iterations, gradient_norm = best
    logger.debug("I(mu) = %.3e after %d Newton steps (|grad| %.2e).", -value, iterations, gradient_norm)
    return RateFunctionEvaluation(
        mu=measure,
        value=-value,
        minimizer=np.exp(w - w[0]),
        iterations=iterations,
        gradient_norm=gradient_norm,
    )


def two_state_rate_function(theta: float, gamma12: float, gamma21: float) -> float:
    """Closed form I((theta, 1-theta)) for the two-state chain."""
    return theta * gamma12 + (1 - theta) * gamma21 - 2.0 * np.sqrt(theta * (1 - theta) * gamma12 * gamma21)


def tilted_principal_eigenvalue(
    g: Generator,
    weights,
    method: str = "power",
    tol: float = POWER_TOLERANCE,
    max_iter: int = POWER_BUDGET,
) -> float:
    """Dominant (real, simple) eigenvalue of Gamma + diag(weights).

    ``method="power"`` shifts by c = max_i(-gamma_ii + |g_i|) + 1 so the
    matrix is nonnegative with a positive diagonal, then runs power
    iteration; ``method="dense"`` uses a dense eigensolve.
    """
    values = _check_weights(g, weights)
    tilted = g.rates + np.diag(values)
    if g.n_states == 1:
        return float(tilted[0, 0])
    if method == "dense":
        return float(np.max(linalg.eigvals(tilted).real))
    if method != "power":
        raise ValueError(f"Unknown eigenvalue method {method!r}.")

    shift = float(np.max(g.exit_rates + np.abs(values))) + 1.0
    shifted = tilted + shift * np.eye(g.n_states)
    v = np.full(g.n_states, 1.0 / np.sqrt(g.n_states))
    rayleigh = np.inf
    change = np.inf
    for iteration in range(1, max_iter + 1):
        image = shifted @ v
        new_rayleigh = float(v @ image)
        v = image / np.linalg.norm(image)
        change = abs(new_rayleigh - rayleigh) / abs(new_rayleigh)
        rayleigh = new_rayleigh
        if change <= tol:
            logger.debug("Power iteration converged in %d steps.", iteration)
            return rayleigh - shift
    raise PowerIterationStalled(max_iter, change)


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = np.exp(logits - logits.max())
    return z / z.sum()


def _entropy(mu: np.ndarray) -> float:
    positive = mu[mu > 0]
    return float(-np.sum(positive * np.log(positive)))


def variational_sup(
    g: Generator,
    weights,
    check: bool = True,
    tolerance: float = AGREEMENT_TOLERANCE,
    seed=0,
) -> VariationalResult:
    """sup_mu { <g, mu> - I(mu) } over the simplex, cross-checked against the tilted eigenvalue.

    The simplex is parametrized by softmax logits with the first logit fixed
    at 0; the outer BFGS starts from pi and from every vertex. By Danskin's
    theorem the gradient in mu is g + (Gamma u*)/u*, with u* the inner
    minimizer.
    """
    values = _check_weights(g, weights)
    n = g.n_states
    eigen = tilted_principal_eigenvalue(g, values)
    if n == 1:
        return VariationalResult(float(values[0]), np.ones(1), eigen, abs(float(values[0]) - eigen), 0)

    rates = g.rates
    warm = {"w": np.zeros(n)}

    def negative_objective(v):
        mu = _softmax(np.concatenate(([0.0], v)))
        floored = np.maximum(mu, MEASURE_FLOOR)
        floored /= floored.sum()
        w, inner, _, _ = _minimize_log_ratio(floored, rates, warm["w"])
        warm["w"] = w
        ratios = np.sum(rates * np.exp(np.clip(w[None, :] - w[:, None], -_EXP_CLIP, _EXP_CLIP)), axis=1)
        full_gradient = values + ratios
        phi = float(np.dot(values, floored)) + inner
        grad_v = mu * (full_gradient - np.dot(full_gradient, mu))
        return -phi, -grad_v[1:]

    pi = stationary_distribution(g).pi
    starts = [np.log(pi[1:]) - np.log(pi[0])]
    for vertex in range(n):
        logits = np.zeros(n)
        logits[vertex] = VERTEX_LOGIT
        starts.append(logits[1:] - logits[0])

    finishes = []
    iterations = 0
    for v0 in starts:
        warm["w"] = np.zeros(n)
        result = optimize.minimize(negative_objective, v0, jac=True, method="BFGS", options={"gtol": 1e-10})
        iterations += int(result.nit)
        mu = _softmax(np.concatenate(([0.0], result.x)))
        value = float(np.dot(values, mu)) - rate_function(g, mu, seed=seed).value
        finishes.append((value, mu))

    best_value = max(value for value, _ in finishes)
    ties = [(value, mu) for value, mu in finishes if value >= best_value - 1e-9 * (1.0 + abs(best_value))]
    _, maximizer = max(ties, key=lambda item: _entropy(item[1]))

    gap = abs(best_value - eigen)
    logger.debug("Lambda direct %.12g, eigen %.12g, gap %.2e.", best_value, eigen, gap)
    if check and gap > tolerance * (1.0 + abs(best_value)):
        raise AgreementFailure(
            best_value, eigen, gap, {"rates": rates.tolist(), "weights": values.tolist()}
        )
    return VariationalResult(best_value, maximizer, eigen, gap, iterations)


def growth_oracle(g: Generator, weights, t_grid) -> GrowthCurve:
    """(1/t) log E_i exp(int_0^t g(r(s)) ds) for every start state i, by matrix exponential.

    y(t) = exp(t (Gamma + diag g)) 1 is evaluated with the principal
    eigenvalue shifted out so large t neither overflows nor underflows.
    """
    values = _check_weights(g, weights)
    times = np.atleast_1d(np.asarray(t_grid, dtype=float))
    if np.any(times <= 0) or np.any(np.diff(times) <= 0):
        raise ValueError("t_grid must be positive and strictly increasing.")
    tilted = g.rates + np.diag(values)
    limit = tilted_principal_eigenvalue(g, values, method="dense")
    centred = tilted - limit * np.eye(g.n_states)
    ones = np.ones(g.n_states)
    curve = np.array([limit + np.log(linalg.expm(t * centred) @ ones) / t for t in times])
    return GrowthCurve(times=times, values=curve, limit=limit)


def random_irreducible_generator(n: int, rng: np.random.Generator, sparsity: float = 0.3) -> Generator:
    """Random off-diagonal rates in [0.1, 3], some zeroed, redrawn until irreducible."""
    while True:
        rates = rng.uniform(0.1, 3.0, size=(n, n)) * (rng.random((n, n)) >= sparsity)
        np.fill_diagonal(rates, 0.0)
        np.fill_diagonal(rates, -rates.sum(axis=1))
        try:
            return validate_generator(rates)
        except GeneratorError:
            continue


def duality_trials(
    k: int,
    seed=0,
    n_range: tuple[int, int] = (2, 5),
    weight_bound: float = 3.0,
) -> list[DualityTrial]:
    """Direct supremum vs tilted eigenvalue on ``k`` random generators and weights."""
    rng = np.random.default_rng(seed)
    trials = []
    for trial in range(k):
        n = int(rng.integers(n_range[0], n_range[1] + 1))
        g = random_irreducible_generator(n, rng)
        weights = rng.uniform(-weight_bound, weight_bound, size=n)
        result = variational_sup(g, weights, check=False)
        at_pi = rate_function(g, stationary_distribution(g).pi).value
        trials.append(
            DualityTrial(
                trial=trial,
                n_states=n,
                lambda_direct=result.lambda_direct,
                lambda_eigen=result.eigen_lambda,
                gap=result.agreement_gap,
                rate_at_pi=at_pi,
                weights=tuple(float(v) for v in weights),
                rates=tuple(tuple(float(v) for v in row) for row in g.rates),
            )
        )
    worst = max((t.gap for t in trials), default=0.0)
    logger.info("Ran %d duality trials; worst gap %.3e.", k, worst)
    return trials
