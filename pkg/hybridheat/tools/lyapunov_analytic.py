"""Closed-form sample and moment Lyapunov exponents and stability predicates.

Exponents come in two modes: exact for a deterministic initial datum, using
lambda_{n0} of its leading mode, and an upper bound valid for any initial
datum, using lambda_1.
"""

import logging
from enum import Enum
from fractions import Fraction

import numpy as np
from pydantic import BaseModel, Field

from . import large_deviation
from .errors import NonpositiveP, NonpositiveQ, NonpositiveRates, ZeroInitialData
from .hybrid_solution import HybridHeatModel

# Configure module-level logger
logger = logging.getLogger("lyapunov_analytic.py")
logger.setLevel(logging.INFO)

BOUNDARY_TOLERANCE = 1e-12


class ExponentMode(str, Enum):
    EXACT = "exact-for-deterministic-u0"
    BOUND = "upper-bound-any-u0"


class Verdict(BaseModel):
    quantity: str
    value: float
    stable: bool
    boundary: bool = False


class TwoStateVerdict(BaseModel):
    lhs: float
    rhs: float
    margin: float
    stable: bool
    boundary: bool = False


class MomentEntry(BaseModel):
    p: float
    exponent: float
    bound_exponent: float
    lower_bound_pi: float | None = None
    verdict: Verdict


class ExponentReport(BaseModel):
    mode: ExponentMode
    pi: list[float]
    leading_mode: int | None = None
    heat_exponent: dict[str, float]
    sample_exponent: dict[str, float]
    sample_verdict: Verdict
    moments: list[MomentEntry] = Field(default_factory=list)
    two_state: TwoStateVerdict | None = None
    notes: list[str] = Field(default_factory=list)


def _spectral_rate(model: HybridHeatModel, mode: ExponentMode) -> float:
    mode = ExponentMode(mode)
    if mode is ExponentMode.BOUND:
        return float(model.basis.eigenvalues[0])
    if model.initial is None:
        raise ZeroInitialData("The exact exponent needs a deterministic, nonzero initial datum.")
    return float(model.basis.eigenvalues[model.initial.leading_index - 1])


def heat_sample_exponent(model: HybridHeatModel, mode: ExponentMode = ExponentMode.EXACT) -> float:
    """-(lambda - sum_j pi_j alpha_j) of the noiseless equation; noise rows are ignored."""
    return -(_spectral_rate(model, mode) - float(np.dot(model.pi, model.alpha)))


def sample_exponent(model: HybridHeatModel, mode: ExponentMode = ExponentMode.EXACT) -> float:
    """-(lambda - sum_i pi_i (alpha_i - sigma_i^2 / 2))."""
    drift = model.alpha - 0.5 * model.sigma2
    return -(_spectral_rate(model, mode) - float(np.dot(model.pi, drift)))


def moment_weights(model: HybridHeatModel, p: float) -> np.ndarray:
    """g_i = p alpha_i + p (p - 1) / 2 sigma_i^2."""
    if not p > 0:
        raise NonpositiveP(f"Moment order p must be positive, got {p!r}.")
    return p * model.alpha + 0.5 * p * (p - 1) * model.sigma2


def moment_exponent(
    model: HybridHeatModel,
    p: float,
    mode: ExponentMode = ExponentMode.EXACT,
    route: str = "eigen",
) -> float:
    """-p lambda + Lambda(g), with Lambda the Legendre dual of the rate function.

    ``route="eigen"`` takes Lambda as the principal eigenvalue of the tilted
    generator; ``route="variational"`` computes the supremum directly (and
    raises AgreementFailure if the two disagree).
    """
    weights = moment_weights(model, p)
    rate = _spectral_rate(model, mode)
    if route == "eigen":
        dual = large_deviation.tilted_principal_eigenvalue(model.generator, weights)
    elif route == "variational":
        dual = large_deviation.variational_sup(model.generator, weights).lambda_direct
    else:
        raise ValueError(f"Unknown route {route!r}; expected 'eigen' or 'variational'.")
    return -p * rate + dual


def moment_lower_bound_pi(model: HybridHeatModel, p: float) -> float:
    """-p lambda_{n0} + <g, pi>, the supremum evaluated at mu = pi where I vanishes."""
    weights = moment_weights(model, p)
    return -p * _spectral_rate(model, ExponentMode.EXACT) + float(np.dot(weights, model.pi))


def exponent_verdict(value: float, quantity: str = "exponent") -> Verdict:
    """Stable iff the exponent is negative; |value| within tolerance is a boundary case."""
    boundary = abs(value) <= BOUNDARY_TOLERANCE
    return Verdict(quantity=quantity, value=value, stable=value < -BOUNDARY_TOLERANCE, boundary=boundary)


def two_state_stability(a: float, b: float, c: float, d: float, gamma12: float, gamma21: float) -> TwoStateVerdict:
    """Almost-sure stability of the two-state scalar model with lambda_1 = 1.

    Stable iff (a gamma21 + b gamma12)/(gamma12 + gamma21)
             < 1 + (c^2 gamma21 + d^2 gamma12)/(2 (gamma12 + gamma21)).
    Evaluated in exact rational arithmetic.
    """
    if not (gamma12 > 0 and gamma21 > 0):
        raise NonpositiveRates(f"Switching rates must be positive, got {gamma12!r} and {gamma21!r}.")
    a, b, c, d, g12, g21 = (Fraction(v) for v in (a, b, c, d, gamma12, gamma21))
    total = g12 + g21
    lhs = (a * g21 + b * g12) / total
    rhs = 1 + (c * c * g21 + d * d * g12) / (2 * total)
    margin = float(rhs - lhs)
    boundary = abs(margin) <= BOUNDARY_TOLERANCE
    return TwoStateVerdict(
        lhs=float(lhs),
        rhs=float(rhs),
        margin=margin,
        stable=margin > BOUNDARY_TOLERANCE,
        boundary=boundary,
    )


def eq00_rhs(q: float) -> float:
    """(q^2 - 2 q^{3/2} + 2q - 2 q^{1/2} + 1) / (3q + 1).

    For gamma12 = 1, gamma21 = q and mu = (1/2, 1/2), a + b above this value
    makes the p-th moment exponent strictly exceed its pi lower bound.
    """
    if not q > 0:
        raise NonpositiveQ(f"q must be positive, got {q!r}.")
    root = float(np.sqrt(q))
    return (q * q - 2 * q * root + 2 * q - 2 * root + 1) / (3 * q + 1)


def deviation_gain(a: float, b: float, gamma12: float, gamma21: float, theta: float) -> float:
    """a theta + b (1 - theta) - I(mu_theta) - (a pi_1 + b pi_2) for the two-state chain.

    Here a, b are the moment weights g(1), g(2). A positive gain certifies
    that the moment exponent is strictly above the pi lower bound.
    """
    if not (gamma12 > 0 and gamma21 > 0):
        raise NonpositiveRates(f"Switching rates must be positive, got {gamma12!r} and {gamma21!r}.")
    if not 0 <= theta <= 1:
        raise ValueError(f"theta must lie in [0, 1], got {theta!r}.")
    pi1 = gamma21 / (gamma12 + gamma21)
    rate = large_deviation.two_state_rate_function(theta, gamma12, gamma21)
    return a * theta + b * (1 - theta) - rate - (a * pi1 + b * (1 - pi1))


def _two_state_entry(model: HybridHeatModel, mode: ExponentMode) -> TwoStateVerdict | None:
    if model.n_states != 2 or abs(_spectral_rate(model, mode) - 1.0) > BOUNDARY_TOLERANCE:
        return None
    rates = model.generator.rates
    c, d = np.sqrt(model.sigma2)
    return two_state_stability(model.alpha[0], model.alpha[1], c, d, rates[0, 1], rates[1, 0])


def analyze(model: HybridHeatModel, p_values=(), route: str = "eigen") -> ExponentReport:
    """Every closed-form quantity for ``model``: both exponent modes, moments and verdicts."""
    modes = [ExponentMode.BOUND] if model.initial is None else [ExponentMode.EXACT, ExponentMode.BOUND]
    headline = modes[0]
    heat = {mode.value: heat_sample_exponent(model, mode) for mode in modes}
    sample = {mode.value: sample_exponent(model, mode) for mode in modes}

    moments = []
    for p in p_values:
        exponent = moment_exponent(model, p, headline, route)
        moments.append(
            MomentEntry(
                p=float(p),
                exponent=exponent,
                bound_exponent=moment_exponent(model, p, ExponentMode.BOUND, route),
                lower_bound_pi=None if headline is ExponentMode.BOUND else moment_lower_bound_pi(model, p),
                verdict=exponent_verdict(exponent, f"moment_exponent(p={p:g})"),
            )
        )

    notes = []
    if model.initial is None:
        notes.append("No deterministic initial datum: exponents are lambda_1 upper bounds.")
    two_state = _two_state_entry(model, headline)
    if two_state is not None and two_state.boundary:
        logger.warning("Two-state stability margin %.3e is on the boundary.", two_state.margin)

    report = ExponentReport(
        mode=headline,
        pi=[float(v) for v in model.pi],
        leading_mode=None if model.initial is None else model.initial.leading_index,
        heat_exponent=heat,
        sample_exponent=sample,
        sample_verdict=exponent_verdict(sample[headline.value], "sample_exponent"),
        moments=moments,
        two_state=two_state,
        notes=notes,
    )
    logger.info("Analyzed %d-state model: sample exponent %.6g (%s).", model.n_states, sample[headline.value], headline.value)
    return report
