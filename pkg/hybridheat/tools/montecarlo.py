"""Monte Carlo estimates of the sample and moment Lyapunov exponents.

Each path gets its own SeedSequence child (split again into a chain stream
and a noise stream), so a report depends only on the base seed and the
number of paths, never on how path batches are scheduled.

Conditional on the chain path the Brownian factor is lognormal, so

    E[ ||u(t)||^p | r ] = ||v(t)||^p exp(p (p - 1) / 2 * Q(t)),

and the default moment estimator samples the chain only. The fully sampled
form (drawing the Brownian noise too) is kept as a cross-check.
"""

import logging
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import stats
from scipy.special import logsumexp

from . import ctmc, large_deviation, lyapunov_analytic
from .errors import HeavyTailWarning, NonpositiveP, ZeroInitialData
from .hybrid_solution import HybridHeatModel, PathSolution, sample_noise

# Configure module-level logger
logger = logging.getLogger("montecarlo.py")
logger.setLevel(logging.INFO)

load_dotenv()


def _default_workers() -> int:
    return max(int(os.environ.get("HYBRIDHEAT_WORKERS", "1")), 1)


class EstimatorConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    horizon: float = Field(200.0, gt=0)
    n_paths: int = Field(200, ge=1)
    n_grid: int = Field(20, ge=1)
    grid: list[float] | None = None
    seed: int = 0
    p: float = Field(2.0, gt=0)
    start_state: int | None = 0
    fit_fraction: float = Field(0.5, gt=0, le=1)
    bootstrap_resamples: int = Field(200, ge=2)
    kurtosis_threshold: float = Field(100.0, gt=0)
    variance_reduced: bool = True
    workers: int = Field(default_factory=_default_workers, ge=1)

    @model_validator(mode="after")
    def _grid_inside_horizon(self):
        if self.grid is not None:
            grid = np.asarray(self.grid, dtype=float)
            if grid.size == 0 or np.any(grid <= 0) or np.any(grid > self.horizon):
                raise ValueError(f"grid must be a non-empty subset of (0, {self.horizon}].")
            if np.any(np.diff(grid) <= 0):
                raise ValueError("grid must be strictly increasing.")
        return self

    def time_grid(self) -> np.ndarray:
        """Evaluation times, always ending at the horizon."""
        if self.grid is None:
            return self.horizon * np.arange(1, self.n_grid + 1) / self.n_grid
        grid = np.asarray(self.grid, dtype=float)
        return grid if grid[-1] == self.horizon else np.append(grid, self.horizon)


class EstimateReport(BaseModel):
    quantity: str
    p: float | None = None
    estimate: float
    standard_error: float = Field(ge=0)
    reference: float | None = None
    z_score: float | None = None
    n_paths: int
    horizon: float
    seed: int
    variance_reduced: bool | None = None
    per_path: list[float] | None = None
    times: list[float] | None = None
    log_moment: list[float] | None = None
    log_moment_se: list[float] | None = None
    kurtosis: float | None = None
    heavy_tail: bool = False

    def curve_rows(self) -> list[dict]:
        """(t, log_moment, se) rows for CSV export."""
        if self.times is None:
            return []
        return [
            {"t": t, "log_moment": m, "se": s}
            for t, m, s in zip(self.times, self.log_moment, self.log_moment_se)
        ]


@dataclass(frozen=True, eq=False)
class PathSample:
    """Per-path curves on the evaluation grid."""

    log_deterministic: np.ndarray
    quadratic_variation: np.ndarray
    log_norm: np.ndarray


def z_score(estimate: float, reference: float | None, standard_error: float) -> float | None:
    if reference is None:
        return None
    gap = estimate - reference
    if standard_error > 0:
        return gap / standard_error
    return 0.0 if abs(gap) <= 1e-9 * (1.0 + abs(reference)) else float(np.copysign(np.inf, gap))


def _require_initial(model: HybridHeatModel):
    if model.initial is None:
        raise ZeroInitialData("Monte Carlo estimates need a deterministic, nonzero initial datum.")


def _path_solution(model: HybridHeatModel, config: EstimatorConfig, grid: np.ndarray, seed) -> PathSolution:
    chain_seed, noise_seed = seed.spawn(2)
    path = ctmc.simulate_path(model.generator, config.start_state, config.horizon, seed=chain_seed)
    noise = sample_noise(path, grid, model.n_channels, seed=noise_seed)
    return PathSolution(model, path, noise)


def first_path_solution(model: HybridHeatModel, config: EstimatorConfig) -> PathSolution:
    """The realization behind path 0 of every estimator run with ``config``."""
    _require_initial(model)
    seed = np.random.SeedSequence(config.seed).spawn(1)[0]
    return _path_solution(model, config, config.time_grid(), seed)


def _sample_path(model: HybridHeatModel, config: EstimatorConfig, grid: np.ndarray, with_noise: bool, seed) -> PathSample:
    solution = _path_solution(model, config, grid, seed)
    log_v = solution.log_deterministic_norms(grid)
    qv = solution.quadratic_variation(grid)
    log_u = log_v + solution.log_stochastic_factor(grid) if with_noise and model.n_channels else log_v
    return PathSample(log_deterministic=log_v, quadratic_variation=qv, log_norm=log_u)


def simulate_paths(model: HybridHeatModel, config: EstimatorConfig, with_noise: bool = True) -> list[PathSample]:
    """All M paths, in seed order regardless of ``config.workers``."""
    _require_initial(model)
    grid = config.time_grid()
    seeds = np.random.SeedSequence(config.seed).spawn(config.n_paths)

    def work(seed):
        return _sample_path(model, config, grid, with_noise, seed)

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            samples = list(pool.map(work, seeds))
    else:
        samples = [work(seed) for seed in seeds]
    logger.debug("Simulated %d paths to T=%g.", config.n_paths, config.horizon)
    return samples


def estimate_sample_exponent(
    model: HybridHeatModel, config: EstimatorConfig, reference: float | None = None
) -> EstimateReport:
    """Mean of (1/T) log ||u(T)|| over M independent paths."""
    _require_initial(model)
    samples = simulate_paths(model, config, with_noise=True)
    values = np.array([sample.log_norm[-1] for sample in samples]) / config.horizon
    estimate = float(values.mean())
    se = float(values.std(ddof=1) / np.sqrt(values.size)) if values.size > 1 else 0.0
    if reference is None:
        reference = lyapunov_analytic.sample_exponent(model)
    report = EstimateReport(
        quantity="sample_exponent",
        estimate=estimate,
        standard_error=se,
        reference=reference,
        z_score=z_score(estimate, reference, se),
        n_paths=config.n_paths,
        horizon=config.horizon,
        seed=config.seed,
        per_path=values.tolist(),
    )
    logger.info("Sample exponent %.6f +/- %.6f (reference %.6f).", estimate, se, reference)
    return report


def _log_mean(x: np.ndarray) -> np.ndarray:
    """log of the column means of exp(x), computed stably."""
    return logsumexp(x, axis=0) - np.log(x.shape[0])


def _tail_slope(times: np.ndarray, curves: np.ndarray, fit_fraction: float) -> np.ndarray:
    """Least-squares slope over the last ``fit_fraction`` of the grid; ``curves`` is (G,) or (G, K)."""
    if times.size == 1:
        return curves[0] / times[0]
    count = min(max(int(np.ceil(fit_fraction * times.size)), 2), times.size)
    return np.polyfit(times[-count:], curves[-count:], 1)[0]


def _excess_kurtosis(x: np.ndarray) -> float:
    if x.size < 4:
        return 0.0
    moments = np.exp(x - x.max())
    if np.ptp(moments) == 0:
        return 0.0
    return float(stats.kurtosis(moments, fisher=True, bias=True))


def estimate_moment_exponent(
    model: HybridHeatModel,
    p: float | None,
    config: EstimatorConfig,
    reference: float | None = None,
) -> EstimateReport:
    """Slope of t -> log E ||u(t)||^p over the tail of the grid, with bootstrap SE.

    ``p=None`` takes the order from ``config.p``.
    """
    if p is None:
        p = config.p
    if not p > 0:
        raise NonpositiveP(f"Moment order p must be positive, got {p!r}.")
    _require_initial(model)
    grid = config.time_grid()
    samples = simulate_paths(model, config, with_noise=not config.variance_reduced)
    if config.variance_reduced:
        log_moments = np.array(
            [p * s.log_deterministic + 0.5 * p * (p - 1) * s.quadratic_variation for s in samples]
        )
    else:
        log_moments = p * np.array([s.log_norm for s in samples])

    curve = _log_mean(log_moments)
    estimate = float(_tail_slope(grid, curve, config.fit_fraction))

    rng = np.random.default_rng(np.random.SeedSequence(config.seed).spawn(config.n_paths + 1)[-1])
    boot = np.empty((config.bootstrap_resamples, grid.size))
    for b in range(config.bootstrap_resamples):
        boot[b] = _log_mean(log_moments[rng.integers(0, config.n_paths, size=config.n_paths)])
    slopes = np.atleast_1d(_tail_slope(grid, boot.T, config.fit_fraction))
    se = float(slopes.std(ddof=1))
    curve_se = boot.std(axis=0, ddof=1)

    kurtosis = _excess_kurtosis(log_moments[:, -1])
    heavy = kurtosis > config.kurtosis_threshold
    if heavy:
        logger.warning("Excess kurtosis %.1f of ||u(T)||^%g exceeds %g.", kurtosis, p, config.kurtosis_threshold)
        warnings.warn(
            f"Excess kurtosis {kurtosis:.1f} of ||u(T)||^{p:g} exceeds {config.kurtosis_threshold:g}; "
            "the log-moment estimate is unreliable.",
            HeavyTailWarning,
            stacklevel=2,
        )

    if reference is None:
        reference = lyapunov_analytic.moment_exponent(model, p)
    report = EstimateReport(
        quantity="moment_exponent",
        p=float(p),
        estimate=estimate,
        standard_error=se,
        reference=reference,
        z_score=z_score(estimate, reference, se),
        n_paths=config.n_paths,
        horizon=config.horizon,
        seed=config.seed,
        variance_reduced=config.variance_reduced,
        times=grid.tolist(),
        log_moment=curve.tolist(),
        log_moment_se=curve_se.tolist(),
        kurtosis=kurtosis,
        heavy_tail=heavy,
    )
    logger.info("Moment exponent p=%g: %.6f +/- %.6f (reference %.6f).", p, estimate, se, reference)
    return report


def convergence_table(
    model: HybridHeatModel,
    horizons,
    config: EstimatorConfig,
    p: float | None = None,
) -> list[dict]:
    """Estimate, SE and gap to the analytic value at each horizon."""
    rows = []
    for horizon in horizons:
        run = config.model_copy(update={"horizon": float(horizon), "grid": None})
        if p is None:
            report = estimate_sample_exponent(model, run)
        else:
            report = estimate_moment_exponent(model, p, run)
        rows.append(
            {
                "horizon": float(horizon),
                "estimate": report.estimate,
                "standard_error": report.standard_error,
                "reference": report.reference,
                "gap": abs(report.estimate - report.reference),
            }
        )
    return rows


def oracle_log_moment(model: HybridHeatModel, p: float, times, start_state: int = 0) -> np.ndarray:
    """Exact log E ||u(t)||^p for a single-mode initial datum, from the tilted generator.

    With u0 = c e_n, log E||u(t)||^p = p log|c| - p lambda_n t
    + log E_i exp(int_0^t g(r) ds).
    """
    _require_initial(model)
    coefficients = model.initial.coefficients
    if np.count_nonzero(coefficients) != 1:
        raise ValueError("The moment oracle needs an initial datum supported on a single mode.")
    weights = lyapunov_analytic.moment_weights(model, p)
    n = model.initial.leading_index
    ts = np.atleast_1d(np.asarray(times, dtype=float))
    growth = large_deviation.growth_oracle(model.generator, weights, ts)
    return (
        p * np.log(abs(coefficients[n - 1]))
        - p * model.basis.eigenvalues[n - 1] * ts
        + ts * growth.values[:, start_state]
    )
