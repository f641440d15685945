"""Pathwise evaluation of the switching stochastic heat equation.

Along one chain path r and one Brownian realization B the solution is

    u(t, x) = S(t) * sum_n exp(-lambda_n t + A(t)) u_n^0 e_n(x),
    A(t) = int_0^t alpha(r) ds,  Q(t) = int_0^t sigma^2(r) ds,
    S(t) = exp(-Q(t)/2 + sum_j int_0^t beta_j(r) dB_j),

with sigma_i^2 = sum_j beta_ij^2. A and Q are exact on the jump skeleton;
the Brownian integrals are exact sums over segments on which beta is
constant, so nothing here is time-stepped except the Euler-Maruyama oracle.
"""

import logging
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
from scipy.special import logsumexp

from . import ctmc
from .ctmc import Generator, MarkovPath
from .errors import (
    DimensionMismatch,
    MissingEigenfunctions,
    ModeOutOfRange,
    PointOutsideDomain,
    TimeNotOnGrid,
    TimeOutOfRange,
    ZeroInitialData,
)
from .spectral_basis import InitialData, SpectralBasis, interval_basis, named_initial

# Configure module-level logger
logger = logging.getLogger("hybrid_solution.py")
logger.setLevel(logging.INFO)

GRID_MATCH_TOLERANCE = 1e-12


@dataclass(frozen=True, eq=False)
class HybridHeatModel:
    """Generator, spectral data and per-state drift alpha_i / noise rows beta_ij."""

    generator: Generator
    basis: SpectralBasis
    initial: InitialData | None
    alpha: np.ndarray
    beta: np.ndarray = None

    def __post_init__(self):
        n = self.generator.n_states
        alpha = np.array(self.alpha, dtype=float)
        if alpha.shape != (n,):
            raise DimensionMismatch(f"alpha must have {n} entries, got shape {alpha.shape}.")
        beta = np.zeros((n, 0)) if self.beta is None else np.array(self.beta, dtype=float)
        if beta.size == 0:
            beta = np.zeros((n, 0))
        elif beta.ndim == 1 and beta.size == n:
            beta = beta.reshape(n, 1)
        if beta.ndim != 2 or beta.shape[0] != n:
            raise DimensionMismatch(f"beta must be a {n} x m matrix, got shape {beta.shape}.")
        if self.initial is not None and self.initial.coefficients.shape != (self.basis.n_modes,):
            raise DimensionMismatch("Initial coefficients do not match the number of modes.")
        for array in (alpha, beta):
            array.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)

    @property
    def n_states(self) -> int:
        return self.generator.n_states

    @property
    def n_channels(self) -> int:
        return self.beta.shape[1]

    @cached_property
    def sigma2(self) -> np.ndarray:
        return np.sum(self.beta**2, axis=1)

    @cached_property
    def pi(self) -> np.ndarray:
        return ctmc.stationary_distribution(self.generator).pi

    def with_beta(self, beta) -> "HybridHeatModel":
        return replace(self, beta=beta)


def build_model(
    rates,
    alpha,
    beta=None,
    length: float = np.pi,
    n_modes: int = 64,
    initial="sin1",
    quad_nodes: int | None = None,
) -> HybridHeatModel:
    """Interval-domain model; ``initial=None`` leaves u0 unspecified (bound mode only)."""
    basis = interval_basis(length, n_modes)
    initial_data = None if initial is None else named_initial(initial, basis, quad_nodes)
    return HybridHeatModel(
        generator=ctmc.validate_generator(rates),
        basis=basis,
        initial=initial_data,
        alpha=alpha,
        beta=beta,
    )


@dataclass(frozen=True, eq=False)
class DrivingNoise:
    """Gaussian increments on the union of jump times and the declared grid.

    ``increments[k, j]`` is B_j(breakpoints[k+1]) - B_j(breakpoints[k]); beta is
    constant on every such segment.
    """

    breakpoints: np.ndarray
    increments: np.ndarray
    seed: object = field(default=None, repr=False)

    @property
    def n_channels(self) -> int:
        return self.increments.shape[1]

    @property
    def brownian_path(self) -> np.ndarray:
        """B_j at every breakpoint, shape (K+1, m)."""
        return np.vstack((np.zeros((1, self.n_channels)), np.cumsum(self.increments, axis=0)))


@dataclass(frozen=True)
class NormResult:
    value: float
    log_value: float
    tail_bound: float

    def __float__(self) -> float:
        return self.value


def sample_noise(path: MarkovPath, time_grid, n_channels: int, seed=None) -> DrivingNoise:
    """Draw one Brownian realization for a path, fixed before any evaluation."""
    grid = np.atleast_1d(np.asarray(time_grid, dtype=float))
    if np.any(np.diff(grid) <= 0):
        raise ValueError("The evaluation grid must be strictly increasing.")
    outside = grid[(grid <= 0) | (grid > path.horizon)]
    if outside.size:
        raise TimeOutOfRange(float(outside[0]), path.horizon)

    breakpoints = np.union1d(path.jump_times, grid)
    lengths = np.diff(breakpoints)
    rng = np.random.default_rng(seed)
    increments = rng.standard_normal((lengths.size, n_channels)) * np.sqrt(lengths)[:, None]
    return DrivingNoise(breakpoints=breakpoints, increments=increments, seed=seed)


def _require_initial(model: HybridHeatModel) -> InitialData:
    if model.initial is None:
        raise ZeroInitialData("The model has no deterministic initial datum.")
    return model.initial


def _log_abs_coefficients(model: HybridHeatModel) -> tuple[np.ndarray, np.ndarray]:
    c = _require_initial(model).coefficients
    nonzero = np.flatnonzero(c != 0)
    return nonzero, np.log(np.abs(c[nonzero]))


def _log_deterministic_norm(model: HybridHeatModel, path: MarkovPath, times: np.ndarray) -> np.ndarray:
    """log ||v(t)|| = A(t) + (1/2) log sum_n exp(2(log|u_n^0| - lambda_n t))."""
    nonzero, log_c = _log_abs_coefficients(model)
    lam = model.basis.eigenvalues[nonzero]
    exponents = 2.0 * (log_c[None, :] - lam[None, :] * times[:, None])
    return ctmc.integral_curve(path, model.alpha, times) + 0.5 * logsumexp(exponents, axis=1)


def _tail_bound(model: HybridHeatModel, path: MarkovPath, times: np.ndarray, log_factor: np.ndarray) -> np.ndarray:
    tail = model.initial.tail_norm
    if tail == 0.0:
        return np.zeros_like(times)
    drift = ctmc.integral_curve(path, model.alpha, times)
    return tail * np.exp(-model.basis.next_eigenvalue * times + drift + log_factor)


class PathSolution:
    """One (path, noise) realization of the model with its running integrals cached."""

    def __init__(self, model: HybridHeatModel, path: MarkovPath, noise: DrivingNoise):
        if noise.n_channels != model.n_channels:
            raise DimensionMismatch(
                f"Noise has {noise.n_channels} channels but the model has {model.n_channels}."
            )
        if path.n_states != model.n_states:
            raise DimensionMismatch("Path and model disagree on the number of states.")
        self.model = model
        self.path = path
        self.noise = noise

    @cached_property
    def _martingale_at_breakpoints(self) -> np.ndarray:
        breakpoints = self.noise.breakpoints
        k = np.searchsorted(self.path.jump_times, breakpoints[:-1], side="right") - 1
        segment_beta = self.model.beta[self.path.states[k]]
        terms = segment_beta * self.noise.increments
        return np.vstack((np.zeros((1, self.model.n_channels)), np.cumsum(terms, axis=0)))

    def _grid_index(self, times: np.ndarray) -> np.ndarray:
        breakpoints = self.noise.breakpoints
        idx = np.clip(np.searchsorted(breakpoints, times), 1, breakpoints.size - 1)
        left = breakpoints[idx - 1]
        idx = np.where(np.abs(times - left) <= np.abs(breakpoints[idx] - times), idx - 1, idx)
        mismatch = np.abs(breakpoints[idx] - times) > GRID_MATCH_TOLERANCE * np.maximum(1.0, np.abs(times))
        if np.any(mismatch):
            raise TimeNotOnGrid(float(times[mismatch][0]), self.path.horizon)
        return idx

    def drift_integral(self, times) -> np.ndarray:
        return ctmc.integral_curve(self.path, self.model.alpha, times)

    def quadratic_variation(self, times) -> np.ndarray:
        return ctmc.integral_curve(self.path, self.model.sigma2, times)

    def martingale(self, times) -> np.ndarray:
        """M_j(t) = int_0^t beta_j(r) dB_j, shape (len(times), m)."""
        ts = np.atleast_1d(np.asarray(times, dtype=float))
        return self._martingale_at_breakpoints[self._grid_index(ts)]

    def log_stochastic_factor(self, times) -> np.ndarray:
        ts = np.atleast_1d(np.asarray(times, dtype=float))
        return -0.5 * self.quadratic_variation(ts) + self.martingale(ts).sum(axis=1)

    def log_deterministic_norms(self, times) -> np.ndarray:
        return _log_deterministic_norm(self.model, self.path, np.atleast_1d(np.asarray(times, dtype=float)))

    def log_norms(self, times) -> np.ndarray:
        """log ||u(t)|| for every t in ``times``."""
        return self.log_deterministic_norms(times) + self.log_stochastic_factor(times)

    def mode_coefficients(self, t: float) -> np.ndarray:
        """z_n(t) for n = 1..N_modes."""
        ts = np.array([float(t)])
        c = _require_initial(self.model).coefficients
        exponent = -self.model.basis.eigenvalues * t + self.drift_integral(ts)[0] + self.log_stochastic_factor(ts)[0]
        return np.where(c != 0, c * np.exp(exponent), 0.0)


def deterministic_norm(model: HybridHeatModel, path: MarkovPath, t: float) -> NormResult:
    """||v(t)|| of the noiseless switching heat equation along ``path``."""
    ts = np.array([float(t)])
    log_value = float(_log_deterministic_norm(model, path, ts)[0])
    tail = float(_tail_bound(model, path, ts, np.zeros(1))[0])
    return NormResult(value=float(np.exp(log_value)), log_value=log_value, tail_bound=tail)


def mode_coefficient(model: HybridHeatModel, path: MarkovPath, noise: DrivingNoise, n: int, t: float) -> float:
    """z_n(t) = u_n^0 exp(-lambda_n t + int (alpha - sigma^2/2) ds + sum_j int beta_j dB_j)."""
    if not 1 <= n <= model.basis.n_modes:
        raise ModeOutOfRange(n, model.basis.n_modes)
    return float(PathSolution(model, path, noise).mode_coefficients(t)[n - 1])


def stochastic_factor(model: HybridHeatModel, path: MarkovPath, noise: DrivingNoise, t: float) -> float:
    return float(np.exp(PathSolution(model, path, noise).log_stochastic_factor([t])[0]))


def solution_norm(model: HybridHeatModel, path: MarkovPath, noise: DrivingNoise, t: float) -> NormResult:
    """||u(t)|| = S(t) ||v(t)||, with the mode-truncation tail bound attached."""
    solution = PathSolution(model, path, noise)
    ts = np.array([float(t)])
    log_factor = solution.log_stochastic_factor(ts)
    log_value = float(solution.log_deterministic_norms(ts)[0] + log_factor[0])
    tail = float(_tail_bound(model, path, ts, log_factor)[0])
    return NormResult(value=float(np.exp(log_value)), log_value=log_value, tail_bound=tail)


def evaluate_field(model: HybridHeatModel, path: MarkovPath, noise: DrivingNoise, t: float, x_grid) -> np.ndarray:
    """u(t, x) on interior grid points, truncated at N_modes."""
    if not model.basis.has_eigenfunctions:
        raise MissingEigenfunctions("Field evaluation needs the interval eigenfunctions.")
    x = np.atleast_1d(np.asarray(x_grid, dtype=float))
    outside = x[(x <= 0) | (x >= model.basis.length)]
    if outside.size:
        raise PointOutsideDomain(f"Point {outside[0]!r} is not inside (0, {model.basis.length!r}).")
    z = PathSolution(model, path, noise).mode_coefficients(t)
    return z @ model.basis.eigenfunctions(x)


def norm_series(solution: PathSolution, times) -> list[dict]:
    """Rows (t, norm, log_norm, log_factor) for CSV export."""
    ts = np.atleast_1d(np.asarray(times, dtype=float))
    log_factor = solution.log_stochastic_factor(ts)
    log_norm = solution.log_deterministic_norms(ts) + log_factor
    return [
        {"t": float(t), "norm": float(np.exp(ln)), "log_norm": float(ln), "log_factor": float(lf)}
        for t, ln, lf in zip(ts, log_norm, log_factor)
    ]


def euler_maruyama_norm(
    model: HybridHeatModel, path: MarkovPath, noise: DrivingNoise, step: float, t_end: float | None = None
) -> float:
    """||u(t_end)|| from Euler-Maruyama on the Galerkin system, driven by the same Brownian path.

    The partition is every jump time plus every multiple of ``step``; its
    Brownian increments are sums of the noise's own increments, so the
    oracle and the exact formula see one realization.
    """
    breakpoints = noise.breakpoints
    end = float(breakpoints[-1] if t_end is None else t_end)
    keep = breakpoints <= end * (1 + GRID_MATCH_TOLERANCE)
    ratio = breakpoints / step
    on_step = np.abs(ratio - np.round(ratio)) <= 1e-9 * np.maximum(1.0, ratio)
    is_jump = np.isin(breakpoints, path.jump_times)
    last = int(np.flatnonzero(keep)[-1])
    if abs(breakpoints[last] - end) > GRID_MATCH_TOLERANCE * max(1.0, end):
        raise TimeNotOnGrid(end, path.horizon)
    selected = np.flatnonzero(keep & (on_step | is_jump))
    if selected[-1] != last:
        selected = np.append(selected, last)

    times = breakpoints[selected]
    increments = np.diff(noise.brownian_path[selected], axis=0)
    k = np.searchsorted(path.jump_times, times[:-1], side="right") - 1
    segment_states = path.states[k]

    nonzero, _ = _log_abs_coefficients(model)
    lam = model.basis.eigenvalues[nonzero]
    z = model.initial.coefficients[nonzero].copy()
    for dt, db, state in zip(np.diff(times), increments, segment_states):
        z = z * (1.0 + (-lam + model.alpha[state]) * dt + model.beta[state] @ db)
    return float(np.sqrt(np.sum(z**2)))
