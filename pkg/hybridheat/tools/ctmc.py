"""Finite-state continuous-time Markov chains.

Generators are validated once and then shared read-only. Sample paths are
kept as jump skeletons (jump times plus visited states), so every time
integral along a path is exact.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.sparse.csgraph import connected_components

from .errors import (
    DimensionMismatch,
    NegativeOffDiagonal,
    NotIrreducible,
    RowSumNonzero,
    SingularSystem,
    TimeOutOfRange,
)

# Configure module-level logger
logger = logging.getLogger("ctmc.py")
logger.setLevel(logging.INFO)

ROW_SUM_TOLERANCE = 1e-12
STATIONARY_RESIDUAL_TOLERANCE = 1e-10


def _readonly(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Generator:
    """Validated transition-rate matrix Gamma = (gamma_ij), units 1/time."""

    rates: np.ndarray

    @property
    def n_states(self) -> int:
        return self.rates.shape[0]

    @property
    def exit_rates(self) -> np.ndarray:
        return -np.diag(self.rates)

    @property
    def scale(self) -> float:
        """max |gamma_ij|, or 1 for the all-zero single-state generator."""
        biggest = float(np.max(np.abs(self.rates)))
        return biggest if biggest > 0 else 1.0


@dataclass(frozen=True, eq=False)
class StationaryDistribution:
    pi: np.ndarray


@dataclass(frozen=True, eq=False)
class MarkovPath:
    """Right-continuous step path: r(t) = states[k] on [jump_times[k], jump_times[k+1])."""

    jump_times: np.ndarray
    states: np.ndarray
    horizon: float
    n_states: int

    def __post_init__(self):
        times = np.array(self.jump_times, dtype=float)
        states = np.array(self.states, dtype=int)
        if times.ndim != 1 or times.shape != states.shape or times.size == 0:
            raise DimensionMismatch("jump_times and states must be equal-length, non-empty 1-D sequences.")
        if times[0] != 0.0:
            raise ValueError("A path must start at time 0.")
        if np.any(np.diff(times) <= 0):
            raise ValueError("Jump times must be strictly increasing.")
        if times[-1] > self.horizon:
            raise ValueError(f"Last jump {times[-1]!r} lies beyond the horizon {self.horizon!r}.")
        if np.any(states < 0) or np.any(states >= self.n_states):
            raise ValueError(f"States must be indices in 0..{self.n_states - 1}.")
        if np.any(states[1:] == states[:-1]):
            raise ValueError("Consecutive states of a jump skeleton must differ.")
        object.__setattr__(self, "jump_times", _readonly(times))
        object.__setattr__(self, "states", _readonly(states))

    @property
    def n_jumps(self) -> int:
        return self.jump_times.size - 1

    @property
    def segment_ends(self) -> np.ndarray:
        return np.append(self.jump_times[1:], self.horizon)


@dataclass(frozen=True, eq=False)
class OccupationMeasure:
    weights: np.ndarray
    t: float
    occupation_times: np.ndarray = field(repr=False, default=None)


def validate_generator(rates) -> Generator:
    """Check sign pattern, zero row sums and irreducibility of a rate matrix."""
    matrix = np.array(rates, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or matrix.shape[0] < 1:
        raise DimensionMismatch(f"Generator must be a non-empty square matrix, got shape {matrix.shape}.")
    if not np.all(np.isfinite(matrix)):
        raise DimensionMismatch("Generator entries must be finite.")

    n = matrix.shape[0]
    off_diagonal = ~np.eye(n, dtype=bool)
    negative = np.argwhere((matrix < 0) & off_diagonal)
    if negative.size:
        i, j = (int(v) for v in negative[0])
        raise NegativeOffDiagonal(i, j, float(matrix[i, j]))

    biggest = float(np.max(np.abs(matrix)))
    tolerance = ROW_SUM_TOLERANCE * (biggest if biggest > 0 else 1.0)
    row_sums = matrix.sum(axis=1)
    bad_rows = np.flatnonzero(np.abs(row_sums) > tolerance)
    if bad_rows.size:
        row = int(bad_rows[0])
        raise RowSumNonzero(row, float(row_sums[row]), tolerance)

    if n > 1:
        adjacency = (matrix > 0) & off_diagonal
        n_components, labels = connected_components(adjacency, directed=True, connection="strong")
        if n_components > 1:
            unreachable = [int(s) for s in np.flatnonzero(labels != labels[0])]
            raise NotIrreducible(0, unreachable)

    logger.debug("Validated %d-state generator (scale %.3g).", n, biggest)
    return Generator(rates=_readonly(matrix))


def stationary_distribution(g: Generator) -> StationaryDistribution:
    """Solve pi Gamma = 0, sum(pi) = 1 with one balance equation replaced by normalization."""
    n = g.n_states
    system = g.rates.T.copy()
    system[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    try:
        pi = linalg.solve(system, rhs)
    except (linalg.LinAlgError, ValueError) as e:
        raise SingularSystem(f"Stationary system is singular: {e}") from e

    pi = pi / pi.sum()
    if np.any(pi <= 0):
        raise SingularSystem(f"Stationary solve produced non-positive entries {pi!r}.")
    residual = float(np.max(np.abs(pi @ g.rates)))
    if residual > STATIONARY_RESIDUAL_TOLERANCE * g.scale:
        raise SingularSystem(f"Stationary residual {residual:.3e} exceeds tolerance.")
    logger.debug("Stationary distribution %s (residual %.2e).", pi, residual)
    return StationaryDistribution(pi=_readonly(pi))


def _jump_tables(g: Generator) -> np.ndarray:
    """Row-wise cumulative jump probabilities, each row ending exactly at 1."""
    jumps = g.rates.copy()
    np.fill_diagonal(jumps, 0.0)
    cdf = np.cumsum(jumps, axis=1)
    totals = cdf[:, -1:]
    with np.errstate(invalid="ignore", divide="ignore"):
        cdf = np.where(totals > 0, cdf / totals, 1.0)
    return cdf


def simulate_path(g: Generator, start_state: int | None = 0, horizon: float = 1.0, seed=None) -> MarkovPath:
    """Hold-and-jump sampling of one chain realization on [0, horizon].

    ``start_state=None`` draws the initial state from the stationary
    distribution. ``seed`` is anything ``numpy.random.default_rng`` accepts.
    """
    if not np.isfinite(horizon) or horizon <= 0:
        raise TimeOutOfRange(horizon, horizon, f"Horizon must be positive and finite, got {horizon!r}.")
    rng = np.random.default_rng(seed)
    n = g.n_states
    if start_state is None:
        start_state = int(rng.choice(n, p=stationary_distribution(g).pi))
    if not 0 <= start_state < n:
        raise ValueError(f"start_state {start_state} is outside 0..{n - 1}.")

    exit_rates = g.exit_rates
    cdf = _jump_tables(g)
    times = [0.0]
    states = [int(start_state)]
    t = 0.0
    state = int(start_state)
    while exit_rates[state] > 0:
        t += rng.standard_exponential() / exit_rates[state]
        if t > horizon:
            break
        state = int(np.searchsorted(cdf[state], rng.random(), side="right"))
        times.append(t)
        states.append(state)

    return MarkovPath(jump_times=np.array(times), states=np.array(states), horizon=float(horizon), n_states=n)


def state_at(path: MarkovPath, t: float) -> int:
    if not 0 <= t <= path.horizon:
        raise TimeOutOfRange(t, path.horizon)
    k = int(np.searchsorted(path.jump_times, t, side="right")) - 1
    return int(path.states[k])


def _check_time(path: MarkovPath, t: float):
    if not 0 < t <= path.horizon:
        raise TimeOutOfRange(t, path.horizon)


def occupation_measure(path: MarkovPath, t: float) -> OccupationMeasure:
    """L_t(i): fraction of [0, t] spent in state i, read off the skeleton."""
    _check_time(path, t)
    durations = np.clip(np.minimum(path.segment_ends, t) - path.jump_times, 0.0, None)
    occupation_times = np.bincount(path.states, weights=durations, minlength=path.n_states)
    return OccupationMeasure(weights=occupation_times / t, t=float(t), occupation_times=occupation_times)


def path_integral(path: MarkovPath, f, t: float) -> float:
    """Exact integral of f(r(s)) over [0, t], i.e. t * <f, L_t>."""
    values = np.asarray(f, dtype=float)
    if values.shape != (path.n_states,):
        raise DimensionMismatch(f"Expected {path.n_states} per-state values, got shape {values.shape}.")
    measure = occupation_measure(path, t)
    return float(t * np.dot(values, measure.weights))


def integral_curve(path: MarkovPath, f, times) -> np.ndarray:
    """Exact integral of f(r(s)) over [0, t] for every t in ``times`` (t = 0 allowed)."""
    values = np.asarray(f, dtype=float)
    if values.shape != (path.n_states,):
        raise DimensionMismatch(f"Expected {path.n_states} per-state values, got shape {values.shape}.")
    ts = np.atleast_1d(np.asarray(times, dtype=float))
    outside = ts[(ts < 0) | (ts > path.horizon)]
    if outside.size:
        raise TimeOutOfRange(float(outside[0]), path.horizon)

    segment_values = values[path.states] * (path.segment_ends - path.jump_times)
    at_jumps = np.concatenate(([0.0], np.cumsum(segment_values)[:-1]))
    k = np.searchsorted(path.jump_times, ts, side="right") - 1
    return at_jumps[k] + values[path.states[k]] * (ts - path.jump_times[k])


def path_rows(path: MarkovPath) -> list[tuple[float, int]]:
    """(tau_k, state_k) rows for CSV export."""
    return [(float(tau), int(s)) for tau, s in zip(path.jump_times, path.states)]
