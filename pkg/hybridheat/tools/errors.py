"""Exceptions raised by the hybridheat tools.

Every error derives from ``HybridHeatError`` and from the closest builtin, so
callers can catch either ``NotIrreducible`` or plain ``ValueError``.
"""


class HybridHeatError(Exception):
    """Base class for all hybridheat errors."""


# Generator validation


class GeneratorError(HybridHeatError, ValueError):
    """A rate matrix is not a valid irreducible generator."""


class NegativeOffDiagonal(GeneratorError):
    def __init__(self, row: int, col: int, value: float):
        self.row = row
        self.col = col
        self.value = value
        super().__init__(
            f"Off-diagonal rate gamma[{row}][{col}] = {value!r} is negative."
        )


class RowSumNonzero(GeneratorError):
    def __init__(self, row: int, total: float, tolerance: float):
        self.row = row
        self.total = total
        self.tolerance = tolerance
        super().__init__(
            f"Row {row} sums to {total!r} (tolerance {tolerance:.3e}); generator rows must sum to 0."
        )


class NotIrreducible(GeneratorError):
    def __init__(self, row: int, unreachable: list[int]):
        self.row = row
        self.unreachable = unreachable
        super().__init__(
            f"Chain is not irreducible: from state {row} the states {unreachable} "
            "cannot be reached (or cannot return)."
        )


class SingularSystem(HybridHeatError, ArithmeticError):
    """The augmented stationary system could not be solved."""


class DimensionMismatch(HybridHeatError, ValueError):
    """Array shapes disagree with the number of states, modes or channels."""


class NotAProbabilityVector(HybridHeatError, ValueError):
    """A measure has negative entries or does not sum to one."""


# Time and space


class TimeOutOfRange(HybridHeatError, ValueError):
    def __init__(self, t: float, horizon: float, message: str | None = None):
        self.t = t
        self.horizon = horizon
        super().__init__(message or f"Time {t!r} is outside (0, {horizon!r}].")


class TimeNotOnGrid(TimeOutOfRange):
    """The driving noise was not sampled at the requested time."""

    def __init__(self, t: float, horizon: float):
        super().__init__(
            t, horizon, f"Time {t!r} is not on the declared evaluation grid of the driving noise."
        )


class InvalidLength(HybridHeatError, ValueError):
    """Interval length is not a positive finite number."""


class PointOutsideDomain(HybridHeatError, ValueError):
    """A spatial point lies on or outside the domain boundary."""


class MissingEigenfunctions(HybridHeatError, ValueError):
    """A user-supplied basis carries eigenvalues only; fields cannot be evaluated."""


class ModeOutOfRange(HybridHeatError, IndexError):
    def __init__(self, n: int, n_modes: int):
        self.n = n
        self.n_modes = n_modes
        super().__init__(f"Mode {n} is outside 1..{n_modes}.")


# Initial data and parameters


class AllCoefficientsBelowThreshold(HybridHeatError, ValueError):
    """The initial datum projects to (numerical) zero."""


class ZeroInitialData(HybridHeatError, ValueError):
    """Exact exponents need a deterministic, nonzero initial datum."""


class NonpositiveRates(HybridHeatError, ValueError):
    """Two-state switching rates must be strictly positive."""


class NonpositiveP(HybridHeatError, ValueError):
    """Moment order p must be strictly positive."""


class NonpositiveQ(HybridHeatError, ValueError):
    """The rate ratio q must be strictly positive."""


# Numerical agreement


class PowerIterationStalled(HybridHeatError, RuntimeError):
    def __init__(self, iterations: int, last_change: float):
        self.iterations = iterations
        self.last_change = last_change
        super().__init__(
            f"Power iteration did not converge in {iterations} iterations "
            f"(last relative change {last_change:.3e})."
        )


class AgreementFailure(HybridHeatError, RuntimeError):
    def __init__(self, lambda_direct: float, lambda_eigen: float, gap: float, data: dict | None = None):
        self.lambda_direct = lambda_direct
        self.lambda_eigen = lambda_eigen
        self.gap = gap
        self.data = data or {}
        super().__init__(
            f"Variational supremum {lambda_direct!r} and principal eigenvalue "
            f"{lambda_eigen!r} disagree by {gap:.3e}."
        )


class ConfigError(HybridHeatError, ValueError):
    """Invalid or unreadable model configuration."""


class HeavyTailWarning(UserWarning):
    """Sample kurtosis of ||u(t)||^p is too large for a reliable log-moment estimate."""
