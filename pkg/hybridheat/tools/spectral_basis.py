"""Dirichlet Laplacian eigenpairs and projection of the initial datum.

Two sources of eigenpairs are supported: the interval (0, L), where
lambda_n = (n pi / L)^2 and e_n(x) = sqrt(2/L) sin(n pi x / L), and
user-supplied (lambda_n, u0_n) lists for any other domain. Mode numbers n
are 1-based throughout.
"""

import csv
import logging
from collections.abc import Callable
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import (
    AllCoefficientsBelowThreshold,
    ConfigError,
    DimensionMismatch,
    InvalidLength,
    MissingEigenfunctions,
)

# Configure module-level logger
logger = logging.getLogger("spectral_basis.py")
logger.setLevel(logging.INFO)

DEFAULT_N_MODES = 64
COEFFICIENT_THRESHOLD = 1e-12
INTERVAL = "interval"
USER_SUPPLIED = "user-supplied"


@dataclass(frozen=True, eq=False)
class SpectralBasis:
    eigenvalues: np.ndarray
    domain: str = INTERVAL
    length: float | None = None

    def __post_init__(self):
        values = np.array(self.eigenvalues, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise DimensionMismatch("Eigenvalues must be a non-empty 1-D sequence.")
        if np.any(values <= 0) or np.any(np.diff(values) <= 0):
            raise ValueError("Eigenvalues must be positive and strictly increasing.")
        values.setflags(write=False)
        object.__setattr__(self, "eigenvalues", values)

    @property
    def n_modes(self) -> int:
        return self.eigenvalues.size

    @property
    def has_eigenfunctions(self) -> bool:
        return self.domain == INTERVAL

    @property
    def next_eigenvalue(self) -> float:
        """lambda_{N+1} on the interval; lambda_N (a valid lower bound) otherwise."""
        if self.domain == INTERVAL:
            return float(((self.n_modes + 1) * np.pi / self.length) ** 2)
        return float(self.eigenvalues[-1])

    def eigenfunctions(self, x) -> np.ndarray:
        """Matrix E with E[n-1, k] = e_n(x_k)."""
        if not self.has_eigenfunctions:
            raise MissingEigenfunctions("A user-supplied basis has no eigenfunction rule.")
        points = np.atleast_1d(np.asarray(x, dtype=float))
        n = np.arange(1, self.n_modes + 1)[:, None]
        return np.sqrt(2.0 / self.length) * np.sin(n * np.pi * points[None, :] / self.length)

    def eigenfunction(self, n: int, x) -> np.ndarray:
        if not self.has_eigenfunctions:
            raise MissingEigenfunctions("A user-supplied basis has no eigenfunction rule.")
        points = np.asarray(x, dtype=float)
        return np.sqrt(2.0 / self.length) * np.sin(n * np.pi * points / self.length)


@dataclass(frozen=True, eq=False)
class InitialData:
    coefficients: np.ndarray
    leading_index: int
    norm: float

    @property
    def tail_norm(self) -> float:
        """(sum over n > N of (u_n^0)^2)^(1/2), i.e. what the truncation drops at t = 0."""
        retained = float(np.sum(self.coefficients**2))
        return float(np.sqrt(max(self.norm**2 - retained, 0.0)))

    @property
    def leading_coefficient(self) -> float:
        return float(self.coefficients[self.leading_index - 1])


def interval_basis(length: float = np.pi, n_modes: int = DEFAULT_N_MODES) -> SpectralBasis:
    if not np.isfinite(length) or length <= 0:
        raise InvalidLength(f"Interval length must be positive and finite, got {length!r}.")
    if n_modes < 1:
        raise ValueError(f"n_modes must be at least 1, got {n_modes}.")
    n = np.arange(1, n_modes + 1)
    return SpectralBasis(eigenvalues=(n * np.pi / length) ** 2, domain=INTERVAL, length=float(length))


def user_basis(eigenvalues) -> SpectralBasis:
    return SpectralBasis(eigenvalues=eigenvalues, domain=USER_SUPPLIED, length=None)


def gauss_legendre(length: float, nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights mapped onto (0, length)."""
    xi, w = leggauss(nodes)
    return 0.5 * length * (xi + 1.0), 0.5 * length * w


def leading_index(coefficients) -> int:
    """Smallest 1-based n with |u_n^0| above the relative threshold."""
    c = np.abs(np.asarray(coefficients, dtype=float))
    biggest = float(c.max()) if c.size else 0.0
    if not biggest > 0 or not np.isfinite(biggest):
        raise AllCoefficientsBelowThreshold("Initial datum projects to zero; Lyapunov exponents are undefined.")
    return int(np.flatnonzero(c > COEFFICIENT_THRESHOLD * biggest)[0]) + 1


def _sample(u0: Callable, x: np.ndarray) -> np.ndarray:
    values = np.asarray(u0(x), dtype=float)
    if values.shape != x.shape:
        values = np.array([float(u0(xk)) for xk in x])
    return values


def project_initial(u0: Callable, basis: SpectralBasis, quad_nodes: int | None = None) -> InitialData:
    """u_n^0 = <u0, e_n> and ||u0|| by Gauss-Legendre quadrature on (0, L)."""
    if not basis.has_eigenfunctions:
        raise MissingEigenfunctions("Projection needs eigenfunctions; pass coefficients for user-supplied bases.")
    nodes = quad_nodes if quad_nodes is not None else 4 * basis.n_modes
    if nodes < 2 * basis.n_modes + 1:
        raise ValueError(f"quad_nodes must be at least 2*n_modes+1 = {2 * basis.n_modes + 1}, got {nodes}.")

    x, w = gauss_legendre(basis.length, nodes)
    values = _sample(u0, x)
    coefficients = basis.eigenfunctions(x) @ (w * values)
    norm = float(np.sqrt(np.sum(w * values**2)))
    n0 = leading_index(coefficients)
    logger.debug("Projected initial datum: n0=%d, ||u0||=%.6g, %d nodes.", n0, norm, nodes)
    return InitialData(coefficients=coefficients, leading_index=n0, norm=norm)


def coefficient_initial(coefficients, basis: SpectralBasis) -> InitialData:
    """Initial data given directly by its coefficients; the truncation is then exact."""
    c = np.array(coefficients, dtype=float)
    if c.ndim != 1 or c.size > basis.n_modes:
        raise DimensionMismatch(f"Expected at most {basis.n_modes} coefficients, got shape {c.shape}.")
    c = np.pad(c, (0, basis.n_modes - c.size))
    return InitialData(coefficients=c, leading_index=leading_index(c), norm=float(np.sqrt(np.sum(c**2))))


def orthonormality_defect(basis: SpectralBasis, n_check: int = 10, quad_nodes: int | None = None) -> float:
    """max |<e_m, e_n> - delta_mn| over the first ``n_check`` modes."""
    n_check = min(n_check, basis.n_modes)
    nodes = quad_nodes if quad_nodes is not None else 4 * max(n_check, 16)
    x, w = gauss_legendre(basis.length, nodes)
    e = basis.eigenfunctions(x)[:n_check]
    gram = (e * w) @ e.T
    return float(np.max(np.abs(gram - np.eye(n_check))))


def named_initial(spec, basis: SpectralBasis, quad_nodes: int | None = None) -> InitialData:
    """Resolve "sin1" (= e_1), "mode:<n>", "x(pi-x)" or a coefficient list."""
    if isinstance(spec, (list, tuple, np.ndarray)):
        return coefficient_initial(spec, basis)
    name = str(spec).strip().lower()
    if name == "sin1":
        name = "mode:1"
    if name.startswith("mode:"):
        n = int(name.split(":", 1)[1])
        if not 1 <= n <= basis.n_modes:
            raise DimensionMismatch(f"Initial mode {n} is outside 1..{basis.n_modes}.")
        return coefficient_initial(np.eye(basis.n_modes)[n - 1], basis)
    if name in ("x(pi-x)", "x(l-x)", "parabola"):
        if not basis.has_eigenfunctions:
            raise MissingEigenfunctions("The parabola preset needs the interval basis.")
        length = basis.length
        return project_initial(lambda x: x * (length - x), basis, quad_nodes)
    raise ValueError(f"Unknown initial-data preset {spec!r}.")


def load_eigenpairs_csv(path: str | Path) -> tuple[SpectralBasis, InitialData]:
    """Read user-supplied eigenpairs from a CSV with header n,lambda_n,u0_n."""
    try:
        with open(path, newline="", encoding="utf-8") as handle:
            rows = list(csv.DictReader(handle))
        modes = [int(row["n"]) for row in rows]
        eigenvalues = [float(row["lambda_n"]) for row in rows]
        coefficients = [float(row["u0_n"]) for row in rows]
    except (OSError, KeyError, ValueError) as e:
        raise ConfigError(f"Error reading eigenpairs from {path}: {e}") from e

    if modes != list(range(1, len(modes) + 1)):
        raise ConfigError(f"Eigenpair CSV {path} must list modes n = 1, 2, ... in order.")
    basis = user_basis(eigenvalues)
    logger.info("Loaded %d user-supplied eigenpairs from %s.", basis.n_modes, path)
    return basis, coefficient_initial(coefficients, basis)
