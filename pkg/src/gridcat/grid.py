"""Ability grid, discretized densities, and trapezoid-rule functionals.

All integrals in the package are approximated with the composite trapezoid
rule on an equally spaced ability grid. Densities are plain nonnegative
vectors aligned to a grid and normalized so their trapezoid integral is 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError, NumericalDegeneracyError

# Floor applied inside logarithms of densities and probabilities. Keeps grid
# tails finite while perturbing integrals far below test tolerances.
DENSITY_FLOOR = 1e-300

DEFAULT_GRID_LO = -6.0
DEFAULT_GRID_HI = 6.0
DEFAULT_GRID_POINTS = 200


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.asarray(a, dtype=np.float64)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class AbilityGrid:
    """Equally spaced inclusive grid over the ability scale."""

    lo: float
    hi: float
    n_points: int
    points: np.ndarray = field(repr=False)
    step: float

    @property
    def trapezoid_weights(self) -> np.ndarray:
        """Quadrature weights: step * (1/2, 1, ..., 1, 1/2)."""
        w = getattr(self, "_weights", None)
        if w is None:
            w = np.full(self.n_points, self.step)
            w[0] *= 0.5
            w[-1] *= 0.5
            w.flags.writeable = False
            object.__setattr__(self, "_weights", w)
        return w

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AbilityGrid):
            return NotImplemented
        return (self.lo, self.hi, self.n_points) == (other.lo, other.hi, other.n_points)

    def __hash__(self) -> int:
        return hash((self.lo, self.hi, self.n_points))


def build_grid(
    lo: float = DEFAULT_GRID_LO,
    hi: float = DEFAULT_GRID_HI,
    n_points: int = DEFAULT_GRID_POINTS,
) -> AbilityGrid:
    """Construct an equally spaced ability grid with inclusive endpoints."""
    if not (lo < hi):
        raise InvalidArgumentError(f"degenerate grid range [{lo}, {hi}]")
    if n_points < 3:
        raise InvalidArgumentError(f"grid needs at least 3 points, got {n_points}")
    points = np.linspace(lo, hi, n_points)
    step = (hi - lo) / (n_points - 1)
    return AbilityGrid(
        lo=float(lo), hi=float(hi), n_points=int(n_points), points=_readonly(points), step=step
    )


def trapezoid(grid: AbilityGrid, values: np.ndarray) -> float:
    """Trapezoid-rule integral: step * (v_0/2 + v_1 + ... + v_{n-2} + v_{n-1}/2)."""
    values = np.asarray(values, dtype=np.float64)
    if values.shape != (grid.n_points,):
        raise InvalidArgumentError(
            f"expected {grid.n_points} values aligned to the grid, got shape {values.shape}"
        )
    return float(grid.trapezoid_weights @ values)


@dataclass(frozen=True)
class Density:
    """Nonnegative density vector over a grid, trapezoid-normalized to 1."""

    grid: AbilityGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", _readonly(self.values))


def normalized_density(grid: AbilityGrid, values: np.ndarray) -> Density:
    """Normalize a nonnegative vector into a Density.

    Raises NumericalDegeneracyError when the vector is identically zero.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.shape != (grid.n_points,):
        raise InvalidArgumentError(
            f"expected {grid.n_points} values aligned to the grid, got shape {values.shape}"
        )
    if np.any(values < 0):
        raise InvalidArgumentError("density values must be nonnegative")
    total = trapezoid(grid, values)
    if total <= 0.0 or not np.isfinite(total):
        raise NumericalDegeneracyError("density is zero everywhere at machine precision")
    return Density(grid=grid, values=values / total)


def gaussian_prior(grid: AbilityGrid, mean: float = 0.0, sd: float = math.sqrt(2.0)) -> Density:
    """Discretized normal density on the grid, renormalized by trapezoid rule."""
    if sd <= 0:
        raise InvalidArgumentError(f"prior sd must be positive, got {sd}")
    z = (grid.points - mean) / sd
    values = np.exp(-0.5 * z * z)
    return normalized_density(grid, values)


def uniform_density(grid: AbilityGrid) -> Density:
    """Flat density over the grid."""
    return normalized_density(grid, np.ones(grid.n_points))


def mean(d: Density) -> float:
    """Expectation of the ability under the density."""
    return trapezoid(d.grid, d.grid.points * d.values)


def variance(d: Density) -> float:
    """Central second moment; clipped at 0 against rounding."""
    m = mean(d)
    v = trapezoid(d.grid, (d.grid.points - m) ** 2 * d.values)
    return max(v, 0.0)


def sd(d: Density) -> float:
    return math.sqrt(variance(d))


def entropy(d: Density) -> float:
    """Differential entropy -∫ q log q, with 0·log 0 = 0."""
    q = d.values
    integrand = np.where(q > 0.0, -q * np.log(np.maximum(q, DENSITY_FLOOR)), 0.0)
    return trapezoid(d.grid, integrand)


def kl_divergence(p: Density, q: Density) -> float:
    """KL divergence ∫ p log(p/q) between densities on the same grid.

    q is floored at DENSITY_FLOOR inside the log so that grid tails where q
    underflows do not produce infinities.
    """
    if p.grid != q.grid:
        raise InvalidArgumentError("densities live on different grids")
    pv = p.values
    qv = np.maximum(q.values, DENSITY_FLOOR)
    integrand = np.where(pv > 0.0, pv * (np.log(np.maximum(pv, DENSITY_FLOOR)) - np.log(qv)), 0.0)
    return trapezoid(p.grid, integrand)
