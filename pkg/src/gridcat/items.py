"""Graded response model items and grid-based Bayesian scoring.

Category probabilities follow the standard cumulative-logistic
parameterization: the probability of responding at or above category k is
sigma(a * (theta - b_k)), with the boundary cumulatives fixed at 1 (above
category 0) and 0 (above the top category). Categories are 0-based
everywhere, including file formats.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .errors import InvalidArgumentError, NumericalDegeneracyError
from .grid import DENSITY_FLOOR, AbilityGrid, Density, normalized_density, trapezoid


@dataclass(frozen=True)
class ItemParameters:
    """One item's discrimination and strictly increasing thresholds."""

    discrimination: float
    thresholds: tuple[float, ...]
    text: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "thresholds", tuple(float(t) for t in self.thresholds))
        if not (self.discrimination > 0):
            raise InvalidArgumentError(
                f"discrimination must be positive, got {self.discrimination}"
            )
        if len(self.thresholds) < 1:
            raise InvalidArgumentError("an item needs at least one threshold (2 levels)")
        diffs = np.diff(self.thresholds)
        if len(diffs) and not np.all(diffs > 0):
            raise InvalidArgumentError(
                f"thresholds must be strictly increasing, got {self.thresholds}"
            )

    @property
    def n_levels(self) -> int:
        return len(self.thresholds) + 1


@dataclass(frozen=True)
class ItemBank:
    """Calibrated item pool with dense integer ids 0..n_items-1."""

    items: tuple[ItemParameters, ...]
    name: str = "unnamed"
    # Original file ids when the bank was loaded from a sparse-id document.
    source_ids: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "items", tuple(self.items))
        if len(self.items) < 1:
            raise InvalidArgumentError("bank must contain at least one item")
        if self.source_ids is not None and len(self.source_ids) != len(self.items):
            raise InvalidArgumentError("source_ids length does not match items")

    @property
    def n_items(self) -> int:
        return len(self.items)

    @property
    def item_ids(self) -> range:
        return range(self.n_items)

    def item(self, item_id: int) -> ItemParameters:
        if not 0 <= item_id < self.n_items:
            raise InvalidArgumentError(f"unknown item id {item_id}")
        return self.items[item_id]

    @property
    def max_levels(self) -> int:
        return max(it.n_levels for it in self.items)


class ResponseRecord(NamedTuple):
    """One administered item and the 0-based category chosen."""

    item_id: int
    category: int


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def grm_category_probs(item: ItemParameters, theta: float | np.ndarray) -> np.ndarray:
    """Category probability mass function(s) at ability theta.

    Returns shape (n_levels,) for scalar theta, else (len(theta), n_levels).
    """
    th = np.atleast_1d(np.asarray(theta, dtype=np.float64))
    b = np.asarray(item.thresholds)
    # Cumulative P(X >= k) for k = 1..K-1, bracketed by 1 and 0.
    cum = _sigmoid(item.discrimination * (th[:, None] - b[None, :]))
    full = np.concatenate(
        [np.ones((len(th), 1)), cum, np.zeros((len(th), 1))], axis=1
    )
    probs = np.maximum(full[:, :-1] - full[:, 1:], 0.0)
    if np.isscalar(theta) or np.asarray(theta).ndim == 0:
        return probs[0]
    return probs


def grm_category_prob_derivs(item: ItemParameters, theta: float | np.ndarray) -> np.ndarray:
    """d/dtheta of each category probability, via sigma' = sigma(1-sigma)."""
    th = np.atleast_1d(np.asarray(theta, dtype=np.float64))
    a = item.discrimination
    b = np.asarray(item.thresholds)
    s = _sigmoid(a * (th[:, None] - b[None, :]))
    ds = a * s * (1.0 - s)
    # Boundary cumulatives are constant, so their derivative is 0.
    full = np.concatenate(
        [np.zeros((len(th), 1)), ds, np.zeros((len(th), 1))], axis=1
    )
    derivs = full[:, :-1] - full[:, 1:]
    if np.isscalar(theta) or np.asarray(theta).ndim == 0:
        return derivs[0]
    return derivs


def fisher_information(item: ItemParameters, theta: float | np.ndarray) -> float | np.ndarray:
    """Expected squared score sum_k P_k (d log P_k / dtheta)^2 = sum_k P_k'^2 / P_k."""
    probs = np.atleast_2d(grm_category_probs(item, theta))
    derivs = np.atleast_2d(grm_category_prob_derivs(item, theta))
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(probs > 0.0, derivs * derivs / np.maximum(probs, DENSITY_FLOOR), 0.0)
    info = terms.sum(axis=1)
    if np.isscalar(theta) or np.asarray(theta).ndim == 0:
        return float(info[0])
    return info


@lru_cache(maxsize=4096)
def _grid_likelihoods(item: ItemParameters, grid: AbilityGrid) -> tuple[np.ndarray, np.ndarray]:
    """Cached (probs, floored log probs) of shape (n_points, n_levels)."""
    probs = grm_category_probs(item, grid.points)
    probs.flags.writeable = False
    logs = np.log(np.maximum(probs, DENSITY_FLOOR))
    logs.flags.writeable = False
    return probs, logs


def posterior_update(current: Density, item: ItemParameters, category: int) -> Density:
    """Multiply a density by one item's response likelihood and renormalize.

    The product is accumulated in log space and exponentiated after
    subtracting its maximum, so long response chains cannot underflow.
    """
    if not 0 <= category < item.n_levels:
        raise InvalidArgumentError(
            f"category {category} out of range for a {item.n_levels}-level item"
        )
    grid = current.grid
    probs, logs = _grid_likelihoods(item, grid)
    like = probs[:, category]
    if not np.any((current.values > 0) & (like > 0)):
        raise NumericalDegeneracyError(
            "response pattern has zero likelihood everywhere on the grid"
        )
    log_post = np.log(np.maximum(current.values, DENSITY_FLOOR)) + logs[:, category]
    log_post -= log_post.max()
    values = np.exp(log_post)
    # Zeros of the inputs stay exact zeros rather than floor-sized dust.
    values[(current.values == 0.0) | (like == 0.0)] = 0.0
    return normalized_density(grid, values)


def validate_complete_responses(
    bank: ItemBank, responses: Iterable[ResponseRecord] | Mapping[int, int]
) -> tuple[ResponseRecord, ...]:
    """Check one response per bank item; returns records sorted by item id."""
    if isinstance(responses, Mapping):
        records = [ResponseRecord(int(i), int(k)) for i, k in responses.items()]
    else:
        records = [ResponseRecord(int(r[0]), int(r[1])) for r in responses]
    seen = {r.item_id for r in records}
    if len(seen) != len(records):
        raise InvalidArgumentError("duplicate responses for the same item")
    missing = set(bank.item_ids) - seen
    extra = seen - set(bank.item_ids)
    if missing or extra:
        raise InvalidArgumentError(
            f"responses must cover the bank exactly (missing={sorted(missing)}, "
            f"unknown={sorted(extra)})"
        )
    for r in records:
        item = bank.item(r.item_id)
        if not 0 <= r.category < item.n_levels:
            raise InvalidArgumentError(
                f"category {r.category} out of range for item {r.item_id}"
            )
    return tuple(sorted(records))


def full_bank_posterior(
    bank: ItemBank,
    responses: Iterable[ResponseRecord] | Mapping[int, int],
    prior: Density,
) -> Density:
    """Reference posterior using every item's response (fold of updates)."""
    records = validate_complete_responses(bank, responses)
    posterior = prior
    for r in records:
        posterior = posterior_update(posterior, bank.item(r.item_id), r.category)
    return posterior


def predictive_mass(item: ItemParameters, posterior: Density) -> np.ndarray:
    """Posterior-predictive category mass: ∫ P(k|theta) q(theta) dtheta per k.

    This is the model-implied marginal, the default imputation model for
    unobserved responses.
    """
    probs, _ = _grid_likelihoods(item, posterior.grid)
    w = posterior.grid.trapezoid_weights
    return (w * posterior.values) @ probs


def sorted_records(responses: Sequence[ResponseRecord]) -> tuple[ResponseRecord, ...]:
    return tuple(sorted(ResponseRecord(int(r[0]), int(r[1])) for r in responses))
