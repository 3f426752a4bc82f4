"""Shared fixtures and helpers for the test suite."""

import math

import numpy as np
import pytest

from gridcat import (
    SelectorKind,
    SelectorSpec,
    StoppingRule,
    build_grid,
    gaussian_prior,
)
from gridcat.items import ItemBank, ItemParameters
from gridcat.session import SessionState


@pytest.fixture(scope="session")
def grid():
    return build_grid()


@pytest.fixture(scope="session")
def std_prior(grid):
    return gaussian_prior(grid, 0.0, 1.0)


@pytest.fixture(scope="session")
def scoring_prior(grid):
    return gaussian_prior(grid, 0.0, math.sqrt(2.0))


def random_item(rng: np.random.Generator, n_levels: int = 2) -> ItemParameters:
    """Item drawn from the synthetic-bank parameter ranges."""
    a = float(np.exp(rng.uniform(np.log(0.8), np.log(2.5))))
    thresholds = np.sort(rng.normal(0.0, 1.5, size=n_levels - 1))
    return ItemParameters(discrimination=a, thresholds=tuple(thresholds))


def random_bank(rng: np.random.Generator, n_items: int, max_levels: int = 4) -> ItemBank:
    items = tuple(
        random_item(rng, int(rng.integers(2, max_levels + 1))) for _ in range(n_items)
    )
    return ItemBank(items=items, name="random")


def make_state(bank, prior, posterior=None, administered=(), kind=SelectorKind.GREEDY_ENTROPY):
    """Session state with an arbitrary posterior, for selector-level tests."""
    administered = list(administered)
    used = {r[0] for r in administered}
    return SessionState(
        bank=bank,
        prior=prior,
        spec=SelectorSpec(kind),
        rule=StoppingRule(max_items=bank.n_items),
        posterior=posterior if posterior is not None else prior,
        administered=administered,
        remaining=set(bank.item_ids) - used,
        rng=None,
    )
