"""Adaptive-test session state machine, stopping rules, exposure ledger."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError
from .grid import Density, entropy, mean, sd, variance
from .items import ItemBank, ResponseRecord, posterior_update
from .selectors import SelectorKind, SelectorSpec, select_next


@dataclass(frozen=True)
class StoppingRule:
    """Maximum test length plus an optional posterior-SD threshold."""

    max_items: int
    sd_threshold: float | None = None

    def __post_init__(self) -> None:
        if self.max_items < 1:
            raise InvalidArgumentError("max_items must be at least 1")
        if self.sd_threshold is not None and self.sd_threshold <= 0:
            raise InvalidArgumentError("sd_threshold must be positive")


@dataclass
class SessionState:
    """One respondent's test in progress.

    Owned by a single logical flow; the posterior is always the prior folded
    over the administered responses and is recomputable from them.
    """

    bank: ItemBank
    prior: Density
    spec: SelectorSpec
    rule: StoppingRule
    posterior: Density
    administered: list[ResponseRecord] = field(default_factory=list)
    remaining: set[int] = field(default_factory=set)
    rng: np.random.Generator | None = None

    @property
    def step(self) -> int:
        return len(self.administered)


def start_session(
    bank: ItemBank,
    prior: Density,
    spec: SelectorSpec,
    rule: StoppingRule,
    rng: np.random.Generator | None = None,
) -> SessionState:
    """Fresh session: nothing administered, posterior equals the prior."""
    if rule.max_items > bank.n_items:
        raise InvalidArgumentError(
            f"max_items {rule.max_items} exceeds bank size {bank.n_items}"
        )
    if rng is None and spec.seed is not None:
        rng = np.random.default_rng(spec.seed)
    return SessionState(
        bank=bank,
        prior=prior,
        spec=spec,
        rule=rule,
        posterior=prior,
        administered=[],
        remaining=set(bank.item_ids),
        rng=rng,
    )


def is_finished(state: SessionState) -> bool:
    if state.step >= state.rule.max_items:
        return True
    if state.rule.sd_threshold is not None and sd(state.posterior) <= state.rule.sd_threshold:
        return True
    return not state.remaining


def next_item(state: SessionState) -> int | None:
    """Propose the next item, or None once a stopping condition holds."""
    if is_finished(state):
        return None
    return select_next(state, state.spec, state.rng)


def submit_response(state: SessionState, item_id: int, category: int) -> SessionState:
    """Record a response, update the posterior, and advance one step.

    The library accepts any unadministered item so fixed response tables can
    be replayed; the HTTP service additionally enforces proposed-item-only.
    """
    if item_id not in state.remaining:
        if any(r.item_id == item_id for r in state.administered):
            raise InvalidArgumentError(f"item {item_id} was already administered")
        raise InvalidArgumentError(f"unknown item id {item_id}")
    item = state.bank.item(item_id)
    if not 0 <= category < item.n_levels:
        raise InvalidArgumentError(
            f"category {category} out of range for item {item_id} "
            f"({item.n_levels} levels)"
        )
    state.posterior = posterior_update(state.posterior, item, category)
    state.administered.append(ResponseRecord(item_id, category))
    state.remaining.discard(item_id)
    return state


def recompute_posterior(state: SessionState) -> Density:
    """Fold the prior over the administration log (the source of truth)."""
    posterior = state.prior
    for r in state.administered:
        posterior = posterior_update(posterior, state.bank.item(r.item_id), r.category)
    return posterior


def estimate(state: SessionState) -> dict:
    """Summary statistics of the current posterior."""
    return {
        "mean": mean(state.posterior),
        "sd": sd(state.posterior),
        "entropy": entropy(state.posterior),
        "step": state.step,
        "density": state.posterior,
    }


@dataclass
class ExposureLedger:
    """How many sessions each item appeared in, across finished sessions."""

    counts: dict[int, int] = field(default_factory=dict)
    sessions: int = 0


def record_session(ledger: ExposureLedger, state: SessionState) -> ExposureLedger:
    for r in state.administered:
        ledger.counts[r.item_id] = ledger.counts.get(r.item_id, 0) + 1
    ledger.sessions += 1
    return ledger


def record_items(ledger: ExposureLedger, item_ids) -> ExposureLedger:
    """Ledger update from a bare item-id trajectory (used by the simulator)."""
    for item_id in item_ids:
        ledger.counts[int(item_id)] = ledger.counts.get(int(item_id), 0) + 1
    ledger.sessions += 1
    return ledger


def unique_exposed(ledger: ExposureLedger) -> int:
    return sum(1 for c in ledger.counts.values() if c > 0)


def merge_ledgers(a: ExposureLedger, b: ExposureLedger) -> ExposureLedger:
    """Componentwise sum, for combining per-thread ledgers."""
    counts = dict(a.counts)
    for item_id, c in b.counts.items():
        counts[item_id] = counts.get(item_id, 0) + c
    return ExposureLedger(counts=counts, sessions=a.sessions + b.sessions)


__all__ = [
    "ExposureLedger",
    "SelectorKind",
    "SelectorSpec",
    "SessionState",
    "StoppingRule",
    "estimate",
    "is_finished",
    "merge_ledgers",
    "next_item",
    "record_items",
    "record_session",
    "recompute_posterior",
    "start_session",
    "submit_response",
    "unique_exposed",
]
