"""Item-selection criteria, the greedy/stochastic choosers, and diagnostics.

Six interchangeable criteria are provided. Four are classical baselines
(local Fisher information, posterior-averaged Fisher information, global
information, expected posterior variance); two are entropy-based: the greedy
expected-entropy criterion and its softmax sampler, which draws the next
item with probability proportional to exp(-delta) where delta is the
expected entropy of the next posterior.

Scoring is vectorized over candidate items through per-bank probability
tables cached per (bank, grid) pair.
"""

from __future__ import annotations

import enum
import math
import weakref
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable, Iterable, Literal, Sequence

import numpy as np

from .errors import ExhaustedBankError, InvalidArgumentError
from .grid import DENSITY_FLOOR, Density, entropy, kl_divergence, mean, trapezoid
from .items import (
    ItemBank,
    ItemParameters,
    ResponseRecord,
    fisher_information,
    full_bank_posterior,
    grm_category_probs,
    posterior_update,
    predictive_mass,
    validate_complete_responses,
)

if TYPE_CHECKING:
    from .session import SessionState


class SelectorKind(str, enum.Enum):
    FISHER = "fisher"
    BAYESIAN_FISHER = "bayesian-fisher"
    GLOBAL_INFORMATION = "global-information"
    BAYESIAN_VARIANCE = "bayesian-variance"
    GREEDY_ENTROPY = "greedy-entropy"
    STOCHASTIC_ENTROPY = "stochastic-entropy"


SELECTOR_KIND_NAMES = tuple(k.value for k in SelectorKind)

# Lower is better for these; the rest are maximized.
_MINIMIZING = {SelectorKind.BAYESIAN_VARIANCE, SelectorKind.GREEDY_ENTROPY}

TieBreak = Literal["lowest-id", "random"]

# Imputation hook: predictive category probabilities for an item given the
# running posterior. The default is the model-implied marginal.
ImputationModel = Callable[[ItemParameters, Density], np.ndarray]


@dataclass(frozen=True)
class SelectorSpec:
    """Tagged choice of criterion plus chooser options."""

    kind: SelectorKind
    tie_break: TieBreak = "lowest-id"
    seed: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", SelectorKind(self.kind))
        if self.tie_break not in ("lowest-id", "random"):
            raise InvalidArgumentError(f"unknown tie_break {self.tie_break!r}")


@dataclass(frozen=True)
class ItemScore:
    item_id: int
    value: float
    orientation: Literal["maximize", "minimize"]

    def __post_init__(self) -> None:
        if not math.isfinite(self.value):
            raise InvalidArgumentError(
                f"non-finite score {self.value} for item {self.item_id}"
            )


@dataclass(frozen=True)
class SelectionProbabilities:
    """Softmax sampling distribution over unadministered items."""

    item_ids: tuple[int, ...]
    probs: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "probs", np.asarray(self.probs, dtype=np.float64))
        if abs(self.probs.sum() - 1.0) > 1e-12:
            raise InvalidArgumentError("selection probabilities must sum to 1")


# --------------------------------------------------------------------------
# Cached per-bank probability tables
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class BankTables:
    """Category probabilities of every item at every grid point.

    Items with fewer levels than the bank maximum are zero-padded; padded
    categories have zero mass everywhere and drop out of all sums.
    """

    probs: np.ndarray  # (n_items, max_levels, n_points)
    log_probs: np.ndarray  # floored log of probs
    fisher: np.ndarray  # (n_items, n_points)
    n_levels: np.ndarray  # (n_items,)


_tables_cache: "weakref.WeakKeyDictionary[ItemBank, dict]" = weakref.WeakKeyDictionary()


def bank_tables(bank: ItemBank, grid) -> BankTables:
    per_grid = _tables_cache.setdefault(bank, {})
    tables = per_grid.get(grid)
    if tables is None:
        kmax = bank.max_levels
        n = grid.n_points
        probs = np.zeros((bank.n_items, kmax, n))
        fisher = np.zeros((bank.n_items, n))
        levels = np.zeros(bank.n_items, dtype=np.int64)
        for i, item in enumerate(bank.items):
            probs[i, : item.n_levels] = grm_category_probs(item, grid.points).T
            fisher[i] = fisher_information(item, grid.points)
            levels[i] = item.n_levels
        tables = BankTables(
            probs=probs,
            log_probs=np.log(np.maximum(probs, DENSITY_FLOOR)),
            fisher=fisher,
            n_levels=levels,
        )
        per_grid[grid] = tables
    return tables


# --------------------------------------------------------------------------
# Batched criterion evaluation
# --------------------------------------------------------------------------


def _require_candidate(state: "SessionState", item_id: int) -> None:
    if item_id not in state.remaining:
        raise InvalidArgumentError(f"item {item_id} is not available for selection")


def _hypothetical_moments(state: "SessionState", ids: np.ndarray):
    """Predictive masses and normalized hypothetical posteriors.

    Returns (pred, post, w) where pred is (R, K) predictive category mass,
    post is (R, K, n) the posterior after hypothetically observing each
    category, and w the quadrature weights.
    """
    grid = state.posterior.grid
    tables = bank_tables(state.bank, grid)
    w = grid.trapezoid_weights
    q = state.posterior.values
    p_cat = tables.probs[ids]  # (R, K, n)
    unnorm = p_cat * q  # broadcast over (R, K, n)
    pred = unnorm @ w  # (R, K)
    with np.errstate(invalid="ignore", divide="ignore"):
        post = np.where(pred[:, :, None] > 0.0, unnorm / pred[:, :, None], 0.0)
    return pred, post, w


def _batch_expected_entropy(state: "SessionState", ids: np.ndarray) -> np.ndarray:
    pred, post, w = _hypothetical_moments(state, ids)
    plogp = np.where(post > 0.0, post * np.log(np.maximum(post, DENSITY_FLOOR)), 0.0)
    h = -(plogp @ w)  # (R, K)
    return np.einsum("rk,rk->r", pred, h)


def _batch_expected_variance(state: "SessionState", ids: np.ndarray) -> np.ndarray:
    pred, post, w = _hypothetical_moments(state, ids)
    theta = state.posterior.grid.points
    m1 = post @ (w * theta)
    m2 = post @ (w * theta * theta)
    var = np.maximum(m2 - m1 * m1, 0.0)
    return np.einsum("rk,rk->r", pred, var)


def _batch_global_information(state: "SessionState", ids: np.ndarray) -> np.ndarray:
    pred, post, w = _hypothetical_moments(state, ids)
    q = np.maximum(state.posterior.values, DENSITY_FLOOR)
    ratio_log = np.where(
        post > 0.0, np.log(np.maximum(post, DENSITY_FLOOR)) - np.log(q), 0.0
    )
    d_cont = (post * ratio_log) @ w  # (R, K) KL(post_k || post)
    theta_hat = mean(state.posterior)
    values = np.empty(len(ids))
    for r, item_id in enumerate(ids):
        item = state.bank.item(int(item_id))
        k = item.n_levels
        p = pred[r, :k]
        p_hat = np.maximum(grm_category_probs(item, theta_hat), DENSITY_FLOOR)
        d_disc = float(
            np.sum(np.where(p > 0.0, p * (np.log(np.maximum(p, DENSITY_FLOOR)) - np.log(p_hat)), 0.0))
        )
        values[r] = float(p @ d_cont[r, :k]) + d_disc
    return values


def _batch_scores(state: "SessionState", kind: SelectorKind, ids: np.ndarray) -> np.ndarray:
    if kind is SelectorKind.FISHER:
        theta_hat = mean(state.posterior)
        return np.array(
            [fisher_information(state.bank.item(int(i)), theta_hat) for i in ids]
        )
    if kind is SelectorKind.BAYESIAN_FISHER:
        grid = state.posterior.grid
        tables = bank_tables(state.bank, grid)
        wq = grid.trapezoid_weights * state.posterior.values
        return tables.fisher[ids] @ wq
    if kind is SelectorKind.GLOBAL_INFORMATION:
        return _batch_global_information(state, ids)
    if kind is SelectorKind.BAYESIAN_VARIANCE:
        return _batch_expected_variance(state, ids)
    if kind in (SelectorKind.GREEDY_ENTROPY, SelectorKind.STOCHASTIC_ENTROPY):
        return _batch_expected_entropy(state, ids)
    raise InvalidArgumentError(f"unknown selector kind {kind}")


def _candidate_ids(state: "SessionState") -> np.ndarray:
    return np.array(sorted(state.remaining), dtype=np.int64)


# --------------------------------------------------------------------------
# Per-item criterion surface
# --------------------------------------------------------------------------


def score_fisher(state: "SessionState", item_id: int) -> ItemScore:
    """Fisher information at the posterior-mean ability estimate."""
    _require_candidate(state, item_id)
    value = fisher_information(state.bank.item(item_id), mean(state.posterior))
    return ItemScore(item_id, float(value), "maximize")


def score_bayesian_fisher(state: "SessionState", item_id: int) -> ItemScore:
    """Fisher information averaged over the current ability posterior."""
    _require_candidate(state, item_id)
    grid = state.posterior.grid
    info = fisher_information(state.bank.item(item_id), grid.points)
    value = trapezoid(grid, info * state.posterior.values)
    return ItemScore(item_id, float(value), "maximize")


def score_global_information(state: "SessionState", item_id: int) -> ItemScore:
    """Global information, computed via its KL decomposition.

    The value is the expected KL from the updated to the current posterior
    plus the discrete KL between the predictive mass and the plug-in mass at
    the posterior mean. Equality with the direct double-integral definition
    is enforced by test, see global_information_direct.
    """
    _require_candidate(state, item_id)
    value = _batch_global_information(state, np.array([item_id]))[0]
    return ItemScore(item_id, float(value), "maximize")


def global_information_direct(posterior: Density, item: ItemParameters, theta_hat: float) -> float:
    """Direct definition: ∫ q(theta) sum_k P_k(theta) log(P_k(theta)/P_k(theta_hat))."""
    grid = posterior.grid
    probs = grm_category_probs(item, grid.points)  # (n, K)
    p_hat = np.maximum(grm_category_probs(item, theta_hat), DENSITY_FLOOR)
    inner = np.where(
        probs > 0.0,
        probs * (np.log(np.maximum(probs, DENSITY_FLOOR)) - np.log(p_hat)[None, :]),
        0.0,
    ).sum(axis=1)
    return trapezoid(grid, posterior.values * inner)


def score_bayesian_variance(state: "SessionState", item_id: int) -> ItemScore:
    """Predictive-weighted expected posterior variance after the item."""
    _require_candidate(state, item_id)
    value = _batch_expected_variance(state, np.array([item_id]))[0]
    return ItemScore(item_id, float(value), "minimize")


def score_entropy_criterion(
    state: "SessionState",
    item_id: int,
    imputation: ImputationModel | None = None,
) -> ItemScore:
    """Expected entropy of the next posterior under the imputation model.

    With the default model-implied marginal this is bounded above by the
    current posterior entropy. A custom imputation model receives
    (item, posterior) and must return a probability vector over categories.
    """
    _require_candidate(state, item_id)
    if imputation is None:
        value = _batch_expected_entropy(state, np.array([item_id]))[0]
        return ItemScore(item_id, float(value), "minimize")
    item = state.bank.item(item_id)
    pi_star = np.asarray(imputation(item, state.posterior), dtype=np.float64)
    if pi_star.shape != (item.n_levels,):
        raise InvalidArgumentError(
            f"imputation model returned shape {pi_star.shape}, expected ({item.n_levels},)"
        )
    value = 0.0
    for k in range(item.n_levels):
        if pi_star[k] > 0.0:
            value += pi_star[k] * entropy(posterior_update(state.posterior, item, k))
    return ItemScore(item_id, float(value), "minimize")


def model_implied_marginal(item: ItemParameters, posterior: Density) -> np.ndarray:
    """Default imputation model pi*: the posterior-predictive mass."""
    return predictive_mass(item, posterior)


_SCORERS = {
    SelectorKind.FISHER: score_fisher,
    SelectorKind.BAYESIAN_FISHER: score_bayesian_fisher,
    SelectorKind.GLOBAL_INFORMATION: score_global_information,
    SelectorKind.BAYESIAN_VARIANCE: score_bayesian_variance,
    SelectorKind.GREEDY_ENTROPY: score_entropy_criterion,
    SelectorKind.STOCHASTIC_ENTROPY: score_entropy_criterion,
}


def score_item(state: "SessionState", kind: SelectorKind, item_id: int) -> ItemScore:
    return _SCORERS[SelectorKind(kind)](state, item_id)


# --------------------------------------------------------------------------
# Choosers
# --------------------------------------------------------------------------


def stochastic_weights(
    item_ids: Sequence[int], deltas: Sequence[float]
) -> SelectionProbabilities:
    """Softmax of -delta over the candidate items.

    The minimum delta is subtracted before exponentiation so banks with
    extreme items cannot overflow.
    """
    ids = tuple(int(i) for i in item_ids)
    d = np.asarray(deltas, dtype=np.float64)
    if d.size == 0:
        raise InvalidArgumentError("cannot form selection probabilities over zero items")
    if d.shape != (len(ids),):
        raise InvalidArgumentError("item_ids and deltas must have equal length")
    if not np.all(np.isfinite(d)):
        raise InvalidArgumentError("non-finite expected-entropy value in softmax input")
    shifted = d - d.min()
    weights = np.exp(-shifted)
    return SelectionProbabilities(item_ids=ids, probs=weights / weights.sum())


def _rng_for(spec: SelectorSpec, rng: np.random.Generator | None) -> np.random.Generator:
    if rng is not None:
        return rng
    if spec.seed is not None:
        return np.random.default_rng(spec.seed)
    raise InvalidArgumentError(
        f"selector {spec.kind.value} needs a random source: pass an rng or set spec.seed"
    )


def select_next(
    state: "SessionState",
    spec: SelectorSpec,
    rng: np.random.Generator | None = None,
) -> int:
    """Choose the next item among the unadministered ones.

    Greedy kinds take the best criterion value with the spec's tie-break
    rule; the stochastic kind makes one multinomial draw from the softmax
    weights. Deterministic given (state, spec, rng state).
    """
    ids = _candidate_ids(state)
    if ids.size == 0:
        raise ExhaustedBankError("no items remain in the session")
    values = _batch_scores(state, spec.kind, ids)
    if not np.all(np.isfinite(values)):
        bad = ids[~np.isfinite(values)]
        raise InvalidArgumentError(f"non-finite criterion value for items {bad.tolist()}")

    if spec.kind is SelectorKind.STOCHASTIC_ENTROPY:
        weights = stochastic_weights(ids.tolist(), values)
        gen = _rng_for(spec, rng)
        choice = gen.choice(len(ids), p=weights.probs)
        return int(ids[choice])

    oriented = -values if spec.kind in _MINIMIZING else values
    best = oriented.max()
    tied = ids[oriented == best]
    if len(tied) == 1 or spec.tie_break == "lowest-id":
        return int(tied[0])
    gen = _rng_for(spec, rng)
    return int(gen.choice(tied))


# --------------------------------------------------------------------------
# Leave-one-out diagnostic identity
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class LooIdentityTerms:
    """Terms relating the next-step discrepancy to leave-one-out quantities.

    combined() reconstructs D(full || posterior after x_t plus item i). The
    full-posterior entropy cancels against the cross-entropy to the LOO
    posterior (which is the entropy plus loo_divergence), leaving
    running_divergence - loo_divergence + log_predictive_ratio.
    """

    running_divergence: float  # D(full || running at t)
    full_entropy: float  # S[full]
    loo_divergence: float  # D(full || leave-one-out)
    log_predictive_ratio: float  # log p_t(x_i) - log p_loo(x_i)

    @property
    def loo_cross_entropy(self) -> float:
        return self.full_entropy + self.loo_divergence

    def combined(self) -> float:
        return (
            self.running_divergence
            + self.full_entropy
            - self.loo_cross_entropy
            + self.log_predictive_ratio
        )


def loo_identity_terms(
    bank: ItemBank,
    full_responses: Iterable[ResponseRecord],
    prior: Density,
    item_id: int,
    observed: Sequence[ResponseRecord] = (),
) -> LooIdentityTerms:
    """Evaluate the leave-one-out decomposition for one candidate item.

    observed is the running response set x_t; it must be a subset of the
    full response table and must not already contain the candidate item.
    """
    records = validate_complete_responses(bank, full_responses)
    by_id = {r.item_id: r.category for r in records}
    observed = tuple(ResponseRecord(int(r[0]), int(r[1])) for r in observed)
    for r in observed:
        if by_id.get(r.item_id) != r.category:
            raise InvalidArgumentError(
                f"observed response {r} disagrees with the full response table"
            )
    if item_id in {r.item_id for r in observed}:
        raise InvalidArgumentError(f"item {item_id} is already observed at step t")
    item = bank.item(item_id)
    x_i = by_id[item_id]

    full = full_bank_posterior(bank, records, prior)
    running = prior
    for r in observed:
        running = posterior_update(running, bank.item(r.item_id), r.category)
    loo = prior
    for r in records:
        if r.item_id != item_id:
            loo = posterior_update(loo, bank.item(r.item_id), r.category)

    p_t = float(predictive_mass(item, running)[x_i])
    p_loo = float(predictive_mass(item, loo)[x_i])
    return LooIdentityTerms(
        running_divergence=kl_divergence(full, running),
        full_entropy=entropy(full),
        loo_divergence=kl_divergence(full, loo),
        log_predictive_ratio=math.log(max(p_t, DENSITY_FLOOR))
        - math.log(max(p_loo, DENSITY_FLOOR)),
    )
