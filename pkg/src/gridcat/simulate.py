"""Batch evaluation harness: respondent generation, session replay, metrics.

For every (true ability, replicate) a complete response table is generated
once and replayed through each selector, so all selectors are compared on
identical respondents. Metrics per (selector, theta, test length) cell are
the KL divergence from the full-bank posterior to the running posterior,
the absolute error of the running mean against both the full-bank mean and
the true ability, the running posterior SD, and the union item exposure.

Seed splitting is fixed so reports are bit-identical across thread counts:
stream = SeedSequence(master_seed, spawn_key=(domain, *indices)) with
domain 0 for response tables (indexed by theta, replicate), domain 1 for
selector randomness (selector, theta, replicate), and domain 2 for
standalone exposure studies (session index).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import InvalidArgumentError
from .grid import (
    DEFAULT_GRID_HI,
    DEFAULT_GRID_LO,
    DEFAULT_GRID_POINTS,
    Density,
    build_grid,
    gaussian_prior,
    kl_divergence,
    mean,
    sd,
)
from .items import (
    ItemBank,
    ItemParameters,
    full_bank_posterior,
    grm_category_probs,
    validate_complete_responses,
)
from .selectors import SelectorKind, SelectorSpec
from .session import (
    ExposureLedger,
    StoppingRule,
    is_finished,
    next_item,
    record_items,
    start_session,
    submit_response,
)

DEFAULT_THETA_VALUES = tuple(np.arange(-3.0, 3.0 + 1e-9, 0.5).round(6))

_TABLE_DOMAIN = 0
_SELECTOR_DOMAIN = 1
_EXPOSURE_DOMAIN = 2


@dataclass(frozen=True)
class RespondentGenerator:
    """Source of one complete response vector.

    kind "model-implied" samples each item independently from the response
    model at true_theta (the M-closed regime). kind "table-replay" returns an
    externally supplied complete table, the hook for M-open data.
    """

    kind: str
    true_theta: float | None = None
    table: Mapping[int, int] | None = None
    seed: int | np.random.SeedSequence | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("model-implied", "table-replay"):
            raise InvalidArgumentError(f"unknown generator kind {self.kind!r}")
        if self.kind == "model-implied" and self.true_theta is None:
            raise InvalidArgumentError("model-implied generator needs true_theta")
        if self.kind == "table-replay" and self.table is None:
            raise InvalidArgumentError("table-replay generator needs a response table")


def generate_responses(gen: RespondentGenerator, bank: ItemBank) -> dict[int, int]:
    """One category per bank item, keyed by item id."""
    if gen.kind == "table-replay":
        records = validate_complete_responses(bank, dict(gen.table))
        return {r.item_id: r.category for r in records}
    rng = np.random.default_rng(gen.seed)
    table: dict[int, int] = {}
    for item_id in bank.item_ids:
        probs = grm_category_probs(bank.item(item_id), float(gen.true_theta))
        table[item_id] = int(rng.choice(len(probs), p=probs))
    return table


@dataclass(frozen=True)
class SimulationConfig:
    theta_values: tuple[float, ...] = DEFAULT_THETA_VALUES
    replicates: int = 100
    test_lengths: tuple[int, ...] = (5, 10, 20)
    selectors: tuple[SelectorSpec, ...] = (
        SelectorSpec(SelectorKind.FISHER),
        SelectorSpec(SelectorKind.BAYESIAN_FISHER),
        SelectorSpec(SelectorKind.GLOBAL_INFORMATION),
        SelectorSpec(SelectorKind.BAYESIAN_VARIANCE),
        SelectorSpec(SelectorKind.GREEDY_ENTROPY),
        SelectorSpec(SelectorKind.STOCHASTIC_ENTROPY),
    )
    prior_mean: float = 0.0
    prior_sd: float = math.sqrt(2.0)
    grid_lo: float = DEFAULT_GRID_LO
    grid_hi: float = DEFAULT_GRID_HI
    grid_points: int = DEFAULT_GRID_POINTS
    master_seed: int = 0

    def __post_init__(self) -> None:
        if self.replicates < 1:
            raise InvalidArgumentError("replicates must be at least 1")
        if not self.test_lengths or any(t < 1 for t in self.test_lengths):
            raise InvalidArgumentError("test_lengths must be positive")
        if not self.theta_values:
            raise InvalidArgumentError("theta_values must be nonempty")
        if not self.selectors:
            raise InvalidArgumentError("at least one selector is required")

    def to_dict(self) -> dict:
        return {
            "theta_values": list(self.theta_values),
            "replicates": self.replicates,
            "test_lengths": list(self.test_lengths),
            "selectors": [
                {"kind": s.kind.value, "tie_break": s.tie_break, "seed": s.seed}
                for s in self.selectors
            ],
            "prior_mean": self.prior_mean,
            "prior_sd": self.prior_sd,
            "grid_lo": self.grid_lo,
            "grid_hi": self.grid_hi,
            "grid_points": self.grid_points,
            "master_seed": self.master_seed,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "SimulationConfig":
        kwargs = dict(data)
        if "theta_values" in kwargs:
            kwargs["theta_values"] = tuple(float(t) for t in kwargs["theta_values"])
        if "test_lengths" in kwargs:
            kwargs["test_lengths"] = tuple(int(t) for t in kwargs["test_lengths"])
        if "selectors" in kwargs:
            specs = []
            for s in kwargs["selectors"]:
                if isinstance(s, str):
                    specs.append(SelectorSpec(SelectorKind(s)))
                else:
                    specs.append(
                        SelectorSpec(
                            SelectorKind(s["kind"]),
                            tie_break=s.get("tie_break", "lowest-id"),
                            seed=s.get("seed"),
                        )
                    )
            kwargs["selectors"] = tuple(specs)
        unknown = set(kwargs) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise InvalidArgumentError(f"unknown config fields: {sorted(unknown)}")
        return cls(**kwargs)


def ability_band(theta: float) -> str:
    """The paper-style ability bands; rejects values in no band."""
    if theta <= -1.5:
        return "low"
    if -1.0 <= theta <= 1.0:
        return "mid"
    if theta >= 1.5:
        return "high"
    raise InvalidArgumentError(f"theta {theta} falls in no ability band")


@dataclass(frozen=True)
class CellMetrics:
    """Per-session metrics at one test length."""

    kl: float
    abs_err_full: float
    abs_err_true: float
    posterior_sd: float
    items: tuple[int, ...]


def _session_checkpoints(
    bank: ItemBank,
    table: Mapping[int, int],
    spec: SelectorSpec,
    prior: Density,
    test_lengths: Sequence[int],
    rng: np.random.Generator | None,
    true_theta: float | None,
    full: Density | None = None,
) -> dict[int, CellMetrics]:
    """Play one session to max(test_lengths), capturing metrics at each length."""
    if full is None:
        full = full_bank_posterior(bank, table, prior)
    full_mean = mean(full)
    wanted = sorted(set(int(t) for t in test_lengths))
    if wanted[-1] > bank.n_items:
        raise InvalidArgumentError(
            f"test length {wanted[-1]} exceeds bank size {bank.n_items}"
        )
    state = start_session(bank, prior, spec, StoppingRule(max_items=wanted[-1]), rng=rng)
    out: dict[int, CellMetrics] = {}

    def _capture(t: int) -> None:
        m = mean(state.posterior)
        out[t] = CellMetrics(
            kl=kl_divergence(full, state.posterior),
            abs_err_full=abs(m - full_mean),
            abs_err_true=abs(m - true_theta) if true_theta is not None else math.nan,
            posterior_sd=sd(state.posterior),
            items=tuple(r.item_id for r in state.administered),
        )

    while not is_finished(state):
        item_id = next_item(state)
        if item_id is None:
            break
        submit_response(state, item_id, table[item_id])
        if state.step in wanted:
            _capture(state.step)
    for t in wanted:
        # Stopping can only trigger at max_items here, so every checkpoint
        # below the bank size is reached; guard for t == 0 style configs.
        if t not in out:
            _capture(t)
    return out


def run_cell(
    bank: ItemBank,
    gen: RespondentGenerator,
    spec: SelectorSpec,
    t: int,
    prior: Density,
    rng: np.random.Generator | None = None,
) -> CellMetrics:
    """Generate one respondent and play one session to length t."""
    table = generate_responses(gen, bank)
    if rng is None and spec.kind is SelectorKind.STOCHASTIC_ENTROPY:
        rng = np.random.default_rng(spec.seed if spec.seed is not None else gen.seed)
    checkpoints = _session_checkpoints(
        bank, table, spec, prior, [t], rng, gen.true_theta
    )
    return checkpoints[t]


@dataclass(frozen=True)
class ReportRow:
    selector: str
    theta: float
    test_length: int
    n: int
    kl_mean: float
    kl_sd: float
    abs_err_full_mean: float
    abs_err_full_sd: float
    abs_err_true_mean: float
    abs_err_true_sd: float
    posterior_sd_mean: float
    posterior_sd_sd: float
    exposure_unique: int


@dataclass(frozen=True)
class BandRow:
    selector: str
    band: str
    test_length: int
    n: int
    kl_mean: float
    kl_sd: float
    abs_err_full_mean: float
    abs_err_full_sd: float
    abs_err_true_mean: float
    abs_err_true_sd: float
    posterior_sd_mean: float
    posterior_sd_sd: float
    exposure_unique: int


@dataclass(frozen=True)
class SimulationReport:
    bank_name: str
    n_items: int
    config: SimulationConfig
    rows: tuple[ReportRow, ...]
    bands: tuple[BandRow, ...] = ()


def _mean_sd(values: np.ndarray) -> tuple[float, float]:
    if values.size == 0 or np.all(np.isnan(values)):
        return math.nan, math.nan
    m = float(np.mean(values))
    s = float(np.std(values, ddof=1)) if values.size > 1 else 0.0
    return m, s


def _aggregate(
    selector: str,
    key: float | str,
    t: int,
    cells: Sequence[CellMetrics],
    row_cls,
) -> ReportRow | BandRow:
    kl = np.array([c.kl for c in cells])
    aef = np.array([c.abs_err_full for c in cells])
    aet = np.array([c.abs_err_true for c in cells])
    psd = np.array([c.posterior_sd for c in cells])
    exposed: set[int] = set()
    for c in cells:
        exposed.update(c.items)
    kl_m, kl_s = _mean_sd(kl)
    aef_m, aef_s = _mean_sd(aef)
    aet_m, aet_s = _mean_sd(aet)
    psd_m, psd_s = _mean_sd(psd)
    return row_cls(
        selector,
        key,
        t,
        len(cells),
        kl_m,
        kl_s,
        aef_m,
        aef_s,
        aet_m,
        aet_s,
        psd_m,
        psd_s,
        len(exposed),
    )


def run_batch(
    config: SimulationConfig,
    bank: ItemBank,
    threads: int = 1,
    progress: Callable[[int, int], None] | None = None,
) -> SimulationReport:
    """Fill every (selector, theta, test length) cell with replicate aggregates.

    Deterministic given the master seed, independent of thread count: each
    work unit derives its own random streams from the documented spawn keys
    and results are merged in sorted key order.
    """
    grid = build_grid(config.grid_lo, config.grid_hi, config.grid_points)
    prior = gaussian_prior(grid, config.prior_mean, config.prior_sd)
    if max(config.test_lengths) > bank.n_items:
        raise InvalidArgumentError(
            f"test length {max(config.test_lengths)} exceeds bank size {bank.n_items}"
        )

    units = [
        (ti, rep)
        for ti in range(len(config.theta_values))
        for rep in range(config.replicates)
    ]

    def work(unit: tuple[int, int]):
        ti, rep = unit
        theta = config.theta_values[ti]
        gen = RespondentGenerator(
            "model-implied",
            true_theta=theta,
            seed=np.random.SeedSequence(
                config.master_seed, spawn_key=(_TABLE_DOMAIN, ti, rep)
            ),
        )
        table = generate_responses(gen, bank)
        full = full_bank_posterior(bank, table, prior)
        per_selector = []
        for si, spec in enumerate(config.selectors):
            rng = np.random.default_rng(
                np.random.SeedSequence(
                    config.master_seed, spawn_key=(_SELECTOR_DOMAIN, si, ti, rep)
                )
            )
            per_selector.append(
                _session_checkpoints(
                    bank, table, spec, prior, config.test_lengths, rng, theta, full=full
                )
            )
        return unit, per_selector

    results: dict[tuple[int, int], list[dict[int, CellMetrics]]] = {}
    done = 0
    if threads <= 1:
        for unit in units:
            key, value = work(unit)
            results[key] = value
            done += 1
            if progress is not None:
                progress(done, len(units))
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for key, value in pool.map(work, units):
                results[key] = value
                done += 1
                if progress is not None:
                    progress(done, len(units))

    rows: list[ReportRow] = []
    bands: list[BandRow] = []
    for si, spec in enumerate(config.selectors):
        for ti, theta in enumerate(config.theta_values):
            for t in config.test_lengths:
                cells = [
                    results[(ti, rep)][si][t] for rep in range(config.replicates)
                ]
                rows.append(_aggregate(spec.kind.value, float(theta), t, cells, ReportRow))
        for band in ("low", "mid", "high"):
            tis = [
                ti
                for ti, theta in enumerate(config.theta_values)
                if ability_band(float(theta)) == band
            ]
            if not tis:
                continue
            for t in config.test_lengths:
                cells = [
                    results[(ti, rep)][si][t]
                    for ti in tis
                    for rep in range(config.replicates)
                ]
                bands.append(_aggregate(spec.kind.value, band, t, cells, BandRow))

    return SimulationReport(
        bank_name=bank.name,
        n_items=bank.n_items,
        config=config,
        rows=tuple(rows),
        bands=tuple(bands),
    )


def _sample_from_density(d: Density, rng: np.random.Generator) -> float:
    """Inverse-CDF draw from a discretized density (linear interpolation)."""
    w = d.grid.trapezoid_weights
    cdf = np.cumsum(w * d.values)
    cdf = cdf / cdf[-1]
    u = rng.random()
    return float(np.interp(u, cdf, d.grid.points))


def exposure_study(
    bank: ItemBank,
    spec: SelectorSpec,
    prior: Density,
    t: int,
    n_sessions: int,
    theta: float | None = None,
    seed: int = 0,
) -> ExposureLedger:
    """Union item exposure across sessions at fixed or prior-resampled ability.

    theta=None redraws the true ability from the scoring prior per session;
    a fixed value reproduces the per-ability-level protocol.
    """
    ledger = ExposureLedger()
    for s in range(n_sessions):
        ss = np.random.SeedSequence(seed, spawn_key=(_EXPOSURE_DOMAIN, s))
        rng = np.random.default_rng(ss)
        true_theta = theta if theta is not None else _sample_from_density(prior, rng)
        gen = RespondentGenerator("model-implied", true_theta=true_theta, seed=ss.spawn(1)[0])
        table = generate_responses(gen, bank)
        checkpoints = _session_checkpoints(bank, table, spec, prior, [t], rng, true_theta)
        record_items(ledger, checkpoints[t].items)
    return ledger


def synthetic_bank(
    n_items: int = 50,
    n_levels: int | Sequence[int] = 2,
    seed: int = 0,
    name: str = "synthetic",
) -> ItemBank:
    """Random bank spanning the informative range of the theta sweep.

    Discriminations are log-uniform in [0.8, 2.5]; thresholds are sorted
    draws from N(0, 1.5^2).
    """
    rng = np.random.default_rng(seed)
    if isinstance(n_levels, int):
        levels = [n_levels] * n_items
    else:
        levels = [int(k) for k in n_levels]
        if len(levels) != n_items:
            raise InvalidArgumentError("n_levels sequence must match n_items")
    items = []
    for k in levels:
        a = float(np.exp(rng.uniform(np.log(0.8), np.log(2.5))))
        thresholds = np.sort(rng.normal(0.0, 1.5, size=k - 1))
        items.append(ItemParameters(discrimination=a, thresholds=tuple(thresholds)))
    return ItemBank(items=tuple(items), name=name)
