"""Durable file formats: item banks, session logs, and simulation reports.

All three schemas are versioned JSON documents. Floats are serialized with
Python's shortest round-trip representation, so save -> load -> save is
byte-identical and every 64-bit value survives exactly. Categories are
0-based in every format.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

from .errors import BankLoadError
from .grid import AbilityGrid, Density, build_grid, gaussian_prior
from .items import ItemBank, ItemParameters, ResponseRecord
from .selectors import SelectorKind, SelectorSpec
from .session import SessionState, StoppingRule, start_session, submit_response
from .simulate import BandRow, ReportRow, SimulationConfig, SimulationReport

BANK_FORMAT = "gridcat-bank"
LOG_FORMAT = "gridcat-session-log"
REPORT_FORMAT = "gridcat-report"
FORMAT_VERSION = 1

REPORT_COLUMNS = (
    "selector",
    "theta",
    "test_length",
    "n",
    "kl_mean",
    "kl_sd",
    "abs_err_full_mean",
    "abs_err_full_sd",
    "abs_err_true_mean",
    "abs_err_true_sd",
    "posterior_sd_mean",
    "posterior_sd_sd",
    "exposure_unique",
)


def _dump_json(document: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(document, indent=2) + "\n", encoding="utf-8")


def _load_json(path: str | Path, expected_format: str) -> dict:
    try:
        document = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise
    except (OSError, json.JSONDecodeError) as exc:
        raise BankLoadError(f"{path}: not a valid document ({exc})") from exc
    if not isinstance(document, dict):
        raise BankLoadError(f"{path}: expected a JSON object at top level")
    if document.get("format") != expected_format:
        raise BankLoadError(
            f"{path}: format {document.get('format')!r} is not {expected_format!r}"
        )
    if document.get("version") != FORMAT_VERSION:
        raise BankLoadError(f"{path}: unknown version {document.get('version')!r}")
    return document


# --------------------------------------------------------------------------
# Bank files
# --------------------------------------------------------------------------


def save_bank(bank: ItemBank, path: str | Path) -> None:
    items = []
    for dense_id, item in enumerate(bank.items):
        original = bank.source_ids[dense_id] if bank.source_ids else dense_id
        entry: dict = {
            "id": int(original),
            "discrimination": item.discrimination,
            "thresholds": list(item.thresholds),
            "n_levels": item.n_levels,
        }
        if item.text is not None:
            entry["text"] = item.text
        items.append(entry)
    _dump_json(
        {
            "format": BANK_FORMAT,
            "version": FORMAT_VERSION,
            "scale": bank.name,
            "items": items,
        },
        path,
    )


def load_bank(path: str | Path) -> ItemBank:
    """Load and validate a bank file.

    File ids may be sparse; items are densified to 0..N-1 in ascending
    original-id order, with the original ids kept in bank.source_ids.
    """
    document = _load_json(path, BANK_FORMAT)
    raw_items = document.get("items")
    if not isinstance(raw_items, list) or not raw_items:
        raise BankLoadError(f"{path}: bank has no items")
    seen_ids: set[int] = set()
    parsed: list[tuple[int, ItemParameters]] = []
    for entry in raw_items:
        item_id = entry.get("id")
        if not isinstance(item_id, int):
            raise BankLoadError(f"{path}: item with missing or non-integer id: {entry}")
        if item_id in seen_ids:
            raise BankLoadError(f"{path}: duplicate item id {item_id}")
        seen_ids.add(item_id)
        try:
            item = ItemParameters(
                discrimination=float(entry["discrimination"]),
                thresholds=tuple(float(t) for t in entry["thresholds"]),
                text=entry.get("text"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise BankLoadError(f"{path}: item {item_id}: {exc}") from exc
        declared = entry.get("n_levels", item.n_levels)
        if declared != item.n_levels:
            raise BankLoadError(
                f"{path}: item {item_id}: n_levels {declared} does not match "
                f"{len(item.thresholds)} thresholds"
            )
        parsed.append((item_id, item))
    parsed.sort(key=lambda pair: pair[0])
    return ItemBank(
        items=tuple(item for _, item in parsed),
        name=document.get("scale", "unnamed"),
        source_ids=tuple(item_id for item_id, _ in parsed),
    )


# --------------------------------------------------------------------------
# Session logs
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SessionLog:
    """Everything needed to replay a session bit-identically."""

    bank_name: str
    n_items: int
    grid_lo: float
    grid_hi: float
    grid_points: int
    prior_mean: float
    prior_sd: float
    selector: SelectorSpec
    max_items: int
    sd_threshold: float | None
    responses: tuple[ResponseRecord, ...]


def session_log_from_state(
    state: SessionState, prior_mean: float, prior_sd: float
) -> SessionLog:
    grid = state.posterior.grid
    return SessionLog(
        bank_name=state.bank.name,
        n_items=state.bank.n_items,
        grid_lo=grid.lo,
        grid_hi=grid.hi,
        grid_points=grid.n_points,
        prior_mean=prior_mean,
        prior_sd=prior_sd,
        selector=state.spec,
        max_items=state.rule.max_items,
        sd_threshold=state.rule.sd_threshold,
        responses=tuple(state.administered),
    )


def save_session_log(log: SessionLog, path: str | Path) -> None:
    _dump_json(
        {
            "format": LOG_FORMAT,
            "version": FORMAT_VERSION,
            "bank": {"scale": log.bank_name, "n_items": log.n_items},
            "grid": {"lo": log.grid_lo, "hi": log.grid_hi, "n_points": log.grid_points},
            "prior": {"mean": log.prior_mean, "sd": log.prior_sd},
            "selector": {
                "kind": log.selector.kind.value,
                "tie_break": log.selector.tie_break,
                "seed": log.selector.seed,
            },
            "stopping": {"max_items": log.max_items, "sd_threshold": log.sd_threshold},
            "responses": [[r.item_id, r.category] for r in log.responses],
        },
        path,
    )


def load_session_log(path: str | Path) -> SessionLog:
    document = _load_json(path, LOG_FORMAT)
    try:
        selector = SelectorSpec(
            SelectorKind(document["selector"]["kind"]),
            tie_break=document["selector"].get("tie_break", "lowest-id"),
            seed=document["selector"].get("seed"),
        )
        return SessionLog(
            bank_name=document["bank"]["scale"],
            n_items=int(document["bank"]["n_items"]),
            grid_lo=float(document["grid"]["lo"]),
            grid_hi=float(document["grid"]["hi"]),
            grid_points=int(document["grid"]["n_points"]),
            prior_mean=float(document["prior"]["mean"]),
            prior_sd=float(document["prior"]["sd"]),
            selector=selector,
            max_items=int(document["stopping"]["max_items"]),
            sd_threshold=(
                None
                if document["stopping"].get("sd_threshold") is None
                else float(document["stopping"]["sd_threshold"])
            ),
            responses=tuple(
                ResponseRecord(int(i), int(k)) for i, k in document["responses"]
            ),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise BankLoadError(f"{path}: malformed session log ({exc})") from exc


def replay_session_log(log: SessionLog, bank: ItemBank) -> SessionState:
    """Rebuild the session state by replaying the administration log."""
    if bank.name != log.bank_name or bank.n_items != log.n_items:
        raise BankLoadError(
            f"log was recorded against bank {log.bank_name!r} "
            f"({log.n_items} items), got {bank.name!r} ({bank.n_items})"
        )
    grid = build_grid(log.grid_lo, log.grid_hi, log.grid_points)
    prior = gaussian_prior(grid, log.prior_mean, log.prior_sd)
    state = start_session(
        bank,
        prior,
        log.selector,
        StoppingRule(max_items=log.max_items, sd_threshold=log.sd_threshold),
    )
    for r in log.responses:
        submit_response(state, r.item_id, r.category)
    return state


# --------------------------------------------------------------------------
# Simulation reports
# --------------------------------------------------------------------------


def _row_to_json(row: ReportRow | BandRow) -> dict:
    data = asdict(row)
    for key, value in data.items():
        if isinstance(value, float) and math.isnan(value):
            data[key] = None
    return data


def _row_from_json(data: dict, cls):
    clean = {k: (math.nan if v is None else v) for k, v in data.items()}
    return cls(**clean)


def write_report_json(report: SimulationReport, path: str | Path) -> None:
    _dump_json(
        {
            "format": REPORT_FORMAT,
            "version": FORMAT_VERSION,
            "bank": {"scale": report.bank_name, "n_items": report.n_items},
            "config": report.config.to_dict(),
            "rows": [_row_to_json(r) for r in report.rows],
            "bands": [_row_to_json(r) for r in report.bands],
        },
        path,
    )


def read_report_json(path: str | Path) -> SimulationReport:
    document = _load_json(path, REPORT_FORMAT)
    try:
        return SimulationReport(
            bank_name=document["bank"]["scale"],
            n_items=int(document["bank"]["n_items"]),
            config=SimulationConfig.from_dict(document["config"]),
            rows=tuple(_row_from_json(r, ReportRow) for r in document["rows"]),
            bands=tuple(_row_from_json(r, BandRow) for r in document["bands"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise BankLoadError(f"{path}: malformed report ({exc})") from exc


def write_report_csv(report: SimulationReport, path: str | Path) -> None:
    """One row per (selector, theta, test length), '.' decimal separator."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_COLUMNS)
        for row in report.rows:
            writer.writerow(
                [
                    row.selector,
                    repr(float(row.theta)),
                    row.test_length,
                    row.n,
                    repr(row.kl_mean),
                    repr(row.kl_sd),
                    repr(row.abs_err_full_mean),
                    repr(row.abs_err_full_sd),
                    repr(row.abs_err_true_mean),
                    repr(row.abs_err_true_sd),
                    repr(row.posterior_sd_mean),
                    repr(row.posterior_sd_sd),
                    row.exposure_unique,
                ]
            )


def read_report_csv(path: str | Path) -> tuple[ReportRow, ...]:
    rows = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != REPORT_COLUMNS:
            raise BankLoadError(f"{path}: unexpected report columns {reader.fieldnames}")
        for rec in reader:
            rows.append(
                ReportRow(
                    selector=rec["selector"],
                    theta=float(rec["theta"]),
                    test_length=int(rec["test_length"]),
                    n=int(rec["n"]),
                    kl_mean=float(rec["kl_mean"]),
                    kl_sd=float(rec["kl_sd"]),
                    abs_err_full_mean=float(rec["abs_err_full_mean"]),
                    abs_err_full_sd=float(rec["abs_err_full_sd"]),
                    abs_err_true_mean=float(rec["abs_err_true_mean"]),
                    abs_err_true_sd=float(rec["abs_err_true_sd"]),
                    posterior_sd_mean=float(rec["posterior_sd_mean"]),
                    posterior_sd_sd=float(rec["posterior_sd_sd"]),
                    exposure_unique=int(rec["exposure_unique"]),
                )
            )
    return tuple(rows)
