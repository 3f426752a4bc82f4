"""Command-line entry points: simulate, score, validate-bank, serve.

Exit codes are stable: 0 success, 2 configuration error, 3 bank error,
4 bind failure. The GRIDCAT_BANK_DIR environment variable names a default
directory for resolving bank paths; when no bank is given, the bundled
synthetic 50-item bank is used.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from importlib import resources
from pathlib import Path

from .bankio import (
    load_bank,
    write_report_csv,
    write_report_json,
)
from .errors import BankLoadError, GridcatError, InvalidArgumentError
from .grid import build_grid, entropy, gaussian_prior, mean, sd
from .items import ItemBank, full_bank_posterior, posterior_update
from .selectors import SELECTOR_KIND_NAMES, SelectorKind, SelectorSpec
from .session import StoppingRule
from .simulate import SimulationConfig, run_batch

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BANK = 3
EXIT_BIND = 4

BUNDLED_BANK = "synthetic-50.json"


def _resolve_bank_path(bank_arg: str | None) -> Path:
    if bank_arg is None:
        with resources.as_file(
            resources.files("gridcat").joinpath("banks", BUNDLED_BANK)
        ) as p:
            return Path(p)
    path = Path(bank_arg)
    if path.exists():
        return path
    bank_dir = os.environ.get("GRIDCAT_BANK_DIR")
    if bank_dir and not path.is_absolute():
        candidate = Path(bank_dir) / path
        if candidate.exists():
            return candidate
    raise FileNotFoundError(bank_arg)


def _load_bank_or_fail(bank_arg: str | None) -> ItemBank:
    try:
        path = _resolve_bank_path(bank_arg)
        return load_bank(path)
    except FileNotFoundError as exc:
        raise BankLoadError(f"bank file not found: {exc}") from exc


def _parse_float_list(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _parse_int_list(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v.strip())


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridcat",
        description="Grid-quadrature adaptive testing engine",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run the batch evaluation protocol")
    sim.add_argument("--bank", help="bank file (default: bundled synthetic bank)")
    sim.add_argument("--config", help="JSON config file; flags override its values")
    sim.add_argument("--out", default="gridcat-report", help="output directory")
    sim.add_argument("--seed", type=int, help="master seed")
    sim.add_argument("--threads", type=int, default=1)
    sim.add_argument("--theta", type=_parse_float_list, help="comma-separated sweep")
    sim.add_argument("--replicates", type=int)
    sim.add_argument("--test-lengths", type=_parse_int_list, help="comma-separated")
    sim.add_argument(
        "--selectors",
        help=f"comma-separated kinds from: {', '.join(SELECTOR_KIND_NAMES)}",
    )
    sim.add_argument("--prior-mean", type=float)
    sim.add_argument("--prior-sd", type=float)
    sim.add_argument("--grid-lo", type=float)
    sim.add_argument("--grid-hi", type=float)
    sim.add_argument("--grid-points", type=int)
    sim.add_argument("--no-figures", action="store_true", help="skip PNG rendering")

    score = sub.add_parser("score", help="score one respondent's responses")
    score.add_argument("--bank", help="bank file")
    score.add_argument("--responses", required=True, help="JSON response file")
    score.add_argument("--prior-mean", type=float, default=0.0)
    score.add_argument("--prior-sd", type=float, default=math.sqrt(2.0))
    score.add_argument("--grid-lo", type=float, default=-6.0)
    score.add_argument("--grid-hi", type=float, default=6.0)
    score.add_argument("--grid-points", type=int, default=200)

    val = sub.add_parser("validate-bank", help="load a bank and report its shape")
    val.add_argument("bank", help="bank file")

    serve = sub.add_parser("serve", help="serve the live session API")
    serve.add_argument("--bank", help="bank file")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--selector", default=SelectorKind.STOCHASTIC_ENTROPY.value)
    serve.add_argument("--max-items", type=int)
    serve.add_argument("--sd-threshold", type=float)
    serve.add_argument("--prior-mean", type=float, default=0.0)
    serve.add_argument("--prior-sd", type=float, default=math.sqrt(2.0))
    serve.add_argument("--cors-origin", action="append", default=None)
    serve.add_argument("--session-log-dir", help="persist session logs here")

    return parser


def _merge_sim_config(args: argparse.Namespace) -> SimulationConfig:
    data: dict = {}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidArgumentError(f"cannot read config {args.config}: {exc}")
    overrides = {
        "theta_values": args.theta,
        "replicates": args.replicates,
        "test_lengths": args.test_lengths,
        "prior_mean": args.prior_mean,
        "prior_sd": args.prior_sd,
        "grid_lo": args.grid_lo,
        "grid_hi": args.grid_hi,
        "grid_points": args.grid_points,
        "master_seed": args.seed,
    }
    if args.selectors:
        try:
            overrides["selectors"] = [
                {"kind": SelectorKind(k.strip()).value}
                for k in args.selectors.split(",")
                if k.strip()
            ]
        except ValueError as exc:
            raise InvalidArgumentError(
                f"{exc}; valid kinds: {', '.join(SELECTOR_KIND_NAMES)}"
            )
    for key, value in overrides.items():
        if value is not None:
            data[key] = value
    return SimulationConfig.from_dict(data)


def cmd_simulate(args: argparse.Namespace) -> int:
    try:
        config = _merge_sim_config(args)
    except (InvalidArgumentError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        bank = _load_bank_or_fail(args.bank)
    except BankLoadError as exc:
        print(f"bank error: {exc}", file=sys.stderr)
        return EXIT_BANK

    total_units = len(config.theta_values) * config.replicates
    stride = max(1, total_units // 20)

    def progress(done: int, total: int) -> None:
        if done % stride == 0 or done == total:
            print(f"progress: {done}/{total} respondents", file=sys.stderr)

    try:
        report = run_batch(config, bank, threads=args.threads, progress=progress)
    except InvalidArgumentError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    for row in report.rows:
        print(
            f"cell selector={row.selector} theta={row.theta:+.2f} t={row.test_length} "
            f"kl={row.kl_mean:.4f} abs_err={row.abs_err_full_mean:.4f} "
            f"sd={row.posterior_sd_mean:.4f} exposed={row.exposure_unique}",
            file=sys.stderr,
        )

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_report_csv(report, out / "report.csv")
    write_report_json(report, out / "report.json")
    written = [out / "report.csv", out / "report.json"]
    if not args.no_figures:
        from .plots import render_report_figures

        written.extend(render_report_figures(report, out))
    for path in written:
        print(path)
    return EXIT_OK


def _read_responses_file(path: str) -> list[tuple[int, int]]:
    try:
        document = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidArgumentError(f"cannot read responses {path}: {exc}")
    if isinstance(document, dict) and "responses" in document:
        document = document["responses"]
    if not isinstance(document, list):
        raise InvalidArgumentError(
            "responses file must be a JSON list of [item_id, category] pairs"
        )
    try:
        return [(int(i), int(k)) for i, k in document]
    except (TypeError, ValueError) as exc:
        raise InvalidArgumentError(f"malformed response pair: {exc}")


def cmd_score(args: argparse.Namespace) -> int:
    try:
        bank = _load_bank_or_fail(args.bank)
    except BankLoadError as exc:
        print(f"bank error: {exc}", file=sys.stderr)
        return EXIT_BANK
    try:
        pairs = _read_responses_file(args.responses)
        grid = build_grid(args.grid_lo, args.grid_hi, args.grid_points)
        prior = gaussian_prior(grid, args.prior_mean, args.prior_sd)
        if len(pairs) == bank.n_items:
            posterior = full_bank_posterior(bank, dict(pairs), prior)
        else:
            posterior = prior
            seen: set[int] = set()
            for item_id, category in pairs:
                if item_id in seen:
                    raise InvalidArgumentError(f"duplicate response for item {item_id}")
                seen.add(item_id)
                posterior = posterior_update(posterior, bank.item(item_id), category)
    except (InvalidArgumentError, GridcatError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"theta_mean {mean(posterior)!r}")
    print(f"theta_sd {sd(posterior)!r}")
    print(f"entropy {entropy(posterior)!r}")
    print(f"n_responses {len(pairs)}")
    return EXIT_OK


def cmd_validate_bank(args: argparse.Namespace) -> int:
    try:
        bank = _load_bank_or_fail(args.bank)
    except BankLoadError as exc:
        print(f"bank error: {exc}", file=sys.stderr)
        return EXIT_BANK
    levels = sorted({item.n_levels for item in bank.items})
    print(f"scale {bank.name}")
    print(f"items {bank.n_items}")
    print(f"levels {','.join(str(k) for k in levels)}")
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    try:
        kind = SelectorKind(args.selector)
    except ValueError:
        print(
            f"config error: unknown selector {args.selector!r}; "
            f"valid kinds: {', '.join(SELECTOR_KIND_NAMES)}",
            file=sys.stderr,
        )
        return EXIT_CONFIG
    try:
        bank = _load_bank_or_fail(args.bank)
    except BankLoadError as exc:
        print(f"bank error: {exc}", file=sys.stderr)
        return EXIT_BANK

    import uvicorn

    from .service import ServiceConfig, create_app

    rule = StoppingRule(
        max_items=args.max_items if args.max_items is not None else bank.n_items,
        sd_threshold=args.sd_threshold,
    )
    config = ServiceConfig(
        grid=build_grid(),
        prior_mean=args.prior_mean,
        prior_sd=args.prior_sd,
        default_spec=SelectorSpec(kind),
        rule=rule,
        cors_origins=tuple(args.cors_origin) if args.cors_origin else ("*",),
        log_dir=args.session_log_dir,
    )
    app = create_app(bank, config)
    try:
        uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    except (OSError, SystemExit) as exc:
        print(f"bind error: {exc}", file=sys.stderr)
        return EXIT_BIND
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    commands = {
        "simulate": cmd_simulate,
        "score": cmd_score,
        "validate-bank": cmd_validate_bank,
        "serve": cmd_serve,
    }
    return commands[args.command](args)


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
