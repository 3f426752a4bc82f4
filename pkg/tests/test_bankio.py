"""Round-trip and validation tests for the three file schemas."""

import json
import time

import numpy as np
import pytest

from gridcat import (
    BankLoadError,
    SelectorKind,
    SelectorSpec,
    SimulationConfig,
    StoppingRule,
    run_batch,
    start_session,
    submit_response,
    synthetic_bank,
)
from gridcat.bankio import (
    load_bank,
    load_session_log,
    read_report_csv,
    read_report_json,
    replay_session_log,
    save_bank,
    save_session_log,
    session_log_from_state,
    write_report_csv,
    write_report_json,
)
from gridcat.items import ItemBank, ItemParameters


class TestBankFiles:
    def test_minimal_round_trip(self, tmp_path):
        bank = ItemBank(items=(ItemParameters(1.1, (0.2,), text="only item"),), name="mini")
        path = tmp_path / "bank.json"
        save_bank(bank, path)
        loaded = load_bank(path)
        assert loaded.name == "mini"
        assert loaded.n_items == 1
        assert loaded.item(0).discrimination == 1.1
        assert loaded.item(0).thresholds == (0.2,)
        assert loaded.item(0).text == "only item"

    def test_save_load_save_byte_identical(self, tmp_path):
        bank = synthetic_bank(n_items=30, n_levels=4, seed=3, name="rt")
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        save_bank(bank, p1)
        save_bank(load_bank(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_nonmonotone_thresholds_named(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(
            json.dumps(
                {
                    "format": "gridcat-bank",
                    "version": 1,
                    "scale": "bad",
                    "items": [
                        {"id": 7, "discrimination": 1.0, "thresholds": [1.0, -1.0], "n_levels": 3}
                    ],
                }
            )
        )
        with pytest.raises(BankLoadError, match="item 7"):
            load_bank(path)

    def test_nonpositive_discrimination_named(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(
            json.dumps(
                {
                    "format": "gridcat-bank",
                    "version": 1,
                    "scale": "bad",
                    "items": [
                        {"id": 3, "discrimination": -0.5, "thresholds": [0.0], "n_levels": 2}
                    ],
                }
            )
        )
        with pytest.raises(BankLoadError, match="item 3"):
            load_bank(path)

    def test_duplicate_ids_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        item = {"id": 1, "discrimination": 1.0, "thresholds": [0.0], "n_levels": 2}
        path.write_text(
            json.dumps(
                {"format": "gridcat-bank", "version": 1, "scale": "x", "items": [item, item]}
            )
        )
        with pytest.raises(BankLoadError, match="duplicate item id 1"):
            load_bank(path)

    def test_unknown_version_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"format": "gridcat-bank", "version": 99, "items": []}))
        with pytest.raises(BankLoadError, match="version"):
            load_bank(path)

    def test_sparse_ids_densified_with_mapping(self, tmp_path):
        path = tmp_path / "sparse.json"
        path.write_text(
            json.dumps(
                {
                    "format": "gridcat-bank",
                    "version": 1,
                    "scale": "sparse",
                    "items": [
                        {"id": 30, "discrimination": 1.0, "thresholds": [0.5], "n_levels": 2},
                        {"id": 10, "discrimination": 2.0, "thresholds": [-0.5], "n_levels": 2},
                    ],
                }
            )
        )
        bank = load_bank(path)
        assert bank.source_ids == (10, 30)
        assert bank.item(0).discrimination == 2.0
        assert bank.item(1).discrimination == 1.0

    def test_mismatched_n_levels_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(
            json.dumps(
                {
                    "format": "gridcat-bank",
                    "version": 1,
                    "scale": "bad",
                    "items": [
                        {"id": 0, "discrimination": 1.0, "thresholds": [0.0], "n_levels": 4}
                    ],
                }
            )
        )
        with pytest.raises(BankLoadError, match="item 0"):
            load_bank(path)

    def test_large_bank_load_budget(self, tmp_path):
        bank = synthetic_bank(n_items=120, n_levels=4, seed=8, name="eqsq-shaped")
        path = tmp_path / "big.json"
        save_bank(bank, path)
        start = time.perf_counter()
        load_bank(path)
        assert time.perf_counter() - start < 0.05


class TestSessionLogs:
    def _run_session(self, seed=11):
        bank = synthetic_bank(n_items=10, n_levels=3, seed=5, name="log-bank")
        from gridcat import build_grid, gaussian_prior, next_item

        grid = build_grid()
        prior = gaussian_prior(grid, 0.0, np.sqrt(2.0))
        spec = SelectorSpec(SelectorKind.STOCHASTIC_ENTROPY, seed=seed)
        state = start_session(bank, prior, spec, StoppingRule(max_items=6))
        rng = np.random.default_rng(seed)
        while (item_id := next_item(state)) is not None:
            submit_response(
                state, item_id, int(rng.integers(0, bank.item(item_id).n_levels))
            )
        return bank, state

    def test_round_trip(self, tmp_path):
        bank, state = self._run_session()
        log = session_log_from_state(state, 0.0, float(np.sqrt(2.0)))
        path = tmp_path / "log.json"
        save_session_log(log, path)
        assert load_session_log(path) == log

    def test_save_load_save_byte_identical(self, tmp_path):
        bank, state = self._run_session()
        log = session_log_from_state(state, 0.0, float(np.sqrt(2.0)))
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        save_session_log(log, p1)
        save_session_log(load_session_log(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_replay_reproduces_posterior(self, tmp_path):
        bank, state = self._run_session()
        log = session_log_from_state(state, 0.0, float(np.sqrt(2.0)))
        path = tmp_path / "log.json"
        save_session_log(log, path)
        replayed = replay_session_log(load_session_log(path), bank)
        assert np.max(np.abs(replayed.posterior.values - state.posterior.values)) < 1e-12
        assert replayed.step == state.step

    def test_replay_wrong_bank_rejected(self, tmp_path):
        bank, state = self._run_session()
        log = session_log_from_state(state, 0.0, float(np.sqrt(2.0)))
        other = synthetic_bank(n_items=10, n_levels=3, seed=5, name="other-name")
        with pytest.raises(BankLoadError):
            replay_session_log(log, other)

    def test_truncated_file_rejected(self, tmp_path):
        path = tmp_path / "trunc.json"
        path.write_text('{"format": "gridcat-session-log", "version": 1, "bank"')
        with pytest.raises(BankLoadError):
            load_session_log(path)


class TestReports:
    @pytest.fixture(scope="class")
    def report(self):
        bank = synthetic_bank(n_items=8, n_levels=2, seed=9, name="rep")
        config = SimulationConfig(
            theta_values=(-2.0, 0.0, 2.0),
            replicates=2,
            test_lengths=(2, 4),
            selectors=(SelectorSpec(SelectorKind.FISHER),),
            master_seed=13,
        )
        return run_batch(config, bank)

    def test_json_round_trip(self, report, tmp_path):
        path = tmp_path / "r.json"
        write_report_json(report, path)
        assert read_report_json(path) == report

    def test_json_save_load_save_byte_identical(self, report, tmp_path):
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        write_report_json(report, p1)
        write_report_json(read_report_json(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_csv_round_trip(self, report, tmp_path):
        path = tmp_path / "r.csv"
        write_report_csv(report, path)
        assert read_report_csv(path) == report.rows

    def test_csv_row_count(self, report, tmp_path):
        path = tmp_path / "r.csv"
        write_report_csv(report, path)
        lines = path.read_text().strip().splitlines()
        assert len(lines) == 1 + 1 * 3 * 2  # header + selectors x thetas x lengths

    def test_csv_uses_dot_decimal(self, report, tmp_path):
        path = tmp_path / "r.csv"
        write_report_csv(report, path)
        body = path.read_text()
        assert "," in body and ";" not in body.splitlines()[0]
        assert "0." in body
