"""Endpoint tests for the live-session HTTP service."""

import numpy as np
import pytest
from fastapi.testclient import TestClient

from gridcat import StoppingRule, build_grid, synthetic_bank
from gridcat.bankio import load_session_log, replay_session_log
from gridcat.selectors import SelectorKind, SelectorSpec
from gridcat.service import ServiceConfig, create_app


@pytest.fixture(scope="module")
def bank():
    return synthetic_bank(n_items=12, n_levels=4, seed=314, name="svc-bank")


@pytest.fixture()
def client(bank, tmp_path):
    config = ServiceConfig(
        grid=build_grid(),
        default_spec=SelectorSpec(SelectorKind.STOCHASTIC_ENTROPY),
        rule=StoppingRule(max_items=12),
        log_dir=tmp_path / "logs",
    )
    app = create_app(bank, config)
    with TestClient(app) as c:
        c.log_dir = tmp_path / "logs"
        yield c


def _create(client, **body):
    resp = client.post("/sessions", json=body or None)
    assert resp.status_code == 201
    return resp.json()


class TestCreateSession:
    def test_default_selector(self, client, bank):
        data = _create(client)
        assert data["n_items"] == bank.n_items
        assert data["scale_name"] == "svc-bank"
        assert isinstance(data["session_id"], str) and len(data["session_id"]) >= 16

    def test_explicit_selector(self, client):
        data = _create(client, selector="stochastic-entropy", seed=4)
        assert "session_id" in data

    def test_each_greedy_kind_accepted(self, client):
        for kind in SelectorKind:
            data = _create(client, selector=kind.value, seed=1)
            assert "session_id" in data

    def test_unknown_selector_rejected(self, client):
        resp = client.post("/sessions", json={"selector": "banana"})
        assert resp.status_code == 400
        assert "banana" in resp.json()["detail"]

    def test_ids_unique(self, client):
        ids = {_create(client)["session_id"] for _ in range(20)}
        assert len(ids) == 20


class TestNextItem:
    def test_fresh_session_proposes_valid_item(self, client, bank):
        sid = _create(client, seed=7)["session_id"]
        resp = client.get(f"/sessions/{sid}/next")
        assert resp.status_code == 200
        data = resp.json()
        assert 0 <= data["item_id"] < bank.n_items
        assert data["step"] == 0
        assert data["n_levels"] == bank.item(data["item_id"]).n_levels

    def test_idempotent_until_submission(self, client):
        sid = _create(client, seed=8)["session_id"]
        first = client.get(f"/sessions/{sid}/next").json()
        second = client.get(f"/sessions/{sid}/next").json()
        assert first["item_id"] == second["item_id"]

    def test_unknown_session(self, client):
        assert client.get("/sessions/nope/next").status_code == 404

    def test_finished_after_stopping(self, bank, tmp_path):
        config = ServiceConfig(
            grid=build_grid(),
            default_spec=SelectorSpec(SelectorKind.GREEDY_ENTROPY),
            rule=StoppingRule(max_items=2),
        )
        with TestClient(create_app(bank, config)) as client:
            sid = _create(client, seed=3)["session_id"]
            for _ in range(2):
                item = client.get(f"/sessions/{sid}/next").json()
                client.post(
                    f"/sessions/{sid}/responses",
                    json={"item_id": item["item_id"], "category": 0},
                )
            done = client.get(f"/sessions/{sid}/next").json()
            assert done["finished"] is True
            assert "mean" in done["estimate"]


class TestSubmitResponse:
    def test_valid_submission_advances(self, client):
        sid = _create(client, seed=9)["session_id"]
        item = client.get(f"/sessions/{sid}/next").json()
        resp = client.post(
            f"/sessions/{sid}/responses",
            json={"item_id": item["item_id"], "category": 1},
        )
        assert resp.status_code == 200
        data = resp.json()
        assert data["step"] == 1
        assert set(data["estimate"]) == {"mean", "sd"}

    def test_resubmission_conflicts(self, client):
        sid = _create(client, seed=10)["session_id"]
        item = client.get(f"/sessions/{sid}/next").json()
        body = {"item_id": item["item_id"], "category": 0}
        assert client.post(f"/sessions/{sid}/responses", json=body).status_code == 200
        assert client.post(f"/sessions/{sid}/responses", json=body).status_code == 409

    def test_unproposed_item_conflicts(self, client, bank):
        sid = _create(client, seed=11)["session_id"]
        item = client.get(f"/sessions/{sid}/next").json()
        other = (item["item_id"] + 1) % bank.n_items
        resp = client.post(
            f"/sessions/{sid}/responses", json={"item_id": other, "category": 0}
        )
        assert resp.status_code == 409

    def test_category_out_of_range(self, client, bank):
        sid = _create(client, seed=12)["session_id"]
        item = client.get(f"/sessions/{sid}/next").json()
        resp = client.post(
            f"/sessions/{sid}/responses",
            json={"item_id": item["item_id"], "category": item["n_levels"]},
        )
        assert resp.status_code == 400

    def test_unknown_session(self, client):
        resp = client.post(
            "/sessions/nope/responses", json={"item_id": 0, "category": 0}
        )
        assert resp.status_code == 404


class TestEstimate:
    def test_prior_statistics_at_step_zero(self, client):
        sid = _create(client, seed=13)["session_id"]
        data = client.get(f"/sessions/{sid}/estimate").json()
        assert data["step"] == 0
        assert data["mean"] == pytest.approx(0.0, abs=1e-9)
        assert data["sd"] == pytest.approx(np.sqrt(2.0), abs=1e-3)

    def test_density_normalized(self, client):
        sid = _create(client, seed=14)["session_id"]
        data = client.get(f"/sessions/{sid}/estimate").json()
        points = np.array(data["density"]["points"])
        values = np.array(data["density"]["values"])
        assert len(points) == len(values) == 200
        assert np.trapezoid(values, points) == pytest.approx(1.0, abs=1e-6)

    def test_updates_after_submissions(self, client):
        sid = _create(client, seed=15)["session_id"]
        before = client.get(f"/sessions/{sid}/estimate").json()
        item = client.get(f"/sessions/{sid}/next").json()
        client.post(
            f"/sessions/{sid}/responses",
            json={"item_id": item["item_id"], "category": 0},
        )
        after = client.get(f"/sessions/{sid}/estimate").json()
        assert after["step"] == 1
        assert after["mean"] != before["mean"]


class TestPersistence:
    def test_log_replay_matches_live_estimate(self, client, bank):
        sid = _create(client, seed=16)["session_id"]
        rng = np.random.default_rng(16)
        for _ in range(6):
            item = client.get(f"/sessions/{sid}/next").json()
            client.post(
                f"/sessions/{sid}/responses",
                json={
                    "item_id": item["item_id"],
                    "category": int(rng.integers(0, item["n_levels"])),
                },
            )
        live = client.get(f"/sessions/{sid}/estimate").json()
        log = load_session_log(client.log_dir / f"{sid}.json")
        replayed = replay_session_log(log, bank)
        from gridcat import mean, sd

        assert mean(replayed.posterior) == pytest.approx(live["mean"], abs=1e-12)
        assert sd(replayed.posterior) == pytest.approx(live["sd"], abs=1e-12)
