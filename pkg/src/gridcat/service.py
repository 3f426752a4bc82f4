"""HTTP facade over live sessions so a browser client can run a test.

Sessions are held in memory behind unguessable tokens, one lock per
session. The proposed item is drawn once and cached so repeated GETs of
/next are idempotent until a response for it is submitted; this is what
lets a browser refresh mid-test without redrawing a stochastic selection.
Optionally every submission is mirrored to an on-disk session log that can
be replayed to the identical posterior.
"""

from __future__ import annotations

import math
import secrets
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from .bankio import save_session_log, session_log_from_state
from .grid import AbilityGrid, build_grid, gaussian_prior
from .items import ItemBank
from .selectors import SELECTOR_KIND_NAMES, SelectorKind, SelectorSpec
from .session import (
    SessionState,
    StoppingRule,
    estimate,
    next_item,
    start_session,
    submit_response,
)


class CreateSessionBody(BaseModel):
    selector: str | None = None
    seed: int | None = None


class SubmitResponseBody(BaseModel):
    item_id: int
    category: int


@dataclass
class SessionResource:
    session_id: str
    state: SessionState
    created: float
    proposed: int | None = None
    lock: threading.Lock = field(default_factory=threading.Lock)


@dataclass(frozen=True)
class ServiceConfig:
    grid: AbilityGrid
    prior_mean: float = 0.0
    prior_sd: float = math.sqrt(2.0)
    default_spec: SelectorSpec = SelectorSpec(SelectorKind.STOCHASTIC_ENTROPY)
    rule: StoppingRule | None = None
    cors_origins: tuple[str, ...] = ("*",)
    log_dir: str | Path | None = None


def _estimate_payload(state: SessionState, include_density: bool = False) -> dict:
    est = estimate(state)
    payload = {
        "mean": est["mean"],
        "sd": est["sd"],
        "entropy": est["entropy"],
        "step": est["step"],
    }
    if include_density:
        density = est["density"]
        payload["density"] = {
            "points": density.grid.points.tolist(),
            "values": density.values.tolist(),
        }
    return payload


def create_app(bank: ItemBank, config: ServiceConfig | None = None) -> FastAPI:
    if config is None:
        config = ServiceConfig(grid=build_grid())
    prior = gaussian_prior(config.grid, config.prior_mean, config.prior_sd)
    rule = config.rule or StoppingRule(max_items=bank.n_items)
    log_dir = Path(config.log_dir) if config.log_dir is not None else None
    if log_dir is not None:
        log_dir.mkdir(parents=True, exist_ok=True)

    app = FastAPI(title="gridcat session service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=list(config.cors_origins),
        allow_methods=["*"],
        allow_headers=["*"],
    )
    sessions: dict[str, SessionResource] = {}
    app.state.sessions = sessions
    app.state.bank = bank
    app.state.service_config = config

    def _resource(session_id: str) -> SessionResource:
        resource = sessions.get(session_id)
        if resource is None:
            raise HTTPException(status_code=404, detail="unknown session id")
        return resource

    def _persist(resource: SessionResource) -> None:
        if log_dir is None:
            return
        log = session_log_from_state(
            resource.state, config.prior_mean, config.prior_sd
        )
        save_session_log(log, log_dir / f"{resource.session_id}.json")

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSessionBody | None = None) -> dict:
        body = body or CreateSessionBody()
        if body.selector is None:
            kind = config.default_spec.kind
        else:
            try:
                kind = SelectorKind(body.selector)
            except ValueError:
                raise HTTPException(
                    status_code=400,
                    detail=f"unknown selector {body.selector!r}; "
                    f"valid kinds: {', '.join(SELECTOR_KIND_NAMES)}",
                )
        seed = body.seed if body.seed is not None else secrets.randbits(63)
        spec = SelectorSpec(
            kind, tie_break=config.default_spec.tie_break, seed=seed
        )
        state = start_session(bank, prior, spec, rule, rng=np.random.default_rng(seed))
        session_id = secrets.token_urlsafe(16)
        sessions[session_id] = SessionResource(
            session_id=session_id, state=state, created=time.time()
        )
        _persist(sessions[session_id])
        return {
            "session_id": session_id,
            "n_items": bank.n_items,
            "scale_name": bank.name,
        }

    @app.get("/sessions/{session_id}/next")
    def get_next(session_id: str) -> dict:
        resource = _resource(session_id)
        with resource.lock:
            if resource.proposed is None:
                proposed = next_item(resource.state)
                if proposed is None:
                    return {
                        "finished": True,
                        "estimate": _estimate_payload(resource.state),
                    }
                resource.proposed = proposed
            item = bank.item(resource.proposed)
            return {
                "item_id": resource.proposed,
                "text": item.text,
                "n_levels": item.n_levels,
                "step": resource.state.step,
            }

    @app.post("/sessions/{session_id}/responses")
    def post_response(session_id: str, body: SubmitResponseBody) -> dict:
        resource = _resource(session_id)
        with resource.lock:
            if resource.proposed is None or body.item_id != resource.proposed:
                raise HTTPException(
                    status_code=409,
                    detail=f"item {body.item_id} is not the proposed item",
                )
            item = bank.item(body.item_id)
            if not 0 <= body.category < item.n_levels:
                raise HTTPException(
                    status_code=400,
                    detail=f"category {body.category} out of range "
                    f"(item has {item.n_levels} levels)",
                )
            submit_response(resource.state, body.item_id, body.category)
            resource.proposed = None
            _persist(resource)
            est = _estimate_payload(resource.state)
            return {
                "step": resource.state.step,
                "estimate": {"mean": est["mean"], "sd": est["sd"]},
            }

    @app.get("/sessions/{session_id}/estimate")
    def get_estimate(session_id: str) -> dict:
        resource = _resource(session_id)
        with resource.lock:
            return _estimate_payload(resource.state, include_density=True)

    return app
