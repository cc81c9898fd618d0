"""HTTP interface: sessions, voting, results, statistics, model content.

Error contract (every 4xx carries ``{"error": {"type", "message"}}``):

====================================  ======  =========================
domain error                          status  error type
====================================  ======  =========================
malformed body / bad values           400     validation
PlanError                             400     plan
ScoringError / ModelError             400     validation
DimensionError / StatsError           400     validation
UnsupportedFormatError                400     unsupported_format
bad join token / RoleError            403     role
unknown session / participant / id    404     not_found
WrongPhaseError                       409     wrong_phase
RoundStateError (incl. consensus
override guard, round cap)            409     round_state
IncompleteSessionError                409     incomplete
====================================  ======  =========================

Views are role-scoped: an unrevealed round serializes vote counts only,
plus the viewer's own vote for assessors and the list of who has voted
(never what) for the moderator. Full votes appear only in revealed rounds.

The event stream is a long-lived ``application/x-ndjson`` response, one
JSON event per line, resumable with ``?after=<seq>``. Stream event types:
``session_created`` (roster and session parameters, never the join token),
``participant_joined``, ``phase_changed``, ``item_opened``,
``vote_progress`` (counts only, no voter identity), ``round_revealed``
(full votes), ``justification_added``, ``round_reopened``,
``consensus_recorded``. Delivery is at-least-once; clients deduplicate by
``seq``; the unprojected log event ``vote_cast`` never leaves the server.
"""
from __future__ import annotations

import asyncio
import json
import uuid
from dataclasses import dataclass, field
from typing import Any

from starlette.applications import Starlette
from starlette.requests import Request
from starlette.responses import JSONResponse, Response, StreamingResponse
from starlette.routing import Route

from . import report as report_module
from .model import ModelError, ReferenceModel
from .report import AssessmentResults, UnsupportedFormatError, generate_results
from .scoring import ProcessProfile, ResponseSheet, ScoringError
from .session import (
    AssessmentPlan,
    AssessmentSession,
    Consensus,
    IncompleteSessionError,
    Participant,
    Phase,
    PlanError,
    Role,
    RoleError,
    RoundStateError,
    SessionError,
    WrongPhaseError,
)
from .stats import (
    DimensionError,
    IndeterminateError,
    KAPPA_WEIGHTINGS,
    ICC_VARIANTS,
    StatsError,
    cohen_kappa,
    contingency_table,
    cronbach_alpha,
    icc,
)
from .store import AssessmentStore, NotFoundError, StoreError

STREAM_HEARTBEAT_SECONDS = 15.0


class ApiError(Exception):
    def __init__(self, status: int, type: str, message: str):
        super().__init__(message)
        self.status = status
        self.type = type
        self.message = message


def _error_response(status: int, type: str, message: str) -> JSONResponse:
    return JSONResponse(
        {"error": {"type": type, "message": message}}, status_code=status
    )


_DOMAIN_ERRORS: list[tuple[type[Exception], int, str]] = [
    (ApiError, 0, ""),  # handled specially
    (PlanError, 400, "plan"),
    (UnsupportedFormatError, 400, "unsupported_format"),
    (IncompleteSessionError, 409, "incomplete"),
    (RoleError, 403, "role"),
    (WrongPhaseError, 409, "wrong_phase"),
    (RoundStateError, 409, "round_state"),
    (NotFoundError, 404, "not_found"),
    (IndeterminateError, 400, "indeterminate"),
    (DimensionError, 400, "validation"),
    (StatsError, 400, "validation"),
    (ScoringError, 400, "validation"),
    (ModelError, 400, "validation"),
    (report_module.ReportError, 400, "validation"),
    (StoreError, 500, "storage"),
    (SessionError, 400, "validation"),
]


def _map_domain_error(exc: Exception) -> JSONResponse | None:
    if isinstance(exc, ApiError):
        return _error_response(exc.status, exc.type, exc.message)
    for kind, status, type_name in _DOMAIN_ERRORS[1:]:
        if isinstance(exc, kind):
            return _error_response(status, type_name, str(exc))
    return None


@dataclass
class LiveSession:
    """One resident session plus its serialization/notification primitive."""

    session: AssessmentSession
    condition: asyncio.Condition = field(default_factory=asyncio.Condition)
    sheet: ResponseSheet | None = None
    profile: ProcessProfile | None = None
    results: AssessmentResults | None = None


def session_view(session: AssessmentSession, viewer: Participant) -> dict:
    """Role-scoped projection; unrevealed votes never leave the server."""
    view: dict[str, Any] = {
        "session_id": session.id,
        "phase": session.phase.value,
        "organization": session.organization_name,
        "scope_note": session.scope_note,
        "schedule_note": session.schedule_note,
        "model_version": session.model_version,
        "round_cap": session.round_cap,
        "created_at": session.created_at,
        "closed_at": session.closed_at,
        "your_id": viewer.id,
        "your_role": viewer.role.value,
        "participants": [
            session.participants[pid].to_dict() for pid in sorted(session.participants)
        ],
        "progress": {
            "resolved": len(session.item_order) - len(session.unresolved_items()),
            "total": len(session.item_order),
        },
        "items": {
            str(i): {
                "consensus": item.consensus.value if item.consensus else None,
                "evidence": list(item.evidence),
                "rounds": len(item.rounds),
            }
            for i, item in sorted(session.items.items())
        },
        "current_item": None,
    }
    item = session.current_item()
    if item is not None and item.current_round is not None:
        round_ = item.current_round
        current: dict[str, Any] = {
            "indicator_id": item.indicator_id,
            "round_number": round_.round_number,
            "revealed": round_.revealed,
            "votes_expected": len(round_.expected_voters),
            "votes_cast": len(round_.votes),
            "expected_voters": list(round_.expected_voters),
        }
        if round_.revealed:
            current["votes"] = {a: r.value for a, r in sorted(round_.votes.items())}
            current["justifications"] = dict(sorted(round_.justifications.items()))
            unanimous = round_.unanimous()
            current["unanimous"] = unanimous.value if unanimous else None
        else:
            if viewer.role is Role.ASSESSOR:
                own = round_.votes.get(viewer.id)
                current["your_vote"] = own.value if own else None
            if viewer.role is Role.MODERATOR:
                current["voted"] = sorted(round_.votes)
        current["previous_rounds"] = [
            {
                "round_number": r.round_number,
                "votes": {a: v.value for a, v in sorted(r.votes.items())},
                "justifications": dict(sorted(r.justifications.items())),
            }
            for r in item.rounds[:-1]
            if r.revealed
        ]
        view["current_item"] = current
    return view


def stream_event(event) -> dict | None:
    """Project one log event into its public stream form (None = private)."""
    base = {"seq": event.seq, "timestamp": event.timestamp, "type": event.type}
    if event.type == "session_created":
        plan = event.payload["plan"]
        return {
            **base,
            "payload": {
                "session_id": event.payload["session_id"],
                "organization_name": plan["organization_name"],
                "model_version": plan["model_version"],
                "participants": plan["participants"],
                "round_cap": event.payload["round_cap"],
                "total_items": len(event.payload["indicator_ids"]),
            },
        }
    if event.type == "vote_cast":
        payload = {
            "indicator_id": event.payload["indicator_id"],
            "round_number": event.payload["round_number"],
            "votes_cast": event.payload["votes_cast"],
            "votes_expected": event.payload["votes_expected"],
        }
        return {**base, "type": "vote_progress", "payload": payload}
    if event.type == "justification_recorded":
        return {
            **base,
            "type": "justification_added",
            "payload": {
                "indicator_id": event.payload["indicator_id"],
                "round_number": event.payload["round_number"],
                "assessor": event.actor,
                "text": event.payload["text"],
            },
        }
    return {**base, "payload": dict(event.payload)}


def create_app(store: AssessmentStore, model: ReferenceModel) -> Starlette:
    registry: dict[str, LiveSession] = {}

    # -- helpers --------------------------------------------------------------

    async def read_json(request: Request) -> dict:
        try:
            payload = json.loads(await request.body() or b"{}")
        except json.JSONDecodeError:
            raise ApiError(400, "validation", "request body is not valid JSON")
        if not isinstance(payload, dict):
            raise ApiError(400, "validation", "request body must be a JSON object")
        return payload

    def get_live(session_id: str) -> LiveSession:
        live = registry.get(session_id)
        if live is None:
            session = store.load_session(session_id)  # NotFoundError -> 404
            snapshot = store.load_snapshot(session_id)
            live = LiveSession(session=session)
            if snapshot.get("sheet"):
                live.sheet = ResponseSheet.from_dict(snapshot["sheet"])
            if snapshot.get("profile"):
                live.profile = ProcessProfile.from_dict(snapshot["profile"])
            if snapshot.get("results"):
                live.results = AssessmentResults.from_dict(snapshot["results"])
            registry[session_id] = live
        return live

    def persist(live: LiveSession) -> None:
        store.save_session(
            live.session,
            sheet=live.sheet.to_dict() if live.sheet else None,
            profile=live.profile.to_dict() if live.profile else None,
            results=live.results.to_dict() if live.results else None,
        )

    def caller(request: Request, live: LiveSession) -> Participant:
        participant_id = request.headers.get(
            "x-participant-id", request.query_params.get("participant", "")
        )
        if not participant_id:
            raise ApiError(403, "role", "missing participant credential")
        participant = live.session.participant(participant_id)
        if participant is None:
            raise ApiError(403, "role", "unknown participant credential")
        return participant

    def require_str(payload: dict, key: str) -> str:
        value = payload.get(key)
        if not isinstance(value, str) or not value.strip():
            raise ApiError(400, "validation", f"field {key!r} must be a non-empty string")
        return value

    # -- session lifecycle -------------------------------------------------------

    async def create_session(request: Request) -> JSONResponse:
        payload = await read_json(request)
        round_cap = payload.pop("round_cap", None)
        participants = payload.get("participants")
        if isinstance(participants, list):
            for entry in participants:  # ids are server-assigned when omitted
                if isinstance(entry, dict) and not entry.get("id"):
                    entry["id"] = uuid.uuid4().hex
        plan = AssessmentPlan.from_dict(
            {**payload, "model_version": payload.get("model_version") or model.version}
        )
        kwargs = {}
        if round_cap is not None:
            if not isinstance(round_cap, int) or round_cap < 1:
                raise ApiError(400, "validation", "round_cap must be a positive integer")
            kwargs["round_cap"] = round_cap
        session = AssessmentSession.create(plan, model, **kwargs)
        live = LiveSession(session=session)
        registry[session.id] = live
        persist(live)
        return JSONResponse(
            {"id": session.id, "join_token": session.join_token}, status_code=201
        )

    async def join_session(request: Request) -> JSONResponse:
        live = get_live(request.path_params["session_id"])
        payload = await read_json(request)
        name = require_str(payload, "name")
        role = require_str(payload, "role")
        if role not in (r.value for r in Role):
            raise ApiError(400, "validation", f"unknown role {role!r}")
        token = payload.get("token", "")
        if token != live.session.join_token:
            raise ApiError(403, "role", "bad join token")
        async with live.condition:
            participant = live.session.join(name, Role(role))
            persist(live)
            live.condition.notify_all()
        return JSONResponse(
            {
                "participant_id": participant.id,
                "display_name": participant.display_name,
                "role": participant.role.value,
                "session_id": live.session.id,
            },
            status_code=201,
        )

    async def change_phase(request: Request) -> JSONResponse:
        live = get_live(request.path_params["session_id"])
        payload = await read_json(request)
        action = require_str(payload, "action")
        participant = caller(request, live)
        if participant.role is not Role.MODERATOR:
            raise ApiError(403, "role", "only the moderator changes the session phase")
        async with live.condition:
            if action == "begin_collection":
                live.session.begin_collection()
            elif action == "finalize":
                sheet, profile = live.session.finalize(model)
                live.sheet = sheet
                live.profile = profile
                live.results = generate_results(
                    sheet,
                    profile,
                    model,
                    session_metadata={
                        "organization": live.session.organization_name,
                        "date": live.session.created_at,
                        "participants": [
                            f"{p.display_name} ({p.role.value})"
                            for _, p in sorted(live.session.participants.items())
                        ],
                        "model_version": live.session.model_version,
                        "session_id": live.session.id,
                    },
                    evidence={
                        i: item.evidence
                        for i, item in live.session.items.items()
                        if item.evidence
                    },
                )
            elif action == "close":
                live.session.close()
            else:
                raise ApiError(
                    400, "validation",
                    "action must be begin_collection, finalize or close",
                )
            persist(live)
            live.condition.notify_all()
        return JSONResponse({"phase": live.session.phase.value})

    async def get_session(request: Request) -> JSONResponse:
        live = get_live(request.path_params["session_id"])
        participant = caller(request, live)
        async with live.condition:
            return JSONResponse(session_view(live.session, participant))

    # -- collecting ---------------------------------------------------------------

    async def vote(request: Request) -> JSONResponse:
        live = get_live(request.path_params["session_id"])
        payload = await read_json(request)
        rating = require_str(payload, "rating")
        participant = caller(request, live)
        async with live.condition:
            live.session.cast_vote(participant.id, rating)
            persist(live)
            live.condition.notify_all()
            return JSONResponse(session_view(live.session, participant))

    async def justify(request: Request) -> JSONResponse:
        live = get_live(request.path_params["session_id"])
        payload = await read_json(request)
        text = require_str(payload, "text")
        participant = caller(request, live)
        async with live.condition:
            live.session.record_justification(participant.id, text)
            persist(live)
            live.condition.notify_all()
            return JSONResponse(session_view(live.session, participant))

    async def resolve_round(request: Request) -> JSONResponse:
        live = get_live(request.path_params["session_id"])
        payload = await read_json(request)
        action = payload.get("action", "resolve")
        if action != "resolve":
            raise ApiError(400, "validation", "action must be 'resolve'")
        participant = caller(request, live)
        if participant.role is not Role.MODERATOR:
            raise ApiError(403, "role", "only the moderator resolves rounds")
        async with live.condition:
            outcome = live.session.resolve_round()
            persist(live)
            live.condition.notify_all()
        if isinstance(outcome, Consensus):
            return JSONResponse(
                {"outcome": "consensus", "rating": outcome.rating.value}
            )
        return JSONResponse(
            {"outcome": "new_round", "round_number": outcome.round_number}
        )

    async def consensus(request: Request) -> JSONResponse:
        live = get_live(request.path_params["session_id"])
        payload = await read_json(request)
        rating = require_str(payload, "rating")
        evidence = payload.get("evidence", [])
        if not isinstance(evidence, list) or not all(
            isinstance(e, str) for e in evidence
        ):
            raise ApiError(400, "validation", "evidence must be a list of strings")
        participant = caller(request, live)
        async with live.condition:
            live.session.record_consensus(participant.id, rating, evidence)
            persist(live)
            live.condition.notify_all()
            return JSONResponse(session_view(live.session, participant))

    # -- results and report ----------------------------------------------------------

    def _require_results(live: LiveSession) -> AssessmentResults:
        if live.results is None or live.sheet is None or live.profile is None:
            raise WrongPhaseError("results are available after finalize")
        return live.results

    async def results(request: Request) -> JSONResponse:
        live = get_live(request.path_params["session_id"])
        caller(request, live)
        async with live.condition:
            _require_results(live)
            return JSONResponse(
                {
                    "sheet": live.sheet.to_dict(),
                    "profile": live.profile.to_dict(),
                    "results": live.results.to_dict(),
                }
            )

    async def rendered_report(request: Request) -> Response:
        live = get_live(request.path_params["session_id"])
        caller(request, live)
        format = request.query_params.get("format", "markdown")
        async with live.condition:
            document = report_module.render_report(_require_results(live), format)
        media = {
            "markdown": "text/markdown; charset=utf-8",
            "html": "text/html; charset=utf-8",
            "json": "application/json",
        }[format]
        return Response(content=document, media_type=media)

    # -- event stream -------------------------------------------------------------------

    async def events(request: Request) -> StreamingResponse:
        live = get_live(request.path_params["session_id"])
        caller(request, live)
        try:
            after = int(request.query_params.get("after", 0))
        except ValueError:
            raise ApiError(400, "validation", "after must be an integer")

        async def generate():
            cursor = after
            while True:
                async with live.condition:
                    pending = list(live.session.events[cursor:])
                    closed = live.session.phase is Phase.CLOSED
                    if not pending and not closed:
                        try:
                            await asyncio.wait_for(
                                live.condition.wait(), STREAM_HEARTBEAT_SECONDS
                            )
                        except asyncio.TimeoutError:
                            yield json.dumps({"type": "heartbeat"}) + "\n"
                        continue
                for event in pending:
                    cursor = event.seq
                    projected = stream_event(event)
                    if projected is not None:
                        yield json.dumps(projected, ensure_ascii=False) + "\n"
                if closed:
                    return

        return StreamingResponse(generate(), media_type="application/x-ndjson")

    # -- model and listing ----------------------------------------------------------------

    async def get_model(request: Request) -> JSONResponse:
        return JSONResponse(model.to_dict())

    async def list_assessments(request: Request) -> JSONResponse:
        return JSONResponse(
            {
                "assessments": store.list_assessments(
                    organization=request.query_params.get("organization"),
                    since=request.query_params.get("since"),
                    until=request.query_params.get("until"),
                )
            }
        )

    # -- statistics --------------------------------------------------------------------------

    def _int_vector(payload: dict, key: str) -> list[int]:
        raw = payload.get(key)
        if not isinstance(raw, list) or not all(
            isinstance(v, int) and not isinstance(v, bool) for v in raw
        ):
            raise ApiError(400, "validation", f"field {key!r} must be a list of integers")
        return raw

    def _matrix(payload: dict, key: str = "matrix") -> list[list[float]]:
        raw = payload.get(key)
        if (
            not isinstance(raw, list)
            or not raw
            or not all(isinstance(row, list) for row in raw)
        ):
            raise ApiError(400, "validation", f"field {key!r} must be a list of rows")
        for row in raw:
            for cell in row:
                if isinstance(cell, bool) or not isinstance(cell, (int, float)):
                    raise ApiError(400, "validation", "matrix cells must be numbers")
        return raw

    async def stats_kappa(request: Request) -> JSONResponse:
        payload = await read_json(request)
        categories = payload.get("categories", 3)
        if not isinstance(categories, int) or categories < 2:
            raise ApiError(400, "validation", "categories must be an integer >= 2")
        table = contingency_table(
            _int_vector(payload, "a"), _int_vector(payload, "b"), categories
        )
        results_by_weighting: dict[str, dict | None] = {}
        for weighting in KAPPA_WEIGHTINGS:
            try:
                results_by_weighting[weighting] = cohen_kappa(table, weighting).to_dict()
            except IndeterminateError:
                results_by_weighting[weighting] = None
        return JSONResponse(
            {
                "n": table.n,
                "table": [list(row) for row in table.counts],
                "results": results_by_weighting,
            }
        )

    async def stats_icc(request: Request) -> JSONResponse:
        payload = await read_json(request)
        matrix = _matrix(payload)
        variants = payload.get("variants", list(ICC_VARIANTS))
        if not isinstance(variants, list) or not set(variants) <= set(ICC_VARIANTS):
            raise ApiError(
                400, "validation", f"variants must be a subset of {list(ICC_VARIANTS)}"
            )
        return JSONResponse(
            {"results": {variant: icc(matrix, variant).to_dict() for variant in variants}}
        )

    async def stats_alpha(request: Request) -> JSONResponse:
        payload = await read_json(request)
        matrix = _matrix(payload)
        try:
            return JSONResponse(cronbach_alpha(matrix).to_dict())
        except IndeterminateError as exc:
            return JSONResponse(
                {"alpha": None, "undefined": True, "reason": str(exc)}
            )

    routes = [
        Route("/api/sessions", create_session, methods=["POST"]),
        Route("/api/sessions/{session_id}/join", join_session, methods=["POST"]),
        Route("/api/sessions/{session_id}/phase", change_phase, methods=["POST"]),
        Route("/api/sessions/{session_id}", get_session, methods=["GET"]),
        Route("/api/sessions/{session_id}/vote", vote, methods=["POST"]),
        Route("/api/sessions/{session_id}/justify", justify, methods=["POST"]),
        Route("/api/sessions/{session_id}/round", resolve_round, methods=["POST"]),
        Route("/api/sessions/{session_id}/consensus", consensus, methods=["POST"]),
        Route("/api/sessions/{session_id}/results", results, methods=["GET"]),
        Route("/api/sessions/{session_id}/report", rendered_report, methods=["GET"]),
        Route("/api/sessions/{session_id}/events", events, methods=["GET"]),
        Route("/api/model", get_model, methods=["GET"]),
        Route("/api/assessments", list_assessments, methods=["GET"]),
        Route("/api/stats/kappa", stats_kappa, methods=["POST"]),
        Route("/api/stats/icc", stats_icc, methods=["POST"]),
        Route("/api/stats/alpha", stats_alpha, methods=["POST"]),
    ]

    def handle_domain_error(request: Request, exc: Exception) -> JSONResponse:
        response = _map_domain_error(exc)
        if response is None:
            raise exc
        return response

    exception_handlers = {
        kind: handle_domain_error
        for kind, _, _ in _DOMAIN_ERRORS
    }
    return Starlette(routes=routes, exception_handlers=exception_handlers)
