"""Four-phase assessment session as an event-sourced state machine.

A session moves strictly forward through planning, collecting, generating,
reporting and closed. During collecting, each questionnaire item is rated
with the card-based consensus protocol: every eligible assessor casts a
hidden vote (re-voting before the reveal is allowed, last write wins); the
round reveals automatically and atomically when the last expected vote
arrives; a unanimous round can be recorded as consensus by the moderator;
a split round collects short justifications and is reopened for a fresh
vote, up to a configurable round cap after which the moderator must record
an override. The moderator may attach work-product evidence when closing
an item; a non-unanimous or contradicting consensus requires the first
evidence entry to be an explicit ``justification:`` note.

All state mutation happens in event-apply handlers, so replaying a stored
event log always reproduces the same session state. Commands validate,
then emit; they never mutate state directly.
"""
from __future__ import annotations

import json
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from typing import Callable, Iterable, Mapping, Sequence

from .model import ReferenceModel
from .scoring import (
    ProcessProfile,
    Rating,
    ResponseSheet,
    build_profile,
    rating_from_letter,
)

DEFAULT_ROUND_CAP = 5
OVERRIDE_PREFIX = "justification:"

#: Read to the participants when data collection begins.
BRIEFING = (
    "This meeting is a self-assessment of our usability process. We will go "
    "through 16 questionnaire items covering four sub-processes: stakeholder "
    "and organizational requirements (UP1), context of use (UP2), design "
    "solutions (UP3) and design evaluation (UP4). For every item each "
    "assessor privately picks one card: N (not achieved), P (partially "
    "achieved) or F (fully achieved). Cards are revealed simultaneously once "
    "everyone has voted. When opinions differ, each assessor briefly explains "
    "their choice and the item is voted again until the group agrees. The "
    "moderator may ask for examples of work products that support a rating "
    "before recording it. The goal is to find improvement opportunities, not "
    "to grade anyone."
)


class SessionError(Exception):
    """Base class for session command errors."""


class PlanError(SessionError):
    """The assessment plan or a join request violates role constraints."""


class RoleError(SessionError):
    """The acting participant is not allowed to perform this command."""


class WrongPhaseError(SessionError):
    """The command is not available in the session's current phase."""


class RoundStateError(SessionError):
    """The current poker round is not in the state the command requires."""


class ConsensusError(RoundStateError):
    """Consensus recording contradicts the revealed round without override."""


class IncompleteSessionError(SessionError):
    """Finalize was requested while items are still unresolved."""

    def __init__(self, unresolved: list[int]):
        super().__init__("unresolved: " + str(unresolved))
        self.unresolved = unresolved


class Role(str, Enum):
    SPONSOR = "sponsor"
    MODERATOR = "moderator"
    ASSESSOR = "assessor"


class Phase(str, Enum):
    PLANNING = "planning"
    COLLECTING = "collecting"
    GENERATING = "generating"
    REPORTING = "reporting"
    CLOSED = "closed"


PHASE_ORDER = [Phase.PLANNING, Phase.COLLECTING, Phase.GENERATING,
               Phase.REPORTING, Phase.CLOSED]


@dataclass(frozen=True)
class Participant:
    id: str
    display_name: str
    role: Role

    def to_dict(self) -> dict:
        return {"id": self.id, "display_name": self.display_name, "role": self.role.value}

    @classmethod
    def from_dict(cls, raw: Mapping) -> "Participant":
        return cls(
            id=str(raw["id"]),
            display_name=str(raw["display_name"]),
            role=Role(raw["role"]),
        )


@dataclass
class AssessmentPlan:
    organization_name: str
    model_version: str
    participants: tuple[Participant, ...] = ()
    scope_note: str = ""
    schedule_note: str = ""

    def violations(self) -> list[str]:
        problems = []
        if not self.organization_name.strip():
            problems.append("organization name is empty")
        moderators = [p for p in self.participants if p.role is Role.MODERATOR]
        assessors = [p for p in self.participants if p.role is Role.ASSESSOR]
        if len(moderators) != 1:
            problems.append(f"plan needs exactly one moderator, found {len(moderators)}")
        if not assessors:
            problems.append("plan needs at least one assessor")
        ids = [p.id for p in self.participants]
        if len(set(ids)) != len(ids):
            problems.append("duplicate participant ids")
        for p in self.participants:
            if not p.display_name.strip():
                problems.append(f"participant {p.id} has an empty name")
        return problems

    def to_dict(self) -> dict:
        return {
            "organization_name": self.organization_name,
            "model_version": self.model_version,
            "scope_note": self.scope_note,
            "schedule_note": self.schedule_note,
            "participants": [p.to_dict() for p in self.participants],
        }

    @classmethod
    def from_dict(cls, raw: Mapping) -> "AssessmentPlan":
        try:
            return cls(
                organization_name=str(raw["organization_name"]),
                model_version=str(raw["model_version"]),
                scope_note=str(raw.get("scope_note", "")),
                schedule_note=str(raw.get("schedule_note", "")),
                participants=tuple(
                    Participant.from_dict(p) for p in raw.get("participants", [])
                ),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise PlanError(f"malformed plan: {exc}") from exc


@dataclass(frozen=True)
class Event:
    seq: int
    timestamp: str
    type: str
    actor: str
    payload: dict

    def to_dict(self) -> dict:
        return {
            "seq": self.seq,
            "timestamp": self.timestamp,
            "type": self.type,
            "actor": self.actor,
            "payload": self.payload,
        }

    def to_json_line(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, separators=(",", ":"))

    @classmethod
    def from_dict(cls, raw: Mapping) -> "Event":
        return cls(
            seq=int(raw["seq"]),
            timestamp=str(raw["timestamp"]),
            type=str(raw["type"]),
            actor=str(raw["actor"]),
            payload=dict(raw["payload"]),
        )


@dataclass
class PokerRound:
    round_number: int
    expected_voters: tuple[str, ...]
    votes: dict[str, Rating] = field(default_factory=dict)
    revealed: bool = False
    justifications: dict[str, str] = field(default_factory=dict)

    def unanimous(self) -> Rating | None:
        """The single rating everyone chose, or None if votes differ."""
        values = set(self.votes.values())
        if len(values) == 1 and len(self.votes) == len(self.expected_voters):
            return next(iter(values))
        return None

    def complete(self) -> bool:
        return set(self.votes) >= set(self.expected_voters)


@dataclass
class ItemRecord:
    indicator_id: int
    rounds: list[PokerRound] = field(default_factory=list)
    consensus: Rating | None = None
    evidence: list[str] = field(default_factory=list)

    @property
    def current_round(self) -> PokerRound | None:
        return self.rounds[-1] if self.rounds else None


@dataclass(frozen=True)
class Consensus:
    """Outcome of resolving a unanimous round: ready for the moderator."""

    rating: Rating


@dataclass(frozen=True)
class NewRound:
    """Outcome of resolving a split round: a fresh voting round was opened."""

    round_number: int


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _new_id() -> str:
    return uuid.uuid4().hex


class AssessmentSession:
    """Serialized event-sourced session; commands validate, emit, apply."""

    def __init__(self, *, now: Callable[[], str] | None = None,
                 id_factory: Callable[[], str] | None = None):
        self.now = now or _utc_now
        self.id_factory = id_factory or _new_id
        self.id: str = ""
        self.join_token: str = ""
        self.phase: Phase = Phase.PLANNING
        self.organization_name: str = ""
        self.scope_note: str = ""
        self.schedule_note: str = ""
        self.model_version: str = ""
        self.round_cap: int = DEFAULT_ROUND_CAP
        self.participants: dict[str, Participant] = {}
        self.item_order: list[int] = []
        self.items: dict[int, ItemRecord] = {}
        self.current_item_id: int | None = None
        self.created_at: str = ""
        self.closed_at: str | None = None
        self.events: list[Event] = []

    # -- construction -------------------------------------------------------

    @classmethod
    def create(
        cls,
        plan: AssessmentPlan,
        model: ReferenceModel,
        *,
        session_id: str | None = None,
        join_token: str | None = None,
        round_cap: int = DEFAULT_ROUND_CAP,
        now: Callable[[], str] | None = None,
        id_factory: Callable[[], str] | None = None,
    ) -> "AssessmentSession":
        session = cls(now=now, id_factory=id_factory)
        problems = plan.violations()
        if plan.model_version and plan.model_version != model.version:
            problems.append(
                f"plan model version {plan.model_version!r} does not match"
                f" loaded model {model.version!r}"
            )
        if problems:
            raise PlanError("; ".join(problems))
        if round_cap < 1:
            raise PlanError("round cap must be at least 1")
        plan_dict = plan.to_dict()
        plan_dict["model_version"] = plan.model_version or model.version
        session._emit(
            "session_created",
            actor="system",
            payload={
                "session_id": session_id or session.id_factory(),
                "join_token": join_token or session.id_factory(),
                "plan": plan_dict,
                "indicator_ids": model.indicator_ids(),
                "round_cap": round_cap,
            },
        )
        return session

    @classmethod
    def replay(
        cls, events: Iterable[Event | Mapping], *,
        now: Callable[[], str] | None = None,
    ) -> "AssessmentSession":
        session = cls(now=now)
        for raw in events:
            event = raw if isinstance(raw, Event) else Event.from_dict(raw)
            expected = len(session.events) + 1
            if event.seq != expected:
                raise SessionError(
                    f"event log out of order: expected seq {expected}, got {event.seq}"
                )
            session.events.append(event)
            session._apply(event)
        return session

    # -- helpers -------------------------------------------------------------

    def _emit(self, type: str, actor: str, payload: dict) -> Event:
        event = Event(
            seq=len(self.events) + 1,
            timestamp=self.now(),
            type=type,
            actor=actor,
            payload=payload,
        )
        self.events.append(event)
        self._apply(event)
        return event

    def participant(self, participant_id: str) -> Participant | None:
        return self.participants.get(participant_id)

    def moderator(self) -> Participant:
        for p in self.participants.values():
            if p.role is Role.MODERATOR:
                return p
        raise PlanError("session has no moderator")

    def assessor_ids(self) -> list[str]:
        return [p.id for p in self.participants.values() if p.role is Role.ASSESSOR]

    def unresolved_items(self) -> list[int]:
        return [i for i in self.item_order if self.items[i].consensus is None]

    def current_item(self) -> ItemRecord | None:
        if self.current_item_id is None:
            return None
        return self.items[self.current_item_id]

    def _require_phase(self, *allowed: Phase) -> None:
        if self.phase not in allowed:
            raise WrongPhaseError(
                f"command not allowed in phase {self.phase.value};"
                f" requires {'/'.join(p.value for p in allowed)}"
            )

    def _require_current_round(self) -> tuple[ItemRecord, PokerRound]:
        item = self.current_item()
        if item is None or item.current_round is None:
            raise RoundStateError("no open item")
        return item, item.current_round

    # -- commands ------------------------------------------------------------

    def join(self, display_name: str, role: Role | str,
             *, participant_id: str | None = None) -> Participant:
        """Claim a planned seat (same name and role) or register a new one.

        New assessors become eligible to vote when the next item opens, not
        mid-round. Joining is allowed until data collection ends.
        """
        self._require_phase(Phase.PLANNING, Phase.COLLECTING)
        role = Role(role)
        name = display_name.strip()
        if not name:
            raise PlanError("display name is empty")
        for existing in self.participants.values():
            if existing.display_name == name and existing.role is role:
                self._emit(
                    "participant_joined",
                    actor=existing.id,
                    payload={"participant": existing.to_dict(), "rejoined": True},
                )
                return existing
        if role is Role.MODERATOR:
            raise PlanError("session already has a moderator")
        participant = Participant(
            id=participant_id or self.id_factory(), display_name=name, role=role
        )
        self._emit(
            "participant_joined",
            actor=participant.id,
            payload={"participant": participant.to_dict(), "rejoined": False},
        )
        return participant

    def begin_collection(self) -> None:
        """Open data collection and present the first item."""
        self._require_phase(Phase.PLANNING)
        if not self.assessor_ids():
            raise PlanError("no assessors")
        self._emit(
            "phase_changed",
            actor=self.moderator().id,
            payload={
                "from": Phase.PLANNING.value,
                "to": Phase.COLLECTING.value,
                "briefing": BRIEFING,
            },
        )
        self._open_item(self.unresolved_items()[0])

    def _open_item(self, indicator_id: int) -> None:
        self._emit(
            "item_opened",
            actor=self.moderator().id,
            payload={
                "indicator_id": indicator_id,
                "round_number": 1,
                "expected_voters": sorted(self.assessor_ids()),
            },
        )

    def cast_vote(self, assessor_id: str, rating: Rating | str) -> None:
        """Record (or revise) a hidden vote; auto-reveal on the last one."""
        self._require_phase(Phase.COLLECTING)
        rating = rating if isinstance(rating, Rating) else rating_from_letter(rating)
        participant = self.participant(assessor_id)
        if participant is None or participant.role is not Role.ASSESSOR:
            raise RoleError("only assessors rate indicators")
        item, round_ = self._require_current_round()
        if round_.revealed:
            raise RoundStateError("round already revealed")
        if assessor_id not in round_.expected_voters:
            raise RoleError("assessor joined after this item opened; eligible from the next item")
        voters = set(round_.votes) | {assessor_id}
        self._emit(
            "vote_cast",
            actor=assessor_id,
            payload={
                "indicator_id": item.indicator_id,
                "round_number": round_.round_number,
                "rating": rating.value,
                "votes_cast": len(voters),
                "votes_expected": len(round_.expected_voters),
            },
        )
        if voters >= set(round_.expected_voters):
            self._emit(
                "round_revealed",
                actor="system",
                payload={
                    "indicator_id": item.indicator_id,
                    "round_number": round_.round_number,
                    "votes": {a: r.value for a, r in sorted(round_.votes.items())},
                },
            )

    def record_justification(self, assessor_id: str, text: str) -> None:
        """Attach a short explanation to the revealed round's own vote."""
        self._require_phase(Phase.COLLECTING)
        participant = self.participant(assessor_id)
        if participant is None or participant.role is not Role.ASSESSOR:
            raise RoleError("only assessors justify their votes")
        item, round_ = self._require_current_round()
        if not round_.revealed:
            raise RoundStateError("justifications follow a revealed round")
        self._emit(
            "justification_recorded",
            actor=assessor_id,
            payload={
                "indicator_id": item.indicator_id,
                "round_number": round_.round_number,
                "text": text,
            },
        )

    def resolve_round(self) -> Consensus | NewRound:
        """After a reveal: hand a unanimous rating to the moderator, or open
        the next round (carrying the split round's votes and justifications)."""
        self._require_phase(Phase.COLLECTING)
        item, round_ = self._require_current_round()
        if not round_.revealed:
            raise RoundStateError("round not yet revealed")
        unanimous = round_.unanimous()
        if unanimous is not None:
            return Consensus(unanimous)
        if len(item.rounds) >= self.round_cap:
            raise RoundStateError(
                f"round cap ({self.round_cap}) reached; the moderator must"
                " record an override consensus"
            )
        self._emit(
            "round_reopened",
            actor=self.moderator().id,
            payload={
                "indicator_id": item.indicator_id,
                "round_number": round_.round_number + 1,
                "expected_voters": list(round_.expected_voters),
                "previous_round": {
                    "round_number": round_.round_number,
                    "votes": {a: r.value for a, r in sorted(round_.votes.items())},
                    "justifications": dict(sorted(round_.justifications.items())),
                },
            },
        )
        return NewRound(round_.round_number + 1)

    def record_consensus(
        self, moderator_id: str, rating: Rating | str, evidence: Sequence[str] = ()
    ) -> None:
        """Close the current item with its consensus rating and evidence.

        A rating that contradicts the revealed round's unanimity (or is
        recorded over a split round) is an override and requires the first
        evidence entry to start with ``justification:``.
        """
        self._require_phase(Phase.COLLECTING)
        rating = rating if isinstance(rating, Rating) else rating_from_letter(rating)
        participant = self.participant(moderator_id)
        if participant is None or participant.role is not Role.MODERATOR:
            raise RoleError("only the moderator records consensus")
        item, round_ = self._require_current_round()
        if not round_.revealed:
            raise RoundStateError("current round not revealed")
        evidence = [str(e) for e in evidence]
        unanimous = round_.unanimous()
        override = unanimous is None or unanimous is not rating
        if override and not (
            evidence and evidence[0].strip().lower().startswith(OVERRIDE_PREFIX)
        ):
            raise ConsensusError(
                "recorded rating is not the unanimous outcome; supply a leading"
                f" '{OVERRIDE_PREFIX}' evidence entry to override"
            )
        self._emit(
            "consensus_recorded",
            actor=moderator_id,
            payload={
                "indicator_id": item.indicator_id,
                "rating": rating.value,
                "evidence": evidence,
                "override": override,
            },
        )
        unresolved = self.unresolved_items()
        if unresolved:
            self._open_item(unresolved[0])

    def finalize(self, model: ReferenceModel) -> tuple[ResponseSheet, ProcessProfile]:
        """Derive the consensus response sheet and profile; enter reporting."""
        self._require_phase(Phase.COLLECTING)
        unresolved = self.unresolved_items()
        if unresolved:
            raise IncompleteSessionError(unresolved)
        if model.version != self.model_version:
            raise SessionError(
                f"session uses model {self.model_version!r}, loaded model is"
                f" {model.version!r}"
            )
        moderator_id = self.moderator().id
        self._emit(
            "phase_changed",
            actor=moderator_id,
            payload={"from": Phase.COLLECTING.value, "to": Phase.GENERATING.value},
        )
        sheet = self.response_sheet()
        profile = build_profile(sheet, model)
        self._emit(
            "phase_changed",
            actor=moderator_id,
            payload={"from": Phase.GENERATING.value, "to": Phase.REPORTING.value},
        )
        return sheet, profile

    def close(self) -> None:
        self._require_phase(Phase.REPORTING)
        self._emit(
            "phase_changed",
            actor=self.moderator().id,
            payload={"from": Phase.REPORTING.value, "to": Phase.CLOSED.value},
        )

    def response_sheet(self) -> ResponseSheet:
        unresolved = self.unresolved_items()
        if unresolved:
            raise IncompleteSessionError(unresolved)
        return ResponseSheet(
            model_version=self.model_version,
            respondent_label=f"{self.organization_name} (consensus)",
            ratings={i: self.items[i].consensus for i in self.item_order},
        )

    def state_dict(self) -> dict:
        """Full (unscoped) state as plain data; replay-equality compares this."""
        return {
            "id": self.id,
            "phase": self.phase.value,
            "organization_name": self.organization_name,
            "scope_note": self.scope_note,
            "schedule_note": self.schedule_note,
            "model_version": self.model_version,
            "round_cap": self.round_cap,
            "created_at": self.created_at,
            "closed_at": self.closed_at,
            "current_item": self.current_item_id,
            "participants": [
                self.participants[pid].to_dict() for pid in sorted(self.participants)
            ],
            "items": {
                str(i): {
                    "consensus": item.consensus.value if item.consensus else None,
                    "evidence": list(item.evidence),
                    "rounds": [
                        {
                            "round_number": r.round_number,
                            "expected_voters": list(r.expected_voters),
                            "votes": {a: v.value for a, v in sorted(r.votes.items())},
                            "revealed": r.revealed,
                            "justifications": dict(sorted(r.justifications.items())),
                        }
                        for r in item.rounds
                    ],
                }
                for i, item in sorted(self.items.items())
            },
            "event_count": len(self.events),
        }

    # -- event application ----------------------------------------------------

    def _apply(self, event: Event) -> None:
        handler = getattr(self, "_apply_" + event.type, None)
        if handler is None:
            raise SessionError(f"unknown event type: {event.type}")
        handler(event)

    def _apply_session_created(self, event: Event) -> None:
        payload = event.payload
        plan = AssessmentPlan.from_dict(payload["plan"])
        self.id = payload["session_id"]
        self.join_token = payload["join_token"]
        self.organization_name = plan.organization_name
        self.scope_note = plan.scope_note
        self.schedule_note = plan.schedule_note
        self.model_version = plan.model_version
        self.round_cap = int(payload["round_cap"])
        self.participants = {p.id: p for p in plan.participants}
        self.item_order = [int(i) for i in payload["indicator_ids"]]
        self.items = {i: ItemRecord(indicator_id=i) for i in self.item_order}
        self.current_item_id = None
        self.created_at = event.timestamp
        self.phase = Phase.PLANNING

    def _apply_participant_joined(self, event: Event) -> None:
        participant = Participant.from_dict(event.payload["participant"])
        self.participants[participant.id] = participant

    def _apply_phase_changed(self, event: Event) -> None:
        self.phase = Phase(event.payload["to"])
        if self.phase is Phase.CLOSED:
            self.closed_at = event.timestamp

    def _apply_item_opened(self, event: Event) -> None:
        indicator_id = int(event.payload["indicator_id"])
        self.current_item_id = indicator_id
        item = self.items[indicator_id]
        if not item.rounds:
            item.rounds.append(
                PokerRound(
                    round_number=1,
                    expected_voters=tuple(event.payload["expected_voters"]),
                )
            )

    def _apply_round_reopened(self, event: Event) -> None:
        item = self.items[int(event.payload["indicator_id"])]
        item.rounds.append(
            PokerRound(
                round_number=int(event.payload["round_number"]),
                expected_voters=tuple(event.payload["expected_voters"]),
            )
        )

    def _apply_vote_cast(self, event: Event) -> None:
        item = self.items[int(event.payload["indicator_id"])]
        item.rounds[-1].votes[event.actor] = Rating(event.payload["rating"])

    def _apply_round_revealed(self, event: Event) -> None:
        item = self.items[int(event.payload["indicator_id"])]
        item.rounds[-1].revealed = True

    def _apply_justification_recorded(self, event: Event) -> None:
        item = self.items[int(event.payload["indicator_id"])]
        item.rounds[-1].justifications[event.actor] = str(event.payload["text"])

    def _apply_consensus_recorded(self, event: Event) -> None:
        item = self.items[int(event.payload["indicator_id"])]
        item.consensus = Rating(event.payload["rating"])
        item.evidence = [str(e) for e in event.payload["evidence"]]
        self.current_item_id = None
