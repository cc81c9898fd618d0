"""File-based persistence for sessions and finalized assessments.

Layout under the store root::

    assessments/<id>/events.jsonl   append-only event log, one event per line
    assessments/<id>/snapshot.json  metadata + derived documents + content hash

The event log is the source of truth: loading replays it through the
session state machine. The snapshot carries listing metadata (organization,
timestamps, phase), the sha-256 of the log it was written against, and,
once finalized, the response sheet, profile and results documents. Saving
identical content twice leaves the files untouched.
"""
from __future__ import annotations

import hashlib
import json
import os
import re
from datetime import datetime
from pathlib import Path
from typing import Iterator, Mapping

from .session import AssessmentSession, Event, SessionError

_ID_PATTERN = re.compile(r"^[A-Za-z0-9_-]+$")


class StoreError(Exception):
    """Base class for persistence errors."""


class NotFoundError(StoreError):
    """No stored assessment with the requested id."""


class CorruptLogError(StoreError):
    """The event log cannot be replayed past ``last_valid_seq``."""

    def __init__(self, message: str, last_valid_seq: int):
        super().__init__(f"{message} (last valid seq {last_valid_seq})")
        self.last_valid_seq = last_valid_seq


def _atomic_write(path: Path, data: bytes) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


class AssessmentStore:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        (self.root / "assessments").mkdir(parents=True, exist_ok=True)

    def _session_dir(self, session_id: str) -> Path:
        if not _ID_PATTERN.match(session_id):
            raise NotFoundError(f"invalid assessment id: {session_id!r}")
        return self.root / "assessments" / session_id

    # -- saving ---------------------------------------------------------------

    def save_session(
        self,
        session: AssessmentSession,
        *,
        sheet: Mapping | None = None,
        profile: Mapping | None = None,
        results: Mapping | None = None,
    ) -> str:
        """Persist the event log and snapshot; idempotent on identical content."""
        if not session.id:
            raise StoreError("session has no id")
        directory = self._session_dir(session.id)
        directory.mkdir(parents=True, exist_ok=True)
        log_bytes = (
            "\n".join(e.to_json_line() for e in session.events) + "\n"
        ).encode("utf-8")
        log_path = directory / "events.jsonl"
        if not log_path.exists() or log_path.read_bytes() != log_bytes:
            _atomic_write(log_path, log_bytes)
        snapshot_path = directory / "snapshot.json"
        previous: dict = {}
        if snapshot_path.exists():
            try:
                previous = json.loads(snapshot_path.read_text("utf-8"))
            except json.JSONDecodeError:
                previous = {}
        snapshot = {
            "id": session.id,
            "organization": session.organization_name,
            "created_at": session.created_at,
            "closed_at": session.closed_at,
            "phase": session.phase.value,
            "model_version": session.model_version,
            "join_token": session.join_token,
            "event_count": len(session.events),
            "content_hash": hashlib.sha256(log_bytes).hexdigest(),
            "sheet": dict(sheet) if sheet is not None else previous.get("sheet"),
            "profile": dict(profile) if profile is not None else previous.get("profile"),
            "results": dict(results) if results is not None else previous.get("results"),
        }
        snapshot_bytes = (
            json.dumps(snapshot, ensure_ascii=False, indent=2, sort_keys=True) + "\n"
        ).encode("utf-8")
        if not snapshot_path.exists() or snapshot_path.read_bytes() != snapshot_bytes:
            _atomic_write(snapshot_path, snapshot_bytes)
        return session.id

    # -- loading ----------------------------------------------------------------

    def _read_events(self, session_id: str) -> Iterator[Event]:
        log_path = self._session_dir(session_id) / "events.jsonl"
        if not log_path.exists():
            raise NotFoundError(f"no stored assessment {session_id!r}")
        last_valid = 0
        with log_path.open("r", encoding="utf-8") as handle:
            for line_no, line in enumerate(handle, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    event = Event.from_dict(json.loads(line))
                except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                    raise CorruptLogError(
                        f"bad event at line {line_no}: {exc}", last_valid
                    ) from exc
                if event.seq != last_valid + 1:
                    raise CorruptLogError(
                        f"seq gap at line {line_no}: expected {last_valid + 1},"
                        f" got {event.seq}",
                        last_valid,
                    )
                last_valid = event.seq
                yield event

    def load_session(self, session_id: str) -> AssessmentSession:
        """Rebuild the session by replaying its event log."""
        events = list(self._read_events(session_id))
        if not events:
            raise CorruptLogError("event log is empty", 0)
        try:
            return AssessmentSession.replay(events)
        except SessionError as exc:
            raise CorruptLogError(str(exc), events[0].seq - 1) from exc

    def load_snapshot(self, session_id: str) -> dict:
        path = self._session_dir(session_id) / "snapshot.json"
        if not path.exists():
            raise NotFoundError(f"no stored assessment {session_id!r}")
        try:
            return json.loads(path.read_text("utf-8"))
        except json.JSONDecodeError as exc:
            raise StoreError(f"snapshot for {session_id!r} is corrupt: {exc}") from exc

    def exists(self, session_id: str) -> bool:
        try:
            return (self._session_dir(session_id) / "events.jsonl").exists()
        except NotFoundError:
            return False

    # -- listing ------------------------------------------------------------------

    def list_assessments(
        self,
        organization: str | None = None,
        since: str | None = None,
        until: str | None = None,
    ) -> list[dict]:
        """Stored assessment summaries, oldest first (then by id).

        ``since``/``until`` are inclusive ISO-8601 bounds on the creation
        timestamp.
        """

        def parse(ts: str) -> datetime | None:
            try:
                return datetime.fromisoformat(ts)
            except ValueError:
                return None

        since_dt = parse(since) if since else None
        until_dt = parse(until) if until else None
        summaries = []
        base = self.root / "assessments"
        for entry in sorted(base.iterdir()) if base.exists() else []:
            if not (entry / "snapshot.json").exists():
                continue
            snapshot = self.load_snapshot(entry.name)
            if organization and snapshot.get("organization") != organization:
                continue
            created = parse(snapshot.get("created_at", "")) if snapshot.get("created_at") else None
            if since_dt and (created is None or created < since_dt):
                continue
            if until_dt and (created is None or created > until_dt):
                continue
            summaries.append(
                {
                    "id": snapshot.get("id", entry.name),
                    "organization": snapshot.get("organization", ""),
                    "created_at": snapshot.get("created_at", ""),
                    "closed_at": snapshot.get("closed_at"),
                    "phase": snapshot.get("phase", ""),
                    "model_version": snapshot.get("model_version", ""),
                }
            )
        summaries.sort(key=lambda s: (s["created_at"], s["id"]))
        return summaries
