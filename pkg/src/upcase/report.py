"""Assessment results and report rendering.

Results partition the questionnaire into strengths (items rated F) and
weaknesses (items rated N or P); every weakness yields an improvement
opportunity composed strictly from model content (practice, description,
technique examples), never free text. Reports render deterministically to
markdown, HTML or JSON with a fixed section order: summary, process
profile, strengths, weaknesses, improvement opportunities, evidence
appendix. The summary leads with the improvement opportunities; the
process rating comes after.
"""
from __future__ import annotations

import html
import json
from dataclasses import dataclass
from typing import Mapping, Sequence

from .model import ReferenceModel, lookup_indicator
from .scoring import (
    ProcessProfile,
    Rating,
    ResponseSheet,
    build_profile,
    format_score_trim,
)

UNSPECIFIED_MARKER = "(unspecified in this model version)"

REPORT_FORMATS = ("markdown", "html", "json")


class ReportError(Exception):
    """Base class for report errors."""


class ProfileMismatchError(ReportError):
    """The supplied profile does not match the response sheet."""


class UnsupportedFormatError(ReportError):
    """Requested rendering format is not one of markdown/html/json."""


@dataclass(frozen=True)
class AssessmentResults:
    profile: ProcessProfile
    strengths: tuple[tuple[int, str], ...]
    weaknesses: tuple[tuple[int, str, str], ...]
    improvement_opportunities: tuple[tuple[int, str], ...]
    evidence_index: Mapping[int, tuple[str, ...]]
    metadata: Mapping[str, object]

    def to_dict(self) -> dict:
        return {
            "profile": self.profile.to_dict(),
            "strengths": [
                {"indicator_id": i, "statement": s} for i, s in self.strengths
            ],
            "weaknesses": [
                {"indicator_id": i, "statement": s, "rating": r}
                for i, s, r in self.weaknesses
            ],
            "improvement_opportunities": [
                {"indicator_id": i, "focus": text}
                for i, text in self.improvement_opportunities
            ],
            "evidence_index": {
                str(i): list(entries) for i, entries in sorted(self.evidence_index.items())
            },
            "metadata": dict(self.metadata),
        }

    @classmethod
    def from_dict(cls, raw: Mapping) -> "AssessmentResults":
        try:
            return cls(
                profile=ProcessProfile.from_dict(raw["profile"]),
                strengths=tuple(
                    (int(s["indicator_id"]), str(s["statement"]))
                    for s in raw["strengths"]
                ),
                weaknesses=tuple(
                    (int(w["indicator_id"]), str(w["statement"]), str(w["rating"]))
                    for w in raw["weaknesses"]
                ),
                improvement_opportunities=tuple(
                    (int(o["indicator_id"]), str(o["focus"]))
                    for o in raw["improvement_opportunities"]
                ),
                evidence_index={
                    int(i): tuple(entries)
                    for i, entries in raw["evidence_index"].items()
                },
                metadata=dict(raw["metadata"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ReportError(f"malformed results document: {exc}") from exc

    @classmethod
    def from_json(cls, text: str | bytes) -> "AssessmentResults":
        if isinstance(text, bytes):
            text = text.decode("utf-8")
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ReportError(f"results document is not valid JSON: {exc}") from exc


def _improvement_focus(model: ReferenceModel, indicator_id: int) -> str:
    ind = lookup_indicator(model, indicator_id)
    parts = [ind.practice.rstrip(".") + "."]
    if ind.description and ind.description != UNSPECIFIED_MARKER:
        parts.append(ind.description)
    techniques = [t for t in ind.techniques if t != UNSPECIFIED_MARKER]
    if techniques:
        parts.append("Suggested techniques: " + ", ".join(techniques) + ".")
    return " ".join(parts)


def generate_results(
    sheet: ResponseSheet,
    profile: ProcessProfile,
    model: ReferenceModel,
    session_metadata: Mapping[str, object] | None = None,
    evidence: Mapping[int, Sequence[str]] | None = None,
) -> AssessmentResults:
    """Partition the rated indicators and assemble the results document.

    Raises ProfileMismatchError when the given profile does not equal the
    profile recomputed from the sheet.
    """
    sheet.require_complete(model)
    recomputed = build_profile(sheet, model)
    if recomputed != profile:
        raise ProfileMismatchError("profile does not match the response sheet")
    strengths = []
    weaknesses = []
    opportunities = []
    for indicator_id in model.indicator_ids():
        rating = sheet.ratings[indicator_id]
        statement = lookup_indicator(model, indicator_id).statement
        if rating is Rating.F:
            strengths.append((indicator_id, statement))
        else:
            weaknesses.append((indicator_id, statement, rating.value))
            opportunities.append(
                (indicator_id, _improvement_focus(model, indicator_id))
            )
    evidence_index = {
        int(i): tuple(str(e) for e in entries)
        for i, entries in (evidence or {}).items()
        if entries
    }
    metadata = {
        "organization": "",
        "date": "",
        "participants": [],
        "model_version": sheet.model_version or model.version,
    }
    metadata.update(dict(session_metadata or {}))
    return AssessmentResults(
        profile=profile,
        strengths=tuple(strengths),
        weaknesses=tuple(weaknesses),
        improvement_opportunities=tuple(opportunities),
        evidence_index=evidence_index,
        metadata=metadata,
    )


def _extreme_sub_processes(profile: ProcessProfile):
    scores = {sp: score for sp, (score, _) in profile.per_sub_process.items()}
    low = min(scores.values())
    high = max(scores.values())
    lowest = [sp for sp, s in scores.items() if s == low]
    highest = [sp for sp, s in scores.items() if s == high]
    return lowest, low, highest, high


def _profile_rows(profile: ProcessProfile) -> list[tuple[str, str, str]]:
    rows = [
        (
            "Usability process",
            format_score_trim(profile.overall),
            profile.overall_rating.value,
        )
    ]
    for sp, (score, rating) in profile.per_sub_process.items():
        rows.append((sp, format_score_trim(score), rating.value))
    return rows


def _summary_lines(results: AssessmentResults) -> list[str]:
    profile = results.profile
    lowest, low, highest, high = _extreme_sub_processes(profile)
    org = str(results.metadata.get("organization") or "the organization")
    lines = [
        f"Usability process self-assessment of {org}.",
        (
            f"The assessment identified {len(results.improvement_opportunities)}"
            " improvement opportunities; these, not the rating, are the focus"
            " of the assessment."
        ),
        (
            "Lowest-rated sub-process: " + ", ".join(lowest)
            + f" (score {format_score_trim(low)})."
        ),
        (
            "Highest-rated sub-process: " + ", ".join(highest)
            + f" (score {format_score_trim(high)})."
        ),
        (
            f"Overall achievement: {format_score_trim(profile.overall)}"
            f" ({profile.overall_rating.value}), capability level"
            f" {profile.capability_level}."
        ),
    ]
    return lines


def _unsupported_evidence_notes(results: AssessmentResults) -> list[str]:
    """F-rated items that cite no work-product evidence."""
    notes = []
    for indicator_id, _ in results.strengths:
        if not results.evidence_index.get(indicator_id):
            notes.append(
                f"Item {indicator_id} is rated F but cites no work-product evidence."
            )
    return notes


def _render_markdown(results: AssessmentResults) -> str:
    lines: list[str] = []
    org = str(results.metadata.get("organization") or "")
    title = "Usability process assessment report"
    if org:
        title += f": {org}"
    lines.append(f"# {title}")
    lines.append("")
    if results.metadata.get("date"):
        lines.append(f"Date: {results.metadata['date']}")
    participants = results.metadata.get("participants") or []
    if participants:
        lines.append("Participants: " + ", ".join(str(p) for p in participants))
    lines.append(f"Model version: {results.metadata.get('model_version', '')}")
    lines.append("")
    lines.append("## Summary")
    lines.append("")
    lines.extend(_summary_lines(results))
    lines.append("")
    lines.append("## Process profile")
    lines.append("")
    lines.append("| Scope | Score | Rating |")
    lines.append("| --- | --- | --- |")
    for scope, score, rating in _profile_rows(results.profile):
        lines.append(f"| {scope} | {score} | {rating} |")
    lines.append("")
    lines.append(f"Capability level: {results.profile.capability_level}")
    lines.append("")
    lines.append("## Strengths")
    lines.append("")
    if results.strengths:
        for indicator_id, statement in results.strengths:
            lines.append(f"- Item {indicator_id}: {statement}")
    else:
        lines.append("No items were rated as fully achieved.")
    lines.append("")
    lines.append("## Weaknesses")
    lines.append("")
    if results.weaknesses:
        for indicator_id, statement, rating in results.weaknesses:
            lines.append(f"- Item {indicator_id} ({rating}): {statement}")
    else:
        lines.append("No items were rated below fully achieved.")
    lines.append("")
    lines.append("## Improvement opportunities")
    lines.append("")
    if results.improvement_opportunities:
        for indicator_id, focus in results.improvement_opportunities:
            lines.append(f"- Item {indicator_id}: {focus}")
    else:
        lines.append("No improvement opportunities: every item is fully achieved.")
    lines.append("")
    lines.append("## Evidence")
    lines.append("")
    if results.evidence_index:
        for indicator_id in sorted(results.evidence_index):
            for entry in results.evidence_index[indicator_id]:
                lines.append(f"- Item {indicator_id}: {entry}")
    else:
        lines.append("No work products were cited.")
    notes = _unsupported_evidence_notes(results)
    if notes:
        lines.append("")
        for note in notes:
            lines.append(f"- Note: {note}")
    lines.append("")
    return "\n".join(lines)


def _render_html(results: AssessmentResults) -> str:
    def esc(value: object) -> str:
        return html.escape(str(value), quote=True)

    org = str(results.metadata.get("organization") or "")
    title = "Usability process assessment report"
    if org:
        title += f": {org}"
    parts = [
        "<!DOCTYPE html>",
        '<html lang="en">',
        "<head>",
        '<meta charset="utf-8">',
        f"<title>{esc(title)}</title>",
        "</head>",
        "<body>",
        f"<h1>{esc(title)}</h1>",
        "<h2>Summary</h2>",
    ]
    for line in _summary_lines(results):
        parts.append(f"<p>{esc(line)}</p>")
    parts.append("<h2>Process profile</h2>")
    parts.append("<table>")
    parts.append("<tr><th>Scope</th><th>Score</th><th>Rating</th></tr>")
    for scope, score, rating in _profile_rows(results.profile):
        parts.append(
            f"<tr><td>{esc(scope)}</td><td>{esc(score)}</td><td>{esc(rating)}</td></tr>"
        )
    parts.append("</table>")
    parts.append(f"<p>Capability level: {results.profile.capability_level}</p>")

    def listing(title_text: str, entries: list[str], empty: str) -> None:
        parts.append(f"<h2>{esc(title_text)}</h2>")
        if entries:
            parts.append("<ul>")
            for entry in entries:
                parts.append(f"<li>{esc(entry)}</li>")
            parts.append("</ul>")
        else:
            parts.append(f"<p>{esc(empty)}</p>")

    listing(
        "Strengths",
        [f"Item {i}: {s}" for i, s in results.strengths],
        "No items were rated as fully achieved.",
    )
    listing(
        "Weaknesses",
        [f"Item {i} ({r}): {s}" for i, s, r in results.weaknesses],
        "No items were rated below fully achieved.",
    )
    listing(
        "Improvement opportunities",
        [f"Item {i}: {focus}" for i, focus in results.improvement_opportunities],
        "No improvement opportunities: every item is fully achieved.",
    )
    evidence_entries = [
        f"Item {i}: {entry}"
        for i in sorted(results.evidence_index)
        for entry in results.evidence_index[i]
    ]
    evidence_entries.extend(_unsupported_evidence_notes(results))
    listing("Evidence", evidence_entries, "No work products were cited.")
    parts.append("</body>")
    parts.append("</html>")
    return "\n".join(parts)


def render_report(results: AssessmentResults, format: str = "markdown") -> bytes:
    """Render the results document; same input always yields the same bytes."""
    if format == "markdown":
        return _render_markdown(results).encode("utf-8")
    if format == "html":
        return _render_html(results).encode("utf-8")
    if format == "json":
        return (
            json.dumps(results.to_dict(), ensure_ascii=False, indent=2, sort_keys=True)
            + "\n"
        ).encode("utf-8")
    raise UnsupportedFormatError(
        f"unsupported format {format!r}; expected one of {', '.join(REPORT_FORMATS)}"
    )
