"""Measurement framework: rating scale, achievement percentages and profiles.

Scores are computed in exact rational arithmetic (``fractions.Fraction``);
rounding happens only at presentation time. An achievement percentage is
(sum of rating points) / (2 * number of items) * 100, applied to the whole
questionnaire, to one sub-process, or to any other item scope.

Rating scale: N (not achieved) = 0 points, P (partially achieved) = 1,
F (fully achieved) = 2. Attribute rating thresholds: N for scores up to 15,
P above 15 up to 85, F above 85. Capability level 1 requires an overall
rating of F; anything less is level 0.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Iterable, Mapping

from .model import ReferenceModel


class ScoringError(Exception):
    """Base class for scoring errors."""


class IncompleteSheetError(ScoringError):
    """A response sheet does not cover the model's indicators exactly."""

    def __init__(self, missing: list[int], unexpected: list[int]):
        parts = []
        if missing:
            parts.append("missing items: " + ", ".join(map(str, missing)))
        if unexpected:
            parts.append("unexpected items: " + ", ".join(map(str, unexpected)))
        super().__init__("; ".join(parts) or "incomplete response sheet")
        self.missing = missing
        self.unexpected = unexpected


class Rating(str, Enum):
    N = "N"
    P = "P"
    F = "F"

    @property
    def points(self) -> int:
        return _RATING_POINTS[self]

    @property
    def label(self) -> str:
        return _RATING_LABELS[self]


_RATING_POINTS = {Rating.N: 0, Rating.P: 1, Rating.F: 2}
_RATING_LABELS = {
    Rating.N: "Not achieved",
    Rating.P: "Partially achieved",
    Rating.F: "Fully achieved",
}


def rating_value(rating: Rating) -> int:
    """Numeric encoding of a rating: N=0, P=1, F=2."""
    return _RATING_POINTS[rating]


def rating_from_letter(letter: str) -> Rating:
    try:
        return Rating(letter.strip().upper())
    except ValueError:
        raise ScoringError(f"unknown rating letter: {letter!r}") from None


def rating_from_points(points: int) -> Rating:
    for rating, value in _RATING_POINTS.items():
        if value == points:
            return rating
    raise ScoringError(f"no rating with point value {points}")


@dataclass(frozen=True)
class ResponseSheet:
    """One respondent's complete set of indicator ratings."""

    model_version: str
    respondent_label: str
    ratings: Mapping[int, Rating]

    def missing_items(self, model: ReferenceModel) -> list[int]:
        return [i for i in model.indicator_ids() if i not in self.ratings]

    def unexpected_items(self, model: ReferenceModel) -> list[int]:
        known = set(model.indicator_ids())
        return sorted(i for i in self.ratings if i not in known)

    def require_complete(self, model: ReferenceModel) -> None:
        missing = self.missing_items(model)
        unexpected = self.unexpected_items(model)
        if missing or unexpected:
            raise IncompleteSheetError(missing, unexpected)

    def to_dict(self) -> dict:
        return {
            "model_version": self.model_version,
            "respondent_label": self.respondent_label,
            "ratings": {str(i): self.ratings[i].value for i in sorted(self.ratings)},
        }

    def to_json(self, *, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=indent)

    @classmethod
    def from_dict(cls, raw: Mapping) -> "ResponseSheet":
        try:
            ratings = {
                int(key): rating_from_letter(value)
                for key, value in raw["ratings"].items()
            }
            return cls(
                model_version=str(raw["model_version"]),
                respondent_label=str(raw.get("respondent_label", "")),
                ratings=ratings,
            )
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise ScoringError(f"malformed response sheet: {exc}") from exc

    @classmethod
    def from_json(cls, text: str | bytes) -> "ResponseSheet":
        if isinstance(text, bytes):
            text = text.decode("utf-8")
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ScoringError(f"response sheet is not valid JSON: {exc}") from exc
        return cls.from_dict(raw)

    @classmethod
    def from_csv(
        cls,
        text: str,
        *,
        model_version: str = "",
        respondent_label: str = "",
    ) -> "ResponseSheet":
        """Read ``item id,rating letter`` rows; a non-numeric first row is a header."""
        ratings: dict[int, Rating] = {}
        reader = csv.reader(io.StringIO(text))
        for row_no, row in enumerate(reader, start=1):
            cells = [c.strip() for c in row if c.strip()]
            if not cells:
                continue
            if len(cells) < 2:
                raise ScoringError(f"row {row_no}: expected item id and rating letter")
            if row_no == 1 and not cells[0].lstrip("-").isdigit():
                continue  # header
            try:
                item = int(cells[0])
            except ValueError:
                raise ScoringError(f"row {row_no}: bad item id {cells[0]!r}") from None
            if item in ratings:
                raise ScoringError(f"row {row_no}: duplicate item id {item}")
            ratings[item] = rating_from_letter(cells[1])
        return cls(
            model_version=model_version,
            respondent_label=respondent_label,
            ratings=ratings,
        )


def achievement_percentage(ratings: Iterable[Rating]) -> Fraction:
    """Exact achievement percentage of a list of ratings, in [0, 100]."""
    values = [rating_value(r) for r in ratings]
    if not values:
        raise ScoringError("cannot score an empty list of ratings")
    return Fraction(sum(values), 2 * len(values)) * 100


def subprocess_score(
    sheet: ResponseSheet, sub_process_id: str, model: ReferenceModel
) -> Fraction:
    """Achievement percentage over exactly the indicators of one sub-process."""
    if sub_process_id not in model.sub_process_ids():
        raise ScoringError(f"unknown sub-process: {sub_process_id}")
    sheet.require_complete(model)
    items = model.indicators_for(sub_process_id)
    return achievement_percentage([sheet.ratings[ind.id] for ind in items])


def attribute_rating(score: Fraction | int | float) -> Rating:
    """Map an achievement percentage to its attribute rating.

    N covers [0, 15], P covers (15, 85], F covers (85, 100]; the merged
    three-level scale leaves no gaps.
    """
    p = Fraction(score)
    if p < 0 or p > 100:
        raise ScoringError(f"achievement percentage out of range: {float(p)}")
    if p <= 15:
        return Rating.N
    if p <= 85:
        return Rating.P
    return Rating.F


def capability_level(overall_rating: Rating) -> int:
    """Level 1 (performed) iff the overall performance rating is F."""
    return 1 if overall_rating is Rating.F else 0


@dataclass(frozen=True)
class ProcessProfile:
    """Per-sub-process and overall achievement, ratings and capability level."""

    overall: Fraction
    overall_rating: Rating
    per_sub_process: Mapping[str, tuple[Fraction, Rating]]
    capability_level: int
    model_version: str = ""

    def to_dict(self) -> dict:
        return {
            "model_version": self.model_version,
            "overall": {
                "score": str(self.overall),
                "display": format_score(self.overall),
                "rating": self.overall_rating.value,
            },
            "sub_processes": {
                sp: {
                    "score": str(score),
                    "display": format_score(score),
                    "rating": rating.value,
                }
                for sp, (score, rating) in self.per_sub_process.items()
            },
            "capability_level": self.capability_level,
        }

    @classmethod
    def from_dict(cls, raw: Mapping) -> "ProcessProfile":
        try:
            return cls(
                overall=Fraction(raw["overall"]["score"]),
                overall_rating=rating_from_letter(raw["overall"]["rating"]),
                per_sub_process={
                    sp: (Fraction(cell["score"]), rating_from_letter(cell["rating"]))
                    for sp, cell in raw["sub_processes"].items()
                },
                capability_level=int(raw["capability_level"]),
                model_version=str(raw.get("model_version", "")),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ScoringError(f"malformed profile: {exc}") from exc


def build_profile(sheet: ResponseSheet, model: ReferenceModel) -> ProcessProfile:
    """Compute all sub-process scores, the overall score, ratings and level."""
    sheet.require_complete(model)
    per_sub_process: dict[str, tuple[Fraction, Rating]] = {}
    for sp in model.sub_processes:
        score = subprocess_score(sheet, sp.id, model)
        per_sub_process[sp.id] = (score, attribute_rating(score))
    overall = achievement_percentage(
        [sheet.ratings[i] for i in model.indicator_ids()]
    )
    overall_rating = attribute_rating(overall)
    return ProcessProfile(
        overall=overall,
        overall_rating=overall_rating,
        per_sub_process=per_sub_process,
        capability_level=capability_level(overall_rating),
        model_version=sheet.model_version or model.version,
    )


def format_score(score: Fraction) -> str:
    """Fixed two-decimal presentation with half-up rounding, e.g. ``34.38``."""
    cents = (Fraction(score) * 100 + Fraction(1, 2)).__floor__()
    return f"{cents // 100}.{cents % 100:02d}"


def format_score_trim(score: Fraction) -> str:
    """Two-decimal presentation with trailing zeros trimmed, e.g. ``90``."""
    text = format_score(score)
    return text.rstrip("0").rstrip(".")
