"""Process reference model and assessment model for the usability process.

The model is data, not code: sub-processes, indicators (questionnaire items
with practice descriptions, technique and work-product examples) and a
glossary live in a versioned JSON document. The engine is model-agnostic so
that customized models can be loaded; the canonical content ships with the
package as ``data/upcase-1.0.json``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from typing import Any, BinaryIO, Mapping

DEFAULT_MODEL_RESOURCE = "upcase-1.0.json"


class ModelError(Exception):
    """Base class for reference-model errors."""


class ModelFormatError(ModelError):
    """The model document is not well-formed (bad JSON or wrong structure)."""


class ModelValidationError(ModelError):
    """The model document parsed but violates model invariants."""

    def __init__(self, violations: list[str]):
        super().__init__("invalid reference model: " + "; ".join(violations))
        self.violations = violations


class IndicatorNotFoundError(ModelError, LookupError):
    """No indicator with the requested id exists in the model."""


@dataclass(frozen=True)
class SubProcess:
    id: str
    title: str
    purpose: str
    outcomes: tuple[str, ...]


@dataclass(frozen=True)
class Indicator:
    id: int
    sub_process: str
    practice: str
    description: str
    statement: str
    techniques: tuple[str, ...]
    work_products: tuple[str, ...]


@dataclass(frozen=True)
class GlossaryEntry:
    term: str
    definition: str


@dataclass(frozen=True)
class ReferenceModel:
    """Immutable after load; safe to share across concurrent readers."""

    version: str
    sub_processes: tuple[SubProcess, ...]
    indicators: tuple[Indicator, ...]
    glossary: tuple[GlossaryEntry, ...]

    def sub_process_ids(self) -> list[str]:
        return [sp.id for sp in self.sub_processes]

    def indicator_ids(self) -> list[int]:
        return sorted(ind.id for ind in self.indicators)

    def indicators_for(self, sub_process_id: str) -> list[Indicator]:
        return sorted(
            (ind for ind in self.indicators if ind.sub_process == sub_process_id),
            key=lambda ind: ind.id,
        )

    def glossary_term(self, term: str) -> GlossaryEntry | None:
        wanted = term.strip().lower()
        for entry in self.glossary:
            if entry.term.lower() == wanted:
                return entry
        return None

    def to_dict(self) -> dict[str, Any]:
        return {
            "version": self.version,
            "sub_processes": [
                {
                    "id": sp.id,
                    "title": sp.title,
                    "purpose": sp.purpose,
                    "outcomes": list(sp.outcomes),
                }
                for sp in self.sub_processes
            ],
            "indicators": [
                {
                    "id": ind.id,
                    "sub_process": ind.sub_process,
                    "practice": ind.practice,
                    "description": ind.description,
                    "statement": ind.statement,
                    "techniques": list(ind.techniques),
                    "work_products": list(ind.work_products),
                }
                for ind in self.indicators
            ],
            "glossary": [
                {"term": g.term, "definition": g.definition} for g in self.glossary
            ],
        }


def _require(mapping: Mapping[str, Any], key: str, kind: type, where: str) -> Any:
    if key not in mapping:
        raise ModelFormatError(f"{where}: missing field {key!r}")
    value = mapping[key]
    if kind is int:
        # bool is an int subclass; never acceptable where an int is expected
        if isinstance(value, bool) or not isinstance(value, int):
            raise ModelFormatError(f"{where}: field {key!r} must be an integer")
        return value
    if not isinstance(value, kind):
        raise ModelFormatError(f"{where}: field {key!r} must be {kind.__name__}")
    return value


def _string_list(mapping: Mapping[str, Any], key: str, where: str) -> tuple[str, ...]:
    raw = _require(mapping, key, list, where)
    for item in raw:
        if not isinstance(item, str):
            raise ModelFormatError(f"{where}: entries of {key!r} must be strings")
    return tuple(raw)


def load_reference_model(source: bytes | str | BinaryIO) -> ReferenceModel:
    """Parse and validate a model document.

    ``source`` may be JSON text, UTF-8 bytes or a readable file object.
    Raises ModelFormatError for malformed documents and
    ModelValidationError (carrying the violation list) for documents that
    parse but break model invariants.
    """
    if hasattr(source, "read"):
        source = source.read()  # type: ignore[union-attr]
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    try:
        document = json.loads(source)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ModelFormatError(f"model document is not valid JSON: {exc}") from exc
    if not isinstance(document, dict):
        raise ModelFormatError("model document must be a JSON object")

    version = _require(document, "version", str, "model")
    sub_processes = tuple(
        SubProcess(
            id=_require(raw, "id", str, f"sub_processes[{i}]"),
            title=_require(raw, "title", str, f"sub_processes[{i}]"),
            purpose=_require(raw, "purpose", str, f"sub_processes[{i}]"),
            outcomes=_string_list(raw, "outcomes", f"sub_processes[{i}]"),
        )
        for i, raw in enumerate(_require(document, "sub_processes", list, "model"))
    )
    indicators = tuple(
        Indicator(
            id=_require(raw, "id", int, f"indicators[{i}]"),
            sub_process=_require(raw, "sub_process", str, f"indicators[{i}]"),
            practice=_require(raw, "practice", str, f"indicators[{i}]"),
            description=_require(raw, "description", str, f"indicators[{i}]"),
            statement=_require(raw, "statement", str, f"indicators[{i}]"),
            techniques=_string_list(raw, "techniques", f"indicators[{i}]"),
            work_products=_string_list(raw, "work_products", f"indicators[{i}]"),
        )
        for i, raw in enumerate(_require(document, "indicators", list, "model"))
    )
    glossary = tuple(
        GlossaryEntry(
            term=_require(raw, "term", str, f"glossary[{i}]"),
            definition=_require(raw, "definition", str, f"glossary[{i}]"),
        )
        for i, raw in enumerate(_require(document, "glossary", list, "model"))
    )

    model = ReferenceModel(
        version=version,
        sub_processes=sub_processes,
        indicators=indicators,
        glossary=glossary,
    )
    violations = validate_reference_model(model)
    if violations:
        raise ModelValidationError(violations)
    return model


def validate_reference_model(model: ReferenceModel) -> list[str]:
    """Return the list of invariant violations (empty iff the model is valid).

    Violations are data, not failures; each message names the offending
    element.
    """
    violations: list[str] = []

    if not model.version.strip():
        violations.append("model version is empty")

    sp_ids = [sp.id for sp in model.sub_processes]
    if not sp_ids:
        violations.append("model has no sub-processes")
    for sp in model.sub_processes:
        if sp_ids.count(sp.id) > 1:
            violations.append(f"duplicate sub-process id: {sp.id}")
        if not sp.title.strip():
            violations.append(f"sub-process {sp.id}: empty title")
        if not sp.purpose.strip():
            violations.append(f"sub-process {sp.id}: empty purpose")
    # keep duplicate messages unique while preserving order
    violations = list(dict.fromkeys(violations))

    known_sp = set(sp_ids)
    ids = [ind.id for ind in model.indicators]
    n = len(ids)
    if n == 0:
        violations.append("model has no indicators")
    expected = set(range(1, n + 1))
    for ind in model.indicators:
        if ids.count(ind.id) > 1:
            msg = f"duplicate indicator id: {ind.id}"
            if msg not in violations:
                violations.append(msg)
        if ind.id not in expected:
            violations.append(
                f"indicator id out of range: {ind.id} (expected 1..{n})"
            )
        if ind.sub_process not in known_sp:
            violations.append(
                f"indicator {ind.id}: unknown sub-process {ind.sub_process}"
            )
        if not ind.statement.strip():
            violations.append(f"indicator {ind.id}: empty statement")
        if not ind.techniques or not all(t.strip() for t in ind.techniques):
            violations.append(f"indicator {ind.id}: empty techniques")
        if not ind.work_products or not all(w.strip() for w in ind.work_products):
            violations.append(f"indicator {ind.id}: empty work products")
    for missing in sorted(expected - set(ids)):
        violations.append(f"missing indicator id: {missing}")

    covered = {ind.sub_process for ind in model.indicators}
    for sp_id in sp_ids:
        if sp_id not in covered:
            violations.append(f"sub-process without indicators: {sp_id}")

    seen_terms: set[str] = set()
    for entry in model.glossary:
        key = entry.term.strip().lower()
        if key in seen_terms:
            violations.append(f"duplicate glossary term: {entry.term.lower()}")
        seen_terms.add(key)
        if not entry.term.strip():
            violations.append("glossary entry with empty term")

    return violations


def lookup_indicator(model: ReferenceModel, indicator_id: int) -> Indicator:
    """Return the indicator with the given id, or raise IndicatorNotFoundError."""
    for ind in model.indicators:
        if ind.id == indicator_id:
            return ind
    raise IndicatorNotFoundError(f"no indicator with id {indicator_id}")


def model_to_json(model: ReferenceModel, *, indent: int | None = 2) -> str:
    return json.dumps(model.to_dict(), ensure_ascii=False, indent=indent)


def load_default_model() -> ReferenceModel:
    """Load the canonical model shipped with the package."""
    data = resources.files("upcase.data").joinpath(DEFAULT_MODEL_RESOURCE)
    return load_reference_model(data.read_bytes())
