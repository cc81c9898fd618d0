"""Inter-rater reliability and internal-consistency statistics.

Implements Cohen's kappa (unweighted, linear and quadratic disagreement
weights), single-score intraclass correlation coefficients (one-way random
ICC(1,1), two-way consistency ICC(3,1), two-way agreement ICC(2,1)) and
Cronbach's alpha with leave-one-out item analysis.

All coefficients are computed in exact rational arithmetic and exposed as
floats. Conventions fixed here and stated in report metadata:

* kappa, disagreement form: kappa = 1 - sum(w*o) / sum(w*e) with w = |i-j|
  (linear, the default), (i-j)^2 (quadratic) or 1[i != j] (unweighted);
  o are observed cell proportions, e the products of marginal proportions.
* ICC from the standard ANOVA decomposition of a subjects x raters matrix.
* alpha with the sample-variance convention (n-1 denominator) throughout.

Interpretation bands: kappa above 0.75 excellent, 0.40 to 0.75 fair to
good, below 0.40 poor; ICC above 0.75 excellent, 0.40 to 0.75 satisfactory,
below 0.40 unsatisfactory.

An indeterminate statistic (zero expected disagreement, zero total
variance, a vanishing ANOVA denominator) is a value, not an exception, in
reports; the low-level kappa/alpha operations raise IndeterminateError so
callers cannot mistake it for a real coefficient.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

Number = int | float | Fraction

KAPPA_WEIGHTINGS = ("none", "linear", "quadratic")
ICC_VARIANTS = ("oneway_1_1", "twoway_consistency_3_1", "twoway_agreement_2_1")

_BAND_LOW = Fraction(2, 5)    # 0.40
_BAND_HIGH = Fraction(3, 4)   # 0.75


class StatsError(Exception):
    """Base class for statistics errors."""


class DimensionError(StatsError):
    """Input matrix or vector has unusable dimensions."""


class IndeterminateError(StatsError):
    """The estimator is indeterminate for this input (e.g. zero variance)."""


@dataclass(frozen=True)
class RatingVector:
    """An ordered list of category codes (0..2) from one rater."""

    values: tuple[int, ...]
    label: str = ""

    def __post_init__(self):
        if not self.values:
            raise DimensionError("rating vector is empty")
        for v in self.values:
            if not isinstance(v, int) or isinstance(v, bool) or not 0 <= v <= 2:
                raise StatsError(f"rating value out of range 0..2: {v!r}")

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class ContingencyTable:
    """k x k cross-tabulation of two raters' categories."""

    counts: tuple[tuple[int, ...], ...]
    n: int

    @property
    def k(self) -> int:
        return len(self.counts)


def contingency_table(
    a: RatingVector | Sequence[int], b: RatingVector | Sequence[int], k: int = 3
) -> ContingencyTable:
    """Cross-tabulate two equal-length rating vectors into a k x k table."""
    va = tuple(a.values if isinstance(a, RatingVector) else a)
    vb = tuple(b.values if isinstance(b, RatingVector) else b)
    if len(va) != len(vb):
        raise DimensionError(f"length mismatch: {len(va)} vs {len(vb)}")
    if not va:
        raise DimensionError("empty rating vectors")
    counts = [[0] * k for _ in range(k)]
    for x, y in zip(va, vb):
        if not 0 <= x < k or not 0 <= y < k:
            raise StatsError(f"category out of range 0..{k - 1}: ({x}, {y})")
        counts[x][y] += 1
    return ContingencyTable(tuple(tuple(row) for row in counts), n=len(va))


def _disagreement_weight(i: int, j: int, weighting: str) -> int:
    if weighting == "none":
        return 0 if i == j else 1
    if weighting == "linear":
        return abs(i - j)
    if weighting == "quadratic":
        return (i - j) ** 2
    raise StatsError(f"unknown weighting: {weighting!r}")


def kappa_band(coefficient: Number) -> str:
    c = Fraction(coefficient)
    if c > _BAND_HIGH:
        return "excellent"
    if c >= _BAND_LOW:
        return "fair_to_good"
    return "poor"


@dataclass(frozen=True)
class KappaResult:
    coefficient: float
    weighting: str
    band: str
    exact: Fraction = field(repr=False, compare=False, default=Fraction(0))

    def to_dict(self) -> dict:
        return {
            "coefficient": self.coefficient,
            "weighting": self.weighting,
            "band": self.band,
        }


def cohen_kappa(table: ContingencyTable, weighting: str = "linear") -> KappaResult:
    """Chance-corrected agreement between the two raters of a contingency table.

    Raises IndeterminateError when the expected disagreement is zero (both
    raters constant on the same category), StatsError for an empty table.
    """
    if table.n <= 0:
        raise StatsError("contingency table has no observations")
    k = table.k
    rows = [sum(table.counts[i]) for i in range(k)]
    cols = [sum(table.counts[i][j] for i in range(k)) for j in range(k)]
    observed = Fraction(0)
    expected = Fraction(0)
    for i in range(k):
        for j in range(k):
            w = _disagreement_weight(i, j, weighting)
            if w == 0:
                continue
            observed += Fraction(w) * Fraction(table.counts[i][j], table.n)
            expected += Fraction(w) * Fraction(rows[i] * cols[j], table.n * table.n)
    if expected == 0:
        raise IndeterminateError(
            "expected disagreement is zero (both raters constant)"
        )
    exact = 1 - observed / expected
    return KappaResult(
        coefficient=float(exact),
        weighting=weighting,
        band=kappa_band(exact),
        exact=exact,
    )


def icc_band(coefficient: Number) -> str:
    c = Fraction(coefficient)
    if c > _BAND_HIGH:
        return "excellent"
    if c >= _BAND_LOW:
        return "satisfactory"
    return "unsatisfactory"


@dataclass(frozen=True)
class IccResult:
    coefficient: float | None
    variant: str
    defined: bool
    band: str | None
    exact: Fraction | None = field(repr=False, compare=False, default=None)

    def to_dict(self) -> dict:
        return {
            "coefficient": self.coefficient,
            "variant": self.variant,
            "defined": self.defined,
            "band": self.band,
        }


def _mean_squares(matrix: Sequence[Sequence[Number]]):
    n = len(matrix)
    if n < 2:
        raise DimensionError("ICC needs at least 2 subjects")
    k = len(matrix[0])
    if k < 2:
        raise DimensionError("ICC needs at least 2 raters")
    rows = []
    for r, raw in enumerate(matrix):
        if len(raw) != k:
            raise DimensionError(f"ragged matrix: row {r} has {len(raw)} cells")
        rows.append([Fraction(x) for x in raw])
    grand = sum(sum(row) for row in rows) / (n * k)
    subject_means = [sum(row) / k for row in rows]
    rater_means = [sum(rows[i][j] for i in range(n)) / n for j in range(k)]
    ss_total = sum((x - grand) ** 2 for row in rows for x in row)
    ss_subjects = k * sum((m - grand) ** 2 for m in subject_means)
    ss_raters = n * sum((m - grand) ** 2 for m in rater_means)
    ss_within = sum(
        (rows[i][j] - subject_means[i]) ** 2 for i in range(n) for j in range(k)
    )
    ss_error = ss_total - ss_subjects - ss_raters
    msb = ss_subjects / (n - 1)
    msw = ss_within / (n * (k - 1))
    msc = ss_raters / (k - 1)
    mse = ss_error / ((n - 1) * (k - 1))
    return n, k, msb, msw, msc, mse


def icc(matrix: Sequence[Sequence[Number]], variant: str = "twoway_consistency_3_1") -> IccResult:
    """Single-score intraclass correlation of a subjects x raters matrix.

    Returns ``defined=False`` (not an exception) when the estimator is
    indeterminate, i.e. the ANOVA denominator vanishes; raises
    DimensionError for unusable shapes.
    """
    if variant not in ICC_VARIANTS:
        raise StatsError(f"unknown ICC variant: {variant!r}")
    n, k, msb, msw, msc, mse = _mean_squares(matrix)
    if variant == "oneway_1_1":
        numerator, denominator = msb - msw, msb + (k - 1) * msw
    elif variant == "twoway_consistency_3_1":
        numerator, denominator = msb - mse, msb + (k - 1) * mse
    else:
        numerator = msb - mse
        denominator = msb + (k - 1) * mse + Fraction(k, 1) * (msc - mse) / n
    if denominator == 0:
        return IccResult(None, variant, defined=False, band=None)
    exact = numerator / denominator
    return IccResult(
        coefficient=float(exact),
        variant=variant,
        defined=True,
        band=icc_band(exact),
        exact=exact,
    )


def _sample_variance(values: Sequence[Fraction]) -> Fraction:
    n = len(values)
    mean = sum(values) / n
    return sum((v - mean) ** 2 for v in values) / (n - 1)


@dataclass(frozen=True)
class AlphaResult:
    alpha: float
    k: int
    alpha_if_deleted: Mapping[int, float | None]
    exact: Fraction = field(repr=False, compare=False, default=Fraction(0))

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "k": self.k,
            "alpha_if_deleted": {str(i): v for i, v in self.alpha_if_deleted.items()},
            "variance_convention": "sample (n-1)",
        }


def _alpha_exact(columns: Sequence[Sequence[Fraction]]) -> Fraction:
    k = len(columns)
    n = len(columns[0])
    totals = [sum(col[i] for col in columns) for i in range(n)]
    total_variance = _sample_variance(totals)
    if total_variance == 0:
        raise IndeterminateError("zero variance of respondent totals")
    item_variance = sum(_sample_variance(col) for col in columns)
    return Fraction(k, k - 1) * (1 - item_variance / total_variance)


def cronbach_alpha(item_matrix: Sequence[Sequence[Number]]) -> AlphaResult:
    """Internal consistency of a respondents x items matrix.

    ``alpha_if_deleted`` maps each 1-based item position to alpha
    recomputed without that item (None where that sub-alpha is itself
    indeterminate). Raises IndeterminateError when respondent totals do
    not vary.
    """
    n = len(item_matrix)
    if n < 2:
        raise DimensionError("alpha needs at least 2 respondents")
    k = len(item_matrix[0])
    if k < 2:
        raise DimensionError("alpha needs at least 2 items")
    rows = []
    for r, raw in enumerate(item_matrix):
        if len(raw) != k:
            raise DimensionError(f"ragged matrix: row {r} has {len(raw)} cells")
        rows.append([Fraction(x) for x in raw])
    columns = [[rows[i][j] for i in range(n)] for j in range(k)]
    exact = _alpha_exact(columns)
    deleted: dict[int, float | None] = {}
    for j in range(k):
        remaining = columns[:j] + columns[j + 1 :]
        if len(remaining) < 2:
            deleted[j + 1] = None
            continue
        try:
            deleted[j + 1] = float(_alpha_exact(remaining))
        except IndeterminateError:
            deleted[j + 1] = None
    return AlphaResult(
        alpha=float(exact), k=k, alpha_if_deleted=deleted, exact=exact
    )


# ---------------------------------------------------------------------------
# Reliability report
# ---------------------------------------------------------------------------

#: How section matrices are built from per-organization rating-vector pairs.
#: ``org_section_scores`` reproduces the reference per-section coefficients:
#: one row per organization, one column per rater, cells are section score
#: sums. ``item_org_pairs`` treats every (item, organization) combination as
#: its own subject; it is reported alongside for inspection.
ARRANGEMENTS = ("org_section_scores", "item_org_pairs")

_METADATA = {
    "kappa": {
        "form": "1 - observed/expected disagreement",
        "default_weighting": "linear",
        "weightings": list(KAPPA_WEIGHTINGS),
        "bands": "excellent > 0.75; fair to good 0.40..0.75; poor < 0.40",
    },
    "icc": {
        "variants": list(ICC_VARIANTS),
        "bands": "excellent > 0.75; satisfactory 0.40..0.75; unsatisfactory < 0.40",
        "arrangements": {
            "org_section_scores": "subjects = organizations, raters = the two"
            " assessments, cells = section rating sums",
            "item_org_pairs": "subjects = (item, organization) pairs, raters ="
            " the two assessments, cells = item ratings",
        },
    },
    "alpha": {
        "variance_convention": "sample (n-1)",
        "threshold": "values above 0.7 are considered acceptable",
    },
}


@dataclass(frozen=True)
class ReliabilityReport:
    """Kappa, ICC and alpha results bundled with the conventions used."""

    kappa_rows: tuple[dict, ...]
    icc_sections: tuple[dict, ...]
    alpha: dict | None
    metadata: dict

    def to_dict(self) -> dict:
        return {
            "kappa": list(self.kappa_rows),
            "icc_sections": list(self.icc_sections),
            "alpha": self.alpha,
            "metadata": self.metadata,
        }

    def to_json(self, *, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=indent)

    def to_markdown(self) -> str:
        lines: list[str] = ["# Reliability report", ""]
        lines.append("## Agreement between raters (kappa)")
        lines.append("")
        lines.append("| Pair | n | Unweighted | Linear | Quadratic | Band (linear) |")
        lines.append("| --- | --- | --- | --- | --- | --- |")
        for row in self.kappa_rows:
            cells = [row["label"], str(row["n"])]
            for weighting in KAPPA_WEIGHTINGS:
                result = row["results"][weighting]
                cells.append(
                    "undefined" if result is None else f"{result['coefficient']:.4f}"
                )
            linear = row["results"]["linear"]
            cells.append("undefined" if linear is None else linear["band"].replace("_", " "))
            lines.append("| " + " | ".join(cells) + " |")
        lines.append("")
        lines.append(f"Bands: {self.metadata['kappa']['bands']}.")
        lines.append("")
        lines.append("## Reproducibility per questionnaire section (ICC)")
        for arrangement in ARRANGEMENTS:
            rows = [s for s in self.icc_sections if s["arrangement"] == arrangement]
            if not rows:
                continue
            lines.append("")
            lines.append(
                f"Arrangement `{arrangement}`:"
                f" {self.metadata['icc']['arrangements'][arrangement]}."
            )
            lines.append("")
            lines.append(
                "| Section | Subjects | ICC(1,1) | ICC(3,1) | ICC(2,1) | Band (3,1) |"
            )
            lines.append("| --- | --- | --- | --- | --- | --- |")
            for section in rows:
                cells = [section["section"], str(section["subjects"])]
                for variant in ("oneway_1_1", "twoway_consistency_3_1", "twoway_agreement_2_1"):
                    result = section["results"].get(variant)
                    if result is None or not result["defined"]:
                        cells.append("undefined")
                    else:
                        cells.append(f"{result['coefficient']:.4f}")
                consistency = section["results"].get("twoway_consistency_3_1")
                if consistency is None or not consistency["defined"]:
                    cells.append("--")
                else:
                    cells.append(consistency["band"].replace("_", " "))
                lines.append("| " + " | ".join(cells) + " |")
        lines.append("")
        lines.append(f"Bands: {self.metadata['icc']['bands']}.")
        if self.alpha is not None:
            lines.append("")
            lines.append("## Internal consistency (Cronbach's alpha)")
            lines.append("")
            lines.append(f"alpha = {self.alpha['alpha']:.4f} over {self.alpha['k']} items"
                         f" ({self.alpha['variance_convention']} variance).")
            lines.append("")
            lines.append("| Item removed | alpha |")
            lines.append("| --- | --- |")
            for item, value in self.alpha["alpha_if_deleted"].items():
                lines.append(
                    f"| {item} | " + ("undefined" if value is None else f"{value:.4f}") + " |"
                )
        lines.append("")
        return "\n".join(lines)


def _kappa_row(label: str, a: RatingVector, b: RatingVector, k: int) -> dict:
    table = contingency_table(a, b, k)
    results: dict[str, dict | None] = {}
    for weighting in KAPPA_WEIGHTINGS:
        try:
            results[weighting] = cohen_kappa(table, weighting).to_dict()
        except IndeterminateError:
            results[weighting] = None
    return {"label": label, "n": table.n, "results": results}


def _section_matrices(
    pairs: Sequence[tuple[str, RatingVector, RatingVector]],
    item_ids: Sequence[int],
) -> dict[str, list[list[int]]]:
    positions = [i - 1 for i in item_ids]
    by_org = [
        [sum(a.values[p] for p in positions), sum(b.values[p] for p in positions)]
        for _, a, b in pairs
    ]
    by_item_org = [
        [a.values[p], b.values[p]] for p in positions for _, a, b in pairs
    ]
    return {"org_section_scores": by_org, "item_org_pairs": by_item_org}


def _icc_section_row(section: str, arrangement: str, matrix: list[list[int]]) -> dict:
    results: dict[str, dict] = {}
    for variant in ICC_VARIANTS:
        try:
            results[variant] = icc(matrix, variant).to_dict()
        except DimensionError:
            results[variant] = {
                "coefficient": None, "variant": variant, "defined": False, "band": None,
            }
    return {
        "section": section,
        "arrangement": arrangement,
        "subjects": len(matrix),
        "results": results,
    }


def reliability_report(
    pairs: Sequence[tuple[str, RatingVector, RatingVector]],
    item_matrix: Sequence[Sequence[Number]] | None = None,
    sections: Mapping[str, Sequence[int]] | None = None,
    categories: int = 3,
) -> ReliabilityReport:
    """Bundle kappa, section-wise ICC and alpha into one report.

    ``pairs`` holds one (label, rater A, rater B) entry per assessed
    object; the two vectors cover the full questionnaire in item order.
    ``sections`` maps section names to 1-based item ids; the full item
    range is always reported as ``all_items``. Indeterminate statistics
    are reported as such, never dropped.
    """
    kappa_rows = tuple(_kappa_row(label, a, b, categories) for label, a, b in pairs)

    icc_rows: list[dict] = []
    if pairs:
        length = len(pairs[0][1])
        for _, a, b in pairs:
            if len(a) != length or len(b) != length:
                raise DimensionError("all rating vectors must have the same length")
        section_map = dict(sections or {})
        section_map["all_items"] = list(range(1, length + 1))
        for arrangement in ARRANGEMENTS:
            for name, item_ids in section_map.items():
                for item_id in item_ids:
                    if not 1 <= item_id <= length:
                        raise StatsError(
                            f"section {name}: item id {item_id} out of range 1..{length}"
                        )
                matrices = _section_matrices(pairs, item_ids)
                icc_rows.append(_icc_section_row(name, arrangement, matrices[arrangement]))

    alpha_block = None
    if item_matrix is not None:
        try:
            alpha_block = cronbach_alpha(item_matrix).to_dict()
        except IndeterminateError as exc:
            alpha_block = {"alpha": None, "undefined": True, "reason": str(exc)}

    return ReliabilityReport(
        kappa_rows=kappa_rows,
        icc_sections=tuple(icc_rows),
        alpha=alpha_block,
        metadata=json.loads(json.dumps(_METADATA)),
    )
