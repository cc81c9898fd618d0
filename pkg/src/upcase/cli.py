"""Command-line driver: score sheets, run statistics, render reports, serve.

Commands::

    upcase score RESPONSES [--model PATH] [--json]
    upcase stats kappa PAIRS.csv [--weights none|linear|quadratic|all]
    upcase stats icc MATRIX.csv [--variant oneway|consistency|agreement|all]
    upcase stats alpha MATRIX.csv
    upcase report TARGET [--data-dir DIR] [--format FMT] [--output PATH]
    upcase validate-model PATH
    upcase serve [--bind HOST:PORT] [--data-dir DIR] [--model PATH]

Exit codes: 0 success, 1 internal error, 2 input or validation error.
Defaults come from the environment: UPCASE_BIND, UPCASE_DATA_DIR,
UPCASE_MODEL.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from fractions import Fraction
from pathlib import Path

from .model import (
    ModelError,
    ModelFormatError,
    ModelValidationError,
    ReferenceModel,
    load_default_model,
    load_reference_model,
    validate_reference_model,
)
from .report import AssessmentResults, render_report
from .scoring import ResponseSheet, ScoringError, build_profile, format_score
from .stats import (
    ICC_VARIANTS,
    KAPPA_WEIGHTINGS,
    DimensionError,
    IndeterminateError,
    StatsError,
    cohen_kappa,
    contingency_table,
    cronbach_alpha,
    icc,
)
from .store import AssessmentStore, NotFoundError, StoreError

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_INPUT = 2

_VARIANT_NAMES = {
    "oneway": "oneway_1_1",
    "consistency": "twoway_consistency_3_1",
    "agreement": "twoway_agreement_2_1",
}


class InputError(Exception):
    """User-facing input problem; reported on stderr with exit code 2."""


def _load_model(path: str | None) -> ReferenceModel:
    if not path:
        return load_default_model()
    try:
        return load_reference_model(Path(path).read_bytes())
    except FileNotFoundError:
        raise InputError(f"model file not found: {path}")
    except ModelError as exc:
        raise InputError(str(exc))


def _load_sheet(path: str) -> ResponseSheet:
    try:
        text = Path(path).read_text("utf-8")
    except FileNotFoundError:
        raise InputError(f"responses file not found: {path}")
    try:
        if path.endswith(".csv"):
            return ResponseSheet.from_csv(text)
        return ResponseSheet.from_json(text)
    except ScoringError as exc:
        raise InputError(str(exc))


def _read_matrix(path: str) -> list[list[Fraction]]:
    try:
        text = Path(path).read_text("utf-8")
    except FileNotFoundError:
        raise InputError(f"input file not found: {path}")
    rows: list[list[Fraction]] = []
    for row_no, row in enumerate(csv.reader(text.splitlines()), start=1):
        cells = [c.strip() for c in row if c.strip()]
        if not cells:
            continue
        try:
            rows.append([Fraction(c) for c in cells])
        except ValueError:
            if row_no == 1 and not rows:
                continue  # header row
            raise InputError(f"row {row_no}: non-numeric cell in {path}")
    if not rows:
        raise InputError(f"no data rows in {path}")
    width = len(rows[0])
    for i, row in enumerate(rows, start=1):
        if len(row) != width:
            raise InputError(f"row {i}: expected {width} columns, found {len(row)}")
    return rows


def _int_pairs(matrix: list[list[Fraction]], path: str) -> tuple[list[int], list[int]]:
    if len(matrix[0]) != 2:
        raise InputError(f"{path}: paired rating file needs exactly 2 columns")
    a, b = [], []
    for row in matrix:
        for cell in row:
            if cell.denominator != 1:
                raise InputError(f"{path}: ratings must be integers")
        a.append(int(row[0]))
        b.append(int(row[1]))
    return a, b


# -- commands -------------------------------------------------------------------


def cmd_score(args) -> int:
    model = _load_model(args.model)
    sheet = _load_sheet(args.responses)
    try:
        profile = build_profile(sheet, model)
    except ScoringError as exc:
        raise InputError(str(exc))
    if args.json:
        print(json.dumps(profile.to_dict(), indent=2))
        return EXIT_OK
    print(f"Usability process {format_score(profile.overall)} {profile.overall_rating.value}")
    for sp, (score, rating) in profile.per_sub_process.items():
        print(f"{sp} {format_score(score)} {rating.value}")
    print(f"Capability level: {profile.capability_level}")
    return EXIT_OK


def _kappa_line(table, weighting) -> str:
    try:
        result = cohen_kappa(table, weighting)
    except IndeterminateError as exc:
        return f"kappa ({weighting}): undefined ({exc})"
    return (
        f"kappa ({weighting}): {result.coefficient:.4f}"
        f" ({result.band.replace('_', ' ')})"
    )


def cmd_stats(args) -> int:
    matrix = _read_matrix(args.input)
    try:
        if args.statistic == "kappa":
            a, b = _int_pairs(matrix, args.input)
            table = contingency_table(a, b, args.categories)
            weightings = KAPPA_WEIGHTINGS if args.weights == "all" else (args.weights,)
            if args.json:
                results = {}
                for weighting in weightings:
                    try:
                        results[weighting] = cohen_kappa(table, weighting).to_dict()
                    except IndeterminateError:
                        results[weighting] = None
                print(json.dumps({"n": table.n, "results": results}, indent=2))
            else:
                print(f"n = {table.n}")
                for weighting in weightings:
                    print(_kappa_line(table, weighting))
        elif args.statistic == "icc":
            variants = (
                ICC_VARIANTS
                if args.variant == "all"
                else (_VARIANT_NAMES[args.variant],)
            )
            results = {variant: icc(matrix, variant) for variant in variants}
            if args.json:
                print(json.dumps({v: r.to_dict() for v, r in results.items()}, indent=2))
            else:
                print(f"subjects = {len(matrix)}, raters = {len(matrix[0])}")
                for variant, result in results.items():
                    if not result.defined:
                        print(f"ICC {variant}: undefined (no variability)")
                    else:
                        print(
                            f"ICC {variant}: {result.coefficient:.4f} ({result.band})"
                        )
        else:  # alpha
            try:
                result = cronbach_alpha(matrix)
            except IndeterminateError as exc:
                if args.json:
                    print(json.dumps({"alpha": None, "undefined": True, "reason": str(exc)}))
                else:
                    print(f"alpha: undefined ({exc})")
                return EXIT_OK
            if args.json:
                print(json.dumps(result.to_dict(), indent=2))
            else:
                print(
                    f"alpha = {result.alpha:.4f} over {result.k} items"
                    " (sample (n-1) variance)"
                )
                print("alpha if item deleted:")
                for item, value in result.alpha_if_deleted.items():
                    rendered = "undefined" if value is None else f"{value:.4f}"
                    print(f"  {item}: {rendered}")
    except (DimensionError, StatsError) as exc:
        raise InputError(str(exc))
    return EXIT_OK


def cmd_report(args) -> int:
    target = Path(args.target)
    if target.exists():
        try:
            results = AssessmentResults.from_json(target.read_text("utf-8"))
        except Exception as exc:
            raise InputError(f"cannot read results document {args.target}: {exc}")
    else:
        store = AssessmentStore(args.data_dir)
        try:
            snapshot = store.load_snapshot(args.target)
        except (NotFoundError, StoreError) as exc:
            raise InputError(str(exc))
        if not snapshot.get("results"):
            raise InputError(f"assessment {args.target} has no finalized results")
        results = AssessmentResults.from_dict(snapshot["results"])
    try:
        document = render_report(results, args.format)
    except Exception as exc:
        raise InputError(str(exc))
    if args.output:
        Path(args.output).write_bytes(document)
    else:
        sys.stdout.buffer.write(document)
        sys.stdout.buffer.flush()
    return EXIT_OK


def cmd_validate_model(args) -> int:
    try:
        raw = Path(args.path).read_bytes()
    except FileNotFoundError:
        raise InputError(f"model file not found: {args.path}")
    try:
        model = load_reference_model(raw)
    except ModelValidationError as exc:
        for violation in exc.violations:
            print(violation, file=sys.stderr)
        return EXIT_INPUT
    except ModelFormatError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_INPUT
    leftover = validate_reference_model(model)
    for violation in leftover:
        print(violation, file=sys.stderr)
    if leftover:
        return EXIT_INPUT
    print(
        f"model OK: version {model.version}, {len(model.sub_processes)} sub-processes,"
        f" {len(model.indicators)} indicators"
    )
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    model = _load_model(args.model)
    host, _, port_text = args.bind.rpartition(":")
    if not host or not port_text.isdigit():
        raise InputError(f"--bind must be HOST:PORT, got {args.bind!r}")
    store = AssessmentStore(args.data_dir)
    app = create_app(store, model)
    try:
        uvicorn.run(app, host=host, port=int(port_text), log_level="info")
    except (OSError, SystemExit) as exc:
        print(f"cannot serve on {args.bind}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="upcase",
        description="Usability process capability self-assessment toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    score = sub.add_parser("score", help="score a response sheet into a process profile")
    score.add_argument("responses", help="response sheet (.json or .csv)")
    score.add_argument("--model", default=os.environ.get("UPCASE_MODEL"))
    score.add_argument("--json", action="store_true", help="machine-readable output")
    score.set_defaults(func=cmd_score)

    stats = sub.add_parser("stats", help="reliability and consistency statistics")
    stats_sub = stats.add_subparsers(dest="statistic", required=True)
    kappa = stats_sub.add_parser("kappa", help="two-rater agreement from a paired CSV")
    kappa.add_argument("input")
    kappa.add_argument(
        "--weights", choices=(*KAPPA_WEIGHTINGS, "all"), default="all"
    )
    kappa.add_argument("--categories", type=int, default=3)
    kappa.add_argument("--json", action="store_true")
    kappa.set_defaults(func=cmd_stats)
    icc_cmd = stats_sub.add_parser("icc", help="intraclass correlation of a subjects x raters CSV")
    icc_cmd.add_argument("input")
    icc_cmd.add_argument(
        "--variant", choices=(*_VARIANT_NAMES, "all"), default="all"
    )
    icc_cmd.add_argument("--json", action="store_true")
    icc_cmd.set_defaults(func=cmd_stats)
    alpha = stats_sub.add_parser("alpha", help="internal consistency of a respondents x items CSV")
    alpha.add_argument("input")
    alpha.add_argument("--json", action="store_true")
    alpha.set_defaults(func=cmd_stats)

    report = sub.add_parser("report", help="render an assessment report")
    report.add_argument("target", help="results JSON path or stored assessment id")
    report.add_argument(
        "--data-dir", default=os.environ.get("UPCASE_DATA_DIR", "./upcase-data")
    )
    report.add_argument("--format", choices=("markdown", "html", "json"), default="markdown")
    report.add_argument("--output", help="write to file instead of stdout")
    report.set_defaults(func=cmd_report)

    validate = sub.add_parser("validate-model", help="check a model document")
    validate.add_argument("path")
    validate.set_defaults(func=cmd_validate_model)

    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument(
        "--bind", default=os.environ.get("UPCASE_BIND", "127.0.0.1:8402")
    )
    serve.add_argument(
        "--data-dir", default=os.environ.get("UPCASE_DATA_DIR", "./upcase-data")
    )
    serve.add_argument("--model", default=os.environ.get("UPCASE_MODEL"))
    serve.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except KeyboardInterrupt:
        return EXIT_INTERNAL
    except Exception as exc:  # unexpected: report as internal failure
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
