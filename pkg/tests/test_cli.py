"""Command-line interface: output formats, exit codes, error paths."""
from __future__ import annotations

import json
import socket

import numpy as np
import pytest

from upcase.cli import main
from upcase.model import model_to_json
from upcase.report import generate_results
from upcase.scoring import Rating, build_profile
from upcase.stats import cronbach_alpha
from upcase.store import AssessmentStore

from .conftest import column_vector, run_scripted_session, sheet, uniform_sheet


def write_sheet(tmp_path, name):
    path = tmp_path / f"{name}.json"
    path.write_text(sheet(name).to_json())
    return str(path)


def write_csv(tmp_path, rows, name="input.csv"):
    path = tmp_path / name
    path.write_text("\n".join(",".join(str(c) for c in row) for row in rows) + "\n")
    return str(path)


# -- score ------------------------------------------------------------------------

def test_score_org1(tmp_path, capsys):
    code = main(["score", write_sheet(tmp_path, "org1_team")])
    out = capsys.readouterr().out
    assert code == 0
    assert "Usability process 34.38 P" in out
    assert "UP1 33.33 P" in out
    assert "UP4 0.00 N" in out
    assert "Capability level: 0" in out


def test_score_all_f_reports_level_1(tmp_path, capsys):
    path = tmp_path / "allf.json"
    path.write_text(uniform_sheet(Rating.F).to_json())
    code = main(["score", str(path)])
    out = capsys.readouterr().out
    assert code == 0
    assert "Usability process 100.00 F" in out
    assert "Capability level: 1" in out


def test_score_csv_equals_json(tmp_path, capsys):
    json_code = main(["score", write_sheet(tmp_path, "org2_team")])
    json_out = capsys.readouterr().out
    letters = {0: "N", 1: "P", 2: "F"}
    rows = [("item", "rating")] + [
        (i + 1, letters[v]) for i, v in enumerate(column_vector("org2_team"))
    ]
    csv_code = main(["score", write_csv(tmp_path, rows, "org2.csv")])
    csv_out = capsys.readouterr().out
    assert json_code == csv_code == 0
    assert csv_out == json_out


def test_score_incomplete_sheet_exits_2(tmp_path, capsys):
    document = sheet("org1_team").to_dict()
    del document["ratings"]["16"]
    path = tmp_path / "incomplete.json"
    path.write_text(json.dumps(document))
    code = main(["score", str(path)])
    captured = capsys.readouterr()
    assert code == 2
    assert "missing items: 16" in captured.err


def test_score_json_output(tmp_path, capsys):
    code = main(["score", write_sheet(tmp_path, "org1_team"), "--json"])
    body = json.loads(capsys.readouterr().out)
    assert code == 0
    assert body["overall"]["display"] == "34.38"
    assert body["sub_processes"]["UP4"]["rating"] == "N"


def test_score_missing_file(capsys):
    assert main(["score", "/nope/missing.json"]) == 2
    assert "not found" in capsys.readouterr().err


# -- stats ---------------------------------------------------------------------------

def pairs_csv(tmp_path, a, b, name="pairs.csv"):
    return write_csv(tmp_path, list(zip(a, b)), name)


def test_stats_kappa_linear(tmp_path, capsys):
    path = pairs_csv(tmp_path, column_vector("org1_team"), column_vector("org1_observer"))
    code = main(["stats", "kappa", path, "--weights", "linear"])
    out = capsys.readouterr().out
    assert code == 0
    assert "0.5556 (fair to good)" in out


def test_stats_kappa_all_weightings_by_default(tmp_path, capsys):
    path = pairs_csv(tmp_path, column_vector("org1_team"), column_vector("org1_observer"))
    code = main(["stats", "kappa", path])
    out = capsys.readouterr().out
    assert code == 0
    for token in ("kappa (none):", "kappa (linear):", "kappa (quadratic):"):
        assert token in out


def test_stats_kappa_indeterminate(tmp_path, capsys):
    path = pairs_csv(tmp_path, [1, 1, 1], [1, 1, 1])
    code = main(["stats", "kappa", path])
    out = capsys.readouterr().out
    assert code == 0
    assert "undefined" in out


def test_stats_kappa_rejects_wide_matrix(tmp_path, capsys):
    path = write_csv(tmp_path, [(0, 1, 2), (1, 1, 1)])
    assert main(["stats", "kappa", path]) == 2
    assert "2 columns" in capsys.readouterr().err


def test_stats_icc_constant_undefined(tmp_path, capsys):
    path = write_csv(tmp_path, [(1, 1), (1, 1), (1, 1)])
    code = main(["stats", "icc", path])
    out = capsys.readouterr().out
    assert code == 0
    assert out.count("undefined") == 3


def test_stats_icc_identical_raters(tmp_path, capsys):
    path = write_csv(tmp_path, [(0, 0), (1, 1), (2, 2)])
    code = main(["stats", "icc", path, "--variant", "consistency"])
    out = capsys.readouterr().out
    assert code == 0
    assert "ICC twoway_consistency_3_1: 1.0000 (excellent)" in out


def test_stats_alpha_matches_module(tmp_path, capsys):
    rng = np.random.default_rng(3)
    matrix = rng.integers(0, 3, size=(10, 5)).tolist()
    path = write_csv(tmp_path, matrix)
    code = main(["stats", "alpha", path, "--json"])
    body = json.loads(capsys.readouterr().out)
    assert code == 0
    assert abs(body["alpha"] - cronbach_alpha(matrix).alpha) < 1e-9
    assert len(body["alpha_if_deleted"]) == 5


def test_stats_alpha_text_output(tmp_path, capsys):
    path = write_csv(tmp_path, [(0, 0, 1), (1, 2, 1), (2, 2, 0), (0, 1, 2)])
    code = main(["stats", "alpha", path])
    out = capsys.readouterr().out
    assert code == 0
    assert "alpha =" in out
    assert "alpha if item deleted:" in out


def test_stats_bad_csv(tmp_path, capsys):
    path = tmp_path / "bad.csv"
    path.write_text("1,2\n3,banana\n")
    assert main(["stats", "alpha", str(path)]) == 2


# -- report -----------------------------------------------------------------------------

def results_file(tmp_path, model, name="org2_team"):
    s = sheet(name)
    results = generate_results(
        s, build_profile(s, model), model, {"organization": name, "date": "2017-10-05"}
    )
    from upcase.report import render_report

    path = tmp_path / "results.json"
    path.write_bytes(render_report(results, "json"))
    return path


def test_report_markdown_from_results_file(tmp_path, capsys, model):
    path = results_file(tmp_path, model)
    code = main(["report", str(path)])
    out = capsys.readouterr().out
    assert code == 0
    assert "UP3 | 90 | F" in out


def test_report_html_to_output_file(tmp_path, model):
    path = results_file(tmp_path, model)
    out_path = tmp_path / "report.html"
    code = main(["report", str(path), "--format", "html", "--output", str(out_path)])
    assert code == 0
    text = out_path.read_text()
    assert text.startswith("<!DOCTYPE html>")
    assert "<table>" in text


def test_report_json_round_trips(tmp_path, capsys, model):
    path = results_file(tmp_path, model)
    code = main(["report", str(path), "--format", "json"])
    body = capsys.readouterr().out
    assert code == 0
    from upcase.report import AssessmentResults

    assert AssessmentResults.from_json(body.encode()) is not None


def test_report_from_store(tmp_path, capsys, model):
    store = AssessmentStore(tmp_path / "data")
    session, s, profile = run_scripted_session("org2_team", model)
    results = generate_results(
        s, profile, model, {"organization": session.organization_name}
    )
    store.save_session(
        session,
        sheet=s.to_dict(),
        profile=profile.to_dict(),
        results=results.to_dict(),
    )
    code = main(["report", session.id, "--data-dir", str(tmp_path / "data")])
    out = capsys.readouterr().out
    assert code == 0
    assert "UP3 | 90 | F" in out


def test_report_unknown_id(tmp_path, capsys):
    code = main(["report", "nothere", "--data-dir", str(tmp_path)])
    assert code == 2


def test_report_unsupported_format_flag(tmp_path, model):
    path = results_file(tmp_path, model)
    with pytest.raises(SystemExit):  # argparse rejects the choice
        main(["report", str(path), "--format", "pdf"])


# -- validate-model / serve ------------------------------------------------------------------

def test_validate_model_canonical(tmp_path, capsys, model):
    path = tmp_path / "model.json"
    path.write_text(model_to_json(model))
    code = main(["validate-model", str(path)])
    out = capsys.readouterr().out
    assert code == 0
    assert "model OK" in out
    assert "16 indicators" in out


def test_validate_model_broken(tmp_path, capsys, model):
    document = model.to_dict()
    document["indicators"][15]["id"] = 17
    document["glossary"].append(document["glossary"][0])
    path = tmp_path / "broken.json"
    path.write_text(json.dumps(document))
    code = main(["validate-model", str(path)])
    err = capsys.readouterr().err
    assert code == 2
    assert "id out of range" in err
    assert "duplicate glossary term" in err


def test_validate_model_bad_json(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text("{")
    assert main(["validate-model", str(path)]) == 2


def test_serve_bind_failure(tmp_path, capsys):
    blocker = socket.socket()
    blocker.bind(("127.0.0.1", 0))
    blocker.listen(1)
    port = blocker.getsockname()[1]
    try:
        code = main(
            [
                "serve",
                "--bind",
                f"127.0.0.1:{port}",
                "--data-dir",
                str(tmp_path / "data"),
            ]
        )
    finally:
        blocker.close()
    assert code == 1
    assert "cannot serve" in capsys.readouterr().err


def test_serve_rejects_bad_bind(tmp_path, capsys):
    assert main(["serve", "--bind", "nonsense", "--data-dir", str(tmp_path)]) == 2
