import json
import math

import pandas as pd
import pytest

from conftest import MEASURES_DIR, TASKS_DIR
from wolff_toolkit.src.main import main, run_document


@pytest.fixture
def out_dir(tmp_path, monkeypatch):
    target = tmp_path / "out"
    monkeypatch.setenv("WOLFF_TOOLKIT_OUTPUT_DIR", str(target))
    return target


def _document(tmp_path, name, body):
    path = tmp_path / name
    path.write_text(body, encoding="utf-8")
    return path


def _measure(name):
    return (MEASURES_DIR / name).as_posix()


def _read(path):
    return pd.read_csv(path, comment="#")


def test_wolff_of_zero_measure(tmp_path, out_dir):
    doc = _document(
        tmp_path,
        "zero.toml",
        f'task = "wolff"\nlabel = "zero"\n\n[measures]\nsigma = "{_measure("zero_n3.toml")}"\n\n'
        "[parameters]\np = 2.0\nmesh = { r_min = 0.1, r_max = 10.0, points = 5 }\n",
    )
    assert run_document(doc, log_dir=tmp_path / "logs") == 0
    frame = _read(out_dir / "wolff.zero.csv")
    assert list(frame.columns) == ["r", "value", "label"]
    assert (frame["value"] == 0.0).all()

    history = (tmp_path / "logs" / "task_history.jsonl").read_text(encoding="utf-8").splitlines()
    record = json.loads(history[-1])
    assert record["task"] == "wolff" and record["status"] == 0


def test_solve_radial_unit_mass_ball(tmp_path, out_dir):
    status = run_document(TASKS_DIR / "solve_radial_unit_ball.toml", log_dir=tmp_path / "logs")
    assert status == 0
    frame = _read(out_dir / "solve-radial.unit_ball.csv")
    row = frame[frame["r"] == 1.0]
    assert float(row["value"].iloc[0]) == pytest.approx(1.0 / (4.0 * math.pi), rel=1e-8)

    summary = json.loads((out_dir / "solve-radial.unit_ball.json").read_text(encoding="utf-8"))
    assert summary["center_identity"]["passed"] is True
    assert summary["tail_decay"]["verdict"] == "holds"
    assert summary["meta"]["task"] == "solve-radial"


def test_artifacts_carry_version_and_document_hash(tmp_path, out_dir):
    run_document(TASKS_DIR / "wolff_unit_ball.toml", log_dir=tmp_path / "logs")
    first_line = (out_dir / "wolff.unit_ball.csv").read_text(encoding="utf-8").splitlines()[0]
    assert first_line.startswith("# wolff_toolkit ")
    assert "task=wolff" in first_line and "input_sha256=" in first_line


def test_outputs_are_deterministic(tmp_path, monkeypatch):
    contents = []
    for attempt in ("a", "b"):
        target = tmp_path / attempt
        monkeypatch.setenv("WOLFF_TOOLKIT_OUTPUT_DIR", str(target))
        assert run_document(TASKS_DIR / "wolff_unit_ball.toml", threads=2, log_dir=tmp_path / "logs") == 0
        contents.append((target / "wolff.unit_ball.csv").read_bytes())
    assert contents[0] == contents[1]


def test_unknown_task_is_a_validation_error(tmp_path, out_dir):
    doc = _document(tmp_path, "bad.toml", 'task = "teleport"\nlabel = "x"\n')
    assert run_document(doc, log_dir=tmp_path / "logs") == 2
    error = json.loads((out_dir / "teleport.x.error.json").read_text(encoding="utf-8"))
    assert error["error_type"] == "TaskDocumentError"
    assert "teleport" in error["message"]


def test_non_integer_dimension_is_a_validation_error(tmp_path, out_dir):
    doc = _document(
        tmp_path,
        "cap.toml",
        'task = "capacity"\nlabel = "words"\n\n[parameters]\nn = "three"\np = 2.0\n'
        "spacing = 0.25\nbox_half_width = 1.0\nplate_radius = 0.5\n",
    )
    assert run_document(doc, log_dir=tmp_path / "logs") == 2
    error = json.loads((out_dir / "capacity.words.error.json").read_text(encoding="utf-8"))
    assert error["error_type"] == "TaskDocumentError"
    assert "n" in error["message"]


def test_missing_measure_file(tmp_path, out_dir):
    doc = _document(
        tmp_path,
        "missing.toml",
        'task = "finiteness"\nlabel = "gone"\n\n[measures]\nsigma = "nowhere.toml"\n\n[parameters]\np = 2.0\n',
    )
    assert run_document(doc, log_dir=tmp_path / "logs") == 2
    error = json.loads((out_dir / "finiteness.gone.error.json").read_text(encoding="utf-8"))
    assert error["error_type"] == "MeasureParseError"


def test_infinite_potential_is_a_numerical_failure(tmp_path, out_dir):
    measure = _document(tmp_path, "heavy.toml", 'kind = "radial"\nn = 3\ntail = "1, 1, 0"\ntail_start = 10.0\n')
    doc = _document(
        tmp_path,
        "heavy_task.toml",
        f'task = "solve-radial"\nlabel = "heavy"\n\n[measures]\nsigma = "{measure.as_posix()}"\n\n'
        "[parameters]\np = 2.0\nmesh = { r_min = 0.1, r_max = 10.0, points = 5 }\n",
    )
    assert run_document(doc, log_dir=tmp_path / "logs") == 3
    error = json.loads((out_dir / "solve-radial.heavy.error.json").read_text(encoding="utf-8"))
    assert error["error_type"] == "FinitenessError"
    assert error["finiteness"]["verdict"] == "infinite"


def test_verify_uniqueness_task(tmp_path, out_dir):
    doc = _document(
        tmp_path,
        "battery.toml",
        f'task = "verify-uniqueness"\nlabel = "battery"\n\n[measures]\nsigma = "{_measure("unit_ball_n3.toml")}"\n\n'
        "[parameters]\np = 2.0\nq = 0.5\nC0_list = [2.0, 10.0]\n"
        "mesh = { r_min = 1e-3, r_max = 1e3, points = 61 }\n",
    )
    assert run_document(doc, log_dir=tmp_path / "logs") == 0
    battery = json.loads((out_dir / "verify-uniqueness.battery.json").read_text(encoding="utf-8"))["battery"]
    assert battery["passed"] is True
    assert [run["C0"] for run in battery["runs"]] == [2.0, 10.0]
    rates = _read(out_dir / "verify-uniqueness.battery.csv")
    assert set(rates.columns) == {"C0", "j", "ln_rho", "bound"}


def test_main_reports_status(tmp_path, out_dir, capsys):
    status = main(["run", str(TASKS_DIR / "finiteness_log_tail.toml"), "--log-dir", str(tmp_path / "logs")])
    assert status == 0
    assert "OK" in capsys.readouterr().out
    report = json.loads((out_dir / "finiteness.log_tail.json").read_text(encoding="utf-8"))
    assert report["finiteness"]["verdict"] == "finite"
