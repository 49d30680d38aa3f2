from __future__ import annotations

import csv
import io
import json
import subprocess
import sys

import pytest

from mg1overhead import ConfigError
from mg1overhead.cli import config_from_dict, config_to_dict, main, parse_config, parse_grid, set_path

from support import TWO_CLASS

MM1_DOC = {"classes": [{"lambda": 0.5, "size": {"dist": "exp", "params": {"rate": 1.0}}}]}
TWO_CLASS_DOC = config_to_dict(TWO_CLASS)


def _write(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc) if not isinstance(doc, str) else doc)
    return str(path)


def _run(capsys, argv):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_minimal_config_defaults():
    cfg = config_from_dict(MM1_DOC)
    assert cfg.n == 1 and cfg.mode.value == "pause-resume"
    assert cfg.classes[0].pause.is_zero and cfg.classes[0].resume.is_zero


def test_config_round_trip():
    assert config_from_dict(json.loads(json.dumps(TWO_CLASS_DOC))) == TWO_CLASS


@pytest.mark.parametrize(
    "mutate,field",
    [
        (lambda d: d["classes"][1].__setitem__("lambda", -1.0), "classes[1].lambda"),
        (lambda d: d["classes"][0].__setitem__("sise", {}), "classes[0]"),
        (lambda d: d.__setitem__("mode", "preempt-whatever"), "mode"),
        (lambda d: d.__setitem__("extra", 1), "$"),
        (lambda d: d["classes"][1]["size"].__setitem__("dist", "gamma"), "classes[1].size.dist"),
    ],
)
def test_config_errors_name_the_field(mutate, field):
    doc = json.loads(json.dumps(TWO_CLASS_DOC))
    mutate(doc)
    with pytest.raises(ConfigError) as err:
        config_from_dict(doc)
    assert err.value.field == field


def test_overhead_rejected_in_repeat_mode():
    doc = json.loads(json.dumps(TWO_CLASS_DOC))
    doc["mode"] = "repeat-different"
    with pytest.raises(ConfigError):
        config_from_dict(doc)


def test_malformed_json_reports_position(tmp_path):
    path = _write(tmp_path, '{"classes": [\n  {"lambda": 0.5,,}\n]}')
    with pytest.raises(ConfigError) as err:
        parse_config(path)
    assert err.value.field.startswith("line 2, column")


def test_analyze_mm1(tmp_path, capsys):
    code, out, _ = _run(capsys, ["analyze", _write(tmp_path, MM1_DOC), "--thetas", "1.0"])
    assert code == 0
    report = json.loads(out)
    assert report["stability"]["stable"] is True
    assert report["response"][0]["mean"] == pytest.approx(2.0, rel=1e-8)
    assert report["response"][0]["second_moment"] == pytest.approx(8.0, rel=1e-6)
    assert report["response"][0]["transform"]["1.0"] == pytest.approx(1.0 / 3.0, abs=1e-12)
    assert report["classes"][0]["busy_mean_full"] == pytest.approx(2.0, rel=1e-14)


def test_analyze_unstable(tmp_path, capsys):
    doc = json.loads(json.dumps(MM1_DOC))
    doc["classes"][0]["lambda"] = 1.5
    code, out, _ = _run(capsys, ["analyze", _write(tmp_path, doc)])
    report = json.loads(out)
    assert code == 0
    assert report["response"] == "unstable"
    assert report["classes"][0]["busy_mean_full"] is None


def test_analyze_repeat_mode_marks_response_unsupported(tmp_path, capsys):
    doc = {"mode": "repeat-different", "classes": [MM1_DOC["classes"][0], MM1_DOC["classes"][0]]}
    doc["classes"] = [dict(c, **{"lambda": 0.2}) for c in doc["classes"]]
    code, out, _ = _run(capsys, ["analyze", _write(tmp_path, doc)])
    assert code == 0
    assert "unsupported" in json.loads(out)["response"]


def test_validate_exit_codes(tmp_path, capsys):
    code, out, _ = _run(capsys, ["validate", _write(tmp_path, TWO_CLASS_DOC), "--cycles", "50000", "--seed", "3"])
    report = json.loads(out)
    assert code == 0 and report["passed"]
    assert report["max_abs_z"] <= 4.0
    quantities = {row["quantity"] for row in report["comparisons"]}
    assert any("response" in q for q in quantities)
    doc = json.loads(json.dumps(TWO_CLASS_DOC))
    doc["classes"][1]["lambda"] = 0.9
    code, out, _ = _run(capsys, ["validate", _write(tmp_path, doc, "hot.json"), "--cycles", "100"])
    assert code == 2
    assert json.loads(out)["response"] == "unstable"


def test_usage_and_config_errors_exit_one(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["analyze"])
    assert exc.value.code == 1
    capsys.readouterr()
    doc = json.loads(json.dumps(TWO_CLASS_DOC))
    doc["classes"][1]["lambda"] = -1
    code, _, err = _run(capsys, ["analyze", _write(tmp_path, doc)])
    assert code == 1 and "classes[1].lambda" in err
    code, _, err = _run(capsys, ["analyze", str(tmp_path / "missing.json")])
    assert code == 1


def test_seed_environment_precedence(tmp_path, capsys, monkeypatch):
    path = _write(tmp_path, TWO_CLASS_DOC)

    def run(*extra):
        code, out, _ = _run(capsys, ["simulate", path, "--cycles", "500", *extra])
        assert code == 0
        return json.loads(out)

    monkeypatch.setenv("MG1OH_SEED", "17")
    from_env = run()
    assert from_env["seed"] == 17
    assert run("--seed", "5")["seed"] == 5
    monkeypatch.delenv("MG1OH_SEED")
    assert run()["seed"] == 0
    assert run("--seed", "17")["estimates"] == from_env["estimates"]


def test_simulate_writes_trace(tmp_path, capsys):
    trace = tmp_path / "events.tsv"
    code, _, _ = _run(capsys, ["simulate", _write(tmp_path, TWO_CLASS_DOC), "--cycles", "20", "--trace", str(trace)])
    assert code == 0
    first = trace.read_text().splitlines()[0].split("\t")
    assert len(first) == 4 and first[1] == "arrival"


def test_sweep_csv_shows_the_stability_flip(tmp_path, capsys):
    path = _write(tmp_path, TWO_CLASS_DOC)
    code, out, _ = _run(
        capsys, ["sweep", path, "--param", "classes[1].lambda", "--grid", "0.1:1.0:10", "--metric", "rho,stable,response_mean[1]"]
    )
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 10
    flags = [r["stable"] for r in rows]
    assert flags[0] == "true" and flags[-1] == "false"
    flip = flags.index("false")
    assert all(f == "false" for f in flags[flip:])
    assert float(rows[flip - 1]["rho"]) < 1.0 <= float(rows[flip]["rho"])
    assert rows[flip]["response_mean[1]"] == ""


def test_grid_and_path_helpers():
    assert list(parse_grid("0:1:3")) == [0.0, 0.5, 1.0]
    with pytest.raises(ConfigError):
        parse_grid("0:1")
    doc = set_path(TWO_CLASS_DOC, "classes[0].lambda", 0.3)
    assert doc["classes"][0]["lambda"] == 0.3 and TWO_CLASS_DOC["classes"][0]["lambda"] == 0.2


def test_module_entry_point(tmp_path):
    path = _write(tmp_path, MM1_DOC)
    proc = subprocess.run([sys.executable, "-m", "mg1overhead", "analyze", path], capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["command"] == "analyze"
