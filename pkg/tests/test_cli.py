import json
import math
import subprocess
import sys

import pytest

from invisible_body.cli import run, shipped_config

CANONICAL = str(shipped_config("canonical"))
PERTURBED = str(shipped_config("perturbed"))


def _write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj) if not isinstance(obj, str) else obj)
    return str(p)


def _canonical_dict():
    with open(CANONICAL) as fh:
        return json.load(fh)


def test_construct(capsys):
    assert run(["construct", "-c", CANONICAL]) == 0
    d = json.loads(capsys.readouterr().out)
    assert d["arc_count"] == 104 and d["segment_count"] == 8
    assert d["points"]["C1"] == [-0.5, 1.5]
    assert d["validation"]["ok"]


def test_verify_pass_and_byte_identical(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run(["verify", "-c", CANONICAL, "--n", "500", "-o", str(a)]) == 0
    assert run(["verify", "-c", CANONICAL, "--n", "500", "-o", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    d = json.loads(a.read_text())
    assert d["passed"] and set(d["reports"]) == {"A1", "A2"}


def test_verify_single_source_and_seed(capsys):
    assert run(["verify", "-c", CANONICAL, "--n", "200", "--source", "A1", "--seed", "9"]) == 0
    d = json.loads(capsys.readouterr().out)
    assert list(d["reports"]) == ["A1"] and d["reports"]["A1"]["seed"] == 9


def test_verify_negative_control_fails(capsys):
    assert run(["verify", "-c", PERTURBED, "--n", "500"]) == 1
    d = json.loads(capsys.readouterr().out)
    assert not d["passed"] and d["reports"]["A2"]["max_deviation"] > 1e-3


def test_invalid_geometry_exit_2(tmp_path, capsys):
    cfg = _canonical_dict()
    cfg["O"] = cfg["K"]
    assert run(["construct", "-c", _write(tmp_path, "bad.json", cfg)]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "InvalidConfiguration" and err["constraints"]


def test_unknown_key_exit_2(tmp_path, capsys):
    cfg = _canonical_dict()
    cfg["colour"] = "red"
    assert run(["construct", "-c", _write(tmp_path, "bad.json", cfg)]) == 2
    assert "schema" in capsys.readouterr().err


@pytest.mark.parametrize("patch", [{"A1": [0, "x"]}, {"depth": -2}, {"K": [0]}, {"n_rays": 0}])
def test_schema_violations_exit_2(tmp_path, patch):
    cfg = _canonical_dict()
    cfg.update(patch)
    assert run(["construct", "-c", _write(tmp_path, "bad.json", cfg)]) == 2


def test_bad_json_exit_2(tmp_path):
    assert run(["construct", "-c", _write(tmp_path, "bad.json", "{not json")]) == 2


def test_io_errors_exit_3(tmp_path):
    assert run(["construct", "-c", str(tmp_path / "missing.json")]) == 3
    assert run(["construct", "-c", CANONICAL, "-o", str(tmp_path / "no" / "dir" / "x.json")]) == 3


def test_lemma(capsys):
    assert run(["lemma", "--samples", "20", "--seed", "3"]) == 0
    d = json.loads(capsys.readouterr().out)
    assert d["passed"] and d["lemma_a"]["samples"] == 20


def test_trace_and_render(tmp_path, capsys):
    assert run(["trace", "-c", CANONICAL, "--angle", "2.2"]) == 0
    line = capsys.readouterr().out
    d = json.loads(line)
    assert d["status"] == "Exited" and len(d["bounces"]) == 4
    assert d["metrics"]["angle"] < 1e-8
    traces = tmp_path / "t.jsonl"
    traces.write_text(line)
    svg = tmp_path / "out.svg"
    assert run(["render", "-c", CANONICAL, "--traces", str(traces), "-o", str(svg)]) == 0
    assert 'id="trace0"' in svg.read_text()


def test_mesh_full_and_partial(tmp_path):
    out = tmp_path / "m.obj"
    assert run(["mesh", "-c", CANONICAL, "--ntheta", "8", "--narc", "2", "-o", str(out)]) == 0
    full = out.read_text()
    assert full.count("\no ") == 112
    cfg = _canonical_dict()
    cfg["angular_range"] = [0.0, math.pi]
    half = tmp_path / "h.obj"
    assert run(["mesh", "-c", _write(tmp_path, "half.json", cfg), "--ntheta", "8", "--narc", "2", "-o", str(half)]) == 0
    n_faces = lambda text: sum(1 for ln in text.splitlines() if ln.startswith("f "))
    assert 2 * n_faces(half.read_text()) == n_faces(full)


def test_mesh_bad_range_exit_2(tmp_path):
    cfg = _canonical_dict()
    cfg["angular_range"] = [1.0, 0.5]
    assert run(["mesh", "-c", _write(tmp_path, "r.json", cfg)]) == 2


def test_audit(capsys):
    assert run(["audit", "-c", CANONICAL]) == 0
    assert json.loads(capsys.readouterr().out)["ok"]


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "invisible_body", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "verify" in res.stdout
