import json
import math

import numpy as np
import pytest

from glab import harness
from glab.cli import main
from glab.errors import SchemaError
from glab.measures import read_csv


def run(tmp_path, *args):
    return main([str(a) for a in args])


def test_compute_gamma_ball(tmp_path):
    out = tmp_path / "g.csv"
    assert run(tmp_path, "compute", "gamma", "--body", "ball", "--d", 3, "--j", 1, "--samples", 20000, "--out", out) == 0
    side = json.loads((tmp_path / "g.csv.json").read_text())
    assert abs(side["mass"] - math.pi) < 3 * side["mass_se"]
    mu = read_csv(out)
    assert len(mu) == side["samples"]


def test_compute_rho_j_cube(tmp_path):
    out = tmp_path / "r.csv"
    assert run(tmp_path, "compute", "rho_j", "--body", "cube", "--d", 3, "--j", 2, "--out", out) == 0
    mu = read_csv(out)
    assert len(mu) == 3 and np.allclose(mu.weights, 4.0)


def test_compute_direction_ball(tmp_path):
    out = tmp_path / "dir.csv"
    assert run(tmp_path, "compute", "direction", "--body", "ball", "--d", 3, "--j", 1, "--samples", 5000, "--out", out) == 0
    side = json.loads((tmp_path / "dir.csv.json").read_text())
    assert side["mass"] == pytest.approx(2 * math.pi, abs=max(3 * side["mass_se"], 1e-9))


def test_verify_thm_3_1_ball(tmp_path, capsys):
    rep = tmp_path / "r.json"
    code = run(tmp_path, "verify", "thm-3-1", "--body", "ball", "--d", 3, "--j", 1, "--samples", 20000, "--report", rep)
    doc = json.loads(rep.read_text())
    assert code == 0 and doc["verdict"] == "PASS"
    assert doc["comparison"]["fitted_constant"]["value"] == pytest.approx(1.0, rel=0.02)
    assert "thm-3-1: PASS" in capsys.readouterr().err


def test_verify_failure_exit_code(tmp_path):
    # a segment violates the proportionality audited by thm-7-1
    code = run(tmp_path, "verify", "thm-7-1", "--body", "segment", "--d", 3, "--j", 1, "--samples", 20000,
               "--report", tmp_path / "r.json")
    assert code == 5


def test_json_body_file_and_schema_errors(tmp_path, capsys):
    good = tmp_path / "z.json"
    good.write_text(json.dumps({"type": "zonotope", "generators": [[1, 0, 0], [0, 1, 0], [0, 0, 1]]}))
    assert run(tmp_path, "compute", "rho_j", "--body", good, "--d", 3, "--j", 1, "--out", tmp_path / "o.csv") == 0
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"type": "zonotope", "generators": [[1, 0, 0], [0, "x", 0]]}))
    assert run(tmp_path, "compute", "rho_j", "--body", bad, "--d", 3, "--j", 1, "--out", tmp_path / "o.csv") == 3
    assert "$.generators[1]" in capsys.readouterr().err
    assert run(tmp_path, "compute", "gamma", "--body", tmp_path / "missing.json", "--d", 3, "--j", 1,
               "--out", tmp_path / "o.csv") == 3


def test_parse_body_paths():
    with pytest.raises(SchemaError) as exc:
        harness.parse_body({"type": "ball", "radius": -1, "dim": 3})
    assert exc.value.path == "$.radius"
    with pytest.raises(SchemaError) as exc:
        harness.parse_body({"type": "cone"})
    assert exc.value.path == "$.type"


def test_unsupported_exit_code(tmp_path):
    code = run(tmp_path, "verify", "prop-4-1", "--body", "ball", "--d", 3, "--j", 1, "--samples", 100,
               "--report", tmp_path / "r.json")
    assert code == 4
    assert run(tmp_path, "compute", "gamma", "--body", "cube", "--d", 3, "--j", 3, "--out", tmp_path / "o.csv") == 4


def test_usage_exit_code(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["verify", "no-such-identity", "--body", "ball", "--d", "3", "--j", "1"])
    assert exc.value.code == 2
    assert run(tmp_path, "compute", "gamma", "--body", "ball", "--d", 3, "--j", 1, "--samples", 0,
               "--out", tmp_path / "o.csv") == 2


def test_bundle_empty_directory(tmp_path, capsys):
    out = tmp_path / "summary.json"
    (tmp_path / "reports").mkdir()
    assert run(tmp_path, "bundle", "--dir", tmp_path / "reports", "--out", out) == 0
    assert json.loads(out.read_text()) == {"reports": []}
    assert "warning" in capsys.readouterr().err


def test_bundle_collects_reports(tmp_path):
    d = tmp_path / "reports"
    d.mkdir()
    run(tmp_path, "verify", "eq-2-5", "--body", "random-zonotope", "--d", 4, "--j", 2, "--samples", 20,
        "--report", d / "eq.json")
    run(tmp_path, "verify", "thm-3-1", "--body", "ball", "--d", 3, "--j", 1, "--samples", 2000,
        "--report", d / "t.json")
    out = tmp_path / "summary.csv"
    assert run(tmp_path, "bundle", "--dir", d, "--out", out) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 3


def test_reports_are_deterministic(tmp_path):
    args = ["verify", "thm-6-1", "--body", "cube", "--d", 3, "--j", 1, "--samples", 3000, "--seed", 4]
    run(tmp_path, *args, "--report", tmp_path / "a.json")
    run(tmp_path, *args, "--report", tmp_path / "b.json")
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
