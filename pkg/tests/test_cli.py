import json
import subprocess
import sys

import pytest

from isospec.cli import main

INV_SQ = {"family": "2d", "a": [0, 1], "c": 1, "f": "eta", "h": "2/kappa^2",
        "psi": {"center": [-2, 0.3]},
        "grid": {"lo": [-2, -1], "hi": [0, 1], "N": [3, 3]}}


@pytest.fixture
def inverse_square(tmp_path):
    path = tmp_path / "inverse_square.json"
    path.write_text(json.dumps(INV_SQ))
    return path


def test_validate_exit_codes(tmp_path):
    out = tmp_path / "v.json"
    assert main(["validate", "--n", "3", "--a", "1,0,0", "--c", "0,0,1", "--output", str(out)]) == 0
    assert json.loads(out.read_text())["satisfied"] is True
    assert main(["validate", "--n", "3", "--a", "0,0,1", "--c", "0,0,1", "--output", str(out)]) == 2
    assert main(["validate", "--preset", "10", "--output", str(out)]) == 0


def test_config_errors_exit_one(tmp_path, inverse_square):
    assert main(["construct", "--config", str(inverse_square), "--f", "eta +"]) == 1
    assert main(["construct", "--config", str(tmp_path / "missing.json")]) == 1
    assert main(["no-such-command"]) == 1
    assert main(["validate", "--n", "2", "--a", "0,0", "--c", "1,2"]) == 1


def test_construct_writes_csv(tmp_path, inverse_square):
    csv_path = tmp_path / "s.csv"
    assert main(["construct", "--config", str(inverse_square), "--csv", str(csv_path),
                 "--output", str(tmp_path / "c.json")]) == 0
    rows = csv_path.read_text().splitlines()
    assert rows[0] == "x,y,V0,V1,L0,singular"
    assert len(rows) == 10
    # the origin row: V1 = 2
    origin = [r for r in rows if r.startswith("0,0,")][0].split(",")
    assert float(origin[3]) == pytest.approx(2.0)


def test_verify_and_negative_control(tmp_path, inverse_square):
    good = tmp_path / "good.json"
    assert main(["verify", "--config", str(inverse_square), "--output", str(good)]) == 0
    d = json.loads(good.read_text())
    assert abs(d["order"] - 2) < 0.2 and d["passed"]
    bad = tmp_path / "bad.json"
    assert main(["verify", "--config", str(inverse_square), "--corrupt-V1", "0.1", "--output", str(bad)]) == 2
    assert not json.loads(bad.read_text())["passed"]


def test_verify_singular_support_exits_two(tmp_path):
    cfg = tmp_path / "sing.json"
    cfg.write_text(json.dumps(dict(INV_SQ, psi={"center": [1.0, 0.0]})))     # on a2 - c x = 0
    assert main(["verify", "--config", str(cfg)]) == 2


def test_spectrum_and_hierarchy(tmp_path):
    out = tmp_path / "s.json"
    assert main(["spectrum", "--f", "xi", "--k", "3", "--N", "600", "--output", str(out)]) == 0
    assert json.loads(out.read_text())["unbroken"] is True
    h = tmp_path / "h.csv"
    assert main(["hierarchy", "--V", "x^2", "--seeds", "0,0", "--k", "3", "--N", "600",
                 "--csv", str(h), "--output", str(tmp_path / "h.json")]) == 0
    assert len(h.read_text().splitlines()) == 4


def test_convert_coords(tmp_path):
    pts = tmp_path / "p.csv"
    pts.write_text("x,y,z\n1,1,0\n0,0,0\n")
    out = tmp_path / "o.csv"
    assert main(["convert-coords", "--points", str(pts), "--n", "3", "--a", "0,0,0",
                 "--c", "0,0,1", "--output", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "x,y,z,beta,gamma,eta,singular"
    assert lines[1].split(",")[5] == "-1"           # eta = -1 at (1, 1, 0)
    assert lines[2].endswith(",1")                    # origin: L = 0


def test_presets_command(tmp_path):
    out = tmp_path / "p.json"
    assert main(["presets", "--output", str(out)]) == 0
    assert len(json.loads(out.read_text())) == 10


def test_sweep_is_deterministic_across_workers(tmp_path):
    cfg = tmp_path / "fm.json"
    cfg.write_text(json.dumps({"family": "free-motion-2d", "a": [0, 1], "c": 1, "b": -1,
                               "b1": 0, "psi": {"center": [-2, 0.3]}}))
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    args = ["verify", "--config", str(cfg), "--sweep", "b=-1,0.5", "--sweep", "b1=0,0.3"]
    assert main(args + ["--output", str(a)]) == 0
    assert main(args + ["--output", str(b), "--workers", "2"]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert len(json.loads(a.read_text())) == 4


def test_module_entry_point(tmp_path):
    out = tmp_path / "v.json"
    r = subprocess.run([sys.executable, "-m", "isospec", "validate", "--preset", "3",
                        "--output", str(out)], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    assert json.loads(out.read_text())["satisfied"]
