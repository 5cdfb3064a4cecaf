import csv
import json
import subprocess
import sys

import pytest

from dualtune.cli import main
from dualtune.config import PROFILES, default_tolerances
from dualtune.families import Degree3Family, random_constant_landscape, random_single_piece
from dualtune.landscape import load_landscape, save_landscape


@pytest.fixture
def files(tmp_path, circle, perfect_fit):
    (tmp_path / "circle.json").write_text(save_landscape(circle))
    (tmp_path / "fit.json").write_text(save_landscape(perfect_fit))
    (tmp_path / "bad.json").write_text("{not json")
    return tmp_path


def run(*args):
    return main([str(a) for a in args])


def test_envelope_circle(files):
    out = files / "c"
    assert run("envelope", files / "circle.json", "--out", out) == 0
    rows = list(csv.DictReader(open(out / "breakpoints.csv")))
    assert [float(r["alpha"]) for r in rows] == pytest.approx([0.25, 0.75], abs=1e-9)
    rep = json.loads((out / "oscillation.json").read_text())
    assert rep["B1"] == 2


def test_envelope_perfect_fit(files):
    out = files / "f"
    assert run("envelope", files / "fit.json", "--out", out) == 0
    assert list(csv.reader(open(out / "breakpoints.csv")))[1:] == []
    rep = json.loads((out / "oscillation.json").read_text())
    assert rep["B1"] == 0 and rep["B2"] == 0


def test_envelope_malformed(files, capsys):
    assert run("envelope", files / "bad.json", "--out", files / "b") == 1
    assert "malformed" in capsys.readouterr().err


def test_envelope_missing_file(files):
    assert run("envelope", files / "nope.json", "--out", files / "n") == 1


def test_no_overwrite_without_force(files):
    out = files / "c"
    assert run("envelope", files / "circle.json", "--out", out) == 0
    assert run("envelope", files / "circle.json", "--out", out) == 1
    assert run("envelope", files / "circle.json", "--out", out, "--force") == 0


def test_bounds(capsys):
    assert run("bounds", "--warren", 2, 2) == 0
    assert json.loads(capsys.readouterr().out)["warren_components"] == 8
    assert run("bounds", "--lemma51", 2) == 0
    assert json.loads(capsys.readouterr().out)["discontinuity_bound"] == 8
    assert run("bounds", 1, 0, 1, 2) == 0
    assert json.loads(capsys.readouterr().out)["discontinuity_bound"] == 64


def test_bounds_usage_errors():
    assert run("bounds", "--lemma51", 0) == 1
    assert run("bounds", 1, 2) == 1
    with pytest.raises(SystemExit) as exc:
        run("bounds", "--lemma51", "x")
    assert exc.value.code == 1


def test_tune_byte_identical(tmp_path):
    for d in ("a", "b"):
        assert run("tune", "synthetic-poly", "--m", 16, "--seed", 7, "--out", tmp_path / d) == 0
    for name in ("tuning.json", "gapcurve.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_tune_gcn_shape(tmp_path):
    assert run("tune", "gcn", "--m", 8, "--trials", 20, "--seed", 1, "--out", tmp_path) == 0
    rows = list(csv.reader(open(tmp_path / "gapcurve.csv")))
    assert rows[0] == ["m", "mean_gap", "std_gap", "slope_fit"]
    assert len(rows) == 2 and rows[1][0] == "8"
    json.loads((tmp_path / "tuning.json").read_text())


def test_tune_unknown_family(tmp_path):
    assert run("tune", "unknown", "--seed", 1, "--out", tmp_path) == 1


def test_seed_required_for_stochastic_commands():
    for cmd in (["tune", "synthetic-poly"], ["shatter", "synthetic-poly"], ["gen-gcn"], ["gen-activation"]):
        with pytest.raises(SystemExit) as exc:
            run(*cmd)
        assert exc.value.code == 1


def test_oracle_and_oscillation(files):
    out = files / "o"
    assert run("oracle", files / "circle.json", "--resolution", 401, "--out", out) == 0
    rows = list(csv.DictReader(open(out / "oracle.csv")))
    assert len(rows) == 401
    assert run("oscillation", out / "oracle.csv", "--out", files / "osc.json") == 0
    assert json.loads((files / "osc.json").read_text())["oscillations"] == 2


def test_generators_round_trip(tmp_path):
    assert run("gen-gcn", "--seed", 3, "--out", tmp_path / "g.json") == 0
    assert json.loads((tmp_path / "g.json").read_text())["n"] >= 2
    assert run("gen-activation", "--seed", 3, "--out", tmp_path / "a.json") == 0
    doc = json.loads((tmp_path / "a.json").read_text())
    load_landscape(doc["landscape"])
    assert run("gen-gcn", "--seed", 3, "--out", tmp_path / "g.json") == 1


def test_perturb_and_surrogate(files, capsys):
    assert run("perturb", files / "fit.json", "--tau", "1/10", "--out", files / "p.json") == 0
    info = json.loads(capsys.readouterr().out)
    assert info["drift_bound"] == "4/5"  # w box [-1, 2] gives C = 2 * 2
    load_landscape((files / "p.json").read_text())
    assert run("surrogate", files / "fit.json", "--eta", "1/2", "--out", files / "s.json") == 0
    s = load_landscape((files / "s.json").read_text())
    assert s.pieces[0].eval([0, 0]) == -2  # w-Hessian -2, penalty 1/2 * 4
    assert run("perturb", files / "fit.json", "--tau", "0", "--out", files / "z.json") == 1


def test_shatter_reports_consistent_bounds(capsys):
    assert run("shatter", "synthetic-poly", "--seed", 0, "--pool", 8, "--max-size", 3) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["lower_bound"] <= out["pdim_upper"]


def test_entry_point_runs():
    r = subprocess.run([sys.executable, "-m", "dualtune.cli", "bounds", "--warren", "3", "2"], capture_output=True, text=True)
    assert r.returncode == 0 and json.loads(r.stdout)["warren_components"] == 18


def test_tolerance_profile_env(monkeypatch):
    monkeypatch.setenv("DUALTUNE_TOL_PROFILE", "fast")
    assert default_tolerances() == PROFILES["fast"]
    monkeypatch.setenv("DUALTUNE_TOL_PROFILE", "bogus")
    with pytest.raises(ValueError):
        default_tolerances()


def test_families_are_seeded():
    assert random_single_piece(3, 5).pieces == random_single_piece(3, 5).pieces
    a, b = random_constant_landscape(4), random_constant_landscape(4)
    assert a.boundaries == b.boundaries and 2 <= a.N <= 8
    fam = Degree3Family()
    x = [l.pieces[0] for l in fam.draw(5, 11)]
    y = [l.pieces[0] for l in fam.draw(5, 11)]
    assert x == y
    for s in range(30):
        assert random_single_piece(4, s).delta_p == 4
