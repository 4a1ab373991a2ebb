import csv
import io
import json

import numpy as np
import pytest

from nilhodge.cli import EXIT_ALGEBRA, EXIT_INDETERMINATE, EXIT_METRIC, EXIT_OK, EXIT_OTHER, main
from nilhodge.grid import TwistedGrid, write_grid_functions


def run_json(capsys, *argv):
    code = main(list(argv) + ["--json", "-"])
    out = capsys.readouterr().out
    return code, json.loads(out)


def test_check_structure_ja(capsys):
    code, rep = run_json(capsys, "check-structure", "--preset", "omega_a")
    assert code == EXIT_OK
    assert rep["schema_version"] == 1
    assert rep["structure_equations"]["dPhi^1"] == {"12": "-i/4", "12b": "-i/4", "21b": "i/4", "22b": "1/4", "1b2b": "-i/4"}
    assert rep["structure_equations"]["dPhi^2"] == {}
    assert rep["integrable"] is False
    assert all(a["outcome"] == "pass" and a["tolerance"] == "exact" for a in rep["assertions"])


def test_check_structure_torus(capsys):
    code, rep = run_json(capsys, "check-structure", "--preset", "torus")
    assert code == EXIT_OK
    assert rep["structure_equations"] == {"dPhi^1": {}, "dPhi^2": {}}
    assert rep["integrable"] is True


def test_check_structure_broken(tmp_path, capsys):
    p = tmp_path / "bad.ini"
    p.write_text("[manifold]\nconstants = 3,1,2: 1; 1,3,4: 1\n[frame]\npreset = standard\n")
    code = main(["check-structure", "--config", str(p)])
    err = capsys.readouterr().err
    assert code == EXIT_ALGEBRA
    assert "partial^2 + mu dbar + dbar mu" in err


def test_classify(capsys):
    code, rep = run_json(capsys, "classify", "--preset", "omega_a")
    assert code == EXIT_OK
    assert rep["classification"]["label"] == "StrictlyLCK"
    assert rep["classification"]["lee_form_real"] == ["1/2", "0", "0", "1/4"]
    _, rep = run_json(capsys, "classify", "--preset", "omega_tilde_a")
    assert rep["classification"]["label"] == "AlmostKahler"
    _, rep = run_json(capsys, "classify", "--preset", "omega_tf", "--grid", "8")
    assert rep["classification"]["label"] == "GloballyConformallyKahler"
    assert all(a["outcome"] == "pass" for a in rep["assertions"])


def test_classify_indefinite_metric(tmp_path, capsys):
    p = tmp_path / "m.ini"
    p.write_text("[manifold]\npreset = kodaira-thurston\n[frame]\npreset = example42\n[metric]\nh11 = -1\nh12 = 0\nh21 = 0\nh22 = 1\n")
    assert main(["classify", "--config", str(p)]) == EXIT_METRIC


def test_periodicity_warning(tmp_path, capsys):
    p = tmp_path / "w.ini"
    p.write_text(
        "[manifold]\npreset = kodaira-thurston\n[frame]\npreset = example42\n"
        "[metric]\nh11 = exp(sin(2*pi*x3))\nh12 = 0\nh21 = 0\nh22 = 1\n"
    )
    code, rep = run_json(capsys, "classify", "--config", str(p), "--grid", "5")
    assert code == EXIT_OK
    assert rep["warnings"] and "h11" in rep["warnings"][0]


def test_betti(capsys):
    code, rep = run_json(capsys, "betti", "--preset", "omega_a")
    assert code == EXIT_OK
    assert rep["betti"]["betti"] == [1, 3, 4, 3, 1]
    assert rep["betti"]["b_minus"] == 2
    _, rep = run_json(capsys, "betti", "--preset", "torus")
    assert rep["betti"]["betti"][1] == 4


def test_config_and_preset_conflict(tmp_path, capsys):
    p = tmp_path / "x.ini"
    p.write_text("[manifold]\npreset = torus\n")
    assert main(["betti", "--config", str(p), "--preset", "omega_a"]) == EXIT_OTHER
    assert main(["betti", "--preset", "nope"]) == EXIT_OTHER


def test_harmonic11_byte_stable(tmp_path, capsys):
    outs = []
    for n in range(2):
        path = tmp_path / f"r{n}.json"
        code = main(["harmonic11", "--preset", "omega_a", "--grid", "5", "--no-timing", "--json", str(path)])
        assert code == EXIT_OK
        outs.append(path.read_bytes())
    capsys.readouterr()
    assert outs[0] == outs[1]
    rep = json.loads(outs[0])
    assert rep["spectral"]["dimension"] == 2
    assert "wall_ms" not in rep["spectral"]
    for a in rep["assertions"]:
        assert set(a) == {"name", "value", "tolerance", "outcome"}


def test_harmonic11_verify_basis_text(tmp_path, capsys):
    p = tmp_path / "cand.txt"
    p.write_text("# A; B; L; M\ni; 1; 0; -i\n-i; 0; 1; i\n1; 0; 0; 0\n")
    code, rep = run_json(capsys, "harmonic11", "--preset", "omega_a", "--grid", "5", "--verify-basis", str(p))
    assert code == EXIT_OK
    res = [r["residual"] for r in rep["verify_basis"]]
    assert res[0] <= 1e-12 and res[1] <= 1e-12
    assert res[2] > 1e-2
    outcomes = [a["outcome"] for a in rep["assertions"] if a["name"].startswith("candidate")]
    assert outcomes == ["pass", "pass", "fail"]


def test_harmonic11_verify_basis_binary(tmp_path, capsys):
    g = TwistedGrid(5)
    f = np.sin(2 * np.pi * g.coordinates[1]) / (2 * np.pi)
    z, one = np.zeros(g.shape), np.ones(g.shape)
    comps = np.array([one, z, z, z, z, z, z, np.exp(-2 * f)])
    p = tmp_path / "cand.bin"
    write_grid_functions(p, g, comps)
    code, rep = run_json(capsys, "harmonic11", "--preset", "omega_tf", "--grid", "5", "--verify-basis", str(p))
    assert code == EXIT_OK
    assert rep["spectral"]["dimension"] == 3
    assert all(r["residual"] <= 1e-12 for r in rep["verify_basis"])


def test_harmonic11_compare_conformal(capsys):
    code, rep = run_json(
        capsys, "harmonic11", "--preset", "omega_0", "--grid", "5", "--compare-conformal", "exp(2*sin(2*pi*x4))"
    )
    assert code == EXIT_OK
    block = rep["conformal"]
    assert block["coefficient_difference"] <= 1e-13
    assert max(block["subspace_angles"]) <= 1e-8


def test_harmonic11_indeterminate(capsys):
    # three kernel values but only two requested: no gap can be certified
    code = main(["harmonic11", "--preset", "omega_0", "--grid", "5", "--num-sv", "2"])
    capsys.readouterr()
    assert code == EXIT_INDETERMINATE


def _csv(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_sweep_a(capsys):
    code = main(["sweep", "a", "0,1/4,1/2,3/4", "--preset", "omega_a", "--grid", "8", "--no-timing", "--csv", "-"])
    rows = _csv(capsys.readouterr().out)
    assert code == EXIT_OK
    assert [r["dimension"] for r in rows] == ["3", "2", "2", "2"]
    assert all(r["schema_version"] == "1" and r["status"] == "ok" for r in rows)
    assert all(float(r["gap_ratio"]) >= 100 for r in rows)


def test_sweep_t(capsys):
    code = main(["sweep", "t", "0,1", "--preset", "omega_tf", "--grid", "8", "--no-timing", "--csv", "-"])
    rows = _csv(capsys.readouterr().out)
    assert code == EXIT_OK
    assert [r["dimension"] for r in rows] == ["3", "3"]


def test_sweep_records_row_errors(tmp_path, capsys):
    out = tmp_path / "s.csv"
    code = main(["sweep", "a", "1/2,bogus", "--preset", "omega_a", "--grid", "5", "--csv", str(out)])
    assert code == EXIT_OK
    rows = _csv(out.read_text())
    assert rows[0]["status"] == "ok" and rows[0]["wall_ms"]
    assert rows[1]["status"] == "error" and "bogus" in rows[1]["error"]


def test_convergence_columns(capsys):
    code = main(["convergence", "--preset", "omega_tf", "--grids", "5,6,3", "--no-timing", "--csv", "-"])
    rows = _csv(capsys.readouterr().out)
    assert code == EXIT_OK
    assert [r["N"] for r in rows] == ["5", "6", "3"]
    assert rows[0]["ratio_1"] == "" and rows[1]["ratio_4"] != ""
    assert rows[2]["status"] == "error"
