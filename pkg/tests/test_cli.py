import json
from pathlib import Path

import pytest

from hovar import fixtures
from hovar.cli import main


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    d = tmp_path_factory.mktemp("fixtures")
    assert main(["fixtures", "export", str(d)]) == 0
    return d


def run(*argv):
    return main([str(a) for a in argv])


def load(path):
    return json.loads(Path(path).read_text())


def test_fixtures_list(capsys):
    assert run("fixtures", "list") == 0
    out = capsys.readouterr().out
    assert all(name in out for name in fixtures.NAMES)


def test_export_contents(corpus):
    names = {p.name for p in corpus.iterdir()}
    assert {f"{n}.json" for n in fixtures.NAMES} <= names
    assert "README.md" in names and "dirichlet_parabola.trajectory.json" in names


@pytest.mark.parametrize("name,value,tol", [("dirichlet", 1.0, 1e-8), ("beam", 12.0, 1e-6)])
def test_solve(corpus, tmp_path, name, value, tol):
    assert run("solve", corpus / f"{name}.json", "--out", tmp_path) == 0
    report = load(tmp_path / "solve.json")
    assert abs(report["value"] - value) <= tol and report["manifest"] == "manifest.json"
    assert (tmp_path / "trajectory.csv").read_text().startswith("t,x1")
    assert load(tmp_path / "manifest.json")["command"] == "solve"


def test_solve_non_converged(corpus, tmp_path):
    raw = load(corpus / "mania.json")
    raw["maxiter"] = 1
    raw["restarts"] = 1
    path = tmp_path / "capped.json"
    path.write_text(json.dumps(raw))
    assert run("solve", path, "--out", tmp_path / "o") == 2
    assert load(tmp_path / "o" / "solve.json")["converged"] is False


def test_missing_boundary(corpus, tmp_path, capsys):
    raw = load(corpus / "dirichlet.json")
    del raw["boundary"]
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(raw))
    assert run("solve", path, "--out", tmp_path / "o") == 1
    assert "boundary" in capsys.readouterr().err
    # the manifest exists even though the run stopped on input
    assert (tmp_path / "o" / "manifest.json").is_file()


@pytest.mark.parametrize("argv", [
    ["solve", "nope.json"],
    ["solve", "{corpus}/dirichlet.json", "--grading", "spiral"],
    ["solve", "{corpus}/beam.json", "--quad-order", "2"],
    ["gap", "{corpus}/dirichlet.json", "--levels", "2"],
    ["probe", "{corpus}/beam.json", "--levels", "1"],
    ["check", "{corpus}/superlinear_h4.json", "--conditions", "h9"],
    ["verify", "{corpus}/beam.json", "{corpus}/dirichlet.trajectory.json"],
    ["frobnicate"],
])
def test_input_errors(corpus, tmp_path, argv):
    argv = [a.format(corpus=corpus) for a in argv]
    assert main(argv + (["--out", str(tmp_path)] if argv[0] not in ("frobnicate",) else [])) == 1


def test_bad_json(tmp_path, capsys):
    path = tmp_path / "p.json"
    path.write_text("{")
    assert run("solve", path, "--out", tmp_path / "o") == 1
    assert "invalid JSON" in capsys.readouterr().err


def test_verify_line_and_parabola(corpus, tmp_path):
    assert run("verify", corpus / "dirichlet.json", corpus / "dirichlet.trajectory.json", "--out", tmp_path / "a") == 0
    assert load(tmp_path / "a" / "verify.json")["verdict"] == "constant"
    assert (tmp_path / "a" / "residuals.csv").read_text().startswith("s,phi_0,phi_1,excluded")
    assert run("verify", corpus / "dirichlet.json", corpus / "dirichlet_parabola.trajectory.json", "--out", tmp_path / "b") == 3


def test_verify_near_singular_is_inconclusive(corpus, tmp_path):
    raw = {"mesh": {"nodes": [0.0, 1.0]}, "node_data": [[[0.0]], [[1e9]]]}
    path = tmp_path / "steep.json"
    path.write_text(json.dumps(raw))
    problem = load(corpus / "dirichlet.json")
    problem["boundary"] = {"left": [[0.0]], "right": [[1e9]]}
    ppath = tmp_path / "steep_problem.json"
    ppath.write_text(json.dumps(problem))
    assert run("verify", ppath, path, "--out", tmp_path / "o") == 4


def test_check(corpus, tmp_path):
    assert run("check", corpus / "superlinear_h4.json", "--conditions", "h4", "--out", tmp_path / "a") == 0
    (v,) = load(tmp_path / "a" / "check.json")["verdicts"]
    assert v["status"] == "holds-on-box" and v["witness"] == {"a": 0.5, "b": 0.5}
    assert run("check", corpus / "example_cv90.json", "--conditions", "h4", "--out", tmp_path / "b") == 0
    (v,) = load(tmp_path / "b" / "check.json")["verdicts"]
    assert v["status"] == "violated" and v["point"]["partial"] < 1e-12
    assert run("check", corpus / "dirichlet.json", "--conditions", "cv_autonomous", "--out", tmp_path / "c") == 0
    (v,) = load(tmp_path / "c" / "check.json")["verdicts"]
    assert v["status"] == "holds-on-box" and v["witness"]["c"] == 0


def test_check_with_box_file(corpus, tmp_path):
    box = {"t": [0, 1], "x": [[[-1, 1]], [[-2, 2]]], "counts": 9}
    path = tmp_path / "box.json"
    path.write_text(json.dumps(box))
    assert run("check", corpus / "dirichlet.json", "--box", path, "--out", tmp_path / "o") == 0
    ids = [v["id"] for v in load(tmp_path / "o" / "check.json")["verdicts"]]
    assert ids[:3] == ["h2", "h3", "h4"] and "tonelli_morrey" in ids


def test_gap_and_probe(corpus, tmp_path):
    assert run("gap", corpus / "dirichlet.json", "--levels", 3, "--out", tmp_path / "g") == 0
    assert load(tmp_path / "g" / "gap.json")["verdict"] == "no-gap"
    assert (tmp_path / "g" / "gap.csv").read_text().startswith("level,free_cells")
    assert run("probe", corpus / "beam.json", "--levels", 3, "--out", tmp_path / "p") == 0
    report = load(tmp_path / "p" / "probe.json")
    assert all(abs(s - 6) < 1e-6 for s in report["sup_norms"]) and not report["unbounded_suspect"]


def test_byte_identical_reports(corpus, tmp_path):
    for name in ("a", "b"):
        assert run("solve", corpus / "mania.json", "--seed", 3, "--out", tmp_path / name) == 0
    for f in ("solve.json", "trajectory.json", "trajectory.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_rerun_reproduces(corpus, tmp_path):
    assert run("check", corpus / "example_cv90.json", "--out", tmp_path / "a") == 0
    assert run("rerun", tmp_path / "a" / "manifest.json", "--out", tmp_path / "b") == 0
    assert (tmp_path / "a" / "check.json").read_bytes() == (tmp_path / "b" / "check.json").read_bytes()
    manifest = load(tmp_path / "a" / "manifest.json")
    assert manifest["problem_sha256"] and manifest["seed"] == 0 and "timestamp" in manifest


def test_no_temporary_files_left(corpus, tmp_path):
    run("solve", corpus / "beam.json", "--out", tmp_path)
    assert not [p for p in tmp_path.iterdir() if p.name.endswith(".tmp")]


def test_mesh_overrides(corpus, tmp_path):
    assert run("solve", corpus / "dirichlet.json", "--mesh", 3, "--out", tmp_path / "u") == 0
    assert len(load(tmp_path / "u" / "trajectory.json")["mesh"]["nodes"]) == 4
    assert run("solve", corpus / "dirichlet.json", "--grading", "geometric:0.5:right:1", "--mesh", 3, "--out", tmp_path / "g") == 0
    nodes = load(tmp_path / "g" / "trajectory.json")["mesh"]["nodes"]
    assert abs(nodes[-1] - nodes[-2] - 0.125) < 1e-12
