import json
import subprocess
import sys

import numpy as np
import pytest

from clusterquilt.cli import main
from clusterquilt.io import save_patchset, write_labels
from clusterquilt.patches import PatchSet

SIM = {"n": 90, "p": 24, "K": 3, "r": 2, "d": 5.0, "M": 3, "pattern": "sequential", "overlap": 15,
       "sigma": 0.0, "seed": 3}


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def simdir(tmp_path, capsys):
    (tmp_path / "cfg.json").write_text(json.dumps(SIM))
    code, _, err = run(capsys, "simulate", tmp_path / "cfg.json", "--out", tmp_path / "sim")
    assert code == 0, err
    return tmp_path / "sim"


def test_simulate_quilt_evaluate(simdir, tmp_path, capsys):
    for name in ("manifest.json", "labels.csv", "theta.csv", "truth.json", "config.json", "run_manifest.json"):
        assert (simdir / name).exists()
    code, out, err = run(capsys, "quilt", simdir / "manifest.json", "--rank", 2, "--clusters", 3,
                         "--out", tmp_path / "fit", "--emit-imputed")
    assert code == 0, err
    assert json.loads(out)["ordering"]["pi"]
    assert (tmp_path / "fit" / "imputed.csv").exists()
    code, out, _ = run(capsys, "evaluate", simdir / "labels.csv", tmp_path / "fit" / "labels.csv")
    assert code == 0
    assert json.loads(out) == {"ari": 1.0, "miscluster": 0.0}


def test_run_manifest_contents(simdir):
    man = json.loads((simdir / "run_manifest.json").read_text())
    assert man["command"] == "simulate" and man["seed"] == 3
    assert {"numpy", "scipy", "clusterquilt"} <= set(man["versions"])
    assert man["config_echo"]["sim"]["n"] == 90


def test_single_patch_simulation(tmp_path, capsys):
    (tmp_path / "c.json").write_text(json.dumps({**SIM, "M": 1}))
    code, out, _ = run(capsys, "simulate", tmp_path / "c.json", "--out", tmp_path / "s")
    assert code == 0 and json.loads(out)["M"] == 1


def test_bad_json_exits_2_without_output(tmp_path, capsys):
    (tmp_path / "c.json").write_text("{not json")
    code, out, err = run(capsys, "simulate", tmp_path / "c.json", "--out", tmp_path / "s")
    assert code == 2 and out == ""
    assert json.loads(err)["constraint"] == "json-syntax"
    assert not (tmp_path / "s").exists()
    assert [p.name for p in tmp_path.iterdir()] == ["c.json"]


def test_invalid_field_reported(tmp_path, capsys):
    (tmp_path / "c.json").write_text(json.dumps({**SIM, "r": 5}))
    code, _, err = run(capsys, "simulate", tmp_path / "c.json", "--out", tmp_path / "s")
    assert code == 2 and json.loads(err)["field"] == "r"


def test_unknown_flag_exits_2(capsys):
    assert run(capsys, "quilt", "--bogus")[0] == 2


def test_infeasible_given_ordering(simdir, tmp_path, capsys):
    code, _, err = run(capsys, "quilt", simdir / "manifest.json", "--rank", 2, "--clusters", 3,
                       "--ordering", "given", "--given", "[0,2,1]", "--out", tmp_path / "fit")
    assert code == 3
    assert json.loads(err)["error"] == "NoFeasibleOrderingError"
    assert not (tmp_path / "fit").exists()


def test_non_permutation_given_is_input_error(simdir, tmp_path, capsys):
    code, _, _ = run(capsys, "quilt", simdir / "manifest.json", "--rank", 2, "--clusters", 3,
                     "--ordering", "given", "--given", "[0,0,1]", "--out", tmp_path / "fit")
    assert code == 2


def test_disconnected_exits_3(tmp_path, capsys, rng):
    ps = PatchSet.from_full(rng.standard_normal((4, 6)), [([0, 1], [0, 1, 2]), ([2, 3], [3, 4, 5])])
    save_patchset(ps, tmp_path / "d")
    code, _, err = run(capsys, "quilt", tmp_path / "d" / "manifest.json", "--rank", 1, "--clusters", 2,
                       "--out", tmp_path / "fit")
    assert code == 3 and "error" in json.loads(err)


def test_singular_exits_4(tmp_path, capsys):
    X = np.zeros((4, 6))
    X[:2, :4] = [[1, 0, 1, 2], [0, 1, 1, 2]]
    X[2:, 2:] = [[1, 0, 2, 1], [0, 1, 1, -1]]
    ps = PatchSet.from_full(X, [([0, 1], [0, 1, 2, 3]), ([2, 3], [2, 3, 4, 5])])
    save_patchset(ps, tmp_path / "d")
    code, _, err = run(capsys, "quilt", tmp_path / "d" / "manifest.json", "--rank", 2, "--clusters", 3,
                       "--ordering", "given", "--given", "[0,1]", "--out", tmp_path / "fit")
    assert code == 4
    payload = json.loads(err)
    assert payload["patch"] == 1 and payload["step"] == 1 and "condition" in payload


def test_evaluate_cases(tmp_path, capsys):
    write_labels(tmp_path / "a", [0, 0, 1, 1])
    write_labels(tmp_path / "b", [1, 1, 0, 0])
    write_labels(tmp_path / "c", [0, 1, 0])
    assert json.loads(run(capsys, "evaluate", tmp_path / "a", tmp_path / "b", "--out", tmp_path / "e")[1]) == \
        {"ari": 1.0, "miscluster": 0.0}
    assert (tmp_path / "e" / "run_manifest.json").exists()
    assert run(capsys, "evaluate", tmp_path / "a", tmp_path / "c")[0] == 2


def test_rerun_byte_identical(tmp_path, capsys):
    (tmp_path / "cfg.json").write_text(json.dumps({**SIM, "sigma": 1.0}))
    for tag in ("a", "b"):
        assert run(capsys, "simulate", tmp_path / "cfg.json", "--out", tmp_path / f"sim{tag}")[0] == 0
        assert run(capsys, "quilt", tmp_path / f"sim{tag}" / "manifest.json", "--rank", 2, "--clusters", 3,
                   "--out", tmp_path / f"fit{tag}")[0] == 0
    for d in ("sim", "fit"):
        names = sorted(p.name for p in (tmp_path / f"{d}a").iterdir() if p.name != "run_manifest.json")
        for name in names:
            assert (tmp_path / f"{d}a" / name).read_bytes() == (tmp_path / f"{d}b" / name).read_bytes(), name


def test_tune_and_diagnose(simdir, tmp_path, capsys):
    code, out, err = run(capsys, "tune", simdir / "manifest.json", "--rank", "1,2", "--clusters", "2,3",
                         "--repeats", 2, "--out", tmp_path / "t")
    assert code == 0, err
    assert json.loads(out)["K"] in (2, 3)
    assert (tmp_path / "t" / "tune.json").exists()
    code, out, err = run(capsys, "diagnose", simdir / "manifest.json", "--rank", 2, "--truth", simdir,
                         "--out", tmp_path / "g")
    assert code == 0, err
    payload = json.loads(out)
    assert payload["bound"]["bound"] == 0.0
    assert payload["ordering_check"]["ratio"] == 1.0
    assert (tmp_path / "g" / "diagnostics.txt").read_text().startswith("step")
    code, out, _ = run(capsys, "diagnose", simdir / "manifest.json", "--rank", 2, "--table")
    assert code == 0 and "merge factor" in out


def test_sweep_single_row(tmp_path, capsys):
    cfg = {"base": {**SIM, "sigma": 0.5}, "axis": "d", "values": [4.0], "seeds": [0], "restarts": 5}
    (tmp_path / "w.json").write_text(json.dumps(cfg))
    code, out, err = run(capsys, "sweep", tmp_path / "w.json", "--out", tmp_path / "w")
    assert code == 0, err
    lines = (tmp_path / "w" / "sweep.csv").read_text().splitlines()
    assert lines[0] == "axis,value,seed,ari,miscluster,runtime,status" and len(lines) == 2
    assert (tmp_path / "w" / "sweep.svg").read_text().lstrip().startswith("<?xml")
    assert json.loads(out)["summary"][0]["n_ok"] == 1


def test_sweep_bad_axis(tmp_path, capsys):
    (tmp_path / "w.json").write_text(json.dumps({"base": SIM, "axis": "colour", "values": [1]}))
    code, _, err = run(capsys, "sweep", tmp_path / "w.json", "--out", tmp_path / "w")
    assert code == 2 and json.loads(err)["field"] == "axis"


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "clusterquilt", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and "cluster-quilt" in proc.stdout
