import gzip
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from qbayes.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, (json.loads(out.out) if code == 0 and out.out else None), out.err


@pytest.fixture
def bell(tmp_path):
    p = tmp_path / "bell.txt"
    p.write_text("# bell pair\nH 0\nCNOT 0,1\n")
    return p


@pytest.fixture
def regression_csv(tmp_path):
    rng = np.random.default_rng(0)
    X = rng.normal(size=(8, 2))
    y = X @ [1.5, -0.5]
    p = tmp_path / "reg.csv"
    np.savetxt(p, np.column_stack([X, y]), delimiter=",", header="a,b,y", comments="")
    return p


def test_simulate(capsys, bell, tmp_path):
    code, res, _ = run(capsys, "simulate", "--circuit", str(bell), "--shots", "100", "--out", str(tmp_path / "o"))
    assert code == 0
    np.testing.assert_allclose(res["probabilities"], [0.5, 0, 0, 0.5], atol=1e-15)
    assert sum(res["counts"]) == 100 and res["counts"][1] == res["counts"][2] == 0
    assert json.loads((tmp_path / "o" / "simulate.json").read_text()) == res


def test_simulate_parametrized(capsys, tmp_path):
    p = tmp_path / "c.txt"
    p.write_text("RX 0 0\n")
    _, res, _ = run(capsys, "simulate", "--circuit", str(p), "--theta", str(math.pi))
    np.testing.assert_allclose(res["probabilities"], [0, 1], atol=1e-15)


def test_global_flags_before_command(capsys, bell):
    a = run(capsys, "--seed", "5", "simulate", "--circuit", str(bell), "--shots", "50")[1]
    b = run(capsys, "simulate", "--circuit", str(bell), "--shots", "50", "--seed", "5")[1]
    assert a["counts"] == b["counts"]


def test_qft(capsys):
    _, res, _ = run(capsys, "qft", "--qubits", "2", "--input", "1")
    np.testing.assert_allclose(res["amplitudes_imag"], [0, 0.5, 0, -0.5], atol=1e-15)
    assert res["gate_vs_dense_max_error"] < 1e-12


def test_trotter(capsys, tmp_path):
    h = tmp_path / "h.txt"
    h.write_text("0.5 X\n0.5 Z\n")
    _, res, _ = run(capsys, "trotter", "--hamiltonian", str(h), "--steps", "1,2,4")
    e = [r["error"] for r in res["errors"]]
    assert e[0] > e[1] > e[2] and not res["commuting"]


def test_grover(capsys):
    _, res, _ = run(capsys, "grover", "--n", "8", "--marked", "5", "--iters", "2")
    assert abs(res["probability"] - 0.9453125) < 1e-9
    _, res2, _ = run(capsys, "grover", "--size", "8", "--marked", "5", "--iterations", "2")
    assert res2 == res


def test_minmap(capsys, tmp_path):
    t = tmp_path / "t.txt"
    t.write_text("3 1 4 1 5 9 2 6\n")
    _, res, _ = run(capsys, "minmap", "--table", str(t))
    assert res["value"] == 1 and res["index"] == 1
    assert run(capsys, "minmap")[0] == 2


def test_kernel(capsys, regression_csv, tmp_path):
    code, res, _ = run(capsys, "kernel", "--data", str(regression_csv), "--out", str(tmp_path / "k"))
    K = np.loadtxt(tmp_path / "k" / "gram.csv", delimiter=",")
    np.testing.assert_allclose(K, res["gram"])
    np.testing.assert_allclose(np.diag(K), 1, atol=1e-12)
    assert res["min_eigenvalue"] >= -1e-9


def test_krr_and_pinv(capsys, regression_csv, tmp_path):
    code, res, _ = run(capsys, "krr", "--train", str(regression_csv), "--test", str(regression_csv),
                       "--gamma", "0", "--out", str(tmp_path))
    assert code == 0 and res["mse"] < 1e-12
    assert (tmp_path / "krr_model.json").is_file()
    _, res, _ = run(capsys, "pinv", "--train", str(regression_csv), "--test", str(regression_csv))
    np.testing.assert_allclose(res["coefficients"], [1.5, -0.5], atol=1e-12)
    assert res["rank"] == 2


def test_gp(capsys, regression_csv):
    _, res, _ = run(capsys, "gp", "--train", str(regression_csv), "--noise", "1e-10")
    y = np.loadtxt(regression_csv, delimiter=",", skiprows=1)[:, -1]
    np.testing.assert_allclose(res["mean"], y, atol=1e-6)
    assert max(res["variance"]) < 1e-6


def test_qnn_train(capsys, tmp_path):
    p = tmp_path / "q.csv"
    p.write_text("1,-1,1\n-1,1,-1\n1,1,1\n-1,-1,-1\n")
    code, res, _ = run(capsys, "qnn-train", "--data", str(p), "--epochs", "5", "--sweeps", "ZX",
                       "--out", str(tmp_path / "o"))
    assert code == 0 and len(res["losses"]) == 5 and res["losses"][-1] < res["losses"][0]
    assert (tmp_path / "o" / "model.json").is_file() and (tmp_path / "o" / "curve.csv").is_file()


def test_config_merging(capsys, tmp_path, bell):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"iterations": 1, "seed": 3}))
    _, res, _ = run(capsys, "grover", "--size", "8", "--marked", "0", "--config", str(cfg))
    assert res["iterations"] == 1
    _, res, _ = run(capsys, "grover", "--size", "8", "--marked", "0", "--config", str(cfg), "--iterations", "2")
    assert res["iterations"] == 2


# -- exit codes -----------------------------------------------------------------


def test_exit_config_errors(capsys, tmp_path, bell):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"nonsense": 1}))
    assert run(capsys, "grover", "--size", "8", "--marked", "0", "--config", str(bad))[0] == 2
    assert run(capsys, "grover", "--size", "6", "--marked", "0")[0] == 2
    assert run(capsys, "simulate", "--circuit", str(tmp_path / "missing.txt"))[0] == 2
    assert run(capsys, "nosuchcommand")[0] == 2
    assert run(capsys, "mnist", "--train-size", "0")[0] == 2
    assert run(capsys, "--threads", "0", "simulate", "--circuit", str(bell))[0] == 2


def test_exit_format_error(capsys, tmp_path):
    d = tmp_path / "idx"
    d.mkdir()
    for split in ("train", "t10k"):
        (d / f"{split}-images-idx3-ubyte").write_bytes(b"\x00\x00\x08")
        (d / f"{split}-labels-idx1-ubyte.gz").write_bytes(gzip.compress(b"\x00\x00\x08\x01"))
    code, _, err = run(capsys, "mnist", "--data-dir", str(d))
    assert code == 3 and "offset" in err
    p = tmp_path / "q.csv"
    p.write_text("0.5,1\n")
    assert run(capsys, "qnn-train", "--data", str(p))[0] == 3


def test_exit_numerical_error(capsys, tmp_path):
    p = tmp_path / "dup.csv"
    p.write_text("1,0,1\n1,0,-1\n")
    code, _, err = run(capsys, "krr", "--train", str(p), "--encoding", "basis", "--gamma", "0")
    assert code == 4 and "numerical" in err


def test_module_entry_point(bell):
    r = subprocess.run([sys.executable, "-m", "qbayes", "grover", "--size", "4", "--marked", "2"],
                       capture_output=True, text=True)
    assert r.returncode == 0
    assert abs(json.loads(r.stdout)["probability"] - 1) < 1e-9
    r = subprocess.run([sys.executable, "-m", "qbayes", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.startswith("qbayes")
