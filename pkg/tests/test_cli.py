import json
import subprocess
import sys

import numpy as np
import pytest

from specgnn.cli import main
from specgnn.graph import normalize_shift, save_graph, sbm_generate

TINY = {
    "seed": 1,
    "graph": {"n": 10, "communities": 2, "p_intra": 0.9, "p_inter": 0.3},
    "data": {"train": 20, "valid": 10, "test": 10, "t_max": 2},
    "model": {"L": 1, "F": 2, "K": 1},
    "train": {"iterations": 2, "batch": 10},
    "sweep": {"trials": 1},
}


def write(path, obj):
    path.write_text(json.dumps(obj))
    return path


def test_run_with_overrides(tmp_path, capsys):
    cfg = write(tmp_path / "c.json", TINY)
    out = tmp_path / "out"
    code = main(["run", "--config", str(cfg), "--eps", "0,0.01", "--gamma", "0.2",
                 "--trials", "2", "--seed", "3", "--out", str(out)])
    assert code == 0
    lines = (out / "results.csv").read_text().splitlines()
    assert len(lines) == 1 + 3 * 2 * 2
    assert "wrote 12 records" in capsys.readouterr().out


def test_config_errors_exit_2(tmp_path):
    assert main(["run", "--config", str(tmp_path / "missing.json")]) == 2
    bad = write(tmp_path / "bad.json", {**TINY, "colour": "blue"})
    assert main(["run", "--config", str(bad)]) == 2
    good = write(tmp_path / "good.json", TINY)
    assert main(["run", "--config", str(good), "--eps", "0.01,0"]) == 2
    assert main(["run"]) == 2
    assert main(["frobnicate"]) == 2


def test_data_errors_exit_3(tmp_path):
    assert main(["data", "movielens", "--path", str(tmp_path / "nowhere")]) == 3
    ml = write(tmp_path / "ml.json", {"task": "movielens",
                                      "graph": {"movielens_path": str(tmp_path / "none")}})
    assert main(["run", "--config", str(ml)]) == 3


def test_data_movielens_summary(tmp_path, capsys):
    rng = np.random.default_rng(0)
    lines = [f"{u}\t{m}\t{rng.integers(1, 6)}\t0" for u in range(1, 30) for m in range(1, 8)
             if rng.random() < 0.8]
    (tmp_path / "u.data").write_text("\n".join(lines) + "\n")
    code = main(["data", "movielens", "--path", str(tmp_path), "--movies", "6", "--k", "2",
                 "--graph-out", str(tmp_path / "g.txt")])
    assert code == 0
    text = capsys.readouterr().out
    assert f"records={len(lines)}" in text and "graph nodes=6" in text
    assert (tmp_path / "g.txt").exists()


def test_eig(tmp_path, capsys):
    g = normalize_shift(sbm_generate(10, 2, 0.9, 0.3, seed=0))
    save_graph(g, tmp_path / "g.txt")
    assert main(["eig", "--graph", str(tmp_path / "g.txt")]) == 0
    vals = [float(v) for v in capsys.readouterr().out.splitlines()[1:]]
    np.testing.assert_allclose(vals, np.linalg.eigvalsh(g.shift), atol=1e-12)


def test_gradcheck(capsys):
    assert main(["gradcheck", "--seeds", "2"]) == 0
    assert capsys.readouterr().out.strip().splitlines()[-1].startswith("PASS")


def test_gradcheck_failure_exit_4():
    # an absurd tolerance cannot be met
    assert main(["gradcheck", "--seeds", "1", "--tol", "0"]) == 4


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "specgnn.cli", "eig", "--graph",
                           str(tmp_path / "none.txt")], capture_output=True, text=True)
    assert proc.returncode == 3 and "error" in proc.stderr
