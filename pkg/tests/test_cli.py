import json

import numpy as np
import pytest

from nomcor.cli import main
from nomcor.core import table_to_csv
from nomcor.fixtures import RELIGION_COUNTS


def _run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def religion(tmp_path):
    path = tmp_path / "religion.csv"
    path.write_text(table_to_csv(RELIGION_COUNTS))
    return path


def test_measure_table_with_classical(capsys, religion):
    code, out, _ = _run(capsys, "measure", str(religion), "--table", "--all-classical")
    assert code == 0
    data = json.loads(out)
    cl = data["classical"]
    assert [round(cl[k], 2) for k in ("cramers_v", "pearson_c", "gk_tau_sym", "uncertainty")] == \
        [0.13, 0.19, 0.03, 0.05]
    assert data["gamma_star"]["value"] > 0.95
    man = data["manifest"]
    assert man["version"] and len(man["input_sha256"]) == 64
    assert man["budgets"]["max_categories"] == 8


def test_text_output_uses_six_digits(capsys, religion):
    code, out, _ = _run(capsys, "measure", str(religion), "--table", "--format", "text")
    assert code == 0
    assert "gamma_star.value\t0.969063" in out


def test_diagonal_table(capsys, tmp_path):
    path = tmp_path / "diag.csv"
    path.write_text(",a,b,c\nA,5,0,0\nB,0,3,0\nC,0,0,4\n")
    code, out, _ = _run(capsys, "measure", str(path), "--table")
    assert code == 0 and json.loads(out)["gamma_star"]["value"] == 1.0


def test_budget_exit_code(capsys, tmp_path):
    rng = np.random.default_rng(0)
    labels = [f"c{i}" for i in range(9)]
    rows = "".join(f"{rng.choice(labels)},{rng.choice(labels)}\n" for _ in range(300))
    path = tmp_path / "big.csv"
    path.write_text("x,y\n" + rows)
    code, _, err = _run(capsys, "measure", str(path), "--sample")
    assert code == 3 and "budget" in err


def test_infer_comonotonic(capsys, tmp_path):
    path = tmp_path / "s.csv"
    path.write_text("x,y\n" + "A,a\n" * 5 + "B,b\n" * 3 + "C,c\n" * 4)
    code, out, _ = _run(capsys, "infer", str(path), "--sample", "--test", "--seed", "3")
    assert code == 0
    data = json.loads(out)
    assert data["ci"] == [1.0, 1.0]
    assert 0 <= data["p_value"] <= 1 and data["mvn_error"] is not None
    assert data["manifest"]["seed"] == 3


def test_seed_env_fallback(capsys, tmp_path, monkeypatch):
    path = tmp_path / "s.csv"
    path.write_text("x,y\nA,1\nB,2\nA,3\nB,5\nC,0\nC,4\n")
    monkeypatch.setenv("NOMCOR_SEED", "41")
    code, out, _ = _run(capsys, "infer", str(path), "--sample")
    assert code == 0 and json.loads(out)["manifest"]["seed"] == 41
    monkeypatch.setenv("NOMCOR_SEED", "x")
    assert _run(capsys, "infer", str(path), "--sample")[0] == 2


def test_usage_errors(capsys, tmp_path):
    path = tmp_path / "s.csv"
    path.write_text("x,y\nA,1\nB,2\n")
    assert _run(capsys, "infer", str(path), "--sample", "--level", "1.5")[0] == 2
    assert _run(capsys, "infer", str(path))[0] == 2
    assert _run(capsys, "measure", str(tmp_path / "missing.csv"), "--sample")[0] == 2
    assert _run(capsys, "simulate", str(tmp_path / "missing.cfg"))[0] == 2
    assert _run(capsys)[0] == 2


def test_parse_error_exit(capsys, tmp_path):
    path = tmp_path / "mixed.csv"
    path.write_text("x,y\nA,1\nB,two\n")
    code, _, err = _run(capsys, "measure", str(path), "--sample")
    assert code == 2 and "row 2" in err


def test_degenerate_exit(capsys, tmp_path):
    path = tmp_path / "flat.csv"
    path.write_text("x,y\nA,a\nB,a\nC,a\n")
    assert _run(capsys, "measure", str(path), "--sample")[0] == 4


def test_simulate_is_byte_identical(capsys, tmp_path):
    cfg = tmp_path / "tiny.cfg"
    cfg.write_text(
        "[tiny]\nkind = power\nfamilies = RN, UU\nn = 60\ngamma_star = 0.2\n"
        "replications = 8\nseed = 4\n")
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert _run(capsys, "simulate", str(cfg), "--out", str(out1))[0] == 0
    assert _run(capsys, "simulate", str(cfg), "--out", str(out2), "--threads", "2")[0] == 0
    assert (out1 / "tiny.tsv").read_bytes() == (out2 / "tiny.tsv").read_bytes()
    side = json.loads((out1 / "tiny.json").read_text())
    assert side["seed"] == 4
    manifest = json.loads((out1 / "manifest.json").read_text())
    assert manifest["outputs"] == ["tiny.tsv", "tiny.json"]
