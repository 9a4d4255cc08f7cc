import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from gaussflow import load_model, transfer_entropy
from gaussflow.cli import check_hypotheses, main

MODELS = Path(__file__).resolve().parent.parent / "demos" / "models"
SCALAR = str(MODELS / "scalar_pair.json")
SCALAR_V = str(MODELS / "scalar_pair_random_start.json")
CHAIN = str(MODELS / "chain3.json")
BAD_H2 = str(MODELS / "h2_violation.json")


def run(capsys, *argv):
    status = main(list(argv))
    out, err = capsys.readouterr()
    return status, out, err


def parse_csv(text):
    lines = text.strip().splitlines()
    header = lines[0].split(",")
    rows = np.array([[float(x) for x in line.split(",")] for line in lines[1:]])
    return header, rows


def test_te_csv(capsys):
    status, out, err = run(capsys, "te", "--input", SCALAR_V, "--s", "0", "--t", "1",
                           "--step", "1e-3")
    assert status == 0 and err == ""
    header, rows = parse_csv(out)
    assert header == ["t", "T"]
    assert rows[-1, 0] == 1.0 and rows[-1, 1] > 0
    m, p = load_model(SCALAR_V)
    assert rows[-1, 1] == pytest.approx(transfer_entropy(m, p, 0.0, 1.0), rel=1e-11)
    assert rows.shape[0] == 1001


def test_twelve_significant_digits(capsys):
    _, out, _ = run(capsys, "te", "--input", SCALAR_V, "--t", "1")
    last = out.strip().splitlines()[-1].split(",")[1]
    assert len(last.replace("0.", "", 1).lstrip("0")) <= 12
    m, p = load_model(SCALAR_V)
    assert last == "%.12g" % transfer_entropy(m, p, 0.0, 1.0)


def test_di_bits(capsys):
    _, nats, _ = run(capsys, "di", "--input", SCALAR, "--t", "5")
    _, bits, _ = run(capsys, "di", "--input", SCALAR, "--t", "5", "--units", "bits")
    hn, rn = parse_csv(nats)
    hb, rb = parse_csv(bits)
    assert hn == hb == ["t", "R", "D"]
    assert rb[-1, 2] == pytest.approx(rn[-1, 2] / math.log(2), rel=1e-11)
    _, short, _ = run(capsys, "di", "--input", SCALAR, "--t", "5", "--bits")
    assert short == bits


def test_deterministic_output(tmp_path):
    outs = []
    for i in range(2):
        path = tmp_path / f"out{i}.csv"
        assert main(["split-w", "--input", CHAIN, "--s", "1", "--t", "1.5",
                     "--output", str(path)]) == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]


@pytest.mark.parametrize("cmd", ["split-x", "split-w"])
def test_split_columns(capsys, cmd):
    status, out, _ = run(capsys, cmd, "--input", CHAIN, "--s", "1", "--t", "1.5")
    header, rows = parse_csv(out)
    assert status == 0
    assert header == ["t", "total", "part_2to1", "part_3to1_given2"]
    assert rows[-1, 3] > 0
    np.testing.assert_allclose(rows[:, 2] + rows[:, 3], rows[:, 1], atol=1e-11)


def test_split_x_direct_variant(capsys):
    _, out, _ = run(capsys, "split-x", "--input", CHAIN, "--s", "1", "--t", "1.5",
                    "--variant", "direct")
    assert parse_csv(out)[1][-1, 3] == 0.0


def test_json_output(capsys):
    status, out, _ = run(capsys, "te", "--input", SCALAR, "--s", "1", "--t", "2",
                         "--format", "json", "--step", "0.01")
    doc = json.loads(out)
    assert status == 0
    assert set(doc["columns"]) == {"t", "T"}
    meta = doc["metadata"]
    assert meta["step"] == 0.01 and meta["grid_size"] == 101
    assert meta["hypotheses"]["H2"]["passed"] is True


def test_oracle_compare(capsys):
    status, out, _ = run(capsys, "oracle-compare", "--input", SCALAR, "--s", "1", "--t", "2",
                         "--oracle-dt", "0.01")
    header, rows = parse_csv(out)
    assert status == 0
    assert header == ["t", "continuous", "oracle", "rel_error"]
    assert rows.shape[0] == 101
    assert rows[-1, 3] < 1e-3


def test_check_passes(capsys):
    status, out, _ = run(capsys, "check", "--input", CHAIN)
    assert status == 0
    assert [line.split()[:2] for line in out.splitlines()] == [
        [h, "PASS"] for h in ("H1", "H2", "H3", "H4", "H5")
    ]


def test_check_h2_violation(capsys):
    status, out, err = run(capsys, "check", "--input", BAD_H2)
    assert status == 2
    assert "H2 FAIL" in out
    assert len(err.strip().splitlines()) == 1
    assert "H2" in err and "residual" in err


def test_compute_on_violation_exits_2(capsys):
    status, _, err = run(capsys, "te", "--input", BAD_H2, "--t", "1")
    assert status == 2 and "H2" in err


def test_check_hypotheses_flag(capsys, tmp_path):
    a = np.eye(3)
    a[1, 2] = a[2, 1] = 0.4
    d = json.loads(Path(CHAIN).read_text())
    d["a"]["value"] = a.tolist()
    path = tmp_path / "h5.json"
    path.write_text(json.dumps(d))
    status, _, err = run(capsys, "split-w", "--input", str(path), "--t", "1",
                         "--check-hypotheses")
    assert status == 2 and "H5" in err
    # the X-split does not need H5
    status, _, _ = run(capsys, "split-x", "--input", str(path), "--t", "1",
                       "--check-hypotheses")
    assert status == 0


def test_partition_override(capsys):
    status, out, _ = run(capsys, "te", "--input", CHAIN, "--t", "1", "--n1", "2")
    assert status == 0 and parse_csv(out)[0] == ["t", "T"]


@pytest.mark.parametrize("argv", [
    ["te", "--input", "missing.json", "--t", "1"],
    ["te", "--input", SCALAR],
    ["te", "--input", SCALAR, "--s", "2", "--t", "1"],
    ["split-x", "--input", SCALAR, "--t", "1"],
    ["oracle-compare", "--input", SCALAR, "--t", "1", "--oracle-dt", "0.3"],
])
def test_failures_exit_1(capsys, argv):
    status, out, err = run(capsys, *argv)
    assert status == 1
    assert out == ""
    assert len(err.strip().splitlines()) == 1


def test_check_hypotheses_report():
    m, p = load_model(CHAIN)
    rows = check_hypotheses(m, p, 1.0)
    assert [r["name"] for r in rows] == ["H1", "H2", "H3", "H4", "H5"]
    assert all(r["passed"] for r in rows)
    m, p = load_model(SCALAR)
    assert [r["passed"] for r in check_hypotheses(m, p)][2:] == [None] * 3


def test_module_entry_point(tmp_path):
    out = tmp_path / "d.csv"
    proc = subprocess.run(
        [sys.executable, "-m", "gaussflow", "di", "--input", SCALAR, "--t", "1",
         "--output", str(out)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert out.read_text().startswith("t,R,D\n")
