import csv
import io
import json

import numpy as np
import pytest

from kdfmise.cli import main, parse_grid
from kdfmise.mixture import mw


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def data_file(tmp_path):
    x = mw(6).sample(80, seed=1)
    path = tmp_path / "x.csv"
    path.write_text("x\n" + "\n".join(repr(float(v)) for v in x) + "\n")
    return str(path)


def test_parse_grid():
    assert np.allclose(parse_grid("0.5"), [0.5])
    assert np.allclose(parse_grid("-1:1:3"), [-1, 0, 1])


def test_catalog(capsys):
    code, out, _ = run(capsys, "catalog")
    assert code == 0 and out.split()[:2] == ["mw1", "mw2"]
    code, out, _ = run(capsys, "catalog", "--show", "mw6")
    info = json.loads(out)
    assert info["weights"] == [0.5, 0.5]
    code, out, _ = run(capsys, "catalog", "--kernel", "2", "--grid=-1:1:3")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert float(rows[1]["cdf"]) == pytest.approx(0.5)


def test_mise(capsys):
    code, out, _ = run(capsys, "mise", "--mixture", "mw1", "--n", "10", "--r", "1", "--h", "0:1:2")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and len(rows) == 2
    assert float(rows[1]["mise"]) == pytest.approx(0.0432719513, abs=1e-10)
    assert float(rows[0]["relative_mise"]) == pytest.approx(0.0, abs=1e-12)


def test_bandwidth(capsys, data_file):
    code, out, _ = run(capsys, "bandwidth", "--mixture", "mw1", "--n", "50", "--rmax", "8")
    res = json.loads(out)
    assert res["method"] == "exact_oracle" and res["r"] == "3"
    code, out, _ = run(capsys, "bandwidth", "--data", data_file, "--method", "cv")
    assert json.loads(out)["predicted_mise"] is None
    code, out, _ = run(capsys, "bandwidth", "--data", data_file, "--method", "plugin-bic",
                       "--mmax", "3", "--restarts", "2")
    assert json.loads(out)["method"] == "plugin_bic"
    code, out, _ = run(capsys, "bandwidth", "--mixture", "mw1", "--n", "100", "--method", "nrr",
                       "--r", "inf")
    assert json.loads(out)["h"] == pytest.approx(0.4654880, abs=1e-7)
    code, _, err = run(capsys, "bandwidth", "--method", "cv", "--mixture", "mw1", "--n", "10")
    assert code == 2 and "needs --data" in err


def test_fit_and_estimate(capsys, data_file):
    code, out, _ = run(capsys, "fit", "--data", data_file, "--mmax", "3", "--restarts", "2")
    fit = json.loads(out)
    assert code == 0 and 1 <= fit["m"] <= 3
    code, out, _ = run(capsys, "estimate", "--data", data_file, "--h", "0.3", "--r", "4",
                       "--grid=-3:3:7", "--rearrange")
    vals = [float(r["F"]) for r in csv.DictReader(io.StringIO(out))]
    assert len(vals) == 7 and vals == sorted(vals)


def test_simulate(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"distribution": "mw1", "n": 30, "replications": 3,
                               "methods": ["edf", "cv"], "seed": 2}))
    out = tmp_path / "out"
    code, _, _ = run(capsys, "simulate", "--config", str(cfg), "--out", str(out))
    assert code == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 2 and len(manifest["config_sha256"]) == 64
    assert (out / "records.csv").read_text().count("\n") == 4
    assert "cv,edf" in (out / "summary.csv").read_text()


def test_figure(capsys, tmp_path):
    path = tmp_path / "fig.csv"
    # a log-spaced grid rounded to integers; dense enough here to hit every n
    code, _, _ = run(capsys, "figure", "--mixture", "mw1", "--nmin", "2", "--nmax", "6",
                     "--points", "30", "--rmax", "4", "--out", str(path))
    rows = {int(r["n"]): r for r in csv.DictReader(io.StringIO(path.read_text()))}
    assert code == 0 and sorted(rows) == [2, 3, 4, 5, 6]
    assert rows[3]["r_star"] == "1" and rows[4]["r_star"] == "2"
