import json
import math

import numpy as np
import pytest

from causticq.cli import EXIT_CONFIG, EXIT_OK, main
from causticq.io import read_csv

SEP_CFG = {"model": {"omega_x": 1.1, "omega_y": 1.0, "lambda": 0.0}}


@pytest.fixture
def sep_config(tmp_path):
    p = tmp_path / "sep.json"
    p.write_text(json.dumps(SEP_CFG))
    return p


def test_missing_config_leaves_no_output(tmp_path):
    out = tmp_path / "out"
    code = main(["trace", "--config", str(tmp_path / "nope.json"), "--energy", "5", "--out", str(out)])
    assert code == EXIT_CONFIG
    assert not out.exists()


@pytest.mark.parametrize("cfg", [{"colour": 1}, {"model": {"omega_x": -1}},
                                 {"options": {"tol": -1.0}}, {"arc": 7}])
def test_bad_config_rejected(tmp_path, cfg):
    p = tmp_path / "c.json"
    p.write_text(json.dumps(cfg))
    out = tmp_path / "out"
    assert main(["oracle", "--config", str(p), "--out", str(out)]) == EXIT_CONFIG
    assert not out.exists()


def test_missing_required_flag(tmp_path):
    assert main(["spectrum", "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert main(["arc", "--state", "2", "--out", str(tmp_path / "o")]) == EXIT_CONFIG


def test_action_surface_refuses_coupling(tmp_path):
    out = tmp_path / "o"
    assert main(["action-surface", "--state", "2,2", "--out", str(out)]) == EXIT_CONFIG
    assert not out.exists()


def test_action_surface_separable(tmp_path, sep_config):
    out = tmp_path / "o"
    assert main(["action-surface", "--config", str(sep_config), "--state", "2,2",
                 "--out", str(out)]) == EXIT_OK
    hx, X = read_csv(out / "surface_X.csv")
    hw, W = read_csv(out / "surface_W.csv")
    assert hx == ["x", "y", "X"] and hw == ["x", "y", "W"]
    assert np.isnan(X[0, 2])                    # corner outside the rectangle
    inside = ~np.isnan(X[:, 2])
    assert np.array_equal(inside, ~np.isnan(W[:, 2]))


def test_trace_separable_rectangle(tmp_path, sep_config):
    out = tmp_path / "o"
    assert main(["trace", "--config", str(sep_config), "--energy", "3.15", "--state", "1,1",
                 "--out", str(out)]) == EXIT_OK
    _, pts = read_csv(out / "caustic_points.csv")
    a, b = math.sqrt(3.3) / 1.1, math.sqrt(3.0)
    d = np.minimum(np.abs(np.abs(pts[:, 0]) - a), np.abs(np.abs(pts[:, 1]) - b))
    assert d.max() < 1e-3
    doc = json.loads((out / "caustic.json").read_text())
    assert len(doc["caustic"]["vertices"]) == 4
    assert (out / "trajectory.csv").exists() and (out / "caustic_arcs.csv").exists()


def test_arc_separable_columns(tmp_path, sep_config):
    out = tmp_path / "o"
    assert main(["arc", "--config", str(sep_config), "--state", "1,1", "--arc", "2",
                 "--grid", "600", "--out", str(out)]) == EXIT_OK
    head, d = read_csv(out / "arc2.csv")
    assert head == ["parameter", "U_k", "g", "psi", "psi_oracle", "X", "Y"]
    assert d.shape[0] == 600
    c = dict(zip(head, d.T))
    assert np.all(c["g"] == 1.0)
    # along the top side y = b the potential is kx x^2/2 + Ey (arc fitted from the cloud)
    np.testing.assert_allclose(c["U_k"], 0.5 * 1.21 * c["parameter"] ** 2 + 1.5, atol=1e-6)


def test_spectrum_separable_and_deterministic(tmp_path, sep_config):
    runs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["spectrum", "--config", str(sep_config), "--e-max", "3.3",
                     "--out", str(out)]) == EXIT_OK
        runs.append(out)
    for f in ("spectrum.json", "comparison.csv"):
        assert (runs[0] / f).read_bytes() == (runs[1] / f).read_bytes()
    head, d = read_csv(runs[0] / "comparison.csv")
    assert d.shape[0] == 6
    assert np.all(d[:, head.index("abs_dE")] <= 1e-8)
    doc = json.loads((runs[0] / "spectrum.json").read_text())
    assert doc["config"]["e_max"] == 3.3
    assert all("ebk_residuals" in s for s in doc["states"])


def test_oracle_command(tmp_path):
    out = tmp_path / "o"
    assert main(["oracle", "--e-max", "5.4", "--out", str(out)]) == EXIT_OK
    doc = json.loads((out / "oracle.json").read_text())
    assert len(doc["eigenvalues"]) == 15
    assert doc["labels"][12] == [2, 2]


def test_hbar_override(tmp_path):
    out = tmp_path / "o"
    assert main(["oracle", "--hbar", "0.5", "--e-max", "1.0", "--out", str(out)]) == EXIT_OK
    doc = json.loads((out / "oracle.json").read_text())
    assert doc["model"]["hbar"] == 0.5
    assert doc["eigenvalues"][0] == pytest.approx(0.5 * 1.05, abs=1e-3)
