"""Interface en ligne de commande : artefacts, codes de sortie, unités."""

import json

import numpy as np
import pandas as pd
import pytest
from scipy.constants import hbar

from core import main as cli
from core.errors import ConvergenceFailure


def run(tmp_path, *args):
    return cli.main([*args, "--out", str(tmp_path), "--no-progress"])


def test_geometry_straight_tube(tmp_path):
    assert run(tmp_path, "geometry", "--kappa", "0", "--grid", "8x4") == cli.EXIT_OK
    frame = pd.read_csv(tmp_path / "geometry.csv")
    assert list(frame.columns) == ["s", "phi", "x", "y", "z", "h", "kappa1", "kappa2", "M", "K"]
    assert len(frame) == 32
    assert np.all(frame["h"] == 1.0)
    np.testing.assert_allclose(frame["kappa1"], 10.0)


def test_potential_on_cylinder(tmp_path):
    assert run(tmp_path, "potential", "--kappa", "0", "--rho0", "1", "--grid", "8x8") == cli.EXIT_OK
    frame = pd.read_csv(tmp_path / "potential.csv")
    np.testing.assert_allclose(frame["v_eff"], -0.25)
    np.testing.assert_allclose(frame["v_kin"], 0.0)


def test_potential_in_physical_units(tmp_path):
    args = ("potential", "--kappa", "0", "--rho0", "1", "--grid", "4x4", "--units", "physical:1e-30")
    assert run(tmp_path, *args) == cli.EXIT_OK
    frame = pd.read_csv(tmp_path / "potential.csv")
    np.testing.assert_allclose(frame["v_eff"], -0.25 * hbar ** 2 / 2e-30, rtol=1e-12)


def test_bands(tmp_path):
    args = ("bands", "--grid", "16x16", "--kpath", "0:0.5:5", "--harmonics", "5")
    assert run(tmp_path / "a", *args) == cli.EXIT_OK
    frame = pd.read_csv(tmp_path / "a" / "bands.csv")
    assert list(frame.columns) == ["k_s", "n", "E_twoband_1", "E_twoband_2", "E_oracle_pert_1",
                                   "E_oracle_pert_2", "E_oracle_full_1", "E_oracle_full_2"]
    assert len(frame) == 5
    assert np.all(frame["E_twoband_1"] <= frame["E_twoband_2"])
    summary = json.loads((tmp_path / "a" / "summary.json").read_text(encoding="utf-8"))
    assert summary["a"] == pytest.approx(25.25)
    assert summary["zone_boundary"] == {"k_s": -0.5, "n": 0.5}
    assert summary["gap"]["two_band"] == pytest.approx(0.0375)
    assert summary["gap"]["oracle_perturbed"] > 0
    assert summary["gap"]["oracle_full"] >= 0
    assert summary["agreement"]["two_band_vs_oracle_perturbed_rel"] <= 0.10
    assert summary["u_squared_negative"] is False
    np.testing.assert_allclose(summary["effective_mass"]["tensor"], np.eye(2), atol=1e-2)
    assert summary["effective_mass"]["step"] == pytest.approx(1e-4)
    for band in (1, 2):
        np.testing.assert_allclose(frame[f"E_twoband_{band}"], frame[f"E_oracle_pert_{band}"], atol=1e-3)

    assert run(tmp_path / "b", *args) == cli.EXIT_OK
    assert (tmp_path / "a" / "bands.csv").read_bytes() == (tmp_path / "b" / "bands.csv").read_bytes()


def test_bands_without_curvature(tmp_path):
    args = ("bands", "--kappa", "0", "--grid", "8x8", "--kpath", "0:0.5:3", "--harmonics", "4", "--fd-step", "1e-3")
    assert run(tmp_path, *args) == cli.EXIT_OK
    frame = pd.read_csv(tmp_path / "bands.csv")
    np.testing.assert_allclose(frame["E_twoband_1"], frame["k_s"] ** 2 - 25.0, atol=1e-12)
    summary = json.loads((tmp_path / "summary.json").read_text(encoding="utf-8"))
    assert summary["gap"]["two_band"] == 0.0
    assert summary["agreement"]["full_vs_perturbed_over_eps2"] is None
    assert summary["effective_mass"]["step"] == pytest.approx(1e-3)
    np.testing.assert_allclose(summary["effective_mass"]["tensor"], np.eye(2), atol=1e-6)


def test_gap_scan(tmp_path):
    assert run(tmp_path, "gap-scan", "--grid", "16x16", "--harmonics", "5") == cli.EXIT_OK
    frame = pd.read_csv(tmp_path / "gapscan.csv")
    assert len(frame) == 5
    np.testing.assert_allclose(frame["ratio_to_eps_kappa2_over_4"], 1.5, rtol=1e-9)
    assert np.all(np.abs(frame["gap_oracle"] / frame["gap_twoband"] - 1) <= 0.10)
    report = json.loads((tmp_path / "gapscan.json").read_text(encoding="utf-8"))
    assert report["fit"]["r_squared"] >= 0.999
    assert report["fit"]["slope"] == pytest.approx(1.5, rel=1e-9)
    assert report["model"] == "published"
    assert len(report["oracle_full_gaps"]) == 5


def test_gap_scan_single_straight_tube(tmp_path):
    assert run(tmp_path, "gap-scan", "--eps-sweep", "0", "--grid", "8x8", "--harmonics", "4") == cli.EXIT_OK
    frame = pd.read_csv(tmp_path / "gapscan.csv")
    assert np.isnan(frame["ratio_to_eps_kappa2_over_4"][0])
    report = json.loads((tmp_path / "gapscan.json").read_text(encoding="utf-8"))
    assert report["fit"] is None


def test_cylinder_check(tmp_path, capsys):
    assert run(tmp_path, "cylinder-check", "--grid", "16x32") == cli.EXIT_OK
    assert "max relative error" in capsys.readouterr().out
    report = json.loads((tmp_path / "cylinder.json").read_text(encoding="utf-8"))
    assert report["passed"] is True
    assert report["max_relative_error"] <= 1e-6


def test_verify_defaults_pass(tmp_path, capsys):
    assert run(tmp_path, "verify") == cli.EXIT_OK
    assert "verify: PASS" in capsys.readouterr().out
    report = json.loads((tmp_path / "verify.json").read_text(encoding="utf-8"))
    names = {check["name"] for check in report["checks"]}
    assert {"operator_identity", "hermiticity", "cylinder_limit", "grid_convergence"} <= names
    assert all(check["passed"] for check in report["checks"])


def test_verify_detects_kinetic_offset(tmp_path, capsys):
    assert run(tmp_path, "verify", "--grid", "32x32", "--vkin-offset", "1e-3") == cli.EXIT_VERIFY_FAILED
    assert "verify: FAIL" in capsys.readouterr().out
    report = json.loads((tmp_path / "verify.json").read_text(encoding="utf-8"))
    identity = next(check for check in report["checks"] if check["name"] == "operator_identity")
    assert identity["status"] == "fail"


def test_verify_with_weak_torsion(tmp_path):
    assert run(tmp_path, "verify", "--tau", "0.5", "--grid", "32x32") == cli.EXIT_OK
    report = json.loads((tmp_path / "verify.json").read_text(encoding="utf-8"))
    inequality = next(check for check in report["checks"] if check["name"] == "potential_inequality")
    assert inequality["status"] == "pass"


def test_verify_thick_tube_reports_relaxed_checks(tmp_path):
    run(tmp_path, "verify", "--rho0", "0.99", "--grid", "16x16")
    report = json.loads((tmp_path / "verify.json").read_text(encoding="utf-8"))
    assert report["grid"] == "16x16"
    checks = {check["name"]: check for check in report["checks"]}
    for name in ("operator_identity", "grid_convergence"):
        assert checks[name]["status"] in ("pass", "relaxed")
        assert checks[name]["passed"] is True
        assert checks[name]["grid"]


def test_verify_uses_configured_resonance_threshold(tmp_path):
    assert run(tmp_path, "verify", "--grid", "16x16", "--resonance-delta", "200") == cli.EXIT_VERIFY_FAILED
    report = json.loads((tmp_path / "verify.json").read_text(encoding="utf-8"))
    check = next(check for check in report["checks"] if check["name"] == "first_order_consistency")
    assert check["status"] == "error"


@pytest.mark.parametrize("args", [
    ("geometry", "--grid", "64"),
    ("geometry", "--period-s", "3"),
    ("geometry", "--rho0", "2"),
    ("geometry", "--kappa", "abc"),
    ("bands", "--tau", "0"),
])
def test_config_errors(tmp_path, args):
    assert run(tmp_path, *args) == cli.EXIT_CONFIG


def test_solver_failure(tmp_path, monkeypatch):
    def failing(**kwargs):
        raise ConvergenceFailure("résidu trop grand", {"dimension": 4})

    monkeypatch.setattr(cli, "cylinder_check", failing)
    assert run(tmp_path, "cylinder-check") == cli.EXIT_SOLVER
