import csv
import json

import pytest

from nlsflux.cli import main

SMALL = ["--set", "m=16", "--set", "t_burn=2", "--set", "t_avg=4", "--set", "n_batches=10",
         "--set", "dt=0.02"]


def _rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_verify_default_passes(tmp_path, capsys):
    assert main(["verify", "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "verify_report.json").read_text())
    assert len(report["checks"]) >= 20 and report["passed"]


def test_verify_without_padding_fails(tmp_path, capsys):
    assert main(["verify", "--out", str(tmp_path), "--set", "padding=1"]) == 1
    out = capsys.readouterr().out
    assert "FAIL  dealiased_cubic_vs_convolution" in out


def test_verify_literal_flux_fails(tmp_path, capsys):
    assert main(["verify", "--out", str(tmp_path), "--set", "flux_form=literal"]) == 1
    assert "FAIL  flux_derivative_h" in capsys.readouterr().out


def test_config_error_exit_code(tmp_path, capsys):
    assert main(["simulate", "--out", str(tmp_path), "--set", "nu=-1"]) == 2
    assert main(["simulate", "--out", str(tmp_path), "--set", "bogus"]) == 2
    assert main(["simulate", "--out", str(tmp_path), "--config", str(tmp_path / "missing.ini")]) == 2


def test_stability_guard_exit_code(tmp_path, capsys):
    args = ["simulate", "--out", str(tmp_path), "--set", "m=16", "--set", "dt=0.5",
            "--set", "sigma=4", "--set", "t_burn=10", "--set", "t_avg=10", "--set", "n_batches=10"]
    assert main(args) == 1
    assert "stability guard" in capsys.readouterr().err


def test_simulate_is_byte_identical(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    codes = [main(["simulate", "--out", str(d), "--seed", "3"] + SMALL) for d in (a, b)]
    assert codes[0] == codes[1] and codes[0] in (0, 1)
    names = sorted(p.name for p in a.iterdir())
    assert {"flux_curve.csv", "balance.csv", "manifest.json", "config.resolved",
            "spectrum.csv", "indicators.csv", "checkpoint.json"} <= set(names)
    for n in names:
        assert (a / n).read_bytes() == (b / n).read_bytes(), n
    rows = _rows(a / "balance.csv")
    assert {r["identity"] for r in rows} >= {"WABal", "Hbal", "WAFB", "HFluxBal"}


def test_spectrum_resumes_from_checkpoint(tmp_path, capsys):
    a = tmp_path / "a"
    main(["simulate", "--out", str(a)] + SMALL)
    out = tmp_path / "s"
    assert main(["spectrum", "--out", str(out), "--checkpoint", str(a / "checkpoint.json")] + SMALL) == 0
    assert (out / "spectrum.csv").exists() and (out / "spectrum.png").exists()


def test_sweep_drive_ratio_decreases(tmp_path, capsys):
    nus = ",".join(repr(0.2 * 2.0**-k) for k in range(3))
    sigmas = ",".join(repr(0.5 * 2.0 ** (-k / 4)) for k in range(3))
    code = main(["sweep", "--out", str(tmp_path), "--set", f"sweep_nu={nus}",
                 "--set", f"sweep_sigma={sigmas}", "--set", "sweep_workers=1"] + SMALL)
    assert code == 0
    rows = _rows(tmp_path / "regime_table.csv")
    assert [r["status"] for r in rows] == ["ok"] * 3
    ratio = [float(r["nu_over_sigma2"]) for r in rows]
    assert ratio[0] > ratio[1] > ratio[2]
    trend = json.loads((tmp_path / "trend_report.json").read_text())
    assert trend["nu_over_sigma2"] == "decreasing"
