import json

import numpy as np
import pytest

from toepsense.cli import main, parse_k_grid
from toepsense.pgm import ImageGray, write_pgm


def test_parse_k_grid():
    assert parse_k_grid("60,80,100") == [60, 80, 100]
    assert parse_k_grid("60:120:20") == [60, 80, 100, 120]


def test_sweep_writes_artifacts(tmp_path, capsys):
    out = tmp_path / "run"
    rc = main([
        "sweep", "--n", "32", "--m", "2", "--k-grid", "12,16", "--trials", "2",
        "--kinds", "sym_toeplitz", "--seed", "5", "--out", str(out),
    ])
    assert rc == 0
    for name in ("results.csv", "results.json", "chart.svg", "run-config.json", "timings.csv"):
        assert (out / name).exists()
    cfg = json.loads((out / "run-config.json").read_text())
    assert cfg["master_seed"] == 5
    assert cfg["k_grid"] == [12, 16]
    assert "success_rate" in capsys.readouterr().out


def test_print_config_does_not_run(tmp_path, capsys):
    out = tmp_path / "never"
    rc = main([
        "sweep", "--n", "32", "--m", "2", "--k-grid", "12", "--trials", "1",
        "--out", str(out), "--print-config",
    ])
    assert rc == 0
    assert not out.exists()
    doc = json.loads(capsys.readouterr().out)
    assert doc["experiment"] == "sweep"
    assert doc["k_grid"] == [12]


def test_config_file_with_flag_override(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({
        "n": 32, "m": 2, "k_grid": [12], "trials": 1,
        "matrix_kinds": ["sym_toeplitz"], "master_seed": 1,
    }))
    out = tmp_path / "out"
    rc = main(["sweep", "--config", str(cfg_path), "--seed", "9", "--out", str(out)])
    assert rc == 0
    resolved = json.loads((out / "run-config.json").read_text())
    assert resolved["master_seed"] == 9  # flag wins
    assert resolved["n"] == 32


def test_image_subcommand_with_file(tmp_path):
    rng = np.random.default_rng(1)
    pixels = np.zeros((8, 8))
    pixels[rng.integers(0, 8, 5), rng.integers(0, 8, 5)] = 0.7
    src = tmp_path / "img.pgm"
    write_pgm(ImageGray(width=8, height=8, pixels=pixels), src)
    out = tmp_path / "img_out"
    rc = main([
        "image", "--image", str(src), "--n", "64", "--m", "5",
        "--k-grid", "50", "--kinds", "sym_toeplitz", "--seed", "2",
        "--out", str(out), "--trials", "1",
    ])
    assert rc == 0
    assert (out / "recon_sym_toeplitz_k50.pgm").exists()
    rows = json.loads((out / "results.json").read_text())["rows"]
    assert rows[0]["mse"] <= 1e-3


def test_rip_audit_subcommand(tmp_path):
    out = tmp_path / "audit"
    rc = main(["rip-audit", "--seed", "3", "--out", str(out)])
    assert rc == 0
    doc = json.loads((out / "results.json").read_text())
    assert doc["q"] == 16


def test_gen_matrix_subcommand(tmp_path):
    out = tmp_path / "gen"
    rc = main([
        "gen-matrix", "--kind", "toeplitz", "--k", "3", "--n", "6",
        "--dist", "rademacher", "--seed", "4", "--out", str(out),
    ])
    assert rc == 0
    rows = (out / "matrix.csv").read_text().strip().split("\n")
    assert len(rows) == 3 and len(rows[0].split(",")) == 6
    doc = json.loads((out / "operator.json").read_text())
    assert doc["kind"] == "toeplitz"


def test_cli_reports_service_errors(tmp_path):
    with pytest.raises(SystemExit, match="400"):
        main([
            "sweep", "--n", "8", "--m", "2", "--k-grid", "12,4",  # unsorted grid
            "--trials", "1", "--out", str(tmp_path / "x"),
        ])


def test_sysid_and_pwc_subcommands(tmp_path):
    rc = main([
        "sysid", "--n", "48", "--m", "2", "--k-grid", "28", "--trials", "2",
        "--seed", "6", "--out", str(tmp_path / "sysid"),
    ])
    assert rc == 0
    rc = main([
        "pwc", "--n", "48", "--m", "2", "--k-grid", "32", "--trials", "2",
        "--seed", "7", "--out", str(tmp_path / "pwc"),
    ])
    assert rc == 0
    rows = json.loads((tmp_path / "pwc" / "results.json").read_text())["rows"]
    assert rows[0]["success_rate"] >= 0.5
