import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from fbgrail import formats, pipeline
from fbgrail.analysis import fit_circle
from fbgrail.cli import main
from fbgrail.config import default_config


def write_cfg(path: Path, text: str = "") -> str:
    path.write_text("schema_version: 1\n" + text)
    return str(path)


def run_pipeline(out: Path, cfg_path: str, *extra) -> None:
    assert main(["simulate", "--config", cfg_path, "--out", str(out), *extra]) == 0
    for cmd in ("reconstruct", "shape", "plan"):
        assert main([cmd, "--out", str(out), *extra]) == 0


def tree_bytes(root: Path) -> dict[str, bytes]:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_default_simulate_counts(tmp_path):
    out = tmp_path / "run"
    assert main(["simulate", "--out", str(out)]) == 0
    logs = sorted((out / "logs").glob("batch_*.csv"))
    assert len(logs) == 8
    for log in logs:
        assert len(log.read_text().splitlines()) == 1 + 30 * 25 * 8
    assert (out / "config.yaml").is_file()


def test_single_batch(tmp_path):
    cfg = write_cfg(tmp_path / "c.yaml", "protocol: {batches: 1}\n")
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "r")]) == 0
    assert len(list((tmp_path / "r" / "logs").glob("*.csv"))) == 1


def test_corrupt_config_exit_code(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "c.yaml", "protocol: {frames_per_batch: -3}\n")
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "r")]) == 2
    assert "protocol.frames_per_batch" in capsys.readouterr().err


def test_missing_log_exit_code(tmp_path, capsys):
    out = tmp_path / "r"
    main(["simulate", "--config", write_cfg(tmp_path / "c.yaml", "protocol: {batches: 2}\n"), "--out", str(out)])
    assert main(["reconstruct", "--out", str(out), "--logs", str(out / "logs" / "batch_09.csv")]) == 3
    assert "batch_09.csv" in capsys.readouterr().err


def test_shape_before_reconstruct_is_data_error(tmp_path):
    out = tmp_path / "r"
    main(["simulate", "--out", str(out), "--config", write_cfg(tmp_path / "c.yaml", "protocol: {batches: 1}\n")])
    assert main(["shape", "--out", str(out)]) == 3


def test_zero_noise_plan_fits_groove_circle(tmp_path):
    cfg = write_cfg(
        tmp_path / "c.yaml",
        "noise: {wavelength_sigma_nm: 0.0, common_mode_sigma_nm: 0.0, strain_gain_sigma: 0.0}\n",
    )
    out = tmp_path / "r"
    run_pipeline(out, cfg)
    assert len(list((out / "profiles").glob("batch_*.csv"))) == 8
    assert (out / "profiles" / "rejections.csv").is_file()
    traj = formats.read_trajectory(out / "trajectory.csv")
    assert np.ptp(traj.positions[:, 2]) == 0.0
    _, r, resid = fit_circle(traj.positions[:, :2])
    assert abs(r - 110.0) <= 1e-6 and resid <= 1e-6
    assert main(["scan-sim", "--out", str(out)]) == 0
    summary = formats.read_scan_summary(out / "scan" / "scan_report.txt")
    assert summary["detach_index"] == "none"


def test_flat_scan_writes_separate_report(tmp_path):
    out = tmp_path / "r"
    run_pipeline(out, write_cfg(tmp_path / "c.yaml", "scan: {detach_threshold_mm: 1.85}\n"))
    assert main(["scan-sim", "--out", str(out), "--assume-flat"]) == 0
    summary = formats.read_scan_summary(out / "scan_flat" / "scan_report.txt")
    assert abs(float(summary["contact_length_mm"]) - 20.0) <= 1.0


def test_end_to_end_byte_reproducible(tmp_path):
    cfg = write_cfg(tmp_path / "c.yaml", "seed: 11\n")
    trees = []
    for name, jobs in (("a", "1"), ("b", "4")):
        out = tmp_path / name
        run_pipeline(out, cfg, "--jobs", jobs)
        assert main(["report", "--runs", str(out), "--out", str(out / "report")]) == 0
        trees.append(tree_bytes(out))
    assert trees[0] == trees[1]
    assert "report/report.md" in trees[0]


def test_seed_changes_output(tmp_path):
    cfg = write_cfg(tmp_path / "c.yaml", "protocol: {batches: 1}\n")
    main(["simulate", "--config", cfg, "--out", str(tmp_path / "a"), "--seed", "1"])
    main(["simulate", "--config", cfg, "--out", str(tmp_path / "b"), "--seed", "2"])
    a = (tmp_path / "a" / "logs" / "batch_01.csv").read_bytes()
    b = (tmp_path / "b" / "logs" / "batch_01.csv").read_bytes()
    assert a != b


def test_defaults_round_trip(tmp_path, capsys):
    assert main(["defaults"]) == 0
    text = capsys.readouterr().out
    path = tmp_path / "d.yaml"
    path.write_text(text)
    out = tmp_path / "r"
    assert main(["simulate", "--config", str(path), "--out", str(out), "--seed", "0"]) == 0
    assert (out / "config.yaml").read_text() == text
    assert pipeline.run_config(out) == default_config()


def test_fit_modulus_shipped_curve(capsys):
    assert main(["fit-modulus"]) == 0
    assert "E = 9.99 MPa" in capsys.readouterr().out


def test_fit_modulus_unknown_material():
    assert main(["fit-modulus", "--material", "unobtainium"]) == 3


def test_report_grating_range(tmp_path):
    out = tmp_path / "r"
    run_pipeline(out, write_cfg(tmp_path / "c.yaml", "protocol: {batches: 2}\n"))
    assert main(["report", "--runs", str(out), "--out", str(tmp_path / "rep"), "--grating-range", "2", "5"]) == 0
    assert (tmp_path / "rep" / "tables" / "gratings_2_5.csv").is_file()
    assert "SYNTHETIC" in (tmp_path / "rep" / "provenance.txt").read_text()


def test_follow_streams_all_poses(tmp_path):
    out = tmp_path / "r"
    run_pipeline(out, write_cfg(tmp_path / "c.yaml", "protocol: {batches: 1}\n"))
    traj = formats.read_trajectory(out / "trajectory.csv")
    ticks = []
    n = pipeline.follow(traj, out / "stream.csv", 50.0, sleep=ticks.append)
    assert n == len(traj) and ticks == [0.02] * n
    assert (out / "stream.csv").read_bytes() == (out / "trajectory.csv").read_bytes()


def test_kidney_and_conformity_runs(tmp_path):
    cfg = write_cfg(tmp_path / "c.yaml", "phantom: {kind: kidney_surface, radius_index: null}\nprotocol: {batches: 1}\n")
    out = tmp_path / "k"
    assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
    assert main(["reconstruct", "--out", str(out)]) == 0
    cfg = write_cfg(
        tmp_path / "s.yaml",
        "phantom: {kind: soft_block, radii_mm: [30, 110], material: Eco-Flex 00-20, radius_index: 0}\n"
        "conformity: {enabled: true}\nprotocol: {batches: 2}\n",
    )
    out = tmp_path / "s"
    run_pipeline(out, cfg)
    assert main(["scan-sim", "--out", str(out)]) == 0
    assert "SYNTHETIC" in (out / "scan" / "scan_report.txt").read_text()


def test_console_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "fbgrail.cli", "defaults"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.startswith("schema_version: 1")


def test_bad_jobs():
    assert main(["simulate", "--jobs", "0"]) == 2


@pytest.mark.parametrize("cmd", ["reconstruct", "shape", "plan", "scan-sim"])
def test_commands_need_a_config(tmp_path, cmd):
    assert main([cmd, "--out", str(tmp_path / "empty")]) == 2
