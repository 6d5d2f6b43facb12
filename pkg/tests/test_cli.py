import json

import numpy as np
import pytest

from sg3d.cli import main
from sg3d.volio import read_volume


def run_cli(argv, capsys):
    code = 0
    try:
        main(argv)
    except SystemExit as e:
        code = e.code or 0
    out, err = capsys.readouterr()
    return code, out, err


TINY_CONFIG = {
    "iterations": 6, "collect": 2, "sample_every": 1, "burn_in": 4, "seed": 5,
    "cover": {"batch_size": 4, "coverage": 1, "budget": 1},
    "rho_d": {"start": 1.0, "end": 0.5, "steps": 4},
    "rho_tv": {"start": 1.0, "end": 0.5, "steps": 4},
    "prior": {"kind": "gaussian", "mean": 0.4, "precision": 4.0},
    "forward_factor": 2, "sigma": 0.05,
}


@pytest.fixture
def workspace(tmp_path, capsys):
    code, _, err = run_cli(["phantom", "--out", str(tmp_path / "truth.raw"),
                            "--dims", "4,16,16", "--kind", "layered",
                            "--seed", "3"], capsys)
    assert code == 0, err
    return tmp_path


class TestPipeline:
    def test_identity_degrade_then_metrics_inf(self, workspace, capsys):
        truth = workspace / "truth.raw"
        meas = workspace / "meas.raw"
        code, _, _ = run_cli(["degrade", "--in", str(truth), "--out", str(meas),
                              "--factor", "1", "--sigma", "0"], capsys)
        assert code == 0
        code, out, _ = run_cli(["metrics", "--truth", str(truth),
                                "--recon", str(meas)], capsys)
        assert code == 0
        assert json.loads(out)["psnr_db"] == "inf"

    def test_degrade_shapes(self, workspace, capsys):
        code, out, _ = run_cli(["degrade", "--in", str(workspace / "truth.raw"),
                                "--out", str(workspace / "m.raw"),
                                "--factor", "2", "--sigma", "0.05",
                                "--seed", "1"], capsys)
        assert code == 0
        assert json.loads(out)["dims"] == [4, 8, 8]

    def test_reconstruct_deterministic(self, workspace, capsys):
        cfg = workspace / "cfg.json"
        cfg.write_text(json.dumps(TINY_CONFIG))
        meas = workspace / "meas.raw"
        run_cli(["degrade", "--in", str(workspace / "truth.raw"), "--out",
                 str(meas), "--factor", "2", "--sigma", "0.05", "--seed", "1"],
                capsys)
        for d in ("r1", "r2"):
            code, out, err = run_cli(
                ["--quiet", "reconstruct", "--meas", str(meas), "--config",
                 str(cfg), "--out-dir", str(workspace / d)], capsys)
            assert code == 0, err
        a = read_volume(workspace / "r1" / "mean.raw")
        b = read_volume(workspace / "r2" / "mean.raw")
        assert a.data.tobytes() == b.data.tobytes()
        log = (workspace / "r1" / "progress.log").read_text().splitlines()
        assert len(log) == 6 and log[0].startswith("iter=0 rho_d=1 ")

    def test_reconstruct_resume_matches(self, workspace, capsys):
        meas = workspace / "meas.raw"
        run_cli(["degrade", "--in", str(workspace / "truth.raw"), "--out",
                 str(meas), "--factor", "2", "--sigma", "0.05", "--seed", "1"],
                capsys)
        cfg_full = dict(TINY_CONFIG)
        cfg_half = dict(TINY_CONFIG, iterations=3, collect=0, burn_in=3)
        (workspace / "full.json").write_text(json.dumps(cfg_full))
        (workspace / "half.json").write_text(json.dumps(cfg_half))
        run_cli(["--quiet", "reconstruct", "--meas", str(meas), "--config",
                 str(workspace / "full.json"), "--out-dir",
                 str(workspace / "full")], capsys)
        run_cli(["--quiet", "reconstruct", "--meas", str(meas), "--config",
                 str(workspace / "half.json"), "--out-dir",
                 str(workspace / "half")], capsys)
        code, out, err = run_cli(
            ["--quiet", "reconstruct", "--meas", str(meas), "--config",
             str(workspace / "full.json"), "--out-dir", str(workspace / "resumed"),
             "--resume", str(workspace / "half" / "checkpoint.npz")], capsys)
        assert code == 0, err
        a = read_volume(workspace / "full" / "mean.raw")
        b = read_volume(workspace / "resumed" / "mean.raw")
        assert a.data.tobytes() == b.data.tobytes()

    def test_baseline_and_schedule_preview(self, workspace, capsys):
        meas = workspace / "meas.raw"
        run_cli(["degrade", "--in", str(workspace / "truth.raw"), "--out",
                 str(meas), "--factor", "2"], capsys)
        code, out, _ = run_cli(["baseline", "--method", "bicubic", "--in",
                                str(meas), "--out", str(workspace / "up.raw"),
                                "--factor", "2"], capsys)
        assert code == 0 and json.loads(out)["dims"] == [4, 16, 16]
        code, out, _ = run_cli(["schedule-preview", "--depth", "16", "--batch",
                                "4", "--budget", "5", "--seed", "2"], capsys)
        assert code == 0 and "multiplicity" in out


class TestErrors:
    def test_missing_file_is_data_error(self, tmp_path, capsys):
        code, _, err = run_cli(["metrics", "--truth", str(tmp_path / "no.raw"),
                                "--recon", str(tmp_path / "no.raw")], capsys)
        assert code == 3
        assert err.startswith("error: type=") and "\n" not in err.strip("\n")

    def test_usage_error_is_exit_2(self, capsys):
        code, _, _ = run_cli(["degrade", "--in", "x"], capsys)  # missing --out
        assert code == 2

    def test_bad_prior_flag(self, tmp_path, capsys):
        np.save(tmp_path / "dummy.npy", np.zeros(1))
        code, _, err = run_cli(["reconstruct", "--meas", "whatever",
                                "--out-dir", str(tmp_path), "--prior",
                                "localhost:1"], capsys)
        assert code == 2

    def test_infeasible_cover_is_data_error(self, workspace, capsys):
        cfg = dict(TINY_CONFIG, cover={"batch_size": 4, "coverage": 2, "budget": 1})
        (workspace / "bad.json").write_text(json.dumps(cfg))
        meas = workspace / "meas.raw"
        run_cli(["degrade", "--in", str(workspace / "truth.raw"), "--out",
                 str(meas), "--factor", "2"], capsys)
        code, _, err = run_cli(["--quiet", "reconstruct", "--meas", str(meas),
                                "--config", str(workspace / "bad.json"),
                                "--out-dir", str(workspace / "x")], capsys)
        assert code == 3
