import numpy as np
import pytest

from qospinn.cli import main
from qospinn.cliparse import write_config


def tiny_solve_config(tmp_path, problem="advection_diffusion_1d", seed=0):
    path = tmp_path / "exp.ini"
    write_config(path, {
        "experiment": {
            "problem": problem,
            "architecture": "2 x [4, 4, 4, 2]",
            "seed": seed,
            "out_dir": str(tmp_path / "out"),
        },
        "trainer": {
            "lr": 5e-3, "epochs": 30, "collocation": 16,
            "log_every": 10, "eval_every": 0,
        },
    })
    return path


def strip_timestamp(path):
    lines = path.read_text().split("\n")
    return "\n".join(l for l in lines if not l.startswith("# created"))


class TestSolve:
    def test_writes_artifacts(self, tmp_path):
        cfg = tiny_solve_config(tmp_path)
        assert main(["solve", "--config", str(cfg), "--quiet"]) == 0
        out = tmp_path / "out"
        for name in ("history.csv", "field.csv", "error.csv", "checkpoint.npz",
                     "field_maps.png", "field_slices.png"):
            assert (out / name).exists(), name

    def test_reproducible_outputs(self, tmp_path):
        cfg = tiny_solve_config(tmp_path)
        assert main(["solve", "--config", str(cfg), "--quiet",
                     "--out", str(tmp_path / "a")]) == 0
        assert main(["solve", "--config", str(cfg), "--quiet",
                     "--out", str(tmp_path / "b")]) == 0
        for name in ("field.csv", "error.csv", "history.csv"):
            a = strip_timestamp(tmp_path / "a" / name)
            b = strip_timestamp(tmp_path / "b" / name)
            assert a == b, name

    def test_epoch_override(self, tmp_path):
        cfg = tiny_solve_config(tmp_path)
        assert main(["solve", "--config", str(cfg), "--quiet", "--epochs", "10",
                     "--out", str(tmp_path / "c")]) == 0
        hist = (tmp_path / "c" / "history.csv").read_text().strip().split("\n")
        last = hist[-1].split(",")[0]
        assert int(last) == 9

    def test_unknown_problem_is_validation_error(self, tmp_path):
        path = tmp_path / "bad.ini"
        write_config(path, {"experiment": {"problem": "not_a_problem"}})
        assert main(["solve", "--config", str(path), "--quiet"]) == 1

    def test_malformed_architecture_is_validation_error(self, tmp_path):
        path = tmp_path / "bad.ini"
        write_config(path, {"experiment": {"problem": "advection_diffusion_1d",
                                           "architecture": "2 y [4]"},
                            "trainer": {"epochs": 2}})
        assert main(["solve", "--config", str(path), "--quiet"]) == 1

    def test_missing_config_file(self, tmp_path):
        assert main(["solve", "--config", str(tmp_path / "none.ini"), "--quiet"]) == 1


class TestInverse:
    def test_writes_beta_trace(self, tmp_path):
        path = tmp_path / "inv.ini"
        write_config(path, {
            "experiment": {
                "problem": "sine_gordon_inverse",
                "architecture": "2 x [4, 4, 4, 2]",
                "out_dir": str(tmp_path / "out"),
            },
            "trainer": {"lr": 5e-3, "epochs": 20, "collocation": 12,
                        "log_every": 10, "eval_every": 0},
        })
        assert main(["inverse", "--config", str(path), "--quiet"]) == 0
        trace = (tmp_path / "out" / "beta_trace.csv").read_text().strip().split("\n")
        assert trace[1].split(",") == ["epoch", "beta_hat"]
        assert len(trace) == 2 + 20  # timestamp + header + one row per epoch

    def test_forward_problem_rejected(self, tmp_path):
        cfg = tiny_solve_config(tmp_path)
        assert main(["inverse", "--config", str(cfg), "--quiet"]) == 1


class TestUq:
    def test_uq_artifacts(self, tmp_path):
        path = tmp_path / "uq.ini"
        write_config(path, {
            "experiment": {"architecture": "2x[5, 5] + [5, 5]",
                           "out_dir": str(tmp_path / "out"), "seed": 0},
            "uq": {"epochs": 20, "collocation_pairs": 16, "n_ic": 6, "n_bc": 4,
                   "feature_count": 16, "baseline_epochs": 10,
                   "baseline_architecture": "2x[6, 6] + [6, 6]", "passes": 8,
                   "log_every": 20, "time_slices": "0.25,0.75"},
        })
        assert main(["uq", "--config", str(path), "--quiet"]) == 0
        out = tmp_path / "out"
        for name in ("uq_report.csv", "uq_summary.csv", "sigma_error_scatter.csv",
                     "uq_checkpoint.npz", "uq_bands.png", "sigma_vs_error.png"):
            assert (out / name).exists(), name
        summary = (out / "uq_summary.csv").read_text().strip().split("\n")
        assert summary[1] == "method,time,mse,max_error,eac"
        methods = {line.split(",")[0] for line in summary[2:]}
        assert methods == {"QO-SPINN", "MC-Dropout"}


class TestLipschitzAndVerify:
    def test_lipschitz_subcommand(self, tmp_path):
        cfg = tiny_solve_config(tmp_path)
        assert main(["solve", "--config", str(cfg), "--quiet"]) == 0
        ckpt = tmp_path / "out" / "checkpoint.npz"
        code = main(["lipschitz", "--checkpoint", str(ckpt),
                     "--out", str(tmp_path / "lip"), "--samples", "200",
                     "--pairs", "2000"])
        assert code == 0
        assert (tmp_path / "lip" / "bound_report.txt").exists()
        assert (tmp_path / "lip" / "bound_report.csv").exists()

    @pytest.mark.filterwarnings("ignore")
    def test_verify_subcommand(self):
        assert main(["verify"]) == 0
