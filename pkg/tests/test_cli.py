import json

import numpy as np
import pytest

from tomobench import read_tensor
from tomobench.cli import cli_main, load_config_file, sweep_config_from_dict

SWEEP_TOML = """
n_views = 16
side_px = 64
pixel_size = 0.1
photon_grid = [100, 1000]
n_test = 2
algorithms = ["fbp"]
base_seed = 3
calibrate_tv = false

[mle]
max_iters = 8
"""


def _make_phantom(tmp_path, name="ph.dtns", kind="shepp"):
    path = tmp_path / name
    assert cli_main(["phantom", "--kind", kind, "--side", "64",
                     "--seed", "5", "--out", str(path)]) == 0
    return path


def _make_counts(tmp_path, phantom, n0="1000", seed="4"):
    path = tmp_path / "counts.dtns"
    assert cli_main(["simulate", "--phantom", str(phantom), "--views", "16",
                     "--n0", n0, "--seed", seed, "--pixel-size", "0.1",
                     "--out", str(path)]) == 0
    return path


class TestCommands:
    def test_phantom_roundtrip(self, tmp_path):
        path = _make_phantom(tmp_path)
        values = read_tensor(path)
        assert values.shape == (64, 64)
        assert 0.0 <= values.min() and values.max() <= 1.0

    def test_simulate_writes_sidecar(self, tmp_path):
        phantom = _make_phantom(tmp_path)
        counts = _make_counts(tmp_path, phantom)
        meta = json.loads((tmp_path / "counts.dtns.json").read_text())
        assert meta["n_views"] == 16 and meta["n0"] == 1000.0
        assert read_tensor(counts).dtype == np.dtype("<u4")

    @pytest.mark.parametrize("algo", ["fbp", "mle", "maptv"])
    def test_recon_all_algorithms(self, tmp_path, algo):
        counts = _make_counts(tmp_path, _make_phantom(tmp_path))
        out = tmp_path / f"recon_{algo}.dtns"
        cfg = tmp_path / "solver.toml"
        cfg.write_text("[mle]\nmax_iters = 8\n"
                       "[maptv]\ntv_weight = 2.0\n[maptv.mle]\n"
                       "max_iters = 8\n")
        assert cli_main(["recon", "--algo", algo, "--counts", str(counts),
                         "--config", str(cfg), "--out", str(out)]) == 0
        assert read_tensor(out).shape == (64, 64)
        if algo in ("mle", "maptv"):
            report = json.loads((tmp_path / f"recon_{algo}.dtns.report.json")
                                .read_text())
            assert report["iterations"] >= 1
            assert len(report["objective_trace"]) >= 2

    def test_recon_missing_input_exit_2(self, tmp_path, capsys):
        missing = tmp_path / "nope.dtns"
        code = cli_main(["recon", "--algo", "fbp", "--counts", str(missing),
                         "--out", str(tmp_path / "r.dtns")])
        assert code == 2
        assert "nope.dtns" in capsys.readouterr().err

    def test_metrics_self_comparison(self, tmp_path, capsys):
        phantom = _make_phantom(tmp_path)
        capsys.readouterr()  # drop the phantom command's output
        assert cli_main(["metrics", str(phantom), str(phantom)]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["pearson_r"] == 1.0
        assert report["one_minus_r"] == 0.0
        assert report["scattering_l2"] == 0.0

    def test_metrics_stack_csv(self, tmp_path, capsys):
        from tomobench import write_tensor
        rng = np.random.default_rng(0)
        a = rng.uniform(0, 1, (3, 32, 32))
        b = rng.uniform(0, 1, (3, 32, 32))
        pa, pb = tmp_path / "a.dtns", tmp_path / "b.dtns"
        write_tensor(a, pa)
        write_tensor(b, pb)
        out_file = tmp_path / "m.csv"
        assert cli_main(["metrics", str(pa), str(pb),
                         "--out", str(out_file)]) == 0
        lines = out_file.read_text().strip().split("\n")
        assert lines[0] == "index,pearson_r,one_minus_r,scattering_l2"
        assert len(lines) == 4

    def test_sweep_outputs(self, tmp_path):
        cfg = tmp_path / "sweep.toml"
        cfg.write_text(SWEEP_TOML)
        out = tmp_path / "results"
        assert cli_main(["sweep", "--config", str(cfg),
                         "--out", str(out)]) == 0
        assert (out / "sweep.csv").exists()
        assert (out / "manifest.json").exists()
        lines = (out / "sweep.csv").read_text().strip().split("\n")
        assert len(lines) == 1 + 1 * 2 * 2  # header + algos*n0*metrics

    def test_sweep_plot(self, tmp_path):
        pytest.importorskip("matplotlib")
        cfg = tmp_path / "sweep.toml"
        cfg.write_text(SWEEP_TOML)
        out = tmp_path / "results"
        assert cli_main(["sweep", "--config", str(cfg), "--out", str(out),
                         "--plot"]) == 0
        svg = (out / "sweep_one_minus_r.svg").read_text()
        assert svg.lstrip().startswith("<?xml")

    def test_dataset_train(self, tmp_path):
        cfg = tmp_path / "sweep.toml"
        cfg.write_text(SWEEP_TOML)
        out = tmp_path / "data"
        assert cli_main(["dataset", "--split", "train", "--config", str(cfg),
                         "--out", str(out)]) == 0
        assert (out / "ground_truth.dtns").exists()
        assert (out / "recon_fbp.dtns").exists()
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["split"] == "train"


class TestUsageErrors:
    def test_unknown_flag_exit_1(self, capsys):
        assert cli_main(["phantom", "--bogus"]) == 1
        assert "usage" in capsys.readouterr().err

    def test_unknown_command_exit_1(self, capsys):
        assert cli_main(["frobnicate"]) == 1

    def test_missing_out_exit_1(self, capsys):
        assert cli_main(["phantom", "--kind", "shepp"]) == 1

    def test_help_exit_0(self, capsys):
        assert cli_main(["--help"]) == 0
        assert "phantom" in capsys.readouterr().out


class TestConfigLoading:
    def test_toml(self, tmp_path):
        path = tmp_path / "c.toml"
        path.write_text("n_views = 8\n[mle]\nmax_iters = 5\n")
        cfg = sweep_config_from_dict(load_config_file(path))
        assert cfg.n_views == 8 and cfg.mle.max_iters == 5

    def test_json_fallback(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"n_views": 8, "algorithms": ["mle"]}))
        cfg = sweep_config_from_dict(load_config_file(path))
        assert cfg.n_views == 8
        assert cfg.algorithms[0].value == "mle"

    def test_garbage_rejected(self, tmp_path):
        path = tmp_path / "c.txt"
        path.write_text("not a config {{{{")
        with pytest.raises(ValueError):
            load_config_file(path)

    def test_unknown_keys_rejected(self):
        with pytest.raises(ValueError):
            sweep_config_from_dict({"not_a_field": 1})
