import subprocess
import sys
from pathlib import Path

import pytest

BENCH_CLI = [sys.executable, "-m", "tomobench.cli"]

SMALL_TRAIN_TOML = """
n_views = 32
side_px = 64
pixel_size = 0.15
photon_grid = [100, 1000]
n_test = 10
algorithms = ["fbp", "mle", "maptv"]
base_seed = 77
calibrate_tv = false

[fbp]
clamp_negative = false

[mle]
max_iters = 15

[maptv]
tv_weight = 4.0
[maptv.mle]
max_iters = 60
"""

SMALL_TEST_TOML = SMALL_TRAIN_TOML.replace("n_test = 10", "n_test = 4")


def run_bench(args: list[str]) -> subprocess.CompletedProcess:
    proc = subprocess.run(BENCH_CLI + args, capture_output=True, text=True)
    if proc.returncode != 0:
        raise RuntimeError(f"benchmark CLI failed: {proc.stderr}")
    return proc


def export_split(tmpdir: Path, toml_text: str, split: str) -> Path:
    cfg = tmpdir / f"{split}.toml"
    cfg.write_text(toml_text)
    out = tmpdir / split
    run_bench(["dataset", "--split", split, "--config", str(cfg),
               "--out", str(out)])
    return out


@pytest.fixture(scope="session")
def small_exports(tmp_path_factory):
    """A tiny train/test export pair produced through the benchmark CLI."""
    base = tmp_path_factory.mktemp("small_exports")
    train_dir = export_split(base, SMALL_TRAIN_TOML, "train")
    test_dir = export_split(base, SMALL_TEST_TOML, "test")
    return train_dir, test_dir
