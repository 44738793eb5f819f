"""Acceptance: cross-component metric agreement and the noise-resilience
ladder for UNets trained only on noise-free-input reconstructions."""

import json
import subprocess
import time
from contextlib import contextmanager

import numpy as np
import pytest

from refiner import (RefinerConfig, evaluate, load_model, pearson_r, refine,
                     train)
from refiner.dtns_io import load_manifest, manifest_tensor, write_tensor

from conftest import BENCH_CLI, SMALL_TRAIN_TOML, export_split

ALGORITHMS = ("fbp", "mle", "maptv")
# one shared config for all three learned variants
SHARED_CONFIG = RefinerConfig(depth=3, base_channels=16, epochs=20,
                              batch_size=8, learning_rate=1e-3,
                              weight_decay=1e-4, seed=1)


@contextmanager
def criterion(name: str, budget_s: float):
    start = time.time()
    try:
        yield
    except BaseException:
        print(f"ACCEPTANCE {name}: FAIL ({time.time() - start:.1f}s)")
        raise
    elapsed = time.time() - start
    print(f"ACCEPTANCE {name}: PASS ({elapsed:.1f}s)")
    assert elapsed < budget_s, f"{name} exceeded {budget_s}s budget"


def test_cross_component_pearson(tmp_path):
    with criterion("cross-component Pearson agreement", 120.0):
        rng = np.random.default_rng(2024)
        ours, theirs = [], []
        for k in range(10):
            a = rng.uniform(0, 1, (64, 64))
            b = np.clip(a + rng.normal(0, 0.05 + 0.05 * k, a.shape), 0, 1)
            pa, pb = tmp_path / f"a{k}.dtns", tmp_path / f"b{k}.dtns"
            write_tensor(a, pa)
            write_tensor(b, pb)
            proc = subprocess.run(
                BENCH_CLI + ["metrics", str(pa), str(pb)],
                capture_output=True, text=True)
            assert proc.returncode == 0, proc.stderr
            theirs.append(json.loads(proc.stdout)["pearson_r"])
            ours.append(pearson_r(a, b))
        gap = np.abs(np.array(ours) - np.array(theirs)).max()
        assert gap < 1e-6


@pytest.fixture(scope="module")
def trained_ladder(tmp_path_factory):
    """Exports plus the three trained models used by the ladder tests."""
    base = tmp_path_factory.mktemp("ladder")
    train_toml = SMALL_TRAIN_TOML.replace("n_test = 10", "n_test = 120")
    test_toml = SMALL_TRAIN_TOML.replace("n_test = 10", "n_test = 20")
    val_toml = SMALL_TRAIN_TOML.replace("n_test = 10", "n_test = 10") \
        .replace("base_seed = 77", "base_seed = 707")
    train_dir = export_split(base, train_toml, "train")
    test_dir = export_split(base, test_toml, "test")
    val_base = tmp_path_factory.mktemp("ladder_val")
    (val_base / "val.toml").write_text(val_toml)
    val_dir = val_base / "val"
    subprocess.run(BENCH_CLI + ["dataset", "--split", "train", "--config",
                                str(val_base / "val.toml"), "--out",
                                str(val_dir)], check=True,
                   capture_output=True)
    models = base / "models"
    for algo in ALGORITHMS:
        train(train_dir, SHARED_CONFIG, algo, models)
    return models, test_dir, val_dir


def test_noise_resilience_ladder(trained_ladder):
    with criterion("noise-resilience ladder", 1800.0):
        models, test_dir, _ = trained_ladder
        drops = {}
        for algo in ALGORITHMS:
            rows = evaluate(models, algo, test_dir)
            r_at = {row["n0"]: 1.0 - row["mean"] for row in rows
                    if row["metric"] == "one_minus_r"}
            drops[algo] = r_at[1000.0] - r_at[100.0]
            print(f"  {algo}+unet: r@1000={r_at[1000.0]:.4f} "
                  f"r@100={r_at[100.0]:.4f} drop={drops[algo]:.4f}")
        assert drops["maptv"] <= drops["mle"] <= drops["fbp"]


def test_held_out_noise_free_non_degradation(trained_ladder):
    # refinement must not hurt on held-out pairs drawn from the training
    # (noise-free input) distribution
    models, _, val_dir = trained_ladder
    manifest = load_manifest(val_dir)
    truth = manifest_tensor(val_dir, manifest, role="ground_truth")
    for algo in ALGORITHMS:
        model, _ = load_model(models, algo)
        inputs = manifest_tensor(val_dir, manifest, role="reconstruction",
                                 algorithm=algo)
        refined = refine(model, inputs)
        r_in = np.mean([pearson_r(inputs[i], truth[i])
                        for i in range(truth.shape[0])])
        r_out = np.mean([pearson_r(refined[i], truth[i])
                         for i in range(truth.shape[0])])
        print(f"  {algo}: held-out r_in={r_in:.5f} r_out={r_out:.5f}")
        assert r_out >= r_in
