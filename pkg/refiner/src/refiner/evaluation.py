"""Refinement and evaluation against noisy test exports.

Pearson correlation is computed locally (validated against the benchmark
CLI on shared fixtures); scattering distances come from invoking the
benchmark CLI itself on tensor stacks, so both components score with the
same filter bank.
"""

from __future__ import annotations

import math
import os
import subprocess
import sys
import tempfile
from pathlib import Path

import numpy as np
import torch

from .dtns_io import load_manifest, manifest_tensor, write_tensor
from .training import load_model
from .unet import UNet

METRIC_NAMES = ("one_minus_r", "scattering_l2")


def pearson_r(a: np.ndarray, b: np.ndarray) -> float:
    """Sample Pearson correlation over flattened pixels."""
    av = np.asarray(a, dtype=np.float64).ravel()
    bv = np.asarray(b, dtype=np.float64).ravel()
    if np.ptp(av) == 0.0 or np.ptp(bv) == 0.0:
        return 0.0
    ac = av - av.mean()
    bc = bv - bv.mean()
    denom = math.sqrt(float(ac @ ac) * float(bc @ bc))
    return float(np.clip(float(ac @ bc) / denom, -1.0, 1.0))


def refine(model: UNet, recon_stack: np.ndarray,
           batch_size: int = 8) -> np.ndarray:
    """Run the UNet over a (n, side, side) stack of reconstructions."""
    stack = np.asarray(recon_stack, dtype=np.float64)
    squeeze = stack.ndim == 2
    if squeeze:
        stack = stack[None]
    model.eval()
    outputs = []
    with torch.no_grad():
        for lo in range(0, stack.shape[0], batch_size):
            x = torch.from_numpy(stack[lo:lo + batch_size]) \
                .float().unsqueeze(1)
            outputs.append(model(x).squeeze(1).double().numpy())
    out = np.concatenate(outputs)
    return out[0] if squeeze else out


def benchmark_cli() -> list[str]:
    """Command prefix for the reconstruction benchmark's CLI."""
    override = os.environ.get("TOMOBENCH_CLI")
    if override:
        return override.split()
    return [sys.executable, "-m", "tomobench.cli"]


def scattering_distances_via_cli(a_stack: np.ndarray,
                                 b_stack: np.ndarray) -> np.ndarray:
    """Per-item scattering L2 distances from the benchmark CLI."""
    with tempfile.TemporaryDirectory() as tmp:
        pa = Path(tmp) / "a.dtns"
        pb = Path(tmp) / "b.dtns"
        out = Path(tmp) / "metrics.csv"
        write_tensor(np.asarray(a_stack, dtype=np.float64), pa)
        write_tensor(np.asarray(b_stack, dtype=np.float64), pb)
        cmd = benchmark_cli() + ["metrics", str(pa), str(pb),
                                 "--out", str(out)]
        proc = subprocess.run(cmd, capture_output=True, text=True)
        if proc.returncode != 0:
            raise RuntimeError(f"benchmark CLI failed ({proc.returncode}): "
                               f"{proc.stderr.strip()}")
        lines = out.read_text().strip().split("\n")
    header = lines[0].split(",")
    col = header.index("scattering_l2")
    return np.array([float(line.split(",")[col]) for line in lines[1:]])


def aggregate_log_stats(values) -> tuple[float, float]:
    vals = np.maximum(np.asarray(values, dtype=np.float64), 1e-12)
    log_std = 0.0 if vals.size == 1 else float(np.std(np.log10(vals),
                                                      ddof=1))
    return float(np.mean(vals)), log_std


def evaluate(model_dir, algorithm: str, test_dir,
             out_csv=None) -> list[dict]:
    """Score <algorithm>+unet on every photon level of a test export.

    Emits rows in the sweep-table CSV schema with the algorithm name
    suffixed `+unet`.
    """
    test_dir = Path(test_dir)
    manifest = load_manifest(test_dir)
    if manifest.get("split") != "test":
        raise ValueError(f"{test_dir} is not a test split export")
    model, report = load_model(model_dir, algorithm)
    if report["algorithm"] != algorithm:
        raise ValueError(f"model was trained on {report['algorithm']!r}, "
                         f"not {algorithm!r}")
    entries = [f for f in manifest["files"]
               if f["role"] == "reconstruction"
               and f["algorithm"] == algorithm]
    if not entries:
        raise ValueError(f"test export has no reconstructions for "
                         f"{algorithm!r}")
    truth = manifest_tensor(test_dir, manifest, role="ground_truth")

    rows = []
    for entry in sorted(entries, key=lambda f: f["n0"]):
        recon = manifest_tensor(test_dir, manifest, role="reconstruction",
                                algorithm=algorithm, n0=entry["n0"])
        refined = refine(model, recon)
        one_minus = [1.0 - pearson_r(refined[i], truth[i])
                     for i in range(truth.shape[0])]
        distances = scattering_distances_via_cli(refined, truth)
        for metric, values in (("one_minus_r", one_minus),
                               ("scattering_l2", distances)):
            mean, log_std = aggregate_log_stats(values)
            rows.append({"algorithm": f"{algorithm}+unet",
                         "n0": entry["n0"], "metric": metric, "mean": mean,
                         "log_std": log_std,
                         "n_samples": int(truth.shape[0])})
    if out_csv is not None:
        lines = ["algorithm,n0,metric,mean,log_std,n_samples"]
        for r in rows:
            lines.append(f"{r['algorithm']},{r['n0']:.9g},{r['metric']},"
                         f"{r['mean']:.9g},{r['log_std']:.9g},"
                         f"{r['n_samples']}")
        Path(out_csv).write_text("\n".join(lines) + "\n")
    return rows
