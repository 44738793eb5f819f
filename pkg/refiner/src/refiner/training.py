"""Training of one refinement UNet per input reconstruction algorithm.

The training set holds only reconstructions of noise-free measurements;
noise resilience is evaluated later on noisy test exports.
"""

from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .dtns_io import load_manifest, manifest_tensor
from .unet import UNet


@dataclass(frozen=True)
class RefinerConfig:
    depth: int = 4
    base_channels: int = 32
    epochs: int = 10
    batch_size: int = 8
    learning_rate: float = 1e-3
    weight_decay: float = 1e-4
    loss: str = "l2"  # "l2" or "l1"
    residual: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.loss not in ("l2", "l1"):
            raise ValueError("loss must be 'l2' or 'l1'")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")


def _seed_everything(seed: int):
    torch.manual_seed(seed)
    np.random.seed(seed & 0xFFFFFFFF)
    torch.use_deterministic_algorithms(True)


def _loss_fn(name: str):
    return torch.nn.MSELoss() if name == "l2" else torch.nn.L1Loss()


def train(dataset_dir, cfg: RefinerConfig, algorithm: str,
          out_dir) -> dict:
    """Fit recon -> ground-truth on the train split for one algorithm.

    Writes model weights, a config echo, and the per-epoch loss curve;
    returns the training report. Reproducible for a fixed config and
    dataset (CPU, deterministic kernels; curves match to < 1e-6).
    """
    dataset_dir = Path(dataset_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = load_manifest(dataset_dir)
    if manifest.get("split") != "train":
        raise ValueError(f"{dataset_dir} is not a train split export")

    inputs = manifest_tensor(dataset_dir, manifest, role="reconstruction",
                             algorithm=algorithm)
    targets = manifest_tensor(dataset_dir, manifest, role="ground_truth")
    if inputs.shape != targets.shape:
        raise ValueError(f"input/target shapes differ: {inputs.shape} vs "
                         f"{targets.shape}")

    _seed_everything(cfg.seed)
    model = UNet(depth=cfg.depth, base_channels=cfg.base_channels,
                 residual=cfg.residual)
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate,
                                 weight_decay=cfg.weight_decay)
    loss_fn = _loss_fn(cfg.loss)

    x = torch.from_numpy(inputs).float().unsqueeze(1)
    y = torch.from_numpy(targets).float().unsqueeze(1)
    n = x.shape[0]

    curve = []
    start = time.time()
    generator = torch.Generator().manual_seed(cfg.seed)
    for _epoch in range(cfg.epochs):
        order = torch.randperm(n, generator=generator)
        total = 0.0
        model.train()
        for lo in range(0, n, cfg.batch_size):
            idx = order[lo:lo + cfg.batch_size]
            optimizer.zero_grad()
            loss = loss_fn(model(x[idx]), y[idx])
            loss.backward()
            optimizer.step()
            total += float(loss.detach()) * idx.numel()
        curve.append(total / n)

    report = {
        "algorithm": algorithm,
        "config": dataclasses.asdict(cfg),
        "n_train": int(n),
        "side_px": int(x.shape[-1]),
        "loss_curve": curve,
        "train_seconds": time.time() - start,
        "nondeterminism_tolerance": 1e-6,
    }
    torch.save(model.state_dict(), out_dir / f"unet_{algorithm}.pt")
    (out_dir / f"unet_{algorithm}.json").write_text(
        json.dumps(report, indent=2))
    return report


def load_model(out_dir, algorithm: str) -> tuple[UNet, dict]:
    out_dir = Path(out_dir)
    report_path = out_dir / f"unet_{algorithm}.json"
    if not report_path.exists():
        raise ValueError(f"no trained model for algorithm {algorithm!r} "
                         f"in {out_dir}")
    report = json.loads(report_path.read_text())
    cfg = report["config"]
    model = UNet(depth=cfg["depth"], base_channels=cfg["base_channels"],
                 residual=cfg.get("residual", True))
    model.load_state_dict(
        torch.load(out_dir / f"unet_{algorithm}.pt", weights_only=True))
    model.eval()
    return model, report
