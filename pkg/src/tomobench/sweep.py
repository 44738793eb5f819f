"""Benchmark orchestration: photon sweeps, log-scale aggregation, and
dataset export for the learned-refinement component.

Every cell of the sweep (algorithm, photon level, phantom index) derives
its own measurement seed from the base seed by counter hashing, so cells
are independently reproducible and the whole table is a pure function of
the configuration.
"""

from __future__ import annotations

import dataclasses
import enum
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import rng
from .dtns import file_sha256, write_manifest, write_tensor
from .fbp import FbpConfig, fbp_reconstruct
from .metrics import ScatteringConfig, pearson_r, scattering_coeffs
from .phantoms import (ImageGrid, PhantomKind, PhantomSpec, derive_geometry,
                       make_random_ellipses)
from .photon import simulate_counts
from .projector import forward_project
from .solvers import (MapTvConfig, MleConfig, map_tv_reconstruct,
                      mle_reconstruct, select_tv_weight)

# seed namespaces: test phantoms are base_seed + index (shared with the
# exported test split); calibration and training phantoms live far away
CALIB_SEED_OFFSET = 1 << 32
TRAIN_SEED_OFFSET = 1 << 33
TRAIN_REFERENCE_N0 = 1.0e6

METRIC_NAMES = ("one_minus_r", "scattering_l2")


class Algorithm(enum.Enum):
    FBP = "fbp"
    MLE = "mle"
    MAPTV = "maptv"


class Split(enum.Enum):
    TRAIN = "train"
    TEST = "test"


def _default_sweep_mle() -> MleConfig:
    # early stopping regularizes bare MLE on sparse-view data; 15 steps
    # sits near the r-vs-iterations peak at every photon level
    return MleConfig(max_iters=15)


def _default_sweep_maptv() -> MapTvConfig:
    return MapTvConfig(mle=MleConfig(max_iters=60))


@dataclass(frozen=True)
class SweepConfig:
    n_views: int = 32
    side_px: int = 128
    pixel_size: float = 0.05  # keeps line integrals O(1): low-photon regime
    photon_grid: tuple = (32.0, 100.0, 316.0, 1000.0, 3162.0, 10000.0)
    n_test: int = 1000
    n_calib: int = 10
    algorithms: tuple = (Algorithm.FBP, Algorithm.MLE, Algorithm.MAPTV)
    base_seed: int = 0
    fbp: FbpConfig = field(default_factory=FbpConfig)
    mle: MleConfig = field(default_factory=_default_sweep_mle)
    maptv: MapTvConfig = field(default_factory=_default_sweep_maptv)
    tv_grid: tuple = (0.3, 1.0, 3.0, 10.0, 30.0)
    calibrate_tv: bool = True
    scattering: ScatteringConfig = field(default_factory=ScatteringConfig)

    def __post_init__(self):
        if not self.photon_grid:
            raise ValueError("photon_grid must be nonempty")
        grid = tuple(float(v) for v in self.photon_grid)
        if any(v <= 0 for v in grid):
            raise ValueError("photon levels must be positive")
        if any(b >= a for b, a in zip(grid, grid[1:])):
            raise ValueError("photon_grid must be strictly increasing")
        if not self.algorithms:
            raise ValueError("algorithms must be nonempty")
        object.__setattr__(self, "photon_grid", grid)
        object.__setattr__(self, "algorithms", tuple(self.algorithms))


@dataclass(frozen=True)
class SweepRow:
    algorithm: str
    n0: float
    metric: str
    mean: float
    log_std: float
    n_samples: int


@dataclass(frozen=True)
class SweepTable:
    rows: tuple
    tv_weights: dict = field(default_factory=dict)  # n0 -> calibrated weight

    def to_csv(self) -> str:
        lines = ["algorithm,n0,metric,mean,log_std,n_samples"]
        for r in self.rows:
            lines.append(f"{r.algorithm},{r.n0:.9g},{r.metric},"
                         f"{r.mean:.9g},{r.log_std:.9g},{r.n_samples}")
        return "\n".join(lines) + "\n"


def aggregate_log_stats(values) -> dict:
    """Arithmetic mean plus standard deviation of log10(values).

    Nonpositive entries are clamped to 1e-12 (with a warning) before the
    log; a singleton list has log_std 0.
    """
    vals = np.asarray(list(values), dtype=np.float64)
    if vals.size == 0:
        raise ValueError("values must be nonempty")
    if (vals <= 0).any():
        warnings.warn("clamping nonpositive metric values to 1e-12 before "
                      "the log-scale statistics", stacklevel=2)
        vals = np.maximum(vals, 1e-12)
    log_std = 0.0 if vals.size == 1 else float(np.std(np.log10(vals), ddof=1))
    return {"mean": float(np.mean(vals)), "log_std": log_std}


def cell_seed(base_seed: int, index: int, n0: float, algorithm: Algorithm) -> int:
    """Measurement seed for one sweep cell; never 0 (0 = noise-free mode)."""
    n0_bits = np.float64(n0).view(np.uint64)
    word = int(rng.counter_u64(base_seed, rng.DOMAIN_SWEEP, index, n0_bits,
                               list(Algorithm).index(algorithm)))
    return word or 1


def make_test_phantom(cfg: SweepConfig, index: int) -> ImageGrid:
    spec = PhantomSpec(PhantomKind.RANDOM_ELLIPSES,
                       seed=cfg.base_seed + index, side_px=cfg.side_px)
    return ImageGrid(make_random_ellipses(spec).values,
                     pixel_size=cfg.pixel_size)


def _phantom_at(cfg: SweepConfig, seed: int) -> ImageGrid:
    spec = PhantomSpec(PhantomKind.RANDOM_ELLIPSES, seed=seed,
                       side_px=cfg.side_px)
    return ImageGrid(make_random_ellipses(spec).values,
                     pixel_size=cfg.pixel_size)


def _maptv_with_weight(cfg: SweepConfig, weight: float) -> MapTvConfig:
    return MapTvConfig(mle=cfg.maptv.mle, tv_weight=weight,
                       tv_inner_iters=cfg.maptv.tv_inner_iters,
                       fista=cfg.maptv.fista)


def reconstruct_cell(cfg: SweepConfig, algorithm: Algorithm, meas,
                     tv_weight: float | None = None) -> ImageGrid:
    if algorithm is Algorithm.FBP:
        return fbp_reconstruct(meas, cfg.fbp, cfg.side_px)
    if algorithm is Algorithm.MLE:
        return mle_reconstruct(meas, cfg.mle, cfg.side_px)
    w = cfg.maptv.tv_weight if tv_weight is None else tv_weight
    return map_tv_reconstruct(meas, _maptv_with_weight(cfg, w), cfg.side_px)


def calibrate_tv_weights(cfg: SweepConfig) -> dict:
    """Per-photon-level TV weight from a held-out calibration set."""
    truths = [_phantom_at(cfg, cfg.base_seed + CALIB_SEED_OFFSET + i)
              for i in range(cfg.n_calib)]
    geom = derive_geometry(truths[0], cfg.n_views)
    sinos = [forward_project(t, geom) for t in truths]
    weights = {}
    for n0 in cfg.photon_grid:
        meas = [simulate_counts(
                    s, n0, cell_seed(cfg.base_seed, CALIB_SEED_OFFSET + i,
                                     n0, Algorithm.MAPTV))
                for i, s in enumerate(sinos)]
        weights[n0] = select_tv_weight(meas, truths, list(cfg.tv_grid),
                                       cfg.maptv)
    return weights


def _tv_weight_map(cfg: SweepConfig) -> dict:
    if Algorithm.MAPTV in cfg.algorithms and cfg.calibrate_tv:
        return calibrate_tv_weights(cfg)
    return {n0: cfg.maptv.tv_weight for n0 in cfg.photon_grid}


def run_sweep(cfg: SweepConfig, n_workers: int = 1) -> SweepTable:
    """The photon sweep: reconstruct every (phantom, n0, algorithm) cell
    and aggregate both metrics; a pure function of cfg."""
    tv_weights = _tv_weight_map(cfg)

    truths = [make_test_phantom(cfg, i) for i in range(cfg.n_test)]
    geom = derive_geometry(truths[0], cfg.n_views)
    sinos = [forward_project(t, geom) for t in truths]
    truth_coeffs = [scattering_coeffs(t, cfg.scattering) for t in truths]

    items = [(algo, n0, i) for algo in cfg.algorithms
             for n0 in cfg.photon_grid for i in range(cfg.n_test)]

    def run_item(item):
        algo, n0, i = item
        try:
            meas = simulate_counts(sinos[i], n0,
                                   cell_seed(cfg.base_seed, i, n0, algo))
            recon = reconstruct_cell(cfg, algo, meas, tv_weights.get(n0))
            one_minus = 1.0 - pearson_r(recon, truths[i])
            dist = float(np.linalg.norm(
                scattering_coeffs(recon, cfg.scattering) - truth_coeffs[i]))
            return one_minus, dist
        except Exception as exc:  # error rows, never a sweep abort
            warnings.warn(f"cell ({algo.value}, n0={n0:g}, item {i}) "
                          f"failed: {exc}", stacklevel=2)
            return None

    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            outcomes = list(pool.map(run_item, items))
    else:
        outcomes = [run_item(it) for it in items]

    rows = []
    pos = 0
    for algo in cfg.algorithms:
        for n0 in cfg.photon_grid:
            cell = outcomes[pos:pos + cfg.n_test]
            pos += cfg.n_test
            for m_idx, metric in enumerate(METRIC_NAMES):
                if any(c is None for c in cell):
                    rows.append(SweepRow(algo.value, n0, metric,
                                         float("nan"), float("nan"), 0))
                    continue
                stats = aggregate_log_stats([c[m_idx] for c in cell])
                rows.append(SweepRow(algo.value, n0, metric, stats["mean"],
                                     stats["log_std"], cfg.n_test))
    return SweepTable(rows=tuple(rows), tv_weights=tv_weights)


def _jsonable(obj):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {k: _jsonable(v)
                for k, v in dataclasses.asdict(obj).items()}
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def config_echo(cfg: SweepConfig) -> dict:
    d = dataclasses.asdict(cfg)
    return _jsonable(d)


def _n0_tag(n0: float) -> str:
    return f"{n0:g}".replace(".", "p").replace("+", "")


def export_dataset(cfg: SweepConfig, split: Split, out_dir,
                   tv_weights: dict | None = None) -> dict:
    """Write reconstruction/ground-truth tensors plus a checksummed
    manifest for the learned-refinement component.

    Train split: noise-free (deterministic) measurements at the reference
    photon level, one reconstruction tensor per algorithm.  Test split:
    one reconstruction tensor per (algorithm, n0 in photon_grid), seeded
    exactly like run_sweep's cells.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []

    def _write(name: str, array: np.ndarray, role: str, algorithm, n0, seed):
        write_tensor(array, out / name)
        files.append({"path": name, "role": role, "algorithm": algorithm,
                      "n0": n0, "seed": seed,
                      "checksum": file_sha256(out / name)})

    if split is Split.TRAIN:
        offsets = [cfg.base_seed + TRAIN_SEED_OFFSET + i
                   for i in range(cfg.n_test)]
        truths = [_phantom_at(cfg, s) for s in offsets]
    else:
        truths = [make_test_phantom(cfg, i) for i in range(cfg.n_test)]
    geom = derive_geometry(truths[0], cfg.n_views)
    sinos = [forward_project(t, geom) for t in truths]

    stack = np.stack([t.values for t in truths])
    _write("ground_truth.dtns", stack, "ground_truth", None, None, None)

    if split is Split.TRAIN:
        tasks = [(TRAIN_REFERENCE_N0, True)]
    else:
        tasks = [(n0, False) for n0 in cfg.photon_grid]
        if tv_weights is None and Algorithm.MAPTV in cfg.algorithms \
                and cfg.calibrate_tv:
            tv_weights = calibrate_tv_weights(cfg)
    if tv_weights is None:
        tv_weights = {}

    for n0, noise_free in tasks:
        for algo in cfg.algorithms:
            recons = []
            for i, s in enumerate(sinos):
                seed = 0 if noise_free else cell_seed(cfg.base_seed, i, n0,
                                                      algo)
                meas = simulate_counts(s, n0, seed)
                recons.append(
                    reconstruct_cell(cfg, algo, meas,
                                     tv_weights.get(n0)).values)
            name = (f"recon_{algo.value}.dtns" if noise_free
                    else f"recon_{algo.value}_n0_{_n0_tag(n0)}.dtns")
            _write(name, np.stack(recons), "reconstruction", algo.value,
                   n0, None if noise_free else cfg.base_seed)

    manifest = {
        "artifact_version": 1,
        "split": split.value,
        "config": config_echo(cfg),
        "tv_weights": _jsonable(tv_weights),
        "train_reference_n0": TRAIN_REFERENCE_N0,
        "files": files,
    }
    write_manifest(manifest, out / "manifest.json")
    return manifest


def write_sweep_plot(table: SweepTable, metric: str, path) -> None:
    """Log-log line plot of one metric with log_std error bars (SVG)."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4.5))
    algos = []
    for r in table.rows:
        if r.metric == metric and r.algorithm not in algos:
            algos.append(r.algorithm)
    for algo in algos:
        pts = [(r.n0, r.mean, r.log_std) for r in table.rows
               if r.metric == metric and r.algorithm == algo
               and np.isfinite(r.mean)]
        if not pts:
            continue
        n0s, means, stds = map(np.array, zip(*pts))
        lower = means - means * 10.0 ** (-stds)
        upper = means * 10.0 ** stds - means
        ax.errorbar(n0s, means, yerr=[lower, upper], marker="o",
                    capsize=3, label=algo)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("photons per ray")
    ax.set_ylabel(metric)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
