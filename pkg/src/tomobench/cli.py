"""Command-line interface.

Subcommands: phantom, simulate, recon, metrics, sweep, dataset.
Exit codes: 0 success, 1 usage error, 2 runtime error.

Counts tensors are written together with a JSON sidecar (<out>.json)
recording n0, seed, n_views, side_px and pixel_size, which `recon` reads
back; sweep and dataset configs are TOML (JSON accepted as a fallback).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from .dtns import read_tensor, write_manifest, write_tensor
from .fbp import FbpConfig, FbpWindow, fbp_reconstruct
from .metrics import MetricsReport, ScatteringConfig, pearson_r, \
    scattering_distance
from .phantoms import (ImageGrid, PhantomKind, PhantomSpec, derive_geometry,
                       make_phantom)
from .photon import PhotonMeasurement, simulate_counts
from .projector import forward_project
from .solvers import (ArmijoParams, InitMode, MapTvConfig, MleConfig,
                      map_tv_solve, mle_solve)
from .sweep import (Algorithm, Split, SweepConfig, config_echo,
                    export_dataset, run_sweep, write_sweep_plot)


class _Parser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def load_config_file(path) -> dict:
    text = Path(path).read_text()
    try:
        try:
            import tomllib
        except ModuleNotFoundError:
            import tomli as tomllib
        return tomllib.loads(text)
    except Exception as toml_err:
        try:
            return json.loads(text)
        except Exception as json_err:
            raise ValueError(
                f"config {path} is neither TOML ({toml_err}) "
                f"nor JSON ({json_err})")


def _build(cls, data: dict, **overrides):
    kwargs = dict(data)
    kwargs.update(overrides)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(kwargs) - names
    if unknown:
        raise ValueError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    return cls(**kwargs)


def fbp_config_from_dict(d: dict) -> FbpConfig:
    d = dict(d)
    if "window" in d:
        d["window"] = FbpWindow(d["window"])
    return _build(FbpConfig, d)


def mle_config_from_dict(d: dict) -> MleConfig:
    d = dict(d)
    if "armijo" in d:
        d["armijo"] = _build(ArmijoParams, d["armijo"])
    if "init" in d:
        d["init"] = InitMode(d["init"])
    return _build(MleConfig, d)


def maptv_config_from_dict(d: dict) -> MapTvConfig:
    d = dict(d)
    if "mle" in d:
        d["mle"] = mle_config_from_dict(d["mle"])
    return _build(MapTvConfig, d)


def scattering_config_from_dict(d: dict) -> ScatteringConfig:
    return _build(ScatteringConfig, d)


def sweep_config_from_dict(d: dict) -> SweepConfig:
    d = dict(d)
    for key, builder in (("fbp", fbp_config_from_dict),
                         ("mle", mle_config_from_dict),
                         ("maptv", maptv_config_from_dict),
                         ("scattering", scattering_config_from_dict)):
        if key in d:
            d[key] = builder(d[key])
    if "algorithms" in d:
        d["algorithms"] = tuple(Algorithm(a) for a in d["algorithms"])
    for key in ("photon_grid", "tv_grid"):
        if key in d:
            d[key] = tuple(float(v) for v in d[key])
    return _build(SweepConfig, d)


def _config_section(args, name: str) -> dict:
    if getattr(args, "config", None):
        return load_config_file(args.config).get(name, {})
    return {}


def _cmd_phantom(args) -> int:
    kind = PhantomKind.SHEPP_LOGAN if args.kind == "shepp" \
        else PhantomKind.RANDOM_ELLIPSES
    spec = PhantomSpec(kind=kind, seed=args.seed, side_px=args.side,
                       n_ellipses=args.n_ellipses)
    write_tensor(make_phantom(spec).values, args.out)
    print(f"wrote {args.out}")
    return 0


def _read_image(path, pixel_size: float) -> ImageGrid:
    values = read_tensor(path)
    if values.ndim != 2:
        raise ValueError(f"{path}: expected a 2D image tensor, "
                         f"got shape {values.shape}")
    return ImageGrid(values.astype(np.float64), pixel_size=pixel_size)


def _cmd_simulate(args) -> int:
    image = _read_image(args.phantom, args.pixel_size)
    geom = derive_geometry(image, args.views)
    sino = forward_project(image, geom)
    meas = simulate_counts(sino, args.n0, args.seed)
    write_tensor(meas.counts.astype(np.uint32), args.out)
    meta = {"n0": args.n0, "seed": args.seed, "n_views": args.views,
            "side_px": image.side_px, "pixel_size": args.pixel_size}
    Path(str(args.out) + ".json").write_text(json.dumps(meta, indent=2))
    print(f"wrote {args.out} (+ sidecar)")
    return 0


def _load_measurement(counts_path) -> tuple[PhotonMeasurement, dict]:
    sidecar = Path(str(counts_path) + ".json")
    if not sidecar.exists():
        raise ValueError(f"missing measurement sidecar {sidecar}")
    meta = json.loads(sidecar.read_text())
    counts = read_tensor(counts_path).astype(np.int64)
    probe = ImageGrid(np.zeros((meta["side_px"], meta["side_px"])),
                      pixel_size=meta["pixel_size"])
    geom = derive_geometry(probe, meta["n_views"])
    meas = PhotonMeasurement(geometry=geom, counts=counts, n0=meta["n0"],
                             seed=meta["seed"])
    return meas, meta


def _cmd_recon(args) -> int:
    meas, meta = _load_measurement(args.counts)
    side = args.side or meta["side_px"]
    report = None
    if args.algo == "fbp":
        img = fbp_reconstruct(meas, fbp_config_from_dict(
            _config_section(args, "fbp")), side)
    elif args.algo == "mle":
        img, report = mle_solve(meas, mle_config_from_dict(
            _config_section(args, "mle")), side)
    else:
        img, report = map_tv_solve(meas, maptv_config_from_dict(
            _config_section(args, "maptv")), side)
    write_tensor(img.values, args.out)
    if report is not None:
        Path(str(args.out) + ".report.json").write_text(
            json.dumps(dataclasses.asdict(report), indent=2))
    print(f"wrote {args.out}")
    return 0


def _cmd_metrics(args) -> int:
    a = read_tensor(args.image_a)
    b = read_tensor(args.image_b)
    cfg = scattering_config_from_dict(_config_section(args, "scattering"))
    if a.shape != b.shape:
        raise ValueError(f"tensor shapes differ: {a.shape} vs {b.shape}")
    if a.ndim == 2:
        report = MetricsReport.from_images(ImageGrid(a), ImageGrid(b), cfg)
        text = json.dumps(dataclasses.asdict(report), indent=2)
    elif a.ndim == 3:
        lines = ["index,pearson_r,one_minus_r,scattering_l2"]
        for i in range(a.shape[0]):
            ia, ib = ImageGrid(a[i]), ImageGrid(b[i])
            r = pearson_r(ia, ib)
            d = scattering_distance(ia, ib, cfg)
            lines.append(f"{i},{r:.9g},{1.0 - r:.9g},{d:.9g}")
        text = "\n".join(lines)
    else:
        raise ValueError(f"expected 2D images or 3D stacks, got {a.ndim}D")
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return 0


def _cmd_sweep(args) -> int:
    cfg = sweep_config_from_dict(
        load_config_file(args.config) if args.config else {})
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    table = run_sweep(cfg, n_workers=args.workers)
    (out / "sweep.csv").write_text(table.to_csv())
    manifest = {
        "artifact_version": 1,
        "config": config_echo(cfg),
        "tv_weights": {f"{k:g}": v for k, v in table.tv_weights.items()},
        "files": [{"path": "sweep.csv", "role": "sweep_table",
                   "algorithm": None, "n0": None, "seed": cfg.base_seed,
                   "checksum": _csv_checksum(out / "sweep.csv")}],
    }
    write_manifest(manifest, out / "manifest.json")
    if args.plot:
        for metric in ("one_minus_r", "scattering_l2"):
            write_sweep_plot(table, metric, out / f"sweep_{metric}.svg")
    print(f"wrote {out / 'sweep.csv'}")
    return 0


def _csv_checksum(path) -> str:
    from .dtns import file_sha256
    return file_sha256(path)


def _cmd_dataset(args) -> int:
    cfg = sweep_config_from_dict(
        load_config_file(args.config) if args.config else {})
    split = Split(args.split)
    export_dataset(cfg, split, args.out)
    print(f"wrote {args.split} split to {args.out}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="tomobench",
                     description="Sparse-view low-photon CT reconstruction "
                                 "benchmark")
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=0,
                        help="base random seed (0 = deterministic mode "
                             "where applicable)")
    common.add_argument("--out", help="output path")
    common.add_argument("--config", help="TOML (or JSON) config file")

    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    p = sub.add_parser("phantom", parents=[common],
                       help="generate a phantom tensor")
    p.add_argument("--kind", choices=["shepp", "ellipses"], default="shepp")
    p.add_argument("--side", type=int, default=128)
    p.add_argument("--n-ellipses", type=int, default=8)
    p.set_defaults(func=_cmd_phantom)

    p = sub.add_parser("simulate", parents=[common],
                       help="phantom -> photon counts")
    p.add_argument("--phantom", required=True)
    p.add_argument("--views", type=int, default=32)
    p.add_argument("--n0", type=float, required=True)
    p.add_argument("--pixel-size", type=float, default=0.05)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("recon", parents=[common],
                       help="photon counts -> reconstruction")
    p.add_argument("--algo", choices=["fbp", "mle", "maptv"], required=True)
    p.add_argument("--counts", required=True)
    p.add_argument("--side", type=int)
    p.set_defaults(func=_cmd_recon)

    p = sub.add_parser("metrics", parents=[common],
                       help="image pair (or stacks) -> metric report")
    p.add_argument("image_a")
    p.add_argument("image_b")
    p.set_defaults(func=_cmd_metrics)

    p = sub.add_parser("sweep", parents=[common],
                       help="run the photon sweep -> CSV + manifest")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--plot", action="store_true",
                   help="also write SVG plots per metric")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("dataset", parents=[common],
                       help="export reconstruction datasets")
    p.add_argument("--split", choices=["train", "test"], required=True)
    p.set_defaults(func=_cmd_dataset)

    return parser



def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    if args.command in ("phantom", "simulate", "recon", "sweep", "dataset") \
            and not args.out:
        parser = build_parser()
        print("tomobench: error: --out is required for this command",
              file=sys.stderr)
        return 1
    try:
        return args.func(args) or 0
    except Exception as exc:
        print(f"tomobench: error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli_main(sys.argv[1:]))


if __name__ == "__main__":
    main()
