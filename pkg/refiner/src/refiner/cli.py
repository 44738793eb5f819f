"""CLI: train refinement UNets on a train export, evaluate on a test
export, both in the benchmark's file formats."""

from __future__ import annotations

import argparse
import json
import sys

from .evaluation import evaluate
from .training import RefinerConfig, train


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tomo-refiner")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one UNet per input algorithm")
    p.add_argument("--dataset", required=True, help="train split export")
    p.add_argument("--algorithms", nargs="+", required=True)
    p.add_argument("--out", required=True, help="model output directory")
    p.add_argument("--config", help="JSON file of RefinerConfig overrides")
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)

    p = sub.add_parser("evaluate", help="score algorithm+unet on a test "
                                        "export")
    p.add_argument("--models", required=True, help="model directory")
    p.add_argument("--dataset", required=True, help="test split export")
    p.add_argument("--algorithms", nargs="+", required=True)
    p.add_argument("--out", required=True, help="CSV output path")
    return parser


def _config_from_args(args) -> RefinerConfig:
    overrides = {}
    if args.config:
        with open(args.config) as f:
            overrides.update(json.load(f))
    if args.epochs is not None:
        overrides["epochs"] = args.epochs
    if args.seed is not None:
        overrides["seed"] = args.seed
    return RefinerConfig(**overrides)


def cli_main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "train":
            cfg = _config_from_args(args)
            for algo in args.algorithms:
                report = train(args.dataset, cfg, algo, args.out)
                print(f"trained {algo}: final loss "
                      f"{report['loss_curve'][-1]:.6g}")
        else:
            rows = []
            for algo in args.algorithms:
                rows.extend(evaluate(args.models, algo, args.dataset))
            lines = ["algorithm,n0,metric,mean,log_std,n_samples"]
            for r in rows:
                lines.append(f"{r['algorithm']},{r['n0']:.9g},"
                             f"{r['metric']},{r['mean']:.9g},"
                             f"{r['log_std']:.9g},{r['n_samples']}")
            with open(args.out, "w") as f:
                f.write("\n".join(lines) + "\n")
            print(f"wrote {args.out}")
    except Exception as exc:
        print(f"tomo-refiner: error: {exc}", file=sys.stderr)
        return 2
    return 0


def main() -> None:
    sys.exit(cli_main(sys.argv[1:]))


if __name__ == "__main__":
    main()
