"""Command-line experiment runner.

    amga train  --config <path|preset> [--out-dir DIR]
    amga eval   --checkpoint FILE --data DIR [--config <path|preset>] [--split test|train]
    amga ablate --config <path|preset> [--out-dir DIR]

Exit codes: 0 success, 1 usage/config error, 2 data or file-format error,
3 numeric failure. ``AMGA_SEED`` overrides the configured seed.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .config import ExperimentConfig, parse_config
from .data import load_split
from .engine import TrainRecord, accuracy, train
from .errors import ConfigError, DimensionError, FormatError, NumericError

log = logging.getLogger("amga")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

ABLATIONS = {
    "full": {},
    "no_multiscale": {"multiscale": False},
    "no_curriculum": {"curriculum": False},
    "no_adaptive_threshold": {"adaptive_threshold": False},
    "no_lr_schedule": {"lr_schedule": False},
}


def csv_columns(config: ExperimentConfig) -> list[str]:
    cols = ["epoch", "lr", "stage", "selected_fraction", "guarantee_applied"]
    for stat in ("theta", "loss", "g_pos", "g_neg"):
        cols += [f"{stat}_{i + 1}" for i in range(config.num_layers)]
    return cols + ["train_acc", "test_acc", "wall_seconds"]


def _num(v) -> str:
    return "" if v is None else repr(float(v))


def csv_row(rec: TrainRecord) -> list[str]:
    row = [str(rec.epoch), _num(rec.lr), rec.stage, _num(rec.selected_fraction), str(int(rec.guarantee_applied))]
    for values in (rec.thresholds, rec.losses, rec.g_pos, rec.g_neg):
        row += [_num(v) for v in values]
    return row + [_num(rec.train_acc), _num(rec.test_acc), f"{rec.wall_seconds:.6f}"]


@dataclass
class RunSummary:
    name: str
    out_dir: Path
    train_acc: float | None
    test_acc: float | None
    median_epoch_seconds: float


def load_data(config: ExperimentConfig):
    train_data = load_split(config.data_dir, "train").subset(config.train_subset)
    test_data = load_split(config.data_dir, "test").subset(config.test_subset)
    return train_data, test_data


def run_train(config: ExperimentConfig, out_dir, data=None) -> RunSummary:
    """Train, streaming one CSV row per epoch to ``metrics.csv``, then write ``checkpoint.amga``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    train_data, test_data = data if data is not None else load_data(config)
    metrics_path = out_dir / "metrics.csv"
    with open(metrics_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(csv_columns(config))

        def on_epoch(rec: TrainRecord):
            writer.writerow(csv_row(rec))
            fh.flush()

        result = train(config, train_data, test_data, on_epoch=on_epoch)
    save_checkpoint(result.layers, out_dir / "checkpoint.amga")
    last = result.records[-1]
    summary = RunSummary(
        config.name,
        out_dir,
        last.train_acc,
        last.test_acc,
        float(np.median([r.wall_seconds for r in result.records])),
    )
    (out_dir / "summary.json").write_text(
        json.dumps(
            {
                "name": summary.name,
                "seed": config.seed,
                "train_acc": summary.train_acc,
                "test_acc": summary.test_acc,
                "median_epoch_seconds": summary.median_epoch_seconds,
            },
            indent=2,
        )
        + "\n"
    )
    return summary


def run_ablate(config: ExperimentConfig, out_dir, data=None) -> list[dict]:
    """Full model plus each component switched off alone, same seed; writes ``ablation.csv``."""
    out_dir = Path(out_dir)
    data = data if data is not None else load_data(config)
    rows = []
    for label, off in ABLATIONS.items():
        cfg = config.with_toggles(**off).replace(name=f"{config.name}_{label}")
        summary = run_train(cfg, out_dir / label, data)
        rows.append({"variant": label, "test_acc": summary.test_acc})
        log.info("ablation %s: test accuracy %s", label, summary.test_acc)
    full = rows[0]["test_acc"]
    for row in rows:
        row["delta"] = full - row["test_acc"]
    with open(out_dir / "ablation.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["variant", "test_acc", "delta"], lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (repr(float(v)) if k != "variant" else v) for k, v in row.items()})
    return rows


def run_eval(checkpoint, data_dir, config: ExperimentConfig | None = None, split: str = "test") -> float:
    layers = load_checkpoint(checkpoint)
    config = config or ExperimentConfig(architecture=(layers[0].in_dim, *[lay.out_dim for lay in layers]))
    data = load_split(data_dir, split)
    return accuracy(layers, data, config)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="amga", description="Forward-Forward training with multi-scale goodness.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train one configuration")
    p.add_argument("--config", required=True, help="TOML file or preset name")
    p.add_argument("--out-dir", help="output directory (default runs/<name>)")

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True, help="directory holding the IDX files")
    p.add_argument("--config", help="config whose goodness/prediction settings to use")
    p.add_argument("--split", choices=("test", "train"), default="test")

    p = sub.add_parser("ablate", help="full model vs. each component disabled")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "eval":
            config = parse_config(args.config) if args.config else None
            acc = run_eval(args.checkpoint, args.data, config, args.split)
            print(f"accuracy {acc:.4f}")
            return EXIT_OK
        config = parse_config(args.config)
        out_dir = Path(args.out_dir or Path("runs") / config.name)
        if args.command == "train":
            s = run_train(config, out_dir)
            print(f"{s.name}: train_acc={s.train_acc} test_acc={s.test_acc} "
                  f"median_epoch_seconds={s.median_epoch_seconds:.3f} -> {out_dir}")
        else:
            for row in run_ablate(config, out_dir):
                print(f"{row['variant']:<24} {row['test_acc']:.4f} {row['delta']:+.4f}")
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FormatError, DimensionError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
