from __future__ import annotations

import argparse
import logging
import sys
from collections.abc import Sequence
from pathlib import Path

import numpy as np
import pandas as pd

from ._bench import format_bench, model_report, run_bench
from ._config import ConfigError, RunConfig, load_config
from ._data import MultiModalDataset, synth_multimodal
from ._dbn import MODES, apply_mode, predict_proba, train_dbn
from ._io import load_model, read_dataset, save_dataset, save_model
from ._rbm import TrainingError

__all__ = [
    "main",
]

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s | %(levelname)s | %(name)s | %(message)s"

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_TRAINING = 3


def _run_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig() if args.config is None else load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "mode", None) is not None:
        cfg.mode = args.mode
    if getattr(args, "folds", None) is not None:
        if args.folds < 2:
            raise ConfigError("number of folds must be >= 2")
        cfg.folds = args.folds
    return cfg


def _read(path: str, cfg: RunConfig) -> MultiModalDataset:
    dataset = read_dataset(
        path,
        schema=cfg.schema,
        image_shape=cfg.image_shape,
        threshold=cfg.threshold,
        label_bytes=cfg.label_bytes,
    )
    if len(dataset) == 0:
        raise ValueError(f"dataset is empty: {path}")
    logger.info(
        f"loaded {len(dataset)} records with {dataset.n_visible} visible units from"
        f" {path}"
    )
    return dataset


def cmd_train(args: argparse.Namespace) -> int:
    cfg = _run_config(args)
    dataset = _read(args.data, cfg)
    train_cfg = apply_mode(cfg.train, cfg.mode)

    model = train_dbn(dataset, None, train_cfg, cfg.seed)
    save_model(model, args.out)
    logger.info(f"wrote model with {len(model.layers)} layers to {args.out}")

    report = model_report(model, dataset, train_cfg, cfg.mode, cfg.seed)
    print(report.to_text())
    if args.csv is not None:
        Path(args.csv).write_text(report.to_csv())
    return EXIT_OK


def _class_breakdown(labels: np.ndarray, pred: np.ndarray) -> pd.DataFrame:
    frame = pd.DataFrame({"class": labels, "correct": labels == pred})
    out = frame.groupby("class")["correct"].agg(["count", "sum", "mean"])
    out.columns = ["Records", "Correct", "Accuracy"]
    return out.reset_index().rename(columns={"class": "Class"})


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = _run_config(args)
    model = load_model(args.model)
    dataset = _read(args.data, cfg)
    if dataset.n_visible != model.n_visible:
        raise ValueError(
            f"dimension mismatch: model expects {model.n_visible} visible units,"
            f" dataset has {dataset.n_visible}"
        )

    probs = predict_proba(model, dataset.visible())
    pred = np.asarray(model.classes)[np.argmax(probs, axis=1)]
    accuracy = float(np.mean(pred == dataset.labels))
    breakdown = _class_breakdown(dataset.labels, pred)

    correct = int(np.sum(pred == dataset.labels))
    print(f"Accuracy: {accuracy:.4f} ({correct}/{len(dataset)})")
    print(breakdown.to_string(index=False, float_format="%.4f"))
    if args.csv is not None:
        breakdown.to_csv(args.csv, index=False)
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    cfg = _run_config(args)
    dataset = _read(args.data, cfg)
    reports = run_bench(
        dataset,
        cfg.train,
        cfg.modes,
        cfg.folds,
        cfg.seed,
        scheduler=cfg.scheduler,
    )
    print(format_bench(reports))
    if args.csv is not None:
        Path(args.csv).write_text(format_bench(reports, csv=True))
    return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    dataset = synth_multimodal(
        args.n,
        args.noise,
        args.seed,
        size=args.size,
        reverse_pairing=args.reverse_pairing,
    )
    save_dataset(dataset, args.out)
    logger.info(f"wrote {len(dataset)} synthetic records to {args.out}")
    return EXIT_OK


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mmdbn",
        description="Adaptive deep belief networks for binarized image and tabular"
        " data.",
    )
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument(
        "-v", "--verbose", action="store_true", help="log debug messages"
    )
    verbosity.add_argument(
        "-q", "--quiet", action="store_true", help="log warnings and errors only"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="train a model and write it as JSON")
    train.add_argument("--config", help="run configuration (JSON)")
    train.add_argument("--data", required=True, help="training dataset")
    train.add_argument("--out", required=True, help="output model file")
    train.add_argument("--seed", type=int, help="random seed")
    train.add_argument("--mode", choices=MODES, help="model variant")
    train.add_argument("--csv", help="also write the layer report as CSV")
    train.set_defaults(func=cmd_train)

    evaluate = sub.add_parser("eval", help="evaluate a trained model")
    evaluate.add_argument("--config", help="run configuration (JSON)")
    evaluate.add_argument("--model", required=True, help="model file")
    evaluate.add_argument("--data", required=True, help="test dataset")
    evaluate.add_argument("--csv", help="also write the per-class results as CSV")
    evaluate.set_defaults(func=cmd_eval)

    bench = sub.add_parser("bench", help="cross-validate and compare model variants")
    bench.add_argument("--config", help="run configuration (JSON)")
    bench.add_argument("--data", required=True, help="dataset")
    bench.add_argument("--seed", type=int, help="random seed")
    bench.add_argument("--folds", type=int, help="number of folds")
    bench.add_argument("--csv", help="also write the reports as CSV")
    bench.set_defaults(func=cmd_bench)

    synth = sub.add_parser("synth", help="generate a synthetic multimodal dataset")
    synth.add_argument("--out", required=True, help="output HDF5 file")
    synth.add_argument("--n", type=int, default=1000, help="number of records")
    synth.add_argument(
        "--noise", type=float, default=0.05, help="tabular flip probability"
    )
    synth.add_argument("--size", type=int, default=8, help="image side length")
    synth.add_argument("--seed", type=int, default=0, help="random seed")
    synth.add_argument(
        "--reverse-pairing",
        action="store_true",
        help="pair each tabular item with the mirrored image row",
    )
    synth.set_defaults(func=cmd_synth)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    """
    Run the command-line interface.

    Parameters
    ----------
    argv : sequence of str or None, optional
        Command-line arguments, excluding the program name. If None, `sys.argv` is
        used. Defaults to None.

    Returns
    -------
    status : int
        0 on success, 2 for invalid input, 3 if training failed.
    """
    args = _parser().parse_args(argv)

    if args.verbose:
        level = logging.DEBUG
    elif args.quiet:
        level = logging.WARNING
    else:
        level = logging.INFO
    logging.basicConfig(format=LOG_FORMAT, level=level)

    try:
        return args.func(args)
    except TrainingError as err:
        logger.error(f"training failed: {err}")
        return EXIT_TRAINING
    except (ConfigError, ValueError, FileNotFoundError, KeyError) as err:
        print(f"mmdbn: error: {err}", file=sys.stderr)
        return EXIT_USAGE
