"""
Command-line front end: synthesise datasets, fine-tune the stabiliser,
evaluate checkpoints or the baseline, run sweeps and self-checks.

stdout carries data only (JSON or CSV); diagnostics go to stderr. Exit codes:
0 success, 2 invalid input or configuration, 3 numerical failure.

Usage:
    python -m apps.cli.stable_align synth -c cfg.json -o data/
    python -m apps.cli.stable_align finetune -c cfg.json --data data/ -o model.clm
    python -m apps.cli.stable_align eval --data data/ --model model.clm -o results/
    python -m apps.cli.stable_align sweep theta -c cfg.json -o theta.csv
"""

import argparse
import csv
import json
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional

from pydantic import ValidationError

from apps.diagnostics.oracles import pdc_oracle_report
from apps.errors import NumericalFailureError, StableAlignError
from apps.harness.config import ExperimentConfig, RunConfig, load_config
from apps.harness.evaluate import evaluate
from apps.harness.finetune import finetune, initial_model, write_history_csv
from apps.harness.loss_surface import (
    CURVE_COLUMNS, SURFACE_COLUMNS, export_loss_curves, export_loss_surface, write_loss_surface_csv,
)
from apps.harness.sequences import TEST_SPLIT, TRAIN_SPLIT, generate_dataset, load_dataset, save_dataset
from apps.harness.sweeps import (
    DEFAULT_GRID_DB, SWEEP_COLUMNS, SweepGridDB, SweepKind, format_sweep_table, robustness_sweep,
    sweep_losses, sweep_theta, sweep_theta_pdc, write_sweep_csv,
)
from apps.losses.jitter import DEFAULT_LAMBDA, DEFAULT_THETA, DEFAULT_XI, LossKind
from apps.metrics.report import write_metrics
from apps.postprocessing.decode import DecoderKind
from apps.postprocessing.pdc_decoder import DEFAULT_PDC_THRESHOLD, PDCConfig, PDCDecoder
from apps.stabilizer.adam import DEFAULT_LEARNING_RATE
from apps.stabilizer.checkpoint import load_checkpoint, save_checkpoint

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3

ORACLE_TOLERANCE = 1e-9
ORACLE_THRESHOLDS = [0.0, 0.1, 0.2, 0.4, 0.6]

# argparse dest -> dotted config key
OVERRIDE_KEYS = {
    "loss": "loss.kind",
    "decoder": "decoder.kind",
    "theta": "loss.theta",
    "theta_pdc": "decoder.threshold",
    "lam": "loss.lambda",
    "xi": "loss.xi",
    "lr": "optimizer.lr",
    "epochs": "optimizer.epochs",
    "seed": "seed",
}


def setup_logging(verbose: bool = False):
    """Configure logging settings."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format='%(asctime)s - %(levelname)s - %(message)s',
        stream=sys.stderr,
    )


def config_overrides(args: argparse.Namespace) -> Dict:
    """Dotted-key overrides for every flag the user actually passed."""
    overrides = {}
    for dest, key in OVERRIDE_KEYS.items():
        value = getattr(args, dest, None)
        if value is not None:
            overrides[key] = value
    return overrides


def read_experiment(args: argparse.Namespace) -> ExperimentConfig:
    return load_config(args.config, config_overrides(args))


def read_run(args: argparse.Namespace) -> RunConfig:
    """Experiment plus the output directory of commands whose ``-o`` is a directory."""
    return RunConfig(experiment=read_experiment(args), out_dir=Path(args.out or "."))


def emit(text: str):
    sys.stdout.write(text + "\n")
    sys.stdout.flush()


def cmd_synth(args: argparse.Namespace) -> int:
    run = read_run(args)
    config = run.experiment
    splits = {
        TRAIN_SPLIT: generate_dataset(config, TRAIN_SPLIT),
        TEST_SPLIT: generate_dataset(config, TEST_SPLIT),
    }
    manifest = save_dataset(run.out_dir, splits, config)
    emit(json.dumps({"manifest": str(manifest), "sequences": sum(len(s) for s in splits.values())}))
    return EXIT_OK


def cmd_finetune(args: argparse.Namespace) -> int:
    config = read_experiment(args)
    train = load_dataset(args.data, TRAIN_SPLIT)
    result = finetune(initial_model(config), train, config)
    out = Path(args.out)
    save_checkpoint(out, result.model)
    history_path = out.with_name(out.stem + "_history.csv")
    write_history_csv(history_path, result.history)
    logging.info(f"Loss history written to {history_path}")
    emit(json.dumps({"checkpoint": str(out), "history": str(history_path), "final_loss": result.final_loss}))
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    run = read_run(args)
    model = None if args.baseline else load_checkpoint(args.model)
    test = load_dataset(args.data, TEST_SPLIT)
    report = evaluate(model, test, run.experiment)
    logging.info("Evaluation summary:\n" + report.summary_table())
    if args.out:
        out_dir = run.out_dir
        out_dir.mkdir(parents=True, exist_ok=True)
        write_metrics(report, out_dir / "metrics.json", out_dir / "metrics.csv")
        logging.info(f"Metrics written to {out_dir}")
    emit(report.to_json())
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    config = read_experiment(args)
    kind = SweepKind(args.kind)
    grid_db = SweepGridDB(args.grid_db)
    if kind is SweepKind.THETA:
        rows = sweep_theta(args.values or grid_db.get_values(kind), config)
    elif kind is SweepKind.THETA_PDC:
        rows = sweep_theta_pdc(args.values or grid_db.get_values(kind), config)
    elif kind is SweepKind.LOSSES:
        grid = grid_db.get_loss_grid()
        rows = sweep_losses(grid["losses"], grid["decoders"], config)
    else:
        levels = grid_db.get_robustness_levels()
        rows = robustness_sweep(levels["noise_levels"], levels["blur_levels"], config)
    logging.info(f"{kind.value} sweep:\n" + format_sweep_table(rows))
    if args.out:
        write_sweep_csv(rows, args.out, SWEEP_COLUMNS[kind])
    writer = csv.DictWriter(sys.stdout, fieldnames=SWEEP_COLUMNS[kind], lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return EXIT_OK


def cmd_surface(args: argparse.Namespace) -> int:
    config = read_experiment(args)
    if args.curves:
        rows, columns = export_loss_curves(config.loss, args.resolution), CURVE_COLUMNS
    else:
        rows, columns = export_loss_surface(config.loss, args.resolution), SURFACE_COLUMNS
    if args.out:
        write_loss_surface_csv(rows, args.out, columns)
    writer = csv.DictWriter(sys.stdout, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    report = pdc_oracle_report(lambda heatmap, threshold: PDCDecoder(PDCConfig(threshold=threshold)).decode(heatmap),
                               ORACLE_THRESHOLDS, n_cases=args.cases, seed=args.seed or 0)
    if args.out:
        Path(args.out).write_text(report.to_json() + "\n", encoding="utf-8")
    emit(report.to_json())
    if report.max_abs_discrepancy > ORACLE_TOLERANCE:
        logging.error(f"PDC decoder disagrees with the oracle by {report.max_abs_discrepancy:.3e} "
                      f"(seed {report.worst_case_seed})")
        return EXIT_NUMERICAL
    return EXIT_OK


def common_parser() -> argparse.ArgumentParser:
    """Flags shared by every experiment sub-command; unset flags leave the config untouched."""
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument("-c", "--config", help="Experiment JSON/YAML file (default: built-in defaults)")
    parser.add_argument("--loss", choices=[k.value for k in LossKind],
                        help="Fine-tuning objective (default: jitter)")
    parser.add_argument("--decoder", choices=[k.value for k in DecoderKind],
                        help="Heatmap decoder (default: pdc)")
    parser.add_argument("--theta", type=float, help=f"Jitter clamp and Geman-McClure scale Θ (default: {DEFAULT_THETA})")
    parser.add_argument("--theta-pdc", dest="theta_pdc", type=float,
                        help=f"PDC threshold Θ_PDC (default: {DEFAULT_PDC_THRESHOLD})")
    parser.add_argument("--lambda", dest="lam", type=float, help=f"Pixel-term weight λ (default: {DEFAULT_LAMBDA})")
    parser.add_argument("--xi", type=float, help=f"Offset floor ξ of the modulation (default: {DEFAULT_XI})")
    parser.add_argument("--lr", type=float, help=f"Adam learning rate (default: {DEFAULT_LEARNING_RATE})")
    parser.add_argument("--epochs", type=int, help="Fine-tuning epochs (default: 30)")
    parser.add_argument("--seed", type=int, help="Root random seed (default: 0)")
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging on stderr")
    return parser


def sweep_epilog() -> str:
    lines = ["CSV columns:"]
    for kind, columns in SWEEP_COLUMNS.items():
        lines.append(f"  {kind.value}: {', '.join(columns)}")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    common = common_parser()
    parser = argparse.ArgumentParser(prog="stable_align",
                                     description="Stable facial landmark fine-tuning on synthetic heatmap sequences")
    subparsers = parser.add_subparsers(dest="command", required=True)

    synth = subparsers.add_parser("synth", parents=[common], help="Generate a train/test dataset")
    synth.add_argument("-o", "--out", required=True, help="Output dataset directory")
    synth.set_defaults(handler=cmd_synth)

    tune = subparsers.add_parser("finetune", parents=[common], help="Fine-tune the stabiliser")
    tune.add_argument("--data", required=True, help="Dataset directory written by synth")
    tune.add_argument("-o", "--out", required=True, help="Output .clm checkpoint; the loss history goes next to it")
    tune.set_defaults(handler=cmd_finetune)

    ev = subparsers.add_parser("eval", parents=[common], help="Evaluate a checkpoint or the baseline")
    ev.add_argument("--data", required=True, help="Dataset directory written by synth")
    target = ev.add_mutually_exclusive_group(required=True)
    target.add_argument("--model", help=".clm checkpoint to evaluate")
    target.add_argument("--baseline", action="store_true", help="Decode the backbone heatmaps directly")
    ev.add_argument("-o", "--out", help="Directory for metrics.json and metrics.csv")
    ev.set_defaults(handler=cmd_eval)

    sweep = subparsers.add_parser("sweep", parents=[common], help="Run a hyperparameter or robustness sweep",
                                  epilog=sweep_epilog(), formatter_class=argparse.RawDescriptionHelpFormatter)
    sweep.add_argument("kind", choices=[k.value for k in SweepKind], help="Sweep to run")
    sweep.add_argument("-o", "--out", help="Output CSV file")
    sweep.add_argument("--values", type=float, nargs="+", help="Grid values (default: from the grid database)")
    sweep.add_argument("--grid-db", dest="grid_db", default=str(DEFAULT_GRID_DB),
                       help=f"Sweep grid YAML database (default: {DEFAULT_GRID_DB.name})")
    sweep.set_defaults(handler=cmd_sweep)

    surface = subparsers.add_parser("surface", parents=[common], help="Export the jitter loss surface as CSV")
    surface.add_argument("--resolution", type=int, default=65, help="Samples per axis (default: 65)")
    surface.add_argument("--curves", action="store_true",
                         help="Export the modulation and Geman-McClure curves along one axis instead")
    surface.add_argument("-o", "--out", help="Output CSV file")
    surface.set_defaults(handler=cmd_surface)

    verify = subparsers.add_parser("verify", help="Check the PDC decoder against its reference oracle")
    verify.add_argument("--cases", type=int, default=1000, help="Random heatmaps to check (default: 1000)")
    verify.add_argument("--seed", type=int, default=0, help="Seed of the first case (default: 0)")
    verify.add_argument("-o", "--out", help="Output OracleReport JSON file")
    verify.add_argument("-v", "--verbose", action="store_true", help="Debug logging on stderr")
    verify.set_defaults(handler=cmd_verify)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """
    Parse arguments, run the selected command and map errors to exit codes.

    Returns:
        int: Process exit code.
    """
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose)
    try:
        return args.handler(args)
    except NumericalFailureError as exc:
        logging.error(f"Numerical failure: {exc}")
        return EXIT_NUMERICAL
    except ValidationError as exc:
        logging.error(f"Invalid configuration: {exc}")
        return EXIT_VALIDATION
    except (StableAlignError, FileNotFoundError, OSError, ValueError) as exc:
        logging.error(str(exc))
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
