"""``hifloc`` command line.

Exit codes: 0 success, 1 total failure (or any failure under ``--strict``),
2 configuration / input-schema error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import io, pipeline
from .config import load_config
from .errors import ConfigError, HifError, MissingLabel, SchemaError

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hifloc", description="HIF localization from piecewise V-I fits")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="generate a labelled trajectory dataset")
    s.add_argument("--config")
    s.add_argument("--out", required=True)

    s = sub.add_parser("ingest", help="validate an on-disk trajectory dataset")
    s.add_argument("--data", required=True, help="dataset directory")
    s.add_argument("--manifest", help="manifest path (default: <data>/manifest.jsonl)")

    s = sub.add_parser("fit", help="piecewise-fit every trajectory and emit features")
    s.add_argument("--config")
    s.add_argument("--data", required=True)
    s.add_argument("--manifest")
    s.add_argument("--out", required=True)
    s.add_argument("--mode", choices=("linear", "quadratic"))
    s.add_argument("--strict", action="store_true", help="abort on the first failed trajectory")

    s = sub.add_parser("train", help="train the multiclass SVM and report on a held-out split")
    s.add_argument("--config")
    s.add_argument("--features", required=True)
    s.add_argument("--out", required=True)

    s = sub.add_parser("eval", help="evaluate a saved model on a feature CSV")
    s.add_argument("--model", required=True)
    s.add_argument("--features", required=True)
    s.add_argument("--out")

    s = sub.add_parser("plot-data", help="overlay CSV of a trajectory and its fit")
    s.add_argument("--trajectory", required=True)
    s.add_argument("--fit", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--lower-branch", action="store_true", help="plot the extracted lower branch")
    s.add_argument("--config")
    return p


def _print(obj):
    print(json.dumps(obj, sort_keys=True, indent=1))


def run(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "simulate":
            config = load_config(args.config)
            manifest = pipeline.cmd_simulate(config, args.out)
            _print({"manifest": str(manifest)})
        elif args.command == "ingest":
            summary = pipeline.cmd_ingest(args.data, args.manifest)
            summary.pop("trajectories")
            _print(summary)
        elif args.command == "fit":
            config = load_config(args.config).with_mode(args.mode)
            trajs = io.read_dataset(args.data, args.manifest)
            summary = pipeline.cmd_fit(trajs, config, args.out, strict=args.strict)
            _print({"fitted": summary.n_ok, "failed": summary.n_failed})
            if summary.n_ok == 0:
                return EXIT_FAIL
        elif args.command == "train":
            config = load_config(args.config)
            _, report = pipeline.cmd_train(args.features, config, args.out)
            _print({"accuracy": report["accuracy"], "n_test": report["n_test"]})
        elif args.command == "eval":
            report = pipeline.cmd_eval(args.model, args.features, args.out)
            _print(report if args.out is None else {"accuracy": report["accuracy"]})
        elif args.command == "plot-data":
            config = load_config(args.config)
            prep = config.raw["prep"]
            traj = io.read_trajectory_csv(args.trajectory)
            fit_doc = json.loads(Path(args.fit).read_text())
            pipeline.cmd_plot_data(traj, fit_doc, args.out, args.lower_branch,
                                   prep["n_bins"], prep["min_loop_extent"])
    except (ConfigError, SchemaError, MissingLabel) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (HifError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
