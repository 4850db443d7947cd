"""Command-line entry point: fine-tune and emit a MetricsReport JSON."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .train import TrainJob, finetune


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ip-train", description=__doc__)
    parser.add_argument("--mode", choices=["encoder", "seq2seq"], required=True)
    parser.add_argument("--train", required=True, help="training dialogs (JSON lines)")
    parser.add_argument("--test", required=True, help="test dialogs (JSON lines)")
    parser.add_argument("--dev", default=None, help="optional dev dialogs (JSON lines)")
    parser.add_argument("--report", required=True, help="output MetricsReport JSON path")
    parser.add_argument("--epochs", type=int, default=3)
    parser.add_argument("--batch-size", type=int, default=16)
    parser.add_argument("--learning-rate", type=float, default=3e-3)
    parser.add_argument("--rng-seed", type=int, default=0)
    parser.add_argument("--output-dir", default=None, help="where to save model weights and vocab")
    parser.add_argument("--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    job = TrainJob(
        mode=args.mode,
        train_path=args.train,
        test_path=args.test,
        dev_path=args.dev,
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
        rng_seed=args.rng_seed,
        output_dir=args.output_dir,
    )
    try:
        report = finetune(job)
    except Exception as exc:
        logging.getLogger("ip_train").error("%s", exc)
        if args.verbose:
            raise
        return 2
    with open(args.report, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2)
        fh.write("\n")
    print(json.dumps({"f1_micro": report.f1_micro, "f1_macro": report.f1_macro,
                      "precision": report.precision}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
