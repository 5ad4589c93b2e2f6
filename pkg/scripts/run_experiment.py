#!/usr/bin/env python3
"""Desk-scale raga experiment: synthetic corpus -> features/images -> four models.

    python3 scripts/run_experiment.py --out runs/desk
    python3 scripts/run_experiment.py --manifest my_manifest.json

Prints the accuracy / same-swara pair table next to the reference figures
and writes everything under --out (see ragakit.pipeline for the layout).
"""

import argparse
import json
import logging
import sys
from pathlib import Path

from ragakit.evaluation import SAME_SWARA_PAIRS
from ragakit.models import MODEL_NAMES
from ragakit.pipeline import ExperimentManifest, run_experiment
from ragakit.reference_results import PAIR_RATES_PERCENT, TEST_ACCURACY_PERCENT


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--manifest")
    p.add_argument("--out", default="runs/desk")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--per-class", type=int, default=60)
    p.add_argument("--model", action="append", choices=MODEL_NAMES)
    p.add_argument("--epochs", type=int, help="cap every model's epochs (quick runs)")
    args = p.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(name)s: %(message)s")

    if args.manifest:
        m = ExperimentManifest.load(args.manifest)
    else:
        names = args.model or list(MODEL_NAMES)
        over = {n: {"epochs": args.epochs} for n in names} if args.epochs else {}
        m = ExperimentManifest(out=args.out, seed=args.seed, models=names,
                               per_class=args.per_class, overrides=over)
    report, _, timings = run_experiment(m)

    print(report.to_text())
    print("\nreference (CMD corpus, full training):")
    keys = [f"{a}/{b}" for a, b in SAME_SWARA_PAIRS]
    print(f"{'model':<10}{'accuracy':>10}" + "".join(f"{k:>11}" for k in keys))
    for name in m.models:
        rates = "".join(f"{PAIR_RATES_PERCENT[name][pair]:>10.2f}%" for pair in SAME_SWARA_PAIRS)
        print(f"{name:<10}{TEST_ACCURACY_PERCENT[name]:>9.2f}%{rates}")
    print("\ntimings: " + json.dumps({k: round(v, 1) for k, v in timings.items()}))
    print(f"outputs in {Path(m.out).resolve()}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
