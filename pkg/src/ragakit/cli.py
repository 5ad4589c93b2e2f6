"""Command-line entry point: ``ragakit <command> ...``.

Exit codes: 0 ok, 2 usage, 3 data error, 4 numeric failure. Errors are
reported on stderr as ``error: <ErrorClass>: <message>``.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path

from . import models, pipeline
from .errors import DataError, RagakitError
from .evaluation import (
    ConfusionMatrix, PairMatrix, SAME_SWARA_PAIRS, accuracy, compare_pair_tables, pair_submatrix,
)

log = logging.getLogger("ragakit")


def cmd_synth(args) -> int:
    paths = pipeline.write_synthetic_audio(args.out, args.per_class, args.seed, args.seconds)
    print(f"wrote {len(paths)} clips under {args.out}")
    return 0


def cmd_extract(args) -> int:
    ds = pipeline.extract_features(args.audio, args.out, args.seed, args.group_by_recording)
    print(f"wrote {len(ds.ids)} rows to {args.out} (splits {ds.sizes()})")
    return 0


def cmd_render(args) -> int:
    ds = pipeline.render_images(args.audio, args.out, args.seed, args.group_by_recording)
    print(f"wrote {len(ds.ids)} images under {args.out} (splits {ds.sizes()})")
    return 0


def cmd_train(args) -> int:
    cfg = models.build(args.model).train_defaults
    over = {"seed": args.seed}
    if args.epochs is not None:
        over["epochs"] = args.epochs
    if args.batch_size is not None:
        over["batch_size"] = args.batch_size
    cfg = replace(cfg, **over)
    pipeline.train_model(args.model, args.data, args.out, cfg)
    report = json.loads(Path(args.out, "train_report.json").read_text())
    print(f"{args.model}: best val accuracy {max(report['val_accuracy']):.4f} "
          f"at epoch {report['best_epoch']}; weights in {args.out}")
    return 0


def cmd_eval(args) -> int:
    cm = pipeline.evaluate_model(args.run, args.data, args.split, args.out)
    print(f"{args.split} accuracy {accuracy(cm):.4f} over {cm.total} items")
    return 0


def _parse_named(items):
    named = []
    for item in items:
        name, sep, path = item.partition("=")
        if not sep:
            name, path = Path(item).parent.name or Path(item).stem, item
        named.append((name, path))
    return named


def cmd_compare(args) -> int:
    """Full matrices contribute accuracy and pair rates; 2x2 files one pair each."""
    tables: dict[str, dict] = {}
    accs: dict[str, float] = {}
    pair_keys = list(SAME_SWARA_PAIRS)
    for name, path in _parse_named(args.matrices):
        cm = ConfusionMatrix.load(path)
        per = tables.setdefault(name, {})
        if len(cm.labels) == 2:
            key = tuple(cm.labels)
            per[key] = PairMatrix(cm.counts, key)
            if key not in pair_keys:
                pair_keys.append(key)
        else:
            accs[name] = accuracy(cm)
            for a, b in SAME_SWARA_PAIRS:
                if a in cm.labels and b in cm.labels:
                    per[(a, b)] = pair_submatrix(cm, a, b)
    report = compare_pair_tables(tables, accs, pair_keys)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(report.to_json())
    print(report.to_json() if args.json else report.to_text())
    return 0


def cmd_run(args) -> int:
    if args.manifest:
        m = pipeline.ExperimentManifest.load(args.manifest)
    else:
        overrides = {}
        for name in args.model or models.MODEL_NAMES:
            over = {}
            if args.epochs is not None:
                over["epochs"] = args.epochs
            if args.batch_size is not None:
                over["batch_size"] = args.batch_size
            if over:
                overrides[name] = over
        m = pipeline.ExperimentManifest(
            out=args.out, source=args.source, seed=args.seed,
            models=list(args.model or models.MODEL_NAMES), per_class=args.per_class,
            group_by_recording=args.group_by_recording, overrides=overrides,
        )
    log.info("manifest: %s", json.dumps(asdict(m)))
    report, _, timings = pipeline.run_experiment(m)
    print(report.to_text())
    print(f"total {timings['total']:.1f} s; outputs in {m.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ragakit", description="Raga classification experiments.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True, group=False):
        if seed:
            sp.add_argument("--seed", type=int, default=0)
        if group:
            sp.add_argument("--group-by-recording", action="store_true",
                            help="keep all segments of one recording in the same split")

    sp = sub.add_parser("synth", help="write a synthetic raga corpus as WAVs")
    sp.add_argument("--out", required=True)
    sp.add_argument("--per-class", type=int, default=60)
    sp.add_argument("--seconds", type=float, default=5.0)
    common(sp)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("extract", help="30-feature CSV from <raga>/<clip>.wav")
    sp.add_argument("--audio", required=True)
    sp.add_argument("--out", required=True, help="CSV path")
    common(sp, group=True)
    sp.set_defaults(func=cmd_extract)

    sp = sub.add_parser("render", help="spectrogram PNG tree from <raga>/<clip>.wav")
    sp.add_argument("--audio", required=True)
    sp.add_argument("--out", required=True, help="image root")
    common(sp, group=True)
    sp.set_defaults(func=cmd_render)

    sp = sub.add_parser("train", help="train one model")
    sp.add_argument("--model", required=True, choices=models.MODEL_NAMES)
    sp.add_argument("--data", required=True, help="feature CSV or image root")
    sp.add_argument("--out", required=True, help="run directory")
    sp.add_argument("--epochs", type=int)
    sp.add_argument("--batch-size", type=int)
    common(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("eval", help="confusion matrix of a trained run")
    sp.add_argument("--run", required=True)
    sp.add_argument("--data", help="defaults to the data the run was trained on")
    sp.add_argument("--split", default="test", choices=("train", "val", "test"))
    sp.add_argument("--out", help="CSV path (default <run>/confusion.csv)")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("compare", help="accuracy and same-swara pair table")
    sp.add_argument("matrices", nargs="+", metavar="[MODEL=]CSV",
                    help="full confusion matrices or 2x2 pair matrices")
    sp.add_argument("--out", help="write the JSON report here")
    sp.add_argument("--json", action="store_true", help="print JSON instead of a table")
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("run", help="whole experiment from a manifest or flags")
    sp.add_argument("--manifest", help="JSON manifest; takes precedence over flags")
    sp.add_argument("--out", default="experiment")
    sp.add_argument("--source", default="synthetic", help="'synthetic' or a WAV directory")
    sp.add_argument("--model", action="append", choices=models.MODEL_NAMES,
                    help="repeatable; default all four")
    sp.add_argument("--per-class", type=int, default=60)
    sp.add_argument("--epochs", type=int)
    sp.add_argument("--batch-size", type=int)
    common(sp, group=True)
    sp.set_defaults(func=cmd_run)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except RagakitError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return DataError.exit_code
    except ValueError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
