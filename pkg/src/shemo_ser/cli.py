"""``shemo-ser`` command-line interface.

Exit codes: 0 success, 1 configuration or usage error, 2 data error,
3 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from shemo_ser import __version__

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3

logger = logging.getLogger("shemo_ser")


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="experiment YAML")
    common.add_argument("--seed", type=int, help="override the run seed")
    common.add_argument("--workers", type=int, help="override the worker count")
    common.add_argument("--out", help="override output_dir")

    p = argparse.ArgumentParser(prog="shemo-ser", description="Speech emotion recognition on wav2vec2 layer features.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("prepare", parents=[common], help="scan/synthesize the corpus and normalize audio")
    sub.add_parser("extract", parents=[common], help="cache one encoder-layer map per clip")
    sub.add_parser("train", parents=[common], help="split, train and checkpoint")
    ev = sub.add_parser("evaluate", parents=[common], help="score a checkpoint and write the report")
    ev.add_argument("--split", default="auto", help="train, val, test, or auto (test, else val)")
    ev.add_argument("--checkpoint", help="checkpoint to score (default: <out>/checkpoints/best.ckpt)")
    sub.add_parser("report", parents=[common], help="re-render report files from saved metrics")
    pr = sub.add_parser("predict", help="classify audio files with a checkpoint")
    pr.add_argument("--checkpoint", required=True)
    pr.add_argument("audio", nargs="+")
    return p


def _run(args) -> int:
    from shemo_ser import pipeline
    from shemo_ser.config import load_config

    if args.command == "predict":
        for r in pipeline.predict_files(args.checkpoint, args.audio):
            print(json.dumps(r))
        return EXIT_OK

    cfg = load_config(args.config, seed=args.seed, workers=args.workers, output_dir=args.out)
    if args.command == "prepare":
        m = pipeline.prepare(cfg)
        print(f"prepared {len(m)} clips -> {cfg.out / pipeline.MANIFEST_NAME}")
    elif args.command == "extract":
        s = pipeline.extract(cfg)
        print(f"extracted {s.extracted} feature maps ({s.cached} already cached) -> {cfg.feature_cache_dir}")
    elif args.command == "train":
        _, history = pipeline.train_stage(cfg)
        best = max((r.val_acc for r in history.records), default=None)
        tail = f", best val_acc {best:.4f}" if best is not None else ""
        print(f"trained {len(history)} epochs{tail} -> {cfg.out / pipeline.CHECKPOINT_DIR}")
    elif args.command == "evaluate":
        r = pipeline.evaluate_stage(cfg, args.split, args.checkpoint)
        print(f"{r.split}: accuracy {r.accuracy:.4f}, weighted F1 {r.weighted_f1:.4f} -> {cfg.out / pipeline.REPORT_DIR}")
    elif args.command == "report":
        files = pipeline.report_stage(cfg)
        print(f"wrote {len(files)} report files -> {cfg.out / pipeline.REPORT_DIR}")
    return EXIT_OK


def exit_code_for(exc: BaseException) -> int:
    from shemo_ser.config import ConfigError
    from shemo_ser.corpus.audio import AudioDecodeError
    from shemo_ser.corpus.manifest import ManifestError
    from shemo_ser.corpus.split import SplitError
    from shemo_ser.features.cache import CacheError
    from shemo_ser.features.extractors import ExtractorError
    from shemo_ser.models.base import ModelSpecError
    from shemo_ser.models.checkpoint import CheckpointError
    from shemo_ser.pipeline import DataError

    if isinstance(exc, (ConfigError, ModelSpecError)):
        return EXIT_CONFIG
    if isinstance(exc, (DataError, AudioDecodeError, ManifestError, SplitError, CacheError, CheckpointError,
                        ExtractorError, FileNotFoundError)):
        return EXIT_DATA
    return EXIT_INTERNAL


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return _run(args)
    except Exception as exc:  # noqa: BLE001 - mapped to an exit code
        code = exit_code_for(exc)
        if code == EXIT_INTERNAL:
            logger.exception("internal error")
        print(f"error: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
