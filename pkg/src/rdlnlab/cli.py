"""Command-line entry point: ``rdlnlab {generate,train,eval,curves}``.

Exit status is 0 on success, 1 for validation/configuration errors and 2 for
runtime failures.
"""

import argparse
import logging
import sys

from . import experiment
from .config import ExperimentConfig, load_config
from .errors import ConfigError, LoadError, ParameterError

log = logging.getLogger("rdlnlab")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value configuration file")
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("--out", help="override output_dir")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="rdlnlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    gen = sub.add_parser("generate", parents=[common], help="write hmm.txt and corpus.txt")
    gen.add_argument("--force", action="store_true", help="overwrite existing files")
    train = sub.add_parser("train", parents=[common], help="train one arm, checkpointing every epoch")
    train.add_argument("--arm", choices=(experiment.BASELINE, experiment.RDLN), required=True)
    ev = sub.add_parser("eval", parents=[common], help="CE and WER of a checkpoint on the corpus")
    group = ev.add_mutually_exclusive_group(required=True)
    group.add_argument("--checkpoint")
    group.add_argument("--oracle", action="store_true", help="use true emission posteriors")
    cur = sub.add_parser("curves", parents=[common], help="merge baseline and RDLN metrics")
    cur.add_argument("--baseline", help="baseline metrics file")
    cur.add_argument("--rdln", help="RDLN metrics file")
    return parser


def _config(args):
    overrides = {"seed": args.seed, "output_dir": args.out}
    if args.config:
        return load_config(args.config, **overrides)
    return ExperimentConfig(**{k: v for k, v in overrides.items() if v is not None})


def run(args):
    cfg = _config(args)
    if args.command == "generate":
        hmm, corpus = experiment.generate(cfg, force=args.force)
        print(f"wrote {experiment.hmm_path(cfg)} and {experiment.corpus_path(cfg)} "
              f"({len(corpus)} utterances, fingerprint {corpus.hmm_fingerprint})")
    elif args.command == "train":
        fn = experiment.train_baseline if args.arm == experiment.BASELINE else experiment.train_rdln
        rows = fn(cfg)
        for row in rows:
            print(row.to_line())
        print(f"wrote {experiment.metrics_path(cfg, args.arm)}")
    elif args.command == "eval":
        row = experiment.evaluate(cfg, args.checkpoint, args.oracle)
        print(row.to_line())
    elif args.command == "curves":
        experiment.curves(cfg, args.baseline, args.rdln)
        with open(experiment.curves_path(cfg), encoding="utf-8") as fh:
            sys.stdout.write(fh.read())


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        run(args)
    except (ConfigError, ParameterError, LoadError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        log.debug("runtime failure", exc_info=True)
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
