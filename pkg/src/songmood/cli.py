"""Command-line entry point.

    songmood <subcommand> [--config FILE] [--key value ...]

Exit status: 0 success, 1 usage/config error, 2 data error, 3 internal
invariant violation.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import fields

from .config import PipelineConfig, coerce, read_config_file, resolve
from .errors import ConfigError, DataError, InvariantError
from .pipeline import STEPS, Run

logger = logging.getLogger("songmood")

HELP = {
    "simulate": "generate a synthetic corpus (playlists, songs, lexicon, embeddings, truth, annotations)",
    "ingest": "parse playlists and songs, dedupe songs, write the train/test split",
    "score": "count co-occurrences, fit priors, compute BNPMI scores and labels",
    "train": "train per-mood bow / acoustic / hybrid models on the train split",
    "predict": "apply trained models to the test split",
    "evaluate": "precision / recall / F1 per mood against BNPMI labels",
    "sweep": "precision and recall of BNPMI >= tau over a range of tau",
    "agree": "Fleiss kappa, consensus, and BNPMI-vs-annotation report",
    "pipeline": "simulate, then run every step end to end",
}

FIELD_HELP = {
    "out": "output directory (all artifacts go below it)",
    "tau": "association threshold for Positive/Negative labels",
    "train_fraction": "fraction of songs assigned to train",
    "seed": "top-level seed; split/init/simulate streams derive from it",
    "include_zero_joint": "also score (song, mood) pairs that never co-occur",
    "strict": "abort on the first malformed input line",
    "class_weighting": "inverse-frequency class weights when training",
    "binary_models": "write models as binary instead of JSON",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="songmood", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", metavar="subcommand")
    for name, text in HELP.items():
        p = sub.add_parser(name, help=text, description=text)
        p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
        p.add_argument("--config", help="key=value config file")
        for f in fields(PipelineConfig):
            flag = "--" + f.name.replace("_", "-")
            p.add_argument(flag, dest=f.name, default=None, metavar=f.type.upper(),
                           help=f"{FIELD_HELP.get(f.name, f.name.replace('_', ' '))} (default: {f.default!r})")
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help()
            return 1
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        file_values = read_config_file(args.config) if args.config else {}
        flag_values = {f.name: coerce(f.name, getattr(args, f.name))
                       for f in fields(PipelineConfig) if getattr(args, f.name) is not None}
        cfg, sources = resolve(file_values, flag_values)
        cfg.validate()
        r = Run(cfg)
        STEPS[args.command](r)
        r.manifest(args.command, sources)
        return 0
    except ConfigError as exc:
        print(f"songmood: config error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"songmood: data error: {exc}", file=sys.stderr)
        return 2
    except InvariantError as exc:
        print(f"songmood: invariant violated: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"songmood: data error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # anything unexpected is an internal failure
        logger.exception("internal error")
        print(f"songmood: internal error: {exc}", file=sys.stderr)
        return 3


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
