"""Command line entry point: ``medcorrupt <subcommand> ...``.

Exit codes: 0 success, 1 usage, 2 data error, 3 incomplete data.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .augment import AugmentationPolicy, sample
from .core import ImageBuffer, MedCorruptError
from .kernels import apply_params
from .metrics import IncompleteError
from .pipeline import (
    PartialOutputError,
    describe_dataset,
    evaluate,
    gallery,
    generate_corrupted_set,
    load_image,
    save_png,
    verify_manifest,
    write_report,
)
from .registry import load_registry

CONFIG_ENV = "MEDCORRUPT_CONFIG"
EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INCOMPLETE = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _csv_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _severities(text: str) -> list[int]:
    try:
        return [int(t) for t in _csv_list(text)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"severities must be integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="medcorrupt", description=__doc__.splitlines()[0])
    p.add_argument("--config", default=None, help=f"registry override TOML (default: ${CONFIG_ENV} or built-in)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("corrupt", help="generate the corrupted test set of one dataset")
    c.add_argument("--dataset", required=True)
    c.add_argument("--input", required=True, help="directory holding index.csv and the clean images")
    c.add_argument("--output", required=True)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--corruptions", type=_csv_list, default=None, help="comma-separated subset")
    c.add_argument("--severities", type=_severities, default=None, help="comma-separated subset of 1..5")
    c.add_argument("--workers", type=int, default=1)
    c.add_argument("--resume", action="store_true", help="continue an interrupted run")

    e = sub.add_parser("evaluate", help="BE / rBE of a model against a baseline")
    e.add_argument("--dataset", required=True)
    e.add_argument("--input", required=True, help="model prediction table (CSV)")
    e.add_argument("--baseline", required=True, help="baseline prediction table (CSV)")
    e.add_argument("--output", default=None, help="directory for report.json and report.{md,csv}")
    e.add_argument("--format", choices=("csv", "md"), default="md")
    e.add_argument("--threshold", type=float, default=0.5, help="multi-label decision threshold")

    a = sub.add_parser("augment", help="apply one sampled augmentation to one image")
    a.add_argument("--dataset", required=True)
    a.add_argument("--input", required=True)
    a.add_argument("--output", required=True)
    a.add_argument("--seed", type=int, default=0)

    r = sub.add_parser("registry", help="print corruption sets and parameter tables")
    r.add_argument("--dataset", default=None)

    g = sub.add_parser("gallery", help="contact sheet of every corruption at every severity")
    g.add_argument("--dataset", required=True)
    g.add_argument("--input", required=True)
    g.add_argument("--output", required=True)
    g.add_argument("--seed", type=int, default=0)

    v = sub.add_parser("verify", help="recompute manifest hashes of a generated tree")
    v.add_argument("--input", required=True, help="output directory of a corrupt run")
    return p


def _run(args) -> int:
    reg = load_registry(args.config or os.environ.get(CONFIG_ENV) or None)
    cmd = args.command
    if cmd == "corrupt":
        m = generate_corrupted_set(args.input, args.dataset, args.seed, args.output, args.corruptions,
                                   args.severities, reg, workers=args.workers, resume=args.resume)
        print(f"wrote {len(m.records)} images and manifest to {args.output}")
    elif cmd == "evaluate":
        report = evaluate(args.input, args.baseline, args.dataset, reg, args.threshold)
        if args.output:
            for path in write_report(report, args.output, args.format):
                print(f"wrote {path}", file=sys.stderr)
        if args.format == "md":
            print(report.to_markdown(), end="")
        else:
            for row in report.table_rows():
                print(",".join(str(row[k]) for k in ("scope", "name", "BE", "rBE")))
    elif cmd == "augment":
        profile = reg.profile(args.dataset)
        img = load_image(args.input, profile.channels)
        policy = AugmentationPolicy.from_seed(args.dataset, args.seed, reg)
        drawn = sample(policy)
        out: ImageBuffer = img if drawn.is_identity else apply_params(img, drawn.corruption_id, drawn.params, policy.rng)
        save_png(out, args.output)
        print(json.dumps({"corruption": drawn.corruption_id, "params": drawn.params}))
    elif cmd == "registry":
        ids = [args.dataset] if args.dataset else list(reg.dataset_ids)
        print("\n".join(describe_dataset(d, reg) for d in ids), end="")
    elif cmd == "gallery":
        profile = reg.profile(args.dataset)
        img = load_image(args.input, profile.channels)
        save_png(gallery(img, args.dataset, args.seed, reg), args.output)
        print(f"wrote {len(profile.corruptions)}x5 gallery to {args.output}")
    elif cmd == "verify":
        result = verify_manifest(args.input)
        for problem in result.problems:
            print(problem)
        print(f"{'OK' if result.ok else 'FAILED'}: {result.checked} records checked")
        return EXIT_OK if result.ok else EXIT_DATA
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _run(args)
    except (IncompleteError, PartialOutputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INCOMPLETE
    except MedCorruptError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
