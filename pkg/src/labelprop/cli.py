"""Command-line interface.

Every subcommand takes ``--config PATH`` (a JSON document, see README) plus a
few overrides; flags win over the config file, which wins over defaults.
Set ``LABELPROP_LOG`` (DEBUG, INFO, ...) to change log verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import jsonio
from .annotations import annotations_from_store, load_annotations
from .pipeline import (
    PipelineConfig,
    cmd_eval,
    cmd_label,
    cmd_perturb,
    cmd_report_savings,
    cmd_synth,
    cmd_train,
    load_counts,
)
from .savings import TimeModel
from .store import load_store


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH", help="pipeline config (JSON); defaults apply when omitted")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--spaces", help="comma-separated embedding spaces to use (default: all in the store)")
    p.add_argument("--out", metavar="DIR", help="output directory (overrides paths.output)")
    p.add_argument("--store", metavar="PATH", help="embedding store file (overrides paths.store)")
    p.add_argument("--heads", metavar="DIR", help="directory of trained heads (overrides paths.heads)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="labelprop", description="Hopfield-ensemble label propagation over crop embeddings.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic embedding store")
    _common(p)

    p = sub.add_parser("train", help="train one Hopfield head per space")
    _common(p)
    p.add_argument("--workers", type=int, help="heads trained concurrently")

    p = sub.add_parser("label", help="label proposals with the trained heads")
    _common(p)
    p.add_argument("--proposals", metavar="PATH", help="annotation set to label (default: crops of the label split)")
    p.add_argument("--output-file", metavar="PATH", help="labeled annotation file (default: OUT/labeled.json)")
    p.add_argument("--single-head", action="store_true", help="use only the first space instead of the ensemble")

    p = sub.add_parser("perturb", help="drop a seeded fraction of proposals")
    _common(p)
    p.add_argument("--input", metavar="PATH", help="annotation set to perturb (default: crops of the label split)")
    p.add_argument("--drop-rate", type=float, help="fraction of proposals to drop, in [0, 1]")
    p.add_argument("--relabel-noise", type=float, help="fraction of labeled annotations moved to another class")
    p.add_argument("--output-file", metavar="PATH", help="perturbed annotation file (default: OUT/proposals.json)")

    p = sub.add_parser("eval", help="score labeled annotations against ground truth")
    _common(p)
    p.add_argument("--labeled", metavar="PATH", help="labeled annotation set (default: OUT/labeled.json)")
    p.add_argument("--truth", metavar="PATH", help="ground-truth annotation set (default: crops of the label split)")
    p.add_argument("--name", default="Ensemble", help="row label in the printed tables")

    p = sub.add_parser("report-savings", help="annotation time saved from retrieval counts")
    p.add_argument("--config", metavar="PATH", help="pipeline config; only time_model is used")
    p.add_argument("--counts", metavar="PATH", required=True, help="JSON counts per row and complexity")
    p.add_argument("--out", metavar="PATH", help="write the machine-readable report here")
    return parser


def _config(args) -> PipelineConfig:
    cfg = PipelineConfig.load(args.config) if getattr(args, "config", None) else PipelineConfig()
    over = {
        "seed": getattr(args, "seed", None),
        "spaces": args.spaces.split(",") if getattr(args, "spaces", None) else None,
        "output": getattr(args, "out", None),
        "store": getattr(args, "store", None),
        "heads": getattr(args, "heads", None),
        "workers": getattr(args, "workers", None),
        "drop_rate": getattr(args, "drop_rate", None),
        "relabel_noise": getattr(args, "relabel_noise", None),
    }
    if getattr(args, "single_head", False):
        over["ensemble"] = False
    return cfg.override(**over)


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "report-savings":
        cfg = PipelineConfig.load(args.config) if args.config else PipelineConfig()
        tm = TimeModel(cfg.time_model) if cfg.time_model else TimeModel()
        _, text = cmd_report_savings(load_counts(args.counts), tm, args.out)
        sys.stdout.write(text)
        return 0

    cfg = _config(args)
    if args.command == "synth":
        print(json.dumps(cmd_synth(cfg), indent=2))
    elif args.command == "train":
        reports = cmd_train(cfg)
        for space, r in reports.items():
            print(f"{space}: epochs={len(r.epochs)} final_acc={r.final.accuracy:.4f} final_loss={r.final.total:.6f}")
    elif args.command == "label":
        proposals = load_annotations(args.proposals) if args.proposals else None
        labeled = cmd_label(cfg, proposals, out_path=args.output_file)
        print(f"labeled {len(labeled.annotations)} proposals")
    elif args.command == "perturb":
        annotations = load_annotations(args.input) if args.input else None
        result = cmd_perturb(cfg, annotations, out_path=args.output_file)
        print(f"kept {len(result.annotations)} proposals")
    elif args.command == "eval":
        labeled = load_annotations(args.labeled or cfg.path("labeled.json"))
        if args.truth:
            truth = load_annotations(args.truth)
        else:
            truth = annotations_from_store(load_store(cfg.store), cfg.label_split, with_labels=True)
        sys.stdout.write(cmd_eval(cfg, labeled, truth, label=args.name).text)
    return 0


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("LABELPROP_LOG", "WARNING").upper(), format="%(levelname)s %(name)s: %(message)s")
    try:
        return run(argv)
    except (ValueError, KeyError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else str(exc)
        sys.stderr.write(jsonio.dumps({"error": type(exc).__name__, "message": str(msg)}) + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
