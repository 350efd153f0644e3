"""Command-line entry point: prepare-data, train-mate, train-masc, predict,
evaluate, ablate.

Every run is described by one JSON config file (see RunConfig) plus a few
flag overrides. Image files resolve against --image-root or, failing
that, the MABSA_DATA_ROOT environment variable.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from . import corpus, harness
from .harness import (Checkpoint, ImageProvider, RunConfig,
                      build_masc_training_set, evaluate, gold_pairs, predict,
                      train_masc, train_mate)
from .metrics import read_pairs_jsonl, write_pairs_jsonl


def _load_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    overrides = {}
    for name in ("epochs", "seed", "learning_rate", "batch_size", "beta",
                 "matcher_threshold"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    if overrides:
        cfg = replace(cfg, **overrides)
    flag_overrides = {}
    for name in ("no_tba", "no_pipeline", "shared_encoder", "no_image"):
        if getattr(args, name, False):
            flag_overrides[name] = True
    if flag_overrides:
        cfg = replace(cfg, ablations=replace(cfg.ablations, **flag_overrides))
    return cfg


def _add_config_args(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON run config; defaults apply if omitted")
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--beta", type=float)
    p.add_argument("--matcher-threshold", dest="matcher_threshold", type=float)
    p.add_argument("--no-tba", dest="no_tba", action="store_true")
    p.add_argument("--no-pipeline", dest="no_pipeline", action="store_true")
    p.add_argument("--shared-encoder", dest="shared_encoder", action="store_true")
    p.add_argument("--no-image", dest="no_image", action="store_true")


def _provider(cfg: RunConfig, args) -> ImageProvider:
    root = getattr(args, "image_root", None)
    return ImageProvider(cfg.encoder_config(), root=root)


def cmd_prepare_data(args) -> int:
    split = corpus.import_legacy_format(args.input, image_dir=args.images,
                                        name=args.name)
    corpus.export_canonical(split, args.output)
    print(f"wrote {len(split.samples)} samples "
          f"({split.stats.aspects} aspects) to {args.output}")
    if args.check_reference:
        problems = corpus.check_reference_stats(split, args.check_reference)
        if problems:
            for p in problems:
                print(f"reference mismatch: {p}", file=sys.stderr)
            return 1
        print(f"stats match the published {args.check_reference} counts")
    return 0


def cmd_train_mate(args) -> int:
    cfg = _load_config(args)
    train_split = corpus.load_canonical(args.train)
    dev_split = corpus.load_canonical(args.dev, name="dev")
    resume = Checkpoint.load(args.resume) if args.resume else None
    ckpt = train_mate(cfg, train_split, dev_split, resume_from=resume)
    ckpt.save(args.out)
    print(f"extractor checkpoint saved to {args.out} "
          f"(best dev F1 {ckpt.best_metric:.4f})")
    return 0


def cmd_train_masc(args) -> int:
    cfg = _load_config(args)
    train_split = corpus.load_canonical(args.train)
    dev_split = corpus.load_canonical(args.dev, name="dev")
    mate_ckpt = Checkpoint.load(args.mate_ckpt)
    provider = _provider(cfg, args)
    examples = build_masc_training_set(cfg, mate_ckpt, train_split)
    resume = Checkpoint.load(args.resume) if args.resume else None
    ckpt = train_masc(cfg, examples, dev_split, mate_ckpt, provider,
                      resume_from=resume)
    ckpt.save(args.out)
    print(f"classifier checkpoint saved to {args.out} "
          f"(best dev accuracy {ckpt.best_metric:.4f})")
    return 0


def cmd_predict(args) -> int:
    cfg = _load_config(args)
    split = corpus.load_canonical(args.input, name=args.split_name)
    mate_ckpt = Checkpoint.load(args.mate_ckpt)
    masc_ckpt = Checkpoint.load(args.masc_ckpt)
    pairs = predict(cfg, mate_ckpt, masc_ckpt, split, _provider(cfg, args))
    write_pairs_jsonl(pairs, args.out)
    print(f"wrote {len(pairs)} prediction pairs to {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = _load_config(args)
    predictions = read_pairs_jsonl(args.pred)
    gold = gold_pairs(corpus.load_canonical(args.gold, name=args.split_name))
    report = evaluate(cfg, predictions, gold, task=args.task,
                      split_name=args.split_name, out_path=args.out)
    parts = [f"{args.task} {args.split_name}:"]
    if report["precision"] is not None:
        parts.append(f"P={report['precision']:.4f} R={report['recall']:.4f}")
    parts.append(f"F1={report['f1']:.4f}")
    if report["acc"] is not None:
        parts.append(f"Acc={report['acc']:.4f}")
    print(" ".join(parts))
    print(f"report written to {args.out}")
    return 0


def cmd_ablate(args) -> int:
    cfg = _load_config(args)
    train_split = corpus.load_canonical(args.train)
    eval_split = corpus.load_canonical(args.dev, name="dev")
    variants = args.variants.split(",") if args.variants else None
    betas = tuple(float(x) for x in args.beta_sweep.split(",")) if args.beta_sweep else ()
    batches = tuple(int(x) for x in args.batch_sweep.split(",")) if args.batch_sweep else ()
    table = harness.ablate(cfg, train_split, eval_split, args.out_dir,
                           provider=_provider(cfg, args), variants=variants,
                           beta_values=betas, batch_sizes=batches)
    for row in table["variants"]:
        print(f"{row['variant']:<22} F1={row['f1']:.3f} "
              f"P={row['precision']:.3f} R={row['recall']:.3f}")
    print(f"table and plots under {args.out_dir}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="mabsa",
        description="Two-stage multimodal aspect-based sentiment analysis")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare-data", help="convert a legacy 4-line file to JSONL")
    p.add_argument("--input", required=True)
    p.add_argument("--images", help="directory used to resolve image ids")
    p.add_argument("--output", required=True)
    p.add_argument("--name", choices=("train", "dev", "test"))
    p.add_argument("--check-reference", choices=("twitter15", "twitter17"))
    p.set_defaults(func=cmd_prepare_data)

    p = sub.add_parser("train-mate", help="train the aspect extractor")
    _add_config_args(p)
    p.add_argument("--train", required=True)
    p.add_argument("--dev", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--resume")
    p.set_defaults(func=cmd_train_mate)

    p = sub.add_parser("train-masc", help="train the sentiment classifier")
    _add_config_args(p)
    p.add_argument("--train", required=True)
    p.add_argument("--dev", required=True)
    p.add_argument("--mate-ckpt", dest="mate_ckpt", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--image-root", dest="image_root")
    p.add_argument("--resume")
    p.set_defaults(func=cmd_train_masc)

    p = sub.add_parser("predict", help="run the full pipeline over a split")
    _add_config_args(p)
    p.add_argument("--input", required=True)
    p.add_argument("--mate-ckpt", dest="mate_ckpt", required=True)
    p.add_argument("--masc-ckpt", dest="masc_ckpt", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--image-root", dest="image_root")
    p.add_argument("--split-name", dest="split_name", default="test")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="score predictions against gold")
    _add_config_args(p)
    p.add_argument("--task", choices=("mabsa", "mate", "masc"), default="mabsa")
    p.add_argument("--pred", required=True, help="prediction pairs JSONL")
    p.add_argument("--gold", required=True, help="canonical gold split JSONL")
    p.add_argument("--out", required=True, help="metrics report JSON")
    p.add_argument("--split-name", dest="split_name", default="test")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablate", help="run the ablation grid")
    _add_config_args(p)
    p.add_argument("--train", required=True)
    p.add_argument("--dev", required=True)
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.add_argument("--image-root", dest="image_root")
    p.add_argument("--variants", help="comma-separated variant names")
    p.add_argument("--beta-sweep", dest="beta_sweep")
    p.add_argument("--batch-sweep", dest="batch_sweep")
    p.set_defaults(func=cmd_ablate)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
