"""Command-line entry point: gen-data | train | eval-order | retrieve | gradcheck.

Configuration precedence is flag > config file > default. Config files are
plain key=value lines mirroring TrainConfig; unknown keys are rejected.
Exit codes: 0 success, 1 validation error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import asdict, fields
from pathlib import Path

from . import evalkit, sampler, trainer

_INT_KEYS = {f.name for f in fields(trainer.TrainConfig)
             if f.type == "int"}
_FLOAT_KEYS = {f.name for f in fields(trainer.TrainConfig)
               if f.type == "float"}
_STR_KEYS = {f.name for f in fields(trainer.TrainConfig)
             if f.type == "str"}


class CliError(Exception):
    pass


def parse_config_file(path):
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in trainer.CONFIG_FIELDS:
            raise CliError(f"{path}:{lineno}: unknown config key {key!r}")
        values[key] = value
    return values


def _coerce(key, value):
    try:
        if key in _INT_KEYS:
            return int(value)
        if key in _FLOAT_KEYS:
            return float(value)
        return value
    except ValueError:
        raise CliError(f"config key {key!r}: cannot parse {value!r}")


def resolve_config(args):
    """Build a TrainConfig from defaults, then file values, then flags."""
    values = {}
    if getattr(args, "config", None):
        for key, raw in parse_config_file(args.config).items():
            values[key] = _coerce(key, raw)
    for key in trainer.CONFIG_FIELDS:
        flag = getattr(args, key.replace("-", "_"), None)
        if flag is not None:
            values[key] = flag
    if "seed" not in values and os.environ.get("TCGL_SEED"):
        values["seed"] = int(os.environ["TCGL_SEED"])
    return trainer.TrainConfig(**values).validate()


def _add_config_flags(parser):
    parser.add_argument("--config", help="key=value config file")
    for f in fields(trainer.TrainConfig):
        kind = int if f.name in _INT_KEYS else float if f.name in _FLOAT_KEYS else str
        parser.add_argument(f"--{f.name.replace('_', '-')}", dest=f.name,
                            type=kind, default=None)


def _echo_config(config, out_dir=None):
    resolved = asdict(config)
    print("resolved configuration:")
    for key in sorted(resolved):
        print(f"  {key} = {resolved[key]}")
    if out_dir:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        with open(Path(out_dir) / "config.json", "w") as fh:
            json.dump(resolved, fh, indent=1)


def cmd_gen_data(args):
    config_seed = args.seed
    if config_seed is None:
        config_seed = int(os.environ.get("TCGL_SEED", 7))
    sampler.generate_dataset(args.out, args.num_videos, args.num_classes,
                             config_seed, frames=args.frames)
    print(f"wrote {args.num_videos} videos ({args.num_classes} classes) to {args.out}")
    return 0


def cmd_train(args):
    config = resolve_config(args)
    if not config.data_dir:
        raise CliError("train needs --data-dir (or data_dir in the config file)")
    _echo_config(config, config.out_dir or None)

    def log(row):
        print(f"epoch {row['epoch']:4d}  J {row['total_loss']:.4f}  "
              f"J_g {row['graph_loss']:.4f}  J_o {row['order_loss']:.4f}  "
              f"train_acc {row['train_acc']:.3f}  val_acc {row['val_acc']:.3f}")

    ckpt, rows = trainer.train(config, resume_from=args.resume, log=log)
    if config.out_dir:
        print(f"checkpoints and metrics.csv under {config.out_dir}")
    return 0


def cmd_eval_order(args):
    ckpt = trainer.load_checkpoint(args.ckpt)
    _, videos = sampler.load_dataset(args.data_dir or ckpt.config.data_dir)
    acc = evalkit.eval_order(ckpt, videos)
    print(f"order prediction accuracy: {acc:.4f} over {len(videos)} videos "
          f"(chance {evalkit.chance_level(ckpt.config.n):.4f})")
    return 0


def cmd_retrieve(args):
    ckpt = trainer.load_checkpoint(args.ckpt)
    config = ckpt.config
    manifest, videos = sampler.load_dataset(args.data_dir or config.data_dir)
    model = trainer.restore_model(ckpt, videos[0].channels)
    train_idx, val_idx = trainer.split_train_val(manifest, config)
    gallery = evalkit.build_gallery([videos[i] for i in train_idx], model, config,
                                    split="train", backbone_only=args.backbone_only)
    queries = evalkit.build_gallery([videos[i] for i in val_idx], model, config,
                                    split="test", backbone_only=args.backbone_only)
    ks = [int(k) for k in args.k.split(",")]
    table = evalkit.retrieval_table(queries, gallery, ks)
    writer = csv.writer(sys.stdout)
    writer.writerow([f"top{k}" for k in ks])
    writer.writerow([f"{table[k]:.4f}" for k in ks])
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"top{k}" for k in ks])
            w.writerow([f"{table[k]:.4f}" for k in ks])
    return 0


def cmd_gradcheck(args):
    report = evalkit.verify_all(seed=args.seed if args.seed is not None else 0)
    for line in report.lines():
        print(line)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["check", "passed", "measured", "threshold"])
            for c in report.checks:
                w.writerow([c.name, int(c.passed), c.measured, c.threshold])
    return 0 if report.all_passed else 2


def build_parser():
    parser = argparse.ArgumentParser(prog="tcgl")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write a synthetic video dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--num-videos", type=int, default=200)
    p.add_argument("--num-classes", type=int, default=10)
    p.add_argument("--frames", type=int, default=64)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(fn=cmd_gen_data)

    p = sub.add_parser("train", help="run the joint training loop")
    _add_config_flags(p)
    p.add_argument("--resume", help="checkpoint directory to continue from")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval-order", help="order accuracy of a checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data-dir")
    p.set_defaults(fn=cmd_eval_order)

    p = sub.add_parser("retrieve", help="nearest-neighbor retrieval accuracy")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data-dir")
    p.add_argument("--k", default="1,5,10,20,50")
    p.add_argument("--backbone-only", action="store_true")
    p.add_argument("--out", help="also write the CSV here")
    p.set_defaults(fn=cmd_retrieve)

    p = sub.add_parser("gradcheck", help="run the verification suites")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", help="write a machine-readable report CSV")
    p.set_defaults(fn=cmd_gradcheck)

    return parser


def run(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return args.fn(args)
    except (CliError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(run())
