"""Command-line surface: train / eval / synth / gradcheck / report.

Exit codes are a stable contract for scripting:
0 success, 1 verification or training failure, 2 usage error,
3 I/O or data-format error.
"""

from __future__ import annotations

import argparse
import os
import sys

from .checkpoint import (
    adam_from_checkpoint,
    checkpoint_from_model,
    load_checkpoint,
    model_from_checkpoint,
    save_checkpoint,
)
from .config import RunConfig, parse_config
from .datasets import SynthConfig, build_synth, write_synth
from .errors import (
    CheckpointError,
    DatasetError,
    ShapeError,
    TrainingError,
    UndefinedMetricError,
    UsageError,
)
from .gradcheck import run_gradcheck
from .report import ablation_report, format_triple
from .train import evaluate_split, prepare_data, train

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_USAGE = 2
EXIT_DATA = 3


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--dataset", help="'synth' or a directory of WAV + annotation files")
    p.add_argument("--split-file", dest="split_file", help="override the dataset split file")
    p.add_argument("--out-dir", dest="out_dir", help="run output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--dim", type=int)
    p.add_argument("--heads", type=int)
    p.add_argument("--layers", type=int)
    p.add_argument("--mask-hidden", dest="mask_hidden", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--weight-decay", dest="weight_decay", type=float)
    p.add_argument("--batch", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--beta", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--alpha", type=float)
    for flag in ("no-aff", "no-ddl", "no-bias-loss", "aff-residual", "shared-lambda",
                 "bd-project-first"):
        p.add_argument(f"--{flag}", dest=flag.replace("-", "_"),
                       action="store_const", const=True)
    p.add_argument("--train-per-class", dest="train_per_class", type=int)
    p.add_argument("--test-per-class", dest="test_per_class", type=int)
    p.add_argument("--train-subjects", dest="train_subjects", type=int)
    p.add_argument("--test-subjects", dest="test_subjects", type=int)
    p.add_argument("--snr-lo", dest="snr_lo", type=float)
    p.add_argument("--snr-hi", dest="snr_hi", type=float)


def _config_from_args(args: argparse.Namespace, mode: str) -> RunConfig:
    field_names = set(RunConfig.__dataclass_fields__)
    overrides = {k: v for k, v in vars(args).items() if k in field_names and v is not None}
    overrides["mode"] = mode
    return parse_config(overrides, getattr(args, "config", None))


def cmd_train(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args, "train")
    os.makedirs(cfg.out_dir, exist_ok=True)
    log_path = os.path.join(cfg.out_dir, "metrics.jsonl")
    result = train(cfg, log_path=log_path)
    ckpt_path = os.path.join(cfg.out_dir, "checkpoint.bin")
    save_checkpoint(checkpoint_from_model(result.model, len(result.history), result.adam), ckpt_path)
    if result.history:
        last = result.history[-1]
        print(f"epoch {last.epoch}: loss {last.train_loss:.4f}  "
              f"Sp/Se/Score {format_triple(last.sp, last.se, last.score)}")
    print(f"checkpoint: {ckpt_path}")
    print(f"metrics log: {log_path}")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    if not args.checkpoint:
        raise UsageError("eval requires --checkpoint")
    ckpt = load_checkpoint(args.checkpoint)
    model = model_from_checkpoint(ckpt)
    cfg = model.cfg
    for key in ("dataset", "split_file", "seed"):
        value = getattr(args, key, None)
        if value is not None:
            setattr(cfg, key, value)
    data = prepare_data(cfg)
    report = evaluate_split(model, data, args.split)
    print(f"confusion (rows=truth):\n{report.confusion}")
    print(f"Sp/Se/Score: {format_triple(report.sp, report.se, report.score)}")
    return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args, "synth")
    synth_cfg = SynthConfig(
        train_per_class=cfg.train_per_class, test_per_class=cfg.test_per_class,
        train_subjects=cfg.train_subjects, test_subjects=cfg.test_subjects,
        snr_db=(cfg.snr_lo, cfg.snr_hi),
    )
    manifest, clips = build_synth(synth_cfg, cfg.seed)
    split_path = write_synth(manifest, clips, cfg.out_dir)
    print(f"wrote {len(clips)} clips to {cfg.out_dir} (split file: {split_path})")
    return EXIT_OK


def cmd_gradcheck(args: argparse.Namespace) -> int:
    rows, ok = run_gradcheck(seed=args.seed if args.seed is not None else 0,
                             max_entries=args.max_entries,
                             corrupt_param=args.corrupt_param)
    for r in rows:
        status = "PASS" if r.passed else "FAIL"
        print(f"{status}  {r.name:<28} max_rel_err={r.max_rel_err:.3e}  "
              f"entries={r.n_checked}  tol={r.tol:g}")
    print("gradcheck: " + ("all checks passed" if ok else "FAILURES present"))
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_report(args: argparse.Namespace) -> int:
    print(ablation_report(args.logs))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="respden",
                                     description="respiratory sound classifier with implicit denoising")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a model")
    _add_config_flags(p_train)
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint on a split")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--dataset")
    p_eval.add_argument("--split-file", dest="split_file")
    p_eval.add_argument("--split", default="test", choices=("train", "test"))
    p_eval.add_argument("--seed", type=int)
    p_eval.set_defaults(func=cmd_eval)

    p_synth = sub.add_parser("synth", help="generate a synthetic dataset on disk")
    _add_config_flags(p_synth)
    p_synth.set_defaults(func=cmd_synth)

    p_gc = sub.add_parser("gradcheck", help="finite-difference verification suite")
    p_gc.add_argument("--seed", type=int)
    p_gc.add_argument("--max-entries", dest="max_entries", type=int, default=8,
                      help="entries sampled per large parameter tensor")
    p_gc.add_argument("--corrupt-param", dest="corrupt_param",
                      help="testing hook: force the named check row to fail")
    p_gc.set_defaults(func=cmd_gradcheck)

    p_rep = sub.add_parser("report", help="render an ablation table from metrics logs")
    p_rep.add_argument("logs", nargs="+")
    p_rep.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TrainingError,) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except (DatasetError, CheckpointError, ShapeError, UndefinedMetricError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
