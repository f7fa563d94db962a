"""Command-line entry point: ``ae2lstm {gen-synth,train,predict,evaluate}``.

Every pipeline field can be set in the ``--config`` file and overridden by a
flag of the same name (``--nh 32``). On failure a single JSON line
``{"error": kind, "message": ...}`` goes to stderr and the exit code is
non-zero (2 for usage/config errors, 1 otherwise).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import checkpoint
from .cohort import Cohort, load_cohort, save_cohort
from .config import FIELD_TYPES, PipelineConfig, dump_config, load_config
from .errors import Ae2LstmError, CompatibilityError, UsageError
from .evaluation import run_experiment
from .lstm import predict
from .pipeline import encode_all, train_pipeline
from .synthetic import generate_synthetic_cohort

log = logging.getLogger("ae2lstm")


def _config(args) -> PipelineConfig:
    overrides = {name: getattr(args, name) for name in FIELD_TYPES if getattr(args, name, None) is not None}
    return load_config(args.config, overrides)


def _cohort(cfg: PipelineConfig) -> Cohort:
    if cfg.manifest:
        return load_cohort(cfg.manifest)
    return generate_synthetic_cohort(cfg.n_patients, cfg.dims, cfg.seed, cfg.poor_fraction)


def _outdir(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from None
    return out


def cmd_gen_synth(args) -> int:
    cfg = _config(args)
    cohort = generate_synthetic_cohort(cfg.n_patients, cfg.dims, cfg.seed, cfg.poor_fraction)
    manifest = save_cohort(cohort, _outdir(args.out))
    print(manifest)
    return 0


def cmd_train(args) -> int:
    cfg = _config(args)
    out = _outdir(args.out)
    cohort = _cohort(cfg)
    stack = None
    if args.fusion_checkpoint:
        stack = checkpoint.load_fusion(checkpoint.load(args.fusion_checkpoint))
        log.info("reusing autoencoders from %s", args.fusion_checkpoint)
    trained = train_pipeline(cohort.records, cfg, cfg.seed, stack)
    checkpoint.save(out / "fusion.ckpt", checkpoint.dump_fusion(trained.stack))
    checkpoint.save(out / "lstm.ckpt", checkpoint.dump_lstm(trained.lstm.model))
    if args.feature_cache:
        seqs = encode_all(trained.stack, cohort.records, cfg)
        checkpoint.save(out / "features.bin", checkpoint.dump_features(seqs))
    report = {
        "config": {k: list(v) if isinstance(v, tuple) else v for k, v in cfg.to_dict().items()},
        "ae_traces": trained.ae_traces,
        "ae_training_skipped": stack is not None,
        "lstm_train_trace": trained.lstm.train_trace,
        "lstm_val_trace": trained.lstm.val_trace,
        "lstm_best_epoch": trained.lstm.best_epoch,
        "lstm_stopped_epoch": trained.lstm.stopped_epoch,
    }
    (out / "train_report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    print(out / "fusion.ckpt")
    print(out / "lstm.ckpt")
    return 0


def cmd_predict(args) -> int:
    stack = checkpoint.load_fusion(checkpoint.load(args.fusion))
    model = checkpoint.load_lstm(checkpoint.load(args.lstm))
    if stack.d_final != model.input_size:
        raise CompatibilityError(f"fusion feature size {stack.d_final} != LSTM input size {model.input_size}")
    cohort = load_cohort(args.manifest)
    lines = ["id\tprobability\tclass"]
    for record in cohort.records:
        nx, ny, _ = record.dims
        if nx * ny != stack.input_dim:
            raise CompatibilityError(f"patient {record.id}: slice {nx}x{ny}={nx * ny} pixels "
                                     f"!= fusion input size {stack.input_dim}")
        seq = encode_all(stack, [record], _config(args))[0]
        p, cls = predict(model, seq)
        lines.append(f"{record.id}\t{p:.6f}\t{cls}")
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_evaluate(args) -> int:
    cfg = _config(args)
    cohort = _cohort(cfg)
    labels = cohort.labels
    if labels.min() == labels.max():
        raise UsageError("cohort contains a single outcome class; evaluation needs both")
    out = _outdir(args.out)
    summary = run_experiment(cohort, cfg)
    (out / "report.tsv").write_text(summary.to_table())
    (out / "report.json").write_text(summary.to_json())
    (out / "config.ini").write_text(dump_config(cfg))
    sys.stdout.write(summary.to_table())
    return 0


def _add_config_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="INI file with a [pipeline] section")
    group = p.add_argument_group("pipeline overrides")
    for name, kind in FIELD_TYPES.items():
        group.add_argument(f"--{name}", dest=name, default=None, metavar=kind.split("[")[0].upper())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ae2lstm", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synth", help="write a synthetic cohort as NIfTI files plus manifest")
    p.add_argument("--out", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_gen_synth)

    p = sub.add_parser("train", help="train autoencoders and LSTM on a whole cohort")
    p.add_argument("--out", required=True)
    p.add_argument("--fusion-checkpoint", help="reuse a trained fusion stack, skipping AE training")
    p.add_argument("--feature-cache", action="store_true", help="also write encoded feature sequences")
    _add_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="score the patients of a manifest")
    p.add_argument("--fusion", required=True)
    p.add_argument("--lstm", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out")
    p.add_argument("--config")
    p.add_argument("--drop_empty_slices", default=None)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="repeated k-fold cross-validation report")
    p.add_argument("--out", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except Ae2LstmError as exc:
        sys.stderr.write(json.dumps({"error": exc.kind, "message": str(exc)}) + "\n")
        return 2 if isinstance(exc, UsageError) else 1
    except OSError as exc:
        sys.stderr.write(json.dumps({"error": "io", "message": str(exc)}) + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
