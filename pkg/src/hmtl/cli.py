"""Command-line entry point: ``hmtl <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 data or validation error,
3 numeric failure. Every command that writes files takes ``--out`` and
holds a lock file in that directory while it runs.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from contextlib import contextmanager
from dataclasses import asdict
from pathlib import Path

import numpy as np

from hmtl.baselines import LogisticConfig, evaluate_logistic, fit_logistic
from hmtl.cohort import SynthConfig, generate_synthetic_cohort, read_cohort, select_cohort, split_cohort, write_cohort
from hmtl.data import prepare_cohort
from hmtl.errors import ConfigurationError, HmtlError, UsageError
from hmtl.evaluation import compare_models, evaluate_model, modality_subsets, run_ablation
from hmtl.explain import export_explanations
from hmtl.model import MODES, TARGETS, ModelConfig
from hmtl.preprocess import fit_scaler
from hmtl.reports import write_ablation, write_eval_report, write_history, write_json
from hmtl.training import LossWeights, TrainConfig, load_checkpoint, save_checkpoint, train_model

log = logging.getLogger("hmtl")

LOCK_NAME = ".hmtl.lock"
CHECKPOINT_NAME = "checkpoint.hmtl"
DEFAULT_SPLIT = (75, 15, 10)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


@contextmanager
def output_lock(out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lock = out / LOCK_NAME
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise HmtlError(f"{out} is in use by another command (remove {lock} if that command died)") from None
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield out
    finally:
        lock.unlink(missing_ok=True)


def derive_seeds(master: int) -> dict:
    """Independent integer seeds for each random component of one run."""
    split, init, train, boot = np.random.SeedSequence(int(master)).generate_state(4)
    return {"split": int(split), "init": int(init), "train": int(train), "bootstrap": int(boot)}


def load_config_file(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config file {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from None
    unknown = set(cfg) - {"seed", "synth", "model", "train", "split", "paths", "bootstrap"}
    if unknown:
        raise ConfigurationError(f"{path}: unknown top-level keys {sorted(unknown)}")
    return cfg


def _pick(flag, file_value, default=None):
    return flag if flag is not None else (file_value if file_value is not None else default)


def _require(value, name):
    if value is None:
        raise UsageError(f"{name} is required (flag or config file)")
    return value


def _csv_list(text, cast=str):
    return None if text is None else [cast(x) for x in text.split(",") if x]


# argument groups ------------------------------------------------------------


def _add_common(p):
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("-v", "--verbose", action="store_true")


def _add_model_flags(p):
    g = p.add_argument_group("model")
    g.add_argument("--mode", choices=MODES)
    g.add_argument("--modalities", help="comma list of imaging,cognition,clinical")
    g.add_argument("--target", choices=TARGETS, help="single_task target")
    g.add_argument("--lstm-layers", type=int)
    g.add_argument("--lstm-width", type=int)
    g.add_argument("--head-widths", help="comma list, e.g. 256,12,64")
    g.add_argument("--clinical-widths", help="comma list, e.g. 64,64")
    g.add_argument("--dropout", type=float)


def _add_train_flags(p):
    g = p.add_argument_group("training")
    g.add_argument("--epochs", type=int)
    g.add_argument("--batch-size", type=int)
    g.add_argument("--lr", type=float)
    g.add_argument("--weight-decay", type=float)
    g.add_argument("--patience", type=int, help="early stop on validation loss (off by default)")
    g.add_argument("--lambda-main", type=float)
    g.add_argument("--lambda-aux", type=float)
    g.add_argument("--lambda-imp", type=float)


_MODEL_FLAG_KEYS = {
    "mode": "mode",
    "modalities": "modalities",
    "target": "single_task_target",
    "lstm_layers": "lstm_layers",
    "lstm_width": "lstm_width",
    "head_widths": "head_widths",
    "clinical_widths": "clinical_widths",
    "dropout": "dropout",
}


def _model_flag_values(args) -> dict:
    out = {}
    for flag, key in _MODEL_FLAG_KEYS.items():
        v = getattr(args, flag, None)
        if v is None:
            continue
        if flag == "modalities":
            v = _csv_list(v)
        elif flag in ("head_widths", "clinical_widths"):
            v = _csv_list(v, int)
        out[key] = v
    return out


def model_config_from(args, file_cfg: dict, seed: int) -> ModelConfig:
    d = dict(file_cfg.get("model", {}))
    d.update(_model_flag_values(args))
    d["seed"] = seed
    return ModelConfig.from_dict(d)


def train_config_from(args, file_cfg: dict, seed: int) -> TrainConfig:
    d = dict(file_cfg.get("train", {}))
    lw = dict(d.pop("loss_weights", {}))
    for flag in ("epochs", "batch_size", "lr", "weight_decay", "patience"):
        v = getattr(args, flag, None)
        if v is not None:
            d[flag] = v
    for flag in ("lambda_main", "lambda_aux", "lambda_imp"):
        v = getattr(args, flag, None)
        if v is not None:
            lw[flag] = v
    unknown = set(d) - set(TrainConfig.__dataclass_fields__)
    if unknown:
        raise ConfigurationError(f"unknown train config keys {sorted(unknown)}")
    d["seed"] = seed
    d["loss_weights"] = LossWeights(**lw)
    return TrainConfig(**d)


def _check_flag_conflicts(args, config: ModelConfig) -> None:
    """Model flags given alongside a checkpoint must agree with it."""
    given = _model_flag_values(args)
    saved = config.to_dict()
    for key, value in given.items():
        if key == "modalities":
            value = [m for m in ("imaging", "cognition", "clinical") if m in value]
        if saved[key] != value:
            raise UsageError(f"--{key.replace('_', '-')} {value!r} conflicts with the checkpoint's {saved[key]!r}")


# shared steps -----------------------------------------------------------------


def load_selected(cohort_dir):
    return select_cohort(read_cohort(_require(cohort_dir, "--cohort")))


def split_and_scale(cohort, seed: int, ratios=DEFAULT_SPLIT):
    train, val, test = split_cohort(cohort, tuple(ratios), seed=derive_seeds(seed)["split"])
    if len(train) == 0:
        raise ConfigurationError("training split is empty")
    scaler = fit_scaler(train)
    return (train, val, test), scaler


# subcommands -------------------------------------------------------------------


def cmd_gen_synth(args, cfg) -> int:
    d = dict(cfg.get("synth", {}))
    if args.n is not None:
        d["n_subjects"] = args.n
    d["seed"] = args.seed
    synth = SynthConfig(**d)
    out = _require(_pick(args.out, cfg.get("paths", {}).get("out")), "--out")
    with output_lock(out) as o:
        cohort = generate_synthetic_cohort(synth)
        write_cohort(cohort, o)
        write_json(o / "synth.json", asdict(synth))
    log.info("wrote %d subjects to %s", len(cohort), out)
    return 0


def cmd_preprocess(args, cfg) -> int:
    paths = cfg.get("paths", {})
    cohort = load_selected(_pick(args.cohort, paths.get("cohort")))
    splits, scaler = split_and_scale(cohort, args.seed, cfg.get("split", DEFAULT_SPLIT))
    out = _require(_pick(args.out, paths.get("out")), "--out")
    with output_lock(out) as o:
        write_json(o / "split.json", {k: s.ids() for k, s in zip(("train", "val", "test"), splits)})
        (o / "scaler.json").write_text(scaler.to_json(), encoding="utf-8")
        with open(o / "selection.csv", "w", encoding="utf-8") as fh:
            fh.write("id,group,n_visits\n")
            for s in cohort:
                fh.write(f"{s.id},{s.group},{len(s.visits)}\n")
    return 0


def cmd_train(args, cfg) -> int:
    paths = cfg.get("paths", {})
    seeds = derive_seeds(args.seed)
    model_cfg = model_config_from(args, cfg, seeds["init"])
    train_cfg = train_config_from(args, cfg, seeds["train"])
    cohort = load_selected(_pick(args.cohort, paths.get("cohort")))
    (train, val, test), scaler = split_and_scale(cohort, args.seed, cfg.get("split", DEFAULT_SPLIT))
    out = _require(_pick(args.out, paths.get("out")), "--out")
    with output_lock(out) as o:
        train_items, val_items = prepare_cohort(train, scaler), prepare_cohort(val, scaler)

        def progress(epoch, row):
            log.info("epoch %d train %.5f val %.5f", epoch, row["train_loss"], row["val_loss"])

        result = train_model(train_items, val_items, model_cfg, train_cfg, progress=progress)
        write_history(result.history, o / "history.csv")
        split = {"train": train.ids(), "val": val.ids(), "test": test.ids()}
        write_json(o / "split.json", split)
        save_checkpoint(
            o / CHECKPOINT_NAME,
            result.params,
            model_cfg,
            scaler,
            seed=args.seed,
            extra={"split": split, "train_config": train_cfg.to_dict(), "best_epoch": result.best_epoch,
                   "name": args.name or model_cfg.mode},
        )
    return 0


def _test_items(ckpt, cohort):
    ids = ckpt.extra.get("split", {}).get("test")
    if not ids:
        raise ConfigurationError("checkpoint carries no test split")
    known = set(cohort.ids())
    missing = [i for i in ids if i not in known]
    if missing:
        raise ConfigurationError(f"{len(missing)} test subject(s) absent from the cohort, e.g. {missing[:3]}")
    return prepare_cohort(cohort.subset(ids), ckpt.scaler)


def _logistic_eval(ckpt, cohort):
    """Fit the cross-sectional comparator on the checkpoint's own training split."""
    ids = ckpt.extra.get("split", {}).get("train")
    if not ids:
        raise ConfigurationError("checkpoint carries no training split")
    train = prepare_cohort(cohort.subset(ids), ckpt.scaler)
    model = fit_logistic(train, LogisticConfig(seed=derive_seeds(ckpt.seed or 0)["train"]))
    return evaluate_logistic("logistic", _test_items(ckpt, cohort), model)


def cmd_evaluate(args, cfg) -> int:
    return _compare([args.checkpoint], None, None, args, cfg)


def cmd_compare(args, cfg) -> int:
    return _compare(args.checkpoints, _csv_list(args.names), args.proposed, args, cfg)


def _compare(paths_list, names, proposed, args, cfg) -> int:
    paths = cfg.get("paths", {})
    cohort = load_selected(_pick(args.cohort, paths.get("cohort")))
    ckpts = [load_checkpoint(p) for p in paths_list]
    if names is not None and len(names) != len(ckpts):
        raise UsageError(f"--names has {len(names)} entries for {len(ckpts)} checkpoints")
    if len(ckpts) == 1:
        _check_flag_conflicts(args, ckpts[0].config)
    evals = []
    if getattr(args, "with_logistic", False):
        evals.append(_logistic_eval(ckpts[0], cohort))
    for i, ck in enumerate(ckpts):
        name = names[i] if names else ck.extra.get("name", f"model{i}")
        evals.append(evaluate_model(name, _test_items(ck, cohort), ck.params, ck.config))
    boot = cfg.get("bootstrap", {})
    seed = _pick(args.seed, boot.get("seed"), derive_seeds(ckpts[0].seed or 0)["bootstrap"])
    B = _pick(args.B, boot.get("B"), 200)
    report = compare_models(evals, B=B, seed=seed, proposed=proposed, threads=args.threads)
    report.meta["checkpoints"] = [str(Path(p).name) for p in paths_list]
    out = _require(_pick(args.out, paths.get("out")), "--out")
    with output_lock(out) as o:
        write_eval_report(report, o)
    return 0


def cmd_ablate(args, cfg) -> int:
    paths = cfg.get("paths", {})
    seeds = derive_seeds(args.seed)
    base = model_config_from(args, cfg, seeds["init"])
    train_cfg = train_config_from(args, cfg, seeds["train"])
    cohort = load_selected(_pick(args.cohort, paths.get("cohort")))
    (train, val, test), scaler = split_and_scale(cohort, args.seed, cfg.get("split", DEFAULT_SPLIT))
    subsets = modality_subsets() if args.subsets is None else [s.split(",") for s in args.subsets.split(";")]
    B = _pick(args.B, cfg.get("bootstrap", {}).get("B"), 200)
    out = _require(_pick(args.out, paths.get("out")), "--out")
    with output_lock(out) as o:
        rows = run_ablation(
            base, prepare_cohort(train, scaler), prepare_cohort(val, scaler), prepare_cohort(test, scaler),
            train_cfg, subsets=subsets, B=B, seed=seeds["bootstrap"],
            progress=lambda r: log.info("finished %s", "+".join(r["modalities"])),
        )
        write_ablation(rows, o, meta={"seed": args.seed, "B": B, "split_sizes": [len(train), len(val), len(test)]})
    return 0


def cmd_explain(args, cfg) -> int:
    paths = cfg.get("paths", {})
    ck = load_checkpoint(args.checkpoint)
    _check_flag_conflicts(args, ck.config)
    cohort = load_selected(_pick(args.cohort, paths.get("cohort")))
    if args.subjects in (None, "test"):
        ids = ck.extra.get("split", {}).get("test")
    elif args.subjects == "all":
        ids = "all"
    else:
        ids = _csv_list(args.subjects)
    out = _require(_pick(args.out, paths.get("out")), "--out")
    with output_lock(out) as o:
        export_explanations(ck.params, ck.config, ck.scaler, cohort, ids, o)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hmtl", description="Hierarchical multi-task progression-risk models.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-synth", help="write a synthetic cohort")
    _add_common(p)
    p.add_argument("--n", type=int, help="number of subjects (default 634)")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen_synth)

    p = sub.add_parser("preprocess", help="select, split and fit the scaler; write them out")
    _add_common(p)
    p.add_argument("--cohort")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("train", help="train one model and write a checkpoint")
    _add_common(p)
    p.add_argument("--cohort")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out")
    p.add_argument("--name", help="model name used in reports (default: the mode)")
    _add_model_flags(p)
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    for name, helptext in (("evaluate", "metrics with bootstrap intervals for one checkpoint"),
                           ("compare", "compare checkpoints against a proposed model")):
        p = sub.add_parser(name, help=helptext)
        _add_common(p)
        if name == "evaluate":
            p.add_argument("--checkpoint", required=True)
            _add_model_flags(p)
            p.set_defaults(func=cmd_evaluate)
        else:
            p.add_argument("--checkpoints", nargs="+", required=True)
            p.add_argument("--names", help="comma list, one per checkpoint")
            p.add_argument("--proposed", help="name of the reference model (default: last)")
            p.set_defaults(func=cmd_compare)
        p.add_argument("--cohort")
        p.add_argument("--out")
        p.add_argument("--seed", type=int, help="bootstrap seed (default: derived from the checkpoint seed)")
        p.add_argument("--B", type=int, help="bootstrap resamples (default 200)")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--with-logistic", action="store_true",
                       help="add a cross-sectional logistic-regression row fitted on the training split")

    p = sub.add_parser("ablate", help="train and evaluate every modality subset")
    _add_common(p)
    p.add_argument("--cohort")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out")
    p.add_argument("--subsets", help="';'-separated comma lists (default: all 7)")
    p.add_argument("--B", type=int)
    _add_model_flags(p)
    _add_train_flags(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("explain", help="export per-timestep risk, composite and relevance traces")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--cohort")
    p.add_argument("--subjects", help="comma list of ids, 'all', or 'test' (default)")
    p.add_argument("--out")
    _add_model_flags(p)
    p.set_defaults(func=cmd_explain)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        cfg = load_config_file(args.config)
        return args.func(args, cfg)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"hmtl: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except HmtlError as exc:
        print(f"hmtl: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (TypeError, ValueError) as exc:
        # malformed config values that slipped past dataclass validation
        print(f"hmtl: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"hmtl: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
